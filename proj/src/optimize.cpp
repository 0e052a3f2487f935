#include "fbbo/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace fbbo {

namespace {

void project(Vector& x, const LbfgsOptions& opt) {
  if (opt.lower) x = x.cwiseMax(*opt.lower);
  if (opt.upper) x = x.cwiseMin(*opt.upper);
}

// Gradient with components that would push through an active bound removed.
Vector projected_gradient(const Vector& x, const Vector& g, const LbfgsOptions& opt) {
  Vector pg = g;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (opt.lower && x[i] <= (*opt.lower)[i] && g[i] > 0.0) pg[i] = 0.0;
    if (opt.upper && x[i] >= (*opt.upper)[i] && g[i] < 0.0) pg[i] = 0.0;
  }
  return pg;
}

struct Pair {
  Vector s;
  Vector y;
  double rho;
};

Vector two_loop(const Vector& g, const std::deque<Pair>& history) {
  Vector q = g;
  std::vector<double> alpha(history.size());
  for (int i = static_cast<int>(history.size()) - 1; i >= 0; --i) {
    alpha[i] = history[i].rho * history[i].s.dot(q);
    q -= alpha[i] * history[i].y;
  }
  if (!history.empty()) {
    const Pair& last = history.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
  }
  for (std::size_t i = 0; i < history.size(); ++i) {
    const double beta = history[i].rho * history[i].y.dot(q);
    q += (alpha[i] - beta) * history[i].s;
  }
  return -q;
}

}  // namespace

OptimResult lbfgs_minimize(const Objective& objective, Vector x0, const LbfgsOptions& opt) {
  const Eigen::Index n = x0.size();
  OptimResult result;
  Vector x = std::move(x0);
  project(x, opt);
  Vector g(n);
  double f = objective(x, g);
  result.x = x;
  result.value = f;
  if (!std::isfinite(f) || !g.allFinite()) return result;

  std::deque<Pair> history;
  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    result.iterations = iter + 1;
    Vector pg = projected_gradient(x, g, opt);
    if (pg.lpNorm<Eigen::Infinity>() < opt.gradient_tolerance) {
      result.converged = true;
      break;
    }

    Vector dir = two_loop(pg, history);
    for (Eigen::Index i = 0; i < n; ++i)
      if (pg[i] == 0.0 && g[i] != 0.0) dir[i] = 0.0;
    if (!(dir.dot(pg) < 0.0)) {
      history.clear();
      dir = -pg;
    }
    // First step without curvature information: cap its length.
    if (history.empty()) dir *= std::min(1.0, 1.0 / dir.norm());

    double step = 1.0;
    Vector x_new(n), g_new(n);
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = x + step * dir;
      project(x_new, opt);
      f_new = objective(x_new, g_new);
      if (std::isfinite(f_new) && g_new.allFinite() &&
          f_new <= f + 1e-4 * g.dot(x_new - x)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!history.empty()) {
        history.clear();
        continue;
      }
      result.converged = true;
      break;
    }

    Vector s = x_new - x;
    Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      history.push_back({s, y, 1.0 / sy});
      if (static_cast<int>(history.size()) > opt.memory) history.pop_front();
    }

    const double decrease = f - f_new;
    x = std::move(x_new);
    g = g_new;
    f = f_new;
    if (decrease <= opt.relative_tolerance * std::max({std::abs(f), 1.0})) {
      result.converged = true;
      break;
    }
  }
  result.x = x;
  result.value = f;
  return result;
}

Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x,
                          double h) {
  Vector g(x.size());
  Vector xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return g;
}

}  // namespace fbbo
