#include <cmath>
#include <limits>
#include <numbers>

#include "fbbo/inference.hpp"

namespace fbbo {

namespace {

// Step-size sequence: eta * k^(-1/2) / (1 + sqrt(s_k)) with s_k an
// exponentially weighted average of squared gradients.
class AdaptiveStep {
 public:
  AdaptiveStep(Eigen::Index size, double eta) : s_(Vector::Zero(size)), eta_(eta) {}

  Vector step(const Vector& grad) {
    ++k_;
    if (k_ == 1)
      s_ = grad.cwiseAbs2();
    else
      s_ = kPre * grad.cwiseAbs2() + (1.0 - kPre) * s_;
    const double scale = eta_ * std::pow(static_cast<double>(k_), -0.5 + 1e-16);
    return (scale * grad.array() / (kTau + s_.array().sqrt())).matrix();
  }

 private:
  static constexpr double kPre = 0.1;
  static constexpr double kTau = 1.0;
  Vector s_;
  double eta_;
  long k_ = 0;
};

int lower_size(int J) { return J * (J + 1) / 2; }

// Packs (mean, scale) into one parameter vector: mean first, then either the
// log standard deviations or the lower triangle of the factor, column-major.
Vector pack(const VariationalState& s) {
  const int J = s.dim();
  const bool mf = s.family == VariationalFamily::MeanField;
  Vector lambda(J + (mf ? J : lower_size(J)));
  lambda.head(J) = s.mean;
  if (mf) {
    lambda.tail(J) = s.log_std;
  } else {
    int k = J;
    for (int c = 0; c < J; ++c)
      for (int r = c; r < J; ++r) lambda[k++] = s.chol(r, c);
  }
  return lambda;
}

void unpack(const Vector& lambda, VariationalState& s) {
  const int J = s.dim();
  s.mean = lambda.head(J);
  if (s.family == VariationalFamily::MeanField) {
    s.log_std = lambda.tail(J);
  } else {
    int k = J;
    for (int c = 0; c < J; ++c)
      for (int r = c; r < J; ++r) s.chol(r, c) = lambda[k++];
  }
}

double entropy(const VariationalState& s) {
  const int J = s.dim();
  const double constant = 0.5 * J * (1.0 + std::log(2.0 * std::numbers::pi));
  if (s.family == VariationalFamily::MeanField) return constant + s.log_std.sum();
  return constant + s.chol.diagonal().cwiseAbs().array().log().sum();
}

}  // namespace

VariationalState advi_fit(const LogDensity& density, const Vector& init_mean,
                          VariationalFamily family, const AdviOptions& opt, Rng& rng) {
  if (opt.max_steps < 1 || opt.mc_samples < 1 || opt.window < 1)
    throw std::invalid_argument("advi_fit: max_steps, mc_samples and window must be >= 1");
  const int J = static_cast<int>(init_mean.size());
  VariationalState state;
  state.family = family;
  state.mean = init_mean;
  if (family == VariationalFamily::MeanField)
    state.log_std = Vector::Constant(J, std::log(opt.init_scale));
  else
    state.chol = opt.init_scale * Matrix::Identity(J, J);

  Vector lambda = pack(state);
  AdaptiveStep stepper(lambda.size(), opt.step_size);
  std::normal_distribution<double> normal;

  int non_finite_run = 0;
  double previous_window = std::numeric_limits<double>::quiet_NaN();
  double window_sum = 0.0;
  int window_count = 0;

  Vector eta(J);
  for (int step = 1; step <= opt.max_steps; ++step) {
    Vector grad = Vector::Zero(lambda.size());
    double log_p_sum = 0.0;
    int used = 0;
    for (int s = 0; s < opt.mc_samples; ++s) {
      for (int j = 0; j < J; ++j) eta[j] = normal(rng);
      Vector z;
      if (family == VariationalFamily::MeanField)
        z = (state.mean.array() + state.log_std.array().exp() * eta.array()).matrix();
      else
        z = state.mean + state.chol.triangularView<Eigen::Lower>() * eta;
      const LogDensityValue v = density(z);
      if (!std::isfinite(v.value) || !v.gradient.allFinite()) continue;
      ++used;
      log_p_sum += v.value;
      grad.head(J) += v.gradient;
      if (family == VariationalFamily::MeanField) {
        grad.tail(J).array() += v.gradient.array() * eta.array() * state.log_std.array().exp();
      } else {
        int k = J;
        for (int c = 0; c < J; ++c)
          for (int r = c; r < J; ++r) grad[k++] += v.gradient[r] * eta[c];
      }
    }

    const double elbo = used > 0 ? log_p_sum / used + entropy(state)
                                 : -std::numeric_limits<double>::infinity();
    state.elbo_trace.push_back(elbo);
    state.steps = step;
    if (used == 0) {
      if (++non_finite_run >= opt.window)
        throw InferenceFailure("ADVI: ELBO non-finite for a full window");
      continue;
    }
    non_finite_run = 0;

    grad /= used;
    if (family == VariationalFamily::MeanField) {
      grad.tail(J).array() += 1.0;
    } else {
      int k = J;
      for (int c = 0; c < J; ++c)
        for (int r = c; r < J; ++r, ++k)
          if (r == c) grad[k] += 1.0 / state.chol(r, c);
    }
    lambda += stepper.step(grad);
    unpack(lambda, state);

    window_sum += elbo;
    ++window_count;
    if (step % opt.window == 0) {
      const double current = window_sum / window_count;
      if (std::isfinite(previous_window) &&
          std::abs(current - previous_window) <
              opt.tolerance * std::max(std::abs(previous_window), 1e-12)) {
        state.converged = true;
        break;
      }
      previous_window = current;
      window_sum = 0.0;
      window_count = 0;
    }
  }
  return state;
}

VariationalState advi_fit(const ParamLayout& layout, const PriorSpec& priors,
                          const Dataset& data, VariationalFamily family,
                          const AdviOptions& options, Rng& rng) {
  return advi_fit(make_log_posterior(layout, priors, data), prior_mode_z(layout, priors), family,
                  options, rng);
}

}  // namespace fbbo
