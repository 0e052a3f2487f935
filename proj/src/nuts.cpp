#include <cmath>
#include <future>
#include <limits>

#include "fbbo/inference.hpp"

namespace fbbo {

namespace {

// Leaves whose energy error exceeds this are divergent.
constexpr double kMaxEnergyError = 1000.0;

// Step-size dual averaging, Hoffman & Gelman (2014) defaults.
class DualAveraging {
 public:
  DualAveraging(double step, double target) : target_(target) { restart(step); }

  void restart(double step) {
    mu_ = std::log(10.0 * step);
    log_step_ = std::log(step);
    log_step_bar_ = 0.0;
    h_bar_ = 0.0;
    m_ = 0;
  }

  void update(double accept_stat) {
    if (!std::isfinite(accept_stat)) accept_stat = 0.0;
    ++m_;
    const double w = 1.0 / (m_ + kT0);
    h_bar_ = (1.0 - w) * h_bar_ + w * (target_ - accept_stat);
    log_step_ = mu_ - std::sqrt(static_cast<double>(m_)) / kGamma * h_bar_;
    const double decay = std::pow(static_cast<double>(m_), -kKappa);
    log_step_bar_ = decay * log_step_ + (1.0 - decay) * log_step_bar_;
  }

  double current() const { return std::exp(log_step_); }
  double averaged() const { return std::exp(log_step_bar_); }

 private:
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;

  double target_;
  double mu_ = 0.0;
  double log_step_ = 0.0;
  double log_step_bar_ = 0.0;
  double h_bar_ = 0.0;
  long m_ = 0;
};

struct Subtree {
  PhasePoint minus;
  PhasePoint plus;
  PhasePoint proposal;
  long n_valid = 0;
  bool ok = true;
  double sum_accept = 0.0;
  long n_leaves = 0;
  bool divergent = false;
};

struct TransitionStats {
  double accept_stat = 0.0;
  bool divergent = false;
};

struct Window {
  int start;
  int end;
};

// Metric adaptation windows in the style of Stan's windowed adaptation.
std::vector<Window> metric_windows(int burn_in) {
  std::vector<Window> windows;
  if (burn_in < 20) return windows;
  int init_buffer = 75, term_buffer = 50, base_window = 25;
  if (burn_in < init_buffer + term_buffer + base_window) {
    init_buffer = static_cast<int>(0.15 * burn_in);
    term_buffer = static_cast<int>(0.1 * burn_in);
    base_window = burn_in - init_buffer - term_buffer;
  }
  const int last = burn_in - term_buffer;
  int start = init_buffer;
  int size = base_window;
  while (start < last) {
    int end = start + size;
    if (end + 2 * size > last) end = last;
    windows.push_back({start, end});
    start = end;
    size *= 2;
  }
  return windows;
}

class NutsChain {
 public:
  NutsChain(const LogDensity& density, const NutsOptions& options, Rng rng)
      : density_(density), options_(options), rng_(std::move(rng)) {}

  PhasePoint initial_point(const Vector& z) {
    PhasePoint pt;
    pt.z = z;
    evaluate(pt);
    pt.p = Vector::Zero(z.size());
    return pt;
  }

  // Hoffman & Gelman's heuristic: double or halve until the one-step
  // acceptance ratio crosses 1/2.
  double reasonable_step(const PhasePoint& start, const Vector& inv_metric) {
    double step = 1.0;
    PhasePoint pt = start;
    pt.p = draw_momentum(inv_metric);
    const double h0 = hamiltonian(pt, inv_metric);
    auto log_ratio = [&](double eps) {
      const double h = hamiltonian(leapfrog(density_, pt, eps, inv_metric), inv_metric);
      return std::isfinite(h) ? h0 - h : -std::numeric_limits<double>::infinity();
    };
    double lr = log_ratio(step);
    const int dir = lr > std::log(0.5) ? 1 : -1;
    for (int i = 0; i < 100; ++i) {
      if (dir == 1 && !(lr > std::log(0.5))) break;
      if (dir == -1 && !(lr < std::log(0.5))) break;
      step = dir == 1 ? step * 2.0 : step * 0.5;
      lr = log_ratio(step);
    }
    return step;
  }

  TransitionStats transition(PhasePoint& current, double step, const Vector& inv_metric) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    current.p = draw_momentum(inv_metric);
    const double h0 = hamiltonian(current, inv_metric);
    const double log_u = -h0 + std::log(unif(rng_));

    PhasePoint minus = current, plus = current;
    long n = 1;
    bool running = true;
    TransitionStats stats;
    double sum_accept = 0.0;
    long n_leaves = 0;
    for (int depth = 0; running && depth < options_.max_depth; ++depth) {
      const int direction = unif(rng_) < 0.5 ? -1 : 1;
      Subtree t = direction == -1 ? build(minus, log_u, direction, depth, step, h0, inv_metric)
                                  : build(plus, log_u, direction, depth, step, h0, inv_metric);
      if (direction == -1)
        minus = t.minus;
      else
        plus = t.plus;
      sum_accept += t.sum_accept;
      n_leaves += t.n_leaves;
      stats.divergent = stats.divergent || t.divergent;
      if (t.ok && unif(rng_) < static_cast<double>(t.n_valid) / static_cast<double>(n)) {
        current.z = t.proposal.z;
        current.grad = t.proposal.grad;
        current.log_density = t.proposal.log_density;
      }
      n += t.n_valid;
      running = t.ok && no_u_turn(minus, plus, inv_metric);
    }
    stats.accept_stat = n_leaves > 0 ? sum_accept / n_leaves : 0.0;
    return stats;
  }

 private:
  void evaluate(PhasePoint& pt) const {
    LogDensityValue v = density_(pt.z);
    pt.log_density = v.value;
    pt.grad = std::isfinite(v.value) ? v.gradient : Vector::Zero(pt.z.size());
  }

  Vector draw_momentum(const Vector& inv_metric) {
    Vector p(inv_metric.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = normal_(rng_) / std::sqrt(inv_metric[i]);
    return p;
  }

  static bool no_u_turn(const PhasePoint& minus, const PhasePoint& plus, const Vector& inv_metric) {
    const Vector dz = plus.z - minus.z;
    return dz.dot(inv_metric.cwiseProduct(minus.p)) >= 0.0 &&
           dz.dot(inv_metric.cwiseProduct(plus.p)) >= 0.0;
  }

  Subtree build(const PhasePoint& from, double log_u, int direction, int depth, double step,
                double h0, const Vector& inv_metric) {
    if (depth == 0) {
      Subtree leaf;
      PhasePoint next = leapfrog(density_, from, direction * step, inv_metric);
      const double h = hamiltonian(next, inv_metric);
      const double neg_h = std::isfinite(h) ? -h : -std::numeric_limits<double>::infinity();
      leaf.n_valid = log_u <= neg_h ? 1 : 0;
      leaf.ok = log_u < kMaxEnergyError + neg_h;
      leaf.divergent = !leaf.ok;
      leaf.sum_accept = std::isfinite(h) ? std::min(1.0, std::exp(h0 - h)) : 0.0;
      leaf.n_leaves = 1;
      leaf.minus = next;
      leaf.plus = next;
      leaf.proposal = std::move(next);
      return leaf;
    }
    Subtree first = build(from, log_u, direction, depth - 1, step, h0, inv_metric);
    if (!first.ok) return first;
    Subtree second = direction == -1
                         ? build(first.minus, log_u, direction, depth - 1, step, h0, inv_metric)
                         : build(first.plus, log_u, direction, depth - 1, step, h0, inv_metric);
    if (direction == -1)
      first.minus = std::move(second.minus);
    else
      first.plus = std::move(second.plus);
    const long total = first.n_valid + second.n_valid;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (total > 0 && unif(rng_) < static_cast<double>(second.n_valid) / total)
      first.proposal = std::move(second.proposal);
    first.n_valid = total;
    first.sum_accept += second.sum_accept;
    first.n_leaves += second.n_leaves;
    first.divergent = first.divergent || second.divergent;
    first.ok = second.ok && no_u_turn(first.minus, first.plus, inv_metric);
    return first;
  }

  const LogDensity& density_;
  const NutsOptions& options_;
  Rng rng_;
  std::normal_distribution<double> normal_;
};

struct ChainOutput {
  Matrix kept;
  double accept_sum = 0.0;
  long transitions = 0;
  long divergences = 0;
  double step_size = 0.0;
};

ChainOutput run_chain(const LogDensity& density, const Vector& start, const NutsOptions& opt,
                      int kept, std::uint64_t seed) {
  NutsChain chain(density, opt, make_stream(seed));
  const int J = static_cast<int>(start.size());
  PhasePoint current = chain.initial_point(start);
  Vector inv_metric = Vector::Ones(J);
  double step = chain.reasonable_step(current, inv_metric);
  DualAveraging adapt(step, opt.target_accept);

  const std::vector<Window> windows = metric_windows(opt.burn_in);
  std::size_t next_window = 0;
  std::vector<Vector> window_draws;

  for (int it = 0; it < opt.burn_in; ++it) {
    const TransitionStats s = chain.transition(current, adapt.current(), inv_metric);
    adapt.update(s.accept_stat);
    if (next_window < windows.size() && it >= windows[next_window].start)
      window_draws.push_back(current.z);
    if (next_window < windows.size() && it + 1 == windows[next_window].end) {
      const double n = static_cast<double>(window_draws.size());
      if (n >= 3) {
        Vector mean = Vector::Zero(J), sq = Vector::Zero(J);
        for (const Vector& z : window_draws) mean += z;
        mean /= n;
        for (const Vector& z : window_draws) sq += (z - mean).cwiseAbs2();
        const Vector var = sq / (n - 1.0);
        // Shrink towards a small multiple of the identity.
        inv_metric = (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
      }
      window_draws.clear();
      ++next_window;
      adapt.restart(chain.reasonable_step(current, inv_metric));
    }
  }
  step = opt.burn_in > 0 ? adapt.averaged() : step;
  if (!std::isfinite(step) || step <= 0.0) step = adapt.current();

  ChainOutput out;
  out.step_size = step;
  out.kept.resize(kept, J);
  for (int k = 0; k < kept; ++k) {
    for (int i = 0; i < opt.thin; ++i) {
      const TransitionStats s = chain.transition(current, step, inv_metric);
      out.accept_sum += s.accept_stat;
      out.divergences += s.divergent ? 1 : 0;
      ++out.transitions;
    }
    out.kept.row(k) = current.z.transpose();
  }
  return out;
}

}  // namespace

PhasePoint leapfrog(const LogDensity& density, const PhasePoint& start, double step,
                    const Vector& inv_metric) {
  PhasePoint next;
  next.p = start.p + 0.5 * step * start.grad;
  next.z = start.z + step * inv_metric.cwiseProduct(next.p);
  LogDensityValue v = density(next.z);
  next.log_density = v.value;
  next.grad = std::isfinite(v.value) ? v.gradient : Vector::Zero(next.z.size());
  next.p += 0.5 * step * next.grad;
  return next;
}

double hamiltonian(const PhasePoint& point, const Vector& inv_metric) {
  return -point.log_density + 0.5 * point.p.dot(inv_metric.cwiseProduct(point.p));
}

std::vector<double> split_rhat(const std::vector<Matrix>& chains) {
  if (chains.empty()) return {};
  const Eigen::Index n_total = chains.front().rows();
  const Eigen::Index half = n_total / 2;
  const Eigen::Index J = chains.front().cols();
  if (half < 2) return std::vector<double>(J, std::numeric_limits<double>::quiet_NaN());

  std::vector<Matrix> splits;
  for (const Matrix& c : chains) {
    splits.push_back(c.topRows(half));
    splits.push_back(c.middleRows(n_total - half, half));
  }
  const double m = static_cast<double>(splits.size());
  const double n = static_cast<double>(half);
  std::vector<double> rhat(J);
  for (Eigen::Index j = 0; j < J; ++j) {
    Vector means(splits.size()), vars(splits.size());
    for (std::size_t s = 0; s < splits.size(); ++s) {
      const Vector col = splits[s].col(j);
      means[s] = col.mean();
      vars[s] = (col.array() - means[s]).square().sum() / (n - 1.0);
    }
    const double B = n * (means.array() - means.mean()).square().sum() / (m - 1.0);
    const double W = vars.mean();
    const double var_plus = (n - 1.0) / n * W + B / n;
    rhat[j] = W > 0.0 ? std::sqrt(var_plus / W) : (B > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
  }
  return rhat;
}

McmcResult nuts_sample(const LogDensity& density, const Vector& init, const NutsOptions& opt,
                       Rng& rng) {
  if (opt.chains < 1 || opt.num_samples < 1 || opt.thin < 1 || opt.burn_in < 0)
    throw std::invalid_argument("nuts_sample: invalid options");
  if (opt.num_samples % opt.chains != 0)
    throw std::invalid_argument("nuts_sample: num_samples must be divisible by chains");
  const int kept = opt.num_samples / opt.chains;

  std::uniform_real_distribution<double> unif(-opt.init_radius, opt.init_radius);
  std::vector<Vector> starts;
  std::vector<std::uint64_t> seeds;
  for (int c = 0; c < opt.chains; ++c) {
    Vector s = init;
    for (Eigen::Index i = 0; i < s.size(); ++i) s[i] += unif(rng);
    starts.push_back(std::move(s));
    seeds.push_back(child_seed(rng));
  }

  std::vector<std::future<ChainOutput>> futures;
  for (int c = 0; c < opt.chains; ++c)
    futures.push_back(std::async(std::launch::async, run_chain, std::cref(density),
                                 std::cref(starts[c]), std::cref(opt), kept, seeds[c]));
  std::vector<ChainOutput> outputs;
  for (auto& f : futures) outputs.push_back(f.get());

  McmcResult result;
  const Eigen::Index J = init.size();
  result.draws.resize(opt.num_samples, J);
  std::vector<Matrix> chains;
  double accept = 0.0;
  long transitions = 0, divergences = 0;
  for (int c = 0; c < opt.chains; ++c) {
    result.draws.middleRows(static_cast<Eigen::Index>(c) * kept, kept) = outputs[c].kept;
    chains.push_back(outputs[c].kept);
    accept += outputs[c].accept_sum;
    transitions += outputs[c].transitions;
    divergences += outputs[c].divergences;
  }
  result.rhat = split_rhat(chains);
  result.accept_rate = accept / transitions;
  result.divergent_fraction = static_cast<double>(divergences) / transitions;
  result.step_size = outputs.front().step_size;
  if (result.divergent_fraction > opt.max_divergent_fraction)
    throw InferenceFailure("NUTS: divergent fraction " + std::to_string(result.divergent_fraction) +
                           " exceeds limit after adaptation");
  return result;
}

PosteriorSamples nuts_sample(const ParamLayout& layout, const PriorSpec& priors,
                             const Dataset& data, const NutsOptions& options, Rng& rng) {
  const LogDensity density = make_log_posterior(layout, priors, data);
  const McmcResult r = nuts_sample(density, prior_mode_z(layout, priors), options, rng);
  PosteriorSamples out;
  out.provenance = Provenance::Mcmc;
  for (Eigen::Index m = 0; m < r.draws.rows(); ++m)
    out.samples.push_back(layout.to_theta(r.draws.row(m).transpose()));
  out.diagnostics.rhat = r.rhat;
  out.diagnostics.accept_rate = r.accept_rate;
  out.diagnostics.divergent_fraction = r.divergent_fraction;
  out.diagnostics.step_size = r.step_size;
  return out;
}

}  // namespace fbbo
