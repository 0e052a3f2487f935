#include <cmath>
#include <limits>

#include "fbbo/inference.hpp"

namespace fbbo {

DensityMaximum maximize_density(const LogDensity& density, const std::vector<Vector>& starts,
                                const LbfgsOptions& options) {
  if (starts.empty()) throw std::invalid_argument("maximize_density: need at least one start");
  const Objective negated = [&density](const Vector& z, Vector& grad) {
    LogDensityValue v = density(z);
    grad = -v.gradient;
    return std::isfinite(v.value) ? -v.value : std::numeric_limits<double>::infinity();
  };

  DensityMaximum best;
  best.value = -std::numeric_limits<double>::infinity();
  for (const Vector& start : starts) {
    const OptimResult r = lbfgs_minimize(negated, start, options);
    const double value = std::isfinite(r.value) ? -r.value : -std::numeric_limits<double>::infinity();
    best.restart_values.push_back(value);
    if (value > best.value) {
      best.value = value;
      best.z = r.x;
    }
  }
  if (!std::isfinite(best.value))
    throw InferenceFailure("MAP estimation: every restart ended at a non-finite log posterior");
  return best;
}

MapResult map_estimate(const ParamLayout& layout, const PriorSpec& priors, const Dataset& data,
                       int restarts, Rng& rng) {
  if (restarts < 1) throw std::invalid_argument("map_estimate: restarts must be >= 1");
  const int J = layout.size();
  std::vector<Vector> starts;
  starts.push_back(prior_mode_z(layout, priors));
  for (int r = 1; r < restarts; ++r) starts.push_back(sample_prior_z(layout, priors, rng));
  for (Vector& s : starts) s = s.cwiseMax(-kMapLogBound).cwiseMin(kMapLogBound);

  LbfgsOptions opt;
  opt.lower = Vector::Constant(J, -kMapLogBound);
  opt.upper = Vector::Constant(J, kMapLogBound);
  opt.gradient_tolerance = 1e-6;
  opt.relative_tolerance = 1e-10;

  const LogDensity density = [&](const Vector& z) {
    return log_posterior_unconstrained(layout, priors, data, z, /*include_jacobian=*/false);
  };
  const DensityMaximum best = maximize_density(density, starts, opt);
  return {layout.to_theta(best.z), best.value, best.restart_values};
}

MapResult ml_estimate(const ParamLayout& layout, const Dataset& data, int restarts, Rng& rng) {
  return map_estimate(layout, PriorSpec::flat_priors(), data, restarts, rng);
}

}  // namespace fbbo
