#pragma once

#include <functional>
#include <optional>

#include "fbbo/gp.hpp"

namespace fbbo {

// Gamma distribution with concentration a and rate b.
struct GammaPrior {
  double a = 1.0;
  double b = 1.0;

  // (a - 1)/b, or the mean a/b when a <= 1 (the density then peaks at 0).
  double mode() const;
};

// a log b - log Gamma(a) + (a - 1) log x - b x; -inf for x <= 0.
double gamma_log_pdf(double a, double b, double x);

struct PriorSpec {
  GammaPrior lengthscale{3.0, 6.0};
  GammaPrior outputscale{2.0, 0.15};
  GammaPrior noise{1.1, 0.05};
  // Improper uniform priors over the positive reals; log_prior is then 0.
  bool flat = false;

  static PriorSpec flat_priors() {
    PriorSpec p;
    p.flat = true;
    return p;
  }
};

// Per-hyperparameter log-density terms in the order l_1..l_p, sigma_f[, sigma_n].
std::vector<double> log_prior_terms(const PriorSpec& priors, const HyperParams& theta,
                                    bool include_noise = true);

double log_prior(const PriorSpec& priors, const HyperParams& theta, bool include_noise = true);

// Bijection between HyperParams and the unconstrained vector
// z = log(l_1..l_p, sigma_f[, sigma_n]). When fixed_noise is set, sigma_n is
// excluded from z and held at that value.
struct ParamLayout {
  KernelSpec spec;
  std::optional<double> fixed_noise;

  int num_lengthscales() const { return spec.num_lengthscales(); }
  int size() const { return num_lengthscales() + (fixed_noise ? 1 : 2); }

  HyperParams to_theta(const Vector& z) const;
  Vector to_z(const HyperParams& theta) const;
};

// Standard deviation at which sigma_n is frozen for noise-free problems.
inline constexpr double kNoiseFreeSigma = 1e-4;

struct LogDensityValue {
  double value = 0.0;
  Vector gradient;
};

// Unnormalised log density over an unconstrained vector, with its gradient.
using LogDensity = std::function<LogDensityValue(const Vector&)>;

// LML(exp z) + log_prior(exp z) [+ sum z], and the gradient over z. The
// log-Jacobian term makes this a density over z; MAP estimation omits it so
// that it maximises the density over theta. Non-PD covariance yields -inf
// with a zero gradient.
LogDensityValue log_posterior_unconstrained(const ParamLayout& layout, const PriorSpec& priors,
                                            const Dataset& data, const Vector& z,
                                            bool include_jacobian = true);

// Captures layout, priors and data (by value) into a LogDensity.
LogDensity make_log_posterior(const ParamLayout& layout, const PriorSpec& priors, Dataset data,
                              bool include_jacobian = true);

// z at the prior modes (z = 0 under flat priors).
Vector prior_mode_z(const ParamLayout& layout, const PriorSpec& priors);

// A draw from the priors, mapped to z. Under flat priors z ~ U(-2, 2).
Vector sample_prior_z(const ParamLayout& layout, const PriorSpec& priors, Rng& rng);

}  // namespace fbbo
