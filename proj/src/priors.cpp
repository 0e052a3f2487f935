#include "fbbo/priors.hpp"

#include <cmath>
#include <limits>

namespace fbbo {

namespace {

double gamma_log_pdf_slope(const GammaPrior& g, double x) { return (g.a - 1.0) / x - g.b; }

}  // namespace

double GammaPrior::mode() const { return a > 1.0 ? (a - 1.0) / b : a / b; }

double gamma_log_pdf(double a, double b, double x) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return a * std::log(b) - std::lgamma(a) + (a - 1.0) * std::log(x) - b * x;
}

std::vector<double> log_prior_terms(const PriorSpec& priors, const HyperParams& theta,
                                    bool include_noise) {
  std::vector<double> terms;
  auto term = [&](const GammaPrior& g, double x) {
    if (priors.flat) return x > 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return gamma_log_pdf(g.a, g.b, x);
  };
  for (double l : theta.lengthscales) terms.push_back(term(priors.lengthscale, l));
  terms.push_back(term(priors.outputscale, theta.outputscale));
  if (include_noise) terms.push_back(term(priors.noise, theta.noise));
  return terms;
}

double log_prior(const PriorSpec& priors, const HyperParams& theta, bool include_noise) {
  double total = 0.0;
  for (double t : log_prior_terms(priors, theta, include_noise)) total += t;
  return total;
}

HyperParams ParamLayout::to_theta(const Vector& z) const {
  if (z.size() != size()) throw std::invalid_argument("ParamLayout: z has the wrong length");
  const int p = num_lengthscales();
  HyperParams theta;
  theta.lengthscales = z.head(p).array().exp();
  theta.outputscale = std::exp(z[p]);
  theta.noise = fixed_noise ? *fixed_noise : std::exp(z[p + 1]);
  return theta;
}

Vector ParamLayout::to_z(const HyperParams& theta) const {
  const int p = num_lengthscales();
  if (theta.lengthscales.size() != p)
    throw std::invalid_argument("ParamLayout: length-scale count mismatch");
  Vector z(size());
  z.head(p) = theta.lengthscales.array().log();
  z[p] = std::log(theta.outputscale);
  if (!fixed_noise) z[p + 1] = std::log(theta.noise);
  return z;
}

LogDensityValue log_posterior_unconstrained(const ParamLayout& layout, const PriorSpec& priors,
                                            const Dataset& data, const Vector& z,
                                            bool include_jacobian) {
  const int p = layout.num_lengthscales();
  const int J = layout.size();
  LogDensityValue out;
  out.gradient = Vector::Zero(J);
  if (!z.allFinite()) {
    out.value = -std::numeric_limits<double>::infinity();
    return out;
  }
  const HyperParams theta = layout.to_theta(z);
  if (!theta.valid()) {
    out.value = -std::numeric_limits<double>::infinity();
    return out;
  }
  const LmlEvaluation lml = lml_with_gradient(layout.spec, theta, data);
  if (!lml.ok || !std::isfinite(lml.value)) {
    out.value = -std::numeric_limits<double>::infinity();
    return out;
  }
  const bool learn_noise = !layout.fixed_noise;
  out.value = lml.value + log_prior(priors, theta, learn_noise);

  // Gradient over theta, then chain rule dtheta/dz = theta.
  Vector dtheta(J);
  Vector theta_vec(J);
  for (int i = 0; i < p; ++i) {
    theta_vec[i] = theta.lengthscales[i];
    dtheta[i] = lml.gradient[i] +
                (priors.flat ? 0.0 : gamma_log_pdf_slope(priors.lengthscale, theta_vec[i]));
  }
  theta_vec[p] = theta.outputscale;
  dtheta[p] = lml.gradient[p] +
              (priors.flat ? 0.0 : gamma_log_pdf_slope(priors.outputscale, theta.outputscale));
  if (learn_noise) {
    theta_vec[p + 1] = theta.noise;
    dtheta[p + 1] = lml.gradient[p + 1] +
                    (priors.flat ? 0.0 : gamma_log_pdf_slope(priors.noise, theta.noise));
  }
  out.gradient = theta_vec.cwiseProduct(dtheta);
  if (include_jacobian) {
    out.value += z.sum();
    out.gradient.array() += 1.0;
  }
  if (!std::isfinite(out.value) || !out.gradient.allFinite()) {
    out.value = -std::numeric_limits<double>::infinity();
    out.gradient.setZero();
  }
  return out;
}

LogDensity make_log_posterior(const ParamLayout& layout, const PriorSpec& priors, Dataset data,
                              bool include_jacobian) {
  return [layout, priors, data = std::move(data), include_jacobian](const Vector& z) {
    return log_posterior_unconstrained(layout, priors, data, z, include_jacobian);
  };
}

Vector prior_mode_z(const ParamLayout& layout, const PriorSpec& priors) {
  const int p = layout.num_lengthscales();
  Vector z = Vector::Zero(layout.size());
  if (priors.flat) return z;
  z.head(p).setConstant(std::log(priors.lengthscale.mode()));
  z[p] = std::log(priors.outputscale.mode());
  if (!layout.fixed_noise) z[p + 1] = std::log(priors.noise.mode());
  return z;
}

Vector sample_prior_z(const ParamLayout& layout, const PriorSpec& priors, Rng& rng) {
  const int p = layout.num_lengthscales();
  Vector z(layout.size());
  if (priors.flat) {
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    for (int i = 0; i < z.size(); ++i) z[i] = unif(rng);
    return z;
  }
  auto draw = [&](const GammaPrior& g) {
    std::gamma_distribution<double> dist(g.a, 1.0 / g.b);
    // Guard against a zero draw from the tail near the origin.
    return std::log(std::max(dist(rng), 1e-300));
  };
  for (int i = 0; i < p; ++i) z[i] = draw(priors.lengthscale);
  z[p] = draw(priors.outputscale);
  if (!layout.fixed_noise) z[p + 1] = draw(priors.noise);
  return z;
}

}  // namespace fbbo
