#include <cmath>

#include "fbbo/inference.hpp"

namespace fbbo {

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::MapDelta: return "map";
    case Provenance::Mcmc: return "mcmc";
    case Provenance::MeanFieldVi: return "mfvi";
    case Provenance::FullRankVi: return "frvi";
  }
  return "unknown";
}

nlohmann::json to_json(const InferenceDiagnostics& diag, bool include_elbo_trace) {
  nlohmann::json j;
  if (!diag.restart_values.empty()) {
    double best = -INFINITY;
    for (double v : diag.restart_values) best = std::max(best, v);
    j["log_posterior"] = best;
  }
  if (!diag.rhat.empty()) {
    j["rhat"] = diag.rhat;
    j["accept_rate"] = diag.accept_rate;
    j["divergent_fraction"] = diag.divergent_fraction;
    j["step_size"] = diag.step_size;
  }
  if (!diag.elbo_trace.empty()) {
    j["elbo_final"] = diag.elbo_trace.back();
    j["steps"] = diag.steps;
    j["converged"] = diag.converged;
    if (include_elbo_trace) j["elbo_trace"] = diag.elbo_trace;
  }
  j["jitter_events"] = diag.jitter_events;
  j["fallback"] = diag.fallback;
  return j;
}

PosteriorSamples map_as_samples(const HyperParams& theta, int M) {
  if (M < 1) throw std::invalid_argument("map_as_samples: M must be >= 1");
  if (!theta.valid()) throw std::invalid_argument("map_as_samples: invalid hyperparameters");
  PosteriorSamples out;
  out.samples.assign(M, theta);
  out.provenance = Provenance::MapDelta;
  return out;
}

Matrix VariationalState::covariance() const {
  if (family == VariationalFamily::MeanField)
    return (2.0 * log_std.array()).exp().matrix().asDiagonal();
  const Matrix L = chol.triangularView<Eigen::Lower>();
  return L * L.transpose();
}

Matrix draw_z(const VariationalState& state, int M, Rng& rng) {
  std::normal_distribution<double> normal;
  const int J = state.dim();
  Matrix z(M, J);
  Vector eta(J);
  for (int m = 0; m < M; ++m) {
    for (int j = 0; j < J; ++j) eta[j] = normal(rng);
    if (state.family == VariationalFamily::MeanField)
      z.row(m) = (state.mean.array() + state.log_std.array().exp() * eta.array()).matrix();
    else
      z.row(m) = state.mean + state.chol.triangularView<Eigen::Lower>() * eta;
  }
  return z;
}

PosteriorSamples draw_samples(const VariationalState& state, const ParamLayout& layout, int M,
                              Rng& rng) {
  const Matrix z = draw_z(state, M, rng);
  PosteriorSamples out;
  out.provenance = state.family == VariationalFamily::MeanField ? Provenance::MeanFieldVi
                                                                 : Provenance::FullRankVi;
  out.samples.reserve(M);
  for (int m = 0; m < M; ++m) out.samples.push_back(layout.to_theta(z.row(m).transpose()));
  out.diagnostics.elbo_trace = state.elbo_trace;
  out.diagnostics.steps = state.steps;
  out.diagnostics.converged = state.converged;
  return out;
}

}  // namespace fbbo
