#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "fbbo/optimize.hpp"
#include "fbbo/priors.hpp"

namespace fbbo {

enum class Provenance { MapDelta, Mcmc, MeanFieldVi, FullRankVi };

std::string to_string(Provenance p);

// Backend-specific diagnostics; unused fields stay empty / zero.
struct InferenceDiagnostics {
  std::vector<double> restart_values;  // MAP: terminal log posterior per restart
  std::vector<double> rhat;            // MCMC: split R-hat per coordinate
  double accept_rate = 0.0;            // MCMC: mean acceptance statistic
  double divergent_fraction = 0.0;     // MCMC
  double step_size = 0.0;              // MCMC: adapted step size (chain 0)
  std::vector<double> elbo_trace;      // VI: per-step ELBO estimates
  int steps = 0;                       // VI: optimiser steps taken
  bool converged = false;              // VI / MAP
  int jitter_events = 0;               // GP fits that needed diagonal jitter
  bool fallback = false;               // BO reused the previous iteration's result
};

nlohmann::json to_json(const InferenceDiagnostics& diag, bool include_elbo_trace = false);

struct PosteriorSamples {
  std::vector<HyperParams> samples;
  Provenance provenance = Provenance::MapDelta;
  InferenceDiagnostics diagnostics;

  int size() const { return static_cast<int>(samples.size()); }
};

// M copies of theta with MAP-delta provenance.
PosteriorSamples map_as_samples(const HyperParams& theta, int M);

// ---------------------------------------------------------------- MAP

struct DensityMaximum {
  Vector z;
  double value = 0.0;
  std::vector<double> restart_values;
};

// Quasi-Newton ascent of `density` from each start; returns the best terminal
// point. Throws InferenceFailure if every start ends at a non-finite value.
DensityMaximum maximize_density(const LogDensity& density, const std::vector<Vector>& starts,
                                const LbfgsOptions& options);

struct MapResult {
  HyperParams theta;
  double log_posterior = 0.0;
  std::vector<double> restart_values;
};

// Box on z = log(theta) used during MAP ascent.
inline constexpr double kMapLogBound = 7.0;

// Maximises log p(y | X, theta) + log p(theta) over z = log theta. The first
// start is the prior mode; the remaining restarts - 1 are prior draws.
MapResult map_estimate(const ParamLayout& layout, const PriorSpec& priors, const Dataset& data,
                       int restarts, Rng& rng);

// Type-II maximum likelihood: map_estimate under flat priors.
MapResult ml_estimate(const ParamLayout& layout, const Dataset& data, int restarts, Rng& rng);

// ---------------------------------------------------------------- NUTS

struct NutsOptions {
  int chains = 4;
  int burn_in = 2048;
  int thin = 50;
  int num_samples = 256;  // total kept draws across chains
  double target_accept = 0.8;
  int max_depth = 10;
  double max_divergent_fraction = 0.25;
  // Width of the uniform perturbation applied to the initial point per chain.
  double init_radius = 0.5;
};

struct McmcResult {
  Matrix draws;  // num_samples x J, chain-major
  std::vector<double> rhat;
  double accept_rate = 0.0;
  double divergent_fraction = 0.0;
  double step_size = 0.0;
};

// NUTS with dual-averaging step size and diagonal metric adaptation during
// burn-in. Each chain keeps num_samples / chains draws, every thin-th
// iteration after burn-in. Throws InferenceFailure when the post-adaptation
// divergent fraction exceeds the limit.
McmcResult nuts_sample(const LogDensity& density, const Vector& init, const NutsOptions& options,
                       Rng& rng);

PosteriorSamples nuts_sample(const ParamLayout& layout, const PriorSpec& priors,
                             const Dataset& data, const NutsOptions& options, Rng& rng);

// Split-chain potential scale reduction per coordinate; chains are n x J.
std::vector<double> split_rhat(const std::vector<Matrix>& chains);

// One leapfrog step under a diagonal inverse metric.
struct PhasePoint {
  Vector z;
  Vector p;
  Vector grad;
  double log_density = 0.0;
};

PhasePoint leapfrog(const LogDensity& density, const PhasePoint& start, double step,
                    const Vector& inv_metric);

// Hamiltonian -log p(z) + p^T M^-1 p / 2.
double hamiltonian(const PhasePoint& point, const Vector& inv_metric);

// ---------------------------------------------------------------- ADVI

enum class VariationalFamily { MeanField, FullRank };

struct AdviOptions {
  int max_steps = 40000;
  int mc_samples = 8;
  double step_size = 0.1;
  int window = 100;
  double tolerance = 1e-4;
  double init_scale = 0.1;
};

struct VariationalState {
  VariationalFamily family = VariationalFamily::MeanField;
  Vector mean;
  Vector log_std;  // mean-field
  Matrix chol;     // full-rank, lower triangular
  std::vector<double> elbo_trace;
  int steps = 0;
  bool converged = false;

  int dim() const { return static_cast<int>(mean.size()); }
  Matrix covariance() const;
};

// Stochastic-gradient ELBO ascent with reparameterised gradients. Throws
// InferenceFailure if the ELBO stays non-finite for a whole window.
VariationalState advi_fit(const LogDensity& density, const Vector& init_mean,
                          VariationalFamily family, const AdviOptions& options, Rng& rng);

// Initialised at the prior modes in z.
VariationalState advi_fit(const ParamLayout& layout, const PriorSpec& priors,
                          const Dataset& data, VariationalFamily family,
                          const AdviOptions& options, Rng& rng);

// M draws z ~ q, one per row.
Matrix draw_z(const VariationalState& state, int M, Rng& rng);

PosteriorSamples draw_samples(const VariationalState& state, const ParamLayout& layout, int M,
                              Rng& rng);

}  // namespace fbbo
