#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fbbo/acquisition.hpp"
#include "fbbo/benchmarks.hpp"
#include "fbbo/inference.hpp"

namespace fbbo {

enum class Backend { Map, Mcmc, MeanFieldVi, FullRankVi };

std::string to_string(Backend b);
Backend backend_from_string(const std::string& s);
std::string to_string(AcquisitionKind k);
AcquisitionKind acquisition_from_string(const std::string& s);

struct RunConfig {
  std::string function = "Branin";
  double noise = 0.0;  // fraction of the function range
  AcquisitionKind acquisition = AcquisitionKind::ExpectedImprovement;
  bool ard = true;
  Backend backend = Backend::Map;
  int initial = 0;  // S; 0 selects 2d
  int budget = 200;  // T
  int posterior_samples = 256;  // M
  std::uint64_t seed = 0;
  std::uint64_t design_seed = 0;

  PriorSpec priors;
  int map_restarts = 10;
  NutsOptions nuts;
  AdviOptions advi;
  AcquisitionOptions acquisition_options;
  int design_restarts = 100;
  double ucb_delta = 0.1;
  int range_samples = kRangeSamples;

  int initial_points(int d) const { return initial > 0 ? initial : 2 * d; }
};

nlohmann::json to_json(const RunConfig& config);
// Missing keys keep their defaults.
RunConfig run_config_from_json(const nlohmann::json& j);

struct StepRecord {
  int t = 0;
  Vector x_unit;
  Vector x_native;
  double y = 0.0;
  double f_true = 0.0;
  double best_f_true = 0.0;
  double log_regret = 0.0;
  double wall_seconds = 0.0;  // not serialised
  nlohmann::json diagnostics;  // null for initial-design steps
};

struct RunTrace {
  RunConfig config;
  double f_min = 0.0;
  std::vector<StepRecord> steps;
  bool ok = true;
  std::string error;

  int dim() const { return steps.empty() ? 0 : static_cast<int>(steps.front().x_unit.size()); }
};

// Values below this are clamped before taking the log of the regret.
inline constexpr double kRegretFloor = 1e-10;

// Runs sequential BO: a maximin LHS of S points, then T - S iterations of
// standardise / infer / maximise the integrated acquisition / evaluate.
// Inference failures fall back to the previous iteration's samples; two in
// a row abort the run with a partial trace and ok = false.
RunTrace run(const RunConfig& config, RangeCache* ranges = nullptr);

// log(max(best-so-far f_true - f_min, 1e-10)) per step.
std::vector<double> simple_regret(const RunTrace& trace, double f_min);

// Posterior samples for one BO iteration under the configured backend.
PosteriorSamples infer_hyperparameters(const RunConfig& config, const ParamLayout& layout,
                                       const Dataset& data, Rng& rng);

// JSON-lines: header object, one object per step, then a status object.
void write_trace(const RunTrace& trace, std::ostream& out);
RunTrace read_trace(std::istream& in);

}  // namespace fbbo
