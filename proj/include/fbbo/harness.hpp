#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fbbo/bo.hpp"

namespace fbbo {

// Cross product of settings, each run `repeats` times. Repeat r uses the same
// seed (and hence the same initial design) for every configuration.
struct Campaign {
  std::vector<RunConfig> configs;
  int repeats = 1;
  std::uint64_t master_seed = 0;

  std::vector<std::uint64_t> repeat_seeds() const;
  // configs x repeats, with seed and design_seed filled in.
  std::vector<RunConfig> expand() const;
};

Campaign make_campaign(const RunConfig& base, const std::vector<std::string>& functions,
                       const std::vector<double>& noises,
                       const std::vector<AcquisitionKind>& acquisitions,
                       const std::vector<bool>& ard_flags, const std::vector<Backend>& backends,
                       int repeats, std::uint64_t master_seed);

// Content key: hex FNV-1a hash of the config JSON (which carries the seeds).
std::string run_key(const RunConfig& config);
std::filesystem::path trace_path(const std::filesystem::path& dir, const RunConfig& config);

struct CampaignResult {
  std::vector<std::filesystem::path> files;
  int executed = 0;
  int skipped = 0;
  std::vector<std::string> failures;
};

// Runs every (config, repeat) not already persisted in `dir`. Files are
// written once, atomically, and never rewritten.
CampaignResult run_campaign(const Campaign& campaign, const std::filesystem::path& dir,
                            int parallelism, RangeCache* ranges = nullptr);

std::vector<RunTrace> load_traces(const std::filesystem::path& dir);

// ||x_t - x_{t-1}|| / sqrt(d) for t = S+2..T.
std::vector<double> consecutive_distances(const RunTrace& trace);

// Label of the problem a trace belongs to, e.g. "Branin/noise=0/ei/ard".
std::string problem_label(const RunConfig& config);

struct MethodSummary {
  std::string method;
  std::vector<double> values;  // per repeat, paired by repeat seed
  double median = 0.0;
  double mad = 0.0;
  double p_value = 1.0;    // vs the best method, alternative best < this
  double p_adjusted = 1.0;
  bool best = false;
  bool equivalent = false;  // best, or not significantly worse than best
};

struct ProblemComparison {
  std::string problem;
  std::vector<MethodSummary> methods;
};

// Lowest median wins (ties: first method); each other method is tested with
// a one-sided paired Wilcoxon against the best, Holm-corrected at alpha.
ProblemComparison compare_methods(const std::string& problem,
                                  const std::vector<std::pair<std::string, std::vector<double>>>& values,
                                  double alpha = 0.05);

std::map<std::string, int> best_or_equivalent_summary(const std::vector<ProblemComparison>& reports);

// Groups traces by problem and compares final log regret at step `at_budget`
// (0 = last step). Methods are matched by repeat seed.
std::vector<ProblemComparison> compare_traces(const std::vector<RunTrace>& traces, double alpha,
                                              int at_budget = 0);

// Per-step median and interquartile band of a set of equal-length series.
struct Band {
  std::vector<double> median;
  std::vector<double> lower;
  std::vector<double> upper;
};
Band summarise_series(const std::vector<std::vector<double>>& series);

enum class ReportFormat { Csv, Text };

// Writes summary, convergence, distance and comparison tables into `dir`
// (CSV) or a single report.txt (text). Returns the files written.
std::vector<std::filesystem::path> emit_report(const std::vector<RunTrace>& traces,
                                               const std::filesystem::path& dir,
                                               ReportFormat format, double alpha = 0.05);

}  // namespace fbbo
