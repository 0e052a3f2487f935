// Command-line front end: run campaigns, compare methods, emit reports.
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fbbo/harness.hpp"

namespace {

using namespace fbbo;

struct RunArgs {
  std::string config_file;
  std::vector<std::string> functions{"Branin"};
  std::vector<double> noises{0.0};
  std::vector<std::string> acqs{"ei"};
  std::vector<std::string> kernels{"ard"};
  std::vector<std::string> inference{"map"};
  int budget = 200;
  int initial = 0;
  int repeats = 1;
  int samples = 256;
  std::uint64_t seed = 0;
  std::string out = "runs";
  int parallelism = 1;
  int burn_in = 2048;
  int thin = 50;
  int chains = 4;
  int advi_steps = 40000;
  int range_samples = kRangeSamples;
};

// Fills every flag the user did not pass from the JSON config file.
void apply_config_file(CLI::App& cmd, RunArgs& a) {
  if (a.config_file.empty()) return;
  std::ifstream in(a.config_file);
  if (!in) throw std::runtime_error("cannot open config file " + a.config_file);
  const nlohmann::json j = nlohmann::json::parse(in);
  auto take = [&](const char* flag, const char* key, auto& field) {
    if (j.contains(key) && cmd.count(flag) == 0) {
      const auto& v = j.at(key);
      using T = std::decay_t<decltype(field)>;
      if constexpr (requires { typename T::value_type; } && !std::is_same_v<T, std::string>) {
        field = v.is_array() ? v.get<T>() : T{v.get<typename T::value_type>()};
      } else {
        field = v.get<T>();
      }
    }
  };
  take("--function", "function", a.functions);
  take("--noise", "noise", a.noises);
  take("--acq", "acq", a.acqs);
  take("--kernel", "kernel", a.kernels);
  take("--inference", "inference", a.inference);
  take("--budget", "budget", a.budget);
  take("--initial", "initial", a.initial);
  take("--repeats", "repeats", a.repeats);
  take("--samples", "samples", a.samples);
  take("--seed", "seed", a.seed);
  take("--out", "out", a.out);
  take("--parallelism", "parallelism", a.parallelism);
  take("--burn-in", "burn_in", a.burn_in);
  take("--thin", "thin", a.thin);
  take("--chains", "chains", a.chains);
  take("--advi-steps", "advi_steps", a.advi_steps);
  take("--range-samples", "range_samples", a.range_samples);
}

int do_run(CLI::App& cmd, RunArgs& a) {
  apply_config_file(cmd, a);
  if (const char* env = std::getenv("FBBO_SEED")) a.seed = std::stoull(env);

  RunConfig base;
  base.budget = a.budget;
  base.initial = a.initial;
  base.posterior_samples = a.samples;
  base.nuts.burn_in = a.burn_in;
  base.nuts.thin = a.thin;
  base.nuts.chains = a.chains;
  base.advi.max_steps = a.advi_steps;
  base.range_samples = a.range_samples;

  std::vector<AcquisitionKind> acqs;
  for (const auto& s : a.acqs) acqs.push_back(acquisition_from_string(s));
  std::vector<bool> ards;
  for (const auto& s : a.kernels) {
    if (s != "ard" && s != "iso") throw std::invalid_argument("unknown kernel: " + s);
    ards.push_back(s == "ard");
  }
  std::vector<Backend> backends;
  for (const auto& s : a.inference) backends.push_back(backend_from_string(s));

  const Campaign campaign =
      make_campaign(base, a.functions, a.noises, acqs, ards, backends, a.repeats, a.seed);
  RangeCache ranges(std::filesystem::path(a.out) / "ranges.json");
  std::filesystem::create_directories(a.out);
  const CampaignResult r = run_campaign(campaign, a.out, a.parallelism, &ranges);
  std::cout << "runs executed: " << r.executed << ", skipped (already present): " << r.skipped
            << ", failed: " << r.failures.size() << '\n';
  for (const std::string& f : r.failures) std::cout << "  failed " << f << '\n';
  return r.failures.empty() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fully-Bayesian Bayesian optimisation experiments"};
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run_cmd = app.add_subcommand("run", "Run a campaign of BO runs");
  run_cmd->add_option("--config", run_args.config_file, "JSON file with defaults for any flag");
  run_cmd->add_option("--function", run_args.functions, "Benchmark name(s), e.g. Branin Ackley5");
  run_cmd->add_option("--noise", run_args.noises, "Noise fraction(s) of the function range");
  run_cmd->add_option("--acq", run_args.acqs, "Acquisition(s): ei, ucb");
  run_cmd->add_option("--kernel", run_args.kernels, "Kernel(s): iso, ard");
  run_cmd->add_option("--inference", run_args.inference, "Backend(s): map, mcmc, mfvi, frvi");
  run_cmd->add_option("--budget", run_args.budget, "Total evaluations T");
  run_cmd->add_option("--initial", run_args.initial, "Initial design size S (0 = 2d)");
  run_cmd->add_option("--repeats", run_args.repeats, "Repeats per configuration");
  run_cmd->add_option("--samples", run_args.samples, "Posterior samples M");
  run_cmd->add_option("--seed", run_args.seed, "Master seed (FBBO_SEED overrides)");
  run_cmd->add_option("--out", run_args.out, "Output directory for trace files");
  run_cmd->add_option("--parallelism", run_args.parallelism, "Concurrent runs");
  run_cmd->add_option("--burn-in", run_args.burn_in, "NUTS burn-in iterations per chain");
  run_cmd->add_option("--thin", run_args.thin, "NUTS thinning interval");
  run_cmd->add_option("--chains", run_args.chains, "NUTS chains");
  run_cmd->add_option("--advi-steps", run_args.advi_steps, "ADVI step cap");
  run_cmd->add_option("--range-samples", run_args.range_samples, "LHS points for range estimation");

  std::string compare_in = "runs";
  double alpha = 0.05;
  int at_budget = 0;
  CLI::App* compare_cmd = app.add_subcommand("compare", "Compare methods per problem");
  compare_cmd->add_option("--in", compare_in, "Directory of trace files");
  compare_cmd->add_option("--alpha", alpha, "Significance level");
  compare_cmd->add_option("--at-budget", at_budget, "Evaluation count to compare at (0 = final)");

  std::string report_in = "runs", report_out, format = "csv";
  CLI::App* report_cmd = app.add_subcommand("report", "Write report tables");
  report_cmd->add_option("--in", report_in, "Directory of trace files");
  report_cmd->add_option("--out", report_out, "Report directory (default: <in>/report)");
  report_cmd->add_option("--format", format, "csv or text")->check(CLI::IsMember({"csv", "text"}));
  report_cmd->add_option("--alpha", alpha, "Significance level");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return do_run(*run_cmd, run_args);
    if (*compare_cmd) {
      const auto reports = compare_traces(load_traces(compare_in), alpha, at_budget);
      for (const ProblemComparison& pc : reports) {
        std::cout << pc.problem << '\n';
        for (const MethodSummary& m : pc.methods)
          std::cout << "  " << m.method << "  median " << m.median << "  p " << m.p_value
                    << "  p_adj " << m.p_adjusted << (m.best ? "  best" : m.equivalent ? "  equivalent" : "")
                    << '\n';
      }
      std::cout << "best or equivalent:\n";
      for (const auto& [method, count] : best_or_equivalent_summary(reports))
        std::cout << "  " << method << ": " << count << '\n';
      return 0;
    }
    if (*report_cmd) {
      const std::filesystem::path out = report_out.empty() ? std::filesystem::path(report_in) / "report" : std::filesystem::path(report_out);
      const auto files = emit_report(load_traces(report_in), out,
                                     format == "csv" ? ReportFormat::Csv : ReportFormat::Text, alpha);
      for (const auto& f : files) std::cout << f.string() << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
