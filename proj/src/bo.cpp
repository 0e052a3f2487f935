#include "fbbo/bo.hpp"

#include <chrono>
#include <cmath>
#include <istream>
#include <ostream>

#include "fbbo/design.hpp"

namespace fbbo {

namespace {

// Stream indices derived from the run seed, one family per purpose.
enum StreamPurpose : std::uint64_t { kDesignStream = 1, kNoiseStream = 2, kInferenceStream = 3, kAcquisitionStream = 4 };

std::uint64_t stream_id(StreamPurpose purpose, int t) {
  return static_cast<std::uint64_t>(t) * 8 + purpose;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_json_vector(const nlohmann::json& j) {
  std::vector<double> v = j.get<std::vector<double>>();
  return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string to_string(Backend b) {
  switch (b) {
    case Backend::Map: return "map";
    case Backend::Mcmc: return "mcmc";
    case Backend::MeanFieldVi: return "mfvi";
    case Backend::FullRankVi: return "frvi";
  }
  return "unknown";
}

Backend backend_from_string(const std::string& s) {
  if (s == "map") return Backend::Map;
  if (s == "mcmc") return Backend::Mcmc;
  if (s == "mfvi") return Backend::MeanFieldVi;
  if (s == "frvi") return Backend::FullRankVi;
  throw std::invalid_argument("unknown inference backend: " + s);
}

std::string to_string(AcquisitionKind k) {
  return k == AcquisitionKind::ExpectedImprovement ? "ei" : "ucb";
}

AcquisitionKind acquisition_from_string(const std::string& s) {
  if (s == "ei") return AcquisitionKind::ExpectedImprovement;
  if (s == "ucb") return AcquisitionKind::UpperConfidenceBound;
  throw std::invalid_argument("unknown acquisition: " + s);
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["function"] = c.function;
  j["noise"] = c.noise;
  j["acq"] = to_string(c.acquisition);
  j["kernel"] = c.ard ? "ard" : "iso";
  j["inference"] = to_string(c.backend);
  j["initial"] = c.initial;
  j["budget"] = c.budget;
  j["posterior_samples"] = c.posterior_samples;
  j["seed"] = c.seed;
  j["design_seed"] = c.design_seed;
  j["priors"] = {{"lengthscale", {c.priors.lengthscale.a, c.priors.lengthscale.b}},
                 {"outputscale", {c.priors.outputscale.a, c.priors.outputscale.b}},
                 {"noise", {c.priors.noise.a, c.priors.noise.b}},
                 {"flat", c.priors.flat}};
  j["map_restarts"] = c.map_restarts;
  j["nuts"] = {{"chains", c.nuts.chains},
               {"burn_in", c.nuts.burn_in},
               {"thin", c.nuts.thin},
               {"target_accept", c.nuts.target_accept},
               {"max_depth", c.nuts.max_depth}};
  j["advi"] = {{"max_steps", c.advi.max_steps},
               {"mc_samples", c.advi.mc_samples},
               {"step_size", c.advi.step_size},
               {"window", c.advi.window},
               {"tolerance", c.advi.tolerance}};
  j["acquisition_options"] = {{"pool", c.acquisition_options.pool},
                              {"starts", c.acquisition_options.starts}};
  j["design_restarts"] = c.design_restarts;
  j["ucb_delta"] = c.ucb_delta;
  j["range_samples"] = c.range_samples;
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("function", c.function);
  get("noise", c.noise);
  if (j.contains("acq")) c.acquisition = acquisition_from_string(j.at("acq").get<std::string>());
  if (j.contains("kernel")) {
    const std::string k = j.at("kernel").get<std::string>();
    if (k != "ard" && k != "iso") throw std::invalid_argument("unknown kernel: " + k);
    c.ard = k == "ard";
  }
  if (j.contains("inference")) c.backend = backend_from_string(j.at("inference").get<std::string>());
  get("initial", c.initial);
  get("budget", c.budget);
  get("posterior_samples", c.posterior_samples);
  get("seed", c.seed);
  get("design_seed", c.design_seed);
  if (j.contains("priors")) {
    const auto& p = j.at("priors");
    auto gamma = [&p](const char* key, GammaPrior& g) {
      if (p.contains(key)) {
        g.a = p.at(key).at(0).get<double>();
        g.b = p.at(key).at(1).get<double>();
      }
    };
    gamma("lengthscale", c.priors.lengthscale);
    gamma("outputscale", c.priors.outputscale);
    gamma("noise", c.priors.noise);
    if (p.contains("flat")) c.priors.flat = p.at("flat").get<bool>();
  }
  get("map_restarts", c.map_restarts);
  if (j.contains("nuts")) {
    const auto& n = j.at("nuts");
    if (n.contains("chains")) c.nuts.chains = n.at("chains").get<int>();
    if (n.contains("burn_in")) c.nuts.burn_in = n.at("burn_in").get<int>();
    if (n.contains("thin")) c.nuts.thin = n.at("thin").get<int>();
    if (n.contains("target_accept")) c.nuts.target_accept = n.at("target_accept").get<double>();
    if (n.contains("max_depth")) c.nuts.max_depth = n.at("max_depth").get<int>();
  }
  if (j.contains("advi")) {
    const auto& a = j.at("advi");
    if (a.contains("max_steps")) c.advi.max_steps = a.at("max_steps").get<int>();
    if (a.contains("mc_samples")) c.advi.mc_samples = a.at("mc_samples").get<int>();
    if (a.contains("step_size")) c.advi.step_size = a.at("step_size").get<double>();
    if (a.contains("window")) c.advi.window = a.at("window").get<int>();
    if (a.contains("tolerance")) c.advi.tolerance = a.at("tolerance").get<double>();
  }
  if (j.contains("acquisition_options")) {
    const auto& a = j.at("acquisition_options");
    if (a.contains("pool")) c.acquisition_options.pool = a.at("pool").get<int>();
    if (a.contains("starts")) c.acquisition_options.starts = a.at("starts").get<int>();
  }
  get("design_restarts", c.design_restarts);
  get("ucb_delta", c.ucb_delta);
  get("range_samples", c.range_samples);
  return c;
}

PosteriorSamples infer_hyperparameters(const RunConfig& config, const ParamLayout& layout,
                                       const Dataset& data, Rng& rng) {
  const int M = config.posterior_samples;
  switch (config.backend) {
    case Backend::Map: {
      const MapResult map = map_estimate(layout, config.priors, data, config.map_restarts, rng);
      PosteriorSamples s = map_as_samples(map.theta, M);
      s.diagnostics.restart_values = map.restart_values;
      s.diagnostics.converged = true;
      return s;
    }
    case Backend::Mcmc: {
      NutsOptions opt = config.nuts;
      opt.num_samples = M;
      return nuts_sample(layout, config.priors, data, opt, rng);
    }
    case Backend::MeanFieldVi:
    case Backend::FullRankVi: {
      const VariationalFamily family = config.backend == Backend::MeanFieldVi
                                           ? VariationalFamily::MeanField
                                           : VariationalFamily::FullRank;
      const VariationalState state = advi_fit(layout, config.priors, data, family, config.advi, rng);
      return draw_samples(state, layout, M, rng);
    }
  }
  throw std::logic_error("unreachable backend");
}

RunTrace run(const RunConfig& config, RangeCache* ranges) {
  const BenchmarkFunction& fn = find_benchmark(config.function);
  const int d = fn.dim;
  const int S = config.initial_points(d);
  const int T = config.budget;
  if (S < 2 || S > T) throw std::invalid_argument("run: need 2 <= S <= T");
  if (config.posterior_samples < 1) throw std::invalid_argument("run: M must be >= 1");
  if (config.noise < 0.0) throw std::invalid_argument("run: noise fraction must be >= 0");

  double range = 0.0;
  if (config.noise > 0.0) {
    if (ranges) {
      range = ranges->get(fn, kRangeSeed, config.range_samples);
    } else {
      Rng range_rng = make_stream(kRangeSeed);
      range = estimate_range(fn, config.range_samples, range_rng);
    }
  }
  NoisyObjective objective(fn, config.noise, range, make_stream(config.seed, kNoiseStream)());

  RunTrace trace;
  trace.config = config;
  trace.f_min = fn.f_min;

  Matrix X(T, d);
  Vector y(T);
  double best = INFINITY;
  auto record = [&](int index, const Vector& x_unit, nlohmann::json diag, double seconds) {
    const Vector x_native = fn.to_native(x_unit);
    const NoisyObjective::Observation obs = objective.evaluate(x_native);
    X.row(index) = x_unit.transpose();
    y[index] = obs.y;
    best = std::min(best, obs.f_true);
    StepRecord r;
    r.t = index + 1;
    r.x_unit = x_unit;
    r.x_native = x_native;
    r.y = obs.y;
    r.f_true = obs.f_true;
    r.best_f_true = best;
    r.log_regret = std::log(std::max(best - fn.f_min, kRegretFloor));
    r.wall_seconds = seconds;
    r.diagnostics = std::move(diag);
    trace.steps.push_back(std::move(r));
  };

  Rng design_rng = make_stream(config.design_seed, kDesignStream);
  const Design design = maximin_lhs(S, d, design_rng, config.design_restarts);
  for (int i = 0; i < S; ++i) record(i, design.points.row(i).transpose(), nullptr, 0.0);

  KernelSpec kernel{KernelFamily::Matern52, config.ard, d};
  ParamLayout layout{kernel, std::nullopt};
  if (config.noise == 0.0) layout.fixed_noise = kNoiseFreeSigma;

  std::optional<PosteriorSamples> previous;
  int consecutive_failures = 0;
  for (int n = S; n < T; ++n) {
    const auto start = std::chrono::steady_clock::now();
    auto data = std::make_shared<const Dataset>(
        Dataset::standardized(X.topRows(n), y.head(n), fn.lower, fn.upper));

    AcquisitionSpec spec;
    spec.kind = config.acquisition;
    spec.incumbent = data->y.minCoeff();
    if (spec.kind == AcquisitionKind::UpperConfidenceBound)
      spec.beta = beta_schedule(n + 1, d, config.ucb_delta);

    std::optional<AcquisitionModel> model;
    PosteriorSamples samples;
    std::string failure;
    try {
      Rng rng = make_stream(config.seed, stream_id(kInferenceStream, n));
      samples = infer_hyperparameters(config, layout, *data, rng);
      model.emplace(AcquisitionModel::build(spec, kernel, samples, data));
    } catch (const InferenceFailure& e) {
      failure = e.what();
    } catch (const NotPositiveDefinite& e) {
      failure = e.what();
    }

    if (!failure.empty()) {
      if (++consecutive_failures >= 2) {
        trace.ok = false;
        trace.error = "inference failed twice in a row at t=" + std::to_string(n + 1) + ": " + failure;
        return trace;
      }
      if (previous) {
        samples = *previous;
      } else {
        HyperParams theta = layout.to_theta(prior_mode_z(layout, config.priors));
        samples = map_as_samples(theta, config.posterior_samples);
      }
      samples.diagnostics.fallback = true;
      try {
        model.emplace(AcquisitionModel::build(spec, kernel, samples, data));
      } catch (const NotPositiveDefinite& e) {
        trace.ok = false;
        trace.error = "fallback model could not be fitted at t=" + std::to_string(n + 1) + ": " + e.what();
        return trace;
      }
    } else {
      consecutive_failures = 0;
      previous = samples;
    }
    samples.diagnostics.jitter_events = model->jitter_events();

    Rng acq_rng = make_stream(config.seed, stream_id(kAcquisitionStream, n));
    const AcquisitionOptimum best_point =
        optimize_acquisition(*model, d, acq_rng, config.acquisition_options);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    record(n, best_point.x, to_json(samples.diagnostics), seconds);
  }
  return trace;
}

std::vector<double> simple_regret(const RunTrace& trace, double f_min) {
  std::vector<double> out;
  double best = INFINITY;
  for (const StepRecord& r : trace.steps) {
    best = std::min(best, r.f_true);
    out.push_back(std::log(std::max(best - f_min, kRegretFloor)));
  }
  return out;
}

void write_trace(const RunTrace& trace, std::ostream& out) {
  nlohmann::json header;
  header["type"] = "header";
  header["config"] = to_json(trace.config);
  header["seed"] = trace.config.seed;
  header["f_min"] = trace.f_min;
  out << header.dump() << '\n';
  for (const StepRecord& r : trace.steps) {
    nlohmann::json j;
    j["t"] = r.t;
    j["x"] = to_std(r.x_unit);
    j["x_native"] = to_std(r.x_native);
    j["y"] = r.y;
    j["f_true"] = r.f_true;
    j["best_f_true"] = r.best_f_true;
    j["log_regret"] = r.log_regret;
    j["backend_diag"] = r.diagnostics;
    out << j.dump() << '\n';
  }
  nlohmann::json status;
  status["type"] = "status";
  status["ok"] = trace.ok;
  status["error"] = trace.error;
  status["steps"] = trace.steps.size();
  out << status.dump() << '\n';
}

RunTrace read_trace(std::istream& in) {
  RunTrace trace;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    const std::string type = j.value("type", "");
    if (type == "header") {
      trace.config = run_config_from_json(j.at("config"));
      trace.f_min = j.at("f_min").get<double>();
    } else if (type == "status") {
      trace.ok = j.at("ok").get<bool>();
      trace.error = j.at("error").get<std::string>();
    } else {
      StepRecord r;
      r.t = j.at("t").get<int>();
      r.x_unit = from_json_vector(j.at("x"));
      r.x_native = from_json_vector(j.at("x_native"));
      r.y = j.at("y").get<double>();
      r.f_true = j.at("f_true").get<double>();
      r.best_f_true = j.at("best_f_true").get<double>();
      r.log_regret = j.at("log_regret").get<double>();
      r.diagnostics = j.at("backend_diag");
      trace.steps.push_back(std::move(r));
    }
  }
  return trace;
}

}  // namespace fbbo
