#include "fbbo/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "fbbo/stats.hpp"

namespace fbbo {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string noise_label(double noise) {
  std::ostringstream s;
  s << noise;
  return s.str();
}

bool complete(const RunTrace& t) {
  return t.ok && static_cast<int>(t.steps.size()) == t.config.budget;
}

// problem -> method -> seed -> trace
using Grouped = std::map<std::string, std::map<std::string, std::map<std::uint64_t, const RunTrace*>>>;

Grouped group(const std::vector<RunTrace>& traces) {
  Grouped g;
  for (const RunTrace& t : traces)
    if (complete(t)) g[problem_label(t.config)][to_string(t.config.backend)][t.config.seed] = &t;
  return g;
}

// Seeds present for every method of a problem.
std::vector<std::uint64_t> common_seeds(const std::map<std::string, std::map<std::uint64_t, const RunTrace*>>& methods) {
  std::vector<std::uint64_t> seeds;
  bool first = true;
  for (const auto& [name, runs] : methods) {
    std::vector<std::uint64_t> mine;
    for (const auto& [seed, trace] : runs) mine.push_back(seed);
    if (first) {
      seeds = mine;
      first = false;
    } else {
      std::vector<std::uint64_t> both;
      std::set_intersection(seeds.begin(), seeds.end(), mine.begin(), mine.end(), std::back_inserter(both));
      seeds = both;
    }
  }
  return seeds;
}

void write_atomically(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << content;
  }
  fs::rename(tmp, path);
}

}  // namespace

std::vector<std::uint64_t> Campaign::repeat_seeds() const {
  Rng rng = make_stream(master_seed);
  std::vector<std::uint64_t> seeds;
  for (int r = 0; r < repeats; ++r) seeds.push_back(rng() >> 1);
  return seeds;
}

std::vector<RunConfig> Campaign::expand() const {
  std::vector<RunConfig> out;
  const std::vector<std::uint64_t> seeds = repeat_seeds();
  for (const RunConfig& c : configs)
    for (std::uint64_t seed : seeds) {
      RunConfig r = c;
      r.seed = seed;
      r.design_seed = seed;
      out.push_back(r);
    }
  return out;
}

Campaign make_campaign(const RunConfig& base, const std::vector<std::string>& functions,
                       const std::vector<double>& noises,
                       const std::vector<AcquisitionKind>& acquisitions,
                       const std::vector<bool>& ard_flags, const std::vector<Backend>& backends,
                       int repeats, std::uint64_t master_seed) {
  Campaign c;
  c.repeats = repeats;
  c.master_seed = master_seed;
  for (const std::string& f : functions)
    for (double noise : noises)
      for (AcquisitionKind acq : acquisitions)
        for (bool ard : ard_flags)
          for (Backend b : backends) {
            RunConfig r = base;
            r.function = f;
            r.noise = noise;
            r.acquisition = acq;
            r.ard = ard;
            r.backend = b;
            c.configs.push_back(r);
          }
  return c;
}

std::string run_key(const RunConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(to_json(config).dump())));
  return buf;
}

fs::path trace_path(const fs::path& dir, const RunConfig& config) {
  return dir / (config.function + "_" + to_string(config.acquisition) + "_" +
                (config.ard ? "ard" : "iso") + "_" + to_string(config.backend) + "_n" +
                noise_label(config.noise) + "_" + run_key(config) + ".jsonl");
}

CampaignResult run_campaign(const Campaign& campaign, const fs::path& dir, int parallelism,
                            RangeCache* ranges) {
  fs::create_directories(dir);
  const std::vector<RunConfig> runs = campaign.expand();
  CampaignResult result;
  std::vector<RunConfig> todo;
  for (const RunConfig& r : runs) {
    const fs::path path = trace_path(dir, r);
    result.files.push_back(path);
    if (fs::exists(path))
      ++result.skipped;
    else
      todo.push_back(r);
  }

  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < todo.size(); i = next++) {
      const RunConfig& config = todo[i];
      std::string failure;
      try {
        const RunTrace trace = run(config, ranges);
        std::ostringstream out;
        write_trace(trace, out);
        write_atomically(trace_path(dir, config), out.str());
        if (!trace.ok) failure = trace.error;
      } catch (const std::exception& e) {
        failure = e.what();
      }
      std::lock_guard lock(mutex);
      ++result.executed;
      if (!failure.empty())
        result.failures.push_back(trace_path(dir, config).filename().string() + ": " + failure);
    }
  };
  const int workers = std::max(1, std::min<int>(parallelism, static_cast<int>(todo.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  std::sort(result.failures.begin(), result.failures.end());
  return result;
}

std::vector<RunTrace> load_traces(const fs::path& dir) {
  std::vector<fs::path> files;
  if (fs::exists(dir))
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<RunTrace> traces;
  for (const fs::path& f : files) {
    std::ifstream in(f);
    traces.push_back(read_trace(in));
  }
  return traces;
}

std::vector<double> consecutive_distances(const RunTrace& trace) {
  std::vector<double> out;
  if (trace.steps.empty()) return out;
  const int d = trace.dim();
  const int S = trace.config.initial_points(d);
  for (std::size_t t = static_cast<std::size_t>(S) + 1; t < trace.steps.size(); ++t)
    out.push_back((trace.steps[t].x_unit - trace.steps[t - 1].x_unit).norm() / std::sqrt(d));
  return out;
}

std::string problem_label(const RunConfig& c) {
  return c.function + "/noise=" + noise_label(c.noise) + "/" + to_string(c.acquisition) + "/" +
         (c.ard ? "ard" : "iso");
}

ProblemComparison compare_methods(const std::string& problem,
                                  const std::vector<std::pair<std::string, std::vector<double>>>& values,
                                  double alpha) {
  ProblemComparison out;
  out.problem = problem;
  if (values.empty()) return out;
  std::size_t best = 0;
  for (const auto& [name, v] : values) {
    MethodSummary m;
    m.method = name;
    m.values = v;
    m.median = median(v);
    m.mad = median_absolute_deviation(v);
    out.methods.push_back(std::move(m));
    if (out.methods.back().median < out.methods[best].median) best = out.methods.size() - 1;
  }
  out.methods[best].best = true;
  out.methods[best].equivalent = true;

  std::vector<std::size_t> others;
  std::vector<double> pvalues;
  for (std::size_t i = 0; i < out.methods.size(); ++i) {
    if (i == best) continue;
    double p = 1.0;
    if (out.methods[i].values.size() >= static_cast<std::size_t>(kWilcoxonMinPairs))
      p = wilcoxon_one_sided_paired(out.methods[best].values, out.methods[i].values);
    out.methods[i].p_value = p;
    others.push_back(i);
    pvalues.push_back(p);
  }
  const HolmResult holm = holm_bonferroni(pvalues, alpha);
  for (std::size_t k = 0; k < others.size(); ++k) {
    out.methods[others[k]].p_adjusted = holm.adjusted[k];
    out.methods[others[k]].equivalent = !holm.reject[k];
  }
  return out;
}

std::map<std::string, int> best_or_equivalent_summary(const std::vector<ProblemComparison>& reports) {
  std::map<std::string, int> counts;
  for (const ProblemComparison& r : reports)
    for (const MethodSummary& m : r.methods) counts[m.method] += m.equivalent ? 1 : 0;
  return counts;
}

std::vector<ProblemComparison> compare_traces(const std::vector<RunTrace>& traces, double alpha,
                                              int at_budget) {
  std::vector<ProblemComparison> out;
  for (const auto& [problem, methods] : group(traces)) {
    const std::vector<std::uint64_t> seeds = common_seeds(methods);
    if (seeds.empty()) continue;
    std::vector<std::pair<std::string, std::vector<double>>> values;
    for (const auto& [name, runs] : methods) {
      std::vector<double> v;
      for (std::uint64_t s : seeds) {
        const RunTrace& t = *runs.at(s);
        const std::size_t idx = at_budget > 0 ? std::min<std::size_t>(at_budget, t.steps.size()) - 1
                                              : t.steps.size() - 1;
        v.push_back(t.steps[idx].log_regret);
      }
      values.emplace_back(name, std::move(v));
    }
    out.push_back(compare_methods(problem, values, alpha));
  }
  return out;
}

Band summarise_series(const std::vector<std::vector<double>>& series) {
  Band band;
  if (series.empty()) return band;
  std::size_t len = series.front().size();
  for (const auto& s : series) len = std::min(len, s.size());
  for (std::size_t t = 0; t < len; ++t) {
    std::vector<double> column;
    for (const auto& s : series) column.push_back(s[t]);
    band.median.push_back(quantile(column, 0.5));
    band.lower.push_back(quantile(column, 0.25));
    band.upper.push_back(quantile(column, 0.75));
  }
  return band;
}

std::vector<fs::path> emit_report(const std::vector<RunTrace>& traces, const fs::path& dir,
                                  ReportFormat format, double alpha) {
  fs::create_directories(dir);
  const Grouped grouped = group(traces);
  const std::vector<ProblemComparison> comparisons = compare_traces(traces, alpha);

  std::vector<std::string> missing;
  for (const RunTrace& t : traces)
    if (!complete(t))
      missing.push_back(problem_label(t.config) + " " + to_string(t.config.backend) + " seed " +
                        std::to_string(t.config.seed) + (t.error.empty() ? " (incomplete)" : ": " + t.error));
  for (const auto& [problem, methods] : grouped) {
    const std::vector<std::uint64_t> seeds = common_seeds(methods);
    for (const auto& [name, runs] : methods)
      for (const auto& [seed, trace] : runs)
        if (!std::binary_search(seeds.begin(), seeds.end(), seed))
          missing.push_back(problem + " " + name + " seed " + std::to_string(seed) + " (unpaired)");
  }

  std::ostringstream summary, convergence, distances, comparison, text;
  summary << "problem,method,repeats,median_log_regret,mad_log_regret\n";
  convergence << "problem,method,t,median,q25,q75\n";
  distances << "problem,method,step,median,q25,q75\n";
  comparison << "problem,method,median,p_value,p_adjusted,best,best_or_equivalent\n";

  for (const auto& [problem, methods] : grouped) {
    for (const auto& [name, runs] : methods) {
      std::vector<std::vector<double>> regrets, dists;
      std::vector<double> finals;
      for (const auto& [seed, trace] : runs) {
        std::vector<double> r;
        for (const StepRecord& s : trace->steps) r.push_back(s.log_regret);
        finals.push_back(r.back());
        regrets.push_back(std::move(r));
        dists.push_back(consecutive_distances(*trace));
      }
      summary << problem << ',' << name << ',' << runs.size() << ',' << fmt(median(finals)) << ','
              << fmt(median_absolute_deviation(finals)) << '\n';
      const Band conv = summarise_series(regrets);
      for (std::size_t t = 0; t < conv.median.size(); ++t)
        convergence << problem << ',' << name << ',' << t + 1 << ',' << fmt(conv.median[t]) << ','
                    << fmt(conv.lower[t]) << ',' << fmt(conv.upper[t]) << '\n';
      const Band dist = summarise_series(dists);
      for (std::size_t k = 0; k < dist.median.size(); ++k)
        distances << problem << ',' << name << ',' << k + 1 << ',' << fmt(dist.median[k]) << ','
                  << fmt(dist.lower[k]) << ',' << fmt(dist.upper[k]) << '\n';
    }
  }

  text << "Final log simple regret (median, MAD) and best-or-equivalent status, alpha = "
       << fmt(alpha) << "\n\n";
  for (const ProblemComparison& pc : comparisons) {
    text << pc.problem << '\n';
    for (const MethodSummary& m : pc.methods) {
      comparison << pc.problem << ',' << m.method << ',' << fmt(m.median) << ',' << fmt(m.p_value)
                 << ',' << fmt(m.p_adjusted) << ',' << (m.best ? 1 : 0) << ','
                 << (m.equivalent ? 1 : 0) << '\n';
      text << "  " << std::left << std::setw(6) << m.method << " median " << fmt(m.median) << "  MAD "
           << fmt(m.mad) << "  n " << m.values.size()
           << (m.best ? "  best" : (m.equivalent ? "  equivalent" : "  worse (p_adj " + fmt(m.p_adjusted) + ")"))
           << '\n';
    }
  }
  text << "\nBest or statistically equivalent counts\n";
  for (const auto& [method, count] : best_or_equivalent_summary(comparisons))
    text << "  " << method << ": " << count << '\n';
  if (!missing.empty()) {
    text << "\nMissing or failed runs\n";
    for (const std::string& m : missing) text << "  " << m << '\n';
  }

  std::vector<fs::path> written;
  auto emit = [&](const char* name, const std::string& content) {
    write_atomically(dir / name, content);
    written.push_back(dir / name);
  };
  if (format == ReportFormat::Csv) {
    emit("summary.csv", summary.str());
    emit("convergence.csv", convergence.str());
    emit("distances.csv", distances.str());
    emit("comparison.csv", comparison.str());
  }
  emit("report.txt", text.str());
  return written;
}

}  // namespace fbbo
