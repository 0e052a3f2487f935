#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "fbbo/common.hpp"

namespace fbbo {

// A test function on a box domain with a registered global minimum.
struct BenchmarkFunction {
  std::string name;
  int dim = 0;
  Vector lower;
  Vector upper;
  std::function<double(const Vector&)> fn;
  double f_min = 0.0;
  Vector x_min;

  // Throws std::invalid_argument when x lies outside the domain.
  double evaluate(const Vector& x) const;

  // Affine map [0,1]^d -> domain; throws on coordinates outside [0,1].
  Vector to_native(const Vector& x_unit) const;
  Vector to_unit(const Vector& x_native) const;
};

// The 15 problems: Branin, Eggholder, GoldsteinPrice, SixHumpCamel (2-d),
// Hartmann3, Ackley5/10, Michalewicz5/10, StyblinskiTang5/7/10, Hartmann6,
// Rosenbrock7/10.
const std::vector<BenchmarkFunction>& benchmark_registry();

// Looks up a registry entry by name, e.g. "Branin" or "Ackley5".
const BenchmarkFunction& find_benchmark(const std::string& name);

// Dimension-generic constructors.
BenchmarkFunction make_ackley(int d);
BenchmarkFunction make_michalewicz(int d);
BenchmarkFunction make_styblinski_tang(int d);
BenchmarkFunction make_rosenbrock(int d);

// max over `samples` LHS points of f, minus the registered f_min.
double estimate_range(const BenchmarkFunction& fn, int samples, Rng& rng);

inline constexpr int kRangeSamples = 1000000;
inline constexpr std::uint64_t kRangeSeed = 20210521;

// Range estimates persisted as a JSON object keyed "name|seed|samples".
class RangeCache {
 public:
  explicit RangeCache(std::filesystem::path file = {});

  double get(const BenchmarkFunction& fn, std::uint64_t seed = kRangeSeed,
             int samples = kRangeSamples);

 private:
  std::filesystem::path file_;
  std::map<std::string, double> values_;
  std::mutex mutex_;
};

// f(x) + N(0, (fraction * range)^2), with its own random stream.
class NoisyObjective {
 public:
  NoisyObjective(const BenchmarkFunction& base, double noise_fraction, double range,
                 std::uint64_t seed);

  struct Observation {
    double y;
    double f_true;
  };

  Observation evaluate(const Vector& x_native);

  const BenchmarkFunction& base() const { return base_; }
  double noise_fraction() const { return fraction_; }
  double range() const { return range_; }

 private:
  const BenchmarkFunction& base_;
  double fraction_;
  double range_;
  Rng rng_;
  std::normal_distribution<double> normal_;
};

}  // namespace fbbo
