#include "fbbo/benchmarks.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "fbbo/design.hpp"

namespace fbbo {

namespace {

using std::numbers::pi;

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

BenchmarkFunction make(std::string name, Vector lower, Vector upper,
                       std::function<double(const Vector&)> fn, Vector x_min) {
  BenchmarkFunction b;
  b.name = std::move(name);
  b.dim = static_cast<int>(lower.size());
  b.lower = std::move(lower);
  b.upper = std::move(upper);
  b.fn = std::move(fn);
  b.x_min = std::move(x_min);
  b.f_min = b.fn(b.x_min);
  return b;
}

double branin(const Vector& x) {
  const double b = 5.1 / (4.0 * pi * pi), c = 5.0 / pi, t = 1.0 / (8.0 * pi);
  const double q = x[1] - b * x[0] * x[0] + c * x[0] - 6.0;
  return q * q + 10.0 * (1.0 - t) * std::cos(x[0]) + 10.0;
}

double eggholder(const Vector& x) {
  const double a = x[1] + 47.0;
  return -a * std::sin(std::sqrt(std::abs(x[0] / 2.0 + a))) -
         x[0] * std::sin(std::sqrt(std::abs(x[0] - a)));
}

double goldstein_price(const Vector& x) {
  const double x1 = x[0], x2 = x[1];
  const double s = x1 + x2 + 1.0;
  const double d = 2.0 * x1 - 3.0 * x2;
  const double a = 1.0 + s * s * (19.0 - 14.0 * x1 + 3.0 * x1 * x1 - 14.0 * x2 + 6.0 * x1 * x2 + 3.0 * x2 * x2);
  const double b = 30.0 + d * d * (18.0 - 32.0 * x1 + 12.0 * x1 * x1 + 48.0 * x2 - 36.0 * x1 * x2 + 27.0 * x2 * x2);
  return a * b;
}

double six_hump_camel(const Vector& x) {
  const double x1 = x[0], x2 = x[1];
  return (4.0 - 2.1 * x1 * x1 + x1 * x1 * x1 * x1 / 3.0) * x1 * x1 + x1 * x2 +
         (-4.0 + 4.0 * x2 * x2) * x2 * x2;
}

template <int D>
double hartmann(const Vector& x, const double (&A)[4][D], const double (&P)[4][D]) {
  static constexpr double alpha[4] = {1.0, 1.2, 3.0, 3.2};
  double f = 0.0;
  for (int i = 0; i < 4; ++i) {
    double inner = 0.0;
    for (int j = 0; j < D; ++j) {
      const double diff = x[j] - 1e-4 * P[i][j];
      inner += A[i][j] * diff * diff;
    }
    f -= alpha[i] * std::exp(-inner);
  }
  return f;
}

constexpr double kHartmann3A[4][3] = {{3, 10, 30}, {0.1, 10, 35}, {3, 10, 30}, {0.1, 10, 35}};
constexpr double kHartmann3P[4][3] = {
    {3689, 1170, 2673}, {4699, 4387, 7470}, {1091, 8732, 5547}, {381, 5743, 8828}};
constexpr double kHartmann6A[4][6] = {{10, 3, 17, 3.5, 1.7, 8},
                                      {0.05, 10, 17, 0.1, 8, 14},
                                      {3, 3.5, 1.7, 10, 17, 8},
                                      {17, 8, 0.05, 10, 0.1, 14}};
constexpr double kHartmann6P[4][6] = {{1312, 1696, 5569, 124, 8283, 5886},
                                      {2329, 4135, 8307, 3736, 1004, 9991},
                                      {2348, 1451, 3522, 2883, 3047, 6650},
                                      {4047, 8828, 8732, 5743, 1091, 381}};

// Per-coordinate minimisers of -sin(x) sin^20(i x^2 / pi); the function is
// separable so the d-dimensional minimiser is their concatenation.
constexpr double kMichalewiczArgmin[10] = {
    2.2029055201716035, 1.5707963267948966, 1.2849915705494115, 1.9230584698654392,
    1.7204697725658575, 1.5707963267948966, 1.4544139713617037, 1.7560865209441525,
    1.6557174168207853, 1.5707963267948966};

// Smallest root of 4x^3 - 32x + 5.
constexpr double kStyblinskiTangArgmin = -2.9035340277711783;

}  // namespace

double BenchmarkFunction::evaluate(const Vector& x) const {
  if (x.size() != dim) throw std::invalid_argument(name + ": location has the wrong dimension");
  for (int i = 0; i < dim; ++i)
    if (!(x[i] >= lower[i] && x[i] <= upper[i]))
      throw std::invalid_argument(name + ": location outside the domain");
  return fn(x);
}

Vector BenchmarkFunction::to_native(const Vector& x_unit) const {
  if (x_unit.size() != dim) throw std::invalid_argument(name + ": unit location has the wrong dimension");
  for (int i = 0; i < dim; ++i)
    if (!(x_unit[i] >= 0.0 && x_unit[i] <= 1.0))
      throw std::invalid_argument(name + ": unit coordinate outside [0,1]");
  Vector x = lower + (upper - lower).cwiseProduct(x_unit);
  // Keep the upper corner exact despite rounding in lower + width.
  for (int i = 0; i < dim; ++i) x[i] = std::min(x[i], upper[i]);
  return x;
}

Vector BenchmarkFunction::to_unit(const Vector& x_native) const {
  return (x_native - lower).cwiseQuotient(upper - lower);
}

BenchmarkFunction make_ackley(int d) {
  auto fn = [](const Vector& x) {
    const double n = static_cast<double>(x.size());
    const double sq = x.squaredNorm() / n;
    const double cs = (2.0 * pi * x.array()).cos().sum() / n;
    return -20.0 * std::exp(-0.2 * std::sqrt(sq)) - std::exp(cs) + 20.0 + std::numbers::e;
  };
  return make("Ackley" + std::to_string(d), Vector::Constant(d, -32.768), Vector::Constant(d, 32.768),
              fn, Vector::Zero(d));
}

BenchmarkFunction make_michalewicz(int d) {
  if (d > 10) throw std::invalid_argument("Michalewicz: registered minimisers cover d <= 10");
  auto fn = [](const Vector& x) {
    double f = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      f -= std::sin(x[i]) * std::pow(std::sin((i + 1) * x[i] * x[i] / pi), 20);
    return f;
  };
  Vector x_min(d);
  for (int i = 0; i < d; ++i) x_min[i] = kMichalewiczArgmin[i];
  return make("Michalewicz" + std::to_string(d), Vector::Zero(d), Vector::Constant(d, pi), fn, x_min);
}

BenchmarkFunction make_styblinski_tang(int d) {
  auto fn = [](const Vector& x) {
    return 0.5 * (x.array().pow(4) - 16.0 * x.array().square() + 5.0 * x.array()).sum();
  };
  return make("StyblinskiTang" + std::to_string(d), Vector::Constant(d, -5.0), Vector::Constant(d, 5.0),
              fn, Vector::Constant(d, kStyblinskiTangArgmin));
}

BenchmarkFunction make_rosenbrock(int d) {
  auto fn = [](const Vector& x) {
    double f = 0.0;
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
      const double a = x[i + 1] - x[i] * x[i];
      const double b = x[i] - 1.0;
      f += 100.0 * a * a + b * b;
    }
    return f;
  };
  return make("Rosenbrock" + std::to_string(d), Vector::Constant(d, -5.0), Vector::Constant(d, 10.0),
              fn, Vector::Ones(d));
}

const std::vector<BenchmarkFunction>& benchmark_registry() {
  static const std::vector<BenchmarkFunction> registry = [] {
    std::vector<BenchmarkFunction> r;
    r.push_back(make("Branin", vec({-5.0, 0.0}), vec({10.0, 15.0}), branin, vec({pi, 2.275})));
    r.push_back(make("Eggholder", vec({-512.0, -512.0}), vec({512.0, 512.0}), eggholder,
                     vec({512.0, 404.2318049938646})));
    r.push_back(make("GoldsteinPrice", vec({-2.0, -2.0}), vec({2.0, 2.0}), goldstein_price,
                     vec({0.0, -1.0})));
    r.push_back(make("SixHumpCamel", vec({-3.0, -2.0}), vec({3.0, 2.0}), six_hump_camel,
                     vec({0.08984200893527233, -0.712656403019058})));
    r.push_back(make("Hartmann3", Vector::Zero(3), Vector::Ones(3),
                     [](const Vector& x) { return hartmann<3>(x, kHartmann3A, kHartmann3P); },
                     vec({0.11458888122541287, 0.5556488954739371, 0.8525469842172746})));
    r.push_back(make_ackley(5));
    r.push_back(make_ackley(10));
    r.push_back(make_michalewicz(5));
    r.push_back(make_michalewicz(10));
    r.push_back(make_styblinski_tang(5));
    r.push_back(make_styblinski_tang(7));
    r.push_back(make_styblinski_tang(10));
    r.push_back(make("Hartmann6", Vector::Zero(6), Vector::Ones(6),
                     [](const Vector& x) { return hartmann<6>(x, kHartmann6A, kHartmann6P); },
                     vec({0.20168950909365746, 0.15001069354111374, 0.4768739729250998,
                          0.2753324275220782, 0.3116516172395686, 0.6573005345536702})));
    r.push_back(make_rosenbrock(7));
    r.push_back(make_rosenbrock(10));
    return r;
  }();
  return registry;
}

const BenchmarkFunction& find_benchmark(const std::string& name) {
  for (const BenchmarkFunction& b : benchmark_registry())
    if (b.name == name) return b;
  throw std::invalid_argument("unknown benchmark function: " + name);
}

double estimate_range(const BenchmarkFunction& fn, int samples, Rng& rng) {
  if (samples < 1) throw std::invalid_argument("estimate_range: samples must be >= 1");
  const Design design = latin_hypercube(samples, fn.dim, rng);
  double f_max = -INFINITY;
  for (int i = 0; i < samples; ++i)
    f_max = std::max(f_max, fn.fn(fn.to_native(design.points.row(i).transpose())));
  return std::max(f_max - fn.f_min, 0.0);
}

RangeCache::RangeCache(std::filesystem::path file) : file_(std::move(file)) {
  if (file_.empty() || !std::filesystem::exists(file_)) return;
  std::ifstream in(file_);
  const nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_object())
    for (const auto& [key, value] : j.items())
      if (value.is_number()) values_[key] = value.get<double>();
}

double RangeCache::get(const BenchmarkFunction& fn, std::uint64_t seed, int samples) {
  const std::string key = fn.name + "|" + std::to_string(seed) + "|" + std::to_string(samples);
  {
    std::lock_guard lock(mutex_);
    if (auto it = values_.find(key); it != values_.end()) return it->second;
  }
  Rng rng = make_stream(seed);
  const double range = estimate_range(fn, samples, rng);
  std::lock_guard lock(mutex_);
  values_[key] = range;
  if (!file_.empty()) {
    nlohmann::json j(values_);
    const std::filesystem::path tmp = file_.string() + ".tmp";
    {
      std::ofstream out(tmp);
      out << j.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, file_);
  }
  return range;
}

NoisyObjective::NoisyObjective(const BenchmarkFunction& base, double noise_fraction, double range,
                               std::uint64_t seed)
    : base_(base), fraction_(noise_fraction), range_(range), rng_(make_stream(seed)) {
  if (noise_fraction < 0.0 || range < 0.0)
    throw std::invalid_argument("NoisyObjective: noise fraction and range must be non-negative");
}

NoisyObjective::Observation NoisyObjective::evaluate(const Vector& x_native) {
  const double f = base_.evaluate(x_native);
  if (fraction_ == 0.0) return {f, f};
  return {f + fraction_ * range_ * normal_(rng_), f};
}

}  // namespace fbbo
