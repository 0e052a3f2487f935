#include "fbbo/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fbbo {

double wilcoxon_one_sided_paired(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("wilcoxon: samples must be paired");
  if (a.size() < static_cast<std::size_t>(kWilcoxonMinPairs))
    throw std::invalid_argument("wilcoxon: need at least 5 pairs");

  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] - b[i] != 0.0) diffs.push_back(a[i] - b[i]);
  const int n = static_cast<int>(diffs.size());
  if (n == 0) return 1.0;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return std::abs(diffs[i]) < std::abs(diffs[j]); });

  // Doubled mid-ranks keep everything integral.
  std::vector<int> rank2(n);
  double tie_term = 0.0;
  for (int i = 0; i < n;) {
    int j = i;
    while (j + 1 < n && std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) ++j;
    const int mid2 = (i + 1) + (j + 1);
    for (int k = i; k <= j; ++k) rank2[order[k]] = mid2;
    const double t = j - i + 1;
    tie_term += t * t * t - t;
    i = j + 1;
  }

  int w2 = 0;
  for (int i = 0; i < n; ++i)
    if (diffs[i] > 0.0) w2 += rank2[i];

  if (n <= kWilcoxonExactLimit) {
    const int max_sum = std::accumulate(rank2.begin(), rank2.end(), 0);
    // Under the null every sign is an independent fair coin.
    std::vector<double> dist(max_sum + 1, 0.0);
    dist[0] = 1.0;
    int reach = 0;
    for (int r : rank2) {
      for (int s = reach; s >= 0; --s) {
        if (dist[s] == 0.0) continue;
        dist[s + r] += 0.5 * dist[s];
        dist[s] *= 0.5;
      }
      reach += r;
    }
    double p = 0.0;
    for (int s = 0; s <= w2; ++s) p += dist[s];
    return std::min(p, 1.0);
  }

  const double w = 0.5 * w2;
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
  const double z = (w - mean + 0.5) / std::sqrt(var);
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

HolmResult holm_bonferroni(std::span<const double> pvalues, double alpha) {
  const std::size_t m = pvalues.size();
  for (double p : pvalues)
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("holm_bonferroni: p-values must lie in [0,1]");
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return pvalues[i] < pvalues[j]; });
  HolmResult out{std::vector<double>(m), std::vector<bool>(m, false)};
  double running = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double adj = std::min(1.0, static_cast<double>(m - k) * pvalues[order[k]]);
    running = std::max(running, adj);
    out.adjusted[order[k]] = running;
    out.reject[order[k]] = running < alpha;
  }
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * (values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - lo;
  return values[lo] + frac * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

double median_absolute_deviation(const std::vector<double>& values) {
  const double m = median(values);
  std::vector<double> dev;
  dev.reserve(values.size());
  for (double v : values) dev.push_back(std::abs(v - m));
  return median(std::move(dev));
}

}  // namespace fbbo
