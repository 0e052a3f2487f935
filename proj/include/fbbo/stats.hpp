#pragma once

#include <span>
#include <vector>

namespace fbbo {

// One-sided paired Wilcoxon signed-rank test of the alternative "a < b".
// Zero differences are dropped and tied |differences| get mid-ranks. Exact
// null distribution up to 25 non-zero pairs, otherwise a normal approximation
// with continuity and tie corrections. Returns 1 when every difference is 0.
double wilcoxon_one_sided_paired(std::span<const double> a, std::span<const double> b);

inline constexpr int kWilcoxonExactLimit = 25;
inline constexpr int kWilcoxonMinPairs = 5;

struct HolmResult {
  std::vector<double> adjusted;  // in input order
  std::vector<bool> reject;
};

// Holm step-down adjustment; a hypothesis is rejected when its adjusted
// p-value is below alpha.
HolmResult holm_bonferroni(std::span<const double> pvalues, double alpha);

// Linear-interpolation quantile (q in [0,1]) of an unsorted sample.
double quantile(std::vector<double> values, double q);
double median(std::vector<double> values);
// Median absolute deviation from the median, unscaled.
double median_absolute_deviation(const std::vector<double>& values);

}  // namespace fbbo
