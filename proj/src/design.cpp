#include "fbbo/design.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace fbbo {

Design latin_hypercube(int n, int d, Rng& rng) {
  if (n < 1 || d < 1) throw std::invalid_argument("latin_hypercube: n and d must be positive");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Design design{Matrix(n, d)};
  std::vector<int> perm(n);
  for (int j = 0; j < d; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    // Fisher-Yates with our own draws; std::shuffle is implementation-defined.
    for (int i = n - 1; i > 0; --i) {
      std::uniform_int_distribution<int> pick(0, i);
      std::swap(perm[i], perm[pick(rng)]);
    }
    for (int i = 0; i < n; ++i) {
      double u = (perm[i] + unif(rng)) / n;
      // (k + u)/n can round up to the next stratum boundary when u is close to 1.
      u = std::min(u, std::nextafter((perm[i] + 1.0) / n, 0.0));
      design.points(i, j) = u;
    }
  }
  return design;
}

double min_pairwise_distance(const Design& design) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < design.n(); ++i)
    for (int k = i + 1; k < design.n(); ++k)
      best = std::min(best, (design.points.row(i) - design.points.row(k)).norm());
  return best;
}

Design maximin_lhs(int n, int d, Rng& rng, int restarts) {
  if (restarts < 1) throw std::invalid_argument("maximin_lhs: restarts must be >= 1");
  Design best = latin_hypercube(n, d, rng);
  double best_dist = min_pairwise_distance(best);
  for (int r = 1; r < restarts; ++r) {
    Design candidate = latin_hypercube(n, d, rng);
    double dist = min_pairwise_distance(candidate);
    if (dist > best_dist) {
      best = std::move(candidate);
      best_dist = dist;
    }
  }
  return best;
}

}  // namespace fbbo
