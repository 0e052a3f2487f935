#pragma once

#include "fbbo/common.hpp"

namespace fbbo {

// A set of n points in [0,1]^d, one per row.
struct Design {
  Matrix points;

  int n() const { return static_cast<int>(points.rows()); }
  int d() const { return static_cast<int>(points.cols()); }
};

// Latin hypercube sample: every column places exactly one point in each of
// the n strata [k/n, (k+1)/n), uniformly within the stratum.
Design latin_hypercube(int n, int d, Rng& rng);

// Best of `restarts` independent LHS draws under the maximin (largest minimum
// pairwise Euclidean distance) criterion. Ties keep the earliest draw.
Design maximin_lhs(int n, int d, Rng& rng, int restarts = 100);

// Smallest pairwise Euclidean distance; +inf for fewer than two points.
double min_pairwise_distance(const Design& design);

}  // namespace fbbo
