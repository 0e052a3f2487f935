#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fbbo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// All randomness flows through explicitly owned 64-bit Mersenne Twister
// streams so that every component is reproducible from a seed.
using Rng = std::mt19937_64;

// Derives an independent stream from a master seed and a stream index.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

// Draws a fresh seed for a child stream.
inline std::uint64_t child_seed(Rng& rng) { return rng(); }

class InferenceFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when K + noise + jitter cannot be Cholesky-factorised.
class NotPositiveDefinite : public std::runtime_error {
 public:
  NotPositiveDefinite(const std::string& what, std::vector<double> attempted)
      : std::runtime_error(what), attempted_jitter(std::move(attempted)) {}

  std::vector<double> attempted_jitter;
};

}  // namespace fbbo
