#pragma once

#include <memory>

#include "fbbo/kernels.hpp"

namespace fbbo {

// Affine maps between native inputs / raw outputs and the unit cube /
// standardized outputs the GP sees.
struct Scaling {
  Vector lower;
  Vector upper;
  double y_mean = 0.0;
  double y_std = 1.0;
};

struct Dataset {
  Matrix X;  // n x d, unit cube
  Vector y;  // standardized
  Scaling scaling;

  int n() const { return static_cast<int>(X.rows()); }
  int d() const { return static_cast<int>(X.cols()); }

  // Standardizes raw outputs to zero mean and unit (population) variance.
  // With a single observation, or constant outputs, only the mean is removed.
  static Dataset standardized(Matrix X_unit, const Vector& y_raw, Vector lower = {},
                              Vector upper = {});
};

// Multiples of the mean diagonal tried, in order, when K + sigma_n^2 I fails
// to factorise. A zero entry is the un-jittered attempt.
inline constexpr double kJitterLadder[] = {0.0, 1e-8, 1e-6, 1e-4};

struct Prediction {
  double mean;
  double variance;
};

// Posterior-ready GP: owns the Cholesky factor of K + sigma_n^2 I + jitter I
// and alpha = (K + sigma_n^2 I)^-1 y. Immutable once built.
class FittedGP {
 public:
  // Throws NotPositiveDefinite if every jitter level fails.
  static FittedGP fit(const KernelSpec& spec, const HyperParams& theta,
                      std::shared_ptr<const Dataset> data);
  static FittedGP fit(const KernelSpec& spec, const HyperParams& theta, const Dataset& data);

  Prediction predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  // Batched prediction over the rows of Z.
  void predict(const Matrix& Z, Vector& mean, Vector& variance) const;

  const KernelSpec& spec() const { return spec_; }
  const HyperParams& theta() const { return theta_; }
  const Dataset& data() const { return *data_; }
  const Matrix& chol() const { return chol_; }
  const Vector& alpha() const { return alpha_; }
  // Absolute jitter added to the diagonal (0 if none was needed).
  double jitter() const { return jitter_; }

  // log|K + sigma_n^2 I + jitter I| from the factor.
  double log_det() const;

 private:
  FittedGP() = default;

  KernelSpec spec_;
  HyperParams theta_;
  std::shared_ptr<const Dataset> data_;
  Matrix chol_;
  Vector alpha_;
  double jitter_ = 0.0;
};

// -1/2 y^T (K + sigma_n^2 I)^-1 y - 1/2 log|K + sigma_n^2 I| - n/2 log 2 pi.
// Returns -inf when the covariance cannot be factorised.
double log_marginal_likelihood(const KernelSpec& spec, const HyperParams& theta,
                               const Dataset& data);

struct LmlEvaluation {
  double value = 0.0;
  // Over (l_1..l_p, sigma_f, sigma_n).
  Vector gradient;
  double jitter = 0.0;
  bool ok = true;
};

// Value and gradient in one factorisation. On failure value is -inf, the
// gradient is zero and ok is false.
LmlEvaluation lml_with_gradient(const KernelSpec& spec, const HyperParams& theta,
                                const Dataset& data);

Vector lml_gradient(const KernelSpec& spec, const HyperParams& theta, const Dataset& data);

}  // namespace fbbo
