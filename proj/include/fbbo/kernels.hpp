#pragma once

#include <vector>

#include "fbbo/common.hpp"

namespace fbbo {

enum class KernelFamily { SquaredExponential, Matern52 };

struct KernelSpec {
  KernelFamily family = KernelFamily::Matern52;
  bool ard = true;
  int dim = 1;

  int num_lengthscales() const { return ard ? dim : 1; }
};

// GP hyperparameters: length-scales (one per dimension under ARD, otherwise a
// single shared one), output-scale sigma_f and observation noise sigma_n, all
// expressed as standard deviations.
struct HyperParams {
  Vector lengthscales;
  double outputscale = 1.0;
  double noise = 0.0;

  bool valid() const;
  bool operator==(const HyperParams& other) const;
};

// Throws std::invalid_argument if theta does not fit spec or has a
// non-positive length-scale / output-scale or negative noise.
void check_hyperparams(const KernelSpec& spec, const HyperParams& theta);

// Squared scaled distance sum_i (x_i - x'_i)^2 / l_i^2, clamped at zero.
double scaled_sqdist(const KernelSpec& spec, const Vector& lengthscales,
                     const Eigen::Ref<const Eigen::RowVectorXd>& x,
                     const Eigen::Ref<const Eigen::RowVectorXd>& xp);

double kernel_value(const KernelSpec& spec, const HyperParams& theta,
                    const Eigen::Ref<const Eigen::RowVectorXd>& x,
                    const Eigen::Ref<const Eigen::RowVectorXd>& xp);

// n x n covariance over the rows of X (noise not included).
Matrix kernel_matrix(const KernelSpec& spec, const HyperParams& theta, const Matrix& X);

// n x m cross-covariance between the rows of X and the rows of Z.
Matrix cross_covariance(const KernelSpec& spec, const HyperParams& theta, const Matrix& X,
                        const Matrix& Z);

// dK/dl_1 .. dK/dl_p followed by dK/dsigma_f.
std::vector<Matrix> kernel_gradients(const KernelSpec& spec, const HyperParams& theta,
                                     const Matrix& X);

}  // namespace fbbo
