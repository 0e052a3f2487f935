#include "fbbo/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace fbbo {

namespace {

constexpr double kSqrt5 = 2.23606797749978969641;

// Correlation as a function of the squared scaled distance.
double correlation(KernelFamily family, double r2) {
  if (family == KernelFamily::SquaredExponential) return std::exp(-r2);
  const double r = std::sqrt(r2);
  return (1.0 + kSqrt5 * r + 5.0 / 3.0 * r2) * std::exp(-kSqrt5 * r);
}

// d correlation / d r2.
double correlation_slope(KernelFamily family, double r2) {
  if (family == KernelFamily::SquaredExponential) return -std::exp(-r2);
  const double r = std::sqrt(r2);
  return -5.0 / 6.0 * (1.0 + kSqrt5 * r) * std::exp(-kSqrt5 * r);
}

}  // namespace

bool HyperParams::valid() const {
  if (lengthscales.size() == 0) return false;
  for (double l : lengthscales)
    if (!(l > 0.0) || !std::isfinite(l)) return false;
  return outputscale > 0.0 && std::isfinite(outputscale) && noise >= 0.0 && std::isfinite(noise);
}

bool HyperParams::operator==(const HyperParams& other) const {
  return lengthscales.size() == other.lengthscales.size() && lengthscales == other.lengthscales &&
         outputscale == other.outputscale && noise == other.noise;
}

void check_hyperparams(const KernelSpec& spec, const HyperParams& theta) {
  if (theta.lengthscales.size() != spec.num_lengthscales())
    throw std::invalid_argument("hyperparameters: length-scale count does not match kernel");
  if (!theta.valid())
    throw std::invalid_argument("hyperparameters: length-scales and output-scale must be positive");
}

double scaled_sqdist(const KernelSpec& spec, const Vector& lengthscales,
                     const Eigen::Ref<const Eigen::RowVectorXd>& x,
                     const Eigen::Ref<const Eigen::RowVectorXd>& xp) {
  double r2 = 0.0;
  for (int i = 0; i < spec.dim; ++i) {
    const double l = spec.ard ? lengthscales[i] : lengthscales[0];
    const double diff = (x[i] - xp[i]) / l;
    r2 += diff * diff;
  }
  return std::max(r2, 0.0);
}

double kernel_value(const KernelSpec& spec, const HyperParams& theta,
                    const Eigen::Ref<const Eigen::RowVectorXd>& x,
                    const Eigen::Ref<const Eigen::RowVectorXd>& xp) {
  check_hyperparams(spec, theta);
  if (x.size() != spec.dim || xp.size() != spec.dim)
    throw std::invalid_argument("kernel_value: location dimension mismatch");
  const double sf2 = theta.outputscale * theta.outputscale;
  return sf2 * correlation(spec.family, scaled_sqdist(spec, theta.lengthscales, x, xp));
}

Matrix cross_covariance(const KernelSpec& spec, const HyperParams& theta, const Matrix& X,
                        const Matrix& Z) {
  check_hyperparams(spec, theta);
  if (X.cols() != spec.dim || Z.cols() != spec.dim)
    throw std::invalid_argument("cross_covariance: location dimension mismatch");
  const double sf2 = theta.outputscale * theta.outputscale;
  Matrix K(X.rows(), Z.rows());
  for (Eigen::Index j = 0; j < Z.rows(); ++j)
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      K(i, j) = sf2 * correlation(spec.family,
                                  scaled_sqdist(spec, theta.lengthscales, X.row(i), Z.row(j)));
  return K;
}

Matrix kernel_matrix(const KernelSpec& spec, const HyperParams& theta, const Matrix& X) {
  check_hyperparams(spec, theta);
  if (X.rows() < 1) throw std::invalid_argument("kernel_matrix: need at least one location");
  if (X.cols() != spec.dim) throw std::invalid_argument("kernel_matrix: dimension mismatch");
  const double sf2 = theta.outputscale * theta.outputscale;
  const Eigen::Index n = X.rows();
  Matrix K(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    K(j, j) = sf2;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v =
          sf2 * correlation(spec.family, scaled_sqdist(spec, theta.lengthscales, X.row(i), X.row(j)));
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

std::vector<Matrix> kernel_gradients(const KernelSpec& spec, const HyperParams& theta,
                                     const Matrix& X) {
  check_hyperparams(spec, theta);
  if (X.cols() != spec.dim) throw std::invalid_argument("kernel_gradients: dimension mismatch");
  const int p = spec.num_lengthscales();
  const Eigen::Index n = X.rows();
  const double sf = theta.outputscale;
  const double sf2 = sf * sf;

  std::vector<Matrix> grads(p + 1, Matrix::Zero(n, n));
  for (Eigen::Index j = 0; j < n; ++j) {
    grads[p](j, j) = 2.0 * sf;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double r2 = scaled_sqdist(spec, theta.lengthscales, X.row(i), X.row(j));
      const double slope = sf2 * correlation_slope(spec.family, r2);
      // dr2/dl_k = -2 (x_k - x'_k)^2 / l_k^3
      for (int k = 0; k < spec.dim; ++k) {
        const int idx = spec.ard ? k : 0;
        const double l = theta.lengthscales[idx];
        const double diff = X(i, k) - X(j, k);
        const double g = slope * (-2.0 * diff * diff / (l * l * l));
        grads[idx](i, j) += g;
      }
      const double dsf = 2.0 * sf * correlation(spec.family, r2);
      grads[p](i, j) = dsf;
      grads[p](j, i) = dsf;
    }
  }
  for (int k = 0; k < p; ++k)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = j + 1; i < n; ++i) grads[k](j, i) = grads[k](i, j);
  return grads;
}

}  // namespace fbbo
