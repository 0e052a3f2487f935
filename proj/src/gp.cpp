#include "fbbo/gp.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

namespace fbbo {

namespace {

// Pivots below this fraction of the mean diagonal are treated as a failed
// factorisation; LLT alone accepts numerically singular matrices.
constexpr double kMinRelativePivot = 1e-14;

struct Factor {
  Matrix L;
  double jitter;
};

Factor factorise(const Matrix& K) {
  const Eigen::Index n = K.rows();
  const double mean_diag = K.diagonal().mean();
  std::vector<double> attempted;
  for (double level : kJitterLadder) {
    const double jitter = level * mean_diag;
    attempted.push_back(jitter);
    Matrix A = K;
    A.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(A);
    if (llt.info() != Eigen::Success) continue;
    Matrix L = llt.matrixL();
    const double min_pivot = L.diagonal().minCoeff();
    if (!(min_pivot * min_pivot > kMinRelativePivot * mean_diag)) continue;
    if (!L.allFinite()) continue;
    return {std::move(L), jitter};
  }
  std::ostringstream msg;
  msg << "covariance of size " << n << " is not positive definite after jitter escalation";
  throw NotPositiveDefinite(msg.str(), attempted);
}

}  // namespace

Dataset Dataset::standardized(Matrix X_unit, const Vector& y_raw, Vector lower, Vector upper) {
  if (X_unit.rows() < 1 || X_unit.rows() != y_raw.size())
    throw std::invalid_argument("Dataset: need n >= 1 locations with matching outputs");
  Dataset data;
  data.scaling.lower = lower.size() ? std::move(lower) : Vector::Zero(X_unit.cols());
  data.scaling.upper = upper.size() ? std::move(upper) : Vector::Ones(X_unit.cols());
  const double mean = y_raw.mean();
  double sd = 1.0;
  if (y_raw.size() >= 2) {
    const double var = (y_raw.array() - mean).square().mean();
    if (var > 0.0) sd = std::sqrt(var);
  }
  data.scaling.y_mean = mean;
  data.scaling.y_std = sd;
  data.y = (y_raw.array() - mean) / sd;
  data.X = std::move(X_unit);
  return data;
}

FittedGP FittedGP::fit(const KernelSpec& spec, const HyperParams& theta, const Dataset& data) {
  return fit(spec, theta, std::make_shared<const Dataset>(data));
}

FittedGP FittedGP::fit(const KernelSpec& spec, const HyperParams& theta,
                       std::shared_ptr<const Dataset> data) {
  if (!data || data->n() < 1) throw std::invalid_argument("fit: empty dataset");
  Matrix K = kernel_matrix(spec, theta, data->X);
  K.diagonal().array() += theta.noise * theta.noise;
  Factor f = factorise(K);

  FittedGP gp;
  gp.spec_ = spec;
  gp.theta_ = theta;
  gp.data_ = std::move(data);
  gp.chol_ = std::move(f.L);
  gp.jitter_ = f.jitter;
  gp.alpha_ = gp.chol_.triangularView<Eigen::Lower>().solve(gp.data_->y);
  gp.chol_.triangularView<Eigen::Lower>().transpose().solveInPlace(gp.alpha_);
  return gp;
}

double FittedGP::log_det() const { return 2.0 * chol_.diagonal().array().log().sum(); }

Prediction FittedGP::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  Vector mean, var;
  predict(Matrix(x), mean, var);
  return {mean[0], var[0]};
}

void FittedGP::predict(const Matrix& Z, Vector& mean, Vector& variance) const {
  const Matrix Ks = cross_covariance(spec_, theta_, data_->X, Z);
  mean = Ks.transpose() * alpha_;
  const Matrix V = chol_.triangularView<Eigen::Lower>().solve(Ks);
  const double prior = theta_.outputscale * theta_.outputscale;
  variance = (prior - V.colwise().squaredNorm().transpose().array()).cwiseMax(0.0);
}

double log_marginal_likelihood(const KernelSpec& spec, const HyperParams& theta,
                               const Dataset& data) {
  try {
    const FittedGP gp = FittedGP::fit(spec, theta, data);
    return -0.5 * data.y.dot(gp.alpha()) - 0.5 * gp.log_det() -
           0.5 * data.n() * std::log(2.0 * std::numbers::pi);
  } catch (const NotPositiveDefinite&) {
    return -std::numeric_limits<double>::infinity();
  }
}

LmlEvaluation lml_with_gradient(const KernelSpec& spec, const HyperParams& theta,
                                const Dataset& data) {
  const int p = spec.num_lengthscales();
  LmlEvaluation out;
  out.gradient = Vector::Zero(p + 2);

  std::shared_ptr<const Dataset> shared(&data, [](const Dataset*) {});
  std::optional<FittedGP> gp;
  try {
    gp.emplace(FittedGP::fit(spec, theta, shared));
  } catch (const NotPositiveDefinite&) {
    out.value = -std::numeric_limits<double>::infinity();
    out.ok = false;
    return out;
  }
  const int n = data.n();
  out.jitter = gp->jitter();
  out.value = -0.5 * data.y.dot(gp->alpha()) - 0.5 * gp->log_det() -
              0.5 * n * std::log(2.0 * std::numbers::pi);

  // dLML/dtheta_j = 1/2 tr((alpha alpha^T - K^-1) dK/dtheta_j)
  Matrix Kinv = Matrix::Identity(n, n);
  gp->chol().triangularView<Eigen::Lower>().solveInPlace(Kinv);
  gp->chol().triangularView<Eigen::Lower>().transpose().solveInPlace(Kinv);
  const Matrix A = gp->alpha() * gp->alpha().transpose() - Kinv;

  const std::vector<Matrix> dK = kernel_gradients(spec, theta, data.X);
  for (int j = 0; j <= p; ++j) out.gradient[j] = 0.5 * A.cwiseProduct(dK[j]).sum();
  out.gradient[p + 1] = theta.noise * A.trace();
  return out;
}

Vector lml_gradient(const KernelSpec& spec, const HyperParams& theta, const Dataset& data) {
  return lml_with_gradient(spec, theta, data).gradient;
}

}  // namespace fbbo
