#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fbbo/gp.hpp"

using namespace fbbo;

namespace {

Matrix random_unit(int n, int d, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix X(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) X(i, j) = u(rng);
  return X;
}

Dataset random_dataset(int n, int d, Rng& rng) {
  std::normal_distribution<double> g;
  Vector y(n);
  for (int i = 0; i < n; ++i) y[i] = g(rng);
  return Dataset::standardized(random_unit(n, d, rng), y);
}

HyperParams random_theta(const KernelSpec& spec, Rng& rng) {
  std::uniform_real_distribution<double> ls(0.15, 1.5), sf(0.5, 2.0), sn(0.05, 0.5);
  HyperParams t;
  t.lengthscales.resize(spec.num_lengthscales());
  for (auto& v : t.lengthscales) v = ls(rng);
  t.outputscale = sf(rng);
  t.noise = sn(rng);
  return t;
}

// Oracle: dense inverse and determinant, no Cholesky.
double dense_lml(const KernelSpec& spec, const HyperParams& theta, const Dataset& data) {
  Matrix K = kernel_matrix(spec, theta, data.X);
  K.diagonal().array() += theta.noise * theta.noise;
  const Matrix Kinv = K.inverse();
  return -0.5 * data.y.dot(Kinv * data.y) - 0.5 * std::log(K.determinant()) -
         0.5 * data.n() * std::log(2.0 * std::numbers::pi);
}

}  // namespace

TEST_CASE("dataset standardisation") {
  Vector y(4);
  y << 1.0, 2.0, 3.0, 10.0;
  const Dataset d = Dataset::standardized(Matrix::Zero(4, 1), y);
  CHECK(std::abs(d.y.mean()) < 1e-12);
  CHECK(std::abs(d.y.squaredNorm() / 4.0 - 1.0) < 1e-8);
  CHECK(d.scaling.y_mean == 4.0);

  const Dataset single = Dataset::standardized(Matrix::Zero(1, 2), Vector::Constant(1, 5.0));
  CHECK(single.y[0] == 0.0);
  CHECK(single.scaling.y_std == 1.0);
  CHECK_THROWS_AS(Dataset::standardized(Matrix::Zero(2, 1), Vector::Zero(3)), std::invalid_argument);
}

TEST_CASE("n=1 unit variance fit") {
  const KernelSpec spec{KernelFamily::Matern52, false, 1};
  Dataset data;
  data.X = Matrix::Constant(1, 1, 0.3);
  data.y = Vector::Constant(1, 0.7);
  const HyperParams theta{Vector::Ones(1), 1.0, 0.0};
  const FittedGP gp = FittedGP::fit(spec, theta, data);
  CHECK(gp.chol()(0, 0) == 1.0);
  CHECK(gp.alpha()[0] == doctest::Approx(0.7));
  CHECK(gp.jitter() == 0.0);
}

TEST_CASE("duplicated inputs without noise need jitter") {
  const KernelSpec spec{KernelFamily::Matern52, false, 2};
  Rng rng = make_stream(3);
  Matrix X = random_unit(5, 2, rng);
  X.row(3) = X.row(1);
  Dataset data = Dataset::standardized(X, Vector::LinSpaced(5, 0.0, 1.0));
  const HyperParams theta{Vector::Constant(1, 0.5), 1.0, 0.0};

  // Un-jittered matrix is singular.
  Matrix K = kernel_matrix(spec, theta, X);
  CHECK(Eigen::FullPivLU<Matrix>(K).rank() < 5);

  const FittedGP gp = FittedGP::fit(spec, theta, data);
  CHECK(gp.jitter() > 0.0);
  K.diagonal().array() += gp.jitter();
  const Matrix LLt = gp.chol() * gp.chol().transpose();
  CHECK((LLt - K).norm() / K.norm() < 1e-8);
}

TEST_CASE("non-factorisable covariance reports attempted jitter") {
  const KernelSpec spec{KernelFamily::Matern52, false, 1};
  Dataset data;
  data.X = Matrix::Zero(3, 1);
  data.y = Vector::Zero(3);
  // Identical rows: the first jitter level rescues them.
  HyperParams theta{Vector::Ones(1), 1.0, 0.0};
  CHECK_NOTHROW(FittedGP::fit(spec, theta, data));

  try {
    HyperParams bad{Vector::Ones(1), 1e-160, 0.0};  // diagonal underflows to zero
    (void)FittedGP::fit(spec, bad, data);
    FAIL("expected NotPositiveDefinite");
  } catch (const NotPositiveDefinite& e) {
    CHECK(e.attempted_jitter.size() == std::size(kJitterLadder));
  }
  CHECK(log_marginal_likelihood(spec, HyperParams{Vector::Ones(1), 1e-160, 0.0}, data) == -INFINITY);
}

TEST_CASE("Cholesky reconstruction on a random n=16 problem") {
  Rng rng = make_stream(4);
  const KernelSpec spec{KernelFamily::Matern52, true, 3};
  const Dataset data = random_dataset(16, 3, rng);
  const HyperParams theta = random_theta(spec, rng);
  const FittedGP gp = FittedGP::fit(spec, theta, data);
  Matrix K = kernel_matrix(spec, theta, data.X);
  K.diagonal().array() += theta.noise * theta.noise + gp.jitter();
  CHECK((gp.chol() * gp.chol().transpose() - K).norm() / K.norm() < 1e-8);
}

TEST_CASE("LML scalar cases") {
  const KernelSpec spec{KernelFamily::Matern52, false, 1};
  Dataset data;
  data.X = Matrix::Zero(1, 1);
  data.y = Vector::Zero(1);
  const HyperParams theta{Vector::Ones(1), 1.0, 0.0};
  CHECK(log_marginal_likelihood(spec, theta, data) == doctest::Approx(-0.918938533204673).epsilon(1e-12));
  data.y[0] = 1.0;
  CHECK(log_marginal_likelihood(spec, theta, data) == doctest::Approx(-1.418938533204673).epsilon(1e-12));
}

TEST_CASE("Cholesky LML agrees with the dense-inverse oracle for n <= 32") {
  Rng rng = make_stream(5);
  for (int n : {2, 8, 16, 32})
    for (bool ard : {true, false}) {
      const KernelSpec spec{KernelFamily::Matern52, ard, 3};
      const Dataset data = random_dataset(n, 3, rng);
      const HyperParams theta = random_theta(spec, rng);
      const double a = log_marginal_likelihood(spec, theta, data);
      const double b = dense_lml(spec, theta, data);
      CHECK(std::abs(a - b) < 1e-9);
    }
}

TEST_CASE("LML gradient matches finite differences") {
  Rng rng = make_stream(6);
  for (bool ard : {true, false})
    for (int trial = 0; trial < 5; ++trial) {
      const KernelSpec spec{KernelFamily::Matern52, ard, 3};
      const Dataset data = random_dataset(12, 3, rng);
      const HyperParams theta = random_theta(spec, rng);
      const Vector g = lml_gradient(spec, theta, data);
      const int p = spec.num_lengthscales();
      REQUIRE(g.size() == p + 2);
      for (int j = 0; j < p + 2; ++j) {
        auto at = [&](double delta) {
          HyperParams t = theta;
          if (j < p) t.lengthscales[j] += delta;
          else if (j == p) t.outputscale += delta;
          else t.noise += delta;
          return log_marginal_likelihood(spec, t, data);
        };
        const double base = j < p ? theta.lengthscales[j] : (j == p ? theta.outputscale : theta.noise);
        const double h = 1e-5 * base;
        const double fd = (at(h) - at(-h)) / (2.0 * h);
        CHECK(std::abs(g[j] - fd) / std::max(std::abs(fd), 1e-2) < 1e-5);
      }
    }
}

TEST_CASE("zero targets leave only the complexity gradient") {
  Rng rng = make_stream(7);
  const KernelSpec spec{KernelFamily::Matern52, true, 2};
  Dataset data;
  data.X = random_unit(6, 2, rng);
  data.y = Vector::Zero(6);
  const HyperParams theta = random_theta(spec, rng);
  const LmlEvaluation e = lml_with_gradient(spec, theta, data);

  Matrix K = kernel_matrix(spec, theta, data.X);
  K.diagonal().array() += theta.noise * theta.noise;
  const Matrix Kinv = K.inverse();
  const auto dK = kernel_gradients(spec, theta, data.X);
  for (int j = 0; j < 3; ++j) CHECK(e.gradient[j] == doctest::Approx(-0.5 * (Kinv * dK[j]).trace()).epsilon(1e-9));
  CHECK(e.gradient[3] == doctest::Approx(-theta.noise * Kinv.trace()).epsilon(1e-9));
}

TEST_CASE("zero noise gives a zero noise gradient even with jitter") {
  const KernelSpec spec{KernelFamily::Matern52, false, 1};
  Dataset data;
  data.X = Matrix::Zero(2, 1);
  data.y = Vector::LinSpaced(2, -1.0, 1.0);
  const LmlEvaluation e = lml_with_gradient(spec, HyperParams{Vector::Ones(1), 1.0, 0.0}, data);
  CHECK(e.ok);
  CHECK(e.jitter > 0.0);
  CHECK(e.gradient[2] == 0.0);
}

TEST_CASE("prediction: interpolation, reversion to prior, scalar closed form") {
  Rng rng = make_stream(8);
  const KernelSpec spec{KernelFamily::Matern52, true, 2};
  const Dataset data = random_dataset(10, 2, rng);
  Vector l(2);
  l << 0.3, 0.4;
  const HyperParams theta{l, 1.2, 1e-12};
  const FittedGP gp = FittedGP::fit(spec, theta, data);
  for (int i = 0; i < data.n(); ++i) {
    const Prediction p = gp.predict(data.X.row(i));
    CHECK(std::abs(p.mean - data.y[i]) < 1e-6);
    CHECK(p.variance <= 1e-6);
  }

  Eigen::RowVectorXd far(2);
  far << 60.0, -60.0;
  const Prediction pf = gp.predict(far);
  CHECK(std::abs(pf.mean) < 1e-10);
  CHECK(pf.variance == doctest::Approx(1.44).epsilon(1e-10));

  Dataset one;
  one.X = Matrix::Constant(1, 2, 0.5);
  one.y = Vector::Constant(1, 0.8);
  const HyperParams t1{l, 1.1, 0.3};
  const FittedGP g1 = FittedGP::fit(spec, t1, one);
  Eigen::RowVectorXd xs(2);
  xs << 0.2, 0.7;
  const double k = kernel_value(spec, t1, xs, one.X.row(0));
  const double expected = k * 0.8 / (1.1 * 1.1 + 0.09);
  CHECK(g1.predict(xs).mean == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("properties: variance bounded by prior and shrinks with more data") {
  Rng rng = make_stream(9);
  const KernelSpec spec{KernelFamily::Matern52, true, 2};
  Vector l(2);
  l << 0.25, 0.35;
  const HyperParams theta{l, 1.0, 1e-6};
  const Dataset full = random_dataset(12, 2, rng);
  const Matrix probes = random_unit(50, 2, rng);
  for (int n = 2; n < 12; ++n) {
    Dataset small;
    small.X = full.X.topRows(n);
    small.y = full.y.head(n);
    Dataset bigger;
    bigger.X = full.X.topRows(n + 1);
    bigger.y = full.y.head(n + 1);
    const FittedGP a = FittedGP::fit(spec, theta, small), b = FittedGP::fit(spec, theta, bigger);
    Vector ma, va, mb, vb;
    a.predict(probes, ma, va);
    b.predict(probes, mb, vb);
    CHECK((va.array() <= 1.0 + 1e-12).all());
    CHECK((vb.array() <= va.array() + 1e-9).all());
    CHECK((va.array() >= 0.0).all());
  }
}
