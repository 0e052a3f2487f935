#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fbbo/acquisition.hpp"
#include "fbbo/design.hpp"

using namespace fbbo;

namespace {

std::shared_ptr<const Dataset> toy_data(int n, int d, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix X(n, d);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) X(i, j) = u(rng);
    y[i] = std::cos(5.0 * X(i, 0)) + 0.5 * X.row(i).squaredNorm();
  }
  return std::make_shared<const Dataset>(Dataset::standardized(X, y));
}

Matrix random_points(int n, int d, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix Z(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) Z(i, j) = u(rng);
  return Z;
}

}  // namespace

TEST_CASE("EI reference values") {
  CHECK(std::abs(expected_improvement(0.0, 1.0, 0.0) - 0.398942) < 1e-6);
  CHECK(std::abs(expected_improvement(0.0, 1.0, 1.0) - 1.083316) < 1e-6);
  CHECK(expected_improvement(0.3, 0.0, 1.0) == doctest::Approx(0.7));
  CHECK(expected_improvement(1.3, 0.0, 1.0) == 0.0);
  CHECK(expected_improvement(0.0, 1.0, -40.0) >= 0.0);
}

TEST_CASE("UCB reference values") {
  CHECK(upper_confidence_bound(0.7, 2.0, 0.0) == -0.7);
  CHECK(upper_confidence_bound(1.0, 4.0, 1.0) == 1.0);
  CHECK(upper_confidence_bound(-0.4, 0.0, 9.0) == 0.4);
  for (double mu : {-1.0, 0.2, 3.0})
    for (double v : {0.1, 1.0, 5.0})
      for (double b : {0.5, 2.0, 7.0}) CHECK(upper_confidence_bound(mu, v, b) + mu == doctest::Approx(std::sqrt(b * v)).epsilon(1e-14));
}

TEST_CASE("normal pdf and cdf") {
  CHECK(normal_pdf(0.0) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)));
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_cdf(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-14));
  CHECK(normal_cdf(-40.0) >= 0.0);
}

TEST_CASE("EI monotonicity and continuity") {
  for (double v : {0.01, 0.5, 2.0}) {
    double prev = INFINITY;
    for (double mu = -2.0; mu <= 2.0; mu += 0.1) {
      const double e = expected_improvement(mu, v, 0.3);
      CHECK(e <= prev + 1e-15);
      prev = e;
    }
  }
  for (double mu : {-1.0, 0.0, 0.25}) {
    double prev = -INFINITY;
    for (double v = 1e-4; v < 10.0; v *= 1.5) {
      const double e = expected_improvement(mu, v, 0.3);
      CHECK(e >= prev - 1e-15);
      prev = e;
    }
  }
  for (double mu : {-0.5, 0.3, 0.9}) {
    const double limit = std::max(0.3 - mu, 0.0);
    CHECK(std::abs(expected_improvement(mu, 1e-10, 0.3) - limit) < 1e-4);
    CHECK(std::abs(expected_improvement(mu, 1e-11, 0.3) - limit) < 2e-5);
  }
}

TEST_CASE("beta schedule") {
  CHECK(beta_schedule(1, 2, 0.1) == doctest::Approx(2.0 * std::log(2.0 * std::pow(std::numbers::pi, 2) / 0.6)));
  CHECK(std::abs(beta_schedule(1, 2, 0.1) - 6.987) < 1e-3);
  const double delta = std::pow(std::numbers::pi, 2) / (6.0 * std::numbers::e);
  CHECK(beta_schedule(1, 1, delta) == doctest::Approx(2.0));
  for (int t = 1; t < 200; ++t) CHECK(beta_schedule(t + 1, 3) > beta_schedule(t, 3));
  CHECK_THROWS_AS(beta_schedule(1, 2, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(beta_schedule(1, 2, 1.0), std::invalid_argument);
}

TEST_CASE("integrated acquisition is the mean of per-model values") {
  Rng rng = make_stream(21);
  const auto data = toy_data(10, 2, rng);
  const KernelSpec spec{KernelFamily::Matern52, true, 2};
  PosteriorSamples samples;
  samples.provenance = Provenance::Mcmc;
  std::uniform_real_distribution<double> ls(0.1, 1.0), sf(0.5, 2.0);
  for (int m = 0; m < 16; ++m) {
    Vector l(2);
    l << ls(rng), ls(rng);
    samples.samples.push_back(HyperParams{l, sf(rng), 1e-3});
  }
  std::vector<FittedGP> gps;
  for (const auto& h : samples.samples) gps.push_back(FittedGP::fit(spec, h, data));

  for (AcquisitionKind kind : {AcquisitionKind::ExpectedImprovement, AcquisitionKind::UpperConfidenceBound}) {
    const AcquisitionSpec a{kind, 2.5, data->y.minCoeff()};
    const AcquisitionModel model = AcquisitionModel::build(a, spec, samples, data);
    CHECK(model.distinct_models() == 16);
    const Matrix Z = random_points(25, 2, rng);
    const Vector batch = model.evaluate(Z);
    for (int i = 0; i < Z.rows(); ++i) {
      // Oracle: naive loop over models.
      double sum = 0.0;
      for (const auto& gp : gps) {
        const Prediction p = gp.predict(Z.row(i));
        sum += kind == AcquisitionKind::ExpectedImprovement ? expected_improvement(p.mean, p.variance, a.incumbent)
                                                            : upper_confidence_bound(p.mean, p.variance, a.beta);
      }
      CHECK(std::abs(model(Z.row(i)) - sum / 16.0) < 1e-12);
      CHECK(std::abs(batch[i] - sum / 16.0) < 1e-12);
      CHECK(std::abs(integrated_acquisition(a, samples, gps, Z.row(i)) - sum / 16.0) < 1e-12);
    }
  }
}

TEST_CASE("two-model arithmetic mean") {
  // Two single-point GPs far apart give EI values we can set by hand.
  Rng rng = make_stream(22);
  const auto data = toy_data(4, 1, rng);
  const KernelSpec spec{KernelFamily::Matern52, false, 1};
  const HyperParams h1{Vector::Ones(1), 1.0, 0.01}, h2{Vector::Constant(1, 0.3), 2.0, 0.01};
  const AcquisitionSpec a{AcquisitionKind::ExpectedImprovement, 0.0, data->y.minCoeff()};
  std::vector<FittedGP> gps{FittedGP::fit(spec, h1, data), FittedGP::fit(spec, h2, data)};
  const AcquisitionModel model(a, gps, {1, 1});
  Eigen::RowVectorXd x(1);
  x << 0.37;
  const double e1 = acquisition_value(a, gps[0].predict(x)), e2 = acquisition_value(a, gps[1].predict(x));
  CHECK(model(x) == doctest::Approx(0.5 * (e1 + e2)).epsilon(1e-14));
  const AcquisitionModel weighted(a, gps, {3, 1});
  CHECK(weighted(x) == doctest::Approx(0.75 * e1 + 0.25 * e2).epsilon(1e-14));
}

TEST_CASE("MAP delta samples reproduce the single-model acquisition exactly") {
  Rng rng = make_stream(23);
  const auto data = toy_data(12, 3, rng);
  const KernelSpec spec{KernelFamily::Matern52, true, 3};
  Vector l(3);
  l << 0.4, 0.2, 0.7;
  const HyperParams theta{l, 1.3, 0.02};
  const FittedGP single = FittedGP::fit(spec, theta, data);
  const PosteriorSamples delta = map_as_samples(theta, 256);
  for (AcquisitionKind kind : {AcquisitionKind::ExpectedImprovement, AcquisitionKind::UpperConfidenceBound}) {
    const AcquisitionSpec a{kind, beta_schedule(13, 3), data->y.minCoeff()};
    const AcquisitionModel model = AcquisitionModel::build(a, spec, delta, data);
    CHECK(model.distinct_models() == 1);
    CHECK(model.total_weight() == 256);
    const Matrix Z = random_points(100, 3, rng);
    const Vector batch = model.evaluate(Z);
    for (int i = 0; i < 100; ++i) {
      const double ref = acquisition_value(a, single.predict(Z.row(i)));
      CHECK(std::abs(model(Z.row(i)) - ref) <= 1e-12);
      CHECK(std::abs(batch[i] - ref) <= 1e-12);
    }
  }
}

TEST_CASE("UCB with beta 0 finds the posterior-mean minimiser in 1-d") {
  Dataset d;
  d.X.resize(5, 1);
  d.X << 0.05, 0.25, 0.5, 0.75, 0.95;
  Vector y(5);
  for (int i = 0; i < 5; ++i) y[i] = std::pow(d.X(i, 0) - 0.62, 2);
  const auto data = std::make_shared<const Dataset>(Dataset::standardized(d.X, y));
  const KernelSpec spec{KernelFamily::Matern52, false, 1};
  const HyperParams theta{Vector::Constant(1, 0.4), 1.0, 1e-3};
  const AcquisitionSpec a{AcquisitionKind::UpperConfidenceBound, 0.0, 0.0};
  const AcquisitionModel model = AcquisitionModel::build(a, spec, map_as_samples(theta, 1), data);

  // Grid oracle on the posterior mean.
  const FittedGP gp = FittedGP::fit(spec, theta, data);
  double best_x = 0.0, best_mu = INFINITY;
  for (int i = 0; i <= 200000; ++i) {
    Eigen::RowVectorXd x(1);
    x << i / 200000.0;
    const double mu = gp.predict(x).mean;
    if (mu < best_mu) best_mu = mu, best_x = x[0];
  }
  Rng rng = make_stream(24);
  const AcquisitionOptimum opt = optimize_acquisition(model, 1, rng);
  CHECK(std::abs(opt.x[0] - best_x) < 1e-3);
  CHECK(opt.value == doctest::Approx(-best_mu).epsilon(1e-9));
}

TEST_CASE("optimum dominates the candidate pool and stays in the box") {
  const BatchAcquisition f = [](const Matrix& Z) {
    Vector v(Z.rows());
    for (int i = 0; i < Z.rows(); ++i) v[i] = std::sin(7.0 * Z(i, 0)) * std::cos(5.0 * Z(i, 1)) + Z(i, 1);
    return v;
  };
  Rng a = make_stream(25), b = make_stream(25);
  const AcquisitionOptimum opt = optimize_acquisition(f, 2, a);
  CHECK((opt.x.array() >= 0.0).all());
  CHECK((opt.x.array() <= 1.0).all());
  const AcquisitionOptions o;
  const Matrix pool = latin_hypercube(o.pool, 2, b).points;
  CHECK(opt.value >= f(pool).maxCoeff());
}

TEST_CASE("ties go to the lowest pool index") {
  // Constant acquisition: no refinement can improve, so the first candidate wins.
  const BatchAcquisition f = [](const Matrix& Z) { return Vector::Constant(Z.rows(), 1.0); };
  Rng a = make_stream(26), b = make_stream(26);
  const AcquisitionOptimum opt = optimize_acquisition(f, 2, a);
  const Matrix pool = latin_hypercube(1024, 2, b).points;
  CHECK((opt.x - pool.row(0).transpose()).norm() == 0.0);
}

TEST_CASE("argmax invariance under a constant shift") {
  const BatchAcquisition f = [](const Matrix& Z) {
    Vector v(Z.rows());
    for (int i = 0; i < Z.rows(); ++i) v[i] = -std::pow(Z(i, 0) - 0.3, 2) - std::pow(Z(i, 1) - 0.8, 2);
    return v;
  };
  const BatchAcquisition g = [&](const Matrix& Z) { return Vector(f(Z).array() + 3.0); };
  Rng a = make_stream(27), b = make_stream(27);
  const AcquisitionOptimum p = optimize_acquisition(f, 2, a), q = optimize_acquisition(g, 2, b);
  CHECK((p.x - q.x).norm() < 1e-6);
  CHECK(q.value - p.value == doctest::Approx(3.0).epsilon(1e-9));
}
