#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fbbo/inference.hpp"

using namespace fbbo;

namespace {

LogDensity gaussian_density(const Vector& mean, const Matrix& cov) {
  const Matrix prec = cov.inverse();
  return [mean, prec](const Vector& z) {
    const Vector d = z - mean;
    return LogDensityValue{-0.5 * d.dot(prec * d), -(prec * d)};
  };
}

Dataset gp_dataset(int n, int d, std::uint64_t seed) {
  Rng rng = make_stream(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g;
  Matrix X(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) X(i, j) = u(rng);
  const KernelSpec spec{KernelFamily::Matern52, false, d};
  const HyperParams truth{Vector::Ones(1), 1.0, 0.1};
  Matrix K = kernel_matrix(spec, truth, X);
  K.diagonal().array() += 0.01 + 1e-10;
  Vector e(n);
  for (auto& v : e) v = g(rng);
  const Vector y = K.llt().matrixL() * e;
  return Dataset::standardized(X, y);
}

Matrix sample_cov(const Matrix& draws) {
  const Matrix c = draws.rowwise() - draws.colwise().mean();
  return c.transpose() * c / double(draws.rows() - 1);
}

}  // namespace

TEST_CASE("map_as_samples is a delta") {
  const HyperParams t{Vector::Constant(2, 0.3), 1.1, 0.05};
  const PosteriorSamples s = map_as_samples(t, 7);
  CHECK(s.size() == 7);
  CHECK(s.provenance == Provenance::MapDelta);
  for (const auto& h : s.samples) CHECK(h == t);
  CHECK_THROWS(map_as_samples(t, 0));
}

TEST_CASE("density maximum of a concave quadratic") {
  Vector mean(1);
  mean << 0.7;
  const LogDensity f = gaussian_density(mean, Matrix::Constant(1, 1, 0.3));
  LbfgsOptions opt;
  opt.gradient_tolerance = 1e-10;
  const DensityMaximum m = maximize_density(f, {Vector::Constant(1, -3.0), Vector::Constant(1, 4.0)}, opt);
  CHECK(std::abs(m.z[0] - 0.7) < 1e-6);
  CHECK(m.restart_values.size() == 2);
}

TEST_CASE("density maximum fails when every start is infeasible") {
  const LogDensity f = [](const Vector& z) { return LogDensityValue{-INFINITY, Vector::Zero(z.size())}; };
  CHECK_THROWS_AS(maximize_density(f, {Vector::Zero(2)}, {}), InferenceFailure);
}

TEST_CASE("flat-prior MAP equals type-II maximum likelihood") {
  const Dataset data = gp_dataset(12, 2, 31);
  const ParamLayout layout{{KernelFamily::Matern52, true, 2}, std::nullopt};
  Rng a = make_stream(1), b = make_stream(1);
  const MapResult map = map_estimate(layout, PriorSpec::flat_priors(), data, 4, a);
  const MapResult ml = ml_estimate(layout, data, 4, b);
  CHECK(map.theta == ml.theta);
  CHECK(map.log_posterior == ml.log_posterior);
  // At an interior optimum the LML gradient (in z) vanishes.
  const Vector z = layout.to_z(ml.theta);
  if ((z.array().abs() < kMapLogBound - 1e-3).all()) {
    const LogDensityValue v = log_posterior_unconstrained(layout, PriorSpec::flat_priors(), data, z, false);
    CHECK(v.gradient.cwiseAbs().maxCoeff() < 1e-4);
  }
}

TEST_CASE("multi-start MAP beats each restart") {
  const Dataset data = gp_dataset(64, 1, 32);
  const ParamLayout layout{{KernelFamily::Matern52, false, 1}, std::nullopt};
  Rng rng = make_stream(2);
  const MapResult r = map_estimate(layout, PriorSpec{}, data, 10, rng);
  REQUIRE(r.restart_values.size() == 10);
  for (double v : r.restart_values) CHECK(r.log_posterior >= v);
  const double direct = log_posterior_unconstrained(layout, PriorSpec{}, data, layout.to_z(r.theta), false).value;
  CHECK(direct == doctest::Approx(r.log_posterior).epsilon(1e-12));
}

TEST_CASE("MAP rejects zero restarts") {
  const Dataset data = gp_dataset(5, 1, 33);
  const ParamLayout layout{{KernelFamily::Matern52, false, 1}, std::nullopt};
  Rng rng = make_stream(3);
  CHECK_THROWS(map_estimate(layout, PriorSpec{}, data, 0, rng));
}

TEST_CASE("leapfrog is reversible and nearly conserves energy") {
  const LogDensity f = gaussian_density(Vector::Zero(3), Matrix::Identity(3, 3));
  PhasePoint p;
  p.z = Vector::LinSpaced(3, -1.0, 1.0);
  p.p = Vector::Constant(3, 0.4);
  const LogDensityValue v = f(p.z);
  p.log_density = v.value;
  p.grad = v.gradient;
  const Vector inv_metric = Vector::Ones(3);
  PhasePoint q = p;
  for (int i = 0; i < 20; ++i) q = leapfrog(f, q, 0.05, inv_metric);
  CHECK(std::abs(hamiltonian(q, inv_metric) - hamiltonian(p, inv_metric)) < 1e-3);
  q.p = -q.p;
  for (int i = 0; i < 20; ++i) q = leapfrog(f, q, 0.05, inv_metric);
  CHECK((q.z - p.z).norm() < 1e-10);
}

TEST_CASE("split R-hat") {
  Rng rng = make_stream(4);
  std::normal_distribution<double> g;
  std::vector<Matrix> chains(4, Matrix(400, 2));
  for (auto& c : chains)
    for (int i = 0; i < c.rows(); ++i)
      for (int j = 0; j < 2; ++j) c(i, j) = g(rng);
  for (double r : split_rhat(chains)) CHECK(r < 1.02);

  // A chain stuck at a different location inflates R-hat.
  chains[2].array() += 5.0;
  for (double r : split_rhat(chains)) CHECK(r > 1.5);

  // A trending chain is caught by splitting even when chains agree.
  std::vector<Matrix> trend(2, Matrix(200, 1));
  for (auto& c : trend)
    for (int i = 0; i < 200; ++i) c(i, 0) = i / 20.0 + 0.1 * g(rng);
  CHECK(split_rhat(trend)[0] > 1.5);
}

TEST_CASE("NUTS on a standard normal in 3 dims") {
  const LogDensity f = gaussian_density(Vector::Zero(3), Matrix::Identity(3, 3));
  NutsOptions opt;
  opt.burn_in = 500;
  opt.thin = 1;
  opt.num_samples = 4096;
  Rng rng = make_stream(5);
  const McmcResult r = nuts_sample(f, Vector::Constant(3, 2.0), opt, rng);
  REQUIRE(r.draws.rows() == 4096);
  REQUIRE(r.draws.cols() == 3);
  const Matrix cov = sample_cov(r.draws);
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(r.draws.col(j).mean()) < 0.1);
    CHECK(cov(j, j) > 0.85);
    CHECK(cov(j, j) < 1.15);
  }
  for (double rh : r.rhat) CHECK(rh < 1.05);
  CHECK(r.accept_rate > 0.6);
  CHECK(r.divergent_fraction == 0.0);
}

TEST_CASE("NUTS on a sharply peaked target") {
  Vector z0(2);
  z0 << 0.3, -1.2;
  const LogDensity f = gaussian_density(z0, 1e-6 * Matrix::Identity(2, 2));
  NutsOptions opt;
  opt.burn_in = 300;
  opt.thin = 1;
  opt.num_samples = 400;
  Rng rng = make_stream(6);
  const McmcResult r = nuts_sample(f, z0, opt, rng);
  for (int i = 0; i < r.draws.rows(); ++i) CHECK((r.draws.row(i).transpose() - z0).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("NUTS argument checks") {
  const LogDensity f = gaussian_density(Vector::Zero(1), Matrix::Identity(1, 1));
  Rng rng = make_stream(7);
  NutsOptions opt;
  opt.num_samples = 10;
  opt.chains = 4;
  CHECK_THROWS(nuts_sample(f, Vector::Zero(1), opt, rng));
  opt.chains = 0;
  CHECK_THROWS(nuts_sample(f, Vector::Zero(1), opt, rng));
}

TEST_CASE("NUTS on a GP posterior converges") {
  const Dataset data = gp_dataset(20, 2, 34);
  const ParamLayout layout{{KernelFamily::Matern52, true, 2}, std::nullopt};
  NutsOptions opt;
  opt.burn_in = 400;
  opt.thin = 2;
  opt.num_samples = 1024;
  Rng rng = make_stream(8);
  const PosteriorSamples s = nuts_sample(layout, PriorSpec{}, data, opt, rng);
  CHECK(s.size() == 1024);
  CHECK(s.provenance == Provenance::Mcmc);
  for (double rh : s.diagnostics.rhat) CHECK(rh < 1.05);
  for (const auto& h : s.samples) CHECK(h.valid());
}

TEST_CASE("ADVI on a correlated Gaussian") {
  Vector mean(2);
  mean << 1.0, -0.5;
  Matrix cov(2, 2);
  cov << 1.0, 0.8 * 0.5, 0.8 * 0.5, 0.25;
  const LogDensity f = gaussian_density(mean, cov);

  Rng rng = make_stream(9);
  const VariationalState fr = advi_fit(f, Vector::Zero(2), VariationalFamily::FullRank, {}, rng);
  CHECK((fr.mean - mean).cwiseAbs().maxCoeff() < 0.05);
  const Matrix c = fr.covariance();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(std::abs(c(i, j) - cov(i, j)) <= 0.05 * std::abs(cov(i, j)));
  CHECK(!fr.elbo_trace.empty());

  const VariationalState mf = advi_fit(f, Vector::Zero(2), VariationalFamily::MeanField, {}, rng);
  const Matrix cm = mf.covariance();
  CHECK(cm(0, 1) == 0.0);
  CHECK(cm(1, 0) == 0.0);
  CHECK(cm(0, 0) <= cov(0, 0));
  CHECK(cm(1, 1) <= cov(1, 1));
  // The optimum is the conditional variance 1 / prec_ii.
  const Matrix prec = cov.inverse();
  CHECK(cm(0, 0) == doctest::Approx(1.0 / prec(0, 0)).epsilon(0.1));
}

TEST_CASE("ADVI failure on a non-finite density") {
  const LogDensity f = [](const Vector& z) { return LogDensityValue{NAN, Vector::Zero(z.size())}; };
  Rng rng = make_stream(10);
  CHECK_THROWS_AS(advi_fit(f, Vector::Zero(2), VariationalFamily::MeanField, {}, rng), InferenceFailure);
}

TEST_CASE("ADVI on a GP posterior yields valid samples") {
  const Dataset data = gp_dataset(15, 2, 35);
  const ParamLayout layout{{KernelFamily::Matern52, true, 2}, kNoiseFreeSigma};
  Rng rng = make_stream(11);
  AdviOptions opt;
  opt.max_steps = 3000;
  for (auto family : {VariationalFamily::MeanField, VariationalFamily::FullRank}) {
    const VariationalState st = advi_fit(layout, PriorSpec{}, data, family, opt, rng);
    const PosteriorSamples s = draw_samples(st, layout, 32, rng);
    CHECK(s.size() == 32);
    CHECK(s.provenance == (family == VariationalFamily::MeanField ? Provenance::MeanFieldVi : Provenance::FullRankVi));
    for (const auto& h : s.samples) {
      CHECK(h.valid());
      CHECK(h.noise == kNoiseFreeSigma);
    }
  }
}

TEST_CASE("degenerate variational states collapse to exp(m)") {
  const ParamLayout layout{{KernelFamily::Matern52, false, 1}, std::nullopt};
  Rng rng = make_stream(12);
  VariationalState mf;
  mf.family = VariationalFamily::MeanField;
  mf.mean = Vector::LinSpaced(3, -1.0, 0.5);
  mf.log_std = Vector::Constant(3, -300.0);
  for (const auto& h : draw_samples(mf, layout, 10, rng).samples)
    CHECK((layout.to_z(h) - mf.mean).norm() < 1e-12);

  VariationalState fr;
  fr.family = VariationalFamily::FullRank;
  fr.mean = mf.mean;
  fr.chol = Matrix::Zero(3, 3);
  for (const auto& h : draw_samples(fr, layout, 10, rng).samples) CHECK(layout.to_z(h) == fr.mean);
}

TEST_CASE("full-rank draws reproduce L L^T") {
  VariationalState st;
  st.family = VariationalFamily::FullRank;
  st.mean = Vector::Zero(2);
  st.chol = Matrix::Zero(2, 2);
  st.chol << 1.0, 0.0, 0.6, 0.5;
  Rng rng = make_stream(13);
  const Matrix z = draw_z(st, 40000, rng);
  const Matrix c = sample_cov(z);
  CHECK((c - st.covariance()).cwiseAbs().maxCoeff() < 0.03);
}
