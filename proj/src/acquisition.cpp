#include "fbbo/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "fbbo/design.hpp"
#include "fbbo/optimize.hpp"

namespace fbbo {

double normal_pdf(double s) { return std::exp(-0.5 * s * s) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double s) { return 0.5 * std::erfc(-s / std::numbers::sqrt2); }

double expected_improvement(double mean, double variance, double incumbent) {
  if (variance < kEiVarianceFloor) return std::max(incumbent - mean, 0.0);
  const double sd = std::sqrt(variance);
  const double s = (incumbent - mean) / sd;
  return std::max(sd * (s * normal_cdf(s) + normal_pdf(s)), 0.0);
}

double upper_confidence_bound(double mean, double variance, double beta) {
  return -mean + std::sqrt(beta * std::max(variance, 0.0));
}

double beta_schedule(int t, int d, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("beta_schedule: delta must be in (0,1)");
  if (t < 1 || d < 1) throw std::invalid_argument("beta_schedule: t and d must be >= 1");
  const double tt = static_cast<double>(t);
  return 2.0 * std::log(d * tt * tt * std::numbers::pi * std::numbers::pi / (6.0 * delta));
}

double acquisition_value(const AcquisitionSpec& spec, const Prediction& pred) {
  if (spec.kind == AcquisitionKind::ExpectedImprovement)
    return expected_improvement(pred.mean, pred.variance, spec.incumbent);
  return upper_confidence_bound(pred.mean, pred.variance, spec.beta);
}

double integrated_acquisition(const AcquisitionSpec& spec, const PosteriorSamples& samples,
                              const std::vector<FittedGP>& gps,
                              const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  if (gps.empty() || static_cast<int>(gps.size()) != samples.size())
    throw std::invalid_argument("integrated_acquisition: need one fitted GP per sample");
  double sum = 0.0;
  for (const FittedGP& gp : gps) sum += acquisition_value(spec, gp.predict(x));
  return sum / static_cast<double>(gps.size());
}

AcquisitionModel::AcquisitionModel(AcquisitionSpec spec, std::vector<FittedGP> gps,
                                   std::vector<int> counts)
    : spec_(spec), gps_(std::move(gps)), counts_(std::move(counts)) {
  if (gps_.empty() || gps_.size() != counts_.size())
    throw std::invalid_argument("AcquisitionModel: need one weight per model");
  total_ = std::accumulate(counts_.begin(), counts_.end(), 0);
}

AcquisitionModel AcquisitionModel::build(const AcquisitionSpec& spec, const KernelSpec& kernel,
                                         const PosteriorSamples& samples,
                                         std::shared_ptr<const Dataset> data) {
  std::vector<FittedGP> gps;
  std::vector<int> counts;
  std::vector<double> attempted;
  const HyperParams* previous = nullptr;
  bool previous_failed = false;
  for (const HyperParams& theta : samples.samples) {
    if (previous && theta == *previous) {
      if (!previous_failed) ++counts.back();
      continue;
    }
    previous = &theta;
    try {
      gps.push_back(FittedGP::fit(kernel, theta, data));
      counts.push_back(1);
      previous_failed = false;
    } catch (const NotPositiveDefinite& e) {
      previous_failed = true;
      attempted = e.attempted_jitter;
    }
  }
  if (gps.empty())
    throw NotPositiveDefinite("AcquisitionModel: no posterior sample gave a factorisable covariance",
                              attempted);
  return AcquisitionModel(spec, std::move(gps), std::move(counts));
}

int AcquisitionModel::jitter_events() const {
  int events = 0;
  for (const FittedGP& gp : gps_) events += gp.jitter() > 0.0 ? 1 : 0;
  return events;
}

double AcquisitionModel::operator()(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  if (gps_.size() == 1) return acquisition_value(spec_, gps_.front().predict(x));
  double sum = 0.0;
  for (std::size_t k = 0; k < gps_.size(); ++k)
    sum += counts_[k] * acquisition_value(spec_, gps_[k].predict(x));
  return sum / total_;
}

Vector AcquisitionModel::evaluate(const Matrix& Z) const {
  Vector out = Vector::Zero(Z.rows());
  Vector mean, var;
  for (std::size_t k = 0; k < gps_.size(); ++k) {
    gps_[k].predict(Z, mean, var);
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
      const double a = acquisition_value(spec_, {mean[i], var[i]});
      if (gps_.size() == 1)
        out[i] = a;
      else
        out[i] += counts_[k] * a;
    }
  }
  if (gps_.size() > 1) out /= static_cast<double>(total_);
  return out;
}

AcquisitionOptimum optimize_acquisition(const BatchAcquisition& acquisition, int d, Rng& rng,
                                        const AcquisitionOptions& opt) {
  if (opt.starts < 1 || opt.pool < 1) throw std::invalid_argument("optimize_acquisition: starts and pool must be >= 1");
  const Design pool = latin_hypercube(opt.pool, d, rng);
  const Vector scores = acquisition(pool.points);

  std::vector<int> order(opt.pool);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double sa = std::isfinite(scores[a]) ? scores[a] : -INFINITY;
    const double sb = std::isfinite(scores[b]) ? scores[b] : -INFINITY;
    return sa > sb;
  });

  AcquisitionOptimum best{pool.points.row(order[0]).transpose(), scores[order[0]]};

  auto single = [&](const Vector& x) {
    const Vector v = acquisition(Matrix(x.transpose()));
    return v[0];
  };
  const Objective negated = [&](const Vector& x, Vector& grad) {
    grad.resize(d);
    Vector xp = x, xm = x;
    for (int i = 0; i < d; ++i) {
      xp[i] = std::min(x[i] + opt.fd_step, 1.0);
      xm[i] = std::max(x[i] - opt.fd_step, 0.0);
      grad[i] = -(single(xp) - single(xm)) / (xp[i] - xm[i]);
      xp[i] = x[i];
      xm[i] = x[i];
    }
    const double v = single(x);
    return std::isfinite(v) ? -v : INFINITY;
  };

  LbfgsOptions lb;
  lb.lower = Vector::Zero(d);
  lb.upper = Vector::Ones(d);
  lb.max_iterations = opt.max_iterations;
  lb.gradient_tolerance = 1e-9;
  lb.relative_tolerance = 1e-12;

  const int refine = std::min(opt.starts, opt.pool);
  for (int k = 0; k < refine; ++k) {
    const OptimResult r = lbfgs_minimize(negated, pool.points.row(order[k]).transpose(), lb);
    const double value = -r.value;
    if (std::isfinite(value) && value > best.value) {
      best.x = r.x.cwiseMax(0.0).cwiseMin(1.0);
      best.value = value;
    }
  }
  return best;
}

AcquisitionOptimum optimize_acquisition(const AcquisitionModel& model, int d, Rng& rng,
                                        const AcquisitionOptions& options) {
  return optimize_acquisition([&model](const Matrix& Z) { return model.evaluate(Z); }, d, rng,
                              options);
}

}  // namespace fbbo
