#pragma once

#include <functional>
#include <vector>

#include "fbbo/gp.hpp"
#include "fbbo/inference.hpp"

namespace fbbo {

enum class AcquisitionKind { ExpectedImprovement, UpperConfidenceBound };

struct AcquisitionSpec {
  AcquisitionKind kind = AcquisitionKind::ExpectedImprovement;
  double beta = 0.0;       // UCB weight, >= 0
  double incumbent = 0.0;  // EI: best (lowest) standardized observation
};

// Variances below this take EI's deterministic limit max(f* - mu, 0).
inline constexpr double kEiVarianceFloor = 1e-12;

double normal_pdf(double s);
double normal_cdf(double s);

// sqrt(v) (s Phi(s) + phi(s)) with s = (f* - mu) / sqrt(v), for minimisation.
double expected_improvement(double mean, double variance, double incumbent);

// -mu + sqrt(beta v); larger is better.
double upper_confidence_bound(double mean, double variance, double beta);

// beta_t = 2 log(d t^2 pi^2 / (6 delta)).
double beta_schedule(int t, int d, double delta = 0.1);

double acquisition_value(const AcquisitionSpec& spec, const Prediction& pred);

// Arithmetic mean of the per-model acquisition values, summed in model order.
double integrated_acquisition(const AcquisitionSpec& spec, const PosteriorSamples& samples,
                              const std::vector<FittedGP>& gps,
                              const Eigen::Ref<const Eigen::RowVectorXd>& x);

// Integrated acquisition over the GPs of a posterior sample set. Identical
// consecutive samples share one fitted GP; a sample set with a single distinct
// member evaluates exactly like the single-model acquisition.
class AcquisitionModel {
 public:
  AcquisitionModel(AcquisitionSpec spec, std::vector<FittedGP> gps, std::vector<int> counts);

  // Fits one GP per distinct consecutive sample. Samples whose covariance
  // cannot be factorised are dropped; throws NotPositiveDefinite if none fit.
  static AcquisitionModel build(const AcquisitionSpec& spec, const KernelSpec& kernel,
                                const PosteriorSamples& samples,
                                std::shared_ptr<const Dataset> data);

  double operator()(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  // One value per row of Z.
  Vector evaluate(const Matrix& Z) const;

  int distinct_models() const { return static_cast<int>(gps_.size()); }
  int total_weight() const { return total_; }
  int jitter_events() const;

 private:
  AcquisitionSpec spec_;
  std::vector<FittedGP> gps_;
  std::vector<int> counts_;
  int total_ = 0;
};

// Batched acquisition: one value per row.
using BatchAcquisition = std::function<Vector(const Matrix&)>;

struct AcquisitionOptions {
  int pool = 1024;
  int starts = 10;
  double fd_step = 1e-6;
  int max_iterations = 100;
};

struct AcquisitionOptimum {
  Vector x;
  double value = 0.0;
};

// Scores an LHS candidate pool, refines the best `starts` candidates with a
// bounded quasi-Newton search on finite-difference gradients, and returns the
// best point found in [0,1]^d. Candidate ties go to the lowest pool index.
AcquisitionOptimum optimize_acquisition(const BatchAcquisition& acquisition, int d, Rng& rng,
                                        const AcquisitionOptions& options = {});

AcquisitionOptimum optimize_acquisition(const AcquisitionModel& model, int d, Rng& rng,
                                        const AcquisitionOptions& options = {});

}  // namespace fbbo
