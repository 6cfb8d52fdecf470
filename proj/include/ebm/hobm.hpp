#pragma once

// Fully visible Boltzmann machine with interactions of every order:
//   H(s) = - sum_{I nonempty} phi_I chi_I(s),   p(s) = exp(-H(s)) / Z.
// Everything here is exact enumeration over 2^N configurations.

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "ebm/pbf.hpp"
#include "ebm/trajectory.hpp"

namespace ebm {

class HigherOrderModel {
 public:
  explicit HigherOrderModel(EffectiveCouplings couplings);
  static HigherOrderModel zeros(int n_sites);
  // Zero couplings on every subset of order <= max_order (truncated form).
  static HigherOrderModel zeros_truncated(int n_sites, int max_order);

  int n_sites() const { return couplings_.n_sites(); }
  int max_order() const { return couplings_.max_order(); }
  bool is_dense() const { return couplings_.is_dense(); }
  const EffectiveCouplings& couplings() const { return couplings_; }

 private:
  EffectiveCouplings couplings_;
};

class ProbabilityTable {
 public:
  // Entries must be nonnegative and sum to 1 within 1e-12.
  ProbabilityTable(int n_sites, std::vector<double> probabilities);
  static ProbabilityTable from_weights(int n_sites, std::vector<double> weights);
  // Normalised exp(log_weights) with a max shift.
  static ProbabilityTable from_log_weights(int n_sites, std::span<const double> log_weights);
  static ProbabilityTable uniform(int n_sites);

  int n_sites() const { return n_sites_; }
  std::span<const double> probabilities() const { return p_; }
  double operator[](Mask code) const { return p_[static_cast<std::size_t>(code)]; }
  bool strictly_positive() const { return strictly_positive_; }

 private:
  int n_sites_;
  std::vector<double> p_;
  bool strictly_positive_;
};

class EmpiricalSamples {
 public:
  EmpiricalSamples(int n_sites, std::vector<Mask> codes);
  int n_sites() const { return n_sites_; }
  std::size_t size() const { return codes_.size(); }
  std::span<const Mask> codes() const { return codes_; }
  SpinConfiguration configuration(std::size_t k) const { return SpinConfiguration::from_code(codes_[k], n_sites_); }

 private:
  int n_sites_;
  std::vector<Mask> codes_;
};

// Either an exact table or a bag of samples p(s) = (1/M) sum_d delta(s - s_d).
class Distribution {
 public:
  Distribution(ProbabilityTable table) : v_(std::move(table)) {}  // NOLINT implicit by design of call sites
  Distribution(EmpiricalSamples samples) : v_(std::move(samples)) {}  // NOLINT

  int n_sites() const;
  bool is_table() const { return std::holds_alternative<ProbabilityTable>(v_); }
  const ProbabilityTable& table() const;
  const EmpiricalSamples& samples() const;
  // Exact table, or the histogram of the samples (needs N within the limit).
  ProbabilityTable to_table() const;
  bool strictly_positive() const;

 private:
  std::variant<ProbabilityTable, EmpiricalSamples> v_;
};

double energy(const HigherOrderModel& model, const SpinConfiguration& s);
// H for every configuration code.
std::vector<double> energy_table(const HigherOrderModel& model);
double log_partition(const HigherOrderModel& model);
ProbabilityTable model_distribution(const HigherOrderModel& model);

// <chi_I> for 1 <= |I| <= max_order (max_order < 0 or >= N: every subset,
// dense, with the empty-set entry equal to 1).
MomentVector moments(const Distribution& d, int max_order = -1);

double neg_log_likelihood(const HigherOrderModel& model, const Distribution& data);
// d(-L)/d phi_I = <chi_I>_model - <chi_I>_data on the model's subsets.
SubsetVector nll_gradient(const HigherOrderModel& model, const Distribution& data);
// Cov_model(chi_I, chi_J) over nonempty I, J; row/column k <-> mask k + 1.
Eigen::MatrixXd nll_hessian(const HigherOrderModel& model);
inline constexpr int kHessianSiteLimit = 10;

double entropy(const ProbabilityTable& p);
double kl_divergence(const ProbabilityTable& p, const ProbabilityTable& q);

struct OptimizerConfig {
  enum class Mode { backtracking, fixed_step };
  Mode mode = Mode::backtracking;
  double step = 1.0;  // fixed step, or first trial step of the line search
  long max_iters = 200000;
  double tolerance = 1e-8;  // sup-norm of the (ridge) gradient
  int max_order = -1;       // < 0: all orders
  double ridge_lambda = 0.0;
  long log_every = 0;  // 0: log first and last iterate only
  int track_order = 3;
};

struct FitResult {
  HigherOrderModel model;
  TrainingTrajectory trajectory;
  bool converged = false;
  long iterations = 0;
  double final_mismatch = 0.0;  // sup-norm of the stationarity residual
};

// Convex maximum likelihood (plus lambda/2 |phi|^2 when ridge_lambda > 0).
// Data with zero-probability configurations is refused unless ridge_lambda > 0.
FitResult fit(const Distribution& data, const OptimizerConfig& cfg,
              std::optional<HigherOrderModel> init = std::nullopt);

// Exact inverse of model_distribution on strictly positive tables:
// phi_I = (ln p)^(I) for nonempty I.
HigherOrderModel couplings_from_distribution(const ProbabilityTable& data);

}  // namespace ebm
