#pragma once

// Gradient-flow training and the analysis of its fixed points and of the
// order-by-order learning of effective couplings.
//
// Flow in parameter space:  theta' = -grad_theta(-L) = J^T grad_phi L
// Flow in effective space:  phi'   = J J^T grad_phi L
// with J = d phi / d theta and grad_phi L = <chi>_data - <chi>_model.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ebm/hobm.hpp"
#include "ebm/rbm.hpp"
#include "ebm/ridge.hpp"
#include "ebm/trajectory.hpp"

namespace ebm {

struct TrainConfig {
  enum class Gradient { exact, sampled };
  Gradient gradient = Gradient::exact;
  double step = 0.01;  // forward Euler step
  long n_steps = 1000;
  long log_every = 10;  // 0: first and last step only
  int track_order = 3;
  bool use_ridge = false;
  RidgeConfig ridge;
  SamplerConfig sampler;  // sampled mode; the seed advances per step
  long batch_size = 0;    // sampled mode on samples: 0 uses the whole set
  std::uint64_t seed = 0;

  void validate() const;
};

struct RbmTrainResult {
  RbmParameters params;
  TrainingTrajectory trajectory;
};

struct HobmTrainResult {
  HigherOrderModel model;
  TrainingTrajectory trajectory;
};

// Fixed-step gradient descent on -L (plus the ridge penalty when enabled).
// Logged rows carry per-order Frobenius norms of the extracted couplings
// (exact extraction within the enumeration limit, the per-subset formula in
// Monte Carlo mode beyond it) and per-order moment-mismatch norms.
// Throws NumericError naming the last good step when the loss turns non-finite.
RbmTrainResult train(const RbmParameters& init, const Distribution& data, const TrainConfig& cfg);
HobmTrainResult train(const HigherOrderModel& init, const Distribution& data, const TrainConfig& cfg);

// grad_phi L on every nonempty subset (dense, empty entry zero).
SubsetVector effective_gradient(const RbmParameters& p, const Distribution& data);

// phi' = J J^T grad_phi L (dense, empty entry zero).
SubsetVector effective_flow_rhs(const RbmParameters& p, const Distribution& data);

struct CouplingTerm {
  Mask subset = 0;          // J
  double overlap = 0.0;     // grad_theta phi_I . grad_theta phi_J
  double mismatch = 0.0;    // <chi_J>_data - <chi_J>_model
  double contribution = 0.0;
  double norm = 0.0;        // |grad_theta phi_J|
  double cosine = 0.0;      // cos angle(grad phi_I, grad phi_J); 0 when a norm vanishes
};
// One term per nonempty J; contributions sum to effective_flow_rhs[I].
std::vector<CouplingTerm> per_coupling_decomposition(const RbmParameters& p, const Distribution& data,
                                                     SubsetIndex subset);

struct CosineStats {
  int n_params = 0;
  double mean_abs_cos = 0.0;
  double q10 = 0.0;
  double q50 = 0.0;
  double q90 = 0.0;
  long n_pairs = 0;          // pairs used
  long n_zero_rows = 0;      // subsets whose gradient row vanished (excluded)
};
// |cos| between Jacobian rows of randomly drawn distinct subsets, |I| <= max_order.
CosineStats cosine_overlap_stats(const RbmParameters& p, int max_order, long n_pairs, std::uint64_t seed);

struct CosineSweep {
  std::vector<CosineStats> points;
  double slope = 0.0;  // least-squares slope of log mean|cos| against log N_theta
};
// Random RBMs with N(0, weight_std^2) weights and hidden biases, one per size.
CosineSweep cosine_scaling_sweep(int n_visible, const std::vector<int>& hidden_sizes, int max_order, long n_pairs,
                                 double weight_std, std::uint64_t seed);

// phi'_I ~ |grad_theta phi_I|^2 * mismatch_I (dense, empty entry zero).
SubsetVector diagonal_approx_rhs(const RbmParameters& p, const Distribution& data);

struct DiagonalDeviation {
  double median_relative = 0.0;
  double max_relative = 0.0;
  long n_compared = 0;  // subsets where the full right-hand side exceeds the floor
};
DiagonalDeviation diagonal_deviation(const RbmParameters& p, const Distribution& data, double floor = 1e-12);

struct BoundCheck {
  double lhs = 0.0;  // sum_{|I| >= n} |grad_theta phi_I|^2
  double rhs = 0.0;  // (1/n) sum_k I[dE/dtheta_k]
  double slack = 0.0;
};
BoundCheck proposition1_check(const RbmParameters& p, int order);
// Same bound for arbitrary energy-derivative spectra (one per parameter).
BoundCheck proposition1_check(const std::vector<FourierSpectrum>& derivative_spectra, int order);

// Direct second derivatives of -L (p's convention).
Eigen::MatrixXd hessian_theta(const RbmParameters& p, const Distribution& data);
// J^T Cov_model(chi) J, the data-consistent form of the same Hessian.
Eigen::MatrixXd hessian_sandwich(const RbmParameters& p);

enum class FixedPointKind { data_consistent, spurious, not_stationary };
std::string to_string(FixedPointKind kind);

struct FixedPointReport {
  FixedPointKind classification = FixedPointKind::not_stationary;
  double theta_grad_sup = 0.0;
  double phi_grad_sup = 0.0;
  double min_eigenvalue = 0.0;
  double max_abs_eigenvalue = 0.0;
  int n_negative = 0;  // below -zero_band
  int n_zero = 0;      // within the zero band
  double zero_band = 0.0;
  // max |J u| over unit eigenvectors u in the zero band.
  double max_kernel_residual = 0.0;
  // max |direct - sandwich|, data-consistent points only (NaN otherwise).
  double sandwich_difference = 0.0;
  bool marginally_stable = false;  // data-consistent points only
};

// Zero band |lambda| < 1e-8 (1 + max |lambda|).
FixedPointReport classify_fixed_point(const RbmParameters& p, const Distribution& data, double tol);
FixedPointReport classify_fixed_point(const HigherOrderModel& model, const Distribution& data, double tol);

struct MomentDynamicsReport {
  SubsetVector finite_difference;  // d<chi>/dt by a central difference along the flow
  SubsetVector predicted;          // Cov_model(chi) phi'
  double relative_error = 0.0;
  double covariance_identity_deviation = 0.0;  // max |Cov - I|
};
MomentDynamicsReport moment_dynamics_check(const RbmParameters& p, const Distribution& data, double step);

struct OrderTiming {
  int order = 0;
  double final_norm = 0.0;
  double peak_norm = 0.0;
  double overshoot = 0.0;  // peak / final
  bool above_floor = false;
  bool reached = false;
  long step = -1;  // first logged step at or above fraction * reference
  double time = 0.0;
};

// Learning time t_n: first logged step where the order-n norm reaches
// fraction * reference, the reference being the final norm (default) or the
// peak norm over the run.
enum class DsbReference { final_value, peak_value };

struct DsbReport {
  DsbReference reference = DsbReference::final_value;
  double fraction = 0.5;
  double floor = 1e-3;
  std::vector<OrderTiming> orders;
  bool ordered = false;  // t_1 <= t_2 <= ... over orders above the floor, all reached
  bool strictly_ordered = false;
};
DsbReport dsb_report(const TrainingTrajectory& trajectory, double fraction = 0.5, double floor = 1e-3,
                     DsbReference reference = DsbReference::final_value);

}  // namespace ebm
