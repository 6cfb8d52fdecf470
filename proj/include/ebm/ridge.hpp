#pragma once

// l2 penalty on the effective couplings. By Parseval,
//   sum_{I nonempty} phi_I^2 = Var_{s uniform}[E(s)],
// so the penalty and its parameter gradient Cov_uniform(E, dE/dtheta) need
// no transform and admit an unbiased sampling estimator at any N.
//
// A plain l2 penalty on the raw parameters theta is offered for comparison
// (Space::parameter). It is off by default.

#include <Eigen/Dense>
#include <cstdint>

#include "ebm/hobm.hpp"
#include "ebm/rbm.hpp"

namespace ebm {

struct RidgeConfig {
  enum class Estimator { exact, stochastic };
  enum class Space { effective, parameter };

  double lambda = 1e-4;
  Estimator estimator = Estimator::exact;
  long n_samples = 0;  // stochastic only, >= 2
  std::uint64_t seed = 0;
  Space space = Space::effective;

  void validate() const;
};

double penalty(const HigherOrderModel& model, const RidgeConfig& cfg);
double penalty(const RbmParameters& p, const RidgeConfig& cfg);

// -L + (lambda / 2) * penalty.
double ridge_nll(const HigherOrderModel& model, const Distribution& data, const RidgeConfig& cfg);
double ridge_nll(const RbmParameters& p, const Distribution& data, const RidgeConfig& cfg);

// Gradient of ridge_nll with respect to phi (hobm) or theta in p's convention.
SubsetVector ridge_gradient(const HigherOrderModel& model, const Distribution& data, const RidgeConfig& cfg);
Eigen::VectorXd ridge_gradient(const RbmParameters& p, const Distribution& data, const RidgeConfig& cfg);
// lambda * gradient of penalty / 2 alone (theta space, p's convention).
Eigen::VectorXd penalty_gradient(const RbmParameters& p, const RidgeConfig& cfg);

// <chi_I>_data - <chi_I>_model - lambda phi_I on nonempty subsets (dense,
// empty-set entry zero). Vanishes at a ridge optimum.
SubsetVector ridge_fixed_point_residual(const HigherOrderModel& model, const Distribution& data,
                                        const RidgeConfig& cfg);
SubsetVector ridge_fixed_point_residual(const RbmParameters& p, const Distribution& data, const RidgeConfig& cfg);

struct RidgeHessianReport {
  Eigen::MatrixXd direct;    // second derivatives of ridge_nll
  Eigen::MatrixXd sandwich;  // J^T (Cov_model(chi) + lambda I) J
  double max_abs_difference = 0.0;
  double min_eigenvalue = 0.0;
  // Smallest eigenvalue of the sandwich restricted to the row space of J.
  double min_row_space_eigenvalue = 0.0;
  int jacobian_rank = 0;
  int n_subsets = 0;
};

// Effective-space penalty only; dense enumeration.
RidgeHessianReport ridge_hessian_check(const HigherOrderModel& model, const Distribution& data,
                                       const RidgeConfig& cfg);
RidgeHessianReport ridge_hessian_check(const RbmParameters& p, const Distribution& data, const RidgeConfig& cfg);

}  // namespace ebm
