#pragma once

// Restricted Boltzmann machines, marginalised over the hidden layer.
//
// Spin convention (visible and hidden units in {-1,+1}):
//   E(s) = sum_a ln cosh(sum_i w_ia s_i + zeta_a) + sum_i eta_i s_i,
//   p(s) proportional to exp(+E(s)),
// so the Hamiltonian in the H = -sum phi chi sense is -E and the effective
// couplings are phi_I = Ehat(I). Binary convention ({0,1} units):
//   H(v) = -sum_i b_i v_i - sum_a ln(1 + exp(c_a + sum_i W_ia v_i)),
//   p(v) proportional to exp(-H(v)).
// Under v = (s + 1) / 2 the two are the same distribution when
//   w = W / 4,  zeta_a = c_a / 2 + sum_i W_ia / 4,  eta_i = b_i / 2 + sum_a W_ia / 4.
//
// Flat parameter layout (both conventions): weights row-major (i * n_hidden + a),
// then hidden biases, then visible fields.

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "ebm/hobm.hpp"
#include "ebm/pbf.hpp"

namespace ebm {

enum class Convention { spin, binary };

struct RbmParameters {
  Convention convention = Convention::spin;
  Eigen::MatrixXd weights;        // n_visible x n_hidden: w (spin) or W (binary)
  Eigen::VectorXd hidden_biases;  // zeta or c
  Eigen::VectorXd visible_fields; // eta or b

  static RbmParameters zeros(int n_visible, int n_hidden, Convention convention = Convention::spin);
  static RbmParameters from_flat(Convention convention, int n_visible, int n_hidden, const Eigen::VectorXd& theta);

  int n_visible() const { return static_cast<int>(weights.rows()); }
  int n_hidden() const { return static_cast<int>(weights.cols()); }
  int n_params() const { return n_visible() * n_hidden() + n_hidden() + n_visible(); }
  Eigen::Index weight_index(int i, int a) const { return static_cast<Eigen::Index>(i) * n_hidden() + a; }
  Eigen::Index hidden_bias_index(int a) const { return static_cast<Eigen::Index>(n_visible()) * n_hidden() + a; }
  Eigen::Index visible_field_index(int i) const {
    return static_cast<Eigen::Index>(n_visible()) * n_hidden() + n_hidden() + i;
  }

  Eigen::VectorXd flatten() const;
  // Throws DimensionError on inconsistent shapes, NumericError on non-finite values.
  void validate() const;
};

RbmParameters to_spin(const RbmParameters& p);
RbmParameters to_binary(const RbmParameters& p);
// theta_spin = A theta_binary (the bijection is linear); gradients map through A^T.
Eigen::MatrixXd spin_from_binary_map(int n_visible, int n_hidden);

// These accept either convention and bridge as needed.
// E(s) of the spin convention.
double energy_spin(const RbmParameters& p, const SpinConfiguration& s);
// H(v) of the binary convention; v entries in {0,1}.
double marginal_energy_01(const RbmParameters& p, std::span<const int> v);
// Physical energy (p proportional to exp(-H)) in either convention, on spins.
double hamiltonian(const RbmParameters& p, const SpinConfiguration& s);

// Every configuration at once, spin convention. Row-major 2^N x n_hidden
// tables of pre-activations sum_i w_ia s_i + zeta_a, their ln cosh and tanh.
struct RbmEnumeration {
  int n_visible = 0;
  int n_hidden = 0;
  std::vector<double> preactivation;
  std::vector<double> log_cosh;
  std::vector<double> tanh;        // empty unless requested
  std::vector<double> log_weight;  // E(code)
};
RbmEnumeration enumerate_rbm(const RbmParameters& p, bool with_tanh = true);
// Same, reusing the buffers of `out` across calls.
void enumerate_rbm(const RbmParameters& p, bool with_tanh, RbmEnumeration& out);

// sum_c q[c] dE/dtheta(c) in the spin flat layout.
Eigen::VectorXd weighted_energy_gradient(const RbmEnumeration& e, std::span<const double> q);
// sum_c q[c] d2E/dtheta2(c), spin layout. Only (w_.a, zeta_a) blocks are nonzero.
Eigen::MatrixXd weighted_energy_hessian(const RbmEnumeration& e, std::span<const double> q);
// dE/dtheta_k at every configuration: 2^N x n_params, spin layout.
Eigen::MatrixXd energy_gradient_table(const RbmEnumeration& e);

ProbabilityTable model_distribution(const RbmParameters& p);
double log_partition(const RbmParameters& p);
double neg_log_likelihood(const RbmParameters& p, const Distribution& data);
// Gradient of -L in p's own convention and flat layout (descent direction is its negative).
Eigen::VectorXd nll_gradient_exact(const RbmParameters& p, const Distribution& data);
// Second derivatives of -L by enumeration:
//   sum_c (p_model - p_data)(c) d2E(c) + Cov_model(dE/dtheta).
Eigen::MatrixXd nll_hessian_exact(const RbmParameters& p, const Distribution& data);

// phi = Ehat on nonempty subsets, by a full transform of the energy table.
EffectiveCouplings extract_couplings_exact(const RbmParameters& p);

struct FormulaMode {
  enum class Kind { exact, monte_carlo };
  Kind kind = Kind::exact;
  long n_samples = 0;
  std::uint64_t seed = 0;

  static FormulaMode exact() { return {}; }
  static FormulaMode monte_carlo(long n_samples, std::uint64_t seed) { return {Kind::monte_carlo, n_samples, seed}; }
};

struct CouplingEstimate {
  double value = 0.0;
  double std_error = 0.0;  // zero in exact mode
};

// Per-subset coupling from the weights:
//   phi_I = 2^-n sum_a E_X[ sum_{sigma_I} chi_I(sigma) ln cosh(sum_{j in I} w_ja sigma_j + X_a + zeta_a) ]
// with X_a = sum_{j not in I} w_ja sigma_j and the outside spins uniform
// (enumerated in exact mode, sampled in monte_carlo mode); eta_i is added
// for |I| = 1. Exact mode agrees with extract_couplings_exact with sign +1.
CouplingEstimate extract_coupling_formula(const RbmParameters& p, SubsetIndex subset, FormulaMode mode);
// All subsets of order <= max_order through the formula (truncated result).
EffectiveCouplings extract_couplings_formula(const RbmParameters& p, int max_order, FormulaMode mode);
// Same subsets and seeds, with the per-subset standard errors kept.
std::vector<std::pair<Mask, CouplingEstimate>> estimate_couplings_formula(const RbmParameters& p, int max_order,
                                                                         FormulaMode mode);

// d phi_I / d theta_k for nonempty |I| <= max_order (rows ascending by mask).
struct Jacobian {
  std::vector<Mask> subsets;
  Eigen::MatrixXd matrix;  // subsets x n_params
};
Jacobian jacobian_phi_theta(const RbmParameters& p, int max_order = -1);
// Spectra of dE/dtheta_k, one per parameter (spin layout, empty set included).
std::vector<FourierSpectrum> energy_derivative_spectra(const RbmParameters& p);

// eta_i = arctanh <s_i>_data, w = zeta = 0.
RbmParameters spurious_point(const Distribution& data, int n_hidden);

struct RbmInitConfig {
  int n_visible = 0;
  int n_hidden = 0;
  Convention convention = Convention::spin;
  double weight_variance = 1e-4;
  std::uint64_t seed = 0;
};
// Zero biases, weights i.i.d. normal with the configured variance.
RbmParameters init(const RbmInitConfig& cfg);

// --- negative-phase sampling ---------------------------------------------

struct SamplerConfig {
  int n_chains = 64;
  int n_sweeps = 50;
  // Replica temperatures, strictly decreasing and ending at 1.
  std::vector<double> temperatures{1.0};
  std::uint64_t seed = 0;

  void validate() const;
  static std::vector<double> geometric_ladder(double t_max, int n_rungs);
};

// Parallel tempering with block Gibbs updates in the spin convention. Each
// chain owns one replica per temperature and its own generator, so chains
// are independent and results are ordered by chain index.
class ParallelTempering {
 public:
  ParallelTempering(int n_visible, const SamplerConfig& cfg);

  // n_sweeps Gibbs sweeps on every replica, each followed by one round of
  // neighbour swap proposals.
  void run(const RbmParameters& p, int n_sweeps);
  // Current temperature-1 configuration of every chain.
  std::vector<Mask> samples() const;
  double swap_acceptance() const;

  void save(std::ostream& out) const;
  static ParallelTempering load(std::istream& in);

 private:
  int n_visible_;
  SamplerConfig cfg_;
  std::vector<std::mt19937_64> rngs_;
  std::vector<std::vector<std::vector<std::int8_t>>> replicas_;  // chain, rung, site
  long swaps_tried_ = 0;
  long swaps_accepted_ = 0;
};

std::vector<Mask> sample_model(const RbmParameters& p, const SamplerConfig& cfg);

struct SampledGradient {
  Eigen::VectorXd gradient;   // estimate of the -L gradient, p's convention
  Eigen::VectorXd std_error;  // of the negative-phase mean across chains
};
// Positive phase exact over the batch, negative phase from the sampler.
SampledGradient nll_gradient_sampled(const RbmParameters& p, const Distribution& batch, const SamplerConfig& cfg);

}  // namespace ebm
