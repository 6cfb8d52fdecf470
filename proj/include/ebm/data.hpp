#pragma once

// Synthetic ground truths and samplers.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ebm/hobm.hpp"

namespace ebm {

// H(s) = -beta sum_i s_i s_{i+1} s_{i+2} with periodic indices. Stored in
// truncated form (order 3), so N beyond the enumeration limit is fine.
HigherOrderModel three_body_chain(int n_sites, double beta);
// Fields and pairwise couplings drawn N(0, scale^2).
HigherOrderModel pairwise_random(int n_sites, double scale, std::uint64_t seed);
// Each subset of exactly `order` sites is present with probability
// `density`, with a N(0, scale^2) coupling.
HigherOrderModel sparse_random(int n_sites, int order, double density, double scale, std::uint64_t seed);
// Independent sites with <s_i> = m_i, i.e. h_i = arctanh m_i.
HigherOrderModel product(const std::vector<double>& magnetizations);

struct McmcConfig {
  long burn_in = 200;  // sweeps before the first recorded sample
  long spacing = 4;    // sweeps between recorded samples
  int n_chains = 16;
};

// i.i.d. draws from the enumerated Boltzmann table.
EmpiricalSamples sample_exact(const HigherOrderModel& model, long n_samples, std::uint64_t seed);
// Single-spin-flip Metropolis. Chains are seeded independently and their
// samples concatenated in chain order.
EmpiricalSamples sample_mcmc(const HigherOrderModel& model, long n_samples, const McmcConfig& cfg,
                             std::uint64_t seed);

// C_ij = <s_i s_j> - <s_i><s_j>.
Eigen::MatrixXd covariance_matrix(const Distribution& d);

struct DatasetConfig {
  enum class Generator { three_body_chain, pairwise_random, sparse_random, product };
  Generator generator = Generator::three_body_chain;
  int n_sites = 12;
  double beta = 0.5;
  long n_samples = 10000;
  std::uint64_t seed = 0;
  int order = 3;          // sparse_random
  double density = 0.1;   // sparse_random
  double scale = 0.5;     // pairwise_random, sparse_random
  std::vector<double> magnetizations;  // product
  McmcConfig mcmc;        // used beyond the enumeration limit

  void validate() const;
};

std::string to_string(DatasetConfig::Generator g);
DatasetConfig::Generator parse_generator(const std::string& name);

HigherOrderModel ground_truth(const DatasetConfig& cfg);
// Exact sampling within the enumeration limit, MCMC beyond it.
EmpiricalSamples generate(const DatasetConfig& cfg);

}  // namespace ebm
