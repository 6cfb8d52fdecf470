#include "ebm/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "ebm/error.hpp"

namespace ebm {

namespace {

Mask rotl_sites(int i, int n) { return Mask{1} << (i % n); }

HigherOrderModel from_map(int n_sites, int max_order, const std::map<Mask, double>& couplings) {
  std::vector<SubsetVector::Entry> entries;
  for (const auto& [m, v] : couplings) {
    if (v != 0.0) entries.emplace_back(m, v);
  }
  return HigherOrderModel(EffectiveCouplings(n_sites, max_order, std::move(entries)));
}

void check_sites(int n_sites) {
  if (n_sites < 1 || n_sites > kMaxSites) throw DimensionError("n_sites must be in [1, 64]");
}

}  // namespace

HigherOrderModel three_body_chain(int n_sites, double beta) {
  if (n_sites < 3) throw DomainError("three_body_chain needs N >= 3");
  check_sites(n_sites);
  if (!std::isfinite(beta)) throw DomainError("beta must be finite");
  std::map<Mask, double> c;
  for (int i = 0; i < n_sites; ++i) {
    c[rotl_sites(i, n_sites) | rotl_sites(i + 1, n_sites) | rotl_sites(i + 2, n_sites)] += beta;
  }
  return from_map(n_sites, 3, c);
}

HigherOrderModel pairwise_random(int n_sites, double scale, std::uint64_t seed) {
  check_sites(n_sites);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  std::map<Mask, double> c;
  for (int i = 0; i < n_sites; ++i) c[Mask{1} << i] = normal(rng);
  for (int i = 0; i < n_sites; ++i) {
    for (int j = i + 1; j < n_sites; ++j) c[(Mask{1} << i) | (Mask{1} << j)] = normal(rng);
  }
  return from_map(n_sites, std::min(2, n_sites), c);
}

HigherOrderModel sparse_random(int n_sites, int order, double density, double scale, std::uint64_t seed) {
  check_sites(n_sites);
  if (order < 1 || order > n_sites) throw DomainError("order must be in [1, N]");
  if (!(density > 0.0) || density > 1.0) throw DomainError("density must be in (0, 1]");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(density);
  std::normal_distribution<double> normal(0.0, scale);
  std::map<Mask, double> c;
  for (Mask m : subsets_up_to(n_sites, order)) {
    if (std::popcount(m) != order) continue;
    if (keep(rng)) c[m] = normal(rng);
  }
  return from_map(n_sites, order, c);
}

HigherOrderModel product(const std::vector<double>& magnetizations) {
  const int n = static_cast<int>(magnetizations.size());
  check_sites(n);
  std::map<Mask, double> c;
  for (int i = 0; i < n; ++i) {
    const double m = magnetizations[static_cast<std::size_t>(i)];
    if (!(std::abs(m) < 1.0)) throw DomainError("magnetizations must lie strictly inside (-1, 1)");
    c[Mask{1} << i] = std::atanh(m);
  }
  return from_map(n, 1, c);
}

EmpiricalSamples sample_exact(const HigherOrderModel& model, long n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw DomainError("n_samples must be positive");
  const int n = model.n_sites();
  require_enumerable(n, "sample_exact (use sample_mcmc beyond the limit)");
  const ProbabilityTable table = model_distribution(model);
  std::vector<double> cdf(table.probabilities().size());
  std::partial_sum(table.probabilities().begin(), table.probabilities().end(), cdf.begin());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, cdf.back());
  std::vector<Mask> codes(static_cast<std::size_t>(n_samples));
  for (auto& c : codes) {
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), unif(rng));
    c = static_cast<Mask>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
  }
  return EmpiricalSamples(n, std::move(codes));
}

EmpiricalSamples sample_mcmc(const HigherOrderModel& model, long n_samples, const McmcConfig& cfg,
                             std::uint64_t seed) {
  if (n_samples < 1) throw DomainError("n_samples must be positive");
  if (cfg.n_chains < 1 || cfg.burn_in < 0 || cfg.spacing < 1) throw ConfigError("invalid MCMC configuration");
  const int n = model.n_sites();
  // Couplings touching each site; flipping s_i negates chi_I for every I containing i.
  std::vector<std::vector<std::pair<Mask, double>>> touching(static_cast<std::size_t>(n));
  model.couplings().for_each([&](Mask m, double v) {
    if (m == 0 || v == 0.0) return;
    if (!std::isfinite(v)) throw NumericError("non-finite coupling");
    for (int i = 0; i < n; ++i) {
      if ((m >> i) & 1) touching[static_cast<std::size_t>(i)].emplace_back(m, v);
    }
  });

  const long per_chain = (n_samples + cfg.n_chains - 1) / cfg.n_chains;
  std::vector<Mask> codes;
  codes.reserve(static_cast<std::size_t>(n_samples));
  for (int chain = 0; chain < cfg.n_chains && static_cast<long>(codes.size()) < n_samples; ++chain) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(chain)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Mask code = rng() & full_mask(n);
    auto sweep = [&] {
      for (int i = 0; i < n; ++i) {
        // With H = -sum phi chi, flipping s_i changes H by 2 sum_{I containing i} phi_I chi_I(s).
        double local = 0.0;
        for (const auto& [m, v] : touching[static_cast<std::size_t>(i)]) local += v * parity_sign(code, m);
        const double delta_h = 2.0 * local;
        if (delta_h <= 0.0 || unif(rng) < std::exp(-delta_h)) code ^= Mask{1} << i;
      }
    };
    for (long s = 0; s < cfg.burn_in; ++s) sweep();
    for (long k = 0; k < per_chain && static_cast<long>(codes.size()) < n_samples; ++k) {
      for (long s = 0; s < cfg.spacing; ++s) sweep();
      codes.push_back(code);
    }
  }
  return EmpiricalSamples(n, std::move(codes));
}

Eigen::MatrixXd covariance_matrix(const Distribution& d) {
  const int n = d.n_sites();
  const MomentVector m = moments(d, std::min(2, n));
  Eigen::MatrixXd c(n, n);
  for (int i = 0; i < n; ++i) {
    const double mi = m[Mask{1} << i];
    c(i, i) = 1.0 - mi * mi;
    for (int j = i + 1; j < n; ++j) {
      const double v = m[(Mask{1} << i) | (Mask{1} << j)] - mi * m[Mask{1} << j];
      c(i, j) = v;
      c(j, i) = v;
    }
  }
  return c;
}

void DatasetConfig::validate() const {
  if (n_sites < 1 || n_sites > kMaxSites) throw ConfigError("dataset.n_sites must be in [1, 64]");
  if (n_samples < 1) throw ConfigError("dataset.n_samples must be at least 1");
  if (!std::isfinite(beta)) throw ConfigError("dataset.beta must be finite");
  if (generator == Generator::three_body_chain && n_sites < 3) throw ConfigError("dataset.n_sites must be >= 3");
  if (generator == Generator::sparse_random) {
    if (!(density > 0.0) || density > 1.0) throw ConfigError("dataset.density must be in (0, 1]");
    if (order < 1 || order > n_sites) throw ConfigError("dataset.order must be in [1, n_sites]");
  }
  if (generator == Generator::product && static_cast<int>(magnetizations.size()) != n_sites) {
    throw ConfigError("dataset.magnetizations must have n_sites entries");
  }
}

std::string to_string(DatasetConfig::Generator g) {
  switch (g) {
    case DatasetConfig::Generator::three_body_chain:
      return "three_body_chain";
    case DatasetConfig::Generator::pairwise_random:
      return "pairwise_random";
    case DatasetConfig::Generator::sparse_random:
      return "sparse_random";
    case DatasetConfig::Generator::product:
      return "product";
  }
  return "unknown";
}

DatasetConfig::Generator parse_generator(const std::string& name) {
  for (auto g : {DatasetConfig::Generator::three_body_chain, DatasetConfig::Generator::pairwise_random,
                 DatasetConfig::Generator::sparse_random, DatasetConfig::Generator::product}) {
    if (to_string(g) == name) return g;
  }
  throw ConfigError("dataset.generator: unknown generator '" + name + "'");
}

HigherOrderModel ground_truth(const DatasetConfig& cfg) {
  cfg.validate();
  switch (cfg.generator) {
    case DatasetConfig::Generator::three_body_chain:
      return three_body_chain(cfg.n_sites, cfg.beta);
    case DatasetConfig::Generator::pairwise_random:
      return pairwise_random(cfg.n_sites, cfg.scale, cfg.seed);
    case DatasetConfig::Generator::sparse_random:
      return sparse_random(cfg.n_sites, cfg.order, cfg.density, cfg.scale, cfg.seed);
    case DatasetConfig::Generator::product:
      return product(cfg.magnetizations);
  }
  throw ConfigError("dataset.generator: unknown generator");
}

EmpiricalSamples generate(const DatasetConfig& cfg) {
  const HigherOrderModel truth = ground_truth(cfg);
  // The sampling stream is decorrelated from the generator's own seed use.
  const std::uint64_t sample_seed = cfg.seed ^ 0x9e3779b97f4a7c15ULL;
  if (cfg.n_sites <= enumeration_limit()) return sample_exact(truth, cfg.n_samples, sample_seed);
  return sample_mcmc(truth, cfg.n_samples, cfg.mcmc, sample_seed);
}

}  // namespace ebm
