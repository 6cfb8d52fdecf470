#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "ebm/error.hpp"
#include "ebm/rbm.hpp"

namespace ebm {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double log_cosh1(double x) {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

// Hidden-marginal log weight at inverse temperature beta when the joint
// spin energy is scaled by beta.
double tempered_log_weight(const RbmParameters& p, const std::vector<std::int8_t>& s, double beta) {
  double e = 0.0;
  for (int a = 0; a < p.n_hidden(); ++a) {
    double x = p.hidden_biases(a);
    for (int i = 0; i < p.n_visible(); ++i) x += p.weights(i, a) * s[static_cast<std::size_t>(i)];
    e += log_cosh1(beta * x);
  }
  for (int i = 0; i < p.n_visible(); ++i) e += beta * p.visible_fields(i) * s[static_cast<std::size_t>(i)];
  return e;
}

// dE/dtheta at one configuration, spin layout.
Eigen::VectorXd energy_gradient_at(const RbmParameters& p, Mask code) {
  Eigen::VectorXd g(p.n_params());
  const int n = p.n_visible();
  for (int a = 0; a < p.n_hidden(); ++a) {
    double x = p.hidden_biases(a);
    for (int i = 0; i < n; ++i) x += ((code >> i) & 1) ? p.weights(i, a) : -p.weights(i, a);
    const double t = std::tanh(x);
    for (int i = 0; i < n; ++i) g(p.weight_index(i, a)) = ((code >> i) & 1) ? t : -t;
    g(p.hidden_bias_index(a)) = t;
  }
  for (int i = 0; i < n; ++i) g(p.visible_field_index(i)) = ((code >> i) & 1) ? 1.0 : -1.0;
  return g;
}

}  // namespace

void SamplerConfig::validate() const {
  if (n_chains < 1) throw ConfigError("sampler needs at least one chain");
  if (n_sweeps < 0) throw ConfigError("sampler sweep count must be nonnegative");
  if (temperatures.empty()) throw ConfigError("sampler needs at least one temperature");
  for (std::size_t k = 0; k < temperatures.size(); ++k) {
    if (!std::isfinite(temperatures[k]) || temperatures[k] <= 0.0) throw ConfigError("temperatures must be positive");
    if (k > 0 && !(temperatures[k] < temperatures[k - 1])) {
      throw ConfigError("temperatures must be strictly decreasing");
    }
  }
  if (temperatures.back() != 1.0) throw ConfigError("the last temperature must be 1");
}

std::vector<double> SamplerConfig::geometric_ladder(double t_max, int n_rungs) {
  if (n_rungs < 1) throw ConfigError("ladder needs at least one rung");
  if (n_rungs == 1) return {1.0};
  if (!(t_max > 1.0)) throw ConfigError("ladder top temperature must exceed 1");
  std::vector<double> t(static_cast<std::size_t>(n_rungs));
  for (int k = 0; k < n_rungs; ++k) {
    t[static_cast<std::size_t>(k)] = std::pow(t_max, static_cast<double>(n_rungs - 1 - k) / (n_rungs - 1));
  }
  t.back() = 1.0;
  return t;
}

ParallelTempering::ParallelTempering(int n_visible, const SamplerConfig& cfg) : n_visible_(n_visible), cfg_(cfg) {
  cfg_.validate();
  if (n_visible < 1 || n_visible > kMaxSites) throw DimensionError("n_visible must be in [1, 64]");
  const auto n_rungs = cfg_.temperatures.size();
  rngs_.reserve(static_cast<std::size_t>(cfg_.n_chains));
  replicas_.resize(static_cast<std::size_t>(cfg_.n_chains));
  for (int c = 0; c < cfg_.n_chains; ++c) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg_.seed), static_cast<std::uint32_t>(cfg_.seed >> 32),
                      static_cast<std::uint32_t>(c)};
    auto& rng = rngs_.emplace_back(seq);
    auto& chain = replicas_[static_cast<std::size_t>(c)];
    chain.assign(n_rungs, std::vector<std::int8_t>(static_cast<std::size_t>(n_visible)));
    for (auto& rep : chain) {
      for (auto& s : rep) s = (rng() & 1) ? 1 : -1;
    }
  }
}

void ParallelTempering::run(const RbmParameters& params, int n_sweeps) {
  const RbmParameters p = to_spin(params);
  if (p.n_visible() != n_visible_) throw DimensionError("sampler and machine disagree on n_visible");
  const int n = n_visible_;
  const int nh = p.n_hidden();
  const auto n_rungs = cfg_.temperatures.size();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> h(static_cast<std::size_t>(nh));
  std::vector<double> log_w(n_rungs);

  for (std::size_t c = 0; c < replicas_.size(); ++c) {
    auto& rng = rngs_[c];
    auto& chain = replicas_[c];
    for (int sweep = 0; sweep < n_sweeps; ++sweep) {
      for (std::size_t r = 0; r < n_rungs; ++r) {
        const double beta = 1.0 / cfg_.temperatures[r];
        auto& s = chain[r];
        for (int a = 0; a < nh; ++a) {
          double x = p.hidden_biases(a);
          for (int i = 0; i < n; ++i) x += p.weights(i, a) * s[static_cast<std::size_t>(i)];
          h[static_cast<std::size_t>(a)] = unif(rng) < sigmoid(2.0 * beta * x) ? 1.0 : -1.0;
        }
        for (int i = 0; i < n; ++i) {
          double f = p.visible_fields(i);
          for (int a = 0; a < nh; ++a) f += p.weights(i, a) * h[static_cast<std::size_t>(a)];
          s[static_cast<std::size_t>(i)] = unif(rng) < sigmoid(2.0 * beta * f) ? 1 : -1;
        }
      }
      for (std::size_t r = 0; r + 1 < n_rungs; ++r) {
        const double bk = 1.0 / cfg_.temperatures[r];
        const double bl = 1.0 / cfg_.temperatures[r + 1];
        const auto& x = chain[r];
        const auto& y = chain[r + 1];
        const double log_ratio = tempered_log_weight(p, y, bk) + tempered_log_weight(p, x, bl) -
                                 tempered_log_weight(p, x, bk) - tempered_log_weight(p, y, bl);
        ++swaps_tried_;
        if (log_ratio >= 0.0 || unif(rng) < std::exp(log_ratio)) {
          std::swap(chain[r], chain[r + 1]);
          ++swaps_accepted_;
        }
      }
    }
  }
}

std::vector<Mask> ParallelTempering::samples() const {
  std::vector<Mask> out;
  out.reserve(replicas_.size());
  for (const auto& chain : replicas_) {
    Mask code = 0;
    const auto& s = chain.back();
    for (int i = 0; i < n_visible_; ++i) {
      if (s[static_cast<std::size_t>(i)] > 0) code |= Mask{1} << i;
    }
    out.push_back(code);
  }
  return out;
}

double ParallelTempering::swap_acceptance() const {
  return swaps_tried_ == 0 ? 0.0 : static_cast<double>(swaps_accepted_) / static_cast<double>(swaps_tried_);
}

void ParallelTempering::save(std::ostream& out) const {
  out << "pt1 " << n_visible_ << ' ' << cfg_.n_chains << ' ' << cfg_.n_sweeps << ' ' << cfg_.seed << ' '
      << cfg_.temperatures.size();
  out.precision(17);
  for (double t : cfg_.temperatures) out << ' ' << t;
  out << ' ' << swaps_tried_ << ' ' << swaps_accepted_ << '\n';
  for (std::size_t c = 0; c < replicas_.size(); ++c) {
    out << rngs_[c] << '\n';
    for (const auto& rep : replicas_[c]) {
      for (auto s : rep) out << (s > 0 ? '+' : '-');
      out << '\n';
    }
  }
}

ParallelTempering ParallelTempering::load(std::istream& in) {
  std::string tag;
  int n_visible = 0;
  SamplerConfig cfg;
  std::size_t n_rungs = 0;
  in >> tag >> n_visible >> cfg.n_chains >> cfg.n_sweeps >> cfg.seed >> n_rungs;
  if (!in || tag != "pt1" || n_rungs == 0 || n_rungs > 4096) throw ConfigError("unreadable sampler state");
  cfg.temperatures.resize(n_rungs);
  for (double& t : cfg.temperatures) in >> t;
  long tried = 0;
  long accepted = 0;
  in >> tried >> accepted;
  ParallelTempering pt(n_visible, cfg);
  pt.swaps_tried_ = tried;
  pt.swaps_accepted_ = accepted;
  for (std::size_t c = 0; c < pt.replicas_.size(); ++c) {
    in >> pt.rngs_[c];
    for (auto& rep : pt.replicas_[c]) {
      std::string line;
      in >> line;
      if (line.size() != rep.size()) throw ConfigError("sampler state replica has the wrong length");
      for (std::size_t i = 0; i < rep.size(); ++i) rep[i] = line[i] == '+' ? 1 : -1;
    }
  }
  if (!in) throw ConfigError("truncated sampler state");
  return pt;
}

std::vector<Mask> sample_model(const RbmParameters& p, const SamplerConfig& cfg) {
  ParallelTempering pt(p.n_visible(), cfg);
  pt.run(p, cfg.n_sweeps);
  return pt.samples();
}

SampledGradient nll_gradient_sampled(const RbmParameters& params, const Distribution& batch, const SamplerConfig& cfg) {
  if (batch.n_sites() != params.n_visible()) throw DimensionError("batch and machine disagree on n_visible");
  const RbmParameters p = to_spin(params);
  const Eigen::Index dim = p.n_params();

  Eigen::VectorXd positive = Eigen::VectorXd::Zero(dim);
  if (batch.is_table()) {
    const auto probs = batch.table().probabilities();
    for (std::size_t c = 0; c < probs.size(); ++c) {
      if (probs[c] > 0.0) positive += probs[c] * energy_gradient_at(p, static_cast<Mask>(c));
    }
  } else {
    const auto codes = batch.samples().codes();
    if (codes.empty()) throw DomainError("empty batch");
    for (Mask c : codes) positive += energy_gradient_at(p, c);
    positive /= static_cast<double>(codes.size());
  }

  const auto codes = sample_model(p, cfg);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(dim);
  for (std::size_t k = 0; k < codes.size(); ++k) {
    const Eigen::VectorXd g = energy_gradient_at(p, codes[k]);
    const Eigen::VectorXd d = g - mean;
    mean += d / static_cast<double>(k + 1);
    m2 += d.cwiseProduct(g - mean);
  }
  const double m = static_cast<double>(codes.size());
  Eigen::VectorXd se = m > 1 ? Eigen::VectorXd((m2 / (m - 1.0) / m).cwiseSqrt()) : Eigen::VectorXd::Zero(dim);

  SampledGradient out{mean - positive, se};
  if (params.convention == Convention::binary) {
    const Eigen::MatrixXd at = spin_from_binary_map(p.n_visible(), p.n_hidden()).transpose();
    out.gradient = at * out.gradient;
    // Independent-coordinate approximation for the mapped standard errors.
    out.std_error = (at.cwiseAbs2() * se.cwiseAbs2()).cwiseSqrt();
  }
  return out;
}

}  // namespace ebm
