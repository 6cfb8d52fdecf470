#include "ebm/rbm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "ebm/error.hpp"
#include "ebm/kernels.hpp"

namespace ebm {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Largest derivative table (configurations x parameters) we agree to build.
constexpr std::size_t kJacobianCellLimit = std::size_t{1} << 27;

double log_cosh1(double x) {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

void require_spin_sized(const RbmParameters& p, int n_sites, const char* what) {
  if (n_sites != p.n_visible()) {
    throw DimensionError(std::string(what) + ": configuration has " + std::to_string(n_sites) +
                         " sites, machine has " + std::to_string(p.n_visible()));
  }
}

// Spin design matrix: S(c, i) = s_i of configuration c.
Eigen::MatrixXd spin_design(int n_sites) {
  const Eigen::Index n_conf = Eigen::Index{1} << n_sites;
  Eigen::MatrixXd s(n_conf, n_sites);
  for (int i = 0; i < n_sites; ++i) {
    for (Eigen::Index c = 0; c < n_conf; ++c) s(c, i) = ((c >> i) & 1) ? 1.0 : -1.0;
  }
  return s;
}

}  // namespace

RbmParameters RbmParameters::zeros(int n_visible, int n_hidden, Convention convention) {
  if (n_visible < 1 || n_visible > kMaxSites) throw DimensionError("n_visible must be in [1, 64]");
  if (n_hidden < 0) throw DimensionError("n_hidden must be nonnegative");
  RbmParameters p;
  p.convention = convention;
  p.weights = Eigen::MatrixXd::Zero(n_visible, n_hidden);
  p.hidden_biases = Eigen::VectorXd::Zero(n_hidden);
  p.visible_fields = Eigen::VectorXd::Zero(n_visible);
  return p;
}

RbmParameters RbmParameters::from_flat(Convention convention, int n_visible, int n_hidden,
                                       const Eigen::VectorXd& theta) {
  RbmParameters p = zeros(n_visible, n_hidden, convention);
  if (theta.size() != p.n_params()) {
    throw DimensionError("flat parameter vector has length " + std::to_string(theta.size()) + ", expected " +
                         std::to_string(p.n_params()));
  }
  for (int i = 0; i < n_visible; ++i) {
    for (int a = 0; a < n_hidden; ++a) p.weights(i, a) = theta(p.weight_index(i, a));
  }
  for (int a = 0; a < n_hidden; ++a) p.hidden_biases(a) = theta(p.hidden_bias_index(a));
  for (int i = 0; i < n_visible; ++i) p.visible_fields(i) = theta(p.visible_field_index(i));
  return p;
}

Eigen::VectorXd RbmParameters::flatten() const {
  Eigen::VectorXd theta(n_params());
  for (int i = 0; i < n_visible(); ++i) {
    for (int a = 0; a < n_hidden(); ++a) theta(weight_index(i, a)) = weights(i, a);
  }
  for (int a = 0; a < n_hidden(); ++a) theta(hidden_bias_index(a)) = hidden_biases(a);
  for (int i = 0; i < n_visible(); ++i) theta(visible_field_index(i)) = visible_fields(i);
  return theta;
}

void RbmParameters::validate() const {
  if (weights.rows() < 1 || weights.rows() > kMaxSites) throw DimensionError("n_visible must be in [1, 64]");
  if (hidden_biases.size() != weights.cols()) throw DimensionError("hidden bias length differs from n_hidden");
  if (visible_fields.size() != weights.rows()) throw DimensionError("visible field length differs from n_visible");
  if (!weights.allFinite() || !hidden_biases.allFinite() || !visible_fields.allFinite()) {
    throw NumericError("RBM parameters contain non-finite values");
  }
}

RbmParameters to_spin(const RbmParameters& p) {
  p.validate();
  if (p.convention == Convention::spin) return p;
  RbmParameters s = RbmParameters::zeros(p.n_visible(), p.n_hidden(), Convention::spin);
  s.weights = p.weights / 4.0;
  s.hidden_biases = p.hidden_biases / 2.0 + p.weights.colwise().sum().transpose() / 4.0;
  s.visible_fields = p.visible_fields / 2.0 + p.weights.rowwise().sum() / 4.0;
  return s;
}

RbmParameters to_binary(const RbmParameters& p) {
  p.validate();
  if (p.convention == Convention::binary) return p;
  RbmParameters b = RbmParameters::zeros(p.n_visible(), p.n_hidden(), Convention::binary);
  b.weights = 4.0 * p.weights;
  b.hidden_biases = 2.0 * p.hidden_biases - 2.0 * p.weights.colwise().sum().transpose();
  b.visible_fields = 2.0 * p.visible_fields - 2.0 * p.weights.rowwise().sum();
  return b;
}

Eigen::MatrixXd spin_from_binary_map(int n_visible, int n_hidden) {
  const RbmParameters shape = RbmParameters::zeros(n_visible, n_hidden);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(shape.n_params(), shape.n_params());
  for (int i = 0; i < n_visible; ++i) {
    for (int h = 0; h < n_hidden; ++h) {
      const auto w = shape.weight_index(i, h);
      a(w, w) = 0.25;
      a(shape.hidden_bias_index(h), w) = 0.25;
      a(shape.visible_field_index(i), w) = 0.25;
    }
  }
  for (int h = 0; h < n_hidden; ++h) a(shape.hidden_bias_index(h), shape.hidden_bias_index(h)) = 0.5;
  for (int i = 0; i < n_visible; ++i) a(shape.visible_field_index(i), shape.visible_field_index(i)) = 0.5;
  return a;
}

double energy_spin(const RbmParameters& params, const SpinConfiguration& s) {
  const RbmParameters p = to_spin(params);
  require_spin_sized(p, s.n_sites(), "energy_spin");
  double e = 0.0;
  for (int a = 0; a < p.n_hidden(); ++a) {
    double x = p.hidden_biases(a);
    for (int i = 0; i < p.n_visible(); ++i) x += p.weights(i, a) * s[i];
    e += log_cosh1(x);
  }
  for (int i = 0; i < p.n_visible(); ++i) e += p.visible_fields(i) * s[i];
  return e;
}

double marginal_energy_01(const RbmParameters& params, std::span<const int> v) {
  const RbmParameters p = to_binary(params);
  require_spin_sized(p, static_cast<int>(v.size()), "marginal_energy_01");
  double h = 0.0;
  for (int i = 0; i < p.n_visible(); ++i) {
    if (v[static_cast<std::size_t>(i)] != 0 && v[static_cast<std::size_t>(i)] != 1) {
      throw DomainError("binary configuration entries must be 0 or 1");
    }
    h -= p.visible_fields(i) * v[static_cast<std::size_t>(i)];
  }
  for (int a = 0; a < p.n_hidden(); ++a) {
    double x = p.hidden_biases(a);
    for (int i = 0; i < p.n_visible(); ++i) x += p.weights(i, a) * v[static_cast<std::size_t>(i)];
    h -= softplus(x);
  }
  return h;
}

double hamiltonian(const RbmParameters& p, const SpinConfiguration& s) {
  if (p.convention == Convention::spin) return -energy_spin(p, s);
  const auto v = s.to_binary();
  return marginal_energy_01(p, v);
}

RbmEnumeration enumerate_rbm(const RbmParameters& params, bool with_tanh) {
  RbmEnumeration e;
  enumerate_rbm(params, with_tanh, e);
  return e;
}

void enumerate_rbm(const RbmParameters& params, bool with_tanh, RbmEnumeration& e) {
  const RbmParameters p = to_spin(params);
  const int n = p.n_visible();
  const int nh = p.n_hidden();
  require_enumerable(n, "RBM enumeration");
  const std::size_t n_conf = std::size_t{1} << n;
  const auto hsz = static_cast<std::size_t>(nh);

  // Every entry is overwritten below, so resizing is enough.
  e.n_visible = n;
  e.n_hidden = nh;
  e.preactivation.resize(n_conf * hsz);
  e.log_cosh.resize(n_conf * hsz);
  if (with_tanh) {
    e.tanh.resize(n_conf * hsz);
  } else {
    e.tanh.clear();
  }
  e.log_weight.resize(n_conf);

  if (nh > 0) {
    const RowMajor w = p.weights;
    double* pre = e.preactivation.data();
    for (int a = 0; a < nh; ++a) pre[a] = p.hidden_biases(a) - w.col(a).sum();
    // Raising the lowest set bit of c from -1 to +1 adds twice that row.
    for (std::size_t c = 1; c < n_conf; ++c) {
      const int low = std::countr_zero(c);
      const std::size_t parent = c & (c - 1);
      kernels::add_scaled({pre + c * hsz, hsz}, {pre + parent * hsz, hsz}, {w.data() + low * hsz, hsz}, 2.0);
    }
    if (with_tanh) {
      kernels::log_cosh_tanh(e.preactivation, e.log_cosh, e.tanh);
    } else {
      kernels::log_cosh(e.preactivation, e.log_cosh);
    }
  }

  for (std::size_t c = 0; c < n_conf; ++c) {
    double acc = 0.0;
    for (std::size_t a = 0; a < hsz; ++a) acc += e.log_cosh[c * hsz + a];
    for (int i = 0; i < n; ++i) acc += ((c >> i) & 1) ? p.visible_fields(i) : -p.visible_fields(i);
    e.log_weight[c] = acc;
  }
}

Eigen::VectorXd weighted_energy_gradient(const RbmEnumeration& e, std::span<const double> q) {
  const int n = e.n_visible;
  const int nh = e.n_hidden;
  const Eigen::Index n_conf = Eigen::Index{1} << n;
  if (static_cast<Eigen::Index>(q.size()) != n_conf) throw DimensionError("weight vector length differs from 2^N");
  if (nh > 0 && e.tanh.empty()) throw DomainError("enumeration was built without tanh tables");

  const RbmParameters shape = RbmParameters::zeros(n, nh);
  Eigen::VectorXd g(shape.n_params());
  const Eigen::Map<const Eigen::VectorXd> qv(q.data(), n_conf);
  const Eigen::MatrixXd s = spin_design(n);

  if (nh > 0) {
    const Eigen::Map<const RowMajor> th(e.tanh.data(), n_conf, nh);
    // Weight the narrow design matrix rather than the tanh table.
    const Eigen::MatrixXd weighted = s.array().colwise() * qv.array();
    const Eigen::MatrixXd gw = weighted.transpose() * th;  // n x nh
    const Eigen::VectorXd gz = th.transpose() * qv;
    for (int i = 0; i < n; ++i) {
      for (int a = 0; a < nh; ++a) g(shape.weight_index(i, a)) = gw(i, a);
    }
    for (int a = 0; a < nh; ++a) g(shape.hidden_bias_index(a)) = gz(a);
  }
  const Eigen::VectorXd ge = s.transpose() * qv;
  for (int i = 0; i < n; ++i) g(shape.visible_field_index(i)) = ge(i);
  return g;
}

Eigen::MatrixXd weighted_energy_hessian(const RbmEnumeration& e, std::span<const double> q) {
  const int n = e.n_visible;
  const int nh = e.n_hidden;
  const Eigen::Index n_conf = Eigen::Index{1} << n;
  if (static_cast<Eigen::Index>(q.size()) != n_conf) throw DimensionError("weight vector length differs from 2^N");
  const RbmParameters shape = RbmParameters::zeros(n, nh);
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(shape.n_params(), shape.n_params());
  if (nh == 0) return hess;
  if (e.tanh.empty()) throw DomainError("enumeration was built without tanh tables");

  // Within hidden unit a: d2E = sech^2(x_a) f f^T with f = (s_1..s_n, 1).
  Eigen::MatrixXd f(n_conf, n + 1);
  f.leftCols(n) = spin_design(n);
  f.col(n).setOnes();
  const Eigen::Map<const Eigen::VectorXd> qv(q.data(), n_conf);
  const Eigen::Map<const RowMajor> th(e.tanh.data(), n_conf, nh);
  for (int a = 0; a < nh; ++a) {
    const Eigen::VectorXd weight = qv.array() * (1.0 - th.col(a).array().square());
    const Eigen::MatrixXd block = f.transpose() * weight.asDiagonal() * f;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n + 1));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = shape.weight_index(i, a);
    idx[static_cast<std::size_t>(n)] = shape.hidden_bias_index(a);
    for (int u = 0; u <= n; ++u) {
      for (int v = 0; v <= n; ++v) hess(idx[static_cast<std::size_t>(u)], idx[static_cast<std::size_t>(v)]) = block(u, v);
    }
  }
  return hess;
}

Eigen::MatrixXd energy_gradient_table(const RbmEnumeration& e) {
  const int n = e.n_visible;
  const int nh = e.n_hidden;
  const Eigen::Index n_conf = Eigen::Index{1} << n;
  const RbmParameters shape = RbmParameters::zeros(n, nh);
  const Eigen::Index n_params = shape.n_params();
  if (static_cast<std::size_t>(n_conf) * static_cast<std::size_t>(n_params) > kJacobianCellLimit) {
    throw LimitError("derivative table of " + std::to_string(n_conf) + " x " + std::to_string(n_params) +
                     " exceeds the memory limit");
  }
  if (nh > 0 && e.tanh.empty()) throw DomainError("enumeration was built without tanh tables");
  const Eigen::MatrixXd s = spin_design(n);
  Eigen::MatrixXd d(n_conf, n_params);
  if (nh > 0) {
    const Eigen::Map<const RowMajor> th(e.tanh.data(), n_conf, nh);
    for (int i = 0; i < n; ++i) {
      for (int a = 0; a < nh; ++a) d.col(shape.weight_index(i, a)) = s.col(i).cwiseProduct(th.col(a));
    }
    for (int a = 0; a < nh; ++a) d.col(shape.hidden_bias_index(a)) = th.col(a);
  }
  for (int i = 0; i < n; ++i) d.col(shape.visible_field_index(i)) = s.col(i);
  return d;
}

ProbabilityTable model_distribution(const RbmParameters& p) {
  const auto e = enumerate_rbm(p, false);
  return ProbabilityTable::from_log_weights(e.n_visible, e.log_weight);
}

namespace {

double log_sum_exp(std::span<const double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

}  // namespace

double log_partition(const RbmParameters& p) {
  const auto e = enumerate_rbm(p, false);
  return log_sum_exp(e.log_weight);
}

double neg_log_likelihood(const RbmParameters& p, const Distribution& data) {
  require_spin_sized(p, data.n_sites(), "neg_log_likelihood");
  const auto e = enumerate_rbm(p, false);
  double mean_energy = 0.0;
  if (data.is_table()) {
    const auto probs = data.table().probabilities();
    for (std::size_t c = 0; c < probs.size(); ++c) {
      if (probs[c] > 0.0) mean_energy += probs[c] * e.log_weight[c];
    }
  } else {
    const auto codes = data.samples().codes();
    if (codes.empty()) throw DomainError("empty sample set");
    for (Mask c : codes) mean_energy += e.log_weight[static_cast<std::size_t>(c)];
    mean_energy /= static_cast<double>(codes.size());
  }
  return log_sum_exp(e.log_weight) - mean_energy;
}

Eigen::VectorXd nll_gradient_exact(const RbmParameters& p, const Distribution& data) {
  require_spin_sized(p, data.n_sites(), "nll_gradient_exact");
  const auto e = enumerate_rbm(p, true);
  const auto model = ProbabilityTable::from_log_weights(e.n_visible, e.log_weight);
  const auto target = data.to_table();
  std::vector<double> q(model.probabilities().begin(), model.probabilities().end());
  const auto pd = target.probabilities();
  for (std::size_t c = 0; c < q.size(); ++c) q[c] -= pd[c];
  Eigen::VectorXd g = weighted_energy_gradient(e, q);
  if (p.convention == Convention::binary) g = spin_from_binary_map(p.n_visible(), p.n_hidden()).transpose() * g;
  return g;
}

Eigen::MatrixXd nll_hessian_exact(const RbmParameters& p, const Distribution& data) {
  require_spin_sized(p, data.n_sites(), "nll_hessian_exact");
  const auto e = enumerate_rbm(p, true);
  const auto model = ProbabilityTable::from_log_weights(e.n_visible, e.log_weight);
  const auto target = data.to_table();
  const auto pm = model.probabilities();
  std::vector<double> q(pm.begin(), pm.end());
  const auto pd = target.probabilities();
  for (std::size_t c = 0; c < q.size(); ++c) q[c] -= pd[c];

  const Eigen::MatrixXd g = energy_gradient_table(e);
  const Eigen::Map<const Eigen::VectorXd> pmv(pm.data(), static_cast<Eigen::Index>(pm.size()));
  const Eigen::VectorXd mean = g.transpose() * pmv;
  Eigen::MatrixXd hess = g.transpose() * pmv.asDiagonal() * g - mean * mean.transpose();
  hess += weighted_energy_hessian(e, q);
  if (p.convention == Convention::binary) {
    const Eigen::MatrixXd a = spin_from_binary_map(p.n_visible(), p.n_hidden());
    hess = a.transpose() * hess * a;
  }
  return hess;
}

EffectiveCouplings extract_couplings_exact(const RbmParameters& p) {
  const auto e = enumerate_rbm(p, false);
  // H = -E, so phi = -Hhat = Ehat on nonempty subsets.
  const FourierSpectrum spec = fast_transform(e.log_weight);
  std::vector<double> phi(spec.values().begin(), spec.values().end());
  phi[0] = 0.0;
  return EffectiveCouplings(e.n_visible, std::move(phi));
}

CouplingEstimate extract_coupling_formula(const RbmParameters& params, SubsetIndex subset, FormulaMode mode) {
  const RbmParameters p = to_spin(params);
  const int n_sites = p.n_visible();
  const int nh = p.n_hidden();
  if (subset.empty()) throw DomainError("couplings are defined on nonempty subsets only");
  if (!subset.fits(n_sites)) throw DimensionError("subset reaches beyond the visible layer");

  const std::vector<int> inside = subset.sites();
  std::vector<int> outside;
  for (int i = 0; i < n_sites; ++i) {
    if (!subset.contains(i)) outside.push_back(i);
  }
  const int n = static_cast<int>(inside.size());
  if (n > 24) throw LimitError("coupling formula enumerates 2^|I| inner patterns; |I| too large");

  const std::size_t n_inner = std::size_t{1} << n;
  const auto hsz = static_cast<std::size_t>(nh);
  // Inner patterns: contribution of the subset spins and the parity sign.
  std::vector<double> base(n_inner * hsz, 0.0);
  std::vector<double> sign(n_inner, 1.0);
  for (std::size_t k = 0; k < n_inner; ++k) {
    for (int mu = 0; mu < n; ++mu) {
      const double s = ((k >> mu) & 1) ? 1.0 : -1.0;
      if (s < 0) sign[k] = -sign[k];
      for (int a = 0; a < nh; ++a) base[k * hsz + static_cast<std::size_t>(a)] += p.weights(inside[mu], a) * s;
    }
  }

  std::vector<double> args(n_inner * hsz);
  std::vector<double> lc(n_inner * hsz);
  // Signed inner sum for a given outside field X (biases included).
  auto inner = [&](const std::vector<double>& x) {
    for (std::size_t k = 0; k < n_inner; ++k) {
      for (std::size_t a = 0; a < hsz; ++a) args[k * hsz + a] = base[k * hsz + a] + x[a];
    }
    kernels::log_cosh(args, lc);
    double acc = 0.0;
    for (std::size_t k = 0; k < n_inner; ++k) {
      double row = 0.0;
      for (std::size_t a = 0; a < hsz; ++a) row += lc[k * hsz + a];
      acc += sign[k] * row;
    }
    return acc / static_cast<double>(n_inner);
  };

  const double field = n == 1 ? p.visible_fields(inside[0]) : 0.0;
  std::vector<double> x(hsz);
  const int m = static_cast<int>(outside.size());

  if (mode.kind == FormulaMode::Kind::exact) {
    require_enumerable(m, "exact coupling formula");
    for (int a = 0; a < nh; ++a) {
      double v = p.hidden_biases(a);
      for (int j : outside) v -= p.weights(j, a);
      x[static_cast<std::size_t>(a)] = v;
    }
    std::vector<std::int8_t> state(static_cast<std::size_t>(m), -1);
    double acc = inner(x);
    const std::size_t n_outer = std::size_t{1} << m;
    // Gray-code walk: one outside spin flips per step.
    for (std::size_t g = 1; g < n_outer; ++g) {
      const int bit = std::countr_zero(g);
      auto& s = state[static_cast<std::size_t>(bit)];
      const double delta = s < 0 ? 2.0 : -2.0;
      s = static_cast<std::int8_t>(-s);
      for (int a = 0; a < nh; ++a) x[static_cast<std::size_t>(a)] += delta * p.weights(outside[bit], a);
      acc += inner(x);
    }
    return {acc / static_cast<double>(n_outer) + field, 0.0};
  }

  if (mode.n_samples < 2) throw DomainError("monte_carlo coupling estimate needs at least two samples");
  std::mt19937_64 rng(mode.seed);
  double mean = 0.0;
  double m2 = 0.0;
  for (long t = 0; t < mode.n_samples; ++t) {
    for (int a = 0; a < nh; ++a) x[static_cast<std::size_t>(a)] = p.hidden_biases(a);
    std::uint64_t bits = 0;
    for (int k = 0; k < m; ++k) {
      if (k % 64 == 0) bits = rng();
      const double s = (bits >> (k % 64)) & 1 ? 1.0 : -1.0;
      for (int a = 0; a < nh; ++a) x[static_cast<std::size_t>(a)] += s * p.weights(outside[k], a);
    }
    const double y = inner(x);
    const double d = y - mean;
    mean += d / static_cast<double>(t + 1);
    m2 += d * (y - mean);
  }
  const double var = m2 / static_cast<double>(mode.n_samples - 1);
  return {mean + field, std::sqrt(var / static_cast<double>(mode.n_samples))};
}

std::vector<std::pair<Mask, CouplingEstimate>> estimate_couplings_formula(const RbmParameters& p, int max_order,
                                                                         FormulaMode mode) {
  const int n = p.n_visible();
  if (max_order < 1 || max_order > n) throw DomainError("max_order must be in [1, N]");
  const auto subsets = subsets_up_to(n, max_order);
  std::vector<std::pair<Mask, CouplingEstimate>> out;
  out.reserve(subsets.size());
  for (std::size_t k = 0; k < subsets.size(); ++k) {
    FormulaMode sub = mode;
    if (mode.kind == FormulaMode::Kind::monte_carlo) {
      std::seed_seq seq{static_cast<std::uint32_t>(mode.seed), static_cast<std::uint32_t>(mode.seed >> 32),
                        static_cast<std::uint32_t>(k)};
      std::uint32_t words[2];
      seq.generate(words, words + 2);
      sub.seed = (std::uint64_t{words[0]} << 32) | words[1];
    }
    out.emplace_back(subsets[k], extract_coupling_formula(p, SubsetIndex(subsets[k]), sub));
  }
  return out;
}

EffectiveCouplings extract_couplings_formula(const RbmParameters& p, int max_order, FormulaMode mode) {
  std::vector<SubsetVector::Entry> entries;
  for (const auto& [m, est] : estimate_couplings_formula(p, max_order, mode)) entries.emplace_back(m, est.value);
  return EffectiveCouplings(p.n_visible(), max_order, std::move(entries));
}

namespace {

// Column k holds the transform of dE/dtheta_k (spin layout), row = mask,
// already scaled so that entries are Fourier coefficients.
Eigen::MatrixXd derivative_spectra_matrix(const RbmParameters& spin) {
  const auto e = enumerate_rbm(spin, true);
  Eigen::MatrixXd d = energy_gradient_table(e);
  const Eigen::Index n_conf = d.rows();
  const Eigen::Index n_params = d.cols();
  for (Eigen::Index k = 0; k < n_params; ++k) {
    kernels::fwht({d.col(k).data(), static_cast<std::size_t>(n_conf)});
  }
  const double scale = 1.0 / static_cast<double>(n_conf);
  for (Eigen::Index m = 0; m < n_conf; ++m) {
    d.row(m) *= (std::popcount(static_cast<Mask>(m)) & 1) ? -scale : scale;
  }
  return d;
}

}  // namespace

Jacobian jacobian_phi_theta(const RbmParameters& p, int max_order) {
  const int n = p.n_visible();
  if (max_order < 0 || max_order > n) max_order = n;
  if (max_order == 0) throw DomainError("Jacobian needs max_order >= 1");
  const Eigen::MatrixXd d = derivative_spectra_matrix(to_spin(p));

  Jacobian jac;
  jac.subsets = subsets_up_to(n, max_order);
  jac.matrix.resize(static_cast<Eigen::Index>(jac.subsets.size()), d.cols());
  for (std::size_t r = 0; r < jac.subsets.size(); ++r) {
    jac.matrix.row(static_cast<Eigen::Index>(r)) = d.row(static_cast<Eigen::Index>(jac.subsets[r]));
  }
  if (p.convention == Convention::binary) jac.matrix = jac.matrix * spin_from_binary_map(n, p.n_hidden());
  return jac;
}

std::vector<FourierSpectrum> energy_derivative_spectra(const RbmParameters& p) {
  const Eigen::MatrixXd d = derivative_spectra_matrix(to_spin(p));
  std::vector<FourierSpectrum> out;
  out.reserve(static_cast<std::size_t>(d.cols()));
  for (Eigen::Index k = 0; k < d.cols(); ++k) {
    out.emplace_back(p.n_visible(), std::vector<double>(d.col(k).data(), d.col(k).data() + d.rows()));
  }
  return out;
}

RbmParameters spurious_point(const Distribution& data, int n_hidden) {
  const int n = data.n_sites();
  const MomentVector m = moments(data, 1);
  RbmParameters p = RbmParameters::zeros(n, n_hidden);
  for (int i = 0; i < n; ++i) {
    const double mi = m[Mask{1} << i];
    if (std::abs(mi) >= 1.0) {
      throw DomainError("site " + std::to_string(i) + " has saturated magnetisation; arctanh diverges");
    }
    p.visible_fields(i) = std::atanh(mi);
  }
  return p;
}

RbmParameters init(const RbmInitConfig& cfg) {
  if (!(cfg.weight_variance >= 0.0) || !std::isfinite(cfg.weight_variance)) {
    throw DomainError("weight_variance must be finite and nonnegative");
  }
  RbmParameters p = RbmParameters::zeros(cfg.n_visible, cfg.n_hidden, cfg.convention);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(cfg.weight_variance));
  for (int i = 0; i < cfg.n_visible; ++i) {
    for (int a = 0; a < cfg.n_hidden; ++a) p.weights(i, a) = normal(rng);
  }
  return p;
}

}  // namespace ebm
