#include "ebm/ridge.hpp"

#include <cmath>
#include <random>

#include "ebm/error.hpp"

namespace ebm {

namespace {

Mask random_code(std::mt19937_64& rng, int n_sites) { return rng() & full_mask(n_sites); }

double sample_variance(std::span<const double> x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(x.size() - 1);
}

double hobm_energy(const HigherOrderModel& model, Mask code) {
  return evaluate_expansion(model.couplings(), code);  // E = -H = sum phi chi
}

void require_dense_table(int n_sites, const char* what) { require_enumerable(n_sites, what); }

// Explicit Cov_model(chi_I, chi_J) over nonempty subsets by summing
// products per configuration (independent of the m[I ^ J] shortcut).
Eigen::MatrixXd explicit_parity_covariance(const ProbabilityTable& table) {
  const int n = table.n_sites();
  const Eigen::Index n_conf = Eigen::Index{1} << n;
  Eigen::MatrixXd chi(n_conf, n_conf - 1);
  for (Eigen::Index c = 0; c < n_conf; ++c) {
    for (Eigen::Index m = 1; m < n_conf; ++m) chi(c, m - 1) = parity_sign(static_cast<Mask>(c), static_cast<Mask>(m));
  }
  const Eigen::Map<const Eigen::VectorXd> p(table.probabilities().data(), n_conf);
  const Eigen::VectorXd mean = chi.transpose() * p;
  return chi.transpose() * p.asDiagonal() * chi - mean * mean.transpose();
}

void fill_eigen_summary(RidgeHessianReport& r, const Eigen::MatrixXd& jac, const Eigen::MatrixXd& inner) {
  r.max_abs_difference = (r.direct - r.sandwich).cwiseAbs().maxCoeff();
  const Eigen::MatrixXd sym = 0.5 * (r.direct + r.direct.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  r.min_eigenvalue = es.eigenvalues().minCoeff();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
  const auto sv = svd.singularValues();
  const double cut = 1e-10 * std::max(1.0, sv.size() > 0 ? sv(0) : 0.0);
  r.jacobian_rank = static_cast<int>((sv.array() > cut).count());
  r.n_subsets = static_cast<int>(jac.rows());

  // Nonzero spectrum of J^T C J equals that of C^1/2 J J^T C^1/2.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ec(inner);
  const Eigen::MatrixXd root =
      ec.eigenvectors() * ec.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * ec.eigenvectors().transpose();
  const Eigen::MatrixXd k = root * jac * jac.transpose() * root;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ek(0.5 * (k + k.transpose()), Eigen::EigenvaluesOnly);
  const auto ev = ek.eigenvalues();  // ascending
  r.min_row_space_eigenvalue = r.jacobian_rank > 0 ? ev(ev.size() - r.jacobian_rank) : 0.0;
}

}  // namespace

void RidgeConfig::validate() const {
  if (!std::isfinite(lambda) || lambda < 0.0) throw ConfigError("ridge lambda must be finite and nonnegative");
  if (estimator == Estimator::stochastic && n_samples < 2) {
    throw ConfigError("stochastic ridge estimator needs n_samples >= 2");
  }
}

double penalty(const HigherOrderModel& model, const RidgeConfig& cfg) {
  cfg.validate();
  if (cfg.estimator == RidgeConfig::Estimator::exact || cfg.space == RidgeConfig::Space::parameter) {
    double acc = 0.0;
    model.couplings().for_each([&](Mask m, double v) {
      if (m != 0) acc += v * v;
    });
    return acc;
  }
  std::mt19937_64 rng(cfg.seed);
  std::vector<double> e(static_cast<std::size_t>(cfg.n_samples));
  for (double& v : e) v = hobm_energy(model, random_code(rng, model.n_sites()));
  return sample_variance(e);
}

double penalty(const RbmParameters& p, const RidgeConfig& cfg) {
  cfg.validate();
  if (cfg.space == RidgeConfig::Space::parameter) return p.flatten().squaredNorm();
  if (cfg.estimator == RidgeConfig::Estimator::exact) {
    const auto e = enumerate_rbm(p, false);
    const Eigen::Map<const Eigen::VectorXd> w(e.log_weight.data(), static_cast<Eigen::Index>(e.log_weight.size()));
    return (w.array() - w.mean()).square().mean();
  }
  std::mt19937_64 rng(cfg.seed);
  std::vector<double> e(static_cast<std::size_t>(cfg.n_samples));
  for (double& v : e) v = energy_spin(p, SpinConfiguration::from_code(random_code(rng, p.n_visible()), p.n_visible()));
  return sample_variance(e);
}

double ridge_nll(const HigherOrderModel& model, const Distribution& data, const RidgeConfig& cfg) {
  const double base = neg_log_likelihood(model, data);
  return cfg.lambda == 0.0 ? base : base + 0.5 * cfg.lambda * penalty(model, cfg);
}

double ridge_nll(const RbmParameters& p, const Distribution& data, const RidgeConfig& cfg) {
  const double base = neg_log_likelihood(p, data);
  return cfg.lambda == 0.0 ? base : base + 0.5 * cfg.lambda * penalty(p, cfg);
}

SubsetVector ridge_gradient(const HigherOrderModel& model, const Distribution& data, const RidgeConfig& cfg) {
  cfg.validate();
  SubsetVector g = nll_gradient(model, data);
  if (cfg.lambda == 0.0) return g;
  if (cfg.estimator == RidgeConfig::Estimator::exact || cfg.space == RidgeConfig::Space::parameter) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      const Mask m = g.mask_at(k);
      if (m != 0) g.at(m) += cfg.lambda * model.couplings()[m];
    }
    return g;
  }
  // d/dphi_I of (1/2) Var[E] = Cov(E, chi_I), sampled with shared draws.
  std::mt19937_64 rng(cfg.seed);
  const auto n = static_cast<std::size_t>(cfg.n_samples);
  std::vector<Mask> codes(n);
  std::vector<double> e(n);
  double mean_e = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    codes[k] = random_code(rng, model.n_sites());
    e[k] = hobm_energy(model, codes[k]);
    mean_e += e[k];
  }
  mean_e /= static_cast<double>(n);
  for (std::size_t j = 0; j < g.size(); ++j) {
    const Mask m = g.mask_at(j);
    if (m == 0) continue;
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += (e[k] - mean_e) * parity_sign(codes[k], m);
    g.at(m) += cfg.lambda * acc / static_cast<double>(n - 1);
  }
  return g;
}

Eigen::VectorXd penalty_gradient(const RbmParameters& p, const RidgeConfig& cfg) {
  cfg.validate();
  if (cfg.space == RidgeConfig::Space::parameter) return cfg.lambda * p.flatten();
  const RbmParameters spin = to_spin(p);
  Eigen::VectorXd g;
  if (cfg.estimator == RidgeConfig::Estimator::exact) {
    const auto e = enumerate_rbm(spin, true);
    const double n_conf = static_cast<double>(e.log_weight.size());
    double mean = 0.0;
    for (double v : e.log_weight) mean += v;
    mean /= n_conf;
    std::vector<double> q(e.log_weight.size());
    for (std::size_t c = 0; c < q.size(); ++c) q[c] = (e.log_weight[c] - mean) / n_conf;
    g = weighted_energy_gradient(e, q);
  } else {
    // Unbiased covariance of E and dE/dtheta over shared uniform draws.
    std::mt19937_64 rng(cfg.seed);
    const int n = spin.n_visible();
    const auto m = static_cast<std::size_t>(cfg.n_samples);
    Eigen::VectorXd e(static_cast<Eigen::Index>(m));
    Eigen::MatrixXd d(static_cast<Eigen::Index>(m), spin.n_params());
    for (std::size_t k = 0; k < m; ++k) {
      const Mask code = random_code(rng, n);
      const auto row = static_cast<Eigen::Index>(k);
      double energy = 0.0;
      for (int a = 0; a < spin.n_hidden(); ++a) {
        double x = spin.hidden_biases(a);
        for (int i = 0; i < n; ++i) x += ((code >> i) & 1) ? spin.weights(i, a) : -spin.weights(i, a);
        const double t = std::tanh(x);
        energy += std::abs(x) + std::log1p(std::exp(-2.0 * std::abs(x))) - std::log(2.0);
        for (int i = 0; i < n; ++i) d(row, spin.weight_index(i, a)) = ((code >> i) & 1) ? t : -t;
        d(row, spin.hidden_bias_index(a)) = t;
      }
      for (int i = 0; i < n; ++i) {
        const double s = ((code >> i) & 1) ? 1.0 : -1.0;
        energy += spin.visible_fields(i) * s;
        d(row, spin.visible_field_index(i)) = s;
      }
      e(row) = energy;
    }
    const Eigen::VectorXd centred = e.array() - e.mean();
    g = d.transpose() * centred / static_cast<double>(m - 1);
  }
  if (p.convention == Convention::binary) g = spin_from_binary_map(p.n_visible(), p.n_hidden()).transpose() * g;
  return cfg.lambda * g;
}

Eigen::VectorXd ridge_gradient(const RbmParameters& p, const Distribution& data, const RidgeConfig& cfg) {
  cfg.validate();
  Eigen::VectorXd g = nll_gradient_exact(p, data);
  if (cfg.lambda == 0.0) return g;
  return g + penalty_gradient(p, cfg);
}

SubsetVector ridge_fixed_point_residual(const HigherOrderModel& model, const Distribution& data,
                                        const RidgeConfig& cfg) {
  cfg.validate();
  require_dense_table(model.n_sites(), "ridge_fixed_point_residual");
  const MomentVector md = moments(data);
  const MomentVector mm = moments(Distribution(model_distribution(model)));
  std::vector<double> r(md.size(), 0.0);
  for (std::size_t m = 1; m < r.size(); ++m) {
    r[m] = md.value_at(m) - mm.value_at(m) - cfg.lambda * model.couplings()[m];
  }
  return SubsetVector(model.n_sites(), std::move(r));
}

SubsetVector ridge_fixed_point_residual(const RbmParameters& p, const Distribution& data, const RidgeConfig& cfg) {
  cfg.validate();
  if (cfg.space == RidgeConfig::Space::parameter && cfg.lambda != 0.0) {
    throw DomainError("the modified fixed-point condition is defined for the effective-space penalty");
  }
  const EffectiveCouplings phi = extract_couplings_exact(p);
  return ridge_fixed_point_residual(HigherOrderModel(phi), data, cfg);
}

RidgeHessianReport ridge_hessian_check(const HigherOrderModel& model, const Distribution& data,
                                       const RidgeConfig& cfg) {
  cfg.validate();
  if (!model.is_dense()) throw DomainError("ridge_hessian_check needs a dense model");
  if (model.n_sites() > kHessianSiteLimit) throw LimitError("ridge_hessian_check: too many sites for a dense Hessian");
  (void)data;  // the hobm Hessian does not depend on the data
  const ProbabilityTable table = model_distribution(model);
  const Eigen::Index dim = (Eigen::Index{1} << model.n_sites()) - 1;
  const Eigen::MatrixXd lam = cfg.lambda * Eigen::MatrixXd::Identity(dim, dim);

  RidgeHessianReport r;
  r.direct = explicit_parity_covariance(table) + lam;
  r.sandwich = nll_hessian(model) + lam;
  fill_eigen_summary(r, Eigen::MatrixXd::Identity(dim, dim), r.sandwich);
  return r;
}

RidgeHessianReport ridge_hessian_check(const RbmParameters& p, const Distribution& data, const RidgeConfig& cfg) {
  cfg.validate();
  if (cfg.space == RidgeConfig::Space::parameter) throw DomainError("ridge_hessian_check covers the effective penalty");
  const int n = p.n_visible();
  if (n > kHessianSiteLimit) throw LimitError("ridge_hessian_check: too many sites for a dense Hessian");

  RidgeHessianReport r;
  r.direct = nll_hessian_exact(p, data);
  if (cfg.lambda != 0.0) {
    // Hessian of Var_uniform[E] / 2: Cov_uniform(dE) + E_uniform[(E - mean) d2E].
    const RbmParameters spin = to_spin(p);
    const auto e = enumerate_rbm(spin, true);
    const double n_conf = static_cast<double>(e.log_weight.size());
    double mean = 0.0;
    for (double v : e.log_weight) mean += v;
    mean /= n_conf;
    std::vector<double> q(e.log_weight.size());
    for (std::size_t c = 0; c < q.size(); ++c) q[c] = (e.log_weight[c] - mean) / n_conf;
    const Eigen::MatrixXd g = energy_gradient_table(e);
    const Eigen::MatrixXd centred = g.rowwise() - g.colwise().mean();
    Eigen::MatrixXd pen = centred.transpose() * centred / n_conf + weighted_energy_hessian(e, q);
    if (p.convention == Convention::binary) {
      const Eigen::MatrixXd a = spin_from_binary_map(n, p.n_hidden());
      pen = a.transpose() * pen * a;
    }
    r.direct += cfg.lambda * pen;
  }

  const Jacobian jac = jacobian_phi_theta(p);
  const HigherOrderModel effective(extract_couplings_exact(p));
  const Eigen::Index dim = static_cast<Eigen::Index>(jac.subsets.size());
  const Eigen::MatrixXd inner = nll_hessian(effective) + cfg.lambda * Eigen::MatrixXd::Identity(dim, dim);
  r.sandwich = jac.matrix.transpose() * inner * jac.matrix;
  fill_eigen_summary(r, jac.matrix, inner);
  return r;
}

}  // namespace ebm
