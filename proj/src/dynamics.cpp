#include "ebm/dynamics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "ebm/error.hpp"

namespace ebm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kKernelResidualTol = 1e-6;

double sup_abs(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

double log_sum_exp(std::span<const double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

// Dense moments <chi_I> of a probability vector over configuration codes.
std::vector<double> dense_moments(std::span<const double> probs) {
  FourierSpectrum spec = fast_transform(probs);
  std::vector<double> m(spec.values().begin(), spec.values().end());
  const double scale = static_cast<double>(m.size());
  for (double& v : m) v *= scale;
  return m;
}

Eigen::VectorXd nonempty_part(const std::vector<double>& dense) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(dense.size()) - 1);
  for (std::size_t m = 1; m < dense.size(); ++m) v(static_cast<Eigen::Index>(m) - 1) = dense[m];
  return v;
}

SubsetVector dense_from_nonempty(int n_sites, const Eigen::VectorXd& v) {
  std::vector<double> dense(static_cast<std::size_t>(v.size()) + 1, 0.0);
  for (Eigen::Index k = 0; k < v.size(); ++k) dense[static_cast<std::size_t>(k) + 1] = v(k);
  return SubsetVector(n_sites, std::move(dense));
}

Eigen::VectorXd moment_gap(const RbmParameters& p, const Distribution& data) {
  const auto md = dense_moments(data.to_table().probabilities());
  const auto mm = dense_moments(model_distribution(p).probabilities());
  std::vector<double> gap(md.size());
  for (std::size_t m = 0; m < md.size(); ++m) gap[m] = md[m] - mm[m];
  return nonempty_part(gap);
}

// Per-order Frobenius and mismatch norms from dense tables.
void order_norms(std::span<const double> phi, std::span<const double> gap, int tracked, TrajectoryRecord& r) {
  r.frobenius.assign(static_cast<std::size_t>(tracked), 0.0);
  r.mismatch.assign(static_cast<std::size_t>(tracked), gap.empty() ? kNaN : 0.0);
  for (std::size_t m = 1; m < phi.size(); ++m) {
    const int k = std::popcount(m);
    if (k > tracked) continue;
    r.frobenius[static_cast<std::size_t>(k - 1)] += phi[m] * phi[m];
    if (!gap.empty()) r.mismatch[static_cast<std::size_t>(k - 1)] += gap[m] * gap[m];
  }
  for (auto& v : r.frobenius) v = std::sqrt(v);
  if (!gap.empty()) {
    for (auto& v : r.mismatch) v = std::sqrt(v);
  }
}

long rows_to_log(long step, long n_steps, long log_every) {
  if (step == 0 || step == n_steps) return 1;
  return log_every > 0 && step % log_every == 0 ? 1 : 0;
}

EmpiricalSamples draw_batch(const EmpiricalSamples& all, long batch_size, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
  std::vector<Mask> codes(static_cast<std::size_t>(batch_size));
  for (auto& c : codes) c = all.codes()[pick(rng)];
  return EmpiricalSamples(all.n_sites(), std::move(codes));
}

}  // namespace

void TrainConfig::validate() const {
  if (!(step > 0.0) || !std::isfinite(step)) throw ConfigError("step must be positive and finite");
  if (n_steps < 0) throw ConfigError("n_steps must be nonnegative");
  if (log_every < 0) throw ConfigError("log_every must be nonnegative");
  if (track_order < 1) throw ConfigError("track_order must be at least 1");
  if (batch_size < 0) throw ConfigError("batch_size must be nonnegative");
  if (use_ridge) ridge.validate();
  if (gradient == Gradient::sampled) sampler.validate();
}

// --- training ---------------------------------------------------------------

RbmTrainResult train(const RbmParameters& init, const Distribution& data, const TrainConfig& cfg) {
  cfg.validate();
  init.validate();
  const int n = init.n_visible();
  if (data.n_sites() != n) throw DimensionError("train: data and machine disagree on n_visible");
  const bool enumerable = n <= enumeration_limit();
  if (cfg.gradient == TrainConfig::Gradient::exact && !enumerable) {
    throw LimitError("exact gradients need N within the enumeration limit; use the sampled mode");
  }
  const int tracked = std::min(cfg.track_order, n);
  const bool ridge = cfg.use_ridge && cfg.ridge.lambda > 0.0;
  const bool effective_ridge = ridge && cfg.ridge.space == RidgeConfig::Space::effective;

  RbmTrainResult out{init, TrainingTrajectory(tracked, ridge)};
  RbmParameters& p = out.params;
  const Eigen::MatrixXd to_own = init.convention == Convention::binary
                                     ? Eigen::MatrixXd(spin_from_binary_map(n, init.n_hidden()).transpose())
                                     : Eigen::MatrixXd();

  std::vector<double> data_table;
  std::vector<double> data_moments;
  if (enumerable) {
    const ProbabilityTable table = data.to_table();
    data_table.assign(table.probabilities().begin(), table.probabilities().end());
    data_moments = dense_moments(data_table);
  }
  std::mt19937_64 batch_rng(cfg.seed);

  double elapsed = 0.0;
  RbmEnumeration e;
  for (long step = 0;; ++step) {
    Eigen::VectorXd grad;
    double nll = kNaN;
    double pen = 0.0;
    std::vector<double> phi;
    std::vector<double> gap;
    const bool log_now = rows_to_log(step, cfg.n_steps, cfg.log_every) != 0;

    if (enumerable) {
      enumerate_rbm(p, cfg.gradient == TrainConfig::Gradient::exact, e);
      const auto& w = e.log_weight;
      const double lz = log_sum_exp(w);
      std::vector<double> pm(w.size());
      double mean_e = 0.0;
      double data_e = 0.0;
      for (std::size_t c = 0; c < w.size(); ++c) {
        pm[c] = std::exp(w[c] - lz);
        mean_e += w[c];
        data_e += data_table[c] * w[c];
      }
      mean_e /= static_cast<double>(w.size());
      nll = lz - data_e;
      if (effective_ridge) {
        for (double v : w) pen += (v - mean_e) * (v - mean_e);
        pen /= static_cast<double>(w.size());
      } else if (ridge) {
        pen = p.flatten().squaredNorm();
      }

      if (cfg.gradient == TrainConfig::Gradient::exact) {
        std::vector<double> q(w.size());
        const double lam = effective_ridge ? cfg.ridge.lambda / static_cast<double>(w.size()) : 0.0;
        for (std::size_t c = 0; c < q.size(); ++c) q[c] = pm[c] - data_table[c] + lam * (w[c] - mean_e);
        grad = weighted_energy_gradient(e, q);
        if (init.convention == Convention::binary) grad = to_own * grad;
        if (ridge && !effective_ridge) grad += cfg.ridge.lambda * p.flatten();
      }
      if (log_now) {
        const FourierSpectrum spec = fast_transform(w);
        phi.assign(spec.values().begin(), spec.values().end());
        const auto mm = dense_moments(pm);
        gap.resize(mm.size());
        for (std::size_t m = 0; m < mm.size(); ++m) gap[m] = data_moments[m] - mm[m];
      }
    }

    if (cfg.gradient == TrainConfig::Gradient::sampled) {
      SamplerConfig sc = cfg.sampler;
      sc.seed = cfg.sampler.seed + static_cast<std::uint64_t>(step);
      SampledGradient sg = [&] {
        if (!data.is_table() && cfg.batch_size > 0) {
          return nll_gradient_sampled(p, Distribution(draw_batch(data.samples(), cfg.batch_size, batch_rng)), sc);
        }
        return nll_gradient_sampled(p, data, sc);
      }();
      grad = std::move(sg.gradient);
      if (ridge) {
        RidgeConfig rc = cfg.ridge;
        if (!enumerable && rc.estimator == RidgeConfig::Estimator::exact) {
          throw LimitError("exact ridge estimator needs N within the enumeration limit");
        }
        rc.seed = cfg.ridge.seed + static_cast<std::uint64_t>(step);
        grad += penalty_gradient(p, rc);
        if (!enumerable) pen = penalty(p, rc);
      }
    }

    if (!std::isfinite(grad.squaredNorm()) || (enumerable && !std::isfinite(nll))) {
      throw NumericError("training diverged at step " + std::to_string(step) + "; last good step " +
                         std::to_string(step - 1));
    }

    if (log_now) {
      TrajectoryRecord r;
      r.step = step;
      r.time = elapsed;
      r.loglik = -nll;
      r.grad_norm = grad.norm();
      r.penalty = pen;
      if (enumerable) {
        order_norms(phi, gap, tracked, r);
      } else {
        const EffectiveCouplings est =
            extract_couplings_formula(p, tracked, FormulaMode::monte_carlo(1000, cfg.seed + static_cast<std::uint64_t>(step)));
        std::vector<double> fro(static_cast<std::size_t>(tracked), 0.0);
        est.for_each([&](Mask m, double v) { fro[static_cast<std::size_t>(std::popcount(m) - 1)] += v * v; });
        r.frobenius.clear();
        for (double v : fro) r.frobenius.push_back(std::sqrt(v));
        r.mismatch.assign(static_cast<std::size_t>(tracked), kNaN);
      }
      out.trajectory.append(std::move(r));
    }
    if (step == cfg.n_steps) break;

    const Eigen::VectorXd theta = p.flatten() - cfg.step * grad;
    p = RbmParameters::from_flat(p.convention, n, p.n_hidden(), theta);
    elapsed += cfg.step;
  }
  return out;
}

HobmTrainResult train(const HigherOrderModel& init, const Distribution& data, const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.gradient == TrainConfig::Gradient::sampled) throw ConfigError("hobm training uses exact gradients only");
  const int n = init.n_sites();
  if (data.n_sites() != n) throw DimensionError("train: data and model disagree on n_sites");
  require_enumerable(n, "hobm train");
  const int tracked = std::min(cfg.track_order, n);
  RidgeConfig rc = cfg.ridge;
  if (!cfg.use_ridge) rc.lambda = 0.0;
  rc.estimator = RidgeConfig::Estimator::exact;

  HobmTrainResult out{init, TrainingTrajectory(tracked, rc.lambda > 0.0)};
  const auto data_moments = dense_moments(data.to_table().probabilities());
  double elapsed = 0.0;
  for (long step = 0;; ++step) {
    const SubsetVector g = ridge_gradient(out.model, data, rc);
    double gg = 0.0;
    for (double v : g.values()) gg += v * v;
    const double nll = neg_log_likelihood(out.model, data);
    if (!std::isfinite(nll) || !std::isfinite(gg)) {
      throw NumericError("training diverged at step " + std::to_string(step) + "; last good step " +
                         std::to_string(step - 1));
    }
    if (rows_to_log(step, cfg.n_steps, cfg.log_every) != 0) {
      TrajectoryRecord r;
      r.step = step;
      r.time = elapsed;
      r.loglik = -nll;
      r.grad_norm = std::sqrt(gg);
      r.penalty = rc.lambda > 0.0 ? penalty(out.model, rc) : 0.0;
      std::vector<double> phi(std::size_t{1} << n, 0.0);
      out.model.couplings().for_each([&](Mask m, double v) { phi[static_cast<std::size_t>(m)] = v; });
      const auto mm = dense_moments(model_distribution(out.model).probabilities());
      std::vector<double> gap(mm.size());
      for (std::size_t m = 0; m < mm.size(); ++m) gap[m] = data_moments[m] - mm[m];
      order_norms(phi, gap, tracked, r);
      out.trajectory.append(std::move(r));
    }
    if (step == cfg.n_steps) break;

    SubsetVector next = out.model.couplings();
    for (std::size_t k = 0; k < next.size(); ++k) {
      const Mask m = next.mask_at(k);
      if (m != 0) next.at(m) -= cfg.step * g[m];
    }
    out.model = HigherOrderModel(EffectiveCouplings(std::move(next)));
    elapsed += cfg.step;
  }
  return out;
}

// --- effective-space flow ----------------------------------------------------

SubsetVector effective_gradient(const RbmParameters& p, const Distribution& data) {
  if (data.n_sites() != p.n_visible()) throw DimensionError("data and machine disagree on n_visible");
  return dense_from_nonempty(p.n_visible(), moment_gap(p, data));
}

SubsetVector effective_flow_rhs(const RbmParameters& p, const Distribution& data) {
  if (data.n_sites() != p.n_visible()) throw DimensionError("data and machine disagree on n_visible");
  const Eigen::VectorXd g = moment_gap(p, data);
  const Jacobian jac = jacobian_phi_theta(p);
  const Eigen::VectorXd rhs = jac.matrix * (jac.matrix.transpose() * g);
  return dense_from_nonempty(p.n_visible(), rhs);
}

std::vector<CouplingTerm> per_coupling_decomposition(const RbmParameters& p, const Distribution& data,
                                                     SubsetIndex subset) {
  const int n = p.n_visible();
  if (subset.empty() || !subset.fits(n)) throw DomainError("decomposition needs a nonempty subset of the sites");
  const Eigen::VectorXd g = moment_gap(p, data);
  const Jacobian jac = jacobian_phi_theta(p);
  const Eigen::Index row_i = static_cast<Eigen::Index>(subset.mask()) - 1;
  const Eigen::VectorXd gi = jac.matrix.row(row_i).transpose();
  const double norm_i = gi.norm();

  std::vector<CouplingTerm> terms;
  terms.reserve(jac.subsets.size());
  for (std::size_t r = 0; r < jac.subsets.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    CouplingTerm t;
    t.subset = jac.subsets[r];
    t.overlap = jac.matrix.row(row).dot(gi);
    t.mismatch = g(row);
    t.contribution = t.overlap * t.mismatch;
    t.norm = jac.matrix.row(row).norm();
    t.cosine = (t.norm > 0.0 && norm_i > 0.0) ? t.overlap / (t.norm * norm_i) : 0.0;
    terms.push_back(t);
  }
  return terms;
}

CosineStats cosine_overlap_stats(const RbmParameters& p, int max_order, long n_pairs, std::uint64_t seed) {
  if (n_pairs < 1) throw DomainError("cosine statistics need at least one pair");
  const Jacobian jac = jacobian_phi_theta(p, max_order);
  const Eigen::VectorXd norms = jac.matrix.rowwise().norm();
  const double scale = norms.size() > 0 ? norms.maxCoeff() : 0.0;

  CosineStats st;
  st.n_params = p.n_params();
  std::vector<Eigen::Index> live;
  for (Eigen::Index r = 0; r < norms.size(); ++r) {
    if (norms(r) > 1e-14 * scale && norms(r) > 0.0) {
      live.push_back(r);
    } else {
      ++st.n_zero_rows;
    }
  }
  if (live.size() < 2) throw DomainError("fewer than two nonzero Jacobian rows");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, live.size() - 1);
  std::vector<double> c(static_cast<std::size_t>(n_pairs));
  for (auto& v : c) {
    const std::size_t a = pick(rng);
    std::size_t b = pick(rng);
    while (b == a) b = pick(rng);
    const auto ra = live[a];
    const auto rb = live[b];
    v = std::abs(jac.matrix.row(ra).dot(jac.matrix.row(rb))) / (norms(ra) * norms(rb));
  }
  st.n_pairs = n_pairs;
  st.mean_abs_cos = std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(c.size());
  std::sort(c.begin(), c.end());
  auto quantile = [&](double q) { return c[static_cast<std::size_t>(q * static_cast<double>(c.size() - 1))]; };
  st.q10 = quantile(0.1);
  st.q50 = quantile(0.5);
  st.q90 = quantile(0.9);
  return st;
}

CosineSweep cosine_scaling_sweep(int n_visible, const std::vector<int>& hidden_sizes, int max_order, long n_pairs,
                                 double weight_std, std::uint64_t seed) {
  if (hidden_sizes.size() < 2) throw DomainError("a scaling sweep needs at least two sizes");
  CosineSweep sweep;
  std::vector<double> x;
  std::vector<double> y;
  for (std::size_t k = 0; k < hidden_sizes.size(); ++k) {
    std::mt19937_64 rng(seed + k);
    std::normal_distribution<double> normal(0.0, weight_std);
    RbmParameters p = RbmParameters::zeros(n_visible, hidden_sizes[k]);
    for (Eigen::Index i = 0; i < p.weights.size(); ++i) p.weights.data()[i] = normal(rng);
    for (Eigen::Index a = 0; a < p.hidden_biases.size(); ++a) p.hidden_biases(a) = normal(rng);
    for (Eigen::Index i = 0; i < p.visible_fields.size(); ++i) p.visible_fields(i) = normal(rng);
    const CosineStats st = cosine_overlap_stats(p, max_order, n_pairs, seed + 1000 + k);
    x.push_back(std::log(static_cast<double>(st.n_params)));
    y.push_back(std::log(st.mean_abs_cos));
    sweep.points.push_back(st);
  }
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  sweep.slope = sxy / sxx;
  return sweep;
}

SubsetVector diagonal_approx_rhs(const RbmParameters& p, const Distribution& data) {
  const Eigen::VectorXd g = moment_gap(p, data);
  const Jacobian jac = jacobian_phi_theta(p);
  const Eigen::VectorXd rhs = jac.matrix.rowwise().squaredNorm().cwiseProduct(g);
  return dense_from_nonempty(p.n_visible(), rhs);
}

DiagonalDeviation diagonal_deviation(const RbmParameters& p, const Distribution& data, double floor) {
  const SubsetVector full = effective_flow_rhs(p, data);
  const SubsetVector diag = diagonal_approx_rhs(p, data);
  std::vector<double> rel;
  for (std::size_t m = 1; m < full.size(); ++m) {
    const double f = full.value_at(m);
    if (std::abs(f) <= floor) continue;
    rel.push_back(std::abs(diag.value_at(m) - f) / std::abs(f));
  }
  DiagonalDeviation d;
  d.n_compared = static_cast<long>(rel.size());
  if (rel.empty()) return d;
  std::sort(rel.begin(), rel.end());
  d.median_relative = rel[rel.size() / 2];
  d.max_relative = rel.back();
  return d;
}

BoundCheck proposition1_check(const std::vector<FourierSpectrum>& derivative_spectra, int order) {
  if (order < 1) throw DomainError("the bound needs order >= 1");
  BoundCheck b;
  for (const auto& spec : derivative_spectra) {
    spec.for_each([&](Mask m, double v) {
      if (std::popcount(m) >= order) b.lhs += v * v;
    });
    b.rhs += total_influence(spec);
  }
  b.rhs /= order;
  b.slack = b.rhs - b.lhs;
  return b;
}

BoundCheck proposition1_check(const RbmParameters& params, int order) {
  if (order < 1 || order > params.n_visible()) throw DomainError("order must be in [1, N]");
  const RbmParameters p = to_spin(params);
  const Jacobian jac = jacobian_phi_theta(p);
  BoundCheck b;
  for (std::size_t r = 0; r < jac.subsets.size(); ++r) {
    if (std::popcount(jac.subsets[r]) >= order) b.lhs += jac.matrix.row(static_cast<Eigen::Index>(r)).squaredNorm();
  }
  for (const auto& spec : energy_derivative_spectra(p)) b.rhs += total_influence(spec);
  b.rhs /= order;
  b.slack = b.rhs - b.lhs;
  return b;
}

// --- Hessians and fixed points -------------------------------------------------

Eigen::MatrixXd hessian_theta(const RbmParameters& p, const Distribution& data) {
  if (p.n_visible() > kHessianSiteLimit) throw LimitError("hessian_theta: too many sites for a dense Hessian");
  return nll_hessian_exact(p, data);
}

Eigen::MatrixXd hessian_sandwich(const RbmParameters& p) {
  if (p.n_visible() > kHessianSiteLimit) throw LimitError("hessian_sandwich: too many sites for a dense Hessian");
  const Jacobian jac = jacobian_phi_theta(p);
  const Eigen::MatrixXd cov = nll_hessian(HigherOrderModel(extract_couplings_exact(p)));
  return jac.matrix.transpose() * cov * jac.matrix;
}

std::string to_string(FixedPointKind kind) {
  switch (kind) {
    case FixedPointKind::data_consistent:
      return "data_consistent";
    case FixedPointKind::spurious:
      return "spurious";
    case FixedPointKind::not_stationary:
      return "not_stationary";
  }
  return "unknown";
}

namespace {

FixedPointKind classify(double theta_sup, double phi_sup, double tol) {
  if (phi_sup < tol) return FixedPointKind::data_consistent;
  if (theta_sup < tol) return FixedPointKind::spurious;
  return FixedPointKind::not_stationary;
}

void spectral_summary(FixedPointReport& r, const Eigen::MatrixXd& hess, const Eigen::MatrixXd& jac, double tol) {
  const Eigen::MatrixXd sym = 0.5 * (hess + hess.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const auto& ev = es.eigenvalues();
  r.min_eigenvalue = ev.minCoeff();
  r.max_abs_eigenvalue = ev.cwiseAbs().maxCoeff();
  r.zero_band = 1e-8 * (1.0 + r.max_abs_eigenvalue);
  r.max_kernel_residual = 0.0;
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if (ev(k) < -r.zero_band) {
      ++r.n_negative;
    } else if (ev(k) < r.zero_band) {
      ++r.n_zero;
      r.max_kernel_residual = std::max(r.max_kernel_residual, (jac * es.eigenvectors().col(k)).norm());
    }
  }
  r.marginally_stable = r.classification == FixedPointKind::data_consistent &&
                        r.min_eigenvalue >= -std::max(tol, r.zero_band) &&
                        r.max_kernel_residual < kKernelResidualTol;
}

}  // namespace

FixedPointReport classify_fixed_point(const RbmParameters& p, const Distribution& data, double tol) {
  if (p.n_visible() > kHessianSiteLimit) throw LimitError("classify_fixed_point: too many sites for a dense Hessian");
  FixedPointReport r;
  r.theta_grad_sup = sup_abs(nll_gradient_exact(p, data));
  r.phi_grad_sup = sup_abs(moment_gap(p, data));
  r.classification = classify(r.theta_grad_sup, r.phi_grad_sup, tol);
  const Eigen::MatrixXd hess = hessian_theta(p, data);
  const Jacobian jac = jacobian_phi_theta(p);
  spectral_summary(r, hess, jac.matrix, tol);
  r.sandwich_difference = r.classification == FixedPointKind::data_consistent
                              ? (hess - hessian_sandwich(p)).cwiseAbs().maxCoeff()
                              : kNaN;
  return r;
}

FixedPointReport classify_fixed_point(const HigherOrderModel& model, const Distribution& data, double tol) {
  if (!model.is_dense()) throw DomainError("classify_fixed_point needs a dense model");
  if (model.n_sites() > kHessianSiteLimit) throw LimitError("classify_fixed_point: too many sites for a dense Hessian");
  FixedPointReport r;
  const SubsetVector g = nll_gradient(model, data);
  double sup = 0.0;
  for (std::size_t k = 1; k < g.size(); ++k) sup = std::max(sup, std::abs(g.value_at(k)));
  r.theta_grad_sup = sup;
  r.phi_grad_sup = sup;
  r.classification = classify(sup, sup, tol);
  const Eigen::MatrixXd hess = nll_hessian(model);
  spectral_summary(r, hess, Eigen::MatrixXd::Identity(hess.rows(), hess.cols()), tol);
  r.sandwich_difference = r.classification == FixedPointKind::data_consistent ? 0.0 : kNaN;
  return r;
}

MomentDynamicsReport moment_dynamics_check(const RbmParameters& p, const Distribution& data, double step) {
  if (!(step > 0.0)) throw DomainError("step must be positive");
  const int n = p.n_visible();
  if (n > kHessianSiteLimit) throw LimitError("moment_dynamics_check: too many sites for a dense covariance");
  const Eigen::VectorXd g = moment_gap(p, data);
  const Jacobian jac = jacobian_phi_theta(p);
  const Eigen::VectorXd theta_dot = jac.matrix.transpose() * g;
  const Eigen::VectorXd phi_dot = jac.matrix * theta_dot;

  const Eigen::VectorXd theta = p.flatten();
  auto moments_at = [&](const Eigen::VectorXd& t) {
    const RbmParameters q = RbmParameters::from_flat(p.convention, n, p.n_hidden(), t);
    return nonempty_part(dense_moments(model_distribution(q).probabilities()));
  };
  const Eigen::VectorXd fd = (moments_at(theta + step * theta_dot) - moments_at(theta - step * theta_dot)) / (2.0 * step);
  const Eigen::MatrixXd cov = nll_hessian(HigherOrderModel(extract_couplings_exact(p)));
  const Eigen::VectorXd pred = cov * phi_dot;

  MomentDynamicsReport r;
  r.finite_difference = dense_from_nonempty(n, fd);
  r.predicted = dense_from_nonempty(n, pred);
  const double denom = pred.norm();
  r.relative_error = denom > 0.0 ? (fd - pred).norm() / denom : (fd - pred).norm();
  r.covariance_identity_deviation = (cov - Eigen::MatrixXd::Identity(cov.rows(), cov.cols())).cwiseAbs().maxCoeff();
  return r;
}

// --- learning-order report -------------------------------------------------------

DsbReport dsb_report(const TrainingTrajectory& trajectory, double fraction, double floor, DsbReference reference) {
  if (trajectory.empty()) throw DomainError("dsb_report needs a nonempty trajectory");
  if (!(fraction > 0.0) || fraction > 1.0) throw DomainError("fraction must be in (0, 1]");
  if (!(floor >= 0.0)) throw DomainError("floor must be nonnegative");
  DsbReport rep;
  rep.reference = reference;
  rep.fraction = fraction;
  rep.floor = floor;
  const auto& recs = trajectory.records();
  for (int k = 0; k < trajectory.max_order(); ++k) {
    const auto idx = static_cast<std::size_t>(k);
    OrderTiming t;
    t.order = k + 1;
    t.final_norm = recs.back().frobenius[idx];
    for (const auto& r : recs) t.peak_norm = std::max(t.peak_norm, r.frobenius[idx]);
    t.overshoot = t.final_norm > 0.0 ? t.peak_norm / t.final_norm : kNaN;
    t.above_floor = t.final_norm > floor;
    const double target = fraction * (reference == DsbReference::final_value ? t.final_norm : t.peak_norm);
    for (const auto& r : recs) {
      if (r.frobenius[idx] >= target) {
        t.reached = true;
        t.step = r.step;
        t.time = r.time;
        break;
      }
    }
    rep.orders.push_back(t);
  }
  rep.ordered = true;
  rep.strictly_ordered = true;
  const OrderTiming* prev = nullptr;
  for (const auto& t : rep.orders) {
    if (!t.above_floor) continue;
    if (!t.reached) {
      rep.ordered = rep.strictly_ordered = false;
      break;
    }
    if (prev != nullptr) {
      if (t.step < prev->step) rep.ordered = false;
      if (t.step <= prev->step) rep.strictly_ordered = false;
    }
    prev = &t;
  }
  return rep;
}

}  // namespace ebm
