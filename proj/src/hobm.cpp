#include "ebm/hobm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "ebm/error.hpp"

namespace ebm {
namespace {

double log_sum_exp(std::span<const double> x) {
  const double mx = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(mx)) throw NumericError("non-finite log weight");
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - mx);
  return mx + std::log(acc);
}

// Dense embedding of the couplings (zero outside the stored subsets).
std::vector<double> dense_couplings(const HigherOrderModel& model) {
  require_enumerable(model.n_sites(), "dense couplings");
  if (model.is_dense()) {
    auto v = model.couplings().values();
    return {v.begin(), v.end()};
  }
  std::vector<double> out(std::size_t{1} << model.n_sites(), 0.0);
  model.couplings().for_each([&](Mask m, double v) { out[static_cast<std::size_t>(m)] = v; });
  return out;
}

std::vector<double> energies_from_dense_phi(int n, const std::vector<double>& phi) {
  std::vector<double> neg(phi.size());
  for (std::size_t k = 0; k < phi.size(); ++k) neg[k] = -phi[k];
  return inverse_transform(FourierSpectrum(n, std::move(neg)));
}

// Sum_x p(x) chi_I(x) for all I (2^N times the spectrum of p).
std::vector<double> dense_moments(const ProbabilityTable& p) {
  FourierSpectrum spec = fast_transform(p.probabilities());
  const double scale = static_cast<double>(spec.size());
  std::vector<double> out(spec.values().begin(), spec.values().end());
  for (double& v : out) v *= scale;
  out[0] = 1.0;
  return out;
}

// Moments of a bag of samples on a list of subsets.
std::vector<double> sample_moments(const EmpiricalSamples& s, std::span<const Mask> subsets) {
  std::vector<double> out(subsets.size(), 0.0);
  const double inv = 1.0 / static_cast<double>(s.size());
  for (std::size_t k = 0; k < subsets.size(); ++k) {
    long acc = 0;
    for (Mask code : s.codes()) acc += parity_sign(code, subsets[k]);
    out[k] = static_cast<double>(acc) * inv;
  }
  return out;
}

int effective_order(int n_sites, int max_order) { return (max_order < 0 || max_order > n_sites) ? n_sites : max_order; }

}  // namespace

// --- model / distributions -------------------------------------------------

HigherOrderModel::HigherOrderModel(EffectiveCouplings couplings) : couplings_(std::move(couplings)) {
  couplings_.for_each([](Mask, double v) {
    if (!std::isfinite(v)) throw NumericError("non-finite coupling");
  });
}

HigherOrderModel HigherOrderModel::zeros(int n_sites) { return HigherOrderModel(EffectiveCouplings::zeros(n_sites)); }

HigherOrderModel HigherOrderModel::zeros_truncated(int n_sites, int max_order) {
  return HigherOrderModel(EffectiveCouplings(SubsetVector::zeros_truncated(n_sites, max_order)));
}

ProbabilityTable::ProbabilityTable(int n_sites, std::vector<double> probabilities)
    : n_sites_(n_sites), p_(std::move(probabilities)), strictly_positive_(true) {
  if (n_sites < 1 || n_sites > 30 || p_.size() != (std::size_t{1} << n_sites)) {
    throw DimensionError("probability table needs exactly 2^N entries");
  }
  double sum = 0.0;
  for (double v : p_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("probabilities must be finite and nonnegative");
    if (v == 0.0) strictly_positive_ = false;
    sum += v;
  }
  if (std::fabs(sum - 1.0) > 1e-12) throw DomainError("probabilities must sum to 1 (got " + std::to_string(sum) + ")");
}

ProbabilityTable ProbabilityTable::from_weights(int n_sites, std::vector<double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw DomainError("weights must be nonnegative");
    sum += w;
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) throw NumericError("weights must have a finite positive sum");
  for (double& w : weights) w /= sum;
  return ProbabilityTable(n_sites, std::move(weights));
}

ProbabilityTable ProbabilityTable::from_log_weights(int n_sites, std::span<const double> log_weights) {
  const double lz = log_sum_exp(log_weights);
  std::vector<double> p(log_weights.size());
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::exp(log_weights[k] - lz);
  // Renormalise to absorb the last few ulp.
  const double sum = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p) v /= sum;
  return ProbabilityTable(n_sites, std::move(p));
}

ProbabilityTable ProbabilityTable::uniform(int n_sites) {
  if (n_sites < 1 || n_sites > 30) throw DimensionError("uniform table: bad site count");
  const std::size_t size = std::size_t{1} << n_sites;
  return ProbabilityTable(n_sites, std::vector<double>(size, 1.0 / static_cast<double>(size)));
}

EmpiricalSamples::EmpiricalSamples(int n_sites, std::vector<Mask> codes) : n_sites_(n_sites), codes_(std::move(codes)) {
  if (n_sites < 1 || n_sites > kMaxSites) throw DimensionError("samples: bad site count");
  if (codes_.empty()) throw DomainError("an empirical distribution needs at least one sample");
  for (Mask c : codes_) {
    if ((c & ~full_mask(n_sites)) != 0) throw DimensionError("sample code wider than n_sites");
  }
}

int Distribution::n_sites() const {
  return std::visit([](const auto& d) { return d.n_sites(); }, v_);
}

const ProbabilityTable& Distribution::table() const {
  if (!is_table()) throw DomainError("distribution holds samples, not a table");
  return std::get<ProbabilityTable>(v_);
}

const EmpiricalSamples& Distribution::samples() const {
  if (is_table()) throw DomainError("distribution holds a table, not samples");
  return std::get<EmpiricalSamples>(v_);
}

ProbabilityTable Distribution::to_table() const {
  if (is_table()) return table();
  const auto& s = samples();
  require_enumerable(s.n_sites(), "histogram of samples");
  std::vector<double> counts(std::size_t{1} << s.n_sites(), 0.0);
  for (Mask c : s.codes()) counts[static_cast<std::size_t>(c)] += 1.0;
  return ProbabilityTable::from_weights(s.n_sites(), std::move(counts));
}

bool Distribution::strictly_positive() const {
  if (is_table()) return table().strictly_positive();
  if (samples().n_sites() > enumeration_limit()) return false;
  return to_table().strictly_positive();
}

// --- energies and likelihood ------------------------------------------------

double energy(const HigherOrderModel& model, const SpinConfiguration& s) {
  if (s.n_sites() != model.n_sites()) throw DimensionError("energy: configuration size differs from the model");
  return -evaluate_expansion(model.couplings(), s);
}

std::vector<double> energy_table(const HigherOrderModel& model) {
  require_enumerable(model.n_sites(), "energy_table");
  return energies_from_dense_phi(model.n_sites(), dense_couplings(model));
}

double log_partition(const HigherOrderModel& model) {
  auto h = energy_table(model);
  for (double& v : h) v = -v;
  return log_sum_exp(h);
}

ProbabilityTable model_distribution(const HigherOrderModel& model) {
  auto h = energy_table(model);
  for (double& v : h) v = -v;
  return ProbabilityTable::from_log_weights(model.n_sites(), h);
}

MomentVector moments(const Distribution& d, int max_order) {
  const int n = d.n_sites();
  const int order = effective_order(n, max_order);
  if (d.is_table() || n <= enumeration_limit()) {
    SubsetVector dense(n, dense_moments(d.to_table()));
    if (order == n) return MomentVector(std::move(dense));
    return MomentVector(dense.truncated_to(order));
  }
  const auto subsets = subsets_up_to(n, order);
  const auto values = sample_moments(d.samples(), subsets);
  std::vector<SubsetVector::Entry> entries;
  entries.reserve(subsets.size());
  for (std::size_t k = 0; k < subsets.size(); ++k) entries.emplace_back(subsets[k], values[k]);
  return MomentVector(SubsetVector(n, order, std::move(entries)));
}

namespace {

double data_energy_mean(const std::vector<double>& phi_dense, const std::vector<double>& data_moments) {
  double acc = 0.0;
  for (std::size_t m = 1; m < phi_dense.size(); ++m) acc -= phi_dense[m] * data_moments[m];
  return acc;
}

}  // namespace

double neg_log_likelihood(const HigherOrderModel& model, const Distribution& data) {
  if (data.n_sites() != model.n_sites()) throw DimensionError("NLL: data and model sizes differ");
  require_enumerable(model.n_sites(), "neg_log_likelihood");
  const auto phi = dense_couplings(model);
  const auto dm = dense_moments(data.to_table());
  return data_energy_mean(phi, dm) + log_partition(model);
}

SubsetVector nll_gradient(const HigherOrderModel& model, const Distribution& data) {
  if (data.n_sites() != model.n_sites()) throw DimensionError("gradient: data and model sizes differ");
  require_enumerable(model.n_sites(), "nll_gradient");
  const auto mm = dense_moments(model_distribution(model));
  const auto dm = dense_moments(data.to_table());
  if (model.is_dense()) {
    std::vector<double> g(mm.size());
    g[0] = 0.0;
    for (std::size_t m = 1; m < g.size(); ++m) g[m] = mm[m] - dm[m];
    return SubsetVector(model.n_sites(), std::move(g));
  }
  std::vector<SubsetVector::Entry> entries;
  for (Mask m : subsets_up_to(model.n_sites(), model.max_order())) {
    entries.emplace_back(m, mm[static_cast<std::size_t>(m)] - dm[static_cast<std::size_t>(m)]);
  }
  return SubsetVector(model.n_sites(), model.max_order(), std::move(entries));
}

Eigen::MatrixXd nll_hessian(const HigherOrderModel& model) {
  const int n = model.n_sites();
  if (n > kHessianSiteLimit) {
    throw LimitError("nll_hessian: N=" + std::to_string(n) + " exceeds the Hessian limit " +
                     std::to_string(kHessianSiteLimit));
  }
  const auto mm = dense_moments(model_distribution(model));
  const std::size_t dim = mm.size() - 1;
  Eigen::MatrixXd h(dim, dim);
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t b = 0; b <= a; ++b) {
      const Mask i = a + 1;
      const Mask j = b + 1;
      const double c = mm[static_cast<std::size_t>(i ^ j)] - mm[i] * mm[j];
      h(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = c;
      h(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = c;
    }
  }
  return h;
}

double entropy(const ProbabilityTable& p) {
  double acc = 0.0;
  for (double v : p.probabilities()) {
    if (v > 0.0) acc -= v * std::log(v);
  }
  return acc;
}

double kl_divergence(const ProbabilityTable& p, const ProbabilityTable& q) {
  if (p.n_sites() != q.n_sites()) throw DimensionError("KL: tables differ in size");
  double acc = 0.0;
  for (std::size_t k = 0; k < p.probabilities().size(); ++k) {
    const double a = p.probabilities()[k];
    if (a == 0.0) continue;
    const double b = q.probabilities()[k];
    if (b == 0.0) return std::numeric_limits<double>::infinity();
    acc += a * (std::log(a) - std::log(b));
  }
  return acc;
}

HigherOrderModel couplings_from_distribution(const ProbabilityTable& data) {
  if (!data.strictly_positive()) {
    throw DomainError("couplings_from_distribution needs a strictly positive table (some entry is zero)");
  }
  std::vector<double> logp(data.probabilities().size());
  for (std::size_t k = 0; k < logp.size(); ++k) logp[k] = std::log(data.probabilities()[k]);
  FourierSpectrum spec = fast_transform(logp);
  std::vector<double> phi(spec.values().begin(), spec.values().end());
  phi[0] = 0.0;
  return HigherOrderModel(EffectiveCouplings(data.n_sites(), std::move(phi)));
}

// --- fitting ----------------------------------------------------------------

FitResult fit(const Distribution& data, const OptimizerConfig& cfg, std::optional<HigherOrderModel> init) {
  const int n = data.n_sites();
  require_enumerable(n, "fit");
  if (cfg.ridge_lambda < 0.0) throw DomainError("ridge lambda must be nonnegative");
  if (!(cfg.step > 0.0)) throw DomainError("step size must be positive");
  if (cfg.ridge_lambda == 0.0 && !data.strictly_positive()) {
    throw DomainError(
        "data has zero-probability configurations; the unregularised optimum diverges, use ridge_lambda > 0");
  }
  const int order = effective_order(n, cfg.max_order);
  if (init && (init->n_sites() != n)) throw DimensionError("fit: initial model has the wrong size");

  const std::size_t size = std::size_t{1} << n;
  std::vector<char> active(size, 0);
  for (std::size_t m = 1; m < size; ++m) active[m] = std::popcount(m) <= order ? 1 : 0;

  std::vector<double> phi(size, 0.0);
  if (init) {
    phi = dense_couplings(*init);
    for (std::size_t m = 0; m < size; ++m) {
      if (!active[m]) phi[m] = 0.0;
    }
  }
  const auto dm = dense_moments(data.to_table());
  const double lambda = cfg.ridge_lambda;

  struct Eval {
    double objective;
    std::vector<double> model_moments;
  };
  auto evaluate = [&](const std::vector<double>& p) {
    auto h = energies_from_dense_phi(n, p);
    for (double& v : h) v = -v;
    const double lz = log_sum_exp(h);
    double obj = data_energy_mean(p, dm) + lz;
    if (lambda > 0.0) {
      double sq = 0.0;
      for (std::size_t m = 1; m < size; ++m) sq += p[m] * p[m];
      obj += 0.5 * lambda * sq;
    }
    if (!std::isfinite(obj)) throw NumericError("fit: objective became non-finite");
    return Eval{obj, dense_moments(ProbabilityTable::from_log_weights(n, h))};
  };
  auto gradient = [&](const std::vector<double>& p, const Eval& e) {
    std::vector<double> g(size, 0.0);
    for (std::size_t m = 1; m < size; ++m) {
      if (active[m]) g[m] = e.model_moments[m] - dm[m] + lambda * p[m];
    }
    return g;
  };
  auto sup = [](const std::vector<double>& g) {
    double s = 0.0;
    for (double v : g) s = std::max(s, std::fabs(v));
    return s;
  };

  const int tracked = std::min(std::max(cfg.track_order, 1), n);
  TrainingTrajectory traj(tracked, lambda > 0.0);
  double elapsed = 0.0;
  auto log_point = [&](long it, const std::vector<double>& p, const Eval& e, const std::vector<double>& g) {
    TrajectoryRecord r;
    r.step = it;
    r.time = elapsed;
    r.loglik = -e.objective;
    double gg = 0.0;
    for (double v : g) gg += v * v;
    r.grad_norm = std::sqrt(gg);
    r.frobenius.assign(static_cast<std::size_t>(tracked), 0.0);
    r.mismatch.assign(static_cast<std::size_t>(tracked), 0.0);
    double sq = 0.0;
    for (std::size_t m = 1; m < size; ++m) {
      const int k = std::popcount(m);
      sq += p[m] * p[m];
      if (k > tracked) continue;
      r.frobenius[static_cast<std::size_t>(k - 1)] += p[m] * p[m];
      const double d = dm[m] - e.model_moments[m];
      r.mismatch[static_cast<std::size_t>(k - 1)] += d * d;
    }
    if (lambda > 0.0) {
      r.penalty = sq;
      r.loglik = -(e.objective - 0.5 * lambda * sq);
    }
    for (auto& v : r.frobenius) v = std::sqrt(v);
    for (auto& v : r.mismatch) v = std::sqrt(v);
    traj.append(std::move(r));
  };

  Eval cur = evaluate(phi);
  std::vector<double> g = gradient(phi, cur);
  double res = sup(g);
  log_point(0, phi, cur, g);
  long it = 0;
  double alpha = cfg.step;
  std::vector<double> trial(size);
  while (res >= cfg.tolerance && it < cfg.max_iters) {
    double gg = 0.0;
    for (double v : g) gg += v * v;
    Eval next{};
    if (cfg.mode == OptimizerConfig::Mode::fixed_step) {
      for (std::size_t m = 0; m < size; ++m) trial[m] = phi[m] - cfg.step * g[m];
      next = evaluate(trial);
      elapsed += cfg.step;
    } else {
      // Armijo backtracking; accepted steps never increase the objective.
      // Close to the optimum the decrease drops below the objective's
      // resolution, so a step that stops short of the line minimum (the new
      // gradient still points along the old one) is accepted too: by
      // convexity the objective fell along the whole segment.
      bool accepted = false;
      for (int tries = 0; tries < 60; ++tries) {
        for (std::size_t m = 0; m < size; ++m) trial[m] = phi[m] - alpha * g[m];
        next = evaluate(trial);
        if (next.objective <= cur.objective - 1e-4 * alpha * gg) {
          accepted = true;
          break;
        }
        const auto gt = gradient(trial, next);
        double along = 0.0;
        for (std::size_t m = 0; m < size; ++m) along += gt[m] * g[m];
        if (along > 0.0) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) break;  // no decrease representable in double precision
      elapsed += alpha;
      alpha = std::min(alpha * 2.0, 1e3);
    }
    phi.swap(trial);
    cur = std::move(next);
    g = gradient(phi, cur);
    res = sup(g);
    ++it;
    if (cfg.log_every > 0 && it % cfg.log_every == 0) log_point(it, phi, cur, g);
  }
  if (traj.back().step != it) log_point(it, phi, cur, g);

  FitResult out{HigherOrderModel(EffectiveCouplings(n, phi)), std::move(traj), res < cfg.tolerance, it, res};
  if (order < n) out.model = HigherOrderModel(EffectiveCouplings(out.model.couplings().truncated_to(order)));
  return out;
}

}  // namespace ebm
