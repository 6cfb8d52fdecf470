#include "ebm/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "ebm/data.hpp"
#include "ebm/dynamics.hpp"
#include "ebm/hobm.hpp"
#include "ebm/kernels.hpp"
#include "ebm/pbf.hpp"
#include "ebm/rbm.hpp"
#include "ebm/ridge.hpp"

namespace ebm {

namespace {

CheckResult bounded(std::string name, double value, double tol) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.3e (tolerance %.1e)", value, tol);
  return {std::move(name), std::isfinite(value) && value <= tol, buf};
}

RbmParameters random_rbm(int nv, int nh, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, scale);
  RbmParameters p = RbmParameters::zeros(nv, nh);
  for (int i = 0; i < nv; ++i) {
    for (int a = 0; a < nh; ++a) p.weights(i, a) = normal(rng);
    p.visible_fields(i) = normal(rng);
  }
  for (int a = 0; a < nh; ++a) p.hidden_biases(a) = normal(rng);
  return p;
}

ProbabilityTable random_table(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.1, 1.0);
  std::vector<double> w(std::size_t{1} << n);
  for (auto& x : w) x = unif(rng);
  return ProbabilityTable::from_weights(n, std::move(w));
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

CheckResult transform_roundtrip(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> f(256);
  for (auto& x : f) x = normal(rng);
  const FourierSpectrum s = fast_transform(f);
  const std::vector<double> back = inverse_transform(s);
  double energy = 0.0;
  double weight = 0.0;
  for (double x : f) energy += x * x / 256.0;
  for (double x : s.values()) weight += x * x;
  const double err = std::max(max_abs_diff(f, back), std::abs(energy - weight) / energy);
  return bounded("fourier roundtrip and parseval (N=8)", err, 1e-12);
}

CheckResult kernel_equivalence(std::mt19937_64& rng) {
  using kernels::Isa;
  if (!kernels::isa_supported(Isa::avx2)) return {"avx2 kernels match scalar", true, "avx2 unavailable, skipped"};
  std::normal_distribution<double> normal(0.0, 3.0);
  std::vector<double> x(1029);
  for (auto& v : x) v = normal(rng);
  const auto& s = kernels::table(Isa::scalar);
  const auto& v = kernels::table(Isa::avx2);
  std::vector<double> a(x.size()), b(x.size()), ta(x.size()), tb(x.size());
  s.log_cosh_tanh(x.data(), a.data(), ta.data(), x.size());
  v.log_cosh_tanh(x.data(), b.data(), tb.data(), x.size());
  double err = std::max(max_abs_diff(a, b), max_abs_diff(ta, tb));
  std::vector<double> fa(x.begin(), x.begin() + 1024), fb = fa;
  s.fwht(fa.data(), fa.size());
  v.fwht(fb.data(), fb.size());
  err = std::max(err, max_abs_diff(fa, fb));
  return bounded("avx2 kernels match scalar", err, 1e-12);
}

CheckResult formula_vs_transform(std::mt19937_64& rng) {
  const RbmParameters p = random_rbm(5, 3, 0.7, rng);
  const EffectiveCouplings exact = extract_couplings_exact(p);
  const EffectiveCouplings formula = extract_couplings_formula(p, 5, FormulaMode::exact());
  double err = 0.0;
  for (Mask m = 1; m < 32; ++m) err = std::max(err, std::abs(exact[m] - formula[m]));
  return bounded("per-subset coupling formula equals full transform", err, 1e-10);
}

CheckResult binary_bridge(std::mt19937_64& rng) {
  RbmParameters b = random_rbm(5, 3, 0.8, rng);
  b.convention = Convention::binary;
  const ProbabilityTable pb = model_distribution(b);
  const ProbabilityTable ps = model_distribution(to_spin(b));
  const RbmParameters back = to_binary(to_spin(b));
  const double err =
      std::max(max_abs_diff(pb.probabilities(), ps.probabilities()), (back.flatten() - b.flatten()).cwiseAbs().maxCoeff());
  return bounded("binary and spin conventions give one distribution", err, 1e-12);
}

CheckResult gradient_fd(std::mt19937_64& rng) {
  const RbmParameters p = random_rbm(4, 3, 0.5, rng);
  const Distribution data = random_table(4, rng);
  const Eigen::VectorXd g = nll_gradient_exact(p, data);
  const Eigen::VectorXd theta = p.flatten();
  const double h = 1e-5;
  double err = 0.0;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    Eigen::VectorXd tp = theta, tm = theta;
    tp(k) += h;
    tm(k) -= h;
    const double fd = (neg_log_likelihood(RbmParameters::from_flat(p.convention, 4, 3, tp), data) -
                       neg_log_likelihood(RbmParameters::from_flat(p.convention, 4, 3, tm), data)) /
                      (2 * h);
    err = std::max(err, std::abs(fd - g(k)) / std::max(1e-3, std::abs(g(k))));
  }
  return bounded("rbm gradient matches central differences", err, 1e-4);
}

CheckResult convex_fit(std::mt19937_64& rng) {
  const ProbabilityTable target = random_table(4, rng);
  const FitResult r = fit(target, OptimizerConfig{});
  const double kl = kl_divergence(target, model_distribution(r.model));
  return bounded("hobm fit matches all moments (N=4)", std::max(r.final_mismatch, kl), 1e-6);
}

CheckResult inverse_map(std::mt19937_64& rng) {
  const ProbabilityTable target = random_table(5, rng);
  const HigherOrderModel m = couplings_from_distribution(target);
  return bounded("couplings_from_distribution inverts model_distribution",
                 max_abs_diff(target.probabilities(), model_distribution(m).probabilities()), 1e-12);
}

CheckResult ridge_parseval(std::mt19937_64& rng) {
  const RbmParameters p = random_rbm(5, 4, 0.6, rng);
  const EffectiveCouplings phi = extract_couplings_exact(p);
  double sum = 0.0;
  for (Mask m = 1; m < 32; ++m) sum += phi[m] * phi[m];
  const double pen = penalty(p, RidgeConfig{});
  return bounded("ridge penalty equals squared coupling norm", std::abs(pen - sum) / sum, 1e-10);
}

CheckResult bound_check(std::mt19937_64& rng) {
  const RbmParameters p = random_rbm(5, 4, 0.8, rng);
  double worst = 0.0;
  for (int n = 1; n <= 5; ++n) worst = std::max(worst, -proposition1_check(p, n).slack);
  return bounded("low-order concentration bound on jacobian rows", worst, 1e-12);
}

CheckResult spurious(std::mt19937_64&) {
  const Distribution data = model_distribution(three_body_chain(6, 0.5));
  const RbmParameters p = spurious_point(data, 3);
  const double g = nll_gradient_exact(p, data).cwiseAbs().maxCoeff();
  return bounded("magnetisation-matching point is stationary", g, 1e-10);
}

CheckResult marginal_stability(std::mt19937_64& rng) {
  // A data-consistent point by construction: the data is the model itself.
  const RbmParameters p = random_rbm(4, 2, 0.6, rng);
  const FixedPointReport r = classify_fixed_point(p, model_distribution(p), 1e-9);
  CheckResult c = bounded("self-consistent rbm is marginally stable",
                          std::max(r.sandwich_difference, r.max_kernel_residual), 1e-6);
  c.passed = c.passed && r.classification == FixedPointKind::data_consistent && r.marginally_stable;
  return c;
}

}  // namespace

std::vector<CheckResult> run_invariant_checks(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<CheckResult> out;
  for (auto fn : {transform_roundtrip, kernel_equivalence, formula_vs_transform, binary_bridge, gradient_fd,
                  convex_fit, inverse_map, ridge_parseval, bound_check, spurious, marginal_stability}) {
    out.push_back(fn(rng));
  }
  return out;
}

}  // namespace ebm
