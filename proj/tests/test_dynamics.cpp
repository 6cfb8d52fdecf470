#include <doctest.h>

#include <cmath>
#include <random>

#include "ebm/data.hpp"
#include "ebm/dynamics.hpp"
#include "ebm/error.hpp"
#include "oracles.hpp"

using namespace ebm;

namespace {

std::vector<double> as_vector(const ProbabilityTable& t) {
  const auto s = t.probabilities();
  return {s.begin(), s.end()};
}

std::vector<double> energies(const RbmParameters& p) {
  std::vector<double> e(std::size_t{1} << p.n_visible());
  for (Mask c = 0; c < e.size(); ++c) e[c] = oracle::rbm_energy(p, c);
  return e;
}

// Effective couplings by the direct-sum oracle.
std::vector<double> oracle_phi(const RbmParameters& p) {
  auto s = oracle::spectrum(energies(p), p.n_visible());
  s[0] = 0.0;
  return s;
}

Distribution random_table(int n, std::mt19937_64& rng) { return ProbabilityTable(n, oracle::random_probabilities(n, rng)); }

TrajectoryRecord record(long step, std::vector<double> frob) {
  TrajectoryRecord r;
  r.step = step;
  r.time = 0.1 * static_cast<double>(step);
  r.mismatch.assign(frob.size(), 0.0);
  r.frobenius = std::move(frob);
  return r;
}

}  // namespace

TEST_CASE("effective gradient and flow") {
  std::mt19937_64 rng(1);
  const auto p = oracle::random_rbm(5, 3, 0.5, rng);
  const auto data = random_table(5, rng);
  const auto g = effective_gradient(p, data);
  const auto dv = as_vector(data.table());
  const auto mv = oracle::rbm_distribution(p);
  CHECK(g[0] == 0.0);
  for (Mask m = 1; m < 32; ++m) {
    CHECK(g[m] == doctest::Approx(oracle::moment(dv, 5, m) - oracle::moment(mv, 5, m)).epsilon(1e-12));
  }

  // phi' along a short step of the parameter flow.
  const auto rhs = effective_flow_rhs(p, data);
  const Eigen::VectorXd v = -nll_gradient_exact(p, data);
  const double h = 1e-5;
  const auto plus = oracle_phi(RbmParameters::from_flat(Convention::spin, 5, 3, p.flatten() + h * v));
  const auto minus = oracle_phi(RbmParameters::from_flat(Convention::spin, 5, 3, p.flatten() - h * v));
  double scale = 0.0, err = 0.0;
  for (Mask m = 1; m < 32; ++m) {
    const double fd = (plus[m] - minus[m]) / (2 * h);
    scale = std::max(scale, std::abs(fd));
    err = std::max(err, std::abs(fd - rhs[m]));
  }
  CHECK(err / scale < 1e-6);

  // Descent direction: phi' . grad_phi L = |J^T g|^2 >= 0.
  double dot = 0.0;
  for (Mask m = 1; m < 32; ++m) dot += rhs[m] * g[m];
  CHECK(dot == doctest::Approx(v.squaredNorm()).epsilon(1e-9));
}

TEST_CASE("per-coupling decomposition") {
  std::mt19937_64 rng(2);
  const auto p = oracle::random_rbm(4, 3, 0.6, rng);
  const auto data = random_table(4, rng);
  const auto rhs = effective_flow_rhs(p, data);
  const auto diag = diagonal_approx_rhs(p, data);
  const auto g = effective_gradient(p, data);
  for (Mask i = 1; i < 16; ++i) {
    const auto terms = per_coupling_decomposition(p, data, SubsetIndex(i));
    CHECK(terms.size() == 15);
    double sum = 0.0;
    for (const auto& t : terms) {
      sum += t.contribution;
      CHECK(t.contribution == doctest::Approx(t.overlap * t.mismatch));
      CHECK(std::abs(t.cosine) <= 1.0 + 1e-12);
      if (t.subset == i) {
        CHECK(t.cosine == doctest::Approx(1.0));
        CHECK(t.overlap == doctest::Approx(t.norm * t.norm));
        CHECK(diag[i] == doctest::Approx(t.norm * t.norm * g[i]));
      }
    }
    CHECK(sum == doctest::Approx(rhs[i]).epsilon(1e-10));
  }
  const auto dev = diagonal_deviation(p, data);
  CHECK(dev.n_compared > 0);
  CHECK(dev.median_relative <= dev.max_relative);
  CHECK_THROWS(per_coupling_decomposition(p, data, SubsetIndex()));
}

TEST_CASE("cosine statistics") {
  std::mt19937_64 rng(3);
  const auto p = oracle::random_rbm(6, 8, 0.3, rng);
  const auto s = cosine_overlap_stats(p, 3, 400, 9);
  CHECK(s.n_params == p.n_params());
  CHECK(s.n_pairs + s.n_zero_rows > 0);
  CHECK(s.mean_abs_cos >= 0.0);
  CHECK(s.mean_abs_cos <= 1.0);
  CHECK(s.q10 <= s.q50);
  CHECK(s.q50 <= s.q90);
  const auto again = cosine_overlap_stats(p, 3, 400, 9);
  CHECK(again.mean_abs_cos == s.mean_abs_cos);

  // Small-weight limit: couplings of distinct orders draw on different
  // powers of w, so overlaps shrink with the number of parameters.
  const auto sweep = cosine_scaling_sweep(8, {4, 16, 64}, 3, 300, 0.1, 5);
  CHECK(sweep.points.size() == 3);
  CHECK(sweep.slope < 0.0);
}

TEST_CASE("concentration bound") {
  std::mt19937_64 rng(4);
  const auto p = oracle::random_rbm(5, 3, 0.6, rng);
  const auto j = jacobian_phi_theta(p);
  // Influence of each dE/dtheta_k by finite differences of the oracle energy.
  std::vector<std::vector<double>> deriv;
  const Eigen::VectorXd theta = p.flatten();
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    Eigen::VectorXd a = theta, b = theta;
    a(k) += 1e-5;
    b(k) -= 1e-5;
    const auto ea = energies(RbmParameters::from_flat(Convention::spin, 5, 3, a));
    const auto eb = energies(RbmParameters::from_flat(Convention::spin, 5, 3, b));
    std::vector<double> d(ea.size());
    for (std::size_t c = 0; c < d.size(); ++c) d[c] = (ea[c] - eb[c]) / 2e-5;
    deriv.push_back(d);
  }
  for (int n = 1; n <= 5; ++n) {
    double lhs = 0.0;
    for (std::size_t r = 0; r < j.subsets.size(); ++r) {
      if (std::popcount(j.subsets[r]) >= n) lhs += j.matrix.row(static_cast<Eigen::Index>(r)).squaredNorm();
    }
    double total = 0.0;
    for (const auto& d : deriv) {
      for (int i = 0; i < 5; ++i) total += oracle::influence_by_definition(d, i);
    }
    const auto b = proposition1_check(p, n);
    CHECK(b.lhs == doctest::Approx(lhs).epsilon(1e-9));
    CHECK(b.rhs == doctest::Approx(total / n).epsilon(1e-6));
    CHECK(b.lhs <= b.rhs * (1 + 1e-12));
    CHECK(b.slack == doctest::Approx(b.rhs - b.lhs));
  }
  // Tight on a pure degree-n function.
  std::vector<double> only(8, 0.0);
  only[0b111] = 2.0;
  const auto tight = proposition1_check({FourierSpectrum(SubsetVector(3, only))}, 3);
  CHECK(tight.lhs == doctest::Approx(4.0));
  CHECK(tight.rhs == doctest::Approx(4.0));
}

TEST_CASE("hessians and fixed points") {
  std::mt19937_64 rng(5);
  const auto p = oracle::random_rbm(4, 3, 0.6, rng);
  const auto data = random_table(4, rng);
  const auto grad = [&](const Eigen::VectorXd& t) {
    return Eigen::VectorXd(nll_gradient_exact(RbmParameters::from_flat(Convention::spin, 4, 3, t), data));
  };
  CHECK(oracle::relative_error(hessian_theta(p, data), oracle::central_jacobian(grad, p.flatten(), 1e-5)) < 1e-5);

  // Model matches data: direct and sandwich Hessians agree, PSD with a kernel.
  const Distribution own = model_distribution(p);
  CHECK((hessian_theta(p, own) - hessian_sandwich(p)).cwiseAbs().maxCoeff() < 1e-10);
  const auto consistent = classify_fixed_point(p, own, 1e-8);
  CHECK(consistent.classification == FixedPointKind::data_consistent);
  CHECK(consistent.n_negative == 0);
  CHECK(consistent.n_zero >= p.n_params() - 15);
  CHECK(consistent.marginally_stable);
  CHECK(consistent.max_kernel_residual < 1e-6);
  CHECK(consistent.sandwich_difference < 1e-10);

  // Spurious point: flow is stationary but third-order moments are missed.
  const Distribution chain = model_distribution(three_body_chain(4, 0.8));
  const auto s = spurious_point(chain, 3);
  const auto sp = classify_fixed_point(s, chain, 1e-8);
  CHECK(sp.classification == FixedPointKind::spurious);
  CHECK(sp.theta_grad_sup < 1e-8);
  CHECK(sp.phi_grad_sup > 1e-2);
  CHECK(std::isnan(sp.sandwich_difference));

  CHECK(classify_fixed_point(p, data, 1e-8).classification == FixedPointKind::not_stationary);
  CHECK(to_string(FixedPointKind::spurious) == "spurious");

  OptimizerConfig oc;
  oc.tolerance = 1e-11;
  const auto fitted = fit(data, oc);
  const auto hp = classify_fixed_point(fitted.model, data, 1e-8);
  CHECK(hp.classification == FixedPointKind::data_consistent);
  CHECK(hp.n_zero == 0);
  CHECK(hp.min_eigenvalue > 0.0);
}

TEST_CASE("moment dynamics") {
  std::mt19937_64 rng(6);
  const auto p = oracle::random_rbm(4, 3, 0.4, rng);
  const auto data = random_table(4, rng);
  const auto rep = moment_dynamics_check(p, data, 1e-5);
  CHECK(rep.relative_error < 1e-6);
  CHECK(rep.covariance_identity_deviation >= 0.0);
  // Uniform model: the moment covariance is exactly the identity.
  const auto zero = RbmParameters::zeros(4, 3);
  CHECK(moment_dynamics_check(zero, data, 1e-5).covariance_identity_deviation < 1e-12);
}

TEST_CASE("learning-time report") {
  TrainingTrajectory t(3, false);
  t.append(record(0, {0.0, 0.0, 0.0}));
  t.append(record(10, {0.6, 0.1, 0.0}));
  t.append(record(20, {1.0, 0.4, 0.022}));
  t.append(record(30, {1.0, 0.5, 0.05}));
  t.append(record(40, {1.0, 0.5, 0.04}));
  const auto r = dsb_report(t);
  REQUIRE(r.orders.size() == 3);
  CHECK(r.orders[0].step == 10);
  CHECK(r.orders[1].step == 20);
  CHECK(r.orders[2].step == 20);
  CHECK(r.orders[2].overshoot == doctest::Approx(0.05 / 0.04));
  CHECK(r.ordered);
  CHECK(!r.strictly_ordered);
  const auto peak = dsb_report(t, 0.5, 1e-3, DsbReference::peak_value);
  CHECK(peak.orders[2].step == 30);
  CHECK(peak.strictly_ordered);
  const auto floored = dsb_report(t, 0.5, 0.1);
  CHECK(!floored.orders[2].above_floor);
  CHECK(floored.strictly_ordered);
  CHECK_THROWS(dsb_report(TrainingTrajectory(3, false)));
  CHECK_THROWS(dsb_report(t, 0.0));

  TrainingTrajectory late(2, false);
  late.append(record(0, {0.0, 0.0}));
  late.append(record(5, {0.0, 1.0}));
  late.append(record(9, {1.0, 1.0}));
  CHECK(!dsb_report(late).ordered);
}

TEST_CASE("training") {
  const auto truth = three_body_chain(5, 0.6);
  const Distribution data = model_distribution(truth);
  std::mt19937_64 rng(7);
  RbmInitConfig ic{5, 8, Convention::spin, 1e-4, 3};
  const auto init0 = init(ic);
  TrainConfig cfg;
  cfg.step = 0.1;
  cfg.n_steps = 300;
  cfg.log_every = 50;
  const auto res = train(init0, data, cfg);
  const auto& recs = res.trajectory.records();
  REQUIRE(recs.size() == 7);
  CHECK(recs.front().step == 0);
  CHECK(recs.back().step == 300);
  CHECK(recs.back().time == doctest::Approx(30.0));
  CHECK(recs.back().loglik > recs.front().loglik);
  CHECK(recs.back().loglik == doctest::Approx(-neg_log_likelihood(res.params, data)).epsilon(1e-10));
  // Logged couplings agree with an independent extraction.
  const auto phi = oracle_phi(res.params);
  double f3 = 0.0;
  for (Mask m = 1; m < 32; ++m) {
    if (std::popcount(m) == 3) f3 += phi[m] * phi[m];
  }
  CHECK(recs.back().frobenius[2] == doctest::Approx(std::sqrt(f3)).epsilon(1e-9));
  CHECK(train(init0, data, cfg).params.flatten() == res.params.flatten());

  TrainConfig bad = cfg;
  bad.step = 1e307;
  CHECK_THROWS_AS(train(oracle::random_rbm(5, 8, 1.0, rng), data, bad),
                  NumericError);
  bad = cfg;
  bad.step = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  // HOBM flow approaches the convex optimum.
  TrainConfig hc = cfg;
  hc.step = 0.05;  // the moment covariance grows well past 1 near the optimum
  hc.n_steps = 5000;
  const auto hres = train(HigherOrderModel::zeros(5), data, hc);
  OptimizerConfig oc;
  oc.tolerance = 1e-11;
  CHECK(neg_log_likelihood(hres.model, data) - neg_log_likelihood(fit(data, oc).model, data) < 1e-6);
}
