#include <doctest.h>

#include <cmath>
#include <random>

#include "ebm/data.hpp"
#include "ebm/error.hpp"
#include "ebm/hobm.hpp"
#include "oracles.hpp"

using namespace ebm;

namespace {

std::vector<double> random_phi(int n, double scale, std::mt19937_64& rng) {
  auto phi = oracle::random_values(n, rng, scale);
  phi[0] = 0.0;
  return phi;
}

HigherOrderModel dense_model(int n, std::vector<double> phi) { return HigherOrderModel(EffectiveCouplings(n, std::move(phi))); }

Distribution table(int n, std::vector<double> p) { return ProbabilityTable(n, std::move(p)); }

}  // namespace

TEST_CASE("energy") {
  const auto zero = HigherOrderModel::zeros(3);
  for (Mask c = 0; c < 8; ++c) CHECK(energy(zero, SpinConfiguration::from_code(c, 3)) == 0.0);
  const auto pair = HigherOrderModel(EffectiveCouplings(3, 2, {{0b011, 1.0}}));
  for (Mask c = 0; c < 8; ++c) {
    CHECK(energy(pair, SpinConfiguration::from_code(c, 3)) == doctest::Approx(-oracle::chi(c, 0b011, 3)));
  }
  CHECK(energy(three_body_chain(4, 0.5), SpinConfiguration({1, 1, 1, 1})) == doctest::Approx(-2.0));
  CHECK_THROWS_AS(energy(pair, SpinConfiguration({1, 1})), DimensionError);

  std::mt19937_64 rng(1);
  const auto phi = random_phi(4, 0.5, rng);
  const auto ref = oracle::hobm_energy(phi, 4);
  const auto lib = energy_table(dense_model(4, phi));
  for (Mask c = 0; c < 16; ++c) CHECK(lib[c] == doctest::Approx(ref[c]).epsilon(1e-12));
}

TEST_CASE("log partition and model distribution") {
  CHECK(log_partition(HigherOrderModel::zeros(5)) == doctest::Approx(5 * std::log(2.0)));
  const double h = 0.8;
  const auto field = HigherOrderModel(EffectiveCouplings(4, 1, {{0b0001, h}}));
  CHECK(log_partition(field) == doctest::Approx(std::log(16 * std::cosh(h))));

  std::mt19937_64 rng(2);
  const auto phi = random_phi(3, 0.3, rng);
  const auto e = oracle::hobm_energy(phi, 3);
  double z = 0.0;
  for (double v : e) z += std::exp(-v);
  CHECK(log_partition(dense_model(3, phi)) == doctest::Approx(std::log(z)).epsilon(1e-13));

  const auto flat = model_distribution(HigherOrderModel::zeros(3));
  for (double p : flat.probabilities()) CHECK(p == doctest::Approx(0.125));
  const auto chain = three_body_chain(4, 0.5);
  const auto pt = model_distribution(chain);
  const auto ref = oracle::boltzmann(energy_table(chain), -1.0);
  double total = 0.0;
  for (Mask c = 0; c < 16; ++c) {
    CHECK(pt[c] == doctest::Approx(ref[c]).epsilon(1e-13));
    total += pt[c];
  }
  CHECK(std::abs(total - 1.0) < 1e-12);
  CHECK(pt.strictly_positive());

  // Large couplings stay finite thanks to the max shift.
  const auto strong = HigherOrderModel(EffectiveCouplings(3, 1, {{0b001, 800.0}}));
  CHECK(std::isfinite(log_partition(strong)));
}

TEST_CASE("moments") {
  const auto uniform = Distribution(ProbabilityTable::uniform(4));
  const auto um = moments(uniform);
  for (double m : um.values().subspan(1)) CHECK(m == doctest::Approx(0.0));
  std::vector<double> point(16, 0.0);
  point[15] = 1.0;
  const auto pm = moments(table(4, point));
  for (Mask m = 1; m < 16; ++m) CHECK(pm[m] == doctest::Approx(1.0));

  std::mt19937_64 rng(3);
  const auto p = oracle::random_probabilities(5, rng);
  const auto lib = moments(table(5, p));
  for (Mask m = 1; m < 32; ++m) CHECK(lib[m] == doctest::Approx(oracle::moment(p, 5, m)).epsilon(1e-12));
  const auto trunc = moments(table(5, p), 2);
  CHECK(!trunc.is_dense());
  CHECK(trunc[0b00011] == doctest::Approx(oracle::moment(p, 5, 0b00011)));
  CHECK(trunc[0b00111] == 0.0);

  // Samples: empirical means.
  const EmpiricalSamples s(3, {0b111, 0b001, 0b001, 0b110});
  const auto sm = moments(Distribution(s));
  CHECK(sm[0b001] == doctest::Approx((1 + 1 + 1 - 1) / 4.0));
  CHECK(sm[0b110] == doctest::Approx((1 + 1 + 1 + 1) / 4.0));
}

TEST_CASE("negative log-likelihood") {
  CHECK(neg_log_likelihood(HigherOrderModel::zeros(4), ProbabilityTable::uniform(4)) ==
        doctest::Approx(4 * std::log(2.0)));
  std::mt19937_64 rng(4);
  const auto model = dense_model(4, random_phi(4, 0.4, rng));
  const auto own = model_distribution(model);
  CHECK(neg_log_likelihood(model, own) == doctest::Approx(entropy(own)).epsilon(1e-12));

  const auto p = oracle::random_probabilities(4, rng);
  const auto e = energy_table(model);
  double ref = log_partition(model);
  for (Mask c = 0; c < 16; ++c) ref += p[c] * e[c];
  CHECK(neg_log_likelihood(model, table(4, p)) == doctest::Approx(ref).epsilon(1e-12));
  // NLL = KL(data || model) + H(data).
  const auto pd = ProbabilityTable(4, p);
  CHECK(neg_log_likelihood(model, pd) == doctest::Approx(kl_divergence(pd, own) + entropy(pd)).epsilon(1e-12));
}

TEST_CASE("gradient") {
  std::mt19937_64 rng(5);
  const auto model = dense_model(4, random_phi(4, 0.4, rng));
  const auto g0 = nll_gradient(model, model_distribution(model));
  for (double g : g0.values()) CHECK(std::abs(g) < 1e-12);

  const auto data = table(4, oracle::random_probabilities(4, rng));
  const auto g = nll_gradient(model, data);
  const auto phi = model.couplings().values();
  const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(phi.data(), 16);
  const auto nll = [&](const Eigen::VectorXd& v) {
    std::vector<double> q(v.data(), v.data() + 16);
    q[0] = 0.0;
    return neg_log_likelihood(dense_model(4, q), data);
  };
  const Eigen::VectorXd fd = oracle::central_gradient(nll, x, 1e-5);
  for (Mask m = 1; m < 16; ++m) CHECK(std::abs(fd(m) - g[m]) <= 1e-6 * std::max(1.0, std::abs(g[m])));

  const double h = 0.6;
  const auto field = HigherOrderModel(EffectiveCouplings(3, 1, {{0b001, h}}));
  CHECK(nll_gradient(field, ProbabilityTable::uniform(3))[0b001] == doctest::Approx(std::tanh(h)));
}

TEST_CASE("hessian is the parity covariance") {
  const Eigen::MatrixXd id = nll_hessian(HigherOrderModel::zeros(3));
  CHECK((id - Eigen::MatrixXd::Identity(7, 7)).cwiseAbs().maxCoeff() < 1e-14);

  std::mt19937_64 rng(6);
  const auto model = dense_model(4, random_phi(4, 0.5, rng));
  const Eigen::MatrixXd hs = nll_hessian(model);
  CHECK((hs - hs.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(hs).eigenvalues().minCoeff() > 0.0);

  const auto m3 = dense_model(3, random_phi(3, 0.5, rng));
  const auto data = table(3, oracle::random_probabilities(3, rng));
  const auto grad = [&](const Eigen::VectorXd& v) {
    std::vector<double> q(8, 0.0);
    for (int k = 0; k < 7; ++k) q[static_cast<std::size_t>(k + 1)] = v(k);
    const auto g = nll_gradient(dense_model(3, q), data);
    Eigen::VectorXd out(7);
    for (int k = 0; k < 7; ++k) out(k) = g[static_cast<Mask>(k + 1)];
    return out;
  };
  Eigen::VectorXd x(7);
  for (int k = 0; k < 7; ++k) x(k) = m3.couplings()[static_cast<Mask>(k + 1)];
  CHECK(oracle::relative_error(oracle::central_jacobian(grad, x, 1e-5), nll_hessian(m3)) < 1e-4);

  const int before = kHessianSiteLimit;
  CHECK(before == 10);
  CHECK_THROWS_AS(nll_hessian(HigherOrderModel::zeros(11)), LimitError);
}

TEST_CASE("convex fit") {
  const auto r0 = fit(ProbabilityTable::uniform(4), OptimizerConfig{});
  CHECK(r0.converged);
  CHECK(r0.model.couplings().sup_norm() < 1e-12);

  std::mt19937_64 rng(7);
  const auto truth = dense_model(4, random_phi(4, 0.4, rng));
  OptimizerConfig cfg;
  cfg.tolerance = 1e-10;
  const auto r = fit(model_distribution(truth), cfg);
  CHECK(r.converged);
  for (Mask m = 1; m < 16; ++m) CHECK(std::abs(r.model.couplings()[m] - truth.couplings()[m]) < 1e-6);

  // Accepted steps never increase the objective.
  OptimizerConfig logged;
  logged.log_every = 1;
  const auto rl = fit(table(4, oracle::random_probabilities(4, rng)), logged);
  const auto& rec = rl.trajectory.records();
  for (std::size_t k = 1; k < rec.size(); ++k) CHECK(rec[k].loglik >= rec[k - 1].loglik - 1e-14);

  CHECK_THROWS_AS(fit(ProbabilityTable(2, {0.5, 0.5, 0.0, 0.0}), OptimizerConfig{}), DomainError);
  OptimizerConfig ridge;
  ridge.ridge_lambda = 1e-2;
  const auto rr = fit(ProbabilityTable(2, {1.0, 0.0, 0.0, 0.0}), ridge);
  CHECK(rr.converged);
  CHECK(rr.model.couplings().sup_norm() < 1e3);

  OptimizerConfig few;
  few.max_iters = 3;
  const auto rf = fit(model_distribution(truth), few);
  CHECK(!rf.converged);
  CHECK(rf.iterations == 3);
  CHECK(rf.final_mismatch > 0.0);
}

TEST_CASE("fit recovers the three-body chain") {
  OptimizerConfig cfg;
  cfg.tolerance = 1e-9;
  const auto r = fit(model_distribution(three_body_chain(6, 0.5)), cfg);
  CHECK(r.converged);
  for (Mask m = 1; m < 64; ++m) {
    const bool chain = std::popcount(m) == 3 && (m == 0b000111 || m == 0b001110 || m == 0b011100 || m == 0b111000 ||
                                                 m == 0b110001 || m == 0b100011);
    CHECK(std::abs(r.model.couplings()[m] - (chain ? 0.5 : 0.0)) < 1e-6);
  }
}

TEST_CASE("truncated fit matches moments up to its order") {
  std::mt19937_64 rng(8);
  const auto data = table(5, oracle::random_probabilities(5, rng));
  OptimizerConfig cfg;
  cfg.max_order = 2;
  const auto r = fit(data, cfg);
  CHECK(r.converged);
  CHECK(!r.model.is_dense());
  const auto dm = moments(data);
  const auto mm = moments(model_distribution(r.model));
  for (Mask m = 1; m < 32; ++m) {
    if (std::popcount(m) <= 2) CHECK(std::abs(dm[m] - mm[m]) < 1e-7);
  }
}

TEST_CASE("couplings from a distribution") {
  const auto flat = couplings_from_distribution(ProbabilityTable::uniform(3));
  for (double v : flat.couplings().values()) CHECK(std::abs(v) < 1e-15);
  const double beta = 0.7;
  std::vector<double> w(4);
  for (Mask c = 0; c < 4; ++c) w[c] = std::exp(beta * oracle::chi(c, 0b11, 2));
  const auto m = couplings_from_distribution(ProbabilityTable::from_weights(2, w));
  CHECK(m.couplings()[0b11] == doctest::Approx(beta));
  CHECK(std::abs(m.couplings()[0b01]) < 1e-15);

  std::mt19937_64 rng(9);
  for (int n : {4, 8}) {
    const ProbabilityTable p(n, oracle::random_probabilities(n, rng));
    CHECK(kl_divergence(p, model_distribution(couplings_from_distribution(p))) < 1e-12);
  }
  CHECK_THROWS_AS(couplings_from_distribution(ProbabilityTable(1, {1.0, 0.0})), DomainError);
}

TEST_CASE("distribution handles") {
  CHECK_THROWS(ProbabilityTable(2, {0.5, 0.5, 0.1, 0.0}));
  CHECK_THROWS(ProbabilityTable(2, {0.5, 0.6, -0.1, 0.0}));
  const EmpiricalSamples s(2, {0b00, 0b11, 0b11, 0b11});
  const Distribution d(s);
  CHECK(!d.is_table());
  CHECK(d.to_table()[0b11] == doctest::Approx(0.75));
  CHECK(!d.strictly_positive());
  CHECK_THROWS(EmpiricalSamples(2, {0b100}));
}
