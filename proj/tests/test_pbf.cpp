#include <doctest.h>

#include <cmath>
#include <random>

#include "ebm/error.hpp"
#include "ebm/pbf.hpp"
#include "oracles.hpp"

using namespace ebm;

namespace {

EnergyOracle table_oracle(int n, const std::vector<double>& f) { return EnergyOracle::from_table(n, f); }

}  // namespace

TEST_CASE("parity") {
  const SpinConfiguration s({1, -1, 1});
  CHECK(parity(s, SubsetIndex()) == 1.0);
  CHECK(parity(s, SubsetIndex::of({0, 1})) == -1.0);
  const SpinConfiguration t({-1, 1});
  const auto i = SubsetIndex::of({0});
  const auto j = SubsetIndex::of({0, 1});
  CHECK(parity(t, i) * parity(t, j) == parity(t, i.symmetric_difference(j)));
  CHECK(parity(t, i.symmetric_difference(j)) == 1.0);
  CHECK_THROWS_AS(parity(t, SubsetIndex::of({2})), DimensionError);
  CHECK_THROWS_AS(SpinConfiguration({1, 0}), DomainError);
}

TEST_CASE("configuration encoding") {
  const SpinConfiguration s({1, -1, -1, 1});
  CHECK(s.code() == 0b1001);
  CHECK(SpinConfiguration::from_code(0b1001, 4) == s);
  const std::vector<int> v{1, 0, 0, 1};
  CHECK(SpinConfiguration::from_binary(v) == s);
  CHECK(s.to_binary() == v);
  for (Mask c = 0; c < 16; ++c) {
    for (Mask m = 0; m < 16; ++m) CHECK(parity_sign(c, m) == oracle::chi(c, m, 4));
  }
}

TEST_CASE("direct coefficient on simple functions") {
  const auto constant = EnergyOracle(3, [](const SpinConfiguration&) { return 2.5; });
  CHECK(fourier_coefficient_direct(constant, SubsetIndex()) == doctest::Approx(2.5));
  CHECK(fourier_coefficient_direct(constant, SubsetIndex::of({1})) == doctest::Approx(0.0));
  const auto pair = EnergyOracle(3, [](const SpinConfiguration& s) { return double(s[0] * s[1]); });
  for (Mask m = 0; m < 8; ++m) {
    CHECK(fourier_coefficient_direct(pair, SubsetIndex(m)) == doctest::Approx(m == 0b011 ? 1.0 : 0.0));
  }
}

TEST_CASE("fast transform matches direct summation") {
  std::mt19937_64 rng(3);
  for (int n : {1, 3, 8}) {
    const auto f = oracle::random_values(n, rng);
    const auto ref = oracle::spectrum(f, n);
    const FourierSpectrum s = fast_transform(f);
    const auto via_lib = table_oracle(n, f);
    for (Mask m = 0; m < f.size(); ++m) {
      CHECK(std::abs(s[m] - ref[m]) < 1e-12);
      if (n <= 3) CHECK(std::abs(fourier_coefficient_direct(via_lib, SubsetIndex(m)) - ref[m]) < 1e-12);
    }
  }
  std::vector<double> zeros(16, 0.0);
  const auto zero_spectrum = fast_transform(zeros);
  for (double v : zero_spectrum.values()) CHECK(v == 0.0);
  std::vector<double> dictator(16);
  for (Mask c = 0; c < 16; ++c) dictator[c] = oracle::chi(c, 1, 4);
  const auto d = fast_transform(dictator);
  for (Mask m = 0; m < 16; ++m) CHECK(d[m] == doctest::Approx(m == 1 ? 1.0 : 0.0));
  std::vector<double> bad(12);
  CHECK_THROWS_AS(fast_transform(bad), DimensionError);
}

TEST_CASE("inverse transform") {
  std::mt19937_64 rng(4);
  const auto f = oracle::random_values(10, rng);
  const auto back = inverse_transform(fast_transform(f));
  double err = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) err = std::max(err, std::abs(back[k] - f[k]));
  CHECK(err < 1e-12);

  FourierSpectrum one = FourierSpectrum(SubsetVector::zeros_dense(3));
  one.at(0b111) = 0.5;
  const auto vals = inverse_transform(one);
  for (Mask c = 0; c < 8; ++c) CHECK(vals[c] == doctest::Approx(0.5 * oracle::chi(c, 0b111, 3)));
  CHECK_THROWS(inverse_transform(FourierSpectrum(SubsetVector::zeros_truncated(3, 2))));
  CHECK(evaluate_expansion(one, Mask{0b101}) == doctest::Approx(0.5 * oracle::chi(0b101, 0b111, 3)));
}

TEST_CASE("inner product, orthonormality, Plancherel and Parseval") {
  for (Mask i = 0; i < 64; ++i) {
    for (Mask j = 0; j < 64; j += 7) {
      const auto fi = EnergyOracle(6, [i](const SpinConfiguration& s) { return parity(s, SubsetIndex(i)); });
      const auto fj = EnergyOracle(6, [j](const SpinConfiguration& s) { return parity(s, SubsetIndex(j)); });
      CHECK(inner_product(fi, fj) == (i == j ? 1.0 : 0.0));
    }
  }
  std::mt19937_64 rng(5);
  const auto f = oracle::random_values(6, rng);
  const auto g = oracle::random_values(6, rng);
  const auto fs = fast_transform(f);
  const auto gs = fast_transform(g);
  double plancherel = 0.0, parseval = 0.0;
  for (Mask m = 0; m < 64; ++m) {
    plancherel += fs[m] * gs[m];
    parseval += fs[m] * fs[m];
  }
  CHECK(std::abs(inner_product(table_oracle(6, f), table_oracle(6, g)) - plancherel) < 1e-12);
  const double self = inner_product(table_oracle(6, f), table_oracle(6, f));
  CHECK(std::abs(self - parseval) / self < 1e-12);
  const auto c = EnergyOracle(4, [](const SpinConfiguration&) { return 3.0; });
  CHECK(inner_product(c, c) == doctest::Approx(9.0));
  CHECK_THROWS_AS(inner_product(c, table_oracle(6, f)), DimensionError);
}

TEST_CASE("influence") {
  std::vector<double> dictator(4), pair(4);
  for (Mask c = 0; c < 4; ++c) {
    dictator[c] = oracle::chi(c, 0b01, 2);
    pair[c] = oracle::chi(c, 0b11, 2);
  }
  CHECK(influence(fast_transform(dictator), 0) == doctest::Approx(1.0));
  CHECK(influence(fast_transform(dictator), 1) == doctest::Approx(0.0));
  CHECK(influence(fast_transform(pair), 0) == doctest::Approx(1.0));
  CHECK(influence(fast_transform(pair), 1) == doctest::Approx(1.0));
  CHECK_THROWS(influence(fast_transform(pair), 2));

  std::mt19937_64 rng(6);
  for (int n : {5, 8}) {
    const auto f = oracle::random_values(n, rng);
    const auto s = fast_transform(f);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double inf = influence(s, i);
      CHECK(std::abs(inf - oracle::influence_by_definition(f, i)) < 1e-12);
      sum += inf;
    }
    CHECK(std::abs(total_influence(s) - sum) < 1e-12);
  }
}

TEST_CASE("total influence and spectral concentration") {
  std::vector<double> triple(8);
  for (Mask c = 0; c < 8; ++c) triple[c] = oracle::chi(c, 0b111, 3);
  CHECK(total_influence(fast_transform(triple)) == doctest::Approx(3.0));
  CHECK(total_influence(fast_transform(std::vector<double>(8, 4.0))) == doctest::Approx(0.0));

  std::mt19937_64 rng(7);
  const auto f = oracle::random_values(8, rng);
  const auto s = fast_transform(f);
  const double inf = total_influence(s);
  for (int n = 1; n <= 8; ++n) {
    CHECK(spectral_weight_above(s, n) <= inf / n + 1e-12);
    double direct = 0.0;
    for (Mask m = 0; m < 256; ++m) {
      if (std::popcount(m) >= n) direct += s[m] * s[m];
    }
    CHECK(spectral_weight_above(s, n) == doctest::Approx(direct).epsilon(1e-12));
  }
  CHECK_THROWS(spectral_weight_above(s, 0));

  // Degree-homogeneous: equality at its degree.
  for (int k = 1; k <= 5; ++k) {
    std::vector<double> spec(std::size_t{1} << 6, 0.0);
    std::normal_distribution<double> normal;
    for (Mask m = 0; m < spec.size(); ++m) {
      if (std::popcount(m) == k) spec[m] = normal(rng);
    }
    const FourierSpectrum hs(6, spec);
    CHECK(spectral_weight_above(hs, k) == doctest::Approx(total_influence(hs) / k).epsilon(1e-12));
  }

  std::vector<double> linear(16, 0.0);
  for (Mask c = 0; c < 16; ++c) linear[c] = 0.3 * oracle::chi(c, 1, 4) - 0.2 * oracle::chi(c, 4, 4);
  CHECK(spectral_weight_above(fast_transform(linear), 2) == doctest::Approx(0.0));
}

TEST_CASE("effective couplings from an energy") {
  const auto f = EnergyOracle(3, [](const SpinConfiguration& s) { return -0.7 * s[0] * s[1]; });
  const auto phi = effective_couplings_from_energy(f);
  for (Mask m = 0; m < 8; ++m) CHECK(phi[m] == doctest::Approx(m == 0b011 ? 0.7 : 0.0));
  const auto constant = effective_couplings_from_energy(EnergyOracle(3, [](const SpinConfiguration&) { return 5.0; }));
  for (double v : constant.values()) CHECK(v == 0.0);

  const int n = 6;
  const auto chain = EnergyOracle(n, [n](const SpinConfiguration& s) {
    double e = 0.0;
    for (int i = 0; i < n; ++i) e -= 0.5 * s[i] * s[(i + 1) % n] * s[(i + 2) % n];
    return e;
  });
  const auto c = effective_couplings_from_energy(chain);
  int nonzero = 0;
  for (Mask m = 1; m < 64; ++m) {
    if (std::abs(c[m]) > 1e-12) {
      ++nonzero;
      CHECK(c[m] == doctest::Approx(0.5));
      CHECK(std::popcount(m) == 3);
    }
  }
  CHECK(nonzero == n);
}

TEST_CASE("subset vectors") {
  SubsetVector t(5, 2, {{0b00011, 1.0}, {0b00100, -2.0}});
  CHECK(t[0b00011] == 1.0);
  CHECK(t[0b00101] == 0.0);
  CHECK(t.norm_at_order(1) == doctest::Approx(2.0));
  CHECK(t.sup_norm() == doctest::Approx(2.0));
  CHECK_THROWS(SubsetVector(5, 2, {{0b00111, 1.0}}));
  CHECK_THROWS(SubsetVector(5, 2, {{0b1, 1.0}, {0b1, 2.0}}));
  CHECK_THROWS(SubsetVector(3, std::vector<double>(7)));
  CHECK_THROWS(EffectiveCouplings(2, std::vector<double>{1.0, 0.0, 0.0, 0.0}));
  CHECK(count_subsets_up_to(6, 2) == 21);
  CHECK(subsets_up_to(6, 2).size() == 21);
  const auto dense = SubsetVector(3, std::vector<double>{0, 1, 2, 3, 4, 5, 6, 7});
  const auto trunc = dense.truncated_to(1);
  CHECK(trunc.size() == 4);  // the empty set has order 0 and is kept
  CHECK(trunc[0b100] == 4.0);
  CHECK(trunc[0b011] == 0.0);
}

TEST_CASE("enumeration limit is enforced") {
  const int before = enumeration_limit();
  set_enumeration_limit(4);
  CHECK_THROWS_AS(require_enumerable(5, "test"), LimitError);
  CHECK_THROWS_AS(fourier_coefficient_direct(EnergyOracle(5, [](const SpinConfiguration&) { return 0.0; }),
                                             SubsetIndex()),
                  LimitError);
  set_enumeration_limit(before);
  // Expansions of truncated spectra work beyond the limit.
  SubsetVector big(40, 1, {{Mask{1} << 39, 2.0}});
  CHECK(evaluate_expansion(big, Mask{1} << 39) == 2.0);
  CHECK(evaluate_expansion(big, Mask{0}) == -2.0);
}
