#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ebm/error.hpp"
#include "ebm/kernels.hpp"

using namespace ebm::kernels;

namespace {

std::vector<double> random_vector(std::size_t n, double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

double ulp_distance(double a, double b) {
  if (a == b) return 0.0;
  const double scale = std::max(std::abs(a), std::abs(b));
  return std::abs(a - b) / (scale * 2.220446049250313e-16);
}

}  // namespace

TEST_CASE("scalar fwht matches the definition of the Hadamard product") {
  const std::size_t n = 16;
  auto v = random_vector(n, 1.0, 1);
  auto w = v;
  scalar::fwht(w.data(), n);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += ((__builtin_popcountll(j & k) & 1) ? -1.0 : 1.0) * v[j];
    CHECK(w[k] == doctest::Approx(acc).epsilon(1e-14));
  }
}

TEST_CASE("scalar log_cosh is accurate over a wide range") {
  for (double x : {0.0, 1e-8, -0.3, 2.5, -19.0, 40.0, 700.0, -1e6}) {
    double out = 0.0;
    scalar::log_cosh(&x, &out, 1);
    const double ref = std::abs(x) > 30 ? std::abs(x) - std::log(2.0) : std::log(std::cosh(x));
    CHECK(out == doctest::Approx(ref).epsilon(1e-14));
  }
}

TEST_CASE("ISA selection") {
  CHECK(isa_supported(Isa::scalar));
  CHECK(parse_isa("scalar") == Isa::scalar);
  CHECK_THROWS_AS(parse_isa("sse9"), ebm::Error);
  const Isa before = active_isa();
  set_active_isa(Isa::scalar);
  CHECK(active_isa() == Isa::scalar);
  set_active_isa(before);
}

TEST_CASE("span wrappers validate lengths") {
  std::vector<double> v(12);
  CHECK_THROWS_AS(fwht(v), ebm::DimensionError);
  std::vector<double> a(4), b(5);
  CHECK_THROWS_AS(log_cosh(a, b), ebm::DimensionError);
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  if (!isa_supported(Isa::avx2)) {
    MESSAGE("avx2 not available on this machine; equivalence skipped");
    return;
  }
  const auto& s = table(Isa::scalar);
  const auto& v = table(Isa::avx2);
  for (std::size_t n : {1u, 2u, 4u, 8u, 64u, 1024u, 1u << 14}) {
    auto a = random_vector(n, 1.0, n);
    auto b = a;
    s.fwht(a.data(), n);
    v.fwht(b.data(), n);
    CHECK(a == b);  // same butterfly order, bit-identical
  }
  for (std::size_t n : {1u, 3u, 4u, 7u, 33u, 1000u}) {
    const auto src = random_vector(n, 1.0, 7 + n);
    const auto row = random_vector(n, 1.0, 9 + n);
    std::vector<double> a(n), b(n);
    s.add_scaled(a.data(), src.data(), row.data(), 0.37, n);
    v.add_scaled(b.data(), src.data(), row.data(), 0.37, n);
    CHECK(a == b);
  }
  for (double scale : {0.1, 3.0, 50.0}) {
    for (std::size_t n : {1u, 5u, 4096u}) {
      auto x = random_vector(n, scale, 11 + n);
      x[0] = 0.0;
      std::vector<double> la(n), lb(n), ta(n), tb(n), lc(n);
      s.log_cosh_tanh(x.data(), la.data(), ta.data(), n);
      v.log_cosh_tanh(x.data(), lb.data(), tb.data(), n);
      v.log_cosh(x.data(), lc.data(), n);
      double worst = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        worst = std::max({worst, ulp_distance(la[k], lb[k]), ulp_distance(ta[k], tb[k]), ulp_distance(lb[k], lc[k])});
        // tiny absolute values near x = 0 make relative ulps meaningless
        if (std::abs(la[k]) < 1e-300) CHECK(std::abs(lb[k]) < 1e-300);
      }
      CHECK(worst < 8.0);
    }
  }
}
