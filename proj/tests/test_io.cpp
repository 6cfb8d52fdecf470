#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "ebm/data.hpp"
#include "ebm/error.hpp"
#include "ebm/io.hpp"
#include "oracles.hpp"

using namespace ebm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ebm_test_io";
  fs::create_directories(dir);
  return dir / name;
}

bool same(const SubsetVector& a, const SubsetVector& b) {
  if (a.n_sites() != b.n_sites() || a.is_dense() != b.is_dense() || a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a.mask_at(k) != b.mask_at(k) || a.value_at(k) != b.value_at(k)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("subset vectors round trip bit-exactly") {
  std::mt19937_64 rng(1);
  auto vals = oracle::random_values(5, rng);
  vals[3] = 1e-300;
  vals[4] = -0.1;
  const SubsetVector dense(5, vals);
  CHECK(same(io::subset_vector_from_json(io::subset_vector_to_json(dense)), dense));
  std::stringstream csv;
  io::write_subset_csv(csv, dense);
  CHECK(same(io::read_subset_csv(csv), dense));

  const SubsetVector trunc(6, 2, {{0b11, 0.25}, {0b100, -1.0 / 3.0}, {0b100001, 2.0}});
  CHECK(same(io::subset_vector_from_json(io::subset_vector_to_json(trunc)), trunc));
  std::stringstream csv2;
  io::write_subset_csv(csv2, trunc);
  CHECK(same(io::read_subset_csv(csv2), trunc));

  // Dense input with missing entries reads them as zero.
  const auto sparse = io::subset_vector_from_json(io::json::parse(R"({"n_sites": 2, "entries": [[3, 1.5]]})"));
  CHECK(sparse.is_dense());
  CHECK(sparse[0b11] == 1.5);
  CHECK(sparse[0b01] == 0.0);

  CHECK_THROWS_AS(io::subset_vector_from_json(io::json::parse(R"({"n_sites": 2, "entries": [[4, 1.0]]})")),
                  ConfigError);
  CHECK_THROWS_AS(io::subset_vector_from_json(io::json::parse(R"({"entries": []})")), ConfigError);
  std::stringstream bad("# n_sites=3\nmask,value\n1;2\n");
  CHECK_THROWS_AS(io::read_subset_csv(bad), ConfigError);
}

TEST_CASE("model checkpoints") {
  std::mt19937_64 rng(2);
  const auto chain = three_body_chain(7, 0.3);
  const auto back = io::hobm_from_json(io::hobm_to_json(chain));
  CHECK(same(back.couplings(), chain.couplings()));

  auto phi = oracle::random_values(3, rng);
  phi[0] = 0.0;
  const HigherOrderModel dense(EffectiveCouplings(3, phi));
  CHECK(same(io::hobm_from_json(io::hobm_to_json(dense)).couplings(), dense.couplings()));

  for (Convention c : {Convention::spin, Convention::binary}) {
    const auto p = oracle::random_rbm(4, 3, 0.7, rng, c);
    const auto q = io::rbm_from_json(io::rbm_to_json(p));
    CHECK(q.convention == c);
    CHECK(q.flatten() == p.flatten());
    CHECK(io::parse_convention(io::to_string(c)) == c);
  }
  auto doc = io::rbm_to_json(RbmParameters::zeros(2, 2));
  doc["hidden_biases"] = io::json::array({0.0});
  CHECK_THROWS_AS(io::rbm_from_json(doc), ConfigError);
  CHECK_THROWS_AS(io::parse_convention("ising"), ConfigError);

  const fs::path path = scratch("model.json");
  io::write_json(path, io::hobm_to_json(chain));
  CHECK(same(io::hobm_from_json(io::read_json(path)).couplings(), chain.couplings()));
  CHECK_THROWS_AS(io::read_json(scratch("missing.json")), ConfigError);
}

TEST_CASE("datasets") {
  const auto s = sample_exact(three_body_chain(5, 0.5), 50, 3);
  const fs::path path = scratch("data.txt");
  io::write_dataset(path, s, {{"seed", 3}});
  CHECK(fs::exists(io::sidecar_path(path)));
  CHECK(io::read_json(io::sidecar_path(path))["seed"] == 3);
  const auto back = io::read_dataset(path);
  CHECK(back.n_sites() == 5);
  CHECK(std::equal(s.codes().begin(), s.codes().end(), back.codes().begin(), back.codes().end()));

  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  const auto spins = s.configuration(0);
  std::string expect;
  for (int i = 0; i < 5; ++i) expect += (i ? " " : "") + std::string(spins[i] > 0 ? "1" : "-1");
  CHECK(first == expect);

  const auto write = [](const fs::path& p, const std::string& text) { std::ofstream(p) << text; };
  write(scratch("bad1.txt"), "1 -1 0\n");
  CHECK_THROWS_AS(io::read_dataset(scratch("bad1.txt")), ConfigError);
  write(scratch("bad2.txt"), "1 -1\n1 1 1\n");
  CHECK_THROWS_AS(io::read_dataset(scratch("bad2.txt")), ConfigError);
  write(scratch("bad3.txt"), "");
  CHECK_THROWS_AS(io::read_dataset(scratch("bad3.txt")), ConfigError);
  write(scratch("bad4.txt"), "1 x\n");
  CHECK_THROWS_AS(io::read_dataset(scratch("bad4.txt")), ConfigError);
}

TEST_CASE("matrices, trajectories and reports") {
  Eigen::MatrixXd m(2, 3);
  m << 1.0, -2.5, 1.0 / 3.0, 0.0, 1e-17, 4.0;
  std::stringstream ss;
  io::write_matrix_csv(ss, m, "covariance");
  CHECK(io::read_matrix_csv(ss) == m);

  TrainingTrajectory t(2, true);
  t.append({0, 0.0, -3.0, 1.0, {0.0, 0.0}, {0.5, 0.1}, 0.0});
  t.append({10, 0.1, -2.5, 0.5, {0.3, std::nan("")}, {0.2, 0.05}, 0.01});
  std::stringstream tcsv;
  t.write_csv(tcsv);
  const auto back = TrainingTrajectory::read_csv(tcsv);
  REQUIRE(back.size() == 2);
  CHECK(back.with_penalty());
  CHECK(back.records()[1].frobenius[0] == 0.3);
  CHECK(std::isnan(back.records()[1].frobenius[1]));
  CHECK(back.records()[1].penalty == 0.01);
  CHECK_THROWS(t.append({5, 0.0, 0.0, 0.0, {0.0, 0.0}, {0.0, 0.0}, 0.0}));

  FixedPointReport f;
  f.classification = FixedPointKind::spurious;
  f.min_eigenvalue = -1e-3;
  f.n_zero = 4;
  f.sandwich_difference = std::nan("");
  const auto fb = io::fixed_point_report_from_json(io::to_json(f));
  CHECK(fb.classification == FixedPointKind::spurious);
  CHECK(fb.min_eigenvalue == -1e-3);
  CHECK(fb.n_zero == 4);
  CHECK(std::isnan(fb.sandwich_difference));

  const auto rep = dsb_report(t, 0.5, 1e-3, DsbReference::peak_value);
  const auto rb = io::dsb_report_from_json(io::to_json(rep));
  CHECK(rb.reference == DsbReference::peak_value);
  REQUIRE(rb.orders.size() == rep.orders.size());
  CHECK(rb.orders[0].step == rep.orders[0].step);
  CHECK(rb.ordered == rep.ordered);
}
