#include "ebm/trajectory.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "ebm/error.hpp"

namespace ebm {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_double(const std::string& s) {
  if (s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("bad number in trajectory CSV: '" + s + "'");
  return v;
}

void put(std::ostream& out, double v) {
  if (std::isnan(v)) {
    out << "nan";
    return;
  }
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, ptr - buf);
}

}  // namespace

TrainingTrajectory::TrainingTrajectory(int max_order, bool with_penalty)
    : max_order_(max_order), with_penalty_(with_penalty) {
  if (max_order < 1) throw DomainError("trajectory needs max_order >= 1");
}

void TrainingTrajectory::append(TrajectoryRecord record) {
  if (!records_.empty() && record.step <= records_.back().step) {
    throw DomainError("trajectory steps must be strictly increasing");
  }
  if (record.frobenius.size() != static_cast<std::size_t>(max_order_) ||
      record.mismatch.size() != static_cast<std::size_t>(max_order_)) {
    throw DimensionError("trajectory record has the wrong number of orders");
  }
  for (double f : record.frobenius) {
    if (f < 0.0) throw DomainError("Frobenius norms are nonnegative");
  }
  records_.push_back(std::move(record));
}

void TrainingTrajectory::write_csv(std::ostream& out) const {
  out << "step,time,loglik,grad_norm";
  for (int n = 1; n <= max_order_; ++n) out << ",frob_n" << n;
  for (int n = 1; n <= max_order_; ++n) out << ",mismatch_n" << n;
  if (with_penalty_) out << ",penalty";
  out << '\n';
  for (const auto& r : records_) {
    out << r.step << ',';
    put(out, r.time);
    out << ',';
    put(out, r.loglik);
    out << ',';
    put(out, r.grad_norm);
    for (double f : r.frobenius) {
      out << ',';
      put(out, f);
    }
    for (double m : r.mismatch) {
      out << ',';
      put(out, m);
    }
    if (with_penalty_) {
      out << ',';
      put(out, r.penalty);
    }
    out << '\n';
  }
}

TrainingTrajectory TrainingTrajectory::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty trajectory CSV");
  const auto header = split_csv(line);
  int orders = 0;
  for (const auto& h : header) {
    if (h.rfind("frob_n", 0) == 0) ++orders;
  }
  const bool with_penalty = !header.empty() && header.back() == "penalty";
  const std::size_t expected = 4 + 2 * static_cast<std::size_t>(orders) + (with_penalty ? 1 : 0);
  if (orders < 1 || header.size() != expected || header[0] != "step") {
    throw ConfigError("unrecognised trajectory CSV header");
  }
  TrainingTrajectory traj(orders, with_penalty);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != expected) throw ConfigError("trajectory CSV row has the wrong number of columns");
    TrajectoryRecord r;
    r.step = std::stol(cells[0]);
    r.time = parse_double(cells[1]);
    r.loglik = parse_double(cells[2]);
    r.grad_norm = parse_double(cells[3]);
    for (int n = 0; n < orders; ++n) r.frobenius.push_back(parse_double(cells[4 + static_cast<std::size_t>(n)]));
    for (int n = 0; n < orders; ++n) {
      r.mismatch.push_back(parse_double(cells[4 + static_cast<std::size_t>(orders + n)]));
    }
    if (with_penalty) r.penalty = parse_double(cells.back());
    traj.append(std::move(r));
  }
  return traj;
}

}  // namespace ebm
