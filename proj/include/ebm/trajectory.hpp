#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ebm {

// One logged point of a training run. Per-order vectors are indexed by
// order - 1 and have length max_order. Quantities that cannot be computed
// (e.g. exact log-likelihood beyond the enumeration limit) are NaN.
struct TrajectoryRecord {
  long step = 0;
  double time = 0.0;  // accumulated step sizes
  double loglik = 0.0;
  double grad_norm = 0.0;
  std::vector<double> frobenius;
  std::vector<double> mismatch;
  double penalty = 0.0;
};

class TrainingTrajectory {
 public:
  TrainingTrajectory() = default;
  TrainingTrajectory(int max_order, bool with_penalty);

  // Steps must be strictly increasing; per-order vectors must match max_order.
  void append(TrajectoryRecord record);

  int max_order() const { return max_order_; }
  bool with_penalty() const { return with_penalty_; }
  const std::vector<TrajectoryRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const TrajectoryRecord& back() const { return records_.back(); }

  // Columns: step,time,loglik,grad_norm,frob_n1..,mismatch_n1..[,penalty]
  void write_csv(std::ostream& out) const;
  static TrainingTrajectory read_csv(std::istream& in);

 private:
  int max_order_ = 3;
  bool with_penalty_ = false;
  std::vector<TrajectoryRecord> records_;
};

}  // namespace ebm
