#pragma once

#include <Eigen/Dense>
#include <vector>

#include "boundedcp/bar_model.hpp"

namespace boundedcp {

// Pair-count matrix of a series window: entry (i, j) counts transitions with
// (x_{t-1}, x_t) = (i, j). This is a sufficient statistic for every
// estimator here — any sum over t of f(x_{t-1}, x_t) equals the
// count-weighted sum of f over the (N+1)^2 state pairs, so estimates cost
// O(N^2) once counts are known.
class TransitionTable {
 public:
  explicit TransitionTable(int upper_bound)
      : counts_(Eigen::MatrixXd::Zero(upper_bound + 1, upper_bound + 1)),
        total_(0.0) {}

  void add(int from, int to, double weight = 1.0) {
    counts_(from, to) += weight;
    total_ += weight;
  }

  int upper_bound() const { return static_cast<int>(counts_.rows()) - 1; }
  double total() const { return total_; }
  const Eigen::MatrixXd& mat() const { return counts_; }

  friend TransitionTable operator-(TransitionTable lhs,
                                   const TransitionTable& rhs) {
    lhs.counts_ -= rhs.counts_;
    lhs.total_ -= rhs.total_;
    return lhs;
  }

 private:
  Eigen::MatrixXd counts_;
  double total_;
};

// Counts over the observation window [first, last] (1-based, inclusive);
// the pairs counted are (x_{t-1}, x_t) for t = first+1 .. last, so windows
// never share a transition across their boundary. last = 0 means n.
TransitionTable count_transitions(const BoundedSeries& series, int first = 1,
                                  int last = 0);

// Cumulative tables enabling O(N^2) window counts. Memory is
// n * (N+1)^2 doubles; build only when that is acceptable.
class PrefixCounts {
 public:
  explicit PrefixCounts(const BoundedSeries& series);
  // Counts for observation window [first, last]; O(N^2).
  TransitionTable window(int first, int last) const;
  int size() const { return n_; }

 private:
  std::vector<Eigen::MatrixXd> cum_;  // cum_[k]: transitions t = 2..k
  int n_ = 0;
};

// Running scalar sums for least-squares prefix scans: entries k hold sums
// over transitions t = 2..k of (x_t, x_{t-1}, x_t x_{t-1}, x_{t-1}^2, x_t^2).
struct PrefixSums {
  explicit PrefixSums(const BoundedSeries& series);
  std::vector<double> sx, sxl, sxx, sll, sy2;
  // Sums over the observation window [first, last].
  double window_sx(int first, int last) const { return sx[last] - sx[first]; }
  double window_sxl(int first, int last) const { return sxl[last] - sxl[first]; }
  double window_sxx(int first, int last) const { return sxx[last] - sxx[first]; }
  double window_sll(int first, int last) const { return sll[last] - sll[first]; }
  double window_sy2(int first, int last) const { return sy2[last] - sy2[first]; }
};

}  // namespace boundedcp
