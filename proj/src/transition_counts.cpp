#include "boundedcp/transition_counts.hpp"

namespace boundedcp {

TransitionTable count_transitions(const BoundedSeries& series, int first,
                                  int last) {
  check_series(series);
  int n = series.size();
  if (last == 0) last = n;
  if (first < 1 || last > n || first >= last) {
    throw OutOfDomain("invalid observation window [" + std::to_string(first) +
                      ", " + std::to_string(last) + "]");
  }
  TransitionTable table(series.upper_bound);
  for (int t = first + 1; t <= last; ++t) {
    table.add(series.counts[t - 2], series.counts[t - 1]);
  }
  return table;
}

PrefixCounts::PrefixCounts(const BoundedSeries& series) {
  check_series(series);
  n_ = series.size();
  int states = series.upper_bound + 1;
  cum_.resize(n_ + 1, Eigen::MatrixXd::Zero(states, states));
  for (int k = 2; k <= n_; ++k) {
    cum_[k] = cum_[k - 1];
    cum_[k](series.counts[k - 2], series.counts[k - 1]) += 1.0;
  }
  cum_[0] = cum_[1];  // no transitions before the first observation
}

TransitionTable PrefixCounts::window(int first, int last) const {
  if (first < 1 || last > n_ || first >= last) {
    throw OutOfDomain("invalid observation window");
  }
  TransitionTable table(static_cast<int>(cum_[0].rows()) - 1);
  const Eigen::MatrixXd& hi = cum_[last];
  const Eigen::MatrixXd& lo = cum_[first];
  for (int i = 0; i < hi.rows(); ++i) {
    for (int j = 0; j < hi.cols(); ++j) {
      double c = hi(i, j) - lo(i, j);
      if (c != 0.0) table.add(i, j, c);
    }
  }
  return table;
}

PrefixSums::PrefixSums(const BoundedSeries& series) {
  check_series(series);
  int n = series.size();
  sx.assign(n + 1, 0.0);
  sxl.assign(n + 1, 0.0);
  sxx.assign(n + 1, 0.0);
  sll.assign(n + 1, 0.0);
  sy2.assign(n + 1, 0.0);
  for (int k = 2; k <= n; ++k) {
    double xt = series.counts[k - 1];
    double xl = series.counts[k - 2];
    sx[k] = sx[k - 1] + xt;
    sxl[k] = sxl[k - 1] + xl;
    sxx[k] = sxx[k - 1] + xt * xl;
    sll[k] = sll[k - 1] + xl * xl;
    sy2[k] = sy2[k - 1] + xt * xt;
  }
}

}  // namespace boundedcp
