#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "boundedcp/estimation.hpp"
#include "boundedcp/rng.hpp"
#include "boundedcp/transition_counts.hpp"

namespace boundedcp {

// Result of the prefix-vs-full-sample parameter discrepancy scan
//   max_k (k^2 / n) (theta_k - theta_n)' M (theta_k - theta_n),
// whose null limit is the sup of a squared two-dimensional Brownian bridge.
struct CusumScan {
  double statistic = 0.0;
  int argmax_k = 0;   // prefix length attaining the max
  int k0 = 0;         // requested lower scan bound (observations)
  int evaluated = 0;  // prefixes entering the max
  int skipped = 0;    // prefixes skipped as degenerate
  Method method = Method::cls;
};

// Full-sample normalization matrices (order (rho, p)).
// V is the mean outer-derivative matrix of the least-squares residual,
// W the mean squared-score matrix; both averaged over transitions.
std::pair<Eigen::Matrix2d, Eigen::Matrix2d> vw_hat_cls(
    const TransitionTable& table, const BarParams& params);

// Weighted analogues; `pilot` fixes the quasi-likelihood weights.
std::pair<Eigen::Matrix2d, Eigen::Matrix2d> vw_hat_mql(
    const TransitionTable& table, const BarParams& params,
    const BarParams& pilot);

// Mean observed information at `params` (negated mean Hessian).
Eigen::Matrix2d info_cml(const TransitionTable& table, const BarParams& params);

// 2x2 inverse via the adjugate; throws SingularMatrix when |det| < 1e-12.
Eigen::Matrix2d invert_2x2(const Eigen::Matrix2d& m);

CusumScan cusum_cls(const BoundedSeries& series, int k0 = 10);
CusumScan cusum_mql(const BoundedSeries& series, int k0 = 10);
CusumScan cusum_cml(const BoundedSeries& series, int k0 = 10);
CusumScan cusum_scan(const BoundedSeries& series, Method method, int k0 = 10);

// Tabulated upper quantiles of sup ||B_2(t)||^2 (two-dimensional Brownian
// bridge): 3.269 at the 1% level, 2.408 at 5%. Throws UnsupportedLevel for
// any other level; use simulate_critical_value then.
double critical_value(double gamma);

// Monte Carlo (1-gamma) quantile of max over a `grid`-point bridge.
double simulate_critical_value(double gamma, int grid, int reps, Rng& rng,
                               int threads = 1);
// Several levels from a single simulated sample of bridge maxima.
std::vector<double> simulate_critical_values(const std::vector<double>& gammas,
                                             int grid, int reps, Rng& rng,
                                             int threads = 1);

struct CriticalConfig {
  int grid = 2000;
  int reps = 20000;
  std::uint64_t seed = 20240901;
  int threads = 1;
};

struct TestOutcome {
  CusumScan scan;
  double gamma = 0.0;
  double critical = 0.0;
  bool reject = false;
  bool critical_simulated = false;  // level not tabulated; Monte Carlo used
};

TestOutcome run_test(const BoundedSeries& series, Method method, double gamma,
                     int k0 = 10, const CriticalConfig& critical_cfg = {});

}  // namespace boundedcp
