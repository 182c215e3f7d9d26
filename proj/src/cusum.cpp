#include "boundedcp/cusum.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <thread>
#include <vector>

namespace boundedcp {

namespace {

double quad_form(const Eigen::Matrix2d& m, const Eigen::Vector2d& v) {
  return v.dot(m * v);
}

// Symmetrize and guard the scan matrix: eigenvalues below -1e-10 indicate a
// broken normalization; tiny negative noise is lifted to keep the scan
// nonnegative.
Eigen::Matrix2d guarded_psd(Eigen::Matrix2d m) {
  m = 0.5 * (m + m.transpose()).eval();
  double tr = m(0, 0) + m(1, 1);
  double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * det));
  double lo = 0.5 * (tr - disc);
  if (lo < -1e-10) {
    throw SingularMatrix("scan normalization matrix is indefinite");
  }
  if (lo < 0.0) m -= lo * Eigen::Matrix2d::Identity();
  return m;
}

}  // namespace

Eigen::Matrix2d invert_2x2(const Eigen::Matrix2d& m) {
  double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  if (std::abs(det) < 1e-12) {
    throw SingularMatrix("2x2 determinant " + std::to_string(det));
  }
  Eigen::Matrix2d inv;
  inv << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
  return inv / det;
}

std::pair<Eigen::Matrix2d, Eigen::Matrix2d> vw_hat_cls(
    const TransitionTable& table, const BarParams& params) {
  const int N = table.upper_bound();
  const double T = table.total();
  const double np = N * params.p;
  const double nr = N * (1.0 - params.rho);
  const double c = np * (1.0 - params.rho);
  double v11 = 0, v12 = 0, w11 = 0, w12 = 0, wss = 0;
  const Eigen::MatrixXd& cm = table.mat();
  for (int i = 0; i <= N; ++i) {
    for (int j = 0; j <= N; ++j) {
      double cw = cm(i, j);
      if (cw == 0.0) continue;
      double x = i - np;
      double s = j - params.rho * i - c;
      v11 += cw * x * x;
      v12 += cw * x;
      w11 += cw * s * s * x * x;
      w12 += cw * s * s * x;
      wss += cw * s * s;
    }
  }
  Eigen::Matrix2d V, W;
  V << v11 / T, nr * v12 / T, nr * v12 / T, nr * nr;
  W << w11 / T, nr * w12 / T, nr * w12 / T, nr * nr * wss / T;
  return {V, W};
}

std::pair<Eigen::Matrix2d, Eigen::Matrix2d> vw_hat_mql(
    const TransitionTable& table, const BarParams& params,
    const BarParams& pilot) {
  const int N = table.upper_bound();
  const double T = table.total();
  const double np = N * params.p;
  const double nr = N * (1.0 - params.rho);
  const double c = np * (1.0 - params.rho);
  std::vector<double> weight(N + 1);
  for (int i = 0; i <= N; ++i) weight[i] = mql_weight(i, pilot, N);
  double v11 = 0, v12 = 0, vd = 0, w11 = 0, w12 = 0, w22 = 0;
  const Eigen::MatrixXd& cm = table.mat();
  for (int i = 0; i <= N; ++i) {
    for (int j = 0; j <= N; ++j) {
      double cw = cm(i, j);
      if (cw == 0.0) continue;
      double d = weight[i];
      double x = i - np;
      double s = j - params.rho * i - c;
      v11 += cw * d * x * x;
      v12 += cw * d * x * (nr + s);
      vd += cw * d;
      double ds = d * s;
      w11 += cw * ds * ds * x * x;
      w12 += cw * ds * ds * x;
      w22 += cw * ds * ds;
    }
  }
  Eigen::Matrix2d V, W;
  V << v11 / T, v12 / T, v12 / T, nr * nr * vd / T;
  W << w11 / T, nr * w12 / T, nr * w12 / T, nr * nr * w22 / T;
  return {V, W};
}

Eigen::Matrix2d info_cml(const TransitionTable& table,
                         const BarParams& params) {
  return derivs_from_table(table, params).observed_info;
}

namespace {

// Core scan: walk prefixes, re-estimate, and take the weighted maximal
// quadratic discrepancy against the full-sample estimate. `estimate` sees
// the running prefix table and may carry warm-start state.
CusumScan scan_with(const BoundedSeries& series, Method method, int k0,
                    const Eigen::Matrix2d& norm, const BarParams& full,
                    const std::function<BarParams(const TransitionTable&)>&
                        estimate) {
  check_series(series);
  const int n = series.size();
  if (k0 < 2) throw OutOfDomain("k0 must be >= 2");
  const int min_trans = std::max(k0, 5);
  if (n - 1 < min_trans) {
    throw OutOfDomain("series too short to scan: need more than " +
                      std::to_string(min_trans) + " transitions");
  }
  Eigen::Matrix2d M = guarded_psd(norm);
  CusumScan scan;
  scan.method = method;
  scan.k0 = k0;
  scan.statistic = -1.0;
  TransitionTable running(series.upper_bound);
  for (int k = 2; k <= n; ++k) {
    running.add(series.counts[k - 2], series.counts[k - 1]);
    if (k - 1 < min_trans) continue;
    BarParams th;
    try {
      th = estimate(running);
    } catch (const DegenerateSeries&) {
      ++scan.skipped;
      continue;
    }
    Eigen::Vector2d diff(th.rho - full.rho, th.p - full.p);
    double value =
        (static_cast<double>(k) * k / n) * quad_form(M, diff);
    ++scan.evaluated;
    if (value > scan.statistic) {
      scan.statistic = value;
      scan.argmax_k = k;
    }
  }
  if (scan.evaluated == 0) {
    throw DegenerateSeries("every prefix of the scan was degenerate");
  }
  return scan;
}

}  // namespace

CusumScan cusum_cls(const BoundedSeries& series, int k0) {
  TransitionTable table = count_transitions(series);
  ParamEstimate full = cls_from_table(table);
  auto [V, W] = vw_hat_cls(table, full.params);
  Eigen::Matrix2d M = V * invert_2x2(W) * V;
  return scan_with(series, Method::cls, k0, M, full.params,
                   [](const TransitionTable& t) {
                     return cls_from_table(t).params;
                   });
}

CusumScan cusum_mql(const BoundedSeries& series, int k0) {
  TransitionTable table = count_transitions(series);
  ParamEstimate pilot = cls_from_table(table);
  ParamEstimate full = mql_from_table_with_pilot(table, pilot.params);
  auto [V, W] = vw_hat_mql(table, full.params, pilot.params);
  Eigen::Matrix2d M = V * invert_2x2(W) * V;
  // each prefix re-fits with its own pilot
  return scan_with(series, Method::mql, k0, M, full.params,
                   [](const TransitionTable& t) {
                     return mql_from_table(t).params;
                   });
}

CusumScan cusum_cml(const BoundedSeries& series, int k0) {
  TransitionTable table = count_transitions(series);
  ParamEstimate full = cml_from_table(table);
  Eigen::Matrix2d M = info_cml(table, full.params);
  auto warm = std::make_shared<BarParams>(full.params);
  return scan_with(series, Method::cml, k0, M, full.params,
                   [warm](const TransitionTable& t) {
                     ParamEstimate est = cml_from_table(t, *warm);
                     *warm = est.params;
                     return est.params;
                   });
}

CusumScan cusum_scan(const BoundedSeries& series, Method method, int k0) {
  switch (method) {
    case Method::cls: return cusum_cls(series, k0);
    case Method::mql: return cusum_mql(series, k0);
    case Method::cml: return cusum_cml(series, k0);
  }
  throw OutOfDomain("unknown method");
}

double critical_value(double gamma) {
  if (std::abs(gamma - 0.01) < 1e-12) return 3.269;
  if (std::abs(gamma - 0.05) < 1e-12) return 2.408;
  throw UnsupportedLevel("no tabulated critical value at gamma = " +
                         std::to_string(gamma));
}

std::vector<double> simulate_critical_values(const std::vector<double>& gammas,
                                             int grid, int reps, Rng& rng,
                                             int threads) {
  for (double gamma : gammas) {
    if (!(gamma > 0.0 && gamma < 1.0)) {
      throw OutOfDomain("gamma must lie in (0, 1)");
    }
  }
  if (gammas.empty()) throw OutOfDomain("need at least one level");
  if (grid < 2 || reps < 1) throw OutOfDomain("grid >= 2 and reps >= 1");
  std::uint64_t master = rng.next_u64();
  std::vector<double> stats(reps);

  auto worker = [&](int lo, int hi) {
    std::vector<double> w1(grid + 1), w2(grid + 1);
    for (int r = lo; r < hi; ++r) {
      Rng stream = Rng::stream(master, static_cast<std::uint64_t>(r));
      w1[0] = 0.0;
      w2[0] = 0.0;
      for (int i = 1; i <= grid; ++i) {
        w1[i] = w1[i - 1] + stream.normal();
        w2[i] = w2[i - 1] + stream.normal();
      }
      double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(grid));
      double fg1 = w1[grid], fg2 = w2[grid];
      double best = 0.0;
      for (int i = 1; i < grid; ++i) {
        double frac = static_cast<double>(i) / grid;
        double b1 = (w1[i] - frac * fg1) * inv_sqrt;
        double b2 = (w2[i] - frac * fg2) * inv_sqrt;
        double v = b1 * b1 + b2 * b2;
        if (v > best) best = v;
      }
      stats[r] = best;
    }
  };

  threads = std::max(1, threads);
  if (threads == 1) {
    worker(0, reps);
  } else {
    std::vector<std::thread> pool;
    int chunk = (reps + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      int lo = t * chunk;
      int hi = std::min(reps, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(worker, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  std::sort(stats.begin(), stats.end());
  std::vector<double> out;
  out.reserve(gammas.size());
  for (double gamma : gammas) {
    int idx = static_cast<int>(std::ceil((1.0 - gamma) * reps)) - 1;
    idx = std::clamp(idx, 0, reps - 1);
    out.push_back(stats[idx]);
  }
  return out;
}

double simulate_critical_value(double gamma, int grid, int reps, Rng& rng,
                               int threads) {
  return simulate_critical_values({gamma}, grid, reps, rng, threads)[0];
}

TestOutcome run_test(const BoundedSeries& series, Method method, double gamma,
                     int k0, const CriticalConfig& critical_cfg) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw OutOfDomain("gamma must lie in (0, 1); gamma = 0 rejects nothing");
  }
  TestOutcome out;
  out.gamma = gamma;
  try {
    out.critical = critical_value(gamma);
  } catch (const UnsupportedLevel&) {
    Rng rng(critical_cfg.seed);
    out.critical = simulate_critical_value(gamma, critical_cfg.grid,
                                           critical_cfg.reps, rng,
                                           critical_cfg.threads);
    out.critical_simulated = true;
  }
  out.scan = cusum_scan(series, method, k0);
  out.reject = out.scan.statistic > out.critical;
  return out;
}

}  // namespace boundedcp
