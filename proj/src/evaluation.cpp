#include "boundedcp/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "boundedcp/parallel.hpp"

namespace boundedcp {

double zeta(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) {
    throw EmptySet("zeta requires two non-empty sets");
  }
  double worst = 0.0;
  for (double bv : b) {
    double nearest = std::numeric_limits<double>::infinity();
    for (double av : a) nearest = std::min(nearest, std::abs(av - bv));
    worst = std::max(worst, nearest);
  }
  return worst;
}

double location_distance(const std::vector<double>& est,
                         const std::vector<double>& truth) {
  if (est.empty() || truth.empty()) {
    throw EmptySet("distance requires two non-empty sets");
  }
  double total = 0.0;
  for (double tv : truth) {
    double nearest = std::numeric_limits<double>::infinity();
    for (double ev : est) nearest = std::min(nearest, std::abs(ev - tv));
    total += nearest;
  }
  return total;
}

namespace {

SegmentedModel one_change(double rho1, double p1, double rho2, double p2,
                          int n) {
  SegmentedModel model;
  model.upper_bound = 10;
  model.change_points = {n / 2};
  model.segment_params = {BarParams{p1, rho1}, BarParams{p2, rho2}};
  return model;
}

SegmentedModel stationary(double rho, double p) {
  SegmentedModel model;
  model.upper_bound = 10;
  model.segment_params = {BarParams{p, rho}};
  return model;
}

std::vector<int> grid_locations(const std::string& family, int n) {
  if (family == "A") {
    if (n == 200) return {70, 140};
    if (n == 500) return {150, 350};
    if (n == 800) return {300, 450};
  } else {
    if (n == 200) return {50, 100, 150};
    if (n == 500) return {100, 225, 390};
    if (n == 800) return {200, 400, 650};
  }
  throw OutOfDomain("scenario family " + family +
                    " is defined for n in {200, 500, 800}");
}

SegmentedModel multi_change(const std::string& family,
                            const std::vector<double>& ps,
                            const std::vector<double>& rhos, int n) {
  SegmentedModel model;
  model.upper_bound = 10;
  model.change_points = grid_locations(family, n);
  for (std::size_t j = 0; j < ps.size(); ++j) {
    model.segment_params.push_back(BarParams{ps[j], rhos[j]});
  }
  return model;
}

}  // namespace

SegmentedModel make_scenario(const std::string& id, int n) {
  if (n < 2) throw OutOfDomain("scenario length must be >= 2");
  // single-regime size models
  if (id == "T1") return stationary(-0.1, 0.6);
  if (id == "T2") return stationary(0.1, 0.3);
  if (id == "T3") return stationary(0.4, 0.3);
  // one-change power models (change at n/2)
  if (id == "T11") return one_change(-0.1, 0.6, 0.5, 0.6, n);
  if (id == "T12") return one_change(-0.1, 0.6, -0.1, 0.3, n);
  if (id == "T13") return one_change(-0.1, 0.6, 0.1, 0.3, n);
  if (id == "T21") return one_change(0.1, 0.3, 0.5, 0.3, n);
  if (id == "T22") return one_change(0.1, 0.3, 0.1, 0.6, n);
  if (id == "T23") return one_change(0.1, 0.3, 0.3, 0.5, n);
  if (id == "T31") return one_change(0.4, 0.3, -0.2, 0.3, n);
  if (id == "T32") return one_change(0.4, 0.3, 0.4, 0.6, n);
  if (id == "T33") return one_change(0.4, 0.3, -0.2, 0.6, n);
  // two change-points
  if (id == "A1") return multi_change("A", {0.5, 0.5, 0.5}, {-0.2, 0.6, 0.1}, n);
  if (id == "A2") return multi_change("A", {0.3, 0.5, 0.7}, {0.2, 0.2, 0.2}, n);
  if (id == "A3") return multi_change("A", {0.3, 0.5, 0.7}, {-0.2, 0.6, 0.3}, n);
  // three change-points
  if (id == "B1") {
    return multi_change("B", {0.5, 0.5, 0.5, 0.5}, {-0.2, 0.6, 0.1, 0.4}, n);
  }
  if (id == "B2") {
    return multi_change("B", {0.2, 0.4, 0.6, 0.8}, {0.3, 0.3, 0.3, 0.3}, n);
  }
  if (id == "B3") {
    return multi_change("B", {0.3, 0.4, 0.6, 0.8}, {-0.2, -0.1, 0.2, 0.4}, n);
  }
  throw OutOfDomain("unknown scenario id: " + id);
}

bool scenario_known(const std::string& id) {
  try {
    make_scenario(id, 200);
    return true;
  } catch (const OutOfDomain&) {
    return false;
  }
}

std::vector<std::string> scenario_ids() {
  return {"T1",  "T2",  "T3",  "T11", "T12", "T13", "T21", "T22", "T23",
          "T31", "T32", "T33", "A1",  "A2",  "A3",  "B1",  "B2",  "B3"};
}

SizePowerResult size_power_experiment(const SizePowerConfig& config) {
  if (config.reps < 1) throw OutOfDomain("reps must be >= 1");
  for (double g : config.gammas) {
    if (!(g > 0.0 && g < 1.0)) {
      throw OutOfDomain("gamma must lie in (0, 1); gamma = 0 rejects nothing");
    }
  }
  SegmentedModel model = make_scenario(config.scenario, config.n);
  SizePowerResult result;
  result.config = config;

  struct RepOutcome {
    // statistic per method; NaN marks a skip
    std::vector<double> stat;
  };
  std::vector<RepOutcome> outcomes(config.reps);
  const int n_methods = static_cast<int>(config.methods.size());

  parallel_for(config.reps, config.threads, [&](int r) {
    Rng rng = Rng::stream(config.seed, static_cast<std::uint64_t>(r));
    BoundedSeries series = simulate_mcp_bar(model, config.n, rng);
    RepOutcome out;
    out.stat.assign(n_methods, std::numeric_limits<double>::quiet_NaN());
    for (int mi = 0; mi < n_methods; ++mi) {
      try {
        out.stat[mi] = cusum_scan(series, config.methods[mi], config.k0)
                           .statistic;
      } catch (const Error&) {
        // leave NaN: this replication is skipped for the method
      }
    }
    outcomes[r] = std::move(out);
  });

  for (int mi = 0; mi < n_methods; ++mi) {
    Method method = config.methods[mi];
    int used = 0, skipped = 0;
    std::vector<int> rejections(config.gammas.size(), 0);
    for (const RepOutcome& out : outcomes) {
      double stat = out.stat[mi];
      if (std::isnan(stat)) {
        ++skipped;
        continue;
      }
      ++used;
      for (std::size_t gi = 0; gi < config.gammas.size(); ++gi) {
        if (stat > critical_value(config.gammas[gi])) ++rejections[gi];
      }
    }
    result.skipped[method] = skipped;
    for (std::size_t gi = 0; gi < config.gammas.size(); ++gi) {
      double rate = used > 0 ? static_cast<double>(rejections[gi]) / used : 0.0;
      result.rejection_rate[{method, config.gammas[gi]}] = rate;
    }
  }
  return result;
}

namespace {

// Compensated accumulator; replication sums stay exact enough for tight
// tolerance bands regardless of summation length.
struct KahanSum {
  double sum = 0.0, carry = 0.0;
  void add(double value) {
    double y = value - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

}  // namespace

SegmentationResult segmentation_experiment(const SegmentationConfig& config) {
  if (config.reps < 1) throw OutOfDomain("reps must be >= 1");
  SegmentedModel model = make_scenario(config.scenario, config.n);
  SegmentationResult result;
  result.config = config;
  result.true_m = static_cast<int>(model.change_points.size());
  for (int tau : model.change_points) {
    result.true_lambdas.push_back(static_cast<double>(tau) / config.n);
  }

  struct RepOutcome {
    bool ok = false;
    std::vector<double> lambdas;
  };
  std::vector<RepOutcome> outcomes(config.reps);
  parallel_for(config.reps, config.threads, [&](int r) {
    Rng rng = Rng::stream(config.seed, static_cast<std::uint64_t>(r));
    BoundedSeries series = simulate_mcp_bar(model, config.n, rng);
    try {
      MdlFit fit = s_ga(series, config.ga, rng);
      outcomes[r].ok = true;
      outcomes[r].lambdas = fit.relative_locations;
    } catch (const Error&) {
      // skipped
    }
  });

  int correct = 0;
  KahanSum zu, zo, dm;
  std::vector<KahanSum> bias(result.true_m), mse(result.true_m);
  for (const RepOutcome& out : outcomes) {
    if (!out.ok) {
      ++result.skipped;
      continue;
    }
    int m_hat = static_cast<int>(out.lambdas.size());
    result.m_histogram[m_hat] += 1;
    if (m_hat >= 1 && result.true_m >= 1) {
      zu.add(zeta(out.lambdas, result.true_lambdas));
      zo.add(zeta(result.true_lambdas, out.lambdas));
      dm.add(location_distance(out.lambdas, result.true_lambdas));
      ++result.located;
    }
    if (m_hat == result.true_m) {
      ++correct;
      for (int j = 0; j < result.true_m; ++j) {
        double err = out.lambdas[j] - result.true_lambdas[j];
        bias[j].add(err);
        mse[j].add(err * err);
      }
    }
  }
  int used = config.reps - result.skipped;
  result.cr = used > 0 ? static_cast<double>(correct) / used : 0.0;
  if (result.located > 0) {
    result.zeta_under_mean = zu.sum / result.located;
    result.zeta_over_mean = zo.sum / result.located;
    result.d_mean = dm.sum / result.located;
  }
  for (int j = 0; j < result.true_m; ++j) {
    result.bias.push_back(correct > 0 ? bias[j].sum / correct : 0.0);
    result.mse.push_back(correct > 0 ? mse[j].sum / correct : 0.0);
  }
  return result;
}

FitStats model_fit_stats(const BoundedSeries& series, const MdlFit& fit) {
  check_series(series);
  const int n = series.size();
  if (fit.n != n) throw OutOfDomain("fit does not describe this series");
  int m = static_cast<int>(fit.change_points.size());
  if (static_cast<int>(fit.segment_estimates.size()) != m + 1) {
    throw OutOfDomain("fit is missing segment estimates");
  }
  FitStats stats;
  for (double ll : fit.segment_loglik) stats.loglik += ll;
  stats.k = 2 * (m + 1) + m;
  stats.aic = -2.0 * stats.loglik + 2.0 * stats.k;
  stats.bic = -2.0 * stats.loglik + stats.k * std::log(static_cast<double>(n));

  int prev = 0;
  for (int j = 0; j <= m; ++j) {
    int next = (j < m) ? fit.change_points[j] : n;
    const BarParams& params = fit.segment_estimates[j].params;
    double c = series.upper_bound * params.p * (1.0 - params.rho);
    double ss = 0.0;
    int len = next - prev;
    for (int t = prev + 2; t <= next; ++t) {
      double r = series.counts[t - 1] - params.rho * series.counts[t - 2] - c;
      ss += r * r;
    }
    if (len >= 2) {
      stats.rms += std::sqrt(ss / static_cast<double>(len - 1));
    }
    prev = next;
  }
  return stats;
}

}  // namespace boundedcp
