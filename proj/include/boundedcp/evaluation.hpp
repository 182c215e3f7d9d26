#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "boundedcp/cusum.hpp"
#include "boundedcp/segmentation.hpp"

namespace boundedcp {

// sup_{b in B} inf_{a in A} |a - b|: how far the worst point of B sits from
// the set A. Throws EmptySet when either set is empty.
double zeta(const std::vector<double>& a, const std::vector<double>& b);

// Total distance from the true locations to their nearest estimates:
// sum_k min_j |est_j - truth_k|. Every missed location keeps contributing
// its gap, so the index grows with both mislocation and under-segmentation.
double location_distance(const std::vector<double>& est,
                         const std::vector<double>& truth);

// Named simulation scenarios. "T1".."T3" are stationary size models;
// "T11".."T33" add one parameter change at n/2; "A1".."A3" carry two
// change-points and "B1".."B3" three, at preset locations for
// n in {200, 500, 800}.
SegmentedModel make_scenario(const std::string& id, int n);
bool scenario_known(const std::string& id);
std::vector<std::string> scenario_ids();

struct SizePowerConfig {
  std::string scenario = "T2";
  int n = 500;
  int reps = 1000;
  std::vector<Method> methods = {Method::cls, Method::mql, Method::cml};
  std::vector<double> gammas = {0.01, 0.05};
  int k0 = 10;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct SizePowerResult {
  SizePowerConfig config;
  // rejection fraction per (method, gamma), over non-skipped replications
  std::map<std::pair<Method, double>, double> rejection_rate;
  std::map<Method, int> skipped;  // replications a method could not score
};

SizePowerResult size_power_experiment(const SizePowerConfig& config);

struct SegmentationConfig {
  std::string scenario = "A2";
  int n = 500;
  int reps = 200;
  GaConfig ga;
  std::uint64_t seed = 1;
  int threads = 1;  // replication-level parallelism
};

struct SegmentationResult {
  SegmentationConfig config;
  int true_m = 0;
  std::vector<double> true_lambdas;
  double cr = 0.0;                   // fraction with m_hat == true m
  std::map<int, int> m_histogram;    // m_hat counts
  double zeta_under_mean = 0.0;      // zeta(est | truth)
  double zeta_over_mean = 0.0;       // zeta(truth | est)
  double d_mean = 0.0;               // mean of per-rep location_distance
  int located = 0;                   // reps with m_hat >= 1 entering zeta/d
  std::vector<double> bias;          // per true location, reps with m_hat == m
  std::vector<double> mse;
  int skipped = 0;                   // replications the search failed on
};

SegmentationResult segmentation_experiment(const SegmentationConfig& config);

// Goodness-of-fit summaries of a fitted segmentation: conditional
// log-likelihood based AIC/BIC with k = 2(m+1) + m free quantities, and the
// summed per-segment residual root mean square.
struct FitStats {
  double loglik = 0.0;
  int k = 0;
  double aic = 0.0;
  double bic = 0.0;
  double rms = 0.0;
};

FitStats model_fit_stats(const BoundedSeries& series, const MdlFit& fit);

}  // namespace boundedcp
