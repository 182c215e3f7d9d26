#pragma once

#include <cstdint>
#include <vector>

#include "boundedcp/estimation.hpp"
#include "boundedcp/rng.hpp"

namespace boundedcp {

// How each candidate segment is scored inside the search.
enum class SegmentLikelihood {
  cls_plugin,  // closed-form least squares plugged into the log-likelihood
  full_cml,    // full numerical likelihood maximization per segment
};

struct GaConfig {
  double epsilon_lambda = 0.0;   // minimum relative spacing; 0 -> 10/n
  int population_scale = 10;     // population = scale * m ...
  int population_size = 0;       // ... unless this explicit override is > 0
  double crossover_fraction = 0.55;
  int generations = 300;
  int tournament = 3;
  double mutation_prob = 0.1;    // per gene
  double mutation_geom = 0.1;    // success prob of the jitter magnitude
  int elite = 1;
  int max_changepoints = 0;      // cap on m; 0 -> spacing bound M0 only
  SegmentLikelihood likelihood = SegmentLikelihood::cls_plugin;
  bool compare_m0 = true;        // also score the no-change model
  int threads = 1;               // fitness evaluation threads
};

// Per-level search trace: best penalized score seen at each generation.
struct GaTrace {
  int m = 0;
  double best_mdl = 0.0;
  std::vector<double> best_per_generation;
  double wall_ms = 0.0;
};

struct MdlFit {
  int n = 0;
  int upper_bound = 0;
  std::vector<int> change_points;          // tau_1 < ... < tau_m
  std::vector<double> relative_locations;  // tau / n
  std::vector<ParamEstimate> segment_estimates;
  std::vector<double> segment_loglik;      // conditional log-lik per segment
  double mdl = 0.0;
  std::vector<GaTrace> search_log;
};

// Description-length score of a candidate segmentation with the given
// per-segment parameters: log m + (m+1) log n + sum_j log n_j - sum_j L_j
// (natural logs; the m = 0 score drops the log m term). Returns +infinity
// when any segment is shorter than ceil(n * epsilon_lambda).
double mdl_value(const BoundedSeries& series, const std::vector<int>& taus,
                 const std::vector<BarParams>& params,
                 double epsilon_lambda = 0.0);

// Fits every segment of a fixed segmentation and assembles its score.
struct SegmentFit {
  std::vector<ParamEstimate> estimates;
  std::vector<double> loglik;
  double mdl = 0.0;
};
SegmentFit fit_segments(const BoundedSeries& series,
                        const std::vector<int>& taus, SegmentLikelihood mode,
                        double epsilon_lambda = 0.0);

// Genetic search over m-point segmentations (fixed m >= 1).
MdlFit ga_search(const BoundedSeries& series, int m, const GaConfig& config,
                 Rng& rng);

// Early-stopping sweep: m = 1, 2, ... until the level-best score rises,
// optionally comparing the no-change model. Throws Infeasible when spacing
// admits no single change-point.
MdlFit s_ga(const BoundedSeries& series, const GaConfig& config, Rng& rng);

// Same search without early stopping: every m in [1, min(M0, cap)].
MdlFit exhaustive_m_sweep(const BoundedSeries& series, const GaConfig& config,
                          Rng& rng);

// Effective spacing parameters for a series of length n.
double effective_epsilon(const GaConfig& config, int n);
int min_segment_length(double epsilon_lambda, int n);

}  // namespace boundedcp
