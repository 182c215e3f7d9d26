#include "boundedcp/segmentation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <string>
#include <unordered_map>

#include "boundedcp/parallel.hpp"

namespace boundedcp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double effective_epsilon(const GaConfig& config, int n) {
  // 0 means "not set": use the 10/n spacing rule, capped at its own domain
  // so very short series reach the feasibility check instead of erroring.
  double eps = config.epsilon_lambda != 0.0 ? config.epsilon_lambda
                                            : std::min(0.5, 10.0 / n);
  if (!(eps > 0.0 && eps <= 0.5)) {
    throw OutOfDomain("epsilon_lambda must lie in (0, 0.5]");
  }
  return eps;
}

int min_segment_length(double epsilon_lambda, int n) {
  // guard against 500 * (10/500) = 10 + 2ulp ceiling to 11
  int len = static_cast<int>(std::ceil(n * epsilon_lambda - 1e-9));
  return std::max(1, len);
}

namespace {

double mdl_from_parts(int n, int m, const std::vector<int>& seg_len,
                      double total_loglik, int minlen) {
  for (int len : seg_len) {
    if (len < minlen) return kInf;
  }
  double penalty = (m + 1) * std::log(static_cast<double>(n));
  if (m >= 1) penalty += std::log(static_cast<double>(m));
  for (int len : seg_len) penalty += std::log(static_cast<double>(len));
  // m = 0 keeps the (0+1) log n + log n_1 = 2 log n penalty
  return penalty - total_loglik;
}

std::vector<int> segment_lengths(int n, const std::vector<int>& taus) {
  std::vector<int> lens;
  lens.reserve(taus.size() + 1);
  int prev = 0;
  for (int tau : taus) {
    lens.push_back(tau - prev);
    prev = tau;
  }
  lens.push_back(n - prev);
  return lens;
}

void check_taus(const std::vector<int>& taus, int n) {
  for (std::size_t j = 0; j < taus.size(); ++j) {
    if (taus[j] < 1 || taus[j] > n - 1) {
      throw OutOfDomain("change point " + std::to_string(taus[j]) +
                        " outside [1, n-1]");
    }
    if (j > 0 && taus[j] <= taus[j - 1]) {
      throw OutOfDomain("change points must be strictly increasing");
    }
  }
}

// Memoizing per-segment scorer. A segment is the observation window
// (a, b]; its score is pure in (a, b), so the genetic search hits the cache
// for every boundary pair it has seen before.
class SegmentScorer {
 public:
  SegmentScorer(const BoundedSeries& series, SegmentLikelihood mode,
                bool locked)
      : series_(series), mode_(mode), locked_(locked) {
    check_series(series);
    double bytes = static_cast<double>(series.size() + 1) *
                   (series.upper_bound + 1.0) * (series.upper_bound + 1.0) *
                   sizeof(double);
    if (bytes <= 256e6) prefix_.emplace(series);
  }

  struct Score {
    bool ok = false;
    double loglik = -kInf;
    ParamEstimate estimate;
  };

  Score window(int a, int b) {
    std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) |
                        static_cast<std::uint64_t>(b);
    if (locked_) {
      std::lock_guard<std::mutex> guard(mutex_);
      auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    } else {
      auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    }
    Score score = compute(a, b);
    if (locked_) {
      std::lock_guard<std::mutex> guard(mutex_);
      cache_.emplace(key, score);
    } else {
      cache_.emplace(key, score);
    }
    return score;
  }

  const BoundedSeries& series() const { return series_; }
  SegmentLikelihood mode() const { return mode_; }

 private:
  Score compute(int a, int b) const {
    Score score;
    if (b - a < 3) return score;  // need two transitions to estimate
    TransitionTable table =
        prefix_ ? prefix_->window(a + 1, b)
                : count_transitions(series_, a + 1, b);
    try {
      if (mode_ == SegmentLikelihood::cls_plugin) {
        ParamEstimate est = cls_from_table(table);
        score.estimate = est;
        score.loglik = loglik_from_table(table, est.params);
      } else {
        std::optional<BarParams> warm;
        try {
          warm = cls_from_table(table).params;
        } catch (const DegenerateSeries&) {
        }
        ParamEstimate est = cml_from_table(table, warm);
        score.estimate = est;
        score.loglik = est.objective_value;
      }
      score.ok = std::isfinite(score.loglik);
    } catch (const DegenerateSeries&) {
      score.ok = false;
    }
    return score;
  }

  const BoundedSeries& series_;
  SegmentLikelihood mode_;
  bool locked_;
  std::optional<PrefixCounts> prefix_;
  std::unordered_map<std::uint64_t, Score> cache_;
  std::mutex mutex_;
};

}  // namespace

double mdl_value(const BoundedSeries& series, const std::vector<int>& taus,
                 const std::vector<BarParams>& params, double epsilon_lambda) {
  check_series(series);
  int n = series.size();
  check_taus(taus, n);
  if (params.size() != taus.size() + 1) {
    throw OutOfDomain("need one parameter set per segment");
  }
  double eps = epsilon_lambda > 0.0 ? epsilon_lambda : 10.0 / n;
  int minlen = min_segment_length(eps, n);
  std::vector<int> lens = segment_lengths(n, taus);
  for (int len : lens) {
    if (len < minlen) return kInf;
  }
  double total = 0.0;
  int prev = 0;
  for (std::size_t j = 0; j < params.size(); ++j) {
    int next = (j < taus.size()) ? taus[j] : n;
    if (next - prev < 2) return kInf;  // no transition to score
    total += loglik_from_table(count_transitions(series, prev + 1, next),
                               params[j]);
    prev = next;
  }
  return mdl_from_parts(n, static_cast<int>(taus.size()), lens, total, minlen);
}

SegmentFit fit_segments(const BoundedSeries& series,
                        const std::vector<int>& taus, SegmentLikelihood mode,
                        double epsilon_lambda) {
  check_series(series);
  int n = series.size();
  check_taus(taus, n);
  SegmentScorer scorer(series, mode, false);
  SegmentFit fit;
  double total = 0.0;
  int prev = 0;
  for (std::size_t j = 0; j <= taus.size(); ++j) {
    int next = (j < taus.size()) ? taus[j] : n;
    SegmentScorer::Score score = scorer.window(prev, next);
    if (!score.ok) {
      throw DegenerateSeries("segment " + std::to_string(j + 1) +
                             " cannot be estimated");
    }
    fit.estimates.push_back(score.estimate);
    fit.loglik.push_back(score.loglik);
    total += score.loglik;
    prev = next;
  }
  double eps = epsilon_lambda > 0.0 ? epsilon_lambda : 10.0 / n;
  fit.mdl = mdl_from_parts(n, static_cast<int>(taus.size()),
                           segment_lengths(n, taus), total,
                           min_segment_length(eps, n));
  return fit;
}

namespace {

struct Individual {
  std::vector<int> genes;
  double mdl = kInf;
};

// Fitness of a candidate: +infinity when spacing or estimability fails.
double candidate_mdl(SegmentScorer& scorer, const std::vector<int>& taus,
                     int n, int minlen) {
  int prev = 0;
  for (std::size_t j = 0; j <= taus.size(); ++j) {
    int next = (j < taus.size()) ? taus[j] : n;
    if (next - prev < minlen) return kInf;
    prev = next;
  }
  double total = 0.0;
  prev = 0;
  for (std::size_t j = 0; j <= taus.size(); ++j) {
    int next = (j < taus.size()) ? taus[j] : n;
    SegmentScorer::Score score = scorer.window(prev, next);
    if (!score.ok) return kInf;
    total += score.loglik;
    prev = next;
  }
  return mdl_from_parts(n, static_cast<int>(taus.size()),
                        segment_lengths(n, taus), total, minlen);
}

int tournament_pick(const std::vector<Individual>& pop, int rounds, Rng& rng) {
  int best = static_cast<int>(rng.next_u64() % pop.size());
  for (int r = 1; r < rounds; ++r) {
    int cand = static_cast<int>(rng.next_u64() % pop.size());
    if (pop[cand].mdl < pop[best].mdl) best = cand;  // ties keep the first
  }
  return best;
}

int geometric_magnitude(double q, Rng& rng, int cap) {
  int mag = 1;
  while (mag < cap && rng.uniform() >= q) ++mag;
  return mag;
}

struct LevelResult {
  Individual best;
  GaTrace trace;
};

LevelResult ga_level(SegmentScorer& scorer, int m, const GaConfig& config,
                     Rng& rng) {
  const BoundedSeries& series = scorer.series();
  const int n = series.size();
  const double eps = effective_epsilon(config, n);
  const int minlen = min_segment_length(eps, n);
  const int lo = minlen;
  const int hi = n - minlen;
  if (m < 1 || lo > hi || (m + 1) * minlen > n) {
    throw Infeasible("spacing admits no candidate with " + std::to_string(m) +
                     " change points (n=" + std::to_string(n) +
                     ", min segment " + std::to_string(minlen) + ")");
  }
  int pop_size = config.population_size > 0
                     ? config.population_size
                     : std::max(4, config.population_scale * m);
  if (pop_size < 4) throw OutOfDomain("population must be >= 4");
  int elite = std::clamp(config.elite, 0, pop_size - 1);

  auto start_time = std::chrono::steady_clock::now();

  std::vector<Individual> pop(pop_size);
  // Half the seeds spread evenly with jitter (feasible by construction when
  // the level is feasible at all); the rest uniform — both then repaired.
  for (int idx = 0; idx < pop_size; ++idx) {
    std::vector<int>& g = pop[idx].genes;
    g.resize(m);
    if (idx < (pop_size + 1) / 2) {
      for (int j = 0; j < m; ++j) {
        double base = static_cast<double>(n) * (j + 1) / (m + 1);
        int jitter = static_cast<int>(rng.next_u64() % (minlen + 1)) -
                     minlen / 2;
        g[j] = std::clamp(static_cast<int>(std::lround(base)) + jitter, lo, hi);
      }
    } else {
      for (int j = 0; j < m; ++j) {
        g[j] = lo + static_cast<int>(rng.next_u64() %
                                     static_cast<std::uint64_t>(hi - lo + 1));
      }
    }
    std::sort(g.begin(), g.end());
  }

  auto evaluate = [&](std::vector<Individual>& group, int first) {
    int count = static_cast<int>(group.size()) - first;
    parallel_for(count, config.threads, [&](int i) {
      Individual& ind = group[first + i];
      ind.mdl = candidate_mdl(scorer, ind.genes, n, minlen);
    });
  };
  evaluate(pop, 0);

  auto better = [](const Individual& a, const Individual& b) {
    return a.mdl < b.mdl;
  };

  Individual best_ever = *std::min_element(pop.begin(), pop.end(), better);
  LevelResult result;
  result.trace.m = m;
  result.trace.best_per_generation.reserve(config.generations);

  for (int gen = 0; gen < config.generations; ++gen) {
    std::sort(pop.begin(), pop.end(), better);
    if (pop.front().mdl < best_ever.mdl) best_ever = pop.front();
    result.trace.best_per_generation.push_back(best_ever.mdl);

    std::vector<Individual> next;
    next.reserve(pop_size);
    for (int e = 0; e < elite; ++e) next.push_back(pop[e]);
    int children = pop_size - elite;
    int n_cross = static_cast<int>(
        std::lround(config.crossover_fraction * children));
    n_cross = std::clamp(n_cross, 0, children);

    for (int c = 0; c < children; ++c) {
      Individual child;
      if (c < n_cross) {
        const Individual& pa = pop[tournament_pick(pop, config.tournament, rng)];
        const Individual& pb = pop[tournament_pick(pop, config.tournament, rng)];
        child.genes.resize(m);
        if (m == 1) {
          child.genes[0] = (pa.mdl <= pb.mdl ? pa : pb).genes[0];
        } else {
          int cut = 1 + static_cast<int>(rng.next_u64() %
                                         static_cast<std::uint64_t>(m - 1));
          for (int j = 0; j < cut; ++j) child.genes[j] = pa.genes[j];
          for (int j = cut; j < m; ++j) child.genes[j] = pb.genes[j];
        }
      } else {
        child = pop[tournament_pick(pop, config.tournament, rng)];
        for (int j = 0; j < m; ++j) {
          if (rng.uniform() < config.mutation_prob) {
            int mag = geometric_magnitude(config.mutation_geom, rng, n);
            int sign = (rng.uniform() < 0.5) ? -1 : 1;
            child.genes[j] += sign * mag;
          }
        }
      }
      // repair: order and clamp; duplicates survive and are scored +inf
      for (int& gene : child.genes) gene = std::clamp(gene, lo, hi);
      std::sort(child.genes.begin(), child.genes.end());
      next.push_back(std::move(child));
    }
    pop = std::move(next);
    evaluate(pop, elite);
  }
  for (const Individual& ind : pop) {
    if (ind.mdl < best_ever.mdl) best_ever = ind;
  }
  result.trace.best_per_generation.push_back(best_ever.mdl);
  result.trace.best_mdl = best_ever.mdl;
  result.trace.wall_ms =
      std::chrono::duration<double, std::milli>(
          std::chrono::steady_clock::now() - start_time)
          .count();
  result.best = best_ever;
  return result;
}

MdlFit assemble_fit(const BoundedSeries& series, const std::vector<int>& taus,
                    const GaConfig& config, std::vector<GaTrace> log) {
  MdlFit fit;
  fit.n = series.size();
  fit.upper_bound = series.upper_bound;
  fit.change_points = taus;
  for (int tau : taus) {
    fit.relative_locations.push_back(static_cast<double>(tau) / fit.n);
  }
  double eps = effective_epsilon(config, fit.n);
  SegmentFit sf = fit_segments(series, taus, config.likelihood, eps);
  fit.segment_estimates = sf.estimates;
  fit.segment_loglik = sf.loglik;
  fit.mdl = sf.mdl;
  fit.search_log = std::move(log);
  return fit;
}

MdlFit sweep(const BoundedSeries& series, const GaConfig& config, Rng& rng,
             bool early_stop) {
  check_series(series);
  const int n = series.size();
  const double eps = effective_epsilon(config, n);
  const int minlen = min_segment_length(eps, n);
  int level_cap = static_cast<int>(std::floor(1.0 / eps)) + 1;
  if (config.max_changepoints > 0) {
    level_cap = std::min(level_cap, config.max_changepoints);
  }
  int feasible_cap = n / minlen - 1;
  level_cap = std::min(level_cap, feasible_cap);
  if (level_cap < 1) {
    throw Infeasible("spacing admits no single change point at n=" +
                     std::to_string(n));
  }

  SegmentScorer scorer(series, config.likelihood, config.threads > 1);
  std::vector<GaTrace> log;
  Individual incumbent;
  int incumbent_m = 0;
  for (int m = 1; m <= level_cap; ++m) {
    LevelResult level = ga_level(scorer, m, config, rng);
    log.push_back(std::move(level.trace));
    if (m == 1 || level.best.mdl < incumbent.mdl) {
      incumbent = level.best;
      incumbent_m = m;
    } else if (early_stop && level.best.mdl > incumbent.mdl) {
      break;
    }
  }
  (void)incumbent_m;

  std::vector<int> taus = incumbent.genes;
  bool have_candidate = std::isfinite(incumbent.mdl);
  if (!have_candidate) taus.clear();
  if (config.compare_m0 || !have_candidate) {
    SegmentScorer::Score whole = scorer.window(0, n);
    if (whole.ok && config.compare_m0) {
      double mdl0 = mdl_from_parts(n, 0, {n}, whole.loglik, minlen);
      if (mdl0 <= incumbent.mdl) taus.clear();  // ties keep the smaller m
    }
    if (!have_candidate && !whole.ok) {
      throw DegenerateSeries("no feasible segmentation and the whole series "
                             "cannot be estimated");
    }
  }
  if (!have_candidate && !config.compare_m0) {
    throw Infeasible("genetic search found no feasible candidate");
  }
  return assemble_fit(series, taus, config, std::move(log));
}

}  // namespace

MdlFit ga_search(const BoundedSeries& series, int m, const GaConfig& config,
                 Rng& rng) {
  check_series(series);
  SegmentScorer scorer(series, config.likelihood, config.threads > 1);
  LevelResult level = ga_level(scorer, m, config, rng);
  if (!std::isfinite(level.best.mdl)) {
    throw Infeasible("no feasible candidate found at m = " +
                     std::to_string(m));
  }
  return assemble_fit(series, level.best.genes, config, {level.trace});
}

MdlFit s_ga(const BoundedSeries& series, const GaConfig& config, Rng& rng) {
  return sweep(series, config, rng, true);
}

MdlFit exhaustive_m_sweep(const BoundedSeries& series, const GaConfig& config,
                          Rng& rng) {
  return sweep(series, config, rng, false);
}

}  // namespace boundedcp
