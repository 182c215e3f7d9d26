#include "boundedcp/bar_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace boundedcp {

namespace detail {

namespace {
// Pascal triangle of exact coefficients up to n = 60; C(60,30) ~ 1.18e17
// still fits a uint64 exactly, and the double conversion is faithful to
// one ulp which is far below every tolerance used downstream.
constexpr int kChooseMax = 60;

const std::array<std::array<double, kChooseMax + 1>, kChooseMax + 1>&
choose_table() {
  static const auto table = [] {
    std::array<std::array<double, kChooseMax + 1>, kChooseMax + 1> t{};
    unsigned long long prev[kChooseMax + 1] = {0};
    unsigned long long cur[kChooseMax + 1] = {0};
    for (int n = 0; n <= kChooseMax; ++n) {
      cur[0] = 1ULL;
      for (int k = 1; k <= n; ++k) {
        cur[k] = prev[k - 1] + (k <= n - 1 ? prev[k] : 0ULL);
      }
      for (int k = 0; k <= n; ++k) t[n][k] = static_cast<double>(cur[k]);
      for (int k = 0; k <= n; ++k) prev[k] = cur[k];
    }
    return t;
  }();
  return table;
}
}  // namespace

double choose(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  if (n <= kChooseMax) return choose_table()[n][k];
  return std::exp(log_choose(n, k));
}

double log_choose(int n, int k) {
  if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double signed_pow(double base, int exponent) {
  double result = 1.0;
  double b = base;
  int e = exponent;
  while (e > 0) {
    if (e & 1) result *= b;
    b *= b;
    e >>= 1;
  }
  return result;
}

}  // namespace detail

double rho_lower_bound(double p) {
  return std::max(-p / (1.0 - p), -(1.0 - p) / p);
}

bool params_valid(double p, double rho) {
  if (!(p > 0.0 && p < 1.0)) return false;
  return rho > rho_lower_bound(p) && rho < 1.0;
}

BarParams make_params(double p, double rho) {
  if (!params_valid(p, rho)) {
    throw OutOfDomain("invalid parameters p=" + std::to_string(p) +
                      " rho=" + std::to_string(rho) +
                      " (need p in (0,1), rho in (max{-p/(1-p),-(1-p)/p}, 1))");
  }
  return BarParams{p, rho};
}

void check_series(const BoundedSeries& series) {
  if (series.upper_bound < 1) {
    throw OutOfDomain("series upper bound must be >= 1");
  }
  if (series.size() < 2) {
    throw OutOfDomain("series must hold at least 2 observations");
  }
  for (int i = 0; i < series.size(); ++i) {
    int c = series.counts[i];
    if (c < 0 || c > series.upper_bound) {
      throw OutOfDomain("count " + std::to_string(c) + " at position " +
                        std::to_string(i + 1) + " outside [0, " +
                        std::to_string(series.upper_bound) + "]");
    }
  }
}

void check_model(const SegmentedModel& model, int n) {
  if (model.upper_bound < 1) throw OutOfDomain("upper bound must be >= 1");
  if (n < 2) throw OutOfDomain("series length must be >= 2");
  const auto& cps = model.change_points;
  if (model.segment_params.size() != cps.size() + 1) {
    throw OutOfDomain("need one parameter set per segment (m+1)");
  }
  for (std::size_t j = 0; j < cps.size(); ++j) {
    if (cps[j] < 1 || cps[j] > n - 1) {
      throw OutOfDomain("change point " + std::to_string(cps[j]) +
                        " outside [1, n-1]");
    }
    if (j > 0 && cps[j] <= cps[j - 1]) {
      throw OutOfDomain("change points must be strictly increasing");
    }
  }
  for (const auto& params : model.segment_params) {
    make_params(params.p, params.rho);
  }
}

int binomial_thin(int x, double prob, Rng& rng) {
  if (x < 0) throw OutOfDomain("cannot thin a negative count");
  if (prob < 0.0 || prob > 1.0) {
    throw OutOfDomain("thinning probability outside [0,1]");
  }
  return rng.binomial(x, prob);
}

int bar_step(int x_prev, const BarParams& params, int upper_bound, Rng& rng) {
  if (x_prev < 0 || x_prev > upper_bound) {
    throw OutOfDomain("state outside [0, upper_bound]");
  }
  int survivors = binomial_thin(x_prev, params.alpha(), rng);
  int recruits = binomial_thin(upper_bound - x_prev, params.beta(), rng);
  return survivors + recruits;
}

double conditional_mean(int x_prev, const BarParams& params, int upper_bound) {
  return params.rho * x_prev + upper_bound * params.p * (1.0 - params.rho);
}

double conditional_variance(int x_prev, const BarParams& params,
                            int upper_bound) {
  double beta = params.beta();
  return params.rho * (1.0 - params.rho) * (1.0 - 2.0 * params.p) * x_prev +
         upper_bound * beta * (1.0 - beta);
}

namespace {

// h-step thinning pair (alpha_h, beta_h).
std::pair<double, double> step_probs(const BarParams& params, int steps) {
  double rho_h = detail::signed_pow(params.rho, steps);
  double beta_h = params.p * (1.0 - rho_h);
  return {beta_h + rho_h, beta_h};
}

// P(to | from) for thinning probabilities (a, b) over {0..N}: convolution of
// Binomial(from, a) survivors and Binomial(N-from, b) recruits. Direct
// products for N <= 30; log-space accumulation (scaled by the largest term)
// beyond, where the products can underflow.
double kernel_prob(int from, int to, double a, double b, int N) {
  int k_lo = std::max(0, from + to - N);
  int k_hi = std::min(from, to);
  if (k_lo > k_hi) return 0.0;
  if (N <= 30) {
    double sum = 0.0;
    for (int k = k_lo; k <= k_hi; ++k) {
      sum += detail::choose(from, k) * detail::choose(N - from, to - k) *
             std::pow(a, k) * std::pow(1.0 - a, from - k) *
             std::pow(b, to - k) * std::pow(1.0 - b, N - from - to + k);
    }
    return sum;
  }
  double la = std::log(a), l1a = std::log1p(-a);
  double lb = std::log(b), l1b = std::log1p(-b);
  double max_lt = -std::numeric_limits<double>::infinity();
  std::vector<double> lt(k_hi - k_lo + 1);
  for (int k = k_lo; k <= k_hi; ++k) {
    double v = detail::log_choose(from, k) + detail::log_choose(N - from, to - k) +
               k * la + (from - k) * l1a + (to - k) * lb +
               (N - from - to + k) * l1b;
    lt[k - k_lo] = v;
    max_lt = std::max(max_lt, v);
  }
  double sum = 0.0;
  for (double v : lt) sum += std::exp(v - max_lt);
  return std::exp(max_lt) * sum;
}

}  // namespace

double transition_prob(int from, int to, int steps, const BarParams& params,
                       int upper_bound) {
  if (upper_bound < 1) throw OutOfDomain("upper bound must be >= 1");
  if (from < 0 || from > upper_bound || to < 0 || to > upper_bound) {
    throw OutOfDomain("states outside [0, upper_bound]");
  }
  if (steps < 1) throw OutOfDomain("step count must be >= 1");
  make_params(params.p, params.rho);
  auto [a, b] = step_probs(params, steps);
  return kernel_prob(from, to, a, b, upper_bound);
}

Eigen::MatrixXd transition_matrix(const BarParams& params, int upper_bound,
                                  int steps) {
  if (upper_bound < 1) throw OutOfDomain("upper bound must be >= 1");
  if (steps < 1) throw OutOfDomain("step count must be >= 1");
  make_params(params.p, params.rho);
  auto [a, b] = step_probs(params, steps);
  int states = upper_bound + 1;
  Eigen::MatrixXd kernel(states, states);
  for (int i = 0; i < states; ++i) {
    for (int j = 0; j < states; ++j) {
      kernel(i, j) = kernel_prob(i, j, a, b, upper_bound);
    }
  }
  return kernel;
}

TransitionDerivs transition_derivs(int from, int to, const BarParams& params,
                                   int upper_bound) {
  if (from < 0 || from > upper_bound || to < 0 || to > upper_bound) {
    throw OutOfDomain("states outside [0, upper_bound]");
  }
  make_params(params.p, params.rho);
  const int N = upper_bound;
  const double a = params.alpha();
  const double b = params.beta();
  int k_lo = std::max(0, from + to - N);
  int k_hi = std::min(from, to);

  // Accumulate the kernel sum and its derivatives in the thinning pair
  // (a, b); each term t_k contributes t_k * g for the first derivatives
  // and t_k * (g^2 - h) for the pure seconds (g, h = d log t, -d^2 log t).
  double S = 0, Sa = 0, Sb = 0, Saa = 0, Sbb = 0, Sab = 0;
  for (int k = k_lo; k <= k_hi; ++k) {
    int m = N - from - to + k;  // exponent of (1 - b)
    double t = detail::choose(from, k) * detail::choose(N - from, to - k) *
               std::pow(a, k) * std::pow(1.0 - a, from - k) *
               std::pow(b, to - k) * std::pow(1.0 - b, m);
    double ga = k / a - (from - k) / (1.0 - a);
    double ha = k / (a * a) + (from - k) / ((1.0 - a) * (1.0 - a));
    double gb = (to - k) / b - m / (1.0 - b);
    double hb = (to - k) / (b * b) + m / ((1.0 - b) * (1.0 - b));
    S += t;
    Sa += t * ga;
    Sb += t * gb;
    Saa += t * (ga * ga - ha);
    Sbb += t * (gb * gb - hb);
    Sab += t * ga * gb;
  }

  // Chain rule to (rho, p): a = p(1-rho) + rho, b = p(1-rho) gives
  // da/drho = 1-p, da/dp = 1-rho, db/drho = -p, db/dp = 1-rho and the only
  // nonzero second derivatives d2a/(drho dp) = d2b/(drho dp) = -1.
  const double ar = 1.0 - params.p, ap = 1.0 - params.rho;
  const double br = -params.p, bp = 1.0 - params.rho;

  TransitionDerivs d;
  d.prob = S;
  d.d_rho = Sa * ar + Sb * br;
  d.d_p = Sa * ap + Sb * bp;
  d.d_rho_rho = Saa * ar * ar + 2.0 * Sab * ar * br + Sbb * br * br;
  d.d_rho_p = Saa * ar * ap + Sab * (ar * bp + ap * br) + Sbb * br * bp -
              Sa - Sb;
  d.d_p_p = Saa * ap * ap + 2.0 * Sab * ap * bp + Sbb * bp * bp;
  return d;
}

BoundedSeries simulate_bar(const BarParams& params, int upper_bound, int n,
                           Rng& rng, std::optional<int> init) {
  if (init) {
    if (*init < 0 || *init > upper_bound) {
      throw OutOfDomain("initial state outside [0, upper_bound]");
    }
    make_params(params.p, params.rho);
    if (n < 2) throw OutOfDomain("series length must be >= 2");
    BoundedSeries out;
    out.upper_bound = upper_bound;
    out.counts.assign(n, 0);
    int state = *init;
    out.init_state = state;
    for (int t = 0; t < n; ++t) {
      state = bar_step(state, params, upper_bound, rng);
      out.counts[t] = state;
    }
    return out;
  }
  // Single-segment case of the segmented simulator, so the two agree
  // draw-for-draw under a shared seed.
  SegmentedModel model;
  model.upper_bound = upper_bound;
  model.segment_params = {params};
  return simulate_mcp_bar(model, n, rng, SegmentStart::carry_over);
}

BoundedSeries simulate_mcp_bar(const SegmentedModel& model, int n, Rng& rng,
                               SegmentStart start_rule) {
  check_model(model, n);
  BoundedSeries out;
  out.upper_bound = model.upper_bound;
  out.counts.assign(n, 0);

  const auto& cps = model.change_points;
  int segment = 0;
  int state = rng.binomial(model.upper_bound, model.segment_params[0].p);
  out.init_state = state;
  for (int t = 1; t <= n; ++t) {
    // segment index of observation t: first j with t <= tau_j, else last
    while (segment < static_cast<int>(cps.size()) && t > cps[segment]) {
      ++segment;
      if (start_rule == SegmentStart::independent) {
        state = rng.binomial(model.upper_bound,
                             model.segment_params[segment].p);
      }
    }
    state = bar_step(state, model.segment_params[segment], model.upper_bound,
                     rng);
    out.counts[t - 1] = state;
  }
  return out;
}

}  // namespace boundedcp
