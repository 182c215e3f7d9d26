#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "boundedcp/errors.hpp"
#include "boundedcp/rng.hpp"

namespace boundedcp {

// Parameters of the binomial autoregression on {0, ..., N}:
//
//   X_t = alpha ∘ X_{t-1} + beta ∘ (N - X_{t-1}),
//
// where ∘ is binomial thinning, beta = p(1-rho) and alpha = beta + rho.
// Admissible domain: p in (0,1) and rho in (max{-p/(1-p), -(1-p)/p}, 1),
// which is exactly the region where both thinning probabilities lie in (0,1).
struct BarParams {
  double p = 0.5;   // marginal success probability, E X_t = N p
  double rho = 0.0; // lag-one autocorrelation

  double beta() const { return p * (1.0 - rho); }
  double alpha() const { return beta() + rho; }
};

// Greatest lower bound of the admissible rho interval for a given p.
double rho_lower_bound(double p);

// Validates (p, rho); throws OutOfDomain outside the open admissible region.
BarParams make_params(double p, double rho);

bool params_valid(double p, double rho);

// Observed count series x_1..x_n on {0, ..., upper_bound}. `init_state`
// is simulation metadata (the pre-sample state X_0); estimators ignore it
// and condition on x_1.
struct BoundedSeries {
  std::vector<int> counts;
  int upper_bound = 0;
  std::optional<int> init_state;

  int size() const { return static_cast<int>(counts.size()); }
};

// Throws OutOfDomain unless n >= 2, upper_bound >= 1 and every count lies
// in [0, upper_bound].
void check_series(const BoundedSeries& series);

// Piecewise-constant parameter regime. change_points are 1-based positions
// tau_1 < ... < tau_m; observation x_tau is the last of its segment, so
// segment j covers (tau_{j-1}, tau_j] with tau_0 = 0 and tau_{m+1} = n.
struct SegmentedModel {
  int upper_bound = 0;
  std::vector<int> change_points;
  std::vector<BarParams> segment_params;  // one per segment, size m+1
};

// Throws OutOfDomain if the model is inconsistent with series length n.
void check_model(const SegmentedModel& model, int n);

// Binomial thinning prob ∘ x: a Binomial(x, prob) draw.
int binomial_thin(int x, double prob, Rng& rng);

// One transition of the chain from state x_prev.
int bar_step(int x_prev, const BarParams& params, int upper_bound, Rng& rng);

// E(X_t | X_{t-1} = x_prev) = rho x_prev + N p (1 - rho).
double conditional_mean(int x_prev, const BarParams& params, int upper_bound);

// Var(X_t | X_{t-1} = x_prev)
//   = rho(1-rho)(1-2p) x_prev + N p (1-rho) [1 - p(1-rho)].
double conditional_variance(int x_prev, const BarParams& params,
                            int upper_bound);

// Exact `steps`-ahead transition probability P(X_{t+h} = to | X_t = from).
// The h-step kernel is again of thinning form with
// beta_h = p(1 - rho^h), alpha_h = beta_h + rho^h (signed power).
double transition_prob(int from, int to, int steps, const BarParams& params,
                       int upper_bound);

// Dense (N+1)x(N+1) kernel; row `from`, column `to`.
Eigen::MatrixXd transition_matrix(const BarParams& params, int upper_bound,
                                  int steps = 1);

// One-step transition probability together with its first and second
// partial derivatives in (rho, p). Exact finite sums, no differencing.
struct TransitionDerivs {
  double prob = 0;
  double d_rho = 0, d_p = 0;
  double d_rho_rho = 0, d_rho_p = 0, d_p_p = 0;
};
TransitionDerivs transition_derivs(int from, int to, const BarParams& params,
                                   int upper_bound);

// Simulates x_1..x_n; X_0 is Binomial(N, p) unless `init` fixes it.
// The realized X_0 is stored in the result's init_state.
BoundedSeries simulate_bar(const BarParams& params, int upper_bound, int n,
                           Rng& rng, std::optional<int> init = {});

// Regime-switch convention at a change-point.
enum class SegmentStart {
  carry_over,   // new segment evolves from the last value of the old one
  independent,  // state re-drawn Binomial(N, p_new) when a segment begins
};

BoundedSeries simulate_mcp_bar(const SegmentedModel& model, int n, Rng& rng,
                               SegmentStart start_rule = SegmentStart::carry_over);

namespace detail {
// Exact binomial coefficient for n <= 60 (integer table), lgamma beyond.
double choose(int n, int k);
double log_choose(int n, int k);
// Signed integer power, exact for negative bases.
double signed_pow(double base, int exponent);
}  // namespace detail

}  // namespace boundedcp
