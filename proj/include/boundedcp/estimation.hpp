#pragma once

#include <Eigen/Dense>
#include <optional>

#include "boundedcp/bar_model.hpp"
#include "boundedcp/transition_counts.hpp"

namespace boundedcp {

enum class Method { cls, mql, cml };

const char* method_name(Method method);

// Margin of the compact estimation box: p in [delta, 1-delta] and
// rho in [rho_lower_bound(p) + delta, 1 - delta].
inline constexpr double kBoxDelta = 1e-4;

// Floor applied to conditional variances inside quasi-likelihood weights so
// a single near-boundary state cannot dominate the objective.
inline constexpr double kVarianceFloor = 1e-8;

// Clamps (p, rho) into the compact box; returns true if anything moved.
bool clamp_to_box(double& p, double& rho, double delta = kBoxDelta);

struct ParamEstimate {
  BarParams params;
  Method method = Method::cls;
  double objective_value = 0.0;  // S_n (cls), Q_n (mql), log-likelihood (cml)
  int transitions = 0;           // number of (x_{t-1}, x_t) pairs used
  bool clamped = false;          // raw estimate fell outside the box
  bool optimizer_warning = false;  // iteration cap or stalled line search
};

struct LikelihoodDerivatives {
  double loglik = 0.0;
  Eigen::Vector2d score = Eigen::Vector2d::Zero();  // d loglik / d(rho, p)
  // Estimate of E[-d^2 log p / d theta d theta^T] per transition, i.e. the
  // negated mean Hessian; positive definite near an interior optimum.
  Eigen::Matrix2d observed_info = Eigen::Matrix2d::Zero();
};

// --- Conditional least squares -------------------------------------------
// Minimizes S(theta) = sum_t (x_t - rho x_{t-1} - N p (1-rho))^2 over
// transitions t = 2..n; closed form. Raw minimizer is clamped into the box
// with the `clamped` flag when it falls outside.
ParamEstimate cls_estimate(const BoundedSeries& series);
ParamEstimate cls_from_table(const TransitionTable& table);
double cls_objective(const BoundedSeries& series, const BarParams& params);

// --- Modified quasi-likelihood -------------------------------------------
// Weighted least squares with weights 1 / Var(X_t | X_{t-1}) evaluated at a
// pilot estimate (the CLS fit of the same window by default).
// Throws NonpositiveVariance if the pilot variance is <= 0; variances in
// (0, kVarianceFloor) are floored, capping the weight.
double mql_weight(int x_prev, const BarParams& pilot, int upper_bound);
ParamEstimate mql_estimate(const BoundedSeries& series);
ParamEstimate mql_from_table(const TransitionTable& table);
ParamEstimate mql_from_table_with_pilot(const TransitionTable& table,
                                        const BarParams& pilot);
double mql_objective(const BoundedSeries& series, const BarParams& params,
                     const BarParams& pilot);

// --- Conditional maximum likelihood --------------------------------------
// Log-likelihood conditioning on observation `start` (1-based):
// sum_{t = start+1}^{n} log P(x_t | x_{t-1}).
double cml_loglik(const BoundedSeries& series, const BarParams& params,
                  int start = 1);
double loglik_from_table(const TransitionTable& table, const BarParams& params);

LikelihoodDerivatives cml_derivatives(const BoundedSeries& series,
                                      const BarParams& params, int start = 1);
LikelihoodDerivatives derivs_from_table(const TransitionTable& table,
                                        const BarParams& params);

// Maximizes the conditional log-likelihood over the compact box by projected
// Newton ascent with analytic derivatives; multistart engages when the
// first start stalls. `warm` seeds the first start (prefix scans, refits).
ParamEstimate cml_estimate(const BoundedSeries& series, int start = 1);
ParamEstimate cml_from_table(const TransitionTable& table,
                             std::optional<BarParams> warm = {});

}  // namespace boundedcp
