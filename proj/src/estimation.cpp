#include "boundedcp/estimation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace boundedcp {

const char* method_name(Method method) {
  switch (method) {
    case Method::cls: return "cls";
    case Method::mql: return "mql";
    case Method::cml: return "cml";
  }
  return "?";
}

bool clamp_to_box(double& p, double& rho, double delta) {
  bool moved = false;
  double p0 = std::clamp(p, delta, 1.0 - delta);
  if (p0 != p) moved = true;
  double lo = rho_lower_bound(p0) + delta;
  double hi = 1.0 - delta;
  double rho0 = std::clamp(rho, lo, hi);
  if (rho0 != rho) moved = true;
  p = p0;
  rho = rho0;
  return moved;
}

namespace {

struct WindowSums {
  double T = 0, sx = 0, sxl = 0, sxx = 0, sll = 0, sy2 = 0;
};

WindowSums sums_from_table(const TransitionTable& table) {
  WindowSums s;
  const Eigen::MatrixXd& c = table.mat();
  for (int i = 0; i < c.rows(); ++i) {
    for (int j = 0; j < c.cols(); ++j) {
      double w = c(i, j);
      if (w == 0.0) continue;
      s.T += w;
      s.sx += w * j;
      s.sxl += w * i;
      s.sxx += w * i * j;
      s.sll += w * i * i;
      s.sy2 += w * j * j;
    }
  }
  return s;
}

// Raw least-squares solution in (rho, p); throws DegenerateSeries when the
// lagged regressor has (numerically) no variance or rho pins p's scale.
std::pair<double, double> cls_raw(const WindowSums& s, int upper_bound) {
  double den = s.T * s.sll - s.sxl * s.sxl;
  double scale = std::max(1.0, s.T * s.sll + s.sxl * s.sxl);
  if (den <= 1e-12 * scale) {
    throw DegenerateSeries("lagged series carries no variance");
  }
  double rho = (s.T * s.sxx - s.sx * s.sxl) / den;
  if (std::abs(1.0 - rho) < 1e-10) {
    throw DegenerateSeries("least-squares slope at unit root");
  }
  double p = (s.sx - rho * s.sxl) / (s.T * upper_bound * (1.0 - rho));
  return {rho, p};
}

double objective_cls(const WindowSums& s, int upper_bound,
                     const BarParams& params) {
  double c = upper_bound * params.p * (1.0 - params.rho);
  double rho = params.rho;
  return s.sy2 - 2.0 * rho * s.sxx - 2.0 * c * s.sx + rho * rho * s.sll +
         2.0 * rho * c * s.sxl + s.T * c * c;
}

ParamEstimate finish_ls_estimate(Method method, double rho, double p,
                                 int transitions) {
  ParamEstimate est;
  est.method = method;
  est.transitions = transitions;
  est.clamped = clamp_to_box(p, rho);
  est.params = BarParams{p, rho};
  return est;
}

}  // namespace

ParamEstimate cls_from_table(const TransitionTable& table) {
  WindowSums s = sums_from_table(table);
  if (s.T < 2) throw DegenerateSeries("need at least two transitions");
  auto [rho, p] = cls_raw(s, table.upper_bound());
  ParamEstimate est =
      finish_ls_estimate(Method::cls, rho, p, static_cast<int>(s.T));
  est.objective_value = objective_cls(s, table.upper_bound(), est.params);
  return est;
}

ParamEstimate cls_estimate(const BoundedSeries& series) {
  return cls_from_table(count_transitions(series));
}

double cls_objective(const BoundedSeries& series, const BarParams& params) {
  TransitionTable table = count_transitions(series);
  return objective_cls(sums_from_table(table), series.upper_bound, params);
}

double mql_weight(int x_prev, const BarParams& pilot, int upper_bound) {
  double v = conditional_variance(x_prev, pilot, upper_bound);
  if (v <= 0.0) {
    throw NonpositiveVariance("conditional variance " + std::to_string(v) +
                              " at state " + std::to_string(x_prev));
  }
  return 1.0 / std::max(v, kVarianceFloor);
}

namespace {

struct WeightedSums {
  double sw = 0, swx = 0, swxl = 0, swxx = 0, swll = 0, swy2 = 0;
};

WeightedSums weighted_sums(const TransitionTable& table,
                           const BarParams& pilot) {
  int N = table.upper_bound();
  std::vector<double> w(N + 1);
  for (int i = 0; i <= N; ++i) w[i] = mql_weight(i, pilot, N);
  WeightedSums s;
  const Eigen::MatrixXd& c = table.mat();
  for (int i = 0; i <= N; ++i) {
    for (int j = 0; j <= N; ++j) {
      double cw = c(i, j);
      if (cw == 0.0) continue;
      double d = cw * w[i];
      s.sw += d;
      s.swx += d * j;
      s.swxl += d * i;
      s.swxx += d * i * j;
      s.swll += d * i * i;
      s.swy2 += d * j * j;
    }
  }
  return s;
}

}  // namespace

ParamEstimate mql_from_table_with_pilot(const TransitionTable& table,
                                        const BarParams& pilot) {
  WeightedSums s = weighted_sums(table, pilot);
  double den = s.sw * s.swll - s.swxl * s.swxl;
  double scale = std::max(1.0, s.sw * s.swll + s.swxl * s.swxl);
  if (den <= 1e-12 * scale) {
    throw DegenerateSeries("weighted lagged series carries no variance");
  }
  double rho = (s.sw * s.swxx - s.swx * s.swxl) / den;
  if (std::abs(1.0 - rho) < 1e-10) {
    throw DegenerateSeries("weighted slope at unit root");
  }
  int N = table.upper_bound();
  double p = (s.swx - rho * s.swxl) / (N * (1.0 - rho) * s.sw);
  ParamEstimate est = finish_ls_estimate(Method::mql, rho, p,
                                         static_cast<int>(table.total()));
  // Q_n at the estimate: expand sum w (x_t - rho x_l - c)^2 from the sums.
  double c0 = N * est.params.p * (1.0 - est.params.rho);
  double r = est.params.rho;
  est.objective_value = s.swy2 - 2.0 * r * s.swxx - 2.0 * c0 * s.swx +
                        r * r * s.swll + 2.0 * r * c0 * s.swxl +
                        c0 * c0 * s.sw;
  return est;
}

ParamEstimate mql_from_table(const TransitionTable& table) {
  ParamEstimate pilot = cls_from_table(table);
  return mql_from_table_with_pilot(table, pilot.params);
}

ParamEstimate mql_estimate(const BoundedSeries& series) {
  return mql_from_table(count_transitions(series));
}

double mql_objective(const BoundedSeries& series, const BarParams& params,
                     const BarParams& pilot) {
  TransitionTable table = count_transitions(series);
  WeightedSums s = weighted_sums(table, pilot);
  double c0 = series.upper_bound * params.p * (1.0 - params.rho);
  double r = params.rho;
  return s.swy2 - 2.0 * r * s.swxx - 2.0 * c0 * s.swx + r * r * s.swll +
         2.0 * r * c0 * s.swxl + c0 * c0 * s.sw;
}

// --- Conditional maximum likelihood --------------------------------------

namespace {

// Per-theta workspace: power tables make each (i, j) kernel term a handful
// of multiplies, with no pow/exp in the inner loops.
struct PowTables {
  std::vector<double> a, oa, b, ob;  // alpha^k, (1-alpha)^k, beta^k, (1-beta)^k
  double alpha, beta;
  PowTables(const BarParams& params, int N)
      : a(N + 1), oa(N + 1), b(N + 1), ob(N + 1),
        alpha(params.alpha()), beta(params.beta()) {
    a[0] = oa[0] = b[0] = ob[0] = 1.0;
    for (int k = 1; k <= N; ++k) {
      a[k] = a[k - 1] * alpha;
      oa[k] = oa[k - 1] * (1.0 - alpha);
      b[k] = b[k - 1] * beta;
      ob[k] = ob[k - 1] * (1.0 - beta);
    }
  }
};

double pair_prob(const PowTables& w, int N, int i, int j) {
  int k_lo = std::max(0, i + j - N);
  int k_hi = std::min(i, j);
  double sum = 0.0;
  for (int k = k_lo; k <= k_hi; ++k) {
    sum += detail::choose(i, k) * detail::choose(N - i, j - k) * w.a[k] *
           w.oa[i - k] * w.b[j - k] * w.ob[N - i - j + k];
  }
  return sum;
}

struct PairDerivs {
  double prob, d_rho, d_p, d_rho_rho, d_rho_p, d_p_p;
};

PairDerivs pair_derivs(const PowTables& w, const BarParams& params, int N,
                       int i, int j) {
  int k_lo = std::max(0, i + j - N);
  int k_hi = std::min(i, j);
  double S = 0, Sa = 0, Sb = 0, Saa = 0, Sbb = 0, Sab = 0;
  double ia = 1.0 / w.alpha, ioa = 1.0 / (1.0 - w.alpha);
  double ib = 1.0 / w.beta, iob = 1.0 / (1.0 - w.beta);
  for (int k = k_lo; k <= k_hi; ++k) {
    int m = N - i - j + k;
    double t = detail::choose(i, k) * detail::choose(N - i, j - k) * w.a[k] *
               w.oa[i - k] * w.b[j - k] * w.ob[m];
    double ga = k * ia - (i - k) * ioa;
    double ha = k * ia * ia + (i - k) * ioa * ioa;
    double gb = (j - k) * ib - m * iob;
    double hb = (j - k) * ib * ib + m * iob * iob;
    S += t;
    Sa += t * ga;
    Sb += t * gb;
    Saa += t * (ga * ga - ha);
    Sbb += t * (gb * gb - hb);
    Sab += t * ga * gb;
  }
  double ar = 1.0 - params.p, ap = 1.0 - params.rho;
  double br = -params.p, bp = 1.0 - params.rho;
  PairDerivs d;
  d.prob = S;
  d.d_rho = Sa * ar + Sb * br;
  d.d_p = Sa * ap + Sb * bp;
  d.d_rho_rho = Saa * ar * ar + 2.0 * Sab * ar * br + Sbb * br * br;
  d.d_rho_p = Saa * ar * ap + Sab * (ar * bp + ap * br) + Sbb * br * bp -
              Sa - Sb;
  d.d_p_p = Saa * ap * ap + 2.0 * Sab * ap * bp + Sbb * bp * bp;
  return d;
}

}  // namespace

double loglik_from_table(const TransitionTable& table,
                         const BarParams& params) {
  make_params(params.p, params.rho);
  int N = table.upper_bound();
  PowTables w(params, N);
  const Eigen::MatrixXd& c = table.mat();
  double total = 0.0;
  for (int i = 0; i <= N; ++i) {
    for (int j = 0; j <= N; ++j) {
      double cw = c(i, j);
      if (cw == 0.0) continue;
      double prob = pair_prob(w, N, i, j);
      if (prob <= 0.0) return -std::numeric_limits<double>::infinity();
      total += cw * std::log(prob);
    }
  }
  return total;
}

LikelihoodDerivatives derivs_from_table(const TransitionTable& table,
                                        const BarParams& params) {
  make_params(params.p, params.rho);
  int N = table.upper_bound();
  PowTables w(params, N);
  const Eigen::MatrixXd& c = table.mat();
  LikelihoodDerivatives out;
  Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
  for (int i = 0; i <= N; ++i) {
    for (int j = 0; j <= N; ++j) {
      double cw = c(i, j);
      if (cw == 0.0) continue;
      PairDerivs d = pair_derivs(w, params, N, i, j);
      double ip = 1.0 / d.prob;
      out.loglik += cw * std::log(d.prob);
      double gr = d.d_rho * ip, gp = d.d_p * ip;
      out.score(0) += cw * gr;
      out.score(1) += cw * gp;
      // d^2 log P = P''/P - (P'/P)(P'/P)^T
      hess(0, 0) += cw * (d.d_rho_rho * ip - gr * gr);
      hess(0, 1) += cw * (d.d_rho_p * ip - gr * gp);
      hess(1, 1) += cw * (d.d_p_p * ip - gp * gp);
    }
  }
  hess(1, 0) = hess(0, 1);
  double T = table.total();
  if (T > 0) out.observed_info = -hess / T;
  return out;
}

double cml_loglik(const BoundedSeries& series, const BarParams& params,
                  int start) {
  return loglik_from_table(count_transitions(series, start), params);
}

LikelihoodDerivatives cml_derivatives(const BoundedSeries& series,
                                      const BarParams& params, int start) {
  return derivs_from_table(count_transitions(series, start), params);
}

namespace {

BarParams project_box(double p, double rho) {
  clamp_to_box(p, rho);
  return BarParams{p, rho};
}

// Gradient with components pointing out of an active bound zeroed.
Eigen::Vector2d projected_gradient(const BarParams& th,
                                   const Eigen::Vector2d& score) {
  double eps = 1e-12;
  Eigen::Vector2d g = score;  // order (rho, p)
  double rho_lo = rho_lower_bound(th.p) + kBoxDelta;
  double hi = 1.0 - kBoxDelta;
  if (th.rho <= rho_lo + eps && g(0) < 0) g(0) = 0;
  if (th.rho >= hi - eps && g(0) > 0) g(0) = 0;
  if (th.p <= kBoxDelta + eps && g(1) < 0) g(1) = 0;
  if (th.p >= hi - eps && g(1) > 0) g(1) = 0;
  return g;
}

struct SolveResult {
  BarParams params;
  double loglik = -std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
};

SolveResult solve_from(const TransitionTable& table, BarParams start) {
  SolveResult res;
  BarParams th = project_box(start.p, start.rho);
  LikelihoodDerivatives d = derivs_from_table(table, th);
  double f = d.loglik;
  const int max_iter = 200;
  // Near the optimum a Newton step can move theta without a representable
  // likelihood gain; a few noise-tolerant steps that shrink the gradient
  // let the gradient test fire instead of mis-reporting a stall.
  int refine_accepts = 0;
  for (int iter = 0; iter < max_iter; ++iter) {
    res.iterations = iter + 1;
    Eigen::Vector2d pg = projected_gradient(th, d.score);
    if (pg.norm() <= 1e-7) {
      res.converged = true;
      break;
    }
    // Newton step on the (unnormalized) Hessian; fall back to a scaled
    // gradient step when the Hessian is not negative definite.
    Eigen::Matrix2d H = -d.observed_info * table.total();
    double det = H(0, 0) * H(1, 1) - H(0, 1) * H(1, 0);
    Eigen::Vector2d dir;
    if (H(0, 0) < 0.0 && det > 0.0) {
      dir(0) = (-H(1, 1) * d.score(0) + H(0, 1) * d.score(1)) / det;
      dir(1) = (H(1, 0) * d.score(0) - H(0, 0) * d.score(1)) / det;
    } else {
      double scale = std::max({std::abs(H(0, 0)), std::abs(H(1, 1)), 1.0});
      dir = d.score / scale;
    }
    double step = 1.0;
    bool moved = false;
    BarParams full{};
    bool have_full = false;
    for (int half = 0; half < 40 && !moved; ++half, step *= 0.5) {
      BarParams cand = project_box(th.p + step * dir(1),
                                   th.rho + step * dir(0));
      if (cand.p == th.p && cand.rho == th.rho) continue;
      if (step == 1.0) {
        full = cand;
        have_full = true;
      }
      double fc = loglik_from_table(table, cand);
      if (fc <= f) continue;
      th = cand;
      f = fc;
      d = derivs_from_table(table, th);
      moved = true;
    }
    if (!moved && have_full && refine_accepts < 5) {
      // No representable likelihood gain left: the quadratic improvement has
      // dropped below the rounding noise of the log-likelihood sum.  Take the
      // full step anyway when it leaves the likelihood within that noise band
      // and strictly shrinks the projected gradient.
      LikelihoodDerivatives dc = derivs_from_table(table, full);
      Eigen::Vector2d pgc = projected_gradient(full, dc.score);
      double noise =
          64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f));
      if (dc.loglik >= f - noise && pgc.norm() < 0.9 * pg.norm()) {
        ++refine_accepts;
        th = full;
        f = dc.loglik;
        d = dc;
        moved = true;
      }
    }
    if (!moved) break;  // stalled; caller may try another start
  }
  res.params = th;
  res.loglik = f;
  return res;
}

}  // namespace

ParamEstimate cml_from_table(const TransitionTable& table,
                             std::optional<BarParams> warm) {
  if (table.total() < 2) {
    throw DegenerateSeries("need at least two transitions");
  }
  std::vector<BarParams> starts;
  if (warm) starts.push_back(*warm);
  try {
    starts.push_back(cls_from_table(table).params);
  } catch (const DegenerateSeries&) {
    // fall through to the fixed starts
  }
  starts.push_back(BarParams{0.5, 0.0});
  starts.push_back(BarParams{0.35, 0.3});
  starts.push_back(BarParams{0.65, -0.1});

  SolveResult best;
  bool first = true;
  for (const BarParams& s : starts) {
    SolveResult r = solve_from(table, s);
    if (r.loglik > best.loglik) best = r;
    if (first && r.converged) break;  // multistart only when the lead stalls
    first = false;
  }
  ParamEstimate est;
  est.method = Method::cml;
  est.params = best.params;
  est.objective_value = best.loglik;
  est.transitions = static_cast<int>(table.total());
  est.optimizer_warning = !best.converged;
  double p = best.params.p, rho = best.params.rho;
  // interior check — the box itself is the parameter space here, so only a
  // genuinely boundary-pinned optimum is flagged
  est.clamped = (p <= kBoxDelta || p >= 1.0 - kBoxDelta ||
                 rho <= rho_lower_bound(p) + kBoxDelta || rho >= 1.0 - kBoxDelta);
  return est;
}

ParamEstimate cml_estimate(const BoundedSeries& series, int start) {
  return cml_from_table(count_transitions(series, start));
}

}  // namespace boundedcp
