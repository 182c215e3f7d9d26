#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "boundedcp/bar_model.hpp"
#include "boundedcp/cusum.hpp"
#include "boundedcp/errors.hpp"
#include "boundedcp/estimation.hpp"
#include "boundedcp/rng.hpp"
#include "boundedcp/transition_counts.hpp"

#include "oracles.hpp"

using namespace boundedcp;

namespace {

BoundedSeries sim(double p, double rho, int upper_bound, int n,
                  std::uint64_t seed) {
  Rng rng(seed);
  return simulate_bar(make_params(p, rho), upper_bound, n, rng);
}

}  // namespace

TEST_CASE("least squares closed form minimizes its own objective") {
  Rng rng(101);
  for (int rep = 0; rep < 12; ++rep) {
    const double p = 0.2 + 0.6 * rng.uniform();
    const double rho = -0.2 + 0.7 * rng.uniform();
    const BoundedSeries s = sim(p, rho, 10, 200, 1000 + rep);
    const ParamEstimate est = cls_estimate(s);
    if (est.clamped) continue;  // boundary cases carry no interior optimum

    auto f = [&](double rr, double pp) {
      return cls_objective(s, BarParams{pp, rr});
    };
    // Numerical minimizer from an offset start must land on the closed form.
    const auto nm = oracle::nelder_mead_2d(f, est.params.rho + 0.07,
                                           est.params.p - 0.05);
    CHECK(std::abs(nm[0] - est.params.rho) < 1e-6);
    CHECK(std::abs(nm[1] - est.params.p) < 1e-6);
    CHECK(est.objective_value ==
          doctest::Approx(f(est.params.rho, est.params.p)).epsilon(1e-10));

    // And no grid point beats it.
    const double s_min = f(est.params.rho, est.params.p);
    for (int a = 0; a <= 20; ++a) {
      for (int b = 0; b <= 20; ++b) {
        const double rr = -0.4 + 1.3 * a / 20.0;
        const double pp = 0.05 + 0.9 * b / 20.0;
        CHECK(f(rr, pp) >= s_min - 1e-9);
      }
    }
  }
}

TEST_CASE("least squares degenerate inputs throw") {
  BoundedSeries s;
  s.upper_bound = 10;
  s.counts = std::vector<int>(50, 4);  // constant regressor
  CHECK_THROWS_AS(cls_estimate(s), DegenerateSeries);
  TransitionTable empty(10);
  CHECK_THROWS_AS(cls_from_table(empty), DegenerateSeries);
}

TEST_CASE("least squares estimates concentrate around the truth") {
  const double p = 0.3, rho = 0.4;
  double sum_p = 0.0, sum_rho = 0.0;
  const int reps = 60;
  for (int r = 0; r < reps; ++r) {
    const BoundedSeries s = sim(p, rho, 10, 4000, 7000 + r);
    const ParamEstimate est = cls_estimate(s);
    sum_p += est.params.p;
    sum_rho += est.params.rho;
  }
  CHECK(sum_p / reps == doctest::Approx(p).epsilon(0.02));
  CHECK(sum_rho / reps == doctest::Approx(rho).epsilon(0.06));
}

TEST_CASE("least squares is equivariant under count reflection") {
  // Replacing x by N - x maps p to 1-p and leaves rho unchanged.
  const BoundedSeries s = sim(0.35, 0.25, 10, 400, 42);
  BoundedSeries r = s;
  for (auto& v : r.counts) v = s.upper_bound - v;
  const ParamEstimate es = cls_estimate(s);
  const ParamEstimate er = cls_estimate(r);
  CHECK(std::abs(er.params.rho - es.params.rho) < 1e-10);
  CHECK(std::abs(er.params.p - (1.0 - es.params.p)) < 1e-10);
}

TEST_CASE("quasi-likelihood weights and closed form") {
  const BarParams pilot = make_params(0.3, 0.4);
  // 1 / Var(X_t | X_{t-1} = 4) at N = 10; variance checked in the model suite.
  CHECK(mql_weight(4, pilot, 10) == doctest::Approx(1.0 / 1.86).epsilon(1e-12));

  // A pilot with rho(1-rho)(1-2p) < 0 still yields positive variances for
  // admissible parameters; the weight must stay finite and positive.
  const BarParams neg = make_params(0.8, 0.5);
  for (int x = 0; x <= 10; ++x) CHECK(mql_weight(x, neg, 10) > 0.0);

  const BoundedSeries s = sim(0.3, 0.4, 10, 300, 61);
  const ParamEstimate est = mql_estimate(s);
  if (!est.clamped) {
    const TransitionTable table = count_transitions(s);
    const ParamEstimate cls = cls_from_table(table);
    auto f = [&](double rr, double pp) {
      return mql_objective(s, BarParams{pp, rr}, cls.params);
    };
    const auto nm = oracle::nelder_mead_2d(f, est.params.rho + 0.06,
                                           est.params.p - 0.04);
    CHECK(std::abs(nm[0] - est.params.rho) < 1e-6);
    CHECK(std::abs(nm[1] - est.params.p) < 1e-6);
  }
}

TEST_CASE("uniform pilot weights reduce quasi-likelihood to least squares") {
  // With a pilot at p = 1/2 the conditional variance is constant in the
  // lagged state, so every transition gets the same weight.
  const BoundedSeries s = sim(0.45, 0.2, 12, 350, 77);
  const TransitionTable table = count_transitions(s);
  const ParamEstimate cls = cls_from_table(table);
  const ParamEstimate mql =
      mql_from_table_with_pilot(table, make_params(0.5, 0.3));
  CHECK(std::abs(mql.params.rho - cls.params.rho) < 1e-10);
  CHECK(std::abs(mql.params.p - cls.params.p) < 1e-10);
}

TEST_CASE("likelihood value, score and information agree across encodings") {
  const BoundedSeries s = sim(0.4, 0.25, 8, 260, 88);
  const TransitionTable table = count_transitions(s);
  const BarParams th = make_params(0.37, 0.21);
  CHECK(cml_loglik(s, th) ==
        doctest::Approx(loglik_from_table(table, th)).epsilon(1e-12));
  const LikelihoodDerivatives a = cml_derivatives(s, th);
  const LikelihoodDerivatives b = derivs_from_table(table, th);
  CHECK(a.loglik == doctest::Approx(b.loglik).epsilon(1e-12));
  CHECK((a.score - b.score).norm() < 1e-10);
  CHECK((a.observed_info - b.observed_info).norm() < 1e-10);
}

TEST_CASE("likelihood score matches finite differences") {
  Rng rng(321);
  for (int rep = 0; rep < 10; ++rep) {
    const double p0 = 0.25 + 0.5 * rng.uniform();
    const double rho0 = -0.1 + 0.5 * rng.uniform();
    const BoundedSeries s = sim(p0, rho0, 9, 240, 5000 + rep);
    const double pe = 0.2 + 0.6 * rng.uniform();
    const double re = -0.05 + 0.5 * rng.uniform();
    const BarParams th = make_params(pe, re);

    auto f = [&](double rr, double pp) {
      return cml_loglik(s, BarParams{pp, rr});
    };
    const LikelihoodDerivatives d = cml_derivatives(s, th);
    const auto g = oracle::fd_gradient(f, th.rho, th.p, 1e-5);
    const double gnorm = std::max({1.0, std::abs(g[0]), std::abs(g[1])});
    CHECK(std::abs(d.score(0) - g[0]) / gnorm < 1e-6);
    CHECK(std::abs(d.score(1) - g[1]) / gnorm < 1e-6);

    const auto h = oracle::fd_hessian(f, th.rho, th.p, 1e-4);
    const double T = static_cast<double>(s.counts.size()) - 1.0;
    // observed_info is the negated mean Hessian.
    const double scale =
        std::max({1.0, std::abs(h[0]), std::abs(h[1]), std::abs(h[2])});
    CHECK(std::abs(-T * d.observed_info(0, 0) - h[0]) / scale < 1e-4);
    CHECK(std::abs(-T * d.observed_info(0, 1) - h[1]) / scale < 1e-4);
    CHECK(std::abs(-T * d.observed_info(1, 1) - h[2]) / scale < 1e-4);
  }
}

TEST_CASE("likelihood maximizer: interior score vanishes") {
  for (int rep = 0; rep < 8; ++rep) {
    const BoundedSeries s = sim(0.35, 0.3, 10, 300, 9100 + rep);
    const ParamEstimate est = cml_estimate(s);
    if (est.clamped) continue;
    const LikelihoodDerivatives d = cml_derivatives(s, est.params);
    CHECK(d.score.norm() < 1e-5);
    CHECK_FALSE(est.optimizer_warning);
    // No Nelder-Mead point beats it.
    auto f = [&](double rr, double pp) {
      if (!params_valid(pp, rr)) return 1e300;
      return -cml_loglik(s, BarParams{pp, rr});
    };
    const auto nm = oracle::nelder_mead_2d(f, est.params.rho + 0.05,
                                           est.params.p + 0.04);
    CHECK(est.objective_value >= -f(nm[0], nm[1]) - 1e-7);
  }
}

TEST_CASE("unit-range likelihood fit equals the two-state chain MLE") {
  // On {0,1} the model is a saturated two-state chain: alpha-hat and
  // beta-hat are the empirical transition frequencies, so
  // rho = alpha - beta and p = beta / (1 - rho).
  for (int rep = 0; rep < 10; ++rep) {
    const BoundedSeries s = sim(0.4, 0.3, 1, 400, 333 + rep);
    const auto mle = oracle::two_state_mle(s.counts);
    if (!mle.ok) continue;
    const double rho_star = mle.p11 - mle.p01;
    const double p_star = mle.p01 / (1.0 - rho_star);
    if (!params_valid(p_star, rho_star)) continue;
    double pc = p_star, rc = rho_star;
    if (clamp_to_box(pc, rc)) continue;  // boundary-clamped: skip
    const ParamEstimate est = cml_estimate(s);
    CHECK(std::abs(est.params.rho - rho_star) < 1e-6);
    CHECK(std::abs(est.params.p - p_star) < 1e-6);
  }
}

TEST_CASE("prefix windows reuse the full-sample machinery") {
  const BoundedSeries s = sim(0.3, 0.2, 10, 200, 555);
  const PrefixCounts prefix(s);
  const TransitionTable head = prefix.window(1, 60);
  const TransitionTable direct = count_transitions(s, 1, 60);
  CHECK((head.mat() - direct.mat()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(head.total() == doctest::Approx(59.0));

  const ParamEstimate a = cls_from_table(head);
  BoundedSeries cut;
  cut.upper_bound = s.upper_bound;
  cut.counts.assign(s.counts.begin(), s.counts.begin() + 60);
  const ParamEstimate b = cls_estimate(cut);
  CHECK(std::abs(a.params.rho - b.params.rho) < 1e-12);
  CHECK(std::abs(a.params.p - b.params.p) < 1e-12);
}

TEST_CASE("sandwich confidence intervals achieve nominal coverage") {
  // 95% CI from the least-squares sandwich (1/T) V^{-1} W V^{-1}.
  const double p = 0.3, rho = 0.4;
  const int reps = 1000;
  int cover_p = 0, cover_rho = 0;
  for (int r = 0; r < reps; ++r) {
    const BoundedSeries s = sim(p, rho, 10, 2000, 40000 + r);
    const TransitionTable table = count_transitions(s);
    const ParamEstimate est = cls_from_table(table);
    const auto [v, w] = vw_hat_cls(table, est.params);
    const Eigen::Matrix2d vinv = invert_2x2(v);
    const Eigen::Matrix2d cov = vinv * w * vinv / table.total();
    const double se_rho = std::sqrt(cov(0, 0));
    const double se_p = std::sqrt(cov(1, 1));
    if (std::abs(est.params.rho - rho) <= 1.959964 * se_rho) ++cover_rho;
    if (std::abs(est.params.p - p) <= 1.959964 * se_p) ++cover_p;
  }
  CHECK(cover_rho / static_cast<double>(reps) > 0.92);
  CHECK(cover_rho / static_cast<double>(reps) < 0.97);
  CHECK(cover_p / static_cast<double>(reps) > 0.92);
  CHECK(cover_p / static_cast<double>(reps) < 0.97);
}

TEST_CASE("estimates are reported in a consistent order and metadata") {
  const BoundedSeries s = sim(0.45, 0.1, 10, 150, 777);
  for (Method m : {Method::cls, Method::mql, Method::cml}) {
    ParamEstimate est;
    switch (m) {
      case Method::cls: est = cls_estimate(s); break;
      case Method::mql: est = mql_estimate(s); break;
      case Method::cml: est = cml_estimate(s); break;
    }
    CHECK(est.method == m);
    CHECK(est.transitions == 149);
    CHECK(params_valid(est.params.p, est.params.rho));
  }
  CHECK(std::string(method_name(Method::cls)) == "cls");
  CHECK(std::string(method_name(Method::mql)) == "mql");
  CHECK(std::string(method_name(Method::cml)) == "cml");
}
