#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <vector>

#include "boundedcp/bar_model.hpp"
#include "boundedcp/errors.hpp"
#include "boundedcp/rng.hpp"

using namespace boundedcp;

TEST_CASE("admissible parameter region") {
  CHECK(rho_lower_bound(0.3) == doctest::Approx(-3.0 / 7.0).epsilon(1e-12));
  CHECK(rho_lower_bound(0.7) == doctest::Approx(-3.0 / 7.0).epsilon(1e-12));
  CHECK(rho_lower_bound(0.5) == doctest::Approx(-1.0).epsilon(1e-12));

  CHECK_NOTHROW(make_params(0.3, -0.4));
  CHECK_THROWS_AS(make_params(0.3, -0.5), OutOfDomain);  // below -3/7
  CHECK_THROWS_AS(make_params(0.3, 1.0), OutOfDomain);
  CHECK_THROWS_AS(make_params(0.0, 0.2), OutOfDomain);
  CHECK_THROWS_AS(make_params(1.0, 0.2), OutOfDomain);
  CHECK(params_valid(0.5, -0.99));
  CHECK_FALSE(params_valid(0.5, -1.0));

  // Both thinning probabilities must land strictly inside (0, 1).
  for (double p : {0.05, 0.3, 0.5, 0.8, 0.95}) {
    for (double rho : {-0.3, -0.05, 0.0, 0.4, 0.9}) {
      if (!params_valid(p, rho)) continue;
      const BarParams th = make_params(p, rho);
      CHECK(th.beta() > 0.0);
      CHECK(th.beta() < 1.0);
      CHECK(th.alpha() > 0.0);
      CHECK(th.alpha() < 1.0);
    }
  }
}

TEST_CASE("conditional moments match the closed forms") {
  CHECK(conditional_mean(4, make_params(0.5, 0.2), 10) ==
        doctest::Approx(4.8).epsilon(1e-12));
  CHECK(conditional_variance(4, make_params(0.3, 0.4), 10) ==
        doctest::Approx(1.86).epsilon(1e-12));
  // Summing the kernel reproduces both moments.
  const BarParams th = make_params(0.35, 0.25);
  const int N = 8;
  for (int i = 0; i <= N; ++i) {
    double mean = 0.0, var = 0.0, mass = 0.0;
    for (int j = 0; j <= N; ++j) {
      const double pr = transition_prob(i, j, 1, th, N);
      mass += pr;
      mean += j * pr;
    }
    for (int j = 0; j <= N; ++j) {
      const double pr = transition_prob(i, j, 1, th, N);
      var += (j - mean) * (j - mean) * pr;
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mean == doctest::Approx(conditional_mean(i, th, N)).epsilon(1e-10));
    CHECK(var ==
          doctest::Approx(conditional_variance(i, th, N)).epsilon(1e-10));
  }
}

TEST_CASE("binomial thinning edge cases") {
  Rng rng(7);
  CHECK(binomial_thin(0, 0.5, rng) == 0);
  for (int i = 0; i < 50; ++i) {
    CHECK(binomial_thin(9, 0.9999999999, rng) == 9);
    CHECK(binomial_thin(9, 1e-12, rng) == 0);
    const int v = binomial_thin(6, 0.4, rng);
    CHECK(v >= 0);
    CHECK(v <= 6);
  }
}

TEST_CASE("kernel rows are distributions for several horizons") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const double p = 0.05 + 0.9 * rng.uniform();
    const double lo = rho_lower_bound(p);
    const double rho = lo + (1.0 - lo) * (0.02 + 0.96 * rng.uniform());
    const BarParams th = make_params(p, rho);
    const int N = 1 + static_cast<int>(rng.uniform() * 12);
    for (int h : {1, 2, 3}) {
      const Eigen::MatrixXd P = transition_matrix(th, N, h);
      for (int i = 0; i <= N; ++i) {
        CHECK(P.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(P.row(i).minCoeff() >= 0.0);
      }
    }
  }
}

TEST_CASE("two-step kernel equals the matrix square") {
  const BarParams th = make_params(0.3, 0.5);
  const int N = 4;
  const Eigen::MatrixXd P1 = transition_matrix(th, N, 1);
  const Eigen::MatrixXd P2 = transition_matrix(th, N, 2);
  const Eigen::MatrixXd sq = P1 * P1;
  CHECK((P2 - sq).cwiseAbs().maxCoeff() < 1e-12);

  // Three steps via Chapman-Kolmogorov as well, negative rho included.
  const BarParams th2 = make_params(0.6, -0.35);
  const Eigen::MatrixXd Q1 = transition_matrix(th2, N, 1);
  const Eigen::MatrixXd Q3 = transition_matrix(th2, N, 3);
  CHECK((Q3 - Q1 * Q1 * Q1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("h-step mean follows the geometric decay") {
  const BarParams th = make_params(0.4, -0.3);
  const int N = 6;
  for (int h : {1, 2, 4}) {
    const Eigen::MatrixXd P = transition_matrix(th, N, h);
    for (int i = 0; i <= N; ++i) {
      double mean = 0.0;
      for (int j = 0; j <= N; ++j) mean += j * P(i, j);
      const double expect = std::pow(th.rho, h) * i +
                            N * th.p * (1.0 - std::pow(th.rho, h));
      CHECK(mean == doctest::Approx(expect).epsilon(1e-10));
    }
  }
}

TEST_CASE("unit-range chain reduces to the two-state Markov chain") {
  const BarParams th = make_params(0.55, 0.2);
  // On {0,1}: P(1|0) = beta, P(1|1) = alpha.
  CHECK(transition_prob(0, 1, 1, th, 1) ==
        doctest::Approx(th.beta()).epsilon(1e-12));
  CHECK(transition_prob(1, 1, 1, th, 1) ==
        doctest::Approx(th.alpha()).epsilon(1e-12));
  CHECK(transition_prob(0, 0, 1, th, 1) ==
        doctest::Approx(1.0 - th.beta()).epsilon(1e-12));
}

TEST_CASE("kernel derivatives agree with finite differences") {
  Rng rng(23);
  for (int rep = 0; rep < 30; ++rep) {
    const double p = 0.15 + 0.7 * rng.uniform();
    const double lo = rho_lower_bound(p);
    const double rho = lo + (1.0 - lo) * (0.1 + 0.8 * rng.uniform());
    const BarParams th = make_params(p, rho);
    const int N = 2 + static_cast<int>(rng.uniform() * 9);
    const int i = static_cast<int>(rng.uniform() * (N + 1));
    const int j = static_cast<int>(rng.uniform() * (N + 1));

    const TransitionDerivs d = transition_derivs(i, j, th, N);
    CHECK(d.prob == doctest::Approx(transition_prob(i, j, 1, th, N))
                        .epsilon(1e-12));

    const double h = 1e-5;
    auto f = [&](double rr, double pp) {
      return transition_prob(i, j, 1, BarParams{pp, rr}, N);
    };
    const double fd_rho = (f(rho + h, p) - f(rho - h, p)) / (2 * h);
    const double fd_p = (f(rho, p + h) - f(rho, p - h)) / (2 * h);
    // Mixed absolute/relative bands: first differences are exact to O(h^2),
    // second differences to O(h^2) with larger cancellation noise.
    auto close = [](double a, double b, double tol) {
      return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a),
                                                             std::abs(b)));
    };
    CHECK(close(d.d_rho, fd_rho, 1e-6));
    CHECK(close(d.d_p, fd_p, 1e-6));

    const double h2 = 5e-4;
    const double fd_rr =
        (f(rho + h2, p) - 2 * f(rho, p) + f(rho - h2, p)) / (h2 * h2);
    const double fd_pp =
        (f(rho, p + h2) - 2 * f(rho, p) + f(rho, p - h2)) / (h2 * h2);
    const double fd_rp = (f(rho + h2, p + h2) - f(rho + h2, p - h2) -
                          f(rho - h2, p + h2) + f(rho - h2, p - h2)) /
                         (4 * h2 * h2);
    CHECK(close(d.d_rho_rho, fd_rr, 5e-4));
    CHECK(close(d.d_p_p, fd_pp, 5e-4));
    CHECK(close(d.d_rho_p, fd_rp, 5e-4));
  }
}

TEST_CASE("simulated transition frequencies match the kernel") {
  // Chi-square goodness of fit per from-state row, pooled: df =
  // (N+1)^2 - (N+1) = 12 for N = 3; 1% critical value 26.217.
  const BarParams th = make_params(0.4, 0.3);
  const int N = 3;
  Rng rng(20240814);
  const BoundedSeries s = simulate_bar(th, N, 100000, rng);

  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(N + 1, N + 1);
  for (std::size_t t = 1; t < s.counts.size(); ++t) {
    counts(s.counts[t - 1], s.counts[t]) += 1.0;
  }
  const Eigen::MatrixXd P = transition_matrix(th, N, 1);
  double chi2 = 0.0;
  for (int i = 0; i <= N; ++i) {
    const double row = counts.row(i).sum();
    REQUIRE(row > 200);  // every state visited often at these parameters
    for (int j = 0; j <= N; ++j) {
      const double expect = row * P(i, j);
      chi2 += (counts(i, j) - expect) * (counts(i, j) - expect) / expect;
    }
  }
  CHECK(chi2 < 26.217);
}

TEST_CASE("simulation is deterministic and stream-separable") {
  const BarParams th = make_params(0.45, 0.15);
  Rng a(99), b(99), c(100);
  const BoundedSeries sa = simulate_bar(th, 10, 300, a);
  const BoundedSeries sb = simulate_bar(th, 10, 300, b);
  const BoundedSeries sc = simulate_bar(th, 10, 300, c);
  CHECK(sa.counts == sb.counts);
  CHECK(sa.init_state == sb.init_state);
  CHECK(sa.counts != sc.counts);

  Rng s1 = Rng::stream(7, 0);
  Rng s2 = Rng::stream(7, 1);
  bool differ = false;
  for (int i = 0; i < 32; ++i) {
    if (s1.next_u64() != s2.next_u64()) differ = true;
  }
  CHECK(differ);
}

TEST_CASE("single-segment regime simulation equals the plain chain") {
  SegmentedModel model;
  model.upper_bound = 10;
  model.segment_params = {make_params(0.45, 0.15)};
  Rng a(31), b(31);
  const BoundedSeries plain = simulate_bar(model.segment_params[0], 10, 250, a);
  const BoundedSeries mcp = simulate_mcp_bar(model, 250, b);
  CHECK(plain.counts == mcp.counts);
  CHECK(plain.init_state == mcp.init_state);
}

TEST_CASE("segmented simulation shifts the running mean at the breaks") {
  SegmentedModel model;
  model.upper_bound = 10;
  model.change_points = {4000};
  model.segment_params = {make_params(0.2, 0.1), make_params(0.8, 0.1)};
  Rng rng(5);
  const BoundedSeries s = simulate_mcp_bar(model, 8000, rng);
  double m1 = 0.0, m2 = 0.0;
  for (int t = 0; t < 4000; ++t) m1 += s.counts[t];
  for (int t = 4000; t < 8000; ++t) m2 += s.counts[t];
  m1 /= 4000.0;
  m2 /= 4000.0;
  CHECK(m1 == doctest::Approx(2.0).epsilon(0.08));  // N p = 2
  CHECK(m2 == doctest::Approx(8.0).epsilon(0.08));  // N p = 8
}

TEST_CASE("segmented model validation") {
  SegmentedModel model;
  model.upper_bound = 10;
  model.change_points = {50, 40};  // out of order
  model.segment_params = {make_params(0.3, 0.1), make_params(0.4, 0.1),
                          make_params(0.5, 0.1)};
  CHECK_THROWS_AS(check_model(model, 100), OutOfDomain);
  model.change_points = {40, 120};  // beyond n
  CHECK_THROWS_AS(check_model(model, 100), OutOfDomain);
  model.change_points = {40};  // wrong segment count
  CHECK_THROWS_AS(check_model(model, 100), OutOfDomain);
  model.change_points = {40, 70};
  CHECK_NOTHROW(check_model(model, 100));
}

TEST_CASE("series validation") {
  BoundedSeries s;
  s.upper_bound = 5;
  s.counts = {1, 2, 6};
  CHECK_THROWS_AS(check_series(s), OutOfDomain);
  s.counts = {1, -1, 3};
  CHECK_THROWS_AS(check_series(s), OutOfDomain);
  s.counts = {1};
  CHECK_THROWS_AS(check_series(s), OutOfDomain);
  s.counts = {1, 2, 5, 0};
  CHECK_NOTHROW(check_series(s));
}

TEST_CASE("exact binomial coefficients and signed powers") {
  CHECK(detail::choose(10, 3) == 120.0);
  CHECK(detail::choose(60, 30) == doctest::Approx(118264581564861424.0));
  CHECK(detail::choose(5, 6) == 0.0);
  CHECK(detail::log_choose(100, 50) ==
        doctest::Approx(std::lgamma(101.0) - 2 * std::lgamma(51.0))
            .epsilon(1e-12));
  CHECK(detail::signed_pow(-0.5, 3) == doctest::Approx(-0.125).epsilon(1e-15));
  CHECK(detail::signed_pow(-0.5, 2) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(detail::signed_pow(0.3, 0) == 1.0);
}
