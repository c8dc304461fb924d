#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "coalld/mc.hpp"
#include "coalld/rates.hpp"

using namespace coalld;
using Catch::Approx;

TEST_CASE("reductions are bit-identical across thread counts") {
  auto stat = [](std::uint64_t i) {
    CounterRng rng(RngStream{31, i});
    return rng.next_exp() + rng.next_exp();
  };
  const auto m1 = mc::mean_of(100000, 1, stat);
  const auto m4 = mc::mean_of(100000, 4, stat);
  const auto m8 = mc::mean_of(100000, 8, stat);
  REQUIRE(m1.mean == m4.mean);
  REQUIRE(m1.mean == m8.mean);
  REQUIRE(m1.se == m4.se);
  REQUIRE(m1.se == m8.se);

  auto pred = [](std::uint64_t i) {
    CounterRng rng(RngStream{32, i});
    return rng.next_unit() < 0.3;
  };
  REQUIRE(mc::count_hits(100000, 1, pred) == mc::count_hits(100000, 4, pred));

  const auto h1 = mc::histogram(50000, 8, 1, [](std::uint64_t i) {
    CounterRng rng(RngStream{33, i});
    return static_cast<long>(rng.next_unit() * 8.0);
  });
  const auto h4 = mc::histogram(50000, 8, 4, [](std::uint64_t i) {
    CounterRng rng(RngStream{33, i});
    return static_cast<long>(rng.next_unit() * 8.0);
  });
  REQUIRE(h1 == h4);
}

TEST_CASE("wilson interval basics") {
  const auto w0 = mc::wilson95(0, 1000);
  REQUIRE(w0.low == 0.0);
  REQUIRE(w0.high > 0.0);
  REQUIRE(w0.high < 0.01);
  const auto wh = mc::wilson95(500, 1000);
  REQUIRE(wh.low < 0.5);
  REQUIRE(wh.high > 0.5);
  REQUIRE(wh.high - wh.low == Approx(2 * 1.96 * std::sqrt(0.25 / 1000.0))
                                  .epsilon(0.01));
}

TEST_CASE("ks_two_sample examples") {
  std::vector<double> a(500), b(500);
  CounterRng rng(RngStream{34, 0});
  for (auto& v : a) v = rng.next_exp();
  b = a;
  const auto same = mc::ks_two_sample(a, b);
  REQUIRE(same.statistic == 0.0);
  REQUIRE(same.p_value == 1.0);

  // Exp(1) vs Exp(2): separated distributions
  std::vector<double> c(10000), d(10000);
  for (auto& v : c) v = rng.next_exp();
  for (auto& v : d) v = 0.5 * rng.next_exp();
  const auto far = mc::ks_two_sample(std::move(c), std::move(d));
  REQUIRE(far.p_value < 1e-6);

  REQUIRE_THROWS_AS(
      mc::ks_two_sample(std::vector<double>(50, 0.0), std::vector<double>(200, 0.0)),
      std::invalid_argument);
}

TEST_CASE("kolmogorov survival function sanity") {
  REQUIRE(mc::kolmogorov_sf(1e-6) == 1.0);
  REQUIRE(mc::kolmogorov_sf(0.5) == Approx(0.9639452436648751).epsilon(1e-6));
  REQUIRE(mc::kolmogorov_sf(1.0) == Approx(0.2699996716773362).epsilon(1e-6));
  REQUIRE(mc::kolmogorov_sf(2.0) == Approx(0.00067092525578).epsilon(1e-4));
  // continuity at the series switch
  REQUIRE(mc::kolmogorov_sf(1.18 - 1e-9) ==
          Approx(mc::kolmogorov_sf(1.18 + 1e-9)).margin(1e-8));
}

TEST_CASE("EventSpec scale discipline") {
  mc::EventSpec e;
  e.statistic = mc::Statistic::Wn;
  e.direction = mc::Direction::geq;
  e.threshold = 2.5;
  e.size_param = 100;
  e.scale = RateScale::per_n;  // wrong: upward Wn lives on sqrt(n)
  REQUIRE_THROWS_AS(mc::validate(e), std::invalid_argument);
  e.scale = RateScale::per_sqrt_n;
  REQUIRE_NOTHROW(mc::validate(e));
  e.direction = mc::Direction::leq;
  REQUIRE_THROWS_AS(mc::validate(e), std::invalid_argument);
  e.scale = RateScale::per_n;
  REQUIRE_NOTHROW(mc::validate(e));

  mc::EventSpec t;
  t.statistic = mc::Statistic::nTn;
  t.direction = mc::Direction::geq;
  t.threshold = 2.0;
  t.size_param = 10;
  t.scale = RateScale::per_sqrt_n;
  REQUIRE_THROWS_AS(mc::validate(t), std::invalid_argument);

  mc::EventSpec n;
  n.statistic = mc::Statistic::epsNeps;
  n.direction = mc::Direction::geq;
  n.threshold = 3.0;
  n.size_param = 0.1;
  n.scale = RateScale::per_n;
  REQUIRE_THROWS_AS(mc::validate(n), std::invalid_argument);
}

TEST_CASE("estimate: the zero-probability event {W_n < 1}") {
  mc::EventSpec e;
  e.statistic = mc::Statistic::Wn;
  e.direction = mc::Direction::leq;
  e.threshold = 0.99;
  e.size_param = 20;
  e.scale = RateScale::per_n;
  const auto est = mc::estimate(e, 20000, 7, 2);
  REQUIRE(est.hits == 0);
  REQUIRE(est.p_hat == 0.0);
  REQUIRE(est.ci_low == 0.0);
  REQUIRE(est.rate_lower_bound_only);
  REQUIRE(std::isinf(est.rate_ci_high));
  REQUIRE(est.rate_hat > 0.0);
}

TEST_CASE("estimate: P(n T_n >= 2) at n = 10 matches the exact series value") {
  mc::EventSpec e;
  e.statistic = mc::Statistic::nTn;
  e.direction = mc::Direction::geq;
  e.threshold = 2.0;
  e.size_param = 10;
  e.scale = RateScale::per_n;
  const auto est = mc::estimate(e, 100000, 11, 2);
  // {n T_n >= 2} = {T_10 >= 0.2} = {N_0.2 >= 11}, exactly summable
  double head = 0.0;
  for (long m = 1; m <= 10; ++m) head += tavare_pmf(0.2, m);
  const double exact = 1.0 - head;
  REQUIRE(est.p_hat > 0.2);
  REQUIRE(est.p_hat < 0.8);
  REQUIRE(exact > est.ci_low - 0.002);
  REQUIRE(exact < est.ci_high + 0.002);
  REQUIRE(est.trials == 100000);
  REQUIRE(est.seed == 11);
}

TEST_CASE("estimate: upward W_n rate lands within 30% at a tuned size") {
  // sqrt(n)*rate = 2 at n = 16, inside the recommended [2,6] window
  mc::EventSpec e;
  e.statistic = mc::Statistic::Wn;
  e.direction = mc::Direction::geq;
  e.threshold = 2.25;
  e.size_param = 16;
  e.scale = RateScale::per_sqrt_n;
  const auto est = mc::estimate(e, 200000, 12, 2);
  const double analytic = rate_up_Wn(2.25).value;  // 0.5
  REQUIRE(std::abs(est.rate_hat - analytic) <= 0.3 * analytic);
}

TEST_CASE("estimate is reproducible and validates inputs") {
  mc::EventSpec e;
  e.statistic = mc::Statistic::Wn;
  e.direction = mc::Direction::geq;
  e.threshold = 2.4;
  e.size_param = 25;
  e.scale = RateScale::per_sqrt_n;
  const auto a = mc::estimate(e, 5000, 5, 1);
  const auto b = mc::estimate(e, 5000, 5, 4);
  REQUIRE(a.hits == b.hits);
  REQUIRE(a.p_hat == b.p_hat);
  REQUIRE(a.rate_hat == b.rate_hat);
  REQUIRE_THROWS_AS(mc::estimate(e, 999, 5, 1), std::invalid_argument);
}

TEST_CASE("empirical_rate_curve reports points and a trend statistic") {
  const std::vector<double> grid = {10, 20};
  const auto curve = mc::empirical_rate_curve(
      mc::Statistic::nTn, mc::Direction::geq, 2.5, grid,
      /*trials_per_point=*/20000, 13, eval_I(2.5).value, 100000, 2);
  REQUIRE(curve.points.size() == 2);
  for (const auto& p : curve.points) {
    REQUIRE(p.est.hits > 0);
    REQUIRE(p.est.rate_hat > 0.0);
    REQUIRE(p.est.rate_ci_low <= p.est.rate_hat);
    REQUIRE(p.est.rate_hat <= p.est.rate_ci_high);
  }
  REQUIRE(std::abs(curve.kendall_tau) <= 1.0);
}

TEST_CASE("epsNeps events reduce to tail-time events correctly") {
  // eps N >= 3 with eps = 0.5 means N >= 6; P = 1 - sum_{m<=5} pmf
  mc::EventSpec e;
  e.statistic = mc::Statistic::epsNeps;
  e.direction = mc::Direction::geq;
  e.threshold = 3.0;
  e.size_param = 0.5;
  e.scale = RateScale::per_inv_eps;
  const auto est = mc::estimate(e, 200000, 14, 2);
  double head = 0.0;
  for (long m = 1; m <= 5; ++m) head += tavare_pmf(0.5, m);
  const double exact = 1.0 - head;
  REQUIRE(exact > est.ci_low - 0.003);
  REQUIRE(exact < est.ci_high + 0.003);

  // leq side: eps N <= 2 with eps = 0.5 means N <= 4
  mc::EventSpec l = e;
  l.direction = mc::Direction::leq;
  l.threshold = 2.0;
  const auto est2 = mc::estimate(l, 200000, 15, 2);
  double head4 = 0.0;
  for (long m = 1; m <= 4; ++m) head4 += tavare_pmf(0.5, m);
  REQUIRE(head4 > est2.ci_low - 0.003);
  REQUIRE(head4 < est2.ci_high + 0.003);
}

TEST_CASE("cramer_selfcheck near the law-of-large-numbers center") {
  const std::vector<long> grid = {40};
  const auto pts = mc::cramer_selfcheck(1.0, grid, 20000, 16, 2);
  REQUIRE(pts.size() == 1);
  REQUIRE(pts[0].analytic == 0.0);
  REQUIRE(std::abs(pts[0].est.rate_hat) <= 0.02);
  REQUIRE(pts[0].within_tolerance);
}

TEST_CASE("cramer_selfcheck recovers I_exp at n = 40") {
  const std::vector<long> grid = {40};
  const auto low = mc::cramer_selfcheck(0.5, grid, 4000000, 17, 2);
  REQUIRE(low[0].within_tolerance);
  REQUIRE(low[0].est.rate_hat ==
          Approx(cramer_exp_rate(0.5)).margin(4.0 / 40.0));
  const auto high = mc::cramer_selfcheck(2.0, grid, 4000000, 18, 2);
  REQUIRE(high[0].within_tolerance);
  REQUIRE(high[0].est.rate_hat ==
          Approx(cramer_exp_rate(2.0)).margin(4.0 / 40.0));
}

TEST_CASE("rate_within_slack policy") {
  mc::MCEstimate est;
  est.scale_value = 20.0;
  est.rate_hat = 0.5;
  est.rate_ci_low = 0.45;
  est.rate_ci_high = 0.55;
  est.rate_lower_bound_only = false;
  REQUIRE(mc::rate_within_slack(est, 0.5));
  REQUIRE(mc::rate_within_slack(est, 0.74));   // 0.55 + 0.2 slack
  REQUIRE_FALSE(mc::rate_within_slack(est, 0.76));
  REQUIRE(mc::rate_within_slack(est, 0.26));
  REQUIRE_FALSE(mc::rate_within_slack(est, 0.24));
  est.rate_lower_bound_only = true;
  est.rate_ci_high = std::numeric_limits<double>::infinity();
  REQUIRE(mc::rate_within_slack(est, 100.0));  // one-sided
  REQUIRE_FALSE(mc::rate_within_slack(est, 0.2));
}
