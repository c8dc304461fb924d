#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "coalld/coalescent.hpp"
#include "coalld/mc.hpp"

using namespace coalld;
using Catch::Approx;

TEST_CASE("tail paths are strictly decreasing and positive") {
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const auto path = sample_tail_path(200, RngStream{11, s});
    REQUIRE(path.times.size() == 199);
    REQUIRE(path.bias_bound == Approx(0.01));
    double prev = std::numeric_limits<double>::infinity();
    for (const double t : path.times) {
      REQUIRE(t > 0.0);
      REQUIRE(t < prev);
      prev = t;
    }
  }
  REQUIRE_THROWS_AS(sample_tail_path(1, RngStream{0, 0}), std::domain_error);
}

TEST_CASE("truncated_tail_time matches a plain sequential computation") {
  const long n = 7, K = 5000;
  const auto w = stage_time_weights(K);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const RngStream stream{123, s};
    CounterRng rng(stream);
    double expect = 0.0;
    for (long k = n + 1; k <= K; ++k) {
      expect += rng.next_exp() * w[static_cast<std::size_t>(k)];
    }
    const double got = truncated_tail_time(stream, n, K, w);
    REQUIRE(got == Approx(expect).epsilon(1e-13));
  }
}

TEST_CASE("exact mean identity E[n T_n] = 2 (remainder mean added back)") {
  const std::uint64_t paths = 20000;
  for (const long n : {1L, 10L, 100L}) {
    const long K = std::max<long>(n + 1, 2000);
    const auto w = stage_time_weights(K);
    const auto m = mc::mean_of(paths, 2, [&](std::uint64_t i) {
      return static_cast<double>(n) *
             truncated_tail_time(RngStream{7, i}, n, K, w);
    });
    const double corrected = m.mean + 2.0 * static_cast<double>(n) / K;
    REQUIRE(std::abs(corrected - 2.0) <= 3.1 * m.se);
  }
}

TEST_CASE("T_1 mean is 2: time to the most recent common ancestor") {
  const std::uint64_t paths = 20000;
  const long K = 20000;
  const auto w = stage_time_weights(K);
  const auto m = mc::mean_of(paths, 2, [&](std::uint64_t i) {
    return truncated_tail_time(RngStream{8, i}, 1, K, w);
  });
  REQUIRE(std::abs(m.mean + 2.0 / K - 2.0) <= 3.1 * m.se);
}

TEST_CASE("truncation honesty: K = 1e3 vs 1e4 shifts T_1 by less than twice "
          "the reported bias") {
  // common random numbers: the first 999 increments coincide, so the
  // difference is the dropped remainder alone
  const std::uint64_t paths = 10000;
  const auto w4 = stage_time_weights(10000);
  double acc = 0.0;
  for (std::uint64_t i = 0; i < paths; ++i) {
    const RngStream s{9, i};
    const double t3 = truncated_tail_time(s, 1, 1000, w4);
    const double t4 = truncated_tail_time(s, 1, 10000, w4);
    acc += t4 - t3;
  }
  const double shift = acc / static_cast<double>(paths);
  REQUIRE(shift > 0.0);
  REQUIRE(shift < 2.0 * (2.0 / 1000.0));
}

TEST_CASE("count_lines_at: path-by-path event identities") {
  // With N = inf{n : T_n < eps}: {T_n < eps} = {N <= n} and
  // {T_n >= eps} = {N >= n+1}, exactly, path by path.
  const long K = 500;
  std::uint64_t checked = 0;
  for (std::uint64_t s = 0; s < 10000; ++s) {
    const auto path = sample_tail_path(K, RngStream{10, s});
    for (const double eps : {0.01, 0.05, 0.2, 0.5, 1.0, 2.0}) {
      const auto lc = count_lines_at(path, eps);
      for (const long n : {1L, 2L, 3L, 5L, 10L, 40L, 150L}) {
        const double t_n = path.times[static_cast<std::size_t>(n) - 1];
        REQUIRE((t_n < eps) == (lc.n <= n));
        REQUIRE((t_n >= eps) == (lc.n >= n + 1));
        ++checked;
      }
    }
  }
  REQUIRE(checked == 10000ULL * 6 * 7);
}

TEST_CASE("count_lines_at edge cases") {
  const auto path = sample_tail_path(100, RngStream{12, 0});
  // eps above the whole tree: already one line
  const auto one = count_lines_at(path, path.times.front() + 1.0);
  REQUIRE(one.n == 1);
  REQUIRE_FALSE(one.truncation_flagged);
  // eps below the resolvable range: flagged
  const auto deep = count_lines_at(path, path.bias_bound);
  REQUIRE(deep.truncation_flagged);
  REQUIRE_THROWS_AS(count_lines_at(path, 0.0), std::domain_error);
}

TEST_CASE("line_count_at agrees with the path-based counter in distribution "
          "and mean") {
  // eps N_eps ~ 2 for small eps
  const double eps = 0.01;
  const long K = 4000;
  const auto m = mc::mean_of(10000, 2, [&](std::uint64_t i) {
    return eps * static_cast<double>(line_count_at(RngStream{13, i}, eps, K));
  });
  REQUIRE(std::abs(m.mean - 2.0) <= 0.05 * 2.0);
}

TEST_CASE("family partitions sum to one and stay positive") {
  for (const auto method :
       {FamilyMethod::spacings, FamilyMethod::normalized_exponentials}) {
    for (std::uint64_t s = 0; s < 300; ++s) {
      const auto fp = sample_families(17, method, RngStream{14, s});
      REQUIRE(fp.freqs.size() == 17);
      double sum = 0.0;
      for (const double f : fp.freqs) {
        REQUIRE(f > 0.0);
        sum += f;
      }
      REQUIRE(std::abs(sum - 1.0) <= 1e-12);
    }
  }
  const auto single =
      sample_families(1, FamilyMethod::spacings, RngStream{14, 9999});
  REQUIRE(single.freqs == std::vector<double>{1.0});
  REQUIRE_THROWS_AS(sample_families(0, FamilyMethod::spacings, RngStream{0, 0}),
                    std::domain_error);
}

TEST_CASE("F_1 marginal survival matches (1-u)^(n-1)") {
  const long n = 10;
  const std::uint64_t draws = 100000;
  for (const double u : {0.1, 0.3}) {
    const auto m = mc::mean_of(draws, 2, [&](std::uint64_t i) {
      const auto fp =
          sample_families(n, FamilyMethod::spacings, RngStream{15, i});
      return fp.freqs[0] > u ? 1.0 : 0.0;
    });
    const double truth = std::pow(1.0 - u, static_cast<double>(n - 1));
    REQUIRE(std::abs(m.mean - truth) <= 3.1 * m.se);
  }
}

TEST_CASE("W_n stays in [1, n] and is exactly 1 only for n = 1") {
  REQUIRE(sample_Wn(1, WnMethod::direct, RngStream{16, 0}) == 1.0);
  REQUIRE(sample_Wn(1, WnMethod::ordered, RngStream{16, 1}) == 1.0);
  for (const auto method : {WnMethod::direct, WnMethod::ordered}) {
    for (std::uint64_t s = 0; s < 5000; ++s) {
      const double w = sample_Wn(12, method, RngStream{17, s});
      REQUIRE(w >= 1.0);
      REQUIRE(w <= 12.0);
      REQUIRE(w > 1.0);  // equality has probability zero
    }
  }
  REQUIRE_THROWS_AS(sample_Wn(0, WnMethod::direct, RngStream{0, 0}),
                    std::domain_error);
}

TEST_CASE("W_n mean matches the Dirichlet moment 2n/(n+1)") {
  const std::uint64_t draws = 100000;
  for (const long n : {5L, 50L}) {
    const auto m = mc::mean_of(draws, 2, [&](std::uint64_t i) {
      return sample_Wn(n, WnMethod::direct, RngStream{18, i});
    });
    const double target = 2.0 * n / (n + 1.0);
    REQUIRE(std::abs(m.mean - target) <= 3.1 * m.se);
  }
}

TEST_CASE("direct and ordered W_n samplers agree in distribution") {
  auto direct = mc::collect(10000, 2, [](std::uint64_t i) {
    return sample_Wn(10, WnMethod::direct, RngStream{19, i});
  });
  auto ordered = mc::collect(10000, 2, [](std::uint64_t i) {
    return sample_Wn(10, WnMethod::ordered, RngStream{20, i});
  });
  const auto ks = mc::ks_two_sample(std::move(direct), std::move(ordered));
  REQUIRE(ks.p_value > 0.01);
}

TEST_CASE("tilted sampler: weighted averages estimate restricted "
          "expectations of the untilted law") {
  // E[W~ ] * e^{-ny} should match a plain-MC estimate of E[W ; R_n > ny]
  const long n = 20;
  const double y = 0.5;
  const std::uint64_t draws = 100000;
  const auto tilted = mc::mean_of(draws, 2, [&](std::uint64_t i) {
    return sample_Wn_tilted(n, y, RngStream{21, i}).w;
  });
  const double log_w = sample_Wn_tilted(n, y, RngStream{21, 0}).log_weight;
  REQUIRE(log_w == Approx(-static_cast<double>(n) * y));
  const double est_tilted = std::exp(log_w) * tilted.mean;
  const double se_tilted = std::exp(log_w) * tilted.se;

  // plain side: same ordered formula, indicator on the last draw
  const double shift = static_cast<double>(n) * y;
  const auto plain = mc::mean_of(draws, 2, [&](std::uint64_t i) {
    CounterRng rng(RngStream{22, i});
    double prefix = 0.0, num = 0.0, last = 0.0;
    for (long k = 1; k <= n; ++k) {
      const double r = rng.next_exp();
      if (k == n) last = r;
      prefix += r;
      num += (r / static_cast<double>(k)) * (2.0 * prefix - r);
    }
    const double w = static_cast<double>(n) * num / (prefix * prefix);
    return last > shift ? w : 0.0;
  });
  const double comb = std::sqrt(se_tilted * se_tilted + plain.se * plain.se);
  REQUIRE(std::abs(est_tilted - plain.mean) <= 3.0 * comb);
}

TEST_CASE("tilted sampler: conditional mean decreases in y toward the "
          "predicted limit") {
  const long n = 2000;
  const std::uint64_t draws = 4000;
  double prev = std::numeric_limits<double>::infinity();
  for (const double y : {1.0, 2.0, 4.0}) {
    const auto m = mc::mean_of(draws, 2, [&](std::uint64_t i) {
      return sample_Wn_tilted(n, y, RngStream{23, i}).w;
    });
    const double limit =
        (2.0 + 2.0 * y + y * y) / (1.0 + 2.0 * y + y * y);
    REQUIRE(m.mean < prev);
    REQUIRE(std::abs(m.mean - limit) <= 0.05 * limit);
    prev = m.mean;
  }
}

TEST_CASE("tilted sampler: y -> 0 recovers the untilted distribution") {
  auto tilted = mc::collect(10000, 2, [](std::uint64_t i) {
    return sample_Wn_tilted(10, 1e-12, RngStream{24, i}).w;
  });
  auto plain = mc::collect(10000, 2, [](std::uint64_t i) {
    return sample_Wn(10, WnMethod::ordered, RngStream{25, i});
  });
  const auto ks = mc::ks_two_sample(std::move(tilted), std::move(plain));
  REQUIRE(ks.p_value > 0.01);
}

TEST_CASE("default_cutoff policy") {
  REQUIRE(default_cutoff(10) == 2000000);
  REQUIRE(default_cutoff(10, 1e-3) == 2000);
  REQUIRE(default_cutoff(5000, 1e-3) == 5001);
  REQUIRE_THROWS_AS(default_cutoff(10, 0.0), std::domain_error);
}

TEST_CASE("identical streams give bit-identical samples") {
  const auto a = sample_tail_path(300, RngStream{42, 17});
  const auto b = sample_tail_path(300, RngStream{42, 17});
  REQUIRE(a.times == b.times);
  REQUIRE(sample_Wn(40, WnMethod::ordered, RngStream{1, 2}) ==
          sample_Wn(40, WnMethod::ordered, RngStream{1, 2}));
}
