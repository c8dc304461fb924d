#pragma once

// Rare-event Monte Carlo harness: parallel trial execution with
// scheduling-independent reductions, Wilson intervals, empirical rate
// extraction, a two-sample Kolmogorov-Smirnov test, and a Cramer self-check
// that validates the machinery on the mean of exponentials.
//
// Reproducibility contract: trial i of an experiment uses stream
// (seed, stream_base + i). Blocks of trials are reduced locally and folded in
// block order afterwards, so results are bit-identical for any thread count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "coalld/coalescent.hpp"
#include "coalld/rates.hpp"
#include "coalld/rng.hpp"

namespace coalld::mc {

inline int default_threads() {
  if (const char* env = std::getenv("COALLD_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}

inline constexpr std::uint64_t kBlockSize = 8192;

// Runs work(block_index, begin, end) over [0, total) split into fixed blocks.
// Workers grab blocks dynamically; each block's result must depend only on
// its index range.
template <class Work>
inline void run_blocks(std::uint64_t total, int threads, Work&& work) {
  if (total == 0) return;
  const std::uint64_t nblocks = (total + kBlockSize - 1) / kBlockSize;
  std::atomic<std::uint64_t> next{0};
  auto drain = [&] {
    for (;;) {
      const std::uint64_t b = next.fetch_add(1, std::memory_order_relaxed);
      if (b >= nblocks) return;
      const std::uint64_t begin = b * kBlockSize;
      work(b, begin, std::min(total, begin + kBlockSize));
    }
  };
  if (threads <= 1) {
    drain();
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads) - 1);
  for (int i = 0; i < threads - 1; ++i) pool.emplace_back(drain);
  drain();
  for (auto& t : pool) t.join();
}

template <class Pred>  // bool(uint64_t trial_index)
inline std::uint64_t count_hits(std::uint64_t trials, int threads,
                                Pred&& pred) {
  const std::uint64_t nblocks = (trials + kBlockSize - 1) / kBlockSize;
  std::vector<std::uint64_t> partial(nblocks, 0);
  run_blocks(trials, threads, [&](std::uint64_t b, std::uint64_t i0,
                                  std::uint64_t i1) {
    std::uint64_t h = 0;
    for (std::uint64_t i = i0; i < i1; ++i) h += pred(i) ? 1 : 0;
    partial[b] = h;
  });
  std::uint64_t total = 0;
  for (auto h : partial) total += h;
  return total;
}

struct MeanResult {
  double mean = 0.0;
  double se = 0.0;
  double variance = 0.0;
  std::uint64_t n = 0;
};

namespace detail {
struct Kahan {
  double s = 0.0, c = 0.0;
  void add(double v) {
    const double t = s + v;
    if (std::abs(s) >= std::abs(v)) {
      c += (s - t) + v;
    } else {
      c += (v - t) + s;
    }
    s = t;
  }
  double get() const { return s + c; }
};
}  // namespace detail

template <class Fn>  // double(uint64_t trial_index)
inline MeanResult mean_of(std::uint64_t trials, int threads, Fn&& fn) {
  const std::uint64_t nblocks = (trials + kBlockSize - 1) / kBlockSize;
  struct Partial {
    double s = 0.0, c = 0.0, s2 = 0.0, c2 = 0.0;
  };
  std::vector<Partial> partial(nblocks);
  run_blocks(trials, threads, [&](std::uint64_t b, std::uint64_t i0,
                                  std::uint64_t i1) {
    detail::Kahan sum, sumsq;
    for (std::uint64_t i = i0; i < i1; ++i) {
      const double v = fn(i);
      sum.add(v);
      sumsq.add(v * v);
    }
    partial[b] = {sum.s, sum.c, sumsq.s, sumsq.c};
  });
  detail::Kahan sum, sumsq;
  for (const auto& p : partial) {
    sum.add(p.s);
    sum.add(p.c);
    sumsq.add(p.s2);
    sumsq.add(p.c2);
  }
  MeanResult out;
  out.n = trials;
  const double nd = static_cast<double>(trials);
  out.mean = sum.get() / nd;
  const double raw = sumsq.get() / nd - out.mean * out.mean;
  out.variance = trials > 1 ? std::max(0.0, raw) * nd / (nd - 1.0) : 0.0;
  out.se = std::sqrt(out.variance / nd);
  return out;
}

template <class Fn>  // double(uint64_t trial_index)
inline std::vector<double> collect(std::uint64_t trials, int threads,
                                   Fn&& fn) {
  std::vector<double> out(trials);
  run_blocks(trials, threads, [&](std::uint64_t, std::uint64_t i0,
                                  std::uint64_t i1) {
    for (std::uint64_t i = i0; i < i1; ++i) out[i] = fn(i);
  });
  return out;
}

// bin function returns a value in [0, nbins); out-of-range values are clipped
// into the last bin.
template <class Fn>
inline std::vector<std::uint64_t> histogram(std::uint64_t trials, int nbins,
                                            int threads, Fn&& bin_of) {
  const std::uint64_t nblocks = (trials + kBlockSize - 1) / kBlockSize;
  std::vector<std::uint64_t> partial(nblocks * static_cast<std::size_t>(nbins),
                                     0);
  run_blocks(trials, threads, [&](std::uint64_t b, std::uint64_t i0,
                                  std::uint64_t i1) {
    std::uint64_t* h = partial.data() + b * static_cast<std::size_t>(nbins);
    for (std::uint64_t i = i0; i < i1; ++i) {
      long v = bin_of(i);
      if (v < 0) v = 0;
      if (v >= nbins) v = nbins - 1;
      h[v] += 1;
    }
  });
  std::vector<std::uint64_t> out(static_cast<std::size_t>(nbins), 0);
  for (std::uint64_t b = 0; b < nblocks; ++b) {
    for (int k = 0; k < nbins; ++k) {
      out[static_cast<std::size_t>(k)] +=
          partial[b * static_cast<std::size_t>(nbins) +
                  static_cast<std::size_t>(k)];
    }
  }
  return out;
}

struct WilsonInterval {
  double low = 0.0, high = 1.0;
};

// 95% Wilson score interval; one-sided at the boundaries (the interval
// pinches to exactly 0 or 1 when hits is 0 or trials).
inline WilsonInterval wilson95(std::uint64_t hits, std::uint64_t trials) {
  if (trials == 0) throw std::invalid_argument("wilson95: trials == 0");
  constexpr double z = 1.959963984540054;
  constexpr double z2 = z * z;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(hits) / n;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half =
      z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  WilsonInterval w{std::max(0.0, center - half), std::min(1.0, center + half)};
  if (hits == 0) w.low = 0.0;
  if (hits == trials) w.high = 1.0;
  return w;
}

enum class Statistic { nTn, epsNeps, Wn };
enum class Direction { geq, leq };

inline const char* to_string(Statistic s) {
  switch (s) {
    case Statistic::nTn: return "nTn";
    case Statistic::epsNeps: return "epsNeps";
    case Statistic::Wn: return "Wn";
  }
  return "?";
}

// Event {statistic >= threshold} or {statistic <= threshold} at one size.
// The scale field is validated against the statistic: nTn deviates on scale
// n, eps*N_eps on 1/eps, and W_n upward on sqrt(n) but downward on n.
struct EventSpec {
  Statistic statistic = Statistic::nTn;
  Direction direction = Direction::geq;
  double threshold = 0.0;
  double size_param = 0.0;  // n for nTn/Wn, eps for epsNeps
  RateScale scale = RateScale::per_n;
};

inline void validate(const EventSpec& e) {
  switch (e.statistic) {
    case Statistic::nTn:
      if (e.scale != RateScale::per_n) {
        throw std::invalid_argument("EventSpec: nTn deviates on scale n");
      }
      if (e.size_param < 1.0) {
        throw std::invalid_argument("EventSpec: nTn needs n >= 1");
      }
      break;
    case Statistic::epsNeps:
      if (e.scale != RateScale::per_inv_eps) {
        throw std::invalid_argument(
            "EventSpec: eps*N_eps deviates on scale 1/eps");
      }
      if (!(e.size_param > 0.0)) {
        throw std::invalid_argument("EventSpec: epsNeps needs eps > 0");
      }
      break;
    case Statistic::Wn:
      if (e.direction == Direction::geq &&
          e.scale != RateScale::per_sqrt_n) {
        throw std::invalid_argument(
            "EventSpec: upward Wn deviations are on scale sqrt(n)");
      }
      if (e.direction == Direction::leq && e.scale != RateScale::per_n) {
        throw std::invalid_argument(
            "EventSpec: downward Wn deviations are on scale n");
      }
      if (e.size_param < 1.0) {
        throw std::invalid_argument("EventSpec: Wn needs n >= 1");
      }
      break;
  }
}

inline double scale_value(const EventSpec& e) {
  switch (e.statistic) {
    case Statistic::nTn: return e.size_param;
    case Statistic::epsNeps: return 1.0 / e.size_param;
    case Statistic::Wn:
      return e.direction == Direction::geq ? std::sqrt(e.size_param)
                                           : e.size_param;
  }
  return 0.0;
}

struct MCEstimate {
  std::uint64_t trials = 0;
  std::uint64_t hits = 0;
  double p_hat = 0.0;
  double ci_low = 0.0, ci_high = 1.0;  // 95% Wilson
  double scale_value = 0.0;
  double rate_hat = 0.0;  // -log(p_hat)/scale; with zero hits, the lower
                          // bound implied by ci_high
  double rate_ci_low = 0.0;
  double rate_ci_high = 0.0;  // +inf when hits == 0
  bool rate_lower_bound_only = false;
  std::uint64_t seed = 0;
};

// Truncation cutoffs for tail-time events. With threshold compensation (see
// below) the residual effect of truncation is second order, so modest
// cutoffs suffice.
inline long tail_cutoff_for_n(long n) { return std::max<long>(2 * n, 2000); }
inline long tail_cutoff_for_eps(double eps, long m) {
  return std::max<long>(2 * m, static_cast<long>(std::ceil(30.0 / eps)));
}

namespace detail {

// Per-trial event predicate bound to a concrete sampler configuration.
// For tail-time statistics the event threshold is shifted by the truncated
// remainder's exact mean 2/K (the sampler itself never compensates); the
// residual error in log p is (theta^2/2) Var(remainder) = O(K^-3), quantified
// and negligible at the cutoffs above.
struct EventRunner {
  EventSpec event;
  std::uint64_t seed = 0;
  std::uint64_t stream_base = 0;
  // tail-time configuration (nTn / epsNeps)
  long tail_n = 0;
  long cutoff = 0;
  double time_threshold = 0.0;
  bool tail_geq = true;
  bool constant_true = false;
  bool constant_false = false;
  std::vector<double> weights;
  // Wn configuration
  long wn_n = 0;

  static EventRunner make(const EventSpec& e, std::uint64_t seed,
                          std::uint64_t stream_base) {
    validate(e);
    EventRunner r;
    r.event = e;
    r.seed = seed;
    r.stream_base = stream_base;
    switch (e.statistic) {
      case Statistic::nTn: {
        const long n = static_cast<long>(std::llround(e.size_param));
        r.tail_n = n;
        r.cutoff = tail_cutoff_for_n(n);
        const double bias = 2.0 / static_cast<double>(r.cutoff);
        r.time_threshold = e.threshold / static_cast<double>(n) - bias;
        r.tail_geq = e.direction == Direction::geq;
        r.weights = stage_time_weights(r.cutoff);
        break;
      }
      case Statistic::epsNeps: {
        const double eps = e.size_param;
        const double ratio = e.threshold / eps;
        if (e.direction == Direction::geq) {
          // {eps N >= x} = {N >= ceil(x/eps)} = {T_{m-1} >= eps}
          const long m = static_cast<long>(std::ceil(ratio - 1e-9));
          if (m <= 1) {
            r.constant_true = true;  // N >= 1 always
            return r;
          }
          r.tail_n = m - 1;
          r.tail_geq = true;
        } else {
          // {eps N <= x} = {N <= floor(x/eps)} = {T_m < eps}
          const long m = static_cast<long>(std::floor(ratio + 1e-9));
          if (m < 1) {
            r.constant_false = true;  // N >= 1 always
            return r;
          }
          r.tail_n = m;
          r.tail_geq = false;
        }
        r.cutoff = tail_cutoff_for_eps(eps, r.tail_n);
        const double bias = 2.0 / static_cast<double>(r.cutoff);
        r.time_threshold = eps - bias;
        r.weights = stage_time_weights(r.cutoff);
        break;
      }
      case Statistic::Wn: {
        r.wn_n = static_cast<long>(std::llround(e.size_param));
        break;
      }
    }
    return r;
  }

  bool operator()(std::uint64_t trial) const {
    if (constant_true) return true;
    if (constant_false) return false;
    const RngStream s{seed, stream_base + trial};
    if (event.statistic == Statistic::Wn) {
      const double w = sample_Wn(wn_n, WnMethod::direct, s);
      return event.direction == Direction::geq ? w >= event.threshold
                                               : w <= event.threshold;
    }
    const double t = truncated_tail_time(s, tail_n, cutoff, weights);
    return tail_geq ? t >= time_threshold : t < time_threshold;
  }
};

}  // namespace detail

inline MCEstimate summarize(const EventSpec& event, std::uint64_t trials,
                            std::uint64_t hits, std::uint64_t seed) {
  MCEstimate est;
  est.trials = trials;
  est.hits = hits;
  est.seed = seed;
  est.p_hat = static_cast<double>(hits) / static_cast<double>(trials);
  const auto w = wilson95(hits, trials);
  est.ci_low = w.low;
  est.ci_high = w.high;
  est.scale_value = scale_value(event);
  const double s = est.scale_value;
  if (hits > 0) {
    est.rate_hat = -std::log(est.p_hat) / s;
    est.rate_ci_low = -std::log(w.high) / s;
    est.rate_ci_high = -std::log(w.low) / s;
    est.rate_lower_bound_only = false;
  } else {
    est.rate_hat = -std::log(w.high) / s;
    est.rate_ci_low = est.rate_hat;
    est.rate_ci_high = std::numeric_limits<double>::infinity();
    est.rate_lower_bound_only = true;
  }
  return est;
}

// Plain Monte Carlo estimate of P(event) from `trials` independent trials.
inline MCEstimate estimate(const EventSpec& event, std::uint64_t trials,
                           std::uint64_t seed, int threads = default_threads(),
                           std::uint64_t stream_base = 0) {
  if (trials < 1000) {
    throw std::invalid_argument("estimate: requires trials >= 1000");
  }
  const auto runner = detail::EventRunner::make(event, seed, stream_base);
  const std::uint64_t hits = count_hits(trials, threads, runner);
  return summarize(event, trials, hits, seed);
}

struct RatePoint {
  double size = 0.0;
  MCEstimate est;
};

struct RateCurve {
  std::vector<RatePoint> points;
  double analytic_rate = 0.0;
  // Kendall tau of |rate_hat - analytic| against grid position, over points
  // with hits (want -1: gaps shrink monotonically as the size grows).
  double kendall_tau = 0.0;
};

// Empirical rate curve over a size grid. trials_per_point = 0 switches on
// auto-scaling: a first round sized from the analytic rate (targeting >= 50
// expected hits, floor 1e4, cap max_trials), then one deterministic
// escalation if the observed hits fall short.
inline RateCurve empirical_rate_curve(
    Statistic stat, Direction dir, double threshold,
    std::span<const double> size_grid, std::uint64_t trials_per_point,
    std::uint64_t seed, double analytic_rate,
    std::uint64_t max_trials = 100000000ULL,
    int threads = default_threads()) {
  RateCurve curve;
  curve.analytic_rate = analytic_rate;
  for (std::size_t i = 0; i < size_grid.size(); ++i) {
    EventSpec e;
    e.statistic = stat;
    e.direction = dir;
    e.threshold = threshold;
    e.size_param = size_grid[i];
    e.scale = stat == Statistic::nTn ? RateScale::per_n
              : stat == Statistic::epsNeps
                  ? RateScale::per_inv_eps
                  : (dir == Direction::geq ? RateScale::per_sqrt_n
                                           : RateScale::per_n);
    const std::uint64_t stream_base = static_cast<std::uint64_t>(i) << 40;
    const auto runner = detail::EventRunner::make(e, seed, stream_base);

    std::uint64_t trials;
    if (trials_per_point > 0) {
      trials = trials_per_point;
    } else {
      const double predicted =
          200.0 * std::exp(std::min(700.0, scale_value(e) * analytic_rate));
      trials = static_cast<std::uint64_t>(
          std::min<double>(static_cast<double>(max_trials),
                           std::max(1e4, predicted)));
    }
    std::uint64_t hits = count_hits(trials, threads, runner);
    if (trials_per_point == 0 && hits < 50 && trials < max_trials) {
      const double want =
          static_cast<double>(trials) *
          std::max(2.0, 50.0 / std::max<double>(1.0, static_cast<double>(hits)));
      const std::uint64_t target = static_cast<std::uint64_t>(
          std::min<double>(static_cast<double>(max_trials), want));
      if (target > trials) {
        auto extended = runner;
        extended.stream_base = stream_base + trials;
        hits += count_hits(target - trials, threads, extended);
        trials = target;
      }
    }
    curve.points.push_back({size_grid[i], summarize(e, trials, hits, seed)});
  }

  // trend statistic over points with hits
  std::vector<double> gaps;
  for (const auto& p : curve.points) {
    if (p.est.hits > 0) {
      gaps.push_back(std::abs(p.est.rate_hat - analytic_rate));
    }
  }
  long concordant = 0, discordant = 0;
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    for (std::size_t j = i + 1; j < gaps.size(); ++j) {
      if (gaps[j] > gaps[i]) ++concordant;
      if (gaps[j] < gaps[i]) ++discordant;
    }
  }
  const long pairs = concordant + discordant;
  curve.kendall_tau =
      pairs > 0 ? static_cast<double>(concordant - discordant) /
                      static_cast<double>(pairs)
                : 0.0;
  return curve;
}

// Acceptance policy for comparing an empirical rate with an analytic one:
// the 95% rate CI widened additively by 4/scale on each side. The additive
// slack absorbs the o(1) prefactor corrections that a finite-size empirical
// rate carries and that do not shrink with more trials.
inline double rate_slack(const MCEstimate& est) {
  return 4.0 / est.scale_value;
}

inline bool rate_within_slack(const MCEstimate& est, double analytic) {
  const double slack = rate_slack(est);
  if (est.rate_lower_bound_only) {
    return analytic >= est.rate_ci_low - slack;
  }
  return analytic >= est.rate_ci_low - slack &&
         analytic <= est.rate_ci_high + slack;
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Survival function of the Kolmogorov distribution.
inline double kolmogorov_sf(double lambda) {
  if (lambda < 1e-3) return 1.0;
  if (lambda < 1.18) {
    constexpr double pi = 3.14159265358979323846;
    const double t = std::exp(-pi * pi / (8.0 * lambda * lambda));
    const double cdf = std::sqrt(2.0 * pi) / lambda *
                       (t + std::pow(t, 9.0) + std::pow(t, 25.0));
    return std::max(0.0, 1.0 - cdf);
  }
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j & 1) ? term : -term;
    if (term < 1e-17) break;
  }
  return std::max(0.0, 2.0 * sum);
}

// Two-sided two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.size() < 100 || b.size() < 100) {
    throw std::invalid_argument("ks_two_sample: both samples need size >= 100");
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double m = static_cast<double>(a.size());
  const double n = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double xa = a[i], xb = b[j];
    if (xa < xb) {
      ++i;
    } else if (xb < xa) {
      ++j;
    } else {
      while (i < a.size() && a[i] == xa) ++i;
      while (j < b.size() && b[j] == xa) ++j;
    }
    d = std::max(d, std::abs(static_cast<double>(i) / m -
                             static_cast<double>(j) / n));
  }
  KsResult r;
  r.statistic = d;
  r.p_value = kolmogorov_sf(d * std::sqrt(m * n / (m + n)));
  return r;
}

struct CramerPoint {
  long n = 0;
  MCEstimate est;
  double analytic = 0.0;
  bool within_tolerance = false;
};

// Validates the harness on a textbook case: the empirical rate of
// {mean of n Exp(1) <=/>= threshold} against I_exp(threshold) = y - 1 - log y.
inline std::vector<CramerPoint> cramer_selfcheck(
    double threshold, std::span<const long> n_grid,
    std::uint64_t trials_per_point, std::uint64_t seed,
    int threads = default_threads()) {
  if (!(threshold > 0.0)) {
    throw std::domain_error("cramer_selfcheck: threshold > 0");
  }
  const bool leq = threshold <= 1.0;
  const double analytic = cramer_exp_rate(threshold);
  std::vector<CramerPoint> out;
  for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
    const long n = n_grid[gi];
    const std::uint64_t stream_base = static_cast<std::uint64_t>(gi) << 40;
    auto pred = [&, n](std::uint64_t trial) {
      CounterRng rng(RngStream{seed, stream_base + trial});
      double s = 0.0;
      for (long k = 0; k < n; ++k) s += rng.next_exp();
      const double mean = s / static_cast<double>(n);
      return leq ? mean <= threshold : mean >= threshold;
    };
    const std::uint64_t hits = count_hits(trials_per_point, threads, pred);
    EventSpec e;  // synthetic spec purely for the scale bookkeeping
    e.statistic = Statistic::nTn;
    e.direction = leq ? Direction::leq : Direction::geq;
    e.threshold = threshold;
    e.size_param = static_cast<double>(n);
    e.scale = RateScale::per_n;
    CramerPoint pt;
    pt.n = n;
    pt.est = summarize(e, trials_per_point, hits, seed);
    pt.analytic = analytic;
    pt.within_tolerance = rate_within_slack(pt.est, analytic);
    out.push_back(pt);
  }
  return out;
}

}  // namespace coalld::mc
