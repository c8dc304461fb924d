#pragma once

// Samplers for the tree-top of Kingman's coalescent: the times T_n (time to
// come down from infinitely many lines to n), the line count N_eps, the
// family-frequency partition at T_n, and the homozygosity statistic
// W_n = n * sum F_k^2, in every distributional representation used here.
//
// The infinite tail sum T_n = sum_{k>n} S_k / C(k,2) is truncated at a cutoff
// K; the dropped remainder has mean exactly 2/K (telescoping), which each
// path reports as bias_bound. The remainder is dropped, not compensated:
// adding its mean back would distort the lower tail of the distribution.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "coalld/rng.hpp"

namespace coalld {

struct CoalescentTailPath {
  long cutoff_K = 0;
  std::vector<double> times;  // times[i] = T_{i+1}, strictly decreasing
  double bias_bound = 0.0;    // mean of the dropped remainder, = 2/K
};

struct FamilyPartition {
  long n = 0;
  std::vector<double> freqs;  // positive, sums to 1
};

enum class FamilyMethod { spacings, normalized_exponentials };
enum class WnMethod { direct, ordered };

// Truncation policy: cutoff K = max(n+1, ceil(2/delta)) keeps the remainder
// mean (= 2/K) at or below delta.
inline long default_cutoff(long n, double delta = 1e-6) {
  if (!(delta > 0.0)) throw std::domain_error("default_cutoff: delta > 0");
  const long k_bias = static_cast<long>(std::ceil(2.0 / delta));
  return std::max(n + 1, k_bias);
}

// w[k] = 2/(k(k-1)), the mean sojourn time with k lines. Shared, read-only.
inline std::vector<double> stage_time_weights(long K) {
  std::vector<double> w(static_cast<std::size_t>(K) + 1, 0.0);
  for (long k = 2; k <= K; ++k) {
    w[static_cast<std::size_t>(k)] =
        2.0 / (static_cast<double>(k) * static_cast<double>(k - 1));
  }
  return w;
}

// Draws S_k ~ Exp(1) for k = 2..K (in that order) and records the truncated
// times T_n = sum_{k=n+1}^{K} S_k/C(k,2) for n = 1..K-1.
inline CoalescentTailPath sample_tail_path(long K, RngStream stream) {
  if (K < 2) throw std::domain_error("sample_tail_path: requires K >= 2");
  CounterRng rng(stream);
  CoalescentTailPath path;
  path.cutoff_K = K;
  path.bias_bound = 2.0 / static_cast<double>(K);
  std::vector<double> inc(static_cast<std::size_t>(K) + 1, 0.0);
  for (long k = 2; k <= K; ++k) {
    inc[static_cast<std::size_t>(k)] =
        rng.next_exp() * 2.0 /
        (static_cast<double>(k) * static_cast<double>(k - 1));
  }
  path.times.resize(static_cast<std::size_t>(K) - 1);
  double acc = 0.0;
  for (long k = K; k >= 2; --k) {
    acc += inc[static_cast<std::size_t>(k)];
    path.times[static_cast<std::size_t>(k) - 2] = acc;
  }
  return path;
}

// Truncated T_n alone, without building a path: draws S_k for k = n+1..K
// from the start of the stream and returns sum S_k/C(k,2). The batched fill
// plus a fixed four-lane reduction keeps the result a pure function of
// (stream, n, K) while letting the inner loops vectorize.
inline double truncated_tail_time(RngStream stream, long n, long K,
                                  std::span<const double> weight) {
  if (K < n + 1 || n < 1) {
    throw std::domain_error("truncated_tail_time: requires 1 <= n < K");
  }
  constexpr int kBatch = 512;
  double buf[kBatch + 1];
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  const double* w = weight.data();
  long k = n + 1;
  std::uint64_t blk = 0;
  while (k <= K) {
    const int m = static_cast<int>(std::min<long>(kBatch, K - k + 1));
    const int nblk = (m + 1) / 2;
    fill_units(stream, blk, nblk, buf);
    blk += static_cast<std::uint64_t>(nblk);
    const double* wk = w + k;
    for (int i = 0; i < m; ++i) buf[i] = wk[i] * (-fastlog(buf[i]));
    int i = 0;
    for (; i + 4 <= m; i += 4) {
      a0 += buf[i];
      a1 += buf[i + 1];
      a2 += buf[i + 2];
      a3 += buf[i + 3];
    }
    for (; i < m; ++i) a0 += buf[i];
    k += m;
  }
  return (a0 + a1) + (a2 + a3);
}

struct LineCount {
  long n = 0;
  // Set when truncation could have changed the answer: either eps is within
  // an order of magnitude of the remainder mean, or every recorded time is
  // still >= eps (so n is only a lower bound).
  bool truncation_flagged = false;
};

// N_eps = inf{n : T_n < eps}, the number of lines at time eps.
inline LineCount count_lines_at(const CoalescentTailPath& path, double eps) {
  if (!(eps > 0.0)) throw std::domain_error("count_lines_at: requires eps > 0");
  LineCount out;
  out.truncation_flagged = eps < 10.0 * path.bias_bound;
  // times decreasing: find the first index with T < eps
  const auto& t = path.times;
  std::size_t lo = 0, hi = t.size();
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (t[mid] < eps) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  if (lo == t.size()) {
    // even T_{K-1} >= eps: the true N_eps exceeds the cutoff
    out.n = path.cutoff_K;
    out.truncation_flagged = true;
    return out;
  }
  out.n = static_cast<long>(lo) + 1;
  return out;
}

// Family frequencies at T_n: gaps of n-1 sorted uniforms, or n normalized
// Exp(1) draws. Equal in distribution.
inline FamilyPartition sample_families(long n, FamilyMethod method,
                                       RngStream stream) {
  if (n < 1) throw std::domain_error("sample_families: requires n >= 1");
  FamilyPartition fp;
  fp.n = n;
  fp.freqs.resize(static_cast<std::size_t>(n));
  if (n == 1) {  // degenerate single family, no draws
    fp.freqs[0] = 1.0;
    return fp;
  }
  CounterRng rng(stream);
  if (method == FamilyMethod::spacings) {
    std::vector<double> u(static_cast<std::size_t>(n) - 1);
    for (auto& v : u) v = rng.next_unit();
    std::sort(u.begin(), u.end());
    double prev = 0.0;
    for (std::size_t i = 0; i + 1 < fp.freqs.size(); ++i) {
      fp.freqs[i] = u[i] - prev;
      prev = u[i];
    }
    fp.freqs.back() = 1.0 - prev;
  } else {
    double sum = 0.0;
    for (auto& v : fp.freqs) {
      v = rng.next_exp();
      sum += v;
    }
    for (auto& v : fp.freqs) v /= sum;
  }
  return fp;
}

// W_n from n Exp(1) draws.
//   direct:  n * sum R_k^2 / (sum R_k)^2
//   ordered: the telescoped form built from the order-statistics
//            representation, evaluated in one O(n) pass over prefix sums:
//            (2 sum_l sum_{k<=l} R_k R_l / l - sum_k R_k^2 / k) / (n mean^2)
// Both land in [1, n]; W = 1 exactly only for n = 1.
inline double sample_Wn(long n, WnMethod method, RngStream stream) {
  if (n < 1) throw std::domain_error("sample_Wn: requires n >= 1");
  CounterRng rng(stream);
  if (method == WnMethod::direct) {
    double s1 = 0.0, s2 = 0.0;
    for (long k = 1; k <= n; ++k) {
      const double r = rng.next_exp();
      s1 += r;
      s2 += r * r;
    }
    return static_cast<double>(n) * s2 / (s1 * s1);
  }
  double prefix = 0.0, num = 0.0;
  for (long k = 1; k <= n; ++k) {
    const double r = rng.next_exp();
    prefix += r;
    num += (r / static_cast<double>(k)) * (2.0 * prefix - r);
  }
  return static_cast<double>(n) * num / (prefix * prefix);
}

// Streaming N_eps for one stream, allocation-free: a first pass accumulates
// the truncated T_1, a second pass over the same counter stream re-generates
// the increments to locate N = inf{n : T_n < eps}. Returns K when even
// T_{K-1} >= eps (the count is then only a lower bound).
inline long line_count_at(RngStream stream, double eps, long K) {
  if (!(eps > 0.0)) throw std::domain_error("line_count_at: requires eps > 0");
  if (K < 2) throw std::domain_error("line_count_at: requires K >= 2");
  CounterRng pass1(stream);
  double total = 0.0;
  for (long k = 2; k <= K; ++k) {
    total += pass1.next_exp() * 2.0 /
             (static_cast<double>(k) * static_cast<double>(k - 1));
  }
  if (total < eps) return 1;
  CounterRng pass2(stream);
  double prefix = 0.0;
  for (long n = 2; n < K; ++n) {
    prefix += pass2.next_exp() * 2.0 /
              (static_cast<double>(n) * static_cast<double>(n - 1));
    if (total - prefix < eps) return n;
  }
  return K;
}

struct TiltedWnSample {
  double w = 0.0;
  double log_weight = 0.0;  // -n*y
};

// Ordered-representation sampler with the minimum-shifting trick: R_n gets
// n*y added, which shifts every reconstructed order statistic by y; the
// resulting sample has the law of W_n conditioned on {R_n > n y}, and
// P(R_n > n y) = exp(-n y), so
//   E[phi(W~)] * exp(log_weight) = E[phi(W_n); R_n > n y].
inline TiltedWnSample sample_Wn_tilted(long n, double y, RngStream stream) {
  if (n < 1) throw std::domain_error("sample_Wn_tilted: requires n >= 1");
  if (!(y >= 0.0)) throw std::domain_error("sample_Wn_tilted: requires y >= 0");
  CounterRng rng(stream);
  const double shift = static_cast<double>(n) * y;
  double prefix = 0.0, num = 0.0;
  for (long k = 1; k <= n; ++k) {
    double r = rng.next_exp();
    if (k == n) r += shift;
    prefix += r;
    num += (r / static_cast<double>(k)) * (2.0 * prefix - r);
  }
  return {static_cast<double>(n) * num / (prefix * prefix), -shift};
}

}  // namespace coalld
