#pragma once

// Scalar numerical kernel: adaptive quadrature over [1,inf), bracketing root
// finder, golden-section line search, and log of the standard normal CDF.
// Everything here is a pure function of its arguments.

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace coalld {

struct QuadratureResult {
  double value = 0.0;
  double abs_err_estimate = 0.0;  // same units as value
  long evaluations = 0;
  bool converged = true;
};

struct BracketedRoot {
  double root = 0.0;
  double residual = 0.0;  // fn(root) - target
  double bracket_low = 0.0;
  double bracket_high = 0.0;
};

enum class OptMode { minimize, maximize };

struct UnimodalOptimum {
  double arg = 0.0;
  double value = 0.0;
  bool interior = true;  // false: optimum ran into a bracket endpoint
};

namespace detail {

// Gauss-Legendre 7 on [-1,1]. Interior nodes only, so integrable endpoint
// singularities are never evaluated.
inline constexpr std::array<std::array<double, 2>, 7> kGauss7 = {{
    {-0.94910791234275849, 0.12948496616887065},
    {-0.74153118559939446, 0.27970539148927659},
    {-0.40584515137739718, 0.38183005050511831},
    {0.0, 0.41795918367346896},
    {0.40584515137739718, 0.38183005050511831},
    {0.74153118559939446, 0.27970539148927659},
    {0.94910791234275849, 0.12948496616887065},
}};

template <class F>
double gauss7(F&& f, double a, double b, long& evals) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double acc = 0.0;
  for (const auto& nw : kGauss7) {
    const double v = f(c + h * nw[0]);
    if (std::isnan(v)) {
      throw std::domain_error("integrate_tail: integrand returned NaN");
    }
    acc += nw[1] * v;
  }
  evals += 7;
  return acc * h;
}

}  // namespace detail

// Integrates `integrand` over [1, inf). The substitution y = 1/u maps the
// domain onto (0,1], where the transformed integrand u -> f(1/u)/u^2 stays
// bounded whenever f decays like 1/y^2 or faster; worst-interval-first
// bisection with a Gauss-7 rule then gives uniform control all the way into
// the tail. Per-interval error is |one-level - two-level|; refinement stops
// once the summed error fits rel_tol * |integral| or every remaining interval
// is at max_depth.
template <class F>
QuadratureResult integrate_tail(F&& integrand, double rel_tol,
                                int max_depth = 60) {
  if (!(rel_tol > 0.0) || rel_tol > 1e-3) {
    throw std::invalid_argument("integrate_tail: rel_tol must be in (0, 1e-3]");
  }
  auto g = [&](double u) {
    const double y = 1.0 / u;
    return integrand(y) * y * y;
  };

  QuadratureResult out;

  struct Iv {
    double a, b;
    double g_left, g_right;  // one-level values of the two halves
    double value;            // g_left + g_right
    double err;              // |value - one-level of [a,b]|
    int depth;
  };
  auto make = [&](double a, double b, double one_level, int depth) {
    const double m = 0.5 * (a + b);
    Iv iv;
    iv.a = a;
    iv.b = b;
    iv.g_left = detail::gauss7(g, a, m, out.evaluations);
    iv.g_right = detail::gauss7(g, m, b, out.evaluations);
    iv.value = iv.g_left + iv.g_right;
    iv.err = std::abs(iv.value - one_level);
    iv.depth = depth;
    return iv;
  };

  std::vector<Iv> live;
  live.reserve(256);
  std::vector<Iv> frozen;  // intervals at max_depth, kept as-is
  const double whole = detail::gauss7(g, 0.0, 1.0, out.evaluations);
  live.push_back(make(0.0, 1.0, whole, 0));
  double total_err = live[0].err;
  double total_val = live[0].value;

  constexpr int kMaxIntervals = 100000;
  while (static_cast<int>(live.size() + frozen.size()) < kMaxIntervals) {
    const double budget =
        rel_tol * std::max(std::abs(total_val), 1e-12) + 1e-300;
    if (total_err <= budget || live.empty()) break;
    // pop worst
    std::size_t wi = 0;
    for (std::size_t i = 1; i < live.size(); ++i) {
      if (live[i].err > live[wi].err) wi = i;
    }
    Iv worst = live[wi];
    live[wi] = live.back();
    live.pop_back();
    if (worst.depth >= max_depth) {
      frozen.push_back(worst);
      continue;
    }
    const double m = 0.5 * (worst.a + worst.b);
    Iv l = make(worst.a, m, worst.g_left, worst.depth + 1);
    Iv r = make(m, worst.b, worst.g_right, worst.depth + 1);
    total_val += l.value + r.value - worst.value;
    total_err += l.err + r.err - worst.err;
    live.push_back(l);
    live.push_back(r);
  }

  // Kahan-sum the pieces; the set of intervals is a deterministic function of
  // the integrand, so the result is reproducible.
  double total = 0.0, comp = 0.0, err_sum = 0.0;
  auto add = [&](double v) {
    const double t = total + v;
    if (std::abs(total) >= std::abs(v)) {
      comp += (total - t) + v;
    } else {
      comp += (v - t) + total;
    }
    total = t;
  };
  for (const auto& iv : frozen) {
    add(iv.value);
    err_sum += iv.err;
  }
  for (const auto& iv : live) {
    add(iv.value);
    err_sum += iv.err;
  }
  out.value = total + comp;
  out.abs_err_estimate = err_sum + 4.0 * std::numeric_limits<double>::epsilon() *
                                       std::abs(out.value);
  out.converged =
      err_sum <= rel_tol * std::max(std::abs(out.value), 1e-12) + 1e-300;
  return out;
}

// Solves fn(x) = target by bisection on a bracket, expanding the initial
// bracket by doubling until the target is enclosed. Works for increasing or
// decreasing fn. Residual tolerance is on |fn(root) - target|.
template <class F>
BracketedRoot solve_monotone(F&& fn, double target, double lo, double hi,
                             double tol = 1e-12) {
  if (!(lo < hi)) throw std::invalid_argument("solve_monotone: empty bracket");
  constexpr int kMaxExpand = 200;
  constexpr double kMaxAbs = 1e300;

  double flo = fn(lo);
  double fhi = fn(hi);
  const bool increasing = fhi >= flo;
  auto below = [&](double fv) { return increasing ? fv < target : fv > target; };

  // Grow the side that still misses the target.
  for (int i = 0; i < kMaxExpand && below(fhi) == below(flo); ++i) {
    const double width = hi - lo;
    if (below(fhi)) {
      hi += width;
      if (std::abs(hi) > kMaxAbs) break;
      fhi = fn(hi);
    } else {
      lo -= width;
      if (std::abs(lo) > kMaxAbs) break;
      flo = fn(lo);
    }
  }
  if (below(fhi) == below(flo)) {
    throw std::range_error(
        "solve_monotone: target not attained on the maximal bracket");
  }

  double root = 0.5 * (lo + hi);
  double fr = fn(root);
  for (int it = 0; it < 200; ++it) {
    if (std::abs(fr - target) <= tol) break;
    if (below(fr)) {
      lo = root;
    } else {
      hi = root;
    }
    const double next = 0.5 * (lo + hi);
    if (next == lo || next == hi) break;  // bracket exhausted in doubles
    root = next;
    fr = fn(root);
  }
  if (std::abs(fr - target) > tol) {
    throw std::runtime_error("solve_monotone: residual tolerance not met");
  }
  return {root, fr - target, lo, hi};
}

// Golden-section search. `tol` is an absolute tolerance on the argument.
// If fn turns out not to have an interior turning point, the better bracket
// endpoint is returned with interior = false.
template <class F>
UnimodalOptimum optimize_unimodal(F&& fn, double lo, double hi, OptMode mode,
                                  double tol = 1e-10) {
  if (!(lo < hi)) throw std::invalid_argument("optimize_unimodal: bad bracket");
  const double sign = (mode == OptMode::minimize) ? 1.0 : -1.0;
  auto h = [&](double x) { return sign * fn(x); };

  constexpr double kInvPhi = 0.61803398874989485;
  const double lo0 = lo, hi0 = hi;
  double c = hi - kInvPhi * (hi - lo);
  double d = lo + kInvPhi * (hi - lo);
  double fc = h(c), fd = h(d);
  for (int it = 0; it < 400 && (hi - lo) > tol; ++it) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - kInvPhi * (hi - lo);
      fc = h(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + kInvPhi * (hi - lo);
      fd = h(d);
    }
  }
  UnimodalOptimum out;
  out.arg = 0.5 * (lo + hi);
  double fbest = h(out.arg);

  // Endpoint fallback: a monotone fn drives golden into a corner; report the
  // endpoint value and flag it.
  const double fl = h(lo0), fr = h(hi0);
  if (fl < fbest) {
    out.arg = lo0;
    fbest = fl;
  }
  if (fr < fbest) {
    out.arg = hi0;
    fbest = fr;
  }
  const double margin = 2.0 * tol + 1e-14 * (std::abs(lo0) + std::abs(hi0));
  out.interior = (out.arg - lo0 > margin) && (hi0 - out.arg > margin);
  out.value = sign * fbest;
  return out;
}

// log Phi(z), standard normal. Accurate to >= 10 significant digits over the
// whole real line; for deep negative z the Mills-ratio asymptotic series
// avoids the underflow of Phi itself.
inline double log_normal_cdf(double z) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kLogSqrt2Pi = 0.91893853320467274178;
  if (z >= 0.0) {
    // Phi(z) = 1 - Phi(-z); log1p keeps z = +10 at ~ -7.6e-24 exact.
    return std::log1p(-0.5 * std::erfc(z * kInvSqrt2));
  }
  if (z > -26.0) {
    return std::log(0.5 * std::erfc(-z * kInvSqrt2));
  }
  // Phi(z) = phi(z)/(-z) * (1 - 1/z^2 + 3/z^4 - 15/z^6 + ...); eight terms
  // leave a relative error below 1e-15 for z <= -26.
  const double w = 1.0 / (z * z);
  double s = 2027025.0;
  s = s * w - 135135.0;
  s = s * w + 10395.0;
  s = s * w - 945.0;
  s = s * w + 105.0;
  s = s * w - 15.0;
  s = s * w + 3.0;
  s = s * w - 1.0;
  s = s * w;  // = sum_{k>=1} (-1)^k (2k-1)!!/z^{2k}
  return -0.5 * z * z - kLogSqrt2Pi - std::log(-z) + std::log1p(s);
}

}  // namespace coalld
