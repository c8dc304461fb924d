#pragma once

// Analytic rate functions, bounds and exact distribution formulas for the
// tree-top functionals of Kingman's coalescent:
//
//   I(x)      rate of n*T_n on scale n (T_n = time to come down to n lines)
//   Ihat(x)   rate of eps*N_eps on scale 1/eps
//   sqrt(x-2) rate of upward deviations of the homozygosity statistic W_n,
//             on scale sqrt(n)
//   Itilde(x) rate of downward deviations of W_n on scale n, as a nested
//             sup-inf of the explicit function M
//
// plus the Tavare series for the exact distribution of N_eps.

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "coalld/numerics.hpp"

namespace coalld {

enum class RateScale { per_n, per_sqrt_n, per_inv_eps };

inline const char* to_string(RateScale s) {
  switch (s) {
    case RateScale::per_n: return "n";
    case RateScale::per_sqrt_n: return "sqrt_n";
    case RateScale::per_inv_eps: return "inv_eps";
  }
  return "?";
}

// A computed rate-function value. Infinite rates are a distinguished state,
// never a sentinel float.
struct RateValue {
  double value = 0.0;
  double abs_err_estimate = 0.0;
  RateScale scale = RateScale::per_n;
  bool infinite = false;

  static RateValue finite(double v, double err, RateScale s) {
    return {v, err, s, false};
  }
  static RateValue infinity(RateScale s) {
    return {0.0, 0.0, s, true};
  }
};

// The Legendre tilt: the unique t < 1 with f(t) = x. one_minus_t is carried
// separately because t itself rounds to 1.0 once x is larger than ~36.
struct TiltPoint {
  double x = 0.0;
  double t = 0.0;
  double one_minus_t = 1.0;
  double residual = 0.0;  // f(t) - x
};

struct DownRateSolution {
  double x = 0.0;
  double c_star = 0.0;
  double t_star = 0.0;
  double value = 0.0;
  bool converged = false;
};

// f(t) = (1/sqrt(t)) log((1+sqrt t)/(1-sqrt t)) for 0<t<1, 2 at t=0,
// (2/sqrt|t|) atan(sqrt|t|) for t<0. Continuous and increasing on (-inf,1),
// range (0,inf): (0,2] for t<=0 and [2,inf) for t in [0,1).
inline double eval_f(double t) {
  if (!(t < 1.0)) {
    throw std::domain_error("eval_f: requires t < 1");
  }
  if (t == 0.0) return 2.0;
  if (t > 0.0) {
    const double s = std::sqrt(t);
    return (std::log1p(s) - std::log1p(-s)) / s;
  }
  const double a = std::sqrt(-t);
  return 2.0 * std::atan(a) / a;
}

namespace detail {

// f on the positive branch parametrized by sigma = 1 - sqrt(t), which stays
// well away from rounding even when t is within 1e-40 of 1:
// f = log((2-sigma)/sigma) / (1-sigma) = log1p(2(1-sigma)/sigma) / (1-sigma).
// The log1p form keeps full accuracy as sigma -> 1 (t -> 0), where the two
// (1-sigma) factors cancel.
inline double f_of_sigma(double sigma) {
  if (sigma == 1.0) return 2.0;
  const double oms = 1.0 - sigma;
  return std::log1p(2.0 * oms / sigma) / oms;
}

inline double sigma_of_tilt(const TiltPoint& tp) {
  // sigma = 1 - sqrt(1 - omt) without cancellation
  const double omt = tp.one_minus_t;
  return omt / (1.0 + std::sqrt(std::max(0.0, 1.0 - omt)));
}

}  // namespace detail

// f evaluated at a tilt point through the cancellation-free parametrization;
// agrees with eval_f(tp.t) wherever the latter is representable.
inline double eval_f_at_tilt(const TiltPoint& tp) {
  if (tp.t <= 0.0) return eval_f(tp.t);
  return detail::f_of_sigma(detail::sigma_of_tilt(tp));
}

// Inverts f: the unique t_x < 1 with f(t_x) = x, for x > 0.
// x >= 2 lands on the t >= 0 branch, x < 2 on the t < 0 branch.
inline TiltPoint solve_tilt(double x) {
  if (!(x > 0.0)) {
    throw std::domain_error("solve_tilt: requires x > 0");
  }
  TiltPoint tp;
  tp.x = x;
  const double tol = 1e-12 * std::max(1.0, x);
  if (x == 2.0) {
    tp.t = 0.0;
    tp.one_minus_t = 1.0;
    tp.residual = 0.0;
    return tp;
  }
  if (x > 2.0) {
    // f_of_sigma decreases from +inf (sigma->0) to 2 (sigma=1).
    const double lo = std::min(0.25, 0.5 * std::exp(-x));
    const auto r = solve_monotone(detail::f_of_sigma, x, lo, 1.0, tol);
    const double sigma = r.root;
    tp.t = (1.0 - sigma) * (1.0 - sigma);
    tp.one_minus_t = sigma * (2.0 - sigma);
    tp.residual = r.residual;
    return tp;
  }
  // x < 2: solve 2 atan(u)/u = x in u = sqrt(-t); decreasing from 2 to 0.
  auto phi = [](double u) { return 2.0 * std::atan(u) / u; };
  const double hi = std::numbers::pi / x + 1.0;
  const auto r = solve_monotone(phi, x, 1e-150, hi, tol);
  const double u = r.root;
  tp.t = -u * u;
  tp.one_minus_t = 1.0 + u * u;
  tp.residual = r.residual;
  return tp;
}

// Limiting scaled log moment generating function of n*T_n:
// Lambda(t) = -int_1^inf log(1 - 2t/y^2) dy for t <= 1/2, +inf above.
// Strictly increasing, Lambda(0) = 0. Evaluated by quadrature (the value at
// t = 1/2 is 2 log 2; the integrand's endpoint log singularity is integrable).
inline double eval_Lambda(double t, double rel_tol = 1e-10) {
  if (t > 0.5) return std::numeric_limits<double>::infinity();
  if (t == 0.0) return 0.0;
  const double om2t = 1.0 - 2.0 * t;
  auto integrand = [om2t](double y) {
    return std::log((y - 1.0) * (y + 1.0) + om2t) - 2.0 * std::log(y);
  };
  const auto q = integrate_tail(integrand, rel_tol);
  return -q.value;
}

// Rate function of n*T_n (scale n), the paper-literal route:
// I(x) = t_x x / 2 + int_1^inf log(1 - t_x/y^2) dy for x > 0, +inf otherwise.
inline RateValue eval_I(double x, double rel_tol = 1e-11) {
  if (!(x > 0.0)) return RateValue::infinity(RateScale::per_n);
  const TiltPoint tp = solve_tilt(x);
  const double omt = tp.one_minus_t;
  auto integrand = [omt](double y) {
    return std::log((y - 1.0) * (y + 1.0) + omt) - 2.0 * std::log(y);
  };
  const auto q = integrate_tail(integrand, rel_tol);
  double v = 0.5 * tp.t * x + q.value;
  const double err = q.abs_err_estimate +
                     8.0 * std::numeric_limits<double>::epsilon() *
                         (1.0 + std::abs(v) + 0.5 * std::abs(tp.t) * x);
  if (v < 0.0 && v > -err) v = 0.0;  // rates are nonnegative
  return RateValue::finite(v, err, RateScale::per_n);
}

// Closed form of the same integral: I(x) = -t_x x/2 - log(1 - t_x), valid on
// both branches. Kept separate from eval_I so the two routes act as mutual
// oracles.
inline double closed_form_I(const TiltPoint& tp) {
  return -0.5 * tp.t * tp.x - std::log(tp.one_minus_t);
}

inline double eval_I_closed(double x) {
  if (!(x > 0.0)) return std::numeric_limits<double>::infinity();
  return closed_form_I(solve_tilt(x));
}

// Rate function of eps*N_eps (scale 1/eps): x I(x) for x > 0, pi^2/2 at
// x = 0, +inf below.
inline RateValue eval_I_hat(double x, double rel_tol = 1e-11) {
  if (x < 0.0) return RateValue::infinity(RateScale::per_inv_eps);
  if (x == 0.0) {
    constexpr double pi = std::numbers::pi;
    return RateValue::finite(pi * pi / 2.0, 1e-15, RateScale::per_inv_eps);
  }
  const RateValue I = eval_I(x, rel_tol);
  return RateValue::finite(x * I.value, x * I.abs_err_estimate,
                           RateScale::per_inv_eps);
}

// Upward rate for W_n on scale sqrt(n): sqrt(x-2) for x >= 2.
inline RateValue rate_up_Wn(double x) {
  if (!(x >= 2.0)) {
    throw std::domain_error("rate_up_Wn: requires x >= 2");
  }
  const double v = std::sqrt(x - 2.0);
  return RateValue::finite(v, std::numeric_limits<double>::epsilon() * (1.0 + v),
                           RateScale::per_sqrt_n);
}

// M(x,c,t) = M1 + M2 + M3 with
//   M1 = log(2 pi)/2 + log(x)/4 - log(t)/2
//   M2 = ((tc-1)^2 x - t^2 c^2) / (2 t sqrt x)
//   M3 = log Phi((tc-1) x^{1/4} / sqrt t)
// so that exp(M) = E[exp(t(c R - (R^2 + c^2)/(2 sqrt x)))] for R ~ Exp(1).
inline double eval_M(double x, double c, double t) {
  if (!(x > 1.0 && x < 2.0)) {
    throw std::domain_error("eval_M: requires x in (1,2)");
  }
  if (!(c >= 0.0)) throw std::domain_error("eval_M: requires c >= 0");
  if (!(t > 0.0)) throw std::domain_error("eval_M: requires t > 0");
  constexpr double kLog2Pi = 1.8378770664093454836;
  const double sx = std::sqrt(x);
  const double qx = std::sqrt(sx);  // x^{1/4}
  const double st = std::sqrt(t);
  const double tc1 = t * c - 1.0;
  const double m1 = 0.5 * kLog2Pi + 0.25 * std::log(x) - 0.5 * std::log(t);
  const double m2 = (tc1 * tc1 * x - t * t * c * c) / (2.0 * t * sx);
  const double m3 = log_normal_cdf(tc1 * qx / st);
  return m1 + m2 + m3;
}

// Downward rate for W_n on scale n:
//   Itilde(x) = - sup_{c>=0} inf_{t>0} M(x,c,t),
// the negation making the rate nonnegative (exp(M) -> 1 as t -> 0, so the
// sup-inf is <= 0). Inner infimum by golden section in log t (M is convex in
// t as a log moment generating function); outer supremum by a coarse grid in
// c followed by golden refinement.
inline DownRateSolution eval_I_tilde(double x) {
  if (!(x > 1.0 && x < 2.0)) {
    throw std::domain_error("eval_I_tilde: requires x in (1,2)");
  }
  constexpr double kLogTLo = -13.815510557964274;  // log 1e-6
  constexpr double kLogTHi = 6.9077552789821368;   // log 1e3
  auto inner = [&](double c) {
    auto m = [&](double lt) { return eval_M(x, c, std::exp(lt)); };
    return optimize_unimodal(m, kLogTLo, kLogTHi, OptMode::minimize, 1e-10);
  };

  constexpr int kGridPoints = 200;
  constexpr double kCMax = 50.0;
  int best_i = 1;
  double best_v = -std::numeric_limits<double>::infinity();
  for (int i = 1; i <= kGridPoints; ++i) {
    const double c = kCMax * i / kGridPoints;
    const double v = inner(c).value;
    if (v > best_v) {
      best_v = v;
      best_i = i;
    }
  }
  const double clo = kCMax * (best_i - 1) / kGridPoints;
  const double chi = kCMax * std::min(best_i + 1, kGridPoints) / kGridPoints;
  auto outer = optimize_unimodal([&](double c) { return inner(c).value; },
                                 clo, chi, OptMode::maximize, 1e-9);
  const auto fin = inner(outer.arg);

  DownRateSolution s;
  s.x = x;
  s.c_star = outer.arg;
  s.t_star = std::exp(fin.arg);
  s.value = -fin.value;
  if (s.value < 0.0 && s.value > -1e-9) s.value = 0.0;
  s.converged = outer.interior && fin.interior && best_i < kGridPoints &&
                s.value >= 0.0;
  return s;
}

// Upper bound on Itilde implied by the lower bound on downward deviations:
// Itilde(x) <= 1/sqrt(x-1) - 1 on (1,2).
inline double bound_T3(double x) {
  if (!(x > 1.0 && x < 2.0)) {
    throw std::domain_error("bound_T3: requires x in (1,2)");
  }
  return 1.0 / std::sqrt(x - 1.0) - 1.0;
}

struct PositivityBound {
  double g = 0.0;                   // in (0,1)
  double implied_upper_bound = 0.0; // -log g, an upper bound on Itilde
};

// Closed form of sup_{c>=0} (e^{-c(sqrt x - sqrt(x-1))} -
// e^{-c(sqrt x + sqrt(x-1))}); the supremum is P(r1 <= R <= r2) maximized
// over c, a lower bound on exp(sup inf M), so -log g bounds Itilde above.
inline PositivityBound bound_positivity_g(double x) {
  if (!(x > 1.0 && x < 2.0)) {
    throw std::domain_error("bound_positivity_g: requires x in (1,2)");
  }
  const double sx = std::sqrt(x);
  const double sxm1 = std::sqrt(x - 1.0);
  const double alpha = sx - sxm1;
  const double beta = sx + sxm1;
  const double g =
      (2.0 * sxm1 / beta) * std::pow(alpha / beta, alpha / (2.0 * sxm1));
  return {g, -std::log(g)};
}

// Markov-inequality bound: Ihat(x) >= (x-2)^2/4 for x in (1.5, 2.5).
inline double bound_angel(double x) {
  if (!(x > 1.5 && x < 2.5)) {
    throw std::domain_error("bound_angel: requires x in (1.5, 2.5)");
  }
  return 0.25 * (x - 2.0) * (x - 2.0);
}

// Cramer rate for the mean of Exp(1) variables: I_exp(y) = y - 1 - log y.
inline double cramer_exp_rate(double y) {
  if (!(y > 0.0)) {
    throw std::domain_error("cramer_exp_rate: requires y > 0");
  }
  return y - 1.0 - std::log(y);
}

// Tavare's series for P(N_eps = n):
//   sum_{k>=n} e^{-k(k-1)eps/2} (-1)^{k-n} (2k-1) n(n+1)...(n+k-2) / (n!(k-n)!)
// The ratio factor is accumulated in log space (lgamma), the alternating sum
// with compensated summation. The series cancels catastrophically for small
// eps; below the 0.05 floor an error tells the caller to use Monte Carlo.
inline double tavare_pmf(double eps, long n) {
  if (n < 1) throw std::domain_error("tavare_pmf: requires n >= 1");
  if (!(eps >= 0.05)) {
    throw std::domain_error(
        "tavare_pmf: eps below the 0.05 stability floor; "
        "estimate P(N_eps = n) by Monte Carlo instead");
  }
  const double lg_n = std::lgamma(static_cast<double>(n));
  const double lg_n1 = std::lgamma(static_cast<double>(n + 1));
  double sum = 0.0, comp = 0.0;
  double max_mag = 0.0;
  double prev_mag = std::numeric_limits<double>::infinity();
  for (long k = n; k < n + 500000; ++k) {
    const double kd = static_cast<double>(k);
    const double log_mag = -0.5 * kd * (kd - 1.0) * eps +
                           std::log(2.0 * kd - 1.0) +
                           std::lgamma(static_cast<double>(n + k - 1)) - lg_n -
                           lg_n1 - std::lgamma(static_cast<double>(k - n + 1));
    const double mag = std::exp(log_mag);
    const double term = ((k - n) & 1) ? -mag : mag;
    const double t = sum + term;
    if (std::abs(sum) >= std::abs(term)) {
      comp += (sum - t) + term;
    } else {
      comp += (term - t) + sum;
    }
    sum = t;
    max_mag = std::max(max_mag, mag);
    if (k > n + 1 && mag <= prev_mag && mag < 1e-12 * max_mag) break;
    prev_mag = mag;
  }
  double p = sum + comp;
  if (p < 0.0) p = 0.0;
  if (p > 1.0) p = 1.0;
  return p;
}

}  // namespace coalld
