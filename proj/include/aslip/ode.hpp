#pragma once

// Dormand-Prince 5(4) integrator with the 4th-order continuous extension and a
// bisection event locator working on the dense output.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "aslip/error.hpp"

namespace aslip {

struct OdeTolerances {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  double max_step = 0.02;
  double min_step = 1e-14;
};

/// Dense-output interpolant over one accepted step [t0, t0 + h].
template <std::size_t N>
struct DenseStep {
  using Vec = std::array<double, N>;
  double t0 = 0.0;
  double h = 0.0;
  std::array<Vec, 5> coeff{};

  double t1() const { return t0 + h; }

  Vec operator()(double t) const {
    const double th = (t - t0) / h;
    const double th1 = 1.0 - th;
    Vec y;
    for (std::size_t i = 0; i < N; ++i)
      y[i] = coeff[0][i] +
             th * (coeff[1][i] + th1 * (coeff[2][i] + th * (coeff[3][i] + th1 * coeff[4][i])));
    return y;
  }
};

template <std::size_t N>
class DormandPrince {
 public:
  using Vec = std::array<double, N>;
  using Rhs = std::function<Vec(double, const Vec&)>;

  DormandPrince(Rhs rhs, OdeTolerances tol) : rhs_(std::move(rhs)), tol_(tol) {}

  void reset(double t, const Vec& y) {
    t_ = t;
    y_ = y;
    k1_ = rhs_(t_, y_);
    if (h_ <= 0.0) h_ = initial_step();
  }

  double time() const { return t_; }
  const Vec& state() const { return y_; }

  /// Takes one accepted step no longer than `t_limit - time()` and returns its
  /// dense output. Throws IntegrationFailure when the step size underflows or
  /// the state becomes non-finite.
  DenseStep<N> step(double t_limit) {
    for (;;) {
      double h = std::min({h_, tol_.max_step, t_limit - t_});
      if (h < tol_.min_step)
        throw Error(ErrorCode::IntegrationFailure, "step size underflow at t = " + std::to_string(t_));
      Vec k2, k3, k4, k5, k6, k7, y1, ytmp;
      for (std::size_t i = 0; i < N; ++i) ytmp[i] = y_[i] + h * a21 * k1_[i];
      k2 = rhs_(t_ + c2 * h, ytmp);
      for (std::size_t i = 0; i < N; ++i) ytmp[i] = y_[i] + h * (a31 * k1_[i] + a32 * k2[i]);
      k3 = rhs_(t_ + c3 * h, ytmp);
      for (std::size_t i = 0; i < N; ++i)
        ytmp[i] = y_[i] + h * (a41 * k1_[i] + a42 * k2[i] + a43 * k3[i]);
      k4 = rhs_(t_ + c4 * h, ytmp);
      for (std::size_t i = 0; i < N; ++i)
        ytmp[i] = y_[i] + h * (a51 * k1_[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      k5 = rhs_(t_ + c5 * h, ytmp);
      for (std::size_t i = 0; i < N; ++i)
        ytmp[i] =
            y_[i] + h * (a61 * k1_[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
      k6 = rhs_(t_ + h, ytmp);
      for (std::size_t i = 0; i < N; ++i)
        y1[i] =
            y_[i] + h * (a71 * k1_[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
      k7 = rhs_(t_ + h, y1);

      double err = 0.0;
      bool finite = true;
      for (std::size_t i = 0; i < N; ++i) {
        const double e = h * (e1 * k1_[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                              e7 * k7[i]);
        const double sc = tol_.abs_tol + tol_.rel_tol * std::max(std::abs(y_[i]), std::abs(y1[i]));
        err += (e / sc) * (e / sc);
        finite = finite && std::isfinite(y1[i]);
      }
      err = std::sqrt(err / static_cast<double>(N));
      if (!finite || !std::isfinite(err)) {
        h_ = 0.25 * h;
        continue;
      }
      const double fac = std::clamp(0.9 * std::pow(std::max(err, 1e-12), -0.2), 0.2, 5.0);
      if (err > 1.0) {
        h_ = h * std::max(fac, 0.2);
        continue;
      }

      DenseStep<N> dense;
      dense.t0 = t_;
      dense.h = h;
      for (std::size_t i = 0; i < N; ++i) {
        const double ydiff = y1[i] - y_[i];
        const double bspl = h * k1_[i] - ydiff;
        dense.coeff[0][i] = y_[i];
        dense.coeff[1][i] = ydiff;
        dense.coeff[2][i] = bspl;
        dense.coeff[3][i] = ydiff - h * k7[i] - bspl;
        dense.coeff[4][i] =
            h * (d1 * k1_[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
      }
      t_ = (t_limit - (t_ + h) <= 0.0) ? t_limit : t_ + h;
      y_ = y1;
      k1_ = k7;
      h_ = h * fac;
      return dense;
    }
  }

 private:
  double initial_step() const {
    double n = 0.0;
    for (double v : k1_) n = std::max(n, std::abs(v));
    return std::clamp(n > 0.0 ? 1e-3 / n : 1e-3, tol_.min_step * 10.0, tol_.max_step);
  }

  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                          a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

  Rhs rhs_;
  OdeTolerances tol_;
  double t_ = 0.0;
  double h_ = 0.0;
  Vec y_{};
  Vec k1_{};
};

/// Root of `guard` on [t0, t1] by bisection, given a sign change across the
/// interval. Returns the time where |guard| <= tolerance (or the bracket
/// collapses to machine resolution). Throws NoEvent without a sign change.
template <class Guard>
double locate_event(double t0, double t1, Guard&& guard, double tolerance) {
  double lo = t0, hi = t1;
  double glo = guard(lo), ghi = guard(hi);
  if (std::abs(ghi) <= tolerance && std::abs(glo) > tolerance) return hi;
  if (glo == 0.0) return lo;
  if (!((glo > 0.0 && ghi <= 0.0) || (glo < 0.0 && ghi >= 0.0)))
    throw Error(ErrorCode::NoEvent, "guard does not change sign on the interval");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double gm = guard(mid);
    if (std::abs(gm) <= tolerance) return mid;
    if ((gm > 0.0) == (glo > 0.0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return hi;
}

/// Event location on a dense-output arc; returns (t*, state at t*).
template <std::size_t N, class Guard>
std::pair<double, std::array<double, N>> locate_event(const DenseStep<N>& arc, Guard&& guard,
                                                      double tolerance) {
  auto g = [&](double t) { return guard(t, arc(t)); };
  const double t = locate_event(arc.t0, arc.t1(), g, tolerance);
  return {t, arc(t)};
}

}  // namespace aslip
