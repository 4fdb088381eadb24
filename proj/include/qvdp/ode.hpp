#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "qvdp/errors.hpp"

namespace qvdp {

struct OdeOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  double initial_step = 0.0;  // 0 selects a step automatically
  double max_step = 0.0;      // 0 means unbounded
  long max_steps = 50'000'000;
};

struct OdeStats {
  long accepted = 0;
  long rejected = 0;
  long rhs_evaluations = 0;
  bool stiffness_detected = false;
  double final_step = 0.0;
};

namespace detail {

// Dormand-Prince 5(4) tableau and Hairer's fourth-order dense output.
struct Dopri5 {
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
};

template <class Vec>
double error_norm(const Vec& err, const Vec& y0, const Vec& y1, const OdeOptions& opt) {
  const auto scale = opt.atol + opt.rtol * y0.array().abs().max(y1.array().abs());
  return std::sqrt((err.array().abs() / scale).square().mean());
}

}  // namespace detail

/// Adaptive Dormand-Prince integration of y' = f(t, y) from (t0, y0).
///
/// `observe(k, y)` receives the solution at output_times[k] (dense output,
/// so outputs do not constrain the step size) and returns false to stop.
/// Output times must be non-decreasing and >= t0.
template <class Vec, class Rhs, class Observer>
OdeStats integrate_dopri5(Rhs&& f, double t0, Vec y, std::span<const double> output_times,
                          Observer&& observe, const OdeOptions& opt = {}) {
  using T = detail::Dopri5;
  OdeStats stats;
  size_t next = 0;
  while (next < output_times.size() && output_times[next] <= t0) {
    if (!observe(next, static_cast<const Vec&>(y))) return stats;
    ++next;
  }
  if (next == output_times.size()) return stats;
  const double t_end = output_times.back();

  double t = t0;
  Vec k1 = f(t, y);
  ++stats.rhs_evaluations;

  double h = opt.initial_step;
  if (h <= 0.0) {
    // Hairer's starting-step heuristic.
    const auto sc = opt.atol + opt.rtol * y.array().abs();
    const double d0 = std::sqrt((y.array().abs() / sc).square().mean());
    const double d1 = std::sqrt((k1.array().abs() / sc).square().mean());
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, t_end - t);
    Vec y1 = y + h0 * k1;
    Vec k2 = f(t + h0, y1);
    ++stats.rhs_evaluations;
    const double d2 = std::sqrt(((k2 - k1).array().abs() / sc).square().mean()) / h0;
    const double dmax = std::max(d1, d2);
    const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
    h = std::min(100.0 * h0, h1);
  }
  if (opt.max_step > 0.0) h = std::min(h, opt.max_step);

  int stiff_hits = 0;
  int non_stiff = 0;
  bool last_rejected = false;
  Vec k2, k3, k4, k5, k6, k7, ystage, ynew, err;

  while (t < t_end) {
    if (stats.accepted + stats.rejected >= opt.max_steps) {
      throw StiffnessError("integrator exceeded maximum step count at t = " + std::to_string(t));
    }
    if (h < 1e-14 * std::max(1.0, std::abs(t))) {
      throw StiffnessError("step size underflow at t = " + std::to_string(t) + " (problem too stiff)");
    }
    const bool reaches_end = h >= t_end - t;
    if (reaches_end) h = t_end - t;

    k2 = f(t + T::c2 * h, Vec(y + h * (T::a21 * k1)));
    k3 = f(t + T::c3 * h, Vec(y + h * (T::a31 * k1 + T::a32 * k2)));
    k4 = f(t + T::c4 * h, Vec(y + h * (T::a41 * k1 + T::a42 * k2 + T::a43 * k3)));
    k5 = f(t + T::c5 * h, Vec(y + h * (T::a51 * k1 + T::a52 * k2 + T::a53 * k3 + T::a54 * k4)));
    ystage = y + h * (T::a61 * k1 + T::a62 * k2 + T::a63 * k3 + T::a64 * k4 + T::a65 * k5);
    k6 = f(t + h, ystage);
    ynew = y + h * (T::a71 * k1 + T::a73 * k3 + T::a74 * k4 + T::a75 * k5 + T::a76 * k6);
    k7 = f(t + h, ynew);
    stats.rhs_evaluations += 6;
    err = h * (T::e1 * k1 + T::e3 * k3 + T::e4 * k4 + T::e5 * k5 + T::e6 * k6 + T::e7 * k7);
    const double en = detail::error_norm(err, y, ynew, opt);

    if (en <= 1.0) {
      ++stats.accepted;
      // Stiffness estimate h * |lambda| from the last two stages.
      const double num = (k7 - k6).norm();
      const double den = (ynew - ystage).norm();
      if (den > 0.0 && h * num / den > 3.25) {
        non_stiff = 0;
        if (++stiff_hits >= 15) stats.stiffness_detected = true;
      } else if (++non_stiff >= 6) {
        stiff_hits = 0;
      }

      const double t_new = reaches_end ? t_end : t + h;
      if (next < output_times.size() && output_times[next] <= t_new) {
        const Vec ydiff = ynew - y;
        const Vec bspl = h * k1 - ydiff;
        const Vec r4 = ydiff - h * k7 - bspl;
        const Vec r5 = h * (T::d1 * k1 + T::d3 * k3 + T::d4 * k4 + T::d5 * k5 + T::d6 * k6 + T::d7 * k7);
        while (next < output_times.size() && output_times[next] <= t_new) {
          const double th = (output_times[next] - t) / h;
          const double th1 = 1.0 - th;
          Vec yout = y + th * (ydiff + th1 * (bspl + th * (r4 + th1 * r5)));
          if (!observe(next, static_cast<const Vec&>(yout))) {
            stats.final_step = h;
            return stats;
          }
          ++next;
        }
      }
      y = ynew;
      k1 = k7;
      t = t_new;
      double fac = en == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(en, -0.2)));
      if (last_rejected) fac = std::min(fac, 1.0);
      h *= fac;
      if (opt.max_step > 0.0) h = std::min(h, opt.max_step);
      last_rejected = false;
    } else {
      ++stats.rejected;
      h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
      last_rejected = true;
    }
  }
  stats.final_step = h;
  return stats;
}

}  // namespace qvdp
