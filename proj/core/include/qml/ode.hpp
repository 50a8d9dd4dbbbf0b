#pragma once

// Adaptive Dormand-Prince 5(4) stepping, shared by the bicharacteristic flow
// and the characteristic solver of the eikonal equation.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "qml/error.hpp"

namespace qml::ode {

struct Options {
  double tol = 1e-10;
  double initial_step = 0.0;  // 0: pick from the span
  double max_step = 0.0;      // 0: unlimited
  std::size_t max_steps = 1'000'000;
};

struct Stats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

/// Advances `y` from `t` to exactly `t_end` (either direction). `step` carries
/// the step-size suggestion across calls; pass 0 on the first call. `rhs` has
/// signature void(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy).
template <class Rhs>
void advance(Rhs&& rhs, double& t, Eigen::VectorXd& y, double t_end, const Options& opt,
             Stats& stats, double& step) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const double span = t_end - t;
  if (span == 0.0) return;
  const double dir = span > 0 ? 1.0 : -1.0;
  if (step == 0.0 || step * dir <= 0.0) {
    step = opt.initial_step > 0.0 ? opt.initial_step : std::min(std::abs(span), 0.05);
    step *= dir;
  }
  const Eigen::Index m = y.size();
  Eigen::VectorXd k1(m), k2(m), k3(m), k4(m), k5(m), k6(m), k7(m), tmp(m), ynew(m), err(m);
  rhs(t, y, k1);

  std::size_t steps = 0;
  while ((t_end - t) * dir > 0.0) {
    if (++steps > opt.max_steps) throw ConvergenceError("ODE step budget exhausted at t = " + std::to_string(t));
    double h = step;
    if (opt.max_step > 0.0 && std::abs(h) > opt.max_step) h = dir * opt.max_step;
    bool last = false;
    if ((t + h - t_end) * dir >= 0.0) {
      h = t_end - t;
      last = true;
    }
    const double tiny = 1e-14 * std::max(1.0, std::abs(t));
    if (std::abs(h) < tiny && !last) {
      throw ConvergenceError("step size underflow at t = " + std::to_string(t));
    }

    tmp = y + h * (a21 * k1);
    rhs(t + c2 * h, tmp, k2);
    tmp = y + h * (a31 * k1 + a32 * k2);
    rhs(t + c3 * h, tmp, k3);
    tmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(t + c4 * h, tmp, k4);
    tmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(t + c5 * h, tmp, k5);
    tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    rhs(t + h, tmp, k6);
    ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    rhs(t + h, ynew, k7);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double norm = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double sc = opt.tol * (1.0 + std::max(std::abs(y[i]), std::abs(ynew[i])));
      norm = std::max(norm, std::abs(err[i]) / sc);
    }
    if (!std::isfinite(norm)) {
      ++stats.rejected;
      step = 0.25 * h;
      continue;
    }
    const double factor = norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
    if (norm <= 1.0) {
      ++stats.accepted;
      t = last ? t_end : t + h;
      y = ynew;
      k1 = k7;
      // Keep the unclipped suggestion so a short final step does not shrink
      // the next call's first step.
      if (!last || factor < 1.0) step = h * factor;
    } else {
      ++stats.rejected;
      step = h * std::max(factor, 0.1);
    }
  }
}

}  // namespace qml::ode
