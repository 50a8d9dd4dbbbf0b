#pragma once

#include <cmath>
#include <iosfwd>
#include <utility>
#include <vector>

#include "qml/symbol.hpp"

namespace qml {

struct FlowSample {
  double s = 0.0;
  PhasePoint state;
};

/// Sampled bicharacteristic of x' = d_xi p, xi' = -d_x p.
struct Trajectory {
  std::vector<FlowSample> samples;  // strictly ordered in s
  double tolerance = 0.0;
  double max_drift = 0.0;  // max |p(sample) - p(init)|
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;

  double span_length() const {
    return samples.empty() ? 0.0 : std::abs(samples.back().s - samples.front().s);
  }
};

struct FlowOptions {
  double tol = 1e-10;
  /// Number of equally spaced output samples including both endpoints.
  int samples = 101;
};

/// Integrates the flow of `p` from `init` at s0 to s1 (s1 < s0 runs
/// backwards). Throws ConvergenceError on step-size underflow.
Trajectory integrate_flow(const SymbolFn& p, const PhasePoint& init, std::pair<double, double> span,
                          const FlowOptions& opt = {});

std::vector<std::pair<double, double>> observable_along_flow(const Trajectory& traj, const SymbolFn& g);

struct RDerivatives {
  double rdot = 0.0;   // {p, r}
  double rddot = 0.0;  // {p, {p, r}}
};

RDerivatives r_derivatives(const SymbolFn& p, const SymbolFn& r, const PhasePoint& pt);

/// CSV with columns s, x1..xn, xi1..xin, p_drift.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const SymbolFn& p);

}  // namespace qml
