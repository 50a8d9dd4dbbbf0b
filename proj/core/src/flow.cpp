#include "qml/flow.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "qml/ode.hpp"

namespace qml {

namespace {

// Hamilton's equations with the gradient taken by one dual pass per variable.
struct HamiltonField {
  const SymbolFn& p;
  int n;
  std::vector<detail::D1> w;

  void operator()(double /*s*/, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    const int m = 2 * n;
    for (int l = 0; l < m; ++l) w[static_cast<std::size_t>(l)] = detail::D1(y[l], 0.0);
    for (int l = 0; l < m; ++l) {
      w[static_cast<std::size_t>(l)].d = 1.0;
      const double g = p.eval(std::span<const detail::D1>(w)).d;
      w[static_cast<std::size_t>(l)].d = 0.0;
      // dx_i/ds = d p / d xi_i ; dxi_i/ds = -d p / d x_i
      if (l < n)
        dy[l + n] = -g;
      else
        dy[l - n] = g;
    }
  }
};

Eigen::VectorXd to_state(const PhasePoint& pt) {
  const int n = pt.dimension();
  Eigen::VectorXd y(2 * n);
  y << pt.x, pt.xi;
  return y;
}

PhasePoint from_state(const Eigen::VectorXd& y) {
  const auto n = y.size() / 2;
  return {y.head(n), y.tail(n)};
}

}  // namespace

Trajectory integrate_flow(const SymbolFn& p, const PhasePoint& init, std::pair<double, double> span,
                          const FlowOptions& opt) {
  if (init.dimension() != p.dimension()) throw DimensionError("initial point dimension does not match symbol");
  if (!(opt.tol > 0.0)) throw InvalidArgument("flow tolerance must be positive");
  const auto [s0, s1] = span;

  Trajectory traj;
  traj.tolerance = opt.tol;
  const double p0 = p(init);
  traj.samples.push_back({s0, init});
  if (s0 == s1) return traj;
  if (opt.samples < 2) throw InvalidArgument("a non-trivial span needs at least 2 samples");

  const int n = p.dimension();
  HamiltonField field{p, n, std::vector<detail::D1>(static_cast<std::size_t>(2 * n))};
  ode::Options ode_opt;
  ode_opt.tol = opt.tol;
  ode::Stats stats;
  Eigen::VectorXd y = to_state(init);
  double s = s0;
  double step = 0.0;
  for (int k = 1; k < opt.samples; ++k) {
    const double target = k + 1 == opt.samples ? s1 : s0 + (s1 - s0) * k / (opt.samples - 1);
    ode::advance(field, s, y, target, ode_opt, stats, step);
    PhasePoint state = from_state(y);
    traj.max_drift = std::max(traj.max_drift, std::abs(p(state) - p0));
    traj.samples.push_back({target, std::move(state)});
  }
  traj.accepted_steps = stats.accepted;
  traj.rejected_steps = stats.rejected;
  return traj;
}

std::vector<std::pair<double, double>> observable_along_flow(const Trajectory& traj, const SymbolFn& g) {
  std::vector<std::pair<double, double>> out;
  out.reserve(traj.samples.size());
  for (const auto& sample : traj.samples) {
    if (sample.state.dimension() != g.dimension()) throw DimensionError("observable dimension does not match trajectory");
    out.emplace_back(sample.s, g(sample.state));
  }
  return out;
}

RDerivatives r_derivatives(const SymbolFn& p, const SymbolFn& r, const PhasePoint& pt) {
  const SymbolFn rdot = poisson_bracket(p, r);
  const SymbolFn rddot = poisson_bracket(p, rdot);
  return {rdot(pt), rddot(pt)};
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const SymbolFn& p) {
  if (traj.samples.empty()) return;
  const int n = traj.samples.front().state.dimension();
  out << "s";
  for (int i = 1; i <= n; ++i) out << ",x" << i;
  for (int i = 1; i <= n; ++i) out << ",xi" << i;
  out << ",p_drift\n";
  const double p0 = p(traj.samples.front().state);
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (const auto& sample : traj.samples) {
    put(sample.s);
    for (int i = 0; i < n; ++i) {
      out << ',';
      put(sample.state.x[i]);
    }
    for (int i = 0; i < n; ++i) {
      out << ',';
      put(sample.state.xi[i]);
    }
    out << ',';
    put(p(sample.state) - p0);
    out << '\n';
  }
}

}  // namespace qml
