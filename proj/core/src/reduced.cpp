#include "qml/reduced.hpp"

namespace qml {

double solve_a(const SymbolFn& p, std::span<const double> x, std::span<const double> xibar, double tau_seed) {
  const int n = p.dimension();
  if (static_cast<int>(x.size()) != n || static_cast<int>(xibar.size()) != n - 1)
    throw DimensionError("solve_a: argument lengths do not match the symbol");
  using detail::D1;
  std::vector<D1> z(static_cast<std::size_t>(2 * n));
  for (int i = 0; i < n; ++i) z[i] = D1(x[i], 0.0);
  for (int j = 0; j < n - 1; ++j) z[n + 1 + j] = D1(xibar[j], 0.0);
  double tau = tau_seed;
  for (int it = 0; it < 50; ++it) {
    z[n] = D1(tau, 1.0);
    const D1 r = p.eval(std::span<const D1>(z));
    if (!std::isfinite(r.v)) throw DomainError("solve_a: symbol is not finite at tau = " + std::to_string(tau));
    if (std::abs(r.d) < 1e-8) throw DomainError("solve_a: d_tau p vanishes at tau = " + std::to_string(tau));
    if (std::abs(r.v) < 1e-13) return tau;
    const double step = r.v / r.d;
    tau -= step;
    if (std::abs(step) <= 1e-15 * (1.0 + std::abs(tau))) {
      z[n] = D1(tau, 1.0);
      if (std::abs(p.eval(std::span<const D1>(z)).v) < 1e-12) return tau;
    }
  }
  throw ConvergenceError("solve_a: Newton did not converge in 50 iterations");
}

ReducedSymbol::ReducedSymbol(SymbolFn p, double tau_seed) : p_(std::move(p)), tau_seed_(tau_seed) {
  if (p_.dimension() < 1) throw DimensionError("reduced symbol needs n >= 1");
}

double ReducedSymbol::value_gradient(std::span<const double> w, Eigen::VectorXd& grad) const {
  const int n = p_.dimension();
  if (static_cast<int>(w.size()) != 2 * n - 1) throw DimensionError("reduced symbol argument has wrong length");
  const double tau = solve_a(p_, w.subspan(0, static_cast<std::size_t>(n)), w.subspan(static_cast<std::size_t>(n)),
                             tau_seed_);
  std::vector<double> z(static_cast<std::size_t>(2 * n));
  for (int i = 0; i < n; ++i) z[i] = w[i];
  z[n] = tau;
  for (int j = 0; j < n - 1; ++j) z[n + 1 + j] = w[n + j];
  const Jet j = taylor_jet([this](auto v) { return p_.eval(v); }, z, 1);
  const double pt = j.gradient[n];
  grad.resize(2 * n - 1);
  for (int i = 0; i < n; ++i) grad[i] = -j.gradient[i] / pt;
  for (int k = 0; k < n - 1; ++k) grad[n + k] = -j.gradient[n + 1 + k] / pt;
  return tau;
}

}  // namespace qml
