#pragma once

// The reduced symbol a(x, xibar) defined implicitly by p(x, a, xibar) = 0,
// i.e. p = e (tau - a) near a characteristic point.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "qml/symbol.hpp"

namespace qml {

/// Solves p(x, tau, xibar) = 0 for tau by Newton from `tau_seed`. Returns a
/// with |p| < 1e-12. Throws ConvergenceError after 50 iterations and
/// DomainError when |d_tau p| drops below 1e-8 at an iterate.
double solve_a(const SymbolFn& p, std::span<const double> x, std::span<const double> xibar, double tau_seed);

/// a(x, xibar) as a differentiable function of w = (x1..xn, xi2..xin), so
/// jets of any order come from taylor_jet. Derivatives are exact: after the
/// double-precision solve, Newton is repeated in the jet arithmetic.
class ReducedSymbol {
 public:
  ReducedSymbol(SymbolFn p, double tau_seed);

  int dimension() const { return p_.dimension(); }
  /// Length of w: 2n - 1.
  int arity() const { return 2 * p_.dimension() - 1; }
  const SymbolFn& symbol() const { return p_; }
  double tau_seed() const { return tau_seed_; }

  double operator()(std::span<const double> w) const { return eval(w); }
  template <class T>
  T eval(std::span<const T> w) const;

  /// Value and gradient in w from one solve: grad a = -d_w p / d_tau p.
  double value_gradient(std::span<const double> w, Eigen::VectorXd& grad) const;

  /// Jet in w up to `order`.
  Jet jet(std::span<const double> w, int order) const {
    return taylor_jet([this](auto v) { return this->eval(v); }, w, order);
  }

 private:
  SymbolFn p_;
  double tau_seed_;
};

namespace detail {

template <class T>
double primal_value(const T& v) {
  if constexpr (std::is_same_v<T, double>)
    return v;
  else
    return primal_value(v.v);
}

}  // namespace detail

template <class T>
T ReducedSymbol::eval(std::span<const T> w) const {
  const int n = p_.dimension();
  if (static_cast<int>(w.size()) != 2 * n - 1) throw DimensionError("reduced symbol argument has wrong length");
  std::vector<double> x0(static_cast<std::size_t>(n)), xb0(static_cast<std::size_t>(n - 1));
  for (int i = 0; i < n; ++i) x0[i] = detail::primal_value(w[i]);
  for (int j = 0; j < n - 1; ++j) xb0[j] = detail::primal_value(w[n + j]);
  const double tau = solve_a(p_, x0, xb0, tau_seed_);
  if constexpr (std::is_same_v<T, double>) {
    return tau;
  } else {
    // Each Newton step in jet arithmetic doubles the number of correct
    // derivative orders; the primal part is already converged.
    using DT = Dual<T>;
    std::vector<DT> z(static_cast<std::size_t>(2 * n));
    for (int i = 0; i < n; ++i) z[i] = DT(w[i], T(0.0));
    for (int j = 0; j < n - 1; ++j) z[n + 1 + j] = DT(w[n + j], T(0.0));
    T a(tau);
    for (int it = 0; it < 3; ++it) {
      z[n] = DT(a, T(1.0));
      const DT r = p_.eval(std::span<const DT>(z));
      a = a - r.v / r.d;
    }
    return a;
  }
}

}  // namespace qml
