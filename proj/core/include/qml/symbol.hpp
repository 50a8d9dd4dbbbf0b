#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qml/expr.hpp"
#include "qml/jet.hpp"

namespace qml {

/// A point (x, xi) of T*R^n. Coordinates follow x = (t, y', r) and
/// xi = (tau, eta', nu): x1 is the time-like variable, xn the normal one.
struct PhasePoint {
  Eigen::VectorXd x;
  Eigen::VectorXd xi;

  PhasePoint() = default;
  PhasePoint(Eigen::VectorXd x_, Eigen::VectorXd xi_);

  int dimension() const { return static_cast<int>(x.size()); }
  /// (x, xi) as a single vector of length 2n.
  std::vector<double> stacked() const;
  static PhasePoint from_stacked(std::span<const double> z);
};

enum class Arity { PhaseSpace, BaseSpace };

/// Smooth real function on phase space given by an expression tree.
/// Immutable; copies share the tree.
class SymbolFn {
 public:
  SymbolFn(NodePtr root, int n, std::string builtin = {});

  int dimension() const { return n_; }
  /// BaseSpace when the expression reads no xi variable.
  Arity arity() const;
  const Node& root() const { return *root_; }
  const NodePtr& root_ptr() const { return root_; }
  /// Builtin tag ("model-fold", ...) or empty for parsed expressions.
  const std::string& builtin() const { return builtin_; }
  std::string to_string() const { return print_expression(*root_, n_); }

  template <class T>
  T eval(std::span<const T> z) const {
    return evaluate<T>(*root_, z);
  }
  double operator()(const PhasePoint& pt) const;
  double operator()(std::span<const double> z) const { return eval<double>(z); }

 private:
  NodePtr root_;
  int n_;
  std::string builtin_;
};

SymbolFn parse_symbol(std::string_view text, int n);

/// `model-fold`: xi1 - xn - sum_{i>=2} xi_i^2. `flat-elliptic`: |xi|^2 - 1.
SymbolFn builtin_symbol(std::string_view name, int n);

/// Builtin when `text` names one, otherwise a parsed expression.
SymbolFn symbol_from_text(std::string_view text, int n);

/// {f, g} = d_xi f . d_x g - d_x f . d_xi g, itself a SymbolFn so brackets
/// compose.
SymbolFn poisson_bracket(const SymbolFn& f, const SymbolFn& g);

/// Exact derivatives of `f` at `pt` up to `order` (0..3), with variables
/// ordered as (x1..xn, xi1..xin).
Jet eval_jet(const SymbolFn& f, const PhasePoint& pt, int order);

}  // namespace qml
