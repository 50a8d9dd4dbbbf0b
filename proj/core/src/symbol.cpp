#include "qml/symbol.hpp"

#include <cmath>

namespace qml {

PhasePoint::PhasePoint(Eigen::VectorXd x_, Eigen::VectorXd xi_) : x(std::move(x_)), xi(std::move(xi_)) {
  if (x.size() != xi.size()) throw DimensionError("phase point: x and xi lengths differ");
  for (int i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(xi[i]))
      throw InvalidArgument("phase point has non-finite entries");
  }
}

std::vector<double> PhasePoint::stacked() const {
  std::vector<double> z(static_cast<std::size_t>(2 * x.size()));
  for (int i = 0; i < x.size(); ++i) {
    z[static_cast<std::size_t>(i)] = x[i];
    z[static_cast<std::size_t>(i + x.size())] = xi[i];
  }
  return z;
}

PhasePoint PhasePoint::from_stacked(std::span<const double> z) {
  const auto n = static_cast<Eigen::Index>(z.size() / 2);
  Eigen::VectorXd x(n), xi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x[i] = z[static_cast<std::size_t>(i)];
    xi[i] = z[static_cast<std::size_t>(i + n)];
  }
  return {std::move(x), std::move(xi)};
}

SymbolFn::SymbolFn(NodePtr root, int n, std::string builtin)
    : root_(std::move(root)), n_(n), builtin_(std::move(builtin)) {
  if (!root_) throw InvalidArgument("symbol without expression");
  if (n_ < 1) throw DimensionError("dimension must be positive");
}

Arity SymbolFn::arity() const {
  const std::uint64_t xi_mask = ((std::uint64_t{1} << n_) - 1) << n_;
  return (root_->deps & xi_mask) ? Arity::PhaseSpace : Arity::BaseSpace;
}

double SymbolFn::operator()(const PhasePoint& pt) const {
  if (pt.dimension() != n_) throw DimensionError("phase point dimension does not match symbol");
  const auto z = pt.stacked();
  return eval<double>(z);
}

SymbolFn parse_symbol(std::string_view text, int n) {
  return SymbolFn(parse_expression(text, n), n);
}

SymbolFn builtin_symbol(std::string_view name, int n) {
  if (n < 2) throw DimensionError("builtin symbols need dimension >= 2");
  std::string text;
  if (name == "model-fold") {
    text = "xi1 - x" + std::to_string(n);
    for (int i = 2; i <= n; ++i) text += " - xi" + std::to_string(i) + "^2";
  } else if (name == "flat-elliptic") {
    for (int i = 1; i <= n; ++i) text += "xi" + std::to_string(i) + "^2 + ";
    text += "(-1)";
  } else {
    throw InvalidArgument("unknown builtin symbol '" + std::string(name) + "'");
  }
  return SymbolFn(parse_expression(text, n), n, std::string(name));
}

SymbolFn symbol_from_text(std::string_view text, int n) {
  if (text == "model-fold" || text == "flat-elliptic") return builtin_symbol(text, n);
  return parse_symbol(text, n);
}

SymbolFn poisson_bracket(const SymbolFn& f, const SymbolFn& g) {
  if (f.dimension() != g.dimension()) throw DimensionError("Poisson bracket of symbols of different dimension");
  return SymbolFn(make_bracket(f.root_ptr(), g.root_ptr(), f.dimension()), f.dimension());
}

Jet eval_jet(const SymbolFn& f, const PhasePoint& pt, int order) {
  if (pt.dimension() != f.dimension()) throw DimensionError("phase point dimension does not match symbol");
  const auto z = pt.stacked();
  return taylor_jet([&f](auto w) { return f.eval(w); }, z, order);
}

}  // namespace qml
