#pragma once

// Taylor jets (value, gradient, Hessian, third derivatives) of any callable
// that can be evaluated on nested duals.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "qml/dual.hpp"
#include "qml/error.hpp"

namespace qml {

struct Jet {
  int order = 0;
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
  std::vector<double> third_;  // m*m*m, present when order == 3

  int size() const { return static_cast<int>(gradient.size()); }
  double third(int i, int j, int k) const {
    const auto m = static_cast<std::size_t>(size());
    return third_[(static_cast<std::size_t>(i) * m + static_cast<std::size_t>(j)) * m +
                  static_cast<std::size_t>(k)];
  }
};

namespace detail {

using D1 = Dual<double>;
using D2 = Dual<D1>;
using D3 = Dual<D2>;

}  // namespace detail

/// Jet of `f` at `z` up to `order` (0..3). `f` is a generic callable taking
/// `std::span<const T>` for T in {double, D1, D2, D3} and returning T.
template <class F>
Jet taylor_jet(F&& f, std::span<const double> z, int order) {
  using namespace detail;
  if (order < 0 || order > 3) throw InvalidArgument("jet order must be in 0..3");
  const int m = static_cast<int>(z.size());
  Jet jet;
  jet.order = order;
  jet.gradient = Eigen::VectorXd::Zero(m);
  jet.hessian = Eigen::MatrixXd::Zero(m, m);

  if (order == 0) {
    jet.value = f(z);
    return jet;
  }
  if (order == 1) {
    std::vector<D1> w(z.size());
    for (int i = 0; i < m; ++i) {
      for (int l = 0; l < m; ++l) w[l] = D1(z[l], l == i ? 1.0 : 0.0);
      D1 r = f(std::span<const D1>(w));
      jet.value = r.v;
      jet.gradient[i] = r.d;
    }
    if (m == 0) jet.value = f(z);
    return jet;
  }
  if (order == 2) {
    std::vector<D2> w(z.size());
    for (int i = 0; i < m; ++i) {
      for (int j = i; j < m; ++j) {
        for (int l = 0; l < m; ++l)
          w[l] = D2(D1(z[l], l == j ? 1.0 : 0.0), D1(l == i ? 1.0 : 0.0, 0.0));
        D2 r = f(std::span<const D2>(w));
        jet.value = r.v.v;
        jet.gradient[j] = r.v.d;
        jet.gradient[i] = r.d.v;
        jet.hessian(i, j) = jet.hessian(j, i) = r.d.d;
      }
    }
    if (m == 0) jet.value = f(z);
    return jet;
  }

  const auto mm = static_cast<std::size_t>(m);
  jet.third_.assign(mm * mm * mm, 0.0);
  auto put3 = [&](int a, int b, int c, double v) {
    const int idx[3] = {a, b, c};
    static constexpr int kPerm[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                        {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (const auto& p : kPerm) {
      jet.third_[(static_cast<std::size_t>(idx[p[0]]) * mm + static_cast<std::size_t>(idx[p[1]])) * mm +
                 static_cast<std::size_t>(idx[p[2]])] = v;
    }
  };
  std::vector<D3> w(z.size());
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      for (int k = j; k < m; ++k) {
        for (int l = 0; l < m; ++l) {
          D2 inner(D1(z[l], l == k ? 1.0 : 0.0), D1(l == j ? 1.0 : 0.0, 0.0));
          w[l] = D3(inner, D2(D1(l == i ? 1.0 : 0.0, 0.0), D1(0.0, 0.0)));
        }
        D3 r = f(std::span<const D3>(w));
        jet.value = r.v.v.v;
        jet.gradient[k] = r.v.v.d;
        jet.gradient[j] = r.v.d.v;
        jet.gradient[i] = r.d.v.v;
        jet.hessian(j, k) = jet.hessian(k, j) = r.v.d.d;
        jet.hessian(i, k) = jet.hessian(k, i) = r.d.v.d;
        jet.hessian(i, j) = jet.hessian(j, i) = r.d.d.v;
        put3(i, j, k, r.d.d.d);
      }
    }
  }
  if (m == 0) jet.value = f(z);
  return jet;
}

}  // namespace qml
