#pragma once

// Forward-mode dual numbers. Nesting Dual<Dual<double>> gives exact mixed
// second derivatives, Dual<Dual<Dual<double>>> third derivatives, and so on.

#include <cmath>
#include <type_traits>

#include "qml/error.hpp"

namespace qml {

template <class T>
struct Dual {
  T v{};  ///< primal value
  T d{};  ///< infinitesimal component

  constexpr Dual() = default;
  constexpr Dual(double c) : v(c), d(0.0) {}  // NOLINT: implicit lift of constants
  constexpr Dual(T value, T deriv) : v(value), d(deriv) {}
};

template <class T>
struct nesting : std::integral_constant<int, 0> {};
template <class T>
struct nesting<Dual<T>> : std::integral_constant<int, 1 + nesting<T>::value> {};
template <class T>
inline constexpr int nesting_v = nesting<T>::value;

/// Innermost double of a (possibly nested) dual.
inline double primal(double x) { return x; }
template <class T>
double primal(const Dual<T>& x) {
  return primal(x.v);
}

template <class T>
Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) {
  return {a.v + b.v, a.d + b.d};
}
template <class T>
Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) {
  return {a.v - b.v, a.d - b.d};
}
template <class T>
Dual<T> operator-(const Dual<T>& a) {
  return {-a.v, -a.d};
}
template <class T>
Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) {
  return {a.v * b.v, a.d * b.v + a.v * b.d};
}
template <class T>
Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
  T q = a.v / b.v;
  return {q, (a.d - q * b.d) / b.v};
}
template <class T>
Dual<T> operator*(double c, const Dual<T>& a) {
  return {c * a.v, c * a.d};
}

template <class T>
Dual<T>& operator+=(Dual<T>& a, const Dual<T>& b) {
  a = a + b;
  return a;
}
template <class T>
Dual<T>& operator-=(Dual<T>& a, const Dual<T>& b) {
  a = a - b;
  return a;
}
template <class T>
Dual<T>& operator*=(Dual<T>& a, const Dual<T>& b) {
  a = a * b;
  return a;
}

// Elementary functions. The double overloads carry the domain checks so that
// nested duals inherit them through the primal evaluation.

inline double exp_(double x) { return std::exp(x); }
inline double log_(double x) {
  if (!(x > 0.0)) throw DomainError("log of non-positive value");
  return std::log(x);
}
inline double sqrt_(double x) {
  if (x < 0.0) throw DomainError("sqrt of negative value");
  return std::sqrt(x);
}
inline double sin_(double x) { return std::sin(x); }
inline double cos_(double x) { return std::cos(x); }
inline double recip_(double x) {
  if (x == 0.0) throw DomainError("division by zero");
  return 1.0 / x;
}

template <class T>
Dual<T> exp_(const Dual<T>& a) {
  T e = exp_(a.v);
  return {e, e * a.d};
}
template <class T>
Dual<T> log_(const Dual<T>& a) {
  return {log_(a.v), a.d * recip_(a.v)};
}
template <class T>
Dual<T> sqrt_(const Dual<T>& a) {
  T s = sqrt_(a.v);
  if (primal(s) == 0.0) throw DomainError("sqrt is not differentiable at 0");
  return {s, a.d * recip_(T(2.0) * s)};
}
template <class T>
Dual<T> sin_(const Dual<T>& a) {
  return {sin_(a.v), cos_(a.v) * a.d};
}
template <class T>
Dual<T> cos_(const Dual<T>& a) {
  return {cos_(a.v), -(sin_(a.v) * a.d)};
}
template <class T>
Dual<T> recip_(const Dual<T>& a) {
  T r = recip_(a.v);
  return {r, -(r * r * a.d)};
}

/// Integer power by repeated squaring; exact for negative bases.
template <class T>
T ipow_(const T& base, long k) {
  if (k < 0) return recip_(ipow_(base, -k));
  T result(1.0);
  T b = base;
  while (k > 0) {
    if (k & 1) result = result * b;
    b = b * b;
    k >>= 1;
  }
  return result;
}

/// Seed a constant as a variable in the outermost infinitesimal direction.
template <class T>
Dual<T> seed(const T& value, bool active) {
  return {value, T(active ? 1.0 : 0.0)};
}

}  // namespace qml
