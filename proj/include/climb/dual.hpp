#pragma once

#include <cmath>
#include <type_traits>

namespace climb {

/// Forward-mode dual number carrying one directional derivative.
///
/// Duals nest: Dual<Dual<double>> evaluates second directional derivatives,
/// which is how the Lie brackets and the Hamiltonian gradients of the
/// singular/boundary flows are obtained without finite differences.
template <typename T>
struct Dual {
  T v{};
  T d{};

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value), d(0.0) {}  // NOLINT(google-explicit-constructor)
  constexpr Dual(T value, T tangent) : v(value), d(tangent) {}

  Dual& operator+=(const Dual& o) {
    v += o.v;
    d += o.d;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    d -= o.d;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    d = d * o.v + v * o.d;
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    d = (d * o.v - v * o.d) / (o.v * o.v);
    v /= o.v;
    return *this;
  }
};

template <typename T>
struct is_dual : std::false_type {};
template <typename T>
struct is_dual<Dual<T>> : std::true_type {};

template <typename T>
Dual<T> operator-(const Dual<T>& a) {
  return {-a.v, -a.d};
}
template <typename T>
Dual<T> operator+(Dual<T> a, const Dual<T>& b) {
  return a += b;
}
template <typename T>
Dual<T> operator-(Dual<T> a, const Dual<T>& b) {
  return a -= b;
}
template <typename T>
Dual<T> operator*(Dual<T> a, const Dual<T>& b) {
  return a *= b;
}
template <typename T>
Dual<T> operator/(Dual<T> a, const Dual<T>& b) {
  return a /= b;
}

template <typename T>
Dual<T> operator+(Dual<T> a, double b) {
  a.v += b;
  return a;
}
template <typename T>
Dual<T> operator+(double a, Dual<T> b) {
  b.v += a;
  return b;
}
template <typename T>
Dual<T> operator-(Dual<T> a, double b) {
  a.v -= b;
  return a;
}
template <typename T>
Dual<T> operator-(double a, const Dual<T>& b) {
  return {a - b.v, -b.d};
}
template <typename T>
Dual<T> operator*(Dual<T> a, double b) {
  a.v *= b;
  a.d *= b;
  return a;
}
template <typename T>
Dual<T> operator*(double a, Dual<T> b) {
  b.v *= a;
  b.d *= a;
  return b;
}
template <typename T>
Dual<T> operator/(Dual<T> a, double b) {
  a.v /= b;
  a.d /= b;
  return a;
}
template <typename T>
Dual<T> operator/(double a, const Dual<T>& b) {
  return {a / b.v, -a * b.d / (b.v * b.v)};
}

template <typename T>
bool operator<(const Dual<T>& a, const Dual<T>& b) {
  return a.v < b.v;
}
template <typename T>
bool operator<(const Dual<T>& a, double b) {
  return a.v < b;
}
template <typename T>
bool operator>(const Dual<T>& a, double b) {
  return a.v > b;
}
template <typename T>
bool operator<=(const Dual<T>& a, double b) {
  return a.v <= b;
}

using std::pow;
using std::sqrt;

template <typename T>
Dual<T> sqrt(const Dual<T>& a) {
  const T s = sqrt(a.v);
  return {s, a.d / (2.0 * s)};
}

template <typename T>
Dual<T> pow(const Dual<T>& a, double e) {
  const T p = pow(a.v, e - 1.0);
  return {p * a.v, e * p * a.d};
}

/// Innermost double value of a (possibly nested) dual.
inline double value(double x) { return x; }
template <typename T>
double value(const Dual<T>& x) {
  return value(x.v);
}

}  // namespace climb
