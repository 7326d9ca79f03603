#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "climb/model.hpp"

namespace climb {

/// Extremal point z = (x, p): state followed by costate (p_h, p_v, p_m).
using Extremal = std::array<double, 6>;

template <typename T>
using Vec6 = std::array<T, 6>;

template <typename T>
Vec3<T> state_part(const Vec6<T>& z) {
  return {z[0], z[1], z[2]};
}
template <typename T>
Vec3<T> costate_part(const Vec6<T>& z) {
  return {z[3], z[4], z[5]};
}

template <typename T>
T dot(const Vec3<T>& a, const Vec3<T>& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

template <typename T>
Vec3<T> operator-(const Vec3<T>& a, const Vec3<T>& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

/// det(a, b, c) of three column vectors.
template <typename T>
T det3(const Vec3<T>& a, const Vec3<T>& b, const Vec3<T>& c) {
  return a[0] * (b[1] * c[2] - b[2] * c[1]) - b[0] * (a[1] * c[2] - a[2] * c[1]) +
         c[0] * (a[1] * b[2] - a[2] * b[1]);
}

/// Raised when a feedback expression is evaluated on (or too close to) the
/// surface where its denominator vanishes.
class FeedbackUndefined : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Jacobian-vector product field'(x) * dir through one extra dual level.
template <typename F, typename T>
Vec3<T> jvp(const F& field, const Vec3<T>& x, const Vec3<T>& dir) {
  const Vec3<Dual<T>> xd{Dual<T>{x[0], dir[0]}, Dual<T>{x[1], dir[1]}, Dual<T>{x[2], dir[2]}};
  const Vec3<Dual<T>> out = field(xd);
  return {out[0].d, out[1].d, out[2].d};
}

/// Lie derivative (A . c)(x) = c'(x) A(x) of a scalar function along a field.
template <typename F, typename C, typename T>
T lie_derivative(const F& field, const C& fn, const Vec3<T>& x) {
  const Vec3<T> dir = field(x);
  const Vec3<Dual<T>> xd{Dual<T>{x[0], dir[0]}, Dual<T>{x[1], dir[1]}, Dual<T>{x[2], dir[2]}};
  return fn(xd).d;
}

/// [A, B](x) = B'(x) A(x) - A'(x) B(x).
template <typename A, typename B, typename T>
Vec3<T> lie_bracket(const A& a, const B& b, const Vec3<T>& x) {
  return jvp(b, x, a(x)) - jvp(a, x, b(x));
}

struct DriftField {
  const ModelConstants* k;
  template <typename T>
  Vec3<T> operator()(const Vec3<T>& x) const {
    return drift(*k, x);
  }
};

struct ControlField {
  const ModelConstants* k;
  template <typename T>
  Vec3<T> operator()(const Vec3<T>& x) const {
    return control_field(*k, x);
  }
};

template <typename A, typename B>
struct BracketField {
  A a;
  B b;
  template <typename T>
  Vec3<T> operator()(const Vec3<T>& x) const {
    return lie_bracket(a, b, x);
  }
};

using Field01 = BracketField<DriftField, ControlField>;
using Field001 = BracketField<DriftField, Field01>;
using Field101 = BracketField<ControlField, Field01>;

/// The fields of the reduced system and their brackets up to length three.
struct Fields {
  DriftField f0;
  ControlField f1;
  Field01 f01;
  Field001 f001;
  Field101 f101;

  explicit Fields(const ModelConstants& k)
      : f0{&k}, f1{&k}, f01{f0, f1}, f001{f0, f01}, f101{f1, f01} {}
};

/// Scalar constraint c(x) = speed(x) - bound as a generic callable.
struct ConstraintFn {
  const ModelConstants* k;
  ConstraintId id;
  double bound;
  template <typename T>
  T operator()(const Vec3<T>& x) const {
    return constraint(*k, id, x, bound);
  }
};

// ---------------------------------------------------------------------------
// Double-valued geometry.

Vec3<double> bracket_f01(const ModelConstants& k, const State& x);
Vec3<double> bracket_f001(const ModelConstants& k, const State& x);
Vec3<double> bracket_f101(const ModelConstants& k, const State& x);

enum class BracketTag { f0, f001, f101 };

/// D_xi(x) = det(F1(x), F01(x), F_xi(x)).
double det_d(const ModelConstants& k, BracketTag xi, const State& x);

/// Relative tolerance under which a feedback denominator counts as zero.
inline constexpr double kFeedbackTolerance = 1e-12;

/// Singular control in state feedback form, -D001/D101.
double u_singular(const ModelConstants& k, const State& x);
/// Singular control in costate form, -H001/H101.
double u_singular_z(const ModelConstants& k, const Extremal& z);

/// (F0 . c)(x) and (F1 . c)(x) for the chosen constraint.
double lie_f0_c(const ModelConstants& k, ConstraintId id, const State& x);
double lie_f1_c(const ModelConstants& k, ConstraintId id, const State& x);

/// Boundary control -(F0 . c)/(F1 . c). Throws FeedbackUndefined when the
/// order-one assumption fails at x.
double u_boundary(const ModelConstants& k, ConstraintId id, const State& x);
/// Boundary multiplier H01(z)/(F1 . c)(x).
double eta_boundary(const ModelConstants& k, ConstraintId id, const Extremal& z);

/// Hamiltonian lifts <p, F_xi(x)>.
double lift_h0(const ModelConstants& k, const Extremal& z);
double lift_h1(const ModelConstants& k, const Extremal& z);
double lift_h01(const ModelConstants& k, const Extremal& z);
double lift_h001(const ModelConstants& k, const Extremal& z);
double lift_h101(const ModelConstants& k, const Extremal& z);

enum class JunctionKind { entry, exit };

/// Costate jump at an order-one junction: Phi(tau-)/(F1.c) at an entry,
/// -Phi(tau+)/(F1.c) at an exit. A valid junction has nu <= 0.
double junction_jump(const ModelConstants& k, ConstraintId id, const Extremal& z_minus,
                     const Extremal& z_plus, JunctionKind kind);

enum class FoldKind { hyperbolic, elliptic, parabolic, degenerate };
const char* to_string(FoldKind f);

struct FoldDiagnostics {
  double alpha0{};
  double beta0{};
  FoldKind kind{FoldKind::degenerate};
  double d0{};
  /// Second time derivatives of the switching function along the bang
  /// extremals through z: H001 + u_min H101 and H001 + u_max H101.
  double phi_ddot_minus{};
  double phi_ddot_plus{};
  /// Verdict taken directly from the signs of phi_ddot (hyperbolic when
  /// phi_ddot_plus > 0 > phi_ddot_minus).
  FoldKind kind_from_switching{FoldKind::degenerate};
};

/// Fold classification from the decomposition of F001 + u F101 on the basis
/// (F0, F1, F01).
FoldDiagnostics classify_fold(const ModelConstants& k, const Extremal& z);
FoldKind fold_kind(double alpha0, double beta0);

struct OrderCheckReport {
  ConstraintId id{};
  double min_abs_f1c{};
  double at_h{};
  double at_v{};
  std::size_t points{};
  bool passes{};
};

struct EnvelopeGrid {
  double h_lo = 3400.0;
  double h_hi = 11000.0;
  double v_lo = 140.0;
  double v_hi = 180.0;
  int nh = 39;
  int nv = 41;
  double mass = 69000.0;
};

/// Scans |(F1 . c)| over the (h, v) grid; order one holds when the minimum is
/// bounded away from zero.
OrderCheckReport constraint_order_check(const ModelConstants& k, ConstraintId id,
                                        const EnvelopeGrid& grid, double threshold = 1e-10);

/// Generic variant used by tests with arbitrary scalar functions.
template <typename C>
OrderCheckReport constraint_order_check_fn(const ModelConstants& k, const C& fn,
                                           const EnvelopeGrid& grid, double threshold = 1e-10) {
  OrderCheckReport rep;
  rep.min_abs_f1c = INFINITY;
  const ControlField f1{&k};
  for (int i = 0; i < grid.nh; ++i) {
    const double h = grid.nh == 1 ? grid.h_lo : grid.h_lo + (grid.h_hi - grid.h_lo) * i / (grid.nh - 1);
    for (int j = 0; j < grid.nv; ++j) {
      const double v = grid.nv == 1 ? grid.v_lo : grid.v_lo + (grid.v_hi - grid.v_lo) * j / (grid.nv - 1);
      const double val = std::abs(lie_derivative(f1, fn, Vec3<double>{h, v, grid.mass}));
      ++rep.points;
      if (val < rep.min_abs_f1c) {
        rep.min_abs_f1c = val;
        rep.at_h = h;
        rep.at_v = v;
      }
    }
  }
  rep.passes = rep.min_abs_f1c > threshold;
  return rep;
}

}  // namespace climb
