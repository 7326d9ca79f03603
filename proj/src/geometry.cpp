#include "climb/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace climb {

namespace {

double norm(const Vec3<double>& a) { return std::sqrt(dot(a, a)); }

}  // namespace

Vec3<double> bracket_f01(const ModelConstants& k, const State& x) {
  return Fields(k).f01(x.array());
}
Vec3<double> bracket_f001(const ModelConstants& k, const State& x) {
  return Fields(k).f001(x.array());
}
Vec3<double> bracket_f101(const ModelConstants& k, const State& x) {
  return Fields(k).f101(x.array());
}

double det_d(const ModelConstants& k, BracketTag xi, const State& x) {
  const Fields f(k);
  const auto xa = x.array();
  Vec3<double> col;
  switch (xi) {
    case BracketTag::f0:
      col = f.f0(xa);
      break;
    case BracketTag::f001:
      col = f.f001(xa);
      break;
    case BracketTag::f101:
      col = f.f101(xa);
      break;
  }
  return det3(f.f1(xa), f.f01(xa), col);
}

double u_singular(const ModelConstants& k, const State& x) {
  const Fields f(k);
  const auto xa = x.array();
  const auto a = f.f1(xa);
  const auto b = f.f01(xa);
  const auto n001 = f.f001(xa);
  const auto n101 = f.f101(xa);
  const double d101 = det3(a, b, n101);
  const double scale = norm(a) * norm(b) * std::max(norm(n101), norm(n001));
  if (!(std::abs(d101) > kFeedbackTolerance * scale)) {
    throw FeedbackUndefined("singular feedback undefined: D101 vanishes");
  }
  return -det3(a, b, n001) / d101;
}

double lift_h0(const ModelConstants& k, const Extremal& z) {
  return dot(costate_part(z), drift(k, state_part(z)));
}
double lift_h1(const ModelConstants& k, const Extremal& z) {
  return dot(costate_part(z), control_field(k, state_part(z)));
}
double lift_h01(const ModelConstants& k, const Extremal& z) {
  return dot(costate_part(z), Fields(k).f01(state_part(z)));
}
double lift_h001(const ModelConstants& k, const Extremal& z) {
  return dot(costate_part(z), Fields(k).f001(state_part(z)));
}
double lift_h101(const ModelConstants& k, const Extremal& z) {
  return dot(costate_part(z), Fields(k).f101(state_part(z)));
}

double u_singular_z(const ModelConstants& k, const Extremal& z) {
  const Fields f(k);
  const auto x = state_part(z);
  const auto p = costate_part(z);
  const auto n101 = f.f101(x);
  const double h101 = dot(p, n101);
  if (!(std::abs(h101) > kFeedbackTolerance * norm(p) * norm(n101))) {
    throw FeedbackUndefined("singular feedback undefined: H101 vanishes");
  }
  return -dot(p, f.f001(x)) / h101;
}

double lie_f0_c(const ModelConstants& k, ConstraintId id, const State& x) {
  return lie_derivative(DriftField{&k}, ConstraintFn{&k, id, 0.0}, x.array());
}

double lie_f1_c(const ModelConstants& k, ConstraintId id, const State& x) {
  return lie_derivative(ControlField{&k}, ConstraintFn{&k, id, 0.0}, x.array());
}

namespace {

double checked_f1c(const ModelConstants& k, ConstraintId id, const State& x) {
  const double f1c = lie_f1_c(k, id, x);
  // Scale: |grad c| |F1| with grad c recovered from unit directions.
  const ConstraintFn c{&k, id, 0.0};
  const auto xa = x.array();
  Vec3<double> grad{};
  for (int i = 0; i < 3; ++i) {
    Vec3<Dual<double>> xd{Dual<double>{xa[0], 0.0}, Dual<double>{xa[1], 0.0},
                          Dual<double>{xa[2], 0.0}};
    xd[i].d = 1.0;
    grad[i] = c(xd).d;
  }
  const double scale = norm(grad) * norm(control_field(k, xa));
  if (!(std::abs(f1c) > kFeedbackTolerance * scale)) {
    throw FeedbackUndefined(std::string("order-one assumption fails for ") + to_string(id) +
                            ": (F1 . c) vanishes");
  }
  return f1c;
}

}  // namespace

double u_boundary(const ModelConstants& k, ConstraintId id, const State& x) {
  const double f1c = checked_f1c(k, id, x);
  return -lie_f0_c(k, id, x) / f1c;
}

double eta_boundary(const ModelConstants& k, ConstraintId id, const Extremal& z) {
  const double f1c = checked_f1c(k, id, State::from(state_part(z)));
  return lift_h01(k, z) / f1c;
}

double junction_jump(const ModelConstants& k, ConstraintId id, const Extremal& z_minus,
                     const Extremal& z_plus, JunctionKind kind) {
  const State x = State::from(state_part(kind == JunctionKind::entry ? z_minus : z_plus));
  const double f1c = checked_f1c(k, id, x);
  if (kind == JunctionKind::entry) {
    return lift_h1(k, z_minus) / f1c;
  }
  return -lift_h1(k, z_plus) / f1c;
}

const char* to_string(FoldKind f) {
  switch (f) {
    case FoldKind::hyperbolic:
      return "hyperbolic";
    case FoldKind::elliptic:
      return "elliptic";
    case FoldKind::parabolic:
      return "parabolic";
    case FoldKind::degenerate:
      return "degenerate";
  }
  return "?";
}

FoldKind fold_kind(double alpha0, double beta0) {
  if (alpha0 < 0.0 && beta0 > 0.0) return FoldKind::hyperbolic;
  if (alpha0 > 0.0 && beta0 < 0.0) return FoldKind::elliptic;
  if (alpha0 * beta0 > 0.0) return FoldKind::parabolic;
  return FoldKind::degenerate;
}

FoldDiagnostics classify_fold(const ModelConstants& k, const Extremal& z) {
  const Fields f(k);
  const auto x = state_part(z);
  const auto p = costate_part(z);
  const auto a = f.f1(x);
  const auto b = f.f01(x);
  const auto n0 = f.f0(x);
  const auto n001 = f.f001(x);
  const auto n101 = f.f101(x);
  FoldDiagnostics out;
  out.d0 = det3(a, b, n0);
  const double h001 = dot(p, n001);
  const double h101 = dot(p, n101);
  out.phi_ddot_minus = h001 + k.u_min * h101;
  out.phi_ddot_plus = h001 + k.u_max * h101;
  // Switching-function verdict mirrors fold_kind with (minus, plus) signs.
  out.kind_from_switching = fold_kind(out.phi_ddot_minus, out.phi_ddot_plus);
  const double scale = norm(a) * norm(b) * norm(n0);
  if (!(std::abs(out.d0) > kFeedbackTolerance * scale)) {
    out.kind = FoldKind::degenerate;
    return out;
  }
  const double d001 = det3(a, b, n001);
  const double d101 = det3(a, b, n101);
  out.alpha0 = (d001 + k.u_min * d101) / out.d0;
  out.beta0 = (d001 + k.u_max * d101) / out.d0;
  out.kind = fold_kind(out.alpha0, out.beta0);
  return out;
}

OrderCheckReport constraint_order_check(const ModelConstants& k, ConstraintId id,
                                        const EnvelopeGrid& grid, double threshold) {
  auto rep = constraint_order_check_fn(k, ConstraintFn{&k, id, 0.0}, grid, threshold);
  rep.id = id;
  return rep;
}

}  // namespace climb
