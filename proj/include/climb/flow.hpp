#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "climb/geometry.hpp"
#include "climb/integrator.hpp"

namespace climb {

enum class ArcKind { bang_minus, bang_plus, singular, boundary_c1, boundary_c2 };

/// Short labels: "-", "+", "s", "c1", "c2".
const char* to_string(ArcKind a);
ArcKind arc_kind_from_string(const std::string& s);

/// Active speed limits (phi_max on CAS, psi_max on Mach).
struct Bounds {
  double phi_max = 180.0;
  double psi_max = 0.82;
};

inline bool is_bang(ArcKind a) { return a == ArcKind::bang_minus || a == ArcKind::bang_plus; }
inline bool is_boundary(ArcKind a) {
  return a == ArcKind::boundary_c1 || a == ArcKind::boundary_c2;
}
inline ConstraintId constraint_of(ArcKind a) {
  return a == ArcKind::boundary_c1 ? ConstraintId::cas : ConstraintId::mach;
}
inline double bound_of(ConstraintId id, const Bounds& b) {
  return id == ConstraintId::cas ? b.phi_max : b.psi_max;
}

template <typename T>
T pdot(const Vec3<double>& p, const Vec3<T>& f) {
  return p[0] * f[0] + p[1] * f[1] + p[2] * f[2];
}

// ---------------------------------------------------------------------------
// State feedback controls and state-only fields.

/// u_s(x) = -D001/D101.
template <typename T>
T singular_feedback(const ModelConstants& k, const Vec3<T>& x) {
  const Fields f(k);
  const Vec3<T> a = f.f1(x);
  const Vec3<T> b = f.f01(x);
  const Vec3<T> n001 = f.f001(x);
  const Vec3<T> n101 = f.f101(x);
  const T d101 = det3(a, b, n101);
  const T d001 = det3(a, b, n001);
  if (!(std::abs(value(d101)) > kFeedbackTolerance * std::abs(value(d001)))) {
    throw FeedbackUndefined("singular feedback undefined: D101 vanishes");
  }
  return -d001 / d101;
}

/// u_c(x) = -(F0 . c)/(F1 . c).
template <typename T>
T boundary_feedback(const ModelConstants& k, ConstraintId id, double bound, const Vec3<T>& x) {
  const Fields f(k);
  const ConstraintFn c{&k, id, bound};
  const T l0 = lie_derivative(f.f0, c, x);
  const T l1 = lie_derivative(f.f1, c, x);
  if (!(std::abs(value(l1)) > kFeedbackTolerance * std::abs(value(l0)))) {
    throw FeedbackUndefined("boundary feedback undefined: F1 . c vanishes");
  }
  return -l0 / l1;
}

template <typename T>
T feedback_control(const ModelConstants& k, ArcKind arc, const Vec3<T>& x, const Bounds& b) {
  switch (arc) {
    case ArcKind::bang_minus:
      return T(k.u_min);
    case ArcKind::bang_plus:
      return T(k.u_max);
    case ArcKind::singular:
      return singular_feedback(k, x);
    case ArcKind::boundary_c1:
    case ArcKind::boundary_c2: {
      const ConstraintId id = constraint_of(arc);
      return boundary_feedback(k, id, bound_of(id, b), x);
    }
  }
  return T(0.0);
}

template <typename T>
Vec3<T> state_field(const ModelConstants& k, ArcKind arc, const Vec3<T>& x, const Bounds& b) {
  return dynamics(k, x, feedback_control(k, arc, x, b));
}

/// Range of the feedback control met at the accepted integration nodes.
struct StateFlowReport {
  double u_lo = INFINITY;
  double u_hi = -INFINITY;
  bool admissible = true;  ///< false when u left [u_min, u_max] (A2 violation)
};

/// e^{dt F}(x0) for the feedback field of `arc`, integrated in normalized time
/// s in [0, 1] so that dt may itself carry a tangent. Zero dt is the identity.
template <typename T>
Vec3<T> flow_state(const ModelConstants& k, ArcKind arc, const Vec3<T>& x0, const T& dt,
                   const Bounds& b, const IntegratorSettings& settings,
                   StateFlowReport* report = nullptr) {
  if (value(dt) == 0.0 && !is_dual<T>::value) return x0;
  auto rhs = [&](double, const Vec3<T>& x) {
    Vec3<T> f = state_field(k, arc, x, b);
    for (auto& fi : f) fi = fi * dt;
    return f;
  };
  auto observe = [&](double, const Vec3<T>& x) {
    if (!report || is_bang(arc)) return;
    const Vec3<double> xv{value(x[0]), value(x[1]), value(x[2])};
    const double u = feedback_control(k, arc, xv, b);
    report->u_lo = std::min(report->u_lo, u);
    report->u_hi = std::max(report->u_hi, u);
    if (u < k.u_min || u > k.u_max) report->admissible = false;
  };
  if (value(dt) == 0.0) {
    // Identity, but keep dt's tangent: d/d(dt) e^{dt F}(x0) = F(x0).
    const Vec3<T> f = state_field(k, arc, x0, b);
    Vec3<T> out = x0;
    for (std::size_t i = 0; i < 3; ++i) out[i] = out[i] + f[i] * dt;
    return out;
  }
  return integrate(rhs, x0, 0.0, 1.0, settings, static_cast<Trajectory<3>*>(nullptr), observe);
}

/// Physical-time state flow with optional dense output.
State expmap_state(const ModelConstants& k, ArcKind arc, const State& x0, double dt,
                   const Bounds& b, const IntegratorSettings& settings = {},
                   StateFlowReport* report = nullptr, Trajectory<3>* traj = nullptr);

// ---------------------------------------------------------------------------
// Extremal flows.

/// Arc Hamiltonian as a function of x for a frozen costate p.
template <typename T>
T hamiltonian_x(const ModelConstants& k, ArcKind arc, const Vec3<T>& x, const Vec3<double>& p,
                const Bounds& b) {
  const Fields f(k);
  const T h0 = pdot(p, f.f0(x));
  const T h1 = pdot(p, f.f1(x));
  switch (arc) {
    case ArcKind::bang_minus:
      return h0 + k.u_min * h1;
    case ArcKind::bang_plus:
      return h0 + k.u_max * h1;
    case ArcKind::singular: {
      const T h001 = pdot(p, f.f001(x));
      const T h101 = pdot(p, f.f101(x));
      return h0 - h001 / h101 * h1;
    }
    case ArcKind::boundary_c1:
    case ArcKind::boundary_c2: {
      const ConstraintId id = constraint_of(arc);
      const ConstraintFn c{&k, id, bound_of(id, b)};
      const T l0 = lie_derivative(f.f0, c, x);
      const T l1 = lie_derivative(f.f1, c, x);
      const T h01 = pdot(p, f.f01(x));
      return h0 - l0 / l1 * h1 + h01 / l1 * c(x);
    }
  }
  return h0;
}

double hamiltonian(const ModelConstants& k, ArcKind arc, const Extremal& z, const Bounds& b);

/// Control realized at z on the given arc: u_s(z) on singular arcs, u_c(x) on
/// boundary arcs.
double arc_control(const ModelConstants& k, ArcKind arc, const Extremal& z, const Bounds& b);

/// (dH/dp, -dH/dx) for the arc Hamiltonian.
Extremal extremal_field(const ModelConstants& k, ArcKind arc, const Extremal& z, const Bounds& b);

class InvariantDrift : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExtremalFlowOptions {
  /// Raise InvariantDrift when the arc's defining surface is left by more
  /// than drift_tol. Off inside shooting, where iterates are off-surface.
  bool check_invariants = false;
  double drift_tol = 1e-6;
};

Extremal expmap_extremal(const ModelConstants& k, ArcKind arc, const Extremal& z0, double dt,
                         const Bounds& b, const IntegratorSettings& settings = {},
                         Trajectory<6>* traj = nullptr, const ExtremalFlowOptions& opts = {});

struct Switching {
  double phi;
  double phi_dot;
};

/// Phi = H1(z), dPhi/dt = H01(z) (along any extremal, since [F1, F1] = 0).
Switching switching_values(const ModelConstants& k, const Extremal& z);

struct ArcTrajectory {
  ArcKind arc;
  double t0;           ///< absolute start time of the arc
  Trajectory<6> traj;  ///< local time, [0, duration]
};

/// CSV with columns t,h,v,m,p_h,p_v,p_m,u,Phi,c1,c2; `samples` points per arc
/// plus the end points.
void write_trajectory_csv(std::ostream& os, const ModelConstants& k,
                          const std::vector<ArcTrajectory>& arcs, const Bounds& b,
                          int samples = 100);

}  // namespace climb
