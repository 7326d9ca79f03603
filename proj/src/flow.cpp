#include "climb/flow.hpp"

#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace climb {

const char* to_string(ArcKind a) {
  switch (a) {
    case ArcKind::bang_minus:
      return "-";
    case ArcKind::bang_plus:
      return "+";
    case ArcKind::singular:
      return "s";
    case ArcKind::boundary_c1:
      return "c1";
    case ArcKind::boundary_c2:
      return "c2";
  }
  return "?";
}

ArcKind arc_kind_from_string(const std::string& s) {
  if (s == "-") return ArcKind::bang_minus;
  if (s == "+") return ArcKind::bang_plus;
  if (s == "s") return ArcKind::singular;
  if (s == "c1") return ArcKind::boundary_c1;
  if (s == "c2") return ArcKind::boundary_c2;
  throw std::invalid_argument("unknown arc kind '" + s + "'");
}

State expmap_state(const ModelConstants& k, ArcKind arc, const State& x0, double dt,
                   const Bounds& b, const IntegratorSettings& settings, StateFlowReport* report,
                   Trajectory<3>* traj) {
  settings.validate();
  auto rhs = [&](double, const Vec3<double>& x) { return state_field(k, arc, x, b); };
  auto observe = [&](double, const Vec3<double>& x) {
    if (!report || is_bang(arc)) return;
    const double u = feedback_control(k, arc, x, b);
    report->u_lo = std::min(report->u_lo, u);
    report->u_hi = std::max(report->u_hi, u);
    if (u < k.u_min || u > k.u_max) report->admissible = false;
  };
  return State::from(integrate(rhs, x0.array(), 0.0, dt, settings, traj, observe));
}

double hamiltonian(const ModelConstants& k, ArcKind arc, const Extremal& z, const Bounds& b) {
  return hamiltonian_x(k, arc, state_part(z), costate_part(z), b);
}

double arc_control(const ModelConstants& k, ArcKind arc, const Extremal& z, const Bounds& b) {
  switch (arc) {
    case ArcKind::singular:
      return u_singular_z(k, z);
    case ArcKind::boundary_c1:
    case ArcKind::boundary_c2: {
      const ConstraintId id = constraint_of(arc);
      return boundary_feedback(k, id, bound_of(id, b), state_part(z));
    }
    default:
      return feedback_control(k, arc, state_part(z), b);
  }
}

Extremal extremal_field(const ModelConstants& k, ArcKind arc, const Extremal& z, const Bounds& b) {
  const Fields f(k);
  const Vec3<double> x = state_part(z);
  const Vec3<double> p = costate_part(z);
  const Vec3<double> F0 = f.f0(x);
  const Vec3<double> F1 = f.f1(x);

  // dH/dp: every arc Hamiltonian is rational in p, so this part is closed form.
  Vec3<double> gp;
  switch (arc) {
    case ArcKind::bang_minus:
    case ArcKind::bang_plus: {
      const double u = arc == ArcKind::bang_minus ? k.u_min : k.u_max;
      for (int i = 0; i < 3; ++i) gp[i] = F0[i] + u * F1[i];
      break;
    }
    case ArcKind::singular: {
      const Vec3<double> F001 = f.f001(x);
      const Vec3<double> F101 = f.f101(x);
      const double h1 = dot(p, F1);
      const double h001 = dot(p, F001);
      const double h101 = dot(p, F101);
      if (!(std::abs(h101) > kFeedbackTolerance * std::abs(h001))) {
        throw FeedbackUndefined("singular control undefined: H101 vanishes");
      }
      const double u = -h001 / h101;
      for (int i = 0; i < 3; ++i) {
        const double du = -(F001[i] * h101 - h001 * F101[i]) / (h101 * h101);
        gp[i] = F0[i] + u * F1[i] + h1 * du;
      }
      break;
    }
    case ArcKind::boundary_c1:
    case ArcKind::boundary_c2: {
      const ConstraintId id = constraint_of(arc);
      const ConstraintFn c{&k, id, bound_of(id, b)};
      const double l0 = lie_derivative(f.f0, c, x);
      const double l1 = lie_derivative(f.f1, c, x);
      if (!(std::abs(l1) > kFeedbackTolerance * std::abs(l0))) {
        throw FeedbackUndefined("boundary control undefined: F1 . c vanishes");
      }
      const Vec3<double> F01 = f.f01(x);
      const double cx = c(x);
      for (int i = 0; i < 3; ++i) gp[i] = F0[i] - l0 / l1 * F1[i] + cx / l1 * F01[i];
      break;
    }
  }

  // dH/dx: one forward pass per state direction.
  Vec3<double> gx;
  for (int i = 0; i < 3; ++i) {
    Vec3<Dual<double>> xd{Dual<double>{x[0], 0.0}, Dual<double>{x[1], 0.0},
                          Dual<double>{x[2], 0.0}};
    xd[i].d = 1.0;
    gx[i] = hamiltonian_x(k, arc, xd, p, b).d;
  }
  return {gp[0], gp[1], gp[2], -gx[0], -gx[1], -gx[2]};
}

namespace {

double invariant_drift(const ModelConstants& k, ArcKind arc, const Extremal& z, const Bounds& b) {
  if (arc == ArcKind::singular) {
    return std::max(std::abs(lift_h1(k, z)), std::abs(lift_h01(k, z)));
  }
  if (is_boundary(arc)) {
    const ConstraintId id = constraint_of(arc);
    return std::abs(constraint(k, id, state_part(z), bound_of(id, b)));
  }
  return 0.0;
}

}  // namespace

Extremal expmap_extremal(const ModelConstants& k, ArcKind arc, const Extremal& z0, double dt,
                         const Bounds& b, const IntegratorSettings& settings, Trajectory<6>* traj,
                         const ExtremalFlowOptions& opts) {
  settings.validate();
  auto rhs = [&](double, const Extremal& z) { return extremal_field(k, arc, z, b); };
  auto observe = [&](double t, const Extremal& z) {
    if (!opts.check_invariants) return;
    const double d = invariant_drift(k, arc, z, b);
    if (d > opts.drift_tol) {
      throw InvariantDrift(std::string("invariant drift ") + std::to_string(d) + " on arc " +
                           to_string(arc) + " at t = " + std::to_string(t));
    }
  };
  return integrate(rhs, z0, 0.0, dt, settings, traj, observe);
}

Switching switching_values(const ModelConstants& k, const Extremal& z) {
  return {lift_h1(k, z), lift_h01(k, z)};
}

void write_trajectory_csv(std::ostream& os, const ModelConstants& k,
                          const std::vector<ArcTrajectory>& arcs, const Bounds& b, int samples) {
  os << "t,h,v,m,p_h,p_v,p_m,u,Phi,c1,c2\n";
  char buf[512];
  for (const auto& a : arcs) {
    if (a.traj.empty()) continue;
    const double t0 = a.traj.t_begin();
    const double t1 = a.traj.t_end();
    for (int i = 0; i <= samples; ++i) {
      const double t = t0 + (t1 - t0) * i / samples;
      const Extremal z = a.traj(t);
      const State x = State::from(state_part(z));
      double u;
      try {
        u = arc_control(k, a.arc, z, b);
      } catch (const FeedbackUndefined&) {
        u = NAN;
      }
      std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n", a.t0 + t,
                    z[0], z[1], z[2], z[3], z[4], z[5], u, lift_h1(k, z), c1(k, x, b.phi_max),
                    c2(k, x, b.psi_max));
      os << buf;
    }
  }
}

}  // namespace climb
