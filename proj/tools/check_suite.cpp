#include "check_suite.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>

#include "climb/homotopy.hpp"
#include "climb/nlp.hpp"

namespace climbopt {

using namespace climb;

namespace {

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

// Central-difference Jacobian-vector product of a double field.
template <typename F>
Vec3<double> fd_jvp(const F& field, const Vec3<double>& x, const Vec3<double>& dir) {
  double scale = 0.0;
  for (int i = 0; i < 3; ++i) scale = std::max(scale, std::abs(dir[i]) / std::max(1.0, std::abs(x[i])));
  const double eps = 1e-6 / std::max(scale, 1e-300);
  Vec3<double> xp = x, xm = x;
  for (int i = 0; i < 3; ++i) {
    xp[i] += eps * dir[i];
    xm[i] -= eps * dir[i];
  }
  const Vec3<double> fp = field(xp), fm = field(xm);
  return {(fp[0] - fm[0]) / (2 * eps), (fp[1] - fm[1]) / (2 * eps), (fp[2] - fm[2]) / (2 * eps)};
}

template <typename A, typename B>
Vec3<double> fd_bracket(const A& a, const B& b, const Vec3<double>& x) {
  return fd_jvp(b, x, a(x)) - fd_jvp(a, x, b(x));
}

double rel_err(const Vec3<double>& a, const Vec3<double>& b) {
  double num = 0.0, den = 0.0;
  for (int i = 0; i < 3; ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return num / std::max(den, 1e-300);
}

CheckOutcome brackets_vs_fd(const ModelConstants& k) {
  const Fields f(k);
  auto d0 = [&](const Vec3<double>& x) { return f.f0(x); };
  auto d1 = [&](const Vec3<double>& x) { return f.f1(x); };
  auto d01 = [&](const Vec3<double>& x) { return f.f01(x); };
  double worst = 0.0;
  for (double h : {3480.0, 6000.0, 9000.0}) {
    for (double v : {130.0, 170.0, 200.0}) {
      const Vec3<double> x{h, v, 68000.0};
      worst = std::max(worst, rel_err(f.f01(x), fd_bracket(d0, d1, x)));
      worst = std::max(worst, rel_err(f.f001(x), fd_bracket(d0, d01, x)));
      worst = std::max(worst, rel_err(f.f101(x), fd_bracket(d1, d01, x)));
    }
  }
  return {"lie_brackets_fd_oracle", worst <= 1e-5, fmt("max relative error %.3g", worst)};
}

CheckOutcome affinity(const ModelConstants& k) {
  const State x{5000.0, 150.0, 68500.0};
  double worst = 0.0;
  const Vec3<double> a = f0(k, x), b = f1(k, x);
  for (double u : {0.0, 0.1, 0.262}) {
    const Vec3<double> d = dynamics(k, x, u);
    for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(d[i] - (a[i] + u * b[i])));
  }
  return {"control_affinity", worst <= 1e-9, fmt("max deviation %.3g", worst)};
}

CheckOutcome determinism(const ModelConstants& k, const ShootingResult& u) {
  const ShootingResult again = solve(k, u.structure, u.y);
  const bool same = again.y == solve(k, u.structure, u.y).y;
  return {"determinism", same, same ? "repeated solves are bitwise identical" : "solves differ"};
}

CheckOutcome endpoint_anchor(const ModelConstants& k) {
  const EndpointSpeeds e = endpoint_speeds(k);
  const bool ok = std::abs(e.phi0 - 107.0) <= 1.0 && std::abs(e.psi0 - 0.63) <= 0.01;
  return {"endpoint_speed_anchor", ok, fmt("phi0 = %.4f, psi0 = %.4f", e.phi0, e.psi0)};
}

CheckOutcome unconstrained_reproduction(const ModelConstants& k, const ShootingResult& u) {
  const double tf = u.final_time(), dm = u.fuel(k);
  const bool ok = std::abs(tf - 658.0) <= 0.005 * 658.0 && std::abs(dm - 882.0) <= 0.005 * 882.0 &&
                  u.validation.passed();
  return {"unconstrained_reproduction", ok, fmt("t_f = %.3f s, dm = %.3f kg", tf, dm)};
}

CheckOutcome singular_invariants(const ModelConstants& k, const ShootingResult& u) {
  double worst = 0.0;
  for (const auto& a : u.arcs) {
    if (a.arc != ArcKind::singular) continue;
    for (const auto& z : a.traj.nodes()) {
      worst = std::max({worst, std::abs(lift_h1(k, z)), std::abs(lift_h01(k, z))});
    }
  }
  return {"singular_arc_invariants", worst <= 1e-8, fmt("max |H1|, |H01| = %.3g", worst)};
}

CheckOutcome boundary_invariants(const ModelConstants& k, const ShootingResult& u) {
  // Start exactly on each boundary at the unconstrained switching points.
  const State x1 = State::from(state_part(u.arcs[0].traj.nodes().back()));
  const State x2 = State::from(state_part(u.arcs[1].traj.nodes().back()));
  double worst = 0.0;
  const Bounds b1{cas(k, x1), k.MMO};
  const Bounds b2{k.VMO, mach(k, x2)};
  Trajectory<3> tr1, tr2;
  expmap_state(k, ArcKind::boundary_c1, x1, 100.0, b1, {}, nullptr, &tr1);
  expmap_state(k, ArcKind::boundary_c2, x2, 100.0, b2, {}, nullptr, &tr2);
  for (const auto& x : tr1.nodes()) worst = std::max(worst, std::abs(c1(k, State::from(x), b1.phi_max)));
  for (const auto& x : tr2.nodes()) worst = std::max(worst, std::abs(c2(k, State::from(x), b2.psi_max)));
  return {"boundary_arc_invariants", worst <= 1e-7, fmt("max |c| = %.3g", worst)};
}

CheckOutcome sign_conditions(const ShootingResult& u) {
  const auto* sign = u.validation.find("bang_switching_sign");
  const auto* lc = u.validation.find("legendre_clebsch");
  const bool ok = sign && sign->passed && lc && lc->passed;
  return {"switching_sign_and_legendre_clebsch", ok,
          fmt("Phi margin %.3g, D0*D101 margin %.3g", sign ? sign->margin : NAN,
              lc ? lc->margin : NAN)};
}

CheckOutcome nlp_cross_validation(const ModelConstants& k, const ShootingResult& u) {
  const NlpSettings st;
  const NlpResult sa = solve_nlp(k, {Procedure::sa, 1.0},
                                 nlp_seed(k, Procedure::sa, {72.0, 645.0, 658.0}, st.flow), st);
  const double gap = std::abs(sa.final_time() - u.final_time());
  return {"sa_nlp_matches_shooting", gap <= 0.5 && sa.kkt < 1e-7,
          fmt("|t_f(SA) - t_f(shooting)| = %.3g s, KKT %.3g", gap, sa.kkt)};
}

}  // namespace

std::vector<CheckOutcome> run_check_suite(const ModelConstants& k) {
  std::vector<CheckOutcome> out;
  auto guarded = [&](const std::string& name, const std::function<CheckOutcome()>& fn) {
    try {
      out.push_back(fn());
    } catch (const std::exception& e) {
      out.push_back({name, false, e.what()});
    }
  };
  guarded("lie_brackets_fd_oracle", [&] { return brackets_vs_fd(k); });
  guarded("control_affinity", [&] { return affinity(k); });
  guarded("endpoint_speed_anchor", [&] { return endpoint_anchor(k); });

  ShootingResult u;
  bool have = false;
  try {
    u = unconstrained_solution(k);
    have = true;
  } catch (const std::exception& e) {
    out.push_back({"unconstrained_reproduction", false, e.what()});
  }
  if (have) {
    guarded("unconstrained_reproduction", [&] { return unconstrained_reproduction(k, u); });
    guarded("singular_arc_invariants", [&] { return singular_invariants(k, u); });
    guarded("boundary_arc_invariants", [&] { return boundary_invariants(k, u); });
    guarded("switching_sign_and_legendre_clebsch", [&] { return sign_conditions(u); });
    guarded("determinism", [&] { return determinism(k, u); });
    guarded("sa_nlp_matches_shooting", [&] { return nlp_cross_validation(k, u); });
  }
  return out;
}

}  // namespace climbopt
