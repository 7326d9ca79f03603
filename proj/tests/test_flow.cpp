#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <sstream>

#include "climb/flow.hpp"
#include "support.hpp"

using namespace climb;
using Catch::Approx;

TEST_CASE("integrator reproduces the exponential", "[flow]") {
  IntegratorSettings st;
  auto rhs = [](double, const std::array<double, 1>& y) { return y; };
  const auto y = integrate(rhs, std::array<double, 1>{1.0}, 0.0, 1.0, st);
  CHECK(y[0] == Approx(std::exp(1.0)).epsilon(1e-10));
  const auto back = integrate(rhs, y, 1.0, 0.0, st);
  CHECK(back[0] == Approx(1.0).epsilon(1e-10));
  auto zero = [](double, const std::array<double, 2>&) { return std::array<double, 2>{0.0, 0.0}; };
  const auto c = integrate(zero, std::array<double, 2>{3.0, -4.0}, 0.0, 50.0, st);
  CHECK(c[0] == 3.0);
  CHECK(c[1] == -4.0);
}

TEST_CASE("dense output interpolates the solution", "[flow]") {
  IntegratorSettings st;
  st.rel_tol = st.abs_tol = 1e-10;
  Trajectory<2> tr;
  auto rhs = [](double, const std::array<double, 2>& y) { return std::array<double, 2>{y[1], -y[0]}; };
  integrate(rhs, std::array<double, 2>{0.0, 1.0}, 0.0, 6.0, st, &tr);
  for (double t = 0.0; t <= 6.0; t += 0.37) CHECK(tr(t)[0] == Approx(std::sin(t)).margin(1e-7));
}

TEST_CASE("tolerance validation", "[flow]") {
  IntegratorSettings st;
  st.rel_tol = 1e-16;
  CHECK_THROWS_AS(st.validate(), std::invalid_argument);
}

TEST_CASE("state flow with zero duration is the identity", "[flow]") {
  const ModelConstants k;
  for (ArcKind a : {ArcKind::bang_minus, ArcKind::bang_plus}) {
    const State x = expmap_state(k, a, k.x0, 0.0, Bounds{});
    CHECK(x.h == k.x0.h);
    CHECK(x.v == k.x0.v);
    CHECK(x.m == k.x0.m);
  }
}

TEST_CASE("dual duration carries the field as tangent", "[flow]") {
  const ModelConstants k;
  const IntegratorSettings st;
  const Vec3<Dual<double>> x0{Dual<double>{k.x0.h}, Dual<double>{k.x0.v}, Dual<double>{k.x0.m}};
  const Vec3<Dual<double>> x1 =
      flow_state(k, ArcKind::bang_plus, x0, Dual<double>{30.0, 1.0}, Bounds{}, st);
  const State xe = expmap_state(k, ArcKind::bang_plus, k.x0, 30.0, Bounds{});
  const Vec3<double> f = dynamics(k, xe, k.u_max);
  for (int i = 0; i < 3; ++i) {
    CHECK(x1[i].v == Approx(xe.array()[i]).epsilon(1e-12));
    CHECK(x1[i].d == Approx(f[i]).epsilon(1e-8).margin(1e-10));
  }
  const Vec3<Dual<double>> z = flow_state(k, ArcKind::bang_plus, x0, Dual<double>{0.0, 1.0}, Bounds{}, st);
  const Vec3<double> f0_ = dynamics(k, k.x0, k.u_max);
  for (int i = 0; i < 3; ++i) CHECK(z[i].d == Approx(f0_[i]));
}

TEST_CASE("state flows compose and reverse", "[flow][property]") {
  const ModelConstants k;
  const State a = expmap_state(k, ArcKind::bang_minus, k.x0, 40.0, Bounds{});
  const State b = expmap_state(k, ArcKind::bang_minus, a, 35.0, Bounds{});
  const State c = expmap_state(k, ArcKind::bang_minus, k.x0, 75.0, Bounds{});
  CHECK(b.v == Approx(c.v).epsilon(1e-10));
  CHECK(b.m == Approx(c.m).epsilon(1e-12));
  const State back = expmap_state(k, ArcKind::bang_plus, expmap_state(k, ArcKind::bang_plus, k.x0, 15.0, Bounds{}),
                                  -15.0, Bounds{});
  CHECK(back.h == Approx(k.x0.h).epsilon(1e-10));
  CHECK(back.v == Approx(k.x0.v).epsilon(1e-10));
  CHECK(back.m == Approx(k.x0.m).epsilon(1e-12));
}

TEST_CASE("level flight keeps the altitude", "[flow]") {
  const ModelConstants k;
  Trajectory<3> tr;
  const State x = expmap_state(k, ArcKind::bang_minus, k.x0, 70.0, Bounds{}, {}, nullptr, &tr);
  for (const auto& n : tr.nodes()) CHECK(n[0] == k.x0.h);
  CHECK(x.v > k.x0.v);
  CHECK(x.m < k.x0.m);
}

TEST_CASE("mass equals the fuel-flow quadrature", "[flow]") {
  const ModelConstants k;
  IntegratorSettings st;
  Trajectory<3> tr;
  const State x = expmap_state(k, ArcKind::bang_plus, k.x0, 15.0, Bounds{}, st, nullptr, &tr);
  // Composite Simpson on the dense output.
  const int n = 2000;
  const double h = 15.0 / n;
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const auto y = tr(i * h);
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    sum += w * fuel_coeff(k, y[1]) * thrust(k, y[0]);
  }
  CHECK(k.x0.m - x.m == Approx(sum * h / 3.0).epsilon(1e-7));
}

TEST_CASE("arc Hamiltonians are conserved along the unconstrained extremal", "[flow]") {
  const ModelConstants k;
  const ShootingResult& u = test_support::unconstrained();
  for (const auto& a : u.arcs) {
    const double h0 = hamiltonian(k, a.arc, a.traj.nodes().front(), u.structure.bounds);
    for (const auto& z : a.traj.nodes()) {
      CHECK(hamiltonian(k, a.arc, z, u.structure.bounds) == Approx(h0).margin(1e-8));
    }
    CHECK(h0 == Approx(1.0).margin(1e-8));
  }
}

TEST_CASE("singular flow stays on the singular surface", "[flow]") {
  const ModelConstants k;
  const ShootingResult& u = test_support::unconstrained();
  const Extremal z0 = u.arcs[1].traj.nodes().front();
  ExtremalFlowOptions opts;
  opts.check_invariants = true;
  opts.drift_tol = 1e-8;
  Trajectory<6> tr;
  const double dt = u.arcs[1].traj.t_end();
  CHECK_NOTHROW(expmap_extremal(k, ArcKind::singular, z0, dt, u.structure.bounds, {}, &tr, opts));
  for (const auto& z : tr.nodes()) {
    CHECK(std::abs(lift_h1(k, z)) <= 1e-8);
    CHECK(std::abs(lift_h01(k, z)) <= 1e-8);
  }
}

TEST_CASE("boundary flows keep the constraint active", "[flow]") {
  const ModelConstants k;
  const State x{6000.0, 165.0, 68500.0};
  const Bounds b1{cas(k, x), 0.82};
  const Bounds b2{180.0, mach(k, x)};
  Trajectory<3> t1, t2;
  StateFlowReport r1;
  expmap_state(k, ArcKind::boundary_c1, x, 120.0, b1, {}, &r1, &t1);
  expmap_state(k, ArcKind::boundary_c2, x, 120.0, b2, {}, nullptr, &t2);
  for (const auto& n : t1.nodes()) CHECK(std::abs(c1(k, State::from(n), b1.phi_max)) <= 1e-7);
  for (const auto& n : t2.nodes()) CHECK(std::abs(c2(k, State::from(n), b2.psi_max)) <= 1e-9);
  CHECK(r1.u_lo <= r1.u_hi);
  CHECK(r1.admissible);
}

TEST_CASE("invariant drift is reported", "[flow]") {
  const ModelConstants k;
  // Generic costate: H1 != 0, so the singular surface is not satisfied.
  const Extremal z{6000.0, 170.0, 68000.0, 0.05, 1.0, -0.01};
  ExtremalFlowOptions opts;
  opts.check_invariants = true;
  CHECK_THROWS_AS(expmap_extremal(k, ArcKind::singular, z, 10.0, Bounds{}, {}, nullptr, opts),
                  InvariantDrift);
}

TEST_CASE("extremal field is Hamiltonian", "[flow]") {
  const ModelConstants k;
  const Extremal z{6000.0, 170.0, 68000.0, 0.05, 1.0, -0.01};
  const Extremal f = extremal_field(k, ArcKind::bang_plus, z, Bounds{});
  const Vec3<double> xd = dynamics(k, State{z[0], z[1], z[2]}, k.u_max);
  for (int i = 0; i < 3; ++i) CHECK(f[i] == Approx(xd[i]).epsilon(1e-14));
  for (int i = 0; i < 3; ++i) {
    Extremal zp = z, zm = z;
    const double e = 1e-6 * std::max(1.0, std::abs(z[i]));
    zp[i] += e;
    zm[i] -= e;
    const double fd = (hamiltonian(k, ArcKind::bang_plus, zp, {}) - hamiltonian(k, ArcKind::bang_plus, zm, {})) / (2 * e);
    CHECK(f[3 + i] == Approx(-fd).epsilon(1e-6).margin(1e-9));
  }
}

TEST_CASE("switching function derivative", "[flow]") {
  const ModelConstants k;
  const Extremal z0{6000.0, 170.0, 68000.0, 0.05, 1.0, -0.01};
  Trajectory<6> tr;
  expmap_extremal(k, ArcKind::bang_plus, z0, 2.0, {}, {}, &tr);
  const double fd = (lift_h1(k, tr(1e-3)) - lift_h1(k, tr(0.0))) / 1e-3;
  CHECK(switching_values(k, z0).phi_dot == Approx(fd).epsilon(1e-3));
}

TEST_CASE("trajectory CSV layout", "[flow]") {
  const ModelConstants k;
  const ShootingResult& u = test_support::unconstrained();
  std::ostringstream os;
  write_trajectory_csv(os, k, u.arcs, u.structure.bounds, 10);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "t,h,v,m,p_h,p_v,p_m,u,Phi,c1,c2");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 3 * 11);
}

TEST_CASE("arc labels round-trip", "[flow]") {
  for (ArcKind a : {ArcKind::bang_minus, ArcKind::bang_plus, ArcKind::singular, ArcKind::boundary_c1,
                    ArcKind::boundary_c2}) {
    CHECK(arc_kind_from_string(to_string(a)) == a);
  }
  CHECK_THROWS(arc_kind_from_string("x"));
}
