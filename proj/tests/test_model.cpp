#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "climb/model.hpp"

using namespace climb;
using Catch::Approx;

TEST_CASE("default constants match the medium-haul scenario", "[model]") {
  const ModelConstants k;
  CHECK(k.x0.h == 3480.0);
  CHECK(k.x0.v == 128.6);
  CHECK(k.x0.m == 69000.0);
  CHECK(k.h_f == 9144.0);
  CHECK(k.v_f == 191.0);
  CHECK(k.u_min == 0.0);
  CHECK(k.u_max == 0.262);
  CHECK(k.kappa() == Approx(-3.5));
  CHECK_NOTHROW(k.validate());
  ModelConstants bad = k;
  bad.S = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("ISA collapses to sea-level constants", "[model]") {
  const ModelConstants k;
  const Atmosphere a = isa(k, 0.0);
  CHECK(a.Theta == Approx(288.15));
  CHECK(a.P == Approx(101325.0));
  CHECK(a.rho == Approx(101325.0 / (287.058 * 288.15)).epsilon(1e-12));
  CHECK(a.rho == Approx(1.2250).margin(5e-5));
}

TEST_CASE("ISA at the initial altitude", "[model]") {
  const ModelConstants k;
  const Atmosphere a = isa(k, 3480.0);
  const double theta = 288.15 - 0.0065 * 3480.0;
  const double p = 101325.0 * std::pow(theta / 288.15, 9.81 / (0.0065 * 287.058));
  CHECK(a.Theta == Approx(265.53).margin(1e-9));
  CHECK(a.P == Approx(p).epsilon(1e-12));
  CHECK(a.P == Approx(6.59e4).epsilon(2e-3));
  CHECK(a.rho == Approx(0.865).epsilon(2e-3));
}

TEST_CASE("ISA is strictly decreasing below the tropopause", "[model][property]") {
  const ModelConstants k;
  Atmosphere prev = isa(k, 0.0);
  for (double h = 100.0; h <= 11000.0; h += 100.0) {
    const Atmosphere a = isa(k, h);
    CHECK(a.P < prev.P);
    CHECK(a.Theta < prev.Theta);
    CHECK(a.rho < prev.rho);
    prev = a;
  }
}

TEST_CASE("thrust, fuel and drag coefficients", "[model]") {
  const ModelConstants k;
  CHECK(thrust(k, 0.0) == 141040.0);
  CHECK(drag_coeff(k, 0.0) == Approx(0.0242));
  CHECK(fuel_coeff(k, 128.6) == Approx(1.055e-5 * (1.0 + 128.6 / 441.54)).epsilon(1e-12));
  CHECK(fuel_coeff(k, 128.6) == Approx(1.3623e-5).epsilon(1e-4));
}

TEST_CASE("drift and control fields at x0", "[model]") {
  const ModelConstants k;
  const Vec3<double> F1 = f1(k, k.x0);
  CHECK(F1[0] == 128.6);
  CHECK(F1[1] == -9.81);
  CHECK(F1[2] == 0.0);
  const Vec3<double> F0 = f0(k, k.x0);
  CHECK(F0[0] == 0.0);
  const double mdot = -fuel_coeff(k, 128.6) * thrust(k, 3480.0);
  CHECK(F0[2] == Approx(mdot).epsilon(1e-14));
  CHECK(F0[2] == Approx(-1.489).epsilon(1e-3));
}

TEST_CASE("dynamics is affine in the control", "[model][property]") {
  const ModelConstants k;
  for (double h : {500.0, 3480.0, 7000.0, 10500.0}) {
    for (double v : {120.0, 160.0, 210.0}) {
      const State x{h, v, 67000.0};
      const Vec3<double> d0 = dynamics(k, x, 0.0), d1 = dynamics(k, x, 1.0);
      const Vec3<double> a = f0(k, x), b = f1(k, x);
      for (int i = 0; i < 3; ++i) {
        CHECK(d0[i] == a[i]);
        CHECK(d1[i] - d0[i] == Approx(b[i]).margin(1e-12));
        CHECK(dynamics(k, x, 0.17)[i] - d0[i] == Approx(0.17 * b[i]).margin(1e-12));
      }
    }
  }
  CHECK(dynamics(k, k.x0, 0.262)[0] == Approx(33.6932).epsilon(1e-6));
}

TEST_CASE("Mach number", "[model]") {
  const ModelConstants k;
  CHECK(mach(k, State{0.0, 340.3, 69000.0}) == Approx(340.3 / std::sqrt(1.4 * 287.058 * 288.15)));
  CHECK(mach(k, State{0.0, 340.3, 69000.0}) == Approx(1.0).margin(1e-3));
  const double a0 = std::sqrt(1.4 * 287.058 * (288.15 - 0.0065 * 3480.0));
  CHECK(mach(k, k.x0) == Approx(128.6 / a0).epsilon(1e-14));
  CHECK(mach(k, k.x0) == Approx(0.394).margin(5e-4));
  CHECK(mach(k, State{5000.0, 2.0, 69000.0}) < mach(k, State{5000.0, 20.0, 69000.0}));
}

TEST_CASE("endpoint speed anchors select the CAS form", "[model]") {
  const ModelConstants k;
  const EndpointSpeeds e = endpoint_speeds(k);
  CHECK(e.phi0 == Approx(107.0).margin(1.0));
  CHECK(e.psi0 == Approx(0.63).margin(0.01));
  std::array<CasAnchorReport, 3> reports{};
  const CasFormula chosen = select_cas_formula(k, 107.0, 1.0, &reports);
  CHECK(chosen == k.cas_formula);
  for (const auto& r : reports) INFO(to_string(r.formula) << " phi0 = " << r.phi0);
  CHECK(c1(k, k.x0, 107.0) <= 0.0);
  CHECK(c1(k, State{k.h_f, k.v_f, k.x0.m}, 107.0) <= 0.0);
}

TEST_CASE("standard CAS equals true airspeed at sea level", "[model]") {
  ModelConstants k;
  k.cas_formula = CasFormula::standard;
  for (double v : {50.0, 120.0, 200.0}) CHECK(cas(k, State{0.0, v, 69000.0}) == Approx(v).epsilon(1e-12));
}

TEST_CASE("speeds increase with airspeed on the envelope", "[model][property]") {
  const ModelConstants k;
  for (double h = 3400.0; h <= 11000.0; h += 400.0) {
    for (double v = 140.0; v <= 200.0; v += 5.0) {
      const double dv = 1e-3;
      CHECK(cas(k, State{h, v + dv, 69000.0}) > cas(k, State{h, v - dv, 69000.0}));
      CHECK(mach(k, State{h, v + dv, 69000.0}) > mach(k, State{h, v - dv, 69000.0}));
    }
  }
}

TEST_CASE("constraints", "[model]") {
  const ModelConstants k;
  const State x{6000.0, 170.0, 68000.0};
  CHECK(c2(k, x, mach(k, x)) == 0.0);
  CHECK(c1(k, x, cas(k, x)) == 0.0);
  CHECK(c2(k, k.x0, 0.7) == Approx(0.3937 - 0.7).margin(1e-3));
}

TEST_CASE("cost index", "[model]") {
  CHECK(cost_index(658.0, 69000.0 - 882.0, 1.0, 69000.0) == 658.0);
  CHECK(cost_index(658.0, 69000.0 - 882.0, 0.0, 69000.0) == Approx(882.0));
  CHECK(cost_index(658.0, 69000.0 - 882.0, 0.5, 69000.0) == Approx(770.0));
}

TEST_CASE("domain guard", "[model]") {
  const ModelConstants k;
  CHECK_THROWS_AS(isa(k, -10.0), DomainError);
  CHECK_THROWS_AS(isa(k, 11500.0), DomainError);
  CHECK_THROWS_AS(check_domain(k, 5000.0, 0.5), DomainError);
  CHECK_THROWS_AS(mach(k, State{-1.0, 100.0, 69000.0}), DomainError);
  CHECK_NOTHROW(check_domain(k, 11000.0, 200.0));
}

TEST_CASE("dual numbers differentiate the model", "[model]") {
  const ModelConstants k;
  const double h = 6000.0, v = 170.0, m = 68000.0;
  const Vec3<Dual<double>> x{Dual<double>{h, 0.0}, Dual<double>{v, 1.0}, Dual<double>{m, 0.0}};
  const double exact = mach(k, x).d;
  const double fd = (mach(k, State{h, v + 1e-3, m}) - mach(k, State{h, v - 1e-3, m})) / 2e-3;
  CHECK(exact == Approx(fd).epsilon(1e-8));
  const double cexact = cas(k, x).d;
  const double cfd = (cas(k, State{h, v + 1e-3, m}) - cas(k, State{h, v - 1e-3, m})) / 2e-3;
  CHECK(cexact == Approx(cfd).epsilon(1e-7));
}

TEST_CASE("flat configuration parsing", "[model]") {
  const ModelConstants k = parse_constants("# comment\nS = 120.0\nh_f=9000 # trailing\n\ncas_formula = standard\n");
  CHECK(k.S == 120.0);
  CHECK(k.h_f == 9000.0);
  CHECK(k.cas_formula == CasFormula::standard);
  CHECK(k.C_T1 == 141040.0);
  CHECK_THROWS_AS(parse_constants("wingspan = 34\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_constants("S 120\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_constants("S = abc\n"), std::invalid_argument);
}
