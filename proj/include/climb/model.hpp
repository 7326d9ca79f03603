#pragma once

#include <array>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "climb/dual.hpp"

namespace climb {

template <typename T>
using Vec3 = std::array<T, 3>;

/// Raised when a model evaluation leaves the ISA validity domain or hits a
/// singular expression (zero speed, negative CAS radicand, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Aircraft state x = (h, v, m) in SI units.
struct State {
  double h{};  ///< altitude [m]
  double v{};  ///< true air speed [m/s]
  double m{};  ///< mass [kg]

  [[nodiscard]] Vec3<double> array() const { return {h, v, m}; }
  static State from(const Vec3<double>& x) { return {x[0], x[1], x[2]}; }
};

/// Which closed form of the calibrated airspeed is in use.
enum class CasFormula {
  /// Literal arrangement with kappa = gamma/(1 - gamma).
  printed,
  /// Textbook compressible-flow CAS (Saint-Venant, mu = (gamma - 1)/gamma).
  standard,
  /// kappa = gamma/(gamma - 1) with the impact-pressure "-1" inside the
  /// static-pressure product. This is the form that reproduces the CAS
  /// values of the medium-haul scenario (endpoint CAS ~ 107 m/s).
  anchored,
};

const char* to_string(CasFormula f);

/// Physical, aircraft and scenario constants. Defaults are the medium-haul
/// aircraft of the climb scenario.
struct ModelConstants {
  double S = 122.6;           ///< wing area [m^2]
  double g0 = 9.81;           ///< gravity [m/s^2]
  double C_T1 = 141040.0;     ///< [N]
  double C_T2 = 14909.9;      ///< [m]
  double C_T3 = 6.997e-10;    ///< [1/m^2]
  double C_s1 = 1.055e-5;     ///< [kg/s/N]
  double C_s2 = 441.54;       ///< [m/s]
  double C_d1 = 0.0242;
  double C_d2 = 0.0469;
  double R = 287.058;         ///< [J/kg/K]
  double Theta0 = 288.15;     ///< [K]
  double beta = 0.0065;       ///< [K/m]
  double P0 = 101325.0;       ///< [Pa]
  double gamma_air = 1.4;
  double u_min = 0.0;         ///< [rad]
  double u_max = 0.262;       ///< [rad]
  State x0{3480.0, 128.6, 69000.0};
  double h_f = 9144.0;        ///< [m]
  double v_f = 191.0;         ///< [m/s]
  double VMO = 180.0;         ///< [m/s] CAS
  double MMO = 0.82;
  double h_max = 11000.0;     ///< tropopause, upper validity bound [m]
  CasFormula cas_formula = CasFormula::anchored;

  /// gamma/(1 - gamma), the exponent as written next to the CAS formula.
  [[nodiscard]] double kappa() const { return gamma_air / (1.0 - gamma_air); }

  /// Throws std::invalid_argument when a constant is non-positive or the
  /// control bounds are inconsistent.
  void validate() const;
};

/// Reads a flat `key = value` file (one entry per line, `#` comments).
/// Unknown keys are rejected. Keys: S g0 C_T1 C_T2 C_T3 C_s1 C_s2 C_d1 C_d2 R
/// Theta0 beta P0 gamma_air u_min u_max h0 v0 m0 h_f v_f VMO MMO cas_formula.
ModelConstants load_constants(const std::filesystem::path& path);
ModelConstants parse_constants(const std::string& text, ModelConstants base = {});

struct Atmosphere {
  double P;      ///< [Pa]
  double Theta;  ///< [K]
  double rho;    ///< [kg/m^3]
};

/// Hard domain guard: ISA only up to the tropopause, strictly positive speed.
void check_domain(const ModelConstants& k, double h, double v);

// ---------------------------------------------------------------------------
// Generic evaluators. T is double or a (nested) Dual; the domain guard only
// looks at the value part.

template <typename T>
T temperature(const ModelConstants& k, const T& h) {
  return k.Theta0 - k.beta * h;
}

template <typename T>
T pressure(const ModelConstants& k, const T& h) {
  return k.P0 * pow(temperature(k, h) / k.Theta0, k.g0 / (k.beta * k.R));
}

template <typename T>
T density(const ModelConstants& k, const T& h) {
  return pressure(k, h) / (k.R * temperature(k, h));
}

template <typename T>
T thrust(const ModelConstants& k, const T& h) {
  return k.C_T1 * (1.0 - h / k.C_T2 + h * h * k.C_T3);
}

template <typename T>
T fuel_coeff(const ModelConstants& k, const T& v) {
  return k.C_s1 * (1.0 + v / k.C_s2);
}

template <typename T>
T drag_coeff(const ModelConstants& k, const T& lift_coeff) {
  return k.C_d1 + k.C_d2 * lift_coeff * lift_coeff;
}

/// Drift field F0 of the reduced affine climb dynamics.
template <typename T>
Vec3<T> drift(const ModelConstants& k, const Vec3<T>& x) {
  const T& h = x[0];
  const T& v = x[1];
  const T& m = x[2];
  check_domain(k, value(h), value(v));
  const T rho = density(k, h);
  const T T_h = thrust(k, h);
  const T v2 = v * v;
  const T dv = T_h / m - 0.5 * rho * k.S * v2 * k.C_d1 / m -
               2.0 * m * (k.g0 * k.g0) * k.C_d2 / (rho * k.S * v2);
  return {T(0.0), dv, -fuel_coeff(k, v) * T_h};
}

/// Control field F1 (flight path angle enters linearly).
template <typename T>
Vec3<T> control_field(const ModelConstants& k, const Vec3<T>& x) {
  return {x[1], T(-k.g0), T(0.0)};
}

template <typename T>
Vec3<T> dynamics(const ModelConstants& k, const Vec3<T>& x, const T& u) {
  const Vec3<T> f0 = drift(k, x);
  const Vec3<T> f1 = control_field(k, x);
  return {f0[0] + u * f1[0], f0[1] + u * f1[1], f0[2] + u * f1[2]};
}

/// Mach number psi(x).
template <typename T>
T mach(const ModelConstants& k, const Vec3<T>& x) {
  check_domain(k, value(x[0]), value(x[1]));
  return x[1] / sqrt(k.gamma_air * k.R * temperature(k, x[0]));
}

/// Calibrated airspeed phi(x) in the closed form selected by k.cas_formula.
template <typename T>
T cas(const ModelConstants& k, const Vec3<T>& x) {
  check_domain(k, value(x[0]), value(x[1]));
  const T& h = x[0];
  const T& v = x[1];
  const T theta = temperature(k, h);
  const T p_ratio = pressure(k, h) / k.P0;
  T radicand{};
  switch (k.cas_formula) {
    case CasFormula::printed: {
      const double kap = k.kappa();
      const T inner = p_ratio * pow(kap * v * v / (2.0 * k.R * theta) + 1.0, 1.0 / kap) + 1.0;
      radicand = 2.0 * k.R * k.Theta0 / kap * (pow(inner, kap) - 1.0);
      break;
    }
    case CasFormula::standard: {
      const double mu = (k.gamma_air - 1.0) / k.gamma_air;
      const T impact = p_ratio * (pow(1.0 + mu * v * v / (2.0 * k.R * theta), 1.0 / mu) - 1.0);
      radicand = 2.0 * k.R * k.Theta0 / mu * (pow(1.0 + impact, mu) - 1.0);
      break;
    }
    case CasFormula::anchored: {
      const double kap = k.gamma_air / (k.gamma_air - 1.0);
      const T impact = p_ratio * (pow(kap * v * v / (2.0 * k.R * theta) + 1.0, 1.0 / kap) - 1.0);
      radicand = 2.0 * k.R * k.Theta0 / kap * (pow(impact + 1.0, kap) - 1.0);
      break;
    }
  }
  if (!(value(radicand) >= 0.0)) {
    throw DomainError("CAS radicand is negative");
  }
  return sqrt(radicand);
}

/// Identifies one of the two speed constraints.
enum class ConstraintId { cas, mach };

const char* to_string(ConstraintId c);

/// State constraint c(x) = speed(x) - bound; feasible iff <= 0.
template <typename T>
T constraint(const ModelConstants& k, ConstraintId id, const Vec3<T>& x, double bound) {
  return (id == ConstraintId::cas ? cas(k, x) : mach(k, x)) - bound;
}

// Double-valued conveniences.
Atmosphere isa(const ModelConstants& k, double h);
Vec3<double> f0(const ModelConstants& k, const State& x);
Vec3<double> f1(const ModelConstants& k, const State& x);
Vec3<double> dynamics(const ModelConstants& k, const State& x, double u);
double cas(const ModelConstants& k, const State& x);
double mach(const ModelConstants& k, const State& x);
double c1(const ModelConstants& k, const State& x, double phi_max);
double c2(const ModelConstants& k, const State& x, double psi_max);

/// Cost index alpha * t_f + (1 - alpha) * (m0 - m_f).
double cost_index(double t_f, double m_f, double alpha, double m0);

/// CAS/Mach values at the two fixed scenario endpoints; their maxima are the
/// lower corners (phi0, psi0) of the bound plane.
struct EndpointSpeeds {
  double phi0;
  double psi0;
};
EndpointSpeeds endpoint_speeds(const ModelConstants& k);

/// Result of checking a CAS closed form against the endpoint CAS anchor.
struct CasAnchorReport {
  CasFormula formula;
  double phi0;
  bool passes;
};

/// Evaluates the printed, standard and anchored forms against phi0 ~ 107
/// (+/- tolerance) and returns the first passing form in that order
/// (printed first). Throws if none passes.
CasFormula select_cas_formula(const ModelConstants& k, double anchor = 107.0,
                              double tolerance = 1.0,
                              std::array<CasAnchorReport, 3>* reports = nullptr);

}  // namespace climb
