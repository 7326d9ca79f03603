#include "climb/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

namespace climb {

const char* to_string(CasFormula f) {
  switch (f) {
    case CasFormula::printed:
      return "printed";
    case CasFormula::standard:
      return "standard";
    case CasFormula::anchored:
      return "anchored";
  }
  return "?";
}

const char* to_string(ConstraintId c) { return c == ConstraintId::cas ? "c1" : "c2"; }

void ModelConstants::validate() const {
  const std::pair<const char*, double> positive[] = {
      {"S", S},       {"g0", g0},         {"C_T1", C_T1},     {"C_T2", C_T2}, {"C_T3", C_T3},
      {"C_s1", C_s1}, {"C_s2", C_s2},     {"C_d1", C_d1},     {"C_d2", C_d2}, {"R", R},
      {"Theta0", Theta0}, {"beta", beta}, {"P0", P0},         {"gamma_air", gamma_air},
      {"VMO", VMO},   {"MMO", MMO},       {"m0", x0.m},       {"v0", x0.v}};
  for (const auto& [name, val] : positive) {
    if (!(val > 0.0)) {
      throw std::invalid_argument(std::string("constant ") + name + " must be positive");
    }
  }
  if (!(u_min <= u_max)) {
    throw std::invalid_argument("u_min must not exceed u_max");
  }
  if (!(beta * h_max < Theta0)) {
    throw std::invalid_argument("temperature must stay positive below the tropopause");
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || trim(text.substr(used)).size() != 0) {
    throw std::invalid_argument("invalid number for '" + key + "': " + text);
  }
  return out;
}

}  // namespace

ModelConstants parse_constants(const std::string& text, ModelConstants base) {
  ModelConstants k = base;
  const std::map<std::string, double*> fields = {
      {"S", &k.S},          {"g0", &k.g0},         {"C_T1", &k.C_T1},   {"C_T2", &k.C_T2},
      {"C_T3", &k.C_T3},    {"C_s1", &k.C_s1},     {"C_s2", &k.C_s2},   {"C_d1", &k.C_d1},
      {"C_d2", &k.C_d2},    {"R", &k.R},           {"Theta0", &k.Theta0}, {"beta", &k.beta},
      {"P0", &k.P0},        {"gamma_air", &k.gamma_air}, {"u_min", &k.u_min},
      {"u_max", &k.u_max},  {"h0", &k.x0.h},       {"v0", &k.x0.v},     {"m0", &k.x0.m},
      {"h_f", &k.h_f},      {"v_f", &k.v_f},       {"VMO", &k.VMO},     {"MMO", &k.MMO}};
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key == "cas_formula") {
      if (val == "printed") {
        k.cas_formula = CasFormula::printed;
      } else if (val == "standard") {
        k.cas_formula = CasFormula::standard;
      } else if (val == "anchored") {
        k.cas_formula = CasFormula::anchored;
      } else {
        throw std::invalid_argument("unknown cas_formula: " + val);
      }
      continue;
    }
    const auto it = fields.find(key);
    if (it == fields.end()) {
      throw std::invalid_argument("unknown key '" + key + "' on line " + std::to_string(lineno));
    }
    *it->second = parse_number(key, val);
  }
  k.validate();
  return k;
}

ModelConstants load_constants(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open constants file " + path.string());
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_constants(buf.str());
}

void check_domain(const ModelConstants& k, double h, double v) {
  if (!(h >= 0.0 && h <= k.h_max)) {
    throw DomainError("altitude " + std::to_string(h) + " m outside ISA validity [0, " +
                      std::to_string(k.h_max) + "]");
  }
  if (!(v > 1.0)) {
    throw DomainError("true air speed " + std::to_string(v) + " m/s must exceed 1 m/s");
  }
}

Atmosphere isa(const ModelConstants& k, double h) {
  if (!(h >= 0.0 && h <= k.h_max)) {
    throw DomainError("altitude " + std::to_string(h) + " m outside ISA validity");
  }
  return {pressure(k, h), temperature(k, h), density(k, h)};
}

Vec3<double> f0(const ModelConstants& k, const State& x) { return drift(k, x.array()); }
Vec3<double> f1(const ModelConstants& k, const State& x) { return control_field(k, x.array()); }
Vec3<double> dynamics(const ModelConstants& k, const State& x, double u) {
  return dynamics(k, x.array(), u);
}
double cas(const ModelConstants& k, const State& x) { return cas(k, x.array()); }
double mach(const ModelConstants& k, const State& x) { return mach(k, x.array()); }
double c1(const ModelConstants& k, const State& x, double phi_max) { return cas(k, x) - phi_max; }
double c2(const ModelConstants& k, const State& x, double psi_max) { return mach(k, x) - psi_max; }

double cost_index(double t_f, double m_f, double alpha, double m0) {
  return alpha * t_f + (1.0 - alpha) * (m0 - m_f);
}

EndpointSpeeds endpoint_speeds(const ModelConstants& k) {
  const State xf{k.h_f, k.v_f, k.x0.m};
  return {std::max(cas(k, k.x0), cas(k, xf)), std::max(mach(k, k.x0), mach(k, xf))};
}

CasFormula select_cas_formula(const ModelConstants& k, double anchor, double tolerance,
                              std::array<CasAnchorReport, 3>* reports) {
  const CasFormula order[] = {CasFormula::printed, CasFormula::standard, CasFormula::anchored};
  std::array<CasAnchorReport, 3> out{};
  std::optional<CasFormula> chosen;
  for (int i = 0; i < 3; ++i) {
    ModelConstants trial = k;
    trial.cas_formula = order[i];
    double phi0 = std::nan("");
    try {
      phi0 = endpoint_speeds(trial).phi0;
    } catch (const DomainError&) {
    }
    const bool ok = std::abs(phi0 - anchor) <= tolerance;
    out[i] = {order[i], phi0, ok};
    if (ok && !chosen) chosen = order[i];
  }
  if (reports) *reports = out;
  if (!chosen) {
    throw std::runtime_error("no CAS closed form reproduces the endpoint anchor");
  }
  return *chosen;
}

}  // namespace climb
