// climbopt: command-line driver for the climb optimal-control toolkit.
//
// Exit codes: 0 success, 1 numerical failure or failed checks, 2 usage,
// configuration or model-domain error.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "check_suite.hpp"
#include "climb/homotopy.hpp"
#include "climb/nlp.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using climb::ModelConstants;
using nlohmann::ordered_json;

namespace {

constexpr int kNumericalFailure = 1;
constexpr int kUsageError = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat key = value run configuration: model constants plus run keys.
struct RunConfig {
  ModelConstants constants;
  double phi_max = NAN;
  double psi_max = NAN;
  double alpha = 1.0;
  double rel_tol = 1e-12;
  double abs_tol = 1e-12;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  const std::map<std::string, double*> run_keys = {{"phi_max", &cfg.phi_max},
                                                   {"psi_max", &cfg.psi_max},
                                                   {"alpha", &cfg.alpha},
                                                   {"rel_tol", &cfg.rel_tol},
                                                   {"abs_tol", &cfg.abs_tol}};
  std::ostringstream model_text;
  std::string line;
  while (std::getline(in, line)) {
    std::string body = line;
    if (const auto hash = body.find('#'); hash != std::string::npos) body.resize(hash);
    const auto eq = body.find('=');
    const auto it = eq == std::string::npos ? run_keys.end() : run_keys.find(trim(body.substr(0, eq)));
    if (it == run_keys.end()) {
      model_text << line << '\n';
      continue;
    }
    model_text << '\n';  // keep line numbers aligned
    const std::string val = trim(body.substr(eq + 1));
    std::size_t used = 0;
    try {
      *it->second = std::stod(val, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != val.size()) throw UsageError("bad value for " + it->first + ": " + val);
  }
  try {
    cfg.constants = climb::parse_constants(model_text.str());
    cfg.constants.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  return cfg;
}

struct Globals {
  std::string config;
  std::string out = "climbopt-out";
  bool json = false;
  int jobs = 0;
};

fs::path out_dir(const Globals& g) {
  fs::path p(g.out);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
}

std::string fmt6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// ---------------------------------------------------------------------------

struct ModelEvalArgs {
  double h = NAN, v = NAN, m = NAN, u = NAN;
};

int cmd_model_eval(const Globals& g, const ModelEvalArgs& a) {
  const RunConfig cfg = load_config(g.config);
  const ModelConstants& k = cfg.constants;
  const double m = std::isnan(a.m) ? k.x0.m : a.m;
  climb::check_domain(k, a.h, a.v);
  const climb::State x{a.h, a.v, m};
  const double phi_max = std::isnan(cfg.phi_max) ? k.VMO : cfg.phi_max;
  const double psi_max = std::isnan(cfg.psi_max) ? k.MMO : cfg.psi_max;
  const climb::Atmosphere atm = climb::isa(k, a.h);
  const auto F0 = climb::f0(k, x);
  const auto F1 = climb::f1(k, x);
  ordered_json j;
  j["state"] = {{"h_m", a.h}, {"v_m_per_s", a.v}, {"m_kg", m}};
  j["isa"] = {{"P_Pa", atm.P}, {"Theta_K", atm.Theta}, {"rho_kg_per_m3", atm.rho}};
  j["thrust_N"] = climb::thrust(k, a.h);
  j["fuel_coeff_kg_per_s_per_N"] = climb::fuel_coeff(k, a.v);
  j["F0"] = {F0[0], F0[1], F0[2]};
  j["F1"] = {F1[0], F1[1], F1[2]};
  j["cas_m_per_s"] = climb::cas(k, x);
  j["mach"] = climb::mach(k, x);
  j["c1_m_per_s"] = climb::c1(k, x, phi_max);
  j["c2"] = climb::c2(k, x, psi_max);
  if (!std::isnan(a.u)) {
    const auto d = climb::dynamics(k, x, a.u);
    j["u_rad"] = a.u;
    j["dynamics"] = {d[0], d[1], d[2]};
  }
  if (g.json) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << "state      h = " << fmt6(a.h) << " m, v = " << fmt6(a.v) << " m/s, m = " << fmt6(m)
              << " kg\n"
              << "ISA        P = " << fmt6(atm.P) << " Pa, Theta = " << fmt6(atm.Theta)
              << " K, rho = " << fmt6(atm.rho) << " kg/m^3\n"
              << "thrust     " << fmt6(j["thrust_N"]) << " N\n"
              << "C_s        " << fmt6(j["fuel_coeff_kg_per_s_per_N"]) << " kg/s/N\n"
              << "F0         (" << fmt6(F0[0]) << ", " << fmt6(F0[1]) << ", " << fmt6(F0[2]) << ")\n"
              << "F1         (" << fmt6(F1[0]) << ", " << fmt6(F1[1]) << ", " << fmt6(F1[2]) << ")\n"
              << "CAS        " << fmt6(j["cas_m_per_s"]) << " m/s\n"
              << "Mach       " << fmt6(j["mach"]) << "\n"
              << "c1         " << fmt6(j["c1_m_per_s"]) << " m/s (phi_max = " << fmt6(phi_max) << ")\n"
              << "c2         " << fmt6(j["c2"]) << " (psi_max = " << fmt6(psi_max) << ")\n";
    if (!std::isnan(a.u)) {
      const auto& d = j["dynamics"];
      std::cout << "dx/dt      (" << fmt6(d[0]) << ", " << fmt6(d[1]) << ", " << fmt6(d[2])
                << ") at u = " << fmt6(a.u) << "\n";
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct ShootArgs {
  std::string preset;
  std::string structure;
  std::string seed;
  double phi_max = NAN;
  double psi_max = NAN;
  double alpha = NAN;
  int samples = 200;
};

// Unconstrained switching times for a cost index, from the SA program.
std::vector<double> unconstrained_times(const ModelConstants& k, double alpha) {
  if (alpha == 1.0) return {72.075, 645.437, 658.376};
  const std::vector<double> t0{47.0, 668.0, 675.0}, t1{72.0, 645.0, 658.0};
  std::vector<double> t(3);
  for (int i = 0; i < 3; ++i) t[i] = (1.0 - alpha) * t0[i] + alpha * t1[i];
  const climb::NlpSettings st;
  const climb::NlpResult sa =
      climb::solve_nlp(k, {climb::Procedure::sa, alpha}, climb::nlp_seed(k, climb::Procedure::sa, t, st.flow), st);
  return sa.times();
}

int cmd_shoot(const Globals& g, const ShootArgs& a) {
  const RunConfig cfg = load_config(g.config);
  const ModelConstants& k = cfg.constants;
  climb::Bounds target{k.VMO, k.MMO};
  double alpha = cfg.alpha;
  std::string expect = a.structure;
  if (a.preset == "paper-4.1") {
    target = {k.VMO, 0.7};
    alpha = 1.0;
    if (expect.empty()) expect = "-sc2+";
  } else if (a.preset == "unconstrained") {
    alpha = 1.0;
    if (expect.empty()) expect = "-s+";
  } else if (!a.preset.empty()) {
    throw UsageError("unknown preset '" + a.preset + "' (paper-4.1, unconstrained)");
  }
  if (!std::isnan(cfg.phi_max)) target.phi_max = cfg.phi_max;
  if (!std::isnan(cfg.psi_max)) target.psi_max = cfg.psi_max;
  if (!std::isnan(a.phi_max)) target.phi_max = a.phi_max;
  if (!std::isnan(a.psi_max)) target.psi_max = a.psi_max;
  if (!std::isnan(a.alpha)) alpha = a.alpha;
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("alpha must lie in [0, 1]");
  if (!expect.empty()) {
    try {
      climb::parse_structure(expect);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  }

  climb::NewtonSettings ns;
  ns.flow.rel_tol = cfg.rel_tol;
  ns.flow.abs_tol = cfg.abs_tol;
  climb::ShootingResult r;
  if (!a.seed.empty()) {
    std::ifstream in(a.seed);
    if (!in) throw UsageError("cannot open seed file " + a.seed);
    ordered_json sj;
    try {
      sj = ordered_json::parse(in);
    } catch (const std::exception& e) {
      throw UsageError(std::string("seed file: ") + e.what());
    }
    climb::ArcStructure s{climb::parse_structure(sj.at("structure").get<std::string>()), target, alpha};
    const auto u = sj.at("unknowns").get<std::vector<double>>();
    if (u.size() != s.dimension()) throw UsageError("seed has the wrong number of unknowns");
    r = climb::solve(k, s, Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size())), ns);
  } else {
    climb::ContinuationSettings cs;
    cs.newton = ns;
    const climb::ShootingResult u0 = climb::unconstrained_solution(k, alpha, unconstrained_times(k, alpha));
    r = climb::solve_by_continuation(k, u0, target, cs);
  }
  if (!expect.empty() && r.structure.label() != expect) {
    std::cerr << "error: converged to structure " << r.structure.label() << ", expected " << expect << '\n';
    return kNumericalFailure;
  }
  const fs::path dir = out_dir(g);
  const std::string js = climb::to_json(k, r);
  write_file(dir / "shoot.json", js + "\n");
  {
    std::ofstream f(dir / "trajectory.csv");
    climb::write_trajectory_csv(f, k, r.arcs, r.structure.bounds, a.samples);
  }
  if (g.json) {
    std::cout << js << '\n';
  } else {
    const auto t = r.times();
    std::cout << "structure  " << climb::pretty_label(r.structure.arcs) << "\n"
              << "times      ";
    for (std::size_t i = 1; i < t.size(); ++i) std::cout << (i > 1 ? ", " : "") << fmt6(t[i]);
    std::cout << " s\n"
              << "p0         (" << fmt6(r.y[0]) << ", " << fmt6(r.y[1]) << ", " << fmt6(r.y[2]) << ")\n"
              << "fuel       " << fmt6(r.fuel(k)) << " kg\n"
              << "residual   " << fmt6(r.residual_norm) << "\n"
              << "validation " << (r.validation.passed() ? "passed" : "FAILED") << "\n"
              << "written    " << (dir / "shoot.json").string() << ", " << (dir / "trajectory.csv").string()
              << "\n";
  }
  return r.validation.passed() ? 0 : kNumericalFailure;
}

// ---------------------------------------------------------------------------

struct CartographyArgs {
  int n_phi = 60;
  int n_psi = 60;
};

int cmd_cartography(const Globals& g, const CartographyArgs& a) {
  const RunConfig cfg = load_config(g.config);
  const ModelConstants& k = cfg.constants;
  if (a.n_phi < 1 || a.n_psi < 1) throw UsageError("grid sizes must be positive");
  climb::GridSpec grid;
  grid.n_phi = a.n_phi;
  grid.n_psi = a.n_psi;
  grid.phi_hi = k.VMO;
  grid.psi_hi = k.MMO;
  const int jobs = g.jobs > 0 ? g.jobs : std::max(1u, std::thread::hardware_concurrency());
  const climb::ShootingResult u = climb::unconstrained_solution(k, cfg.alpha);
  const climb::Cartography c = climb::build_cartography(k, u, grid, {}, jobs);
  const fs::path dir = out_dir(g);
  {
    std::ofstream f(dir / "cartography.csv");
    climb::write_cartography_csv(f, c);
  }
  const std::string lj = climb::landmarks_json(c);
  write_file(dir / "landmarks.json", lj + "\n");
  std::size_t unresolved = 0;
  for (const auto& cell : c.cells) unresolved += cell.resolved ? 0 : 1;
  if (g.json) {
    std::cout << lj << '\n';
  } else {
    const auto& L = c.landmarks;
    std::cout << "grid        " << grid.n_phi << " x " << grid.n_psi << " over [" << fmt6(grid.phi_lo) << ", "
              << fmt6(grid.phi_hi) << "] x [" << fmt6(grid.psi_lo) << ", " << fmt6(grid.psi_hi) << "]\n"
              << "labels      ";
    const auto labels = c.labels();
    for (std::size_t i = 0; i < labels.size(); ++i) std::cout << (i ? ", " : "") << labels[i];
    std::cout << "\nlandmarks   phi_c1 = " << fmt6(L.phi_c1) << ", psi_c2 = " << fmt6(L.psi_c2)
              << ", phi_s = " << fmt6(L.phi_s) << ", psi_s = " << fmt6(L.psi_s) << "\n"
              << "fuel min    " << fmt6(c.fuel_min.fuel) << " kg at (" << fmt6(c.fuel_min.phi) << ", "
              << fmt6(c.fuel_min.psi) << ")\n"
              << "unresolved  " << unresolved << "\n"
              << "written     " << (dir / "cartography.csv").string() << ", " << (dir / "landmarks.json").string()
              << "\n";
  }
  return unresolved == 0 ? 0 : kNumericalFailure;
}

// ---------------------------------------------------------------------------

struct Table2Args {
  std::string preset = "paper";
  std::vector<double> alphas;
};

int cmd_table2(const Globals& g, const Table2Args& a) {
  const RunConfig cfg = load_config(g.config);
  std::vector<double> alphas = a.alphas;
  if (alphas.empty()) {
    if (a.preset != "paper") throw UsageError("unknown preset '" + a.preset + "' (paper)");
    alphas = climb::table2_alphas();
  }
  for (double al : alphas) {
    if (!(al >= 0.0 && al <= 1.0)) throw UsageError("alpha values must lie in [0, 1]");
  }
  const auto rows = climb::sweep_alpha(cfg.constants, alphas);
  const fs::path dir = out_dir(g);
  std::ostringstream csv;
  climb::write_table2_csv(csv, rows);
  write_file(dir / "table2.csv", csv.str());
  const std::string js = climb::table2_json(rows);
  write_file(dir / "table2.json", js + "\n");
  std::cout << (g.json ? js + "\n" : csv.str());
  bool ok = true;
  for (const auto& r : rows) {
    if (!r.cm_ok || !r.sa_ok) {
      ok = false;
      std::cerr << "alpha " << fmt6(r.alpha) << ": " << r.error << '\n';
    }
  }
  return ok ? 0 : kNumericalFailure;
}

// ---------------------------------------------------------------------------

int cmd_check(const Globals& g) {
  const RunConfig cfg = load_config(g.config);
  const auto results = climbopt::run_check_suite(cfg.constants);
  bool ok = true;
  ordered_json j = ordered_json::array();
  for (const auto& r : results) {
    ok = ok && r.passed;
    j.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
  }
  if (g.json) {
    std::cout << j.dump(2) << '\n';
  } else {
    for (const auto& r : results) {
      std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    }
  }
  return ok ? 0 : kNumericalFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal aircraft climb: model, shooting, homotopy, cartography and NLP tools"};
  app.require_subcommand(1);
  Globals g;
  auto add_globals = [&](CLI::App* sub) {
    sub->add_option("--config", g.config, "flat key = value configuration file");
    sub->add_option("--out", g.out, "output directory");
    sub->add_flag("--json", g.json, "machine-readable output on stdout");
    sub->add_option("--jobs", g.jobs, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  };

  ModelEvalArgs me;
  auto* c_eval = app.add_subcommand("model-eval", "evaluate the model at one state");
  add_globals(c_eval);
  c_eval->set_help_flag("--help", "print this help message and exit");  // -h is the altitude
  c_eval->add_option("--h", me.h, "altitude [m]")->required();
  c_eval->add_option("--v", me.v, "true air speed [m/s]")->required();
  c_eval->add_option("--m", me.m, "mass [kg] (default: initial mass)");
  c_eval->add_option("--u", me.u, "flight path angle [rad]");

  ShootArgs sh;
  auto* c_shoot = app.add_subcommand("shoot", "solve a multiple shooting problem");
  add_globals(c_shoot);
  c_shoot->add_option("--preset", sh.preset, "paper-4.1 or unconstrained");
  c_shoot->add_option("--structure", sh.structure, "expected structure label, e.g. -c1sc2+");
  c_shoot->add_option("--phi-max", sh.phi_max, "CAS bound [m/s]");
  c_shoot->add_option("--psi-max", sh.psi_max, "Mach bound");
  c_shoot->add_option("--alpha", sh.alpha, "cost-index weight in [0, 1]");
  c_shoot->add_option("--seed", sh.seed, "JSON file with structure and unknowns (skips continuation)");
  c_shoot->add_option("--samples", sh.samples, "trajectory samples per arc")->check(CLI::PositiveNumber);

  CartographyArgs ca;
  auto* c_cart = app.add_subcommand("cartography", "classify structures over the bound plane");
  add_globals(c_cart);
  c_cart->add_option("--n-phi", ca.n_phi, "grid points in phi_max");
  c_cart->add_option("--n-psi", ca.n_psi, "grid points in psi_max");

  Table2Args t2;
  auto* c_t2 = app.add_subcommand("table2", "CM versus SA over a cost-index grid");
  add_globals(c_t2);
  c_t2->add_option("--preset", t2.preset, "alpha grid preset (paper)");
  c_t2->add_option("--alpha", t2.alphas, "explicit alpha values")->delimiter(',');

  auto* c_check = app.add_subcommand("check", "run the property check suite");
  add_globals(c_check);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (c_eval->parsed()) return cmd_model_eval(g, me);
    if (c_shoot->parsed()) return cmd_shoot(g, sh);
    if (c_cart->parsed()) return cmd_cartography(g, ca);
    if (c_t2->parsed()) return cmd_table2(g, t2);
    if (c_check->parsed()) return cmd_check(g);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const climb::DomainError& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return kUsageError;
  } catch (const climb::StructureError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericalFailure;
  }
  return kUsageError;
}
