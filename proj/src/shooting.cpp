#include "climb/shooting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include "json.hpp"

namespace climb {

// ---------------------------------------------------------------------------
// Structures.

std::string structure_label(const std::vector<ArcKind>& arcs) {
  std::string out;
  for (ArcKind a : arcs) out += to_string(a);
  return out;
}

std::vector<ArcKind> parse_structure(const std::string& label) {
  std::vector<ArcKind> out;
  for (std::size_t i = 0; i < label.size();) {
    const char c = label[i];
    if (c == '-' || c == '+' || c == 's') {
      out.push_back(arc_kind_from_string(std::string(1, c)));
      ++i;
    } else if (c == 'c' && i + 1 < label.size()) {
      out.push_back(arc_kind_from_string(label.substr(i, 2)));
      i += 2;
    } else {
      throw StructureError("cannot parse structure label '" + label + "'");
    }
  }
  return out;
}

std::string pretty_label(const std::vector<ArcKind>& arcs) {
  std::string out;
  for (ArcKind a : arcs) {
    switch (a) {
      case ArcKind::bang_minus:
        out += "σ−";
        break;
      case ArcKind::bang_plus:
        out += "σ+";
        break;
      case ArcKind::singular:
        out += "σs";
        break;
      case ArcKind::boundary_c1:
        out += "σc1";
        break;
      case ArcKind::boundary_c2:
        out += "σc2";
        break;
    }
  }
  return out;
}

std::string ArcStructure::label() const { return structure_label(arcs); }

void ArcStructure::validate() const {
  if (arcs.size() < 2) throw StructureError("a structure needs at least two arcs");
  if (arcs.front() != ArcKind::bang_minus || arcs.back() != ArcKind::bang_plus) {
    throw StructureError("structure " + label() + " must start with '-' and end with '+'");
  }
  for (std::size_t i = 1; i < arcs.size(); ++i) {
    if (arcs[i] == arcs[i - 1]) {
      throw StructureError("structure " + label() + " repeats an arc kind");
    }
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw StructureError("alpha must lie in [0, 1]");
}

const std::vector<std::vector<ArcKind>>& structure_catalog() {
  static const std::vector<std::vector<ArcKind>> catalog = {
      parse_structure("-s+"),   parse_structure("-c1s+"),  parse_structure("-sc2+"),
      parse_structure("-c1sc2+"), parse_structure("-c1c2+"), parse_structure("-c1+"),
  };
  return catalog;
}

bool in_catalog(const std::vector<ArcKind>& arcs) {
  const auto& c = structure_catalog();
  return std::find(c.begin(), c.end(), arcs) != c.end();
}

// ---------------------------------------------------------------------------
// Residual.

std::vector<double> junction_times(const ArcStructure& s, const Eigen::VectorXd& y) {
  std::vector<double> t{0.0};
  for (std::size_t j = 1; j <= s.arcs.size(); ++j) t.push_back(y[ShootingLayout::time(j)]);
  return t;
}

Extremal arc_start(const ModelConstants& k, const ArcStructure& s, const Eigen::VectorXd& y,
                   std::size_t arc) {
  if (arc == 0) return {k.x0.h, k.x0.v, k.x0.m, y[0], y[1], y[2]};
  const std::size_t o = ShootingLayout(s).node(arc);
  return {y[o], y[o + 1], y[o + 2], y[o + 3], y[o + 4], y[o + 5]};
}

namespace {

double arc_duration(const ArcStructure& /*s*/, const Eigen::VectorXd& y, std::size_t arc) {
  const double t1 = y[ShootingLayout::time(arc + 1)];
  const double t0 = arc == 0 ? 0.0 : y[ShootingLayout::time(arc)];
  return t1 - t0;
}

Extremal flow_one(const ModelConstants& k, const ArcStructure& s, std::size_t arc,
                  const Extremal& z, double dt, const IntegratorSettings& settings) {
  return expmap_extremal(k, s.arcs[arc], z, dt, s.bounds, settings);
}

}  // namespace

ArcEndpoints flow_arcs(const ModelConstants& k, const ArcStructure& s, const Eigen::VectorXd& y,
                       const IntegratorSettings& settings) {
  if (static_cast<std::size_t>(y.size()) != s.dimension()) {
    throw StructureError("unknown vector size does not match structure " + s.label());
  }
  ArcEndpoints ep;
  for (std::size_t j = 0; j < s.arcs.size(); ++j) {
    ep.start.push_back(arc_start(k, s, y, j));
    ep.duration.push_back(arc_duration(s, y, j));
    ep.end.push_back(flow_one(k, s, j, ep.start[j], ep.duration[j], settings));
  }
  return ep;
}

std::size_t entry_condition_count(const ArcStructure& s, std::size_t j) {
  const ArcKind a = s.arcs[j];
  const bool from_bang = is_bang(s.arcs[j - 1]);
  if (a == ArcKind::singular) return from_bang ? 2 : 1;
  if (is_boundary(a)) return from_bang ? 2 : 1;
  return 0;
}

Eigen::VectorXd residual_from(const ModelConstants& k, const ArcStructure& s,
                              const Eigen::VectorXd& y, const ArcEndpoints& ep) {
  const std::size_t n = s.dimension();
  Eigen::VectorXd r(n);
  std::size_t i = 0;
  // (a) entry conditions, at the point reached by the previous arc.
  for (std::size_t j = 1; j < s.arcs.size(); ++j) {
    const Extremal& z = ep.end[j - 1];
    const ArcKind a = s.arcs[j];
    const bool from_bang = is_bang(s.arcs[j - 1]);
    if (a == ArcKind::singular) {
      if (from_bang) r[i++] = lift_h1(k, z);
      r[i++] = lift_h01(k, z);
    } else if (is_boundary(a)) {
      const ConstraintId id = constraint_of(a);
      r[i++] = constraint(k, id, state_part(z), bound_of(id, s.bounds));
      if (from_bang) r[i++] = lift_h1(k, z);
    }
  }
  // (b) terminal block with p0 = -1.
  const Extremal& zf = ep.end.back();
  r[i++] = zf[0] - k.h_f;
  r[i++] = zf[1] - k.v_f;
  r[i++] = zf[5] - (1.0 - s.alpha);
  r[i++] = hamiltonian(k, s.arcs.back(), zf, s.bounds) - s.alpha;
  // (c) matching.
  const ShootingLayout L(s);
  for (std::size_t j = 1; j < s.arcs.size(); ++j) {
    const std::size_t o = L.node(j);
    for (int c = 0; c < 6; ++c) r[i++] = y[o + c] - ep.end[j - 1][c];
  }
  if (i != n) {
    throw StructureError("structure " + s.label() + " yields " + std::to_string(i) +
                         " equations for " + std::to_string(n) + " unknowns");
  }
  return r;
}

Eigen::VectorXd assemble_residual(const ModelConstants& k, const ArcStructure& s,
                                  const Eigen::VectorXd& y, const IntegratorSettings& settings) {
  s.validate();
  return residual_from(k, s, y, flow_arcs(k, s, y, settings));
}

Eigen::MatrixXd shooting_jacobian(const ModelConstants& k, const ArcStructure& s,
                                  const Eigen::VectorXd& y, const ArcEndpoints& ep,
                                  const Eigen::VectorXd& r, const NewtonSettings& settings) {
  const std::size_t n = s.dimension();
  const std::size_t narcs = s.arcs.size();
  const ShootingLayout L(s);
  Eigen::MatrixXd J(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    const double step = settings.fd_rel * std::max(1.0, std::abs(y[c]));
    Eigen::VectorXd yp = y;
    yp[c] += step;
    const double h = yp[c] - y[c];
    // Arcs touched by this unknown.
    std::vector<std::size_t> touched;
    if (c < 3) {
      touched = {0};
    } else if (c < 3 + narcs) {
      const std::size_t j = c - 3 + 1;  // t_j ends arc j-1 and starts arc j
      touched.push_back(j - 1);
      if (j < narcs) touched.push_back(j);
    } else {
      touched = {(c - L.node(1)) / 6 + 1};
    }
    ArcEndpoints epp = ep;
    for (std::size_t a : touched) {
      epp.start[a] = arc_start(k, s, yp, a);
      epp.duration[a] = arc_duration(s, yp, a);
      epp.end[a] = flow_one(k, s, a, epp.start[a], epp.duration[a], settings.flow);
    }
    J.col(c) = (residual_from(k, s, yp, epp) - r) / h;
  }
  return J;
}

// ---------------------------------------------------------------------------
// Newton.

std::vector<double> ShootingResult::times() const { return junction_times(structure, y); }

double ShootingResult::final_time() const { return y[ShootingLayout::time(structure.arcs.size())]; }

double ShootingResult::fuel(const ModelConstants& k) const {
  if (arcs.empty()) return NAN;
  return k.x0.m - arcs.back().traj.nodes().back()[2];
}

Eigen::VectorXd newton_direction(const Eigen::MatrixXd& J, const Eigen::VectorXd& r) {
  const Eigen::Index n = J.cols();
  if (!J.allFinite()) throw RankDeficient("non-finite shooting Jacobian");
  // Column equilibration before factoring: unknowns span ~1e-3 .. 1e5.
  const Eigen::VectorXd cs = J.colwise().lpNorm<Eigen::Infinity>().transpose();
  if ((cs.array() == 0.0).any()) throw RankDeficient("shooting Jacobian has a zero column");
  const Eigen::MatrixXd Js = J * cs.cwiseInverse().asDiagonal();
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Js);
  if (qr.rank() < n) {
    throw RankDeficient("shooting Jacobian is rank deficient (rank " + std::to_string(qr.rank()) +
                        " of " + std::to_string(n) + ")");
  }
  return -(qr.solve(r).array() / cs.array()).matrix();
}

NewtonOutcome newton(const ModelConstants& k, const ArcStructure& s, const Eigen::VectorXd& y0,
                     const NewtonSettings& settings) {
  s.validate();
  if (static_cast<std::size_t>(y0.size()) != s.dimension()) {
    throw StructureError("seed size does not match structure " + s.label());
  }
  NewtonOutcome out;
  out.y = y0;
  out.endpoints = flow_arcs(k, s, out.y, settings.flow);
  out.residual = residual_from(k, s, out.y, out.endpoints);
  for (;; ++out.iterations) {
    const Eigen::VectorXd& r = out.residual;
    if (!r.allFinite()) throw NoConvergence("non-finite shooting residual");
    if (r.lpNorm<Eigen::Infinity>() < settings.tol) break;
    if (out.iterations >= settings.max_iter) {
      throw NoConvergence("Newton did not converge in " + std::to_string(settings.max_iter) +
                          " iterations (|S| = " + std::to_string(r.lpNorm<Eigen::Infinity>()) +
                          ")");
    }
    const Eigen::MatrixXd J = shooting_jacobian(k, s, out.y, out.endpoints, r, settings);
    const Eigen::VectorXd d = newton_direction(J, r);
    const double f0 = r.squaredNorm();
    double lambda = 1.0;
    for (;;) {
      const Eigen::VectorXd yt = out.y + lambda * d;
      bool ok = false;
      ArcEndpoints ept;
      Eigen::VectorXd rt;
      try {
        ept = flow_arcs(k, s, yt, settings.flow);
        rt = residual_from(k, s, yt, ept);
        ok = rt.allFinite() && rt.squaredNorm() <= (1.0 - 2e-4 * lambda) * f0;
      } catch (const std::exception&) {
        ok = false;
      }
      if (ok) {
        out.y = yt;
        out.endpoints = std::move(ept);
        out.residual = std::move(rt);
        break;
      }
      lambda *= settings.backtrack;
      if (lambda < settings.min_step) {
        throw NoConvergence("line search failed (|S| = " +
                            std::to_string(r.lpNorm<Eigen::Infinity>()) + ")");
      }
    }
  }
  return out;
}

ShootingResult solve(const ModelConstants& k, const ArcStructure& s, const Eigen::VectorXd& y0,
                     const NewtonSettings& settings) {
  NewtonOutcome n = newton(k, s, y0, settings);
  ShootingResult res;
  res.structure = s;
  res.y = n.y;
  res.residual_norm = n.residual.lpNorm<Eigen::Infinity>();
  res.iterations = n.iterations;
  res.arcs = reflow(k, s, res.y, settings.flow);
  res.validation = validate(k, res);
  return res;
}

std::vector<ArcTrajectory> reflow(const ModelConstants& k, const ArcStructure& s,
                                  const Eigen::VectorXd& y, const IntegratorSettings& settings) {
  std::vector<ArcTrajectory> out;
  const std::vector<double> t = junction_times(s, y);
  for (std::size_t j = 0; j < s.arcs.size(); ++j) {
    ArcTrajectory a{s.arcs[j], t[j], {}};
    expmap_extremal(k, s.arcs[j], arc_start(k, s, y, j), t[j + 1] - t[j], s.bounds, settings,
                    &a.traj);
    out.push_back(std::move(a));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation.

bool ValidationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const ValidationCheck* ValidationReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

namespace {

/// Tracks the minimum margin of one check and where it occurred.
struct Worst {
  double margin = INFINITY;
  std::string where;
  void update(double m, const std::string& arc, double t) {
    if (m < margin) {
      margin = m;
      char buf[96];
      std::snprintf(buf, sizeof buf, "%s at t = %.4f s", arc.c_str(), t);
      where = buf;
    }
  }
};

std::string arc_name(const ArcStructure& s, std::size_t j) {
  return "arc " + std::to_string(j) + " (" + to_string(s.arcs[j]) + ")";
}

}  // namespace

ValidationReport validate(const ModelConstants& k, const ShootingResult& r,
                          const ValidationSettings& vs) {
  const ArcStructure& s = r.structure;
  ValidationReport rep;
  auto add = [&rep](const std::string& name, double margin, const std::string& where,
                    bool applicable = true) {
    if (!applicable) margin = INFINITY;
    rep.checks.push_back({name, margin >= 0.0, margin, applicable ? where : "not applicable"});
  };

  const std::vector<double> t = r.times();
  {
    Worst w;
    for (std::size_t j = 0; j + 1 < t.size(); ++j) w.update(t[j + 1] - t[j], arc_name(s, j), t[j]);
    add("time_ordering", w.margin, w.where);
  }

  const bool have_arcs = r.arcs.size() == s.arcs.size();
  Worst sign, a1, uc, us, lc, eta, cons, hcons;
  bool any_bang = false, any_bd = false, any_sing = false;
  if (have_arcs) {
    for (std::size_t j = 0; j < s.arcs.size(); ++j) {
      const ArcTrajectory& at = r.arcs[j];
      const ArcKind a = s.arcs[j];
      const double dur = at.traj.t_end() - at.traj.t_begin();
      const std::string name = arc_name(s, j);
      const double H0 = hamiltonian(k, a, at.traj(0.0), s.bounds);
      for (int i = 0; i <= vs.samples; ++i) {
        const double tau = dur * i / vs.samples;
        const Extremal z = at.traj(tau);
        const State x = State::from(state_part(z));
        const double tabs = at.t0 + tau;
        cons.update(-std::max(c1(k, x, s.bounds.phi_max), c2(k, x, s.bounds.psi_max)) +
                        vs.constraint_tol,
                    name, tabs);
        hcons.update(vs.hamiltonian_tol - std::abs(hamiltonian(k, a, z, s.bounds) - H0), name,
                     tabs);
        const bool interior = i > 0 && i < vs.samples;
        if (is_bang(a)) {
          any_bang = true;
          if (interior) {
            const double phi = lift_h1(k, z);
            sign.update((a == ArcKind::bang_minus ? -phi : phi) + vs.sign_tol, name, tabs);
          }
        } else if (a == ArcKind::singular) {
          any_sing = true;
          const double u = u_singular_z(k, z);
          us.update(std::min(u - k.u_min, k.u_max - u), name, tabs);
          const double d0 = det_d(k, BracketTag::f0, x);
          const double d101 = det_d(k, BracketTag::f101, x);
          lc.update(d0 * d101, name, tabs);
        } else {
          any_bd = true;
          const ConstraintId id = constraint_of(a);
          const double f1c = lie_f1_c(k, id, x);
          a1.update(std::abs(f1c) - vs.a1_threshold, name, tabs);
          const double u = u_boundary(k, id, x);
          uc.update(std::min(u - k.u_min, k.u_max - u), name, tabs);
          eta.update(vs.sign_tol - eta_boundary(k, id, z), name, tabs);
        }
      }
    }
  }
  add("bang_switching_sign", sign.margin, sign.where, have_arcs && any_bang);
  add("order_one_A1", a1.margin, a1.where, have_arcs && any_bd);
  // Strict interiority: a zero margin fails.
  rep.checks.push_back({"boundary_control_interior", !(uc.margin <= 0.0), uc.margin,
                        any_bd ? uc.where : "not applicable"});
  add("singular_control_admissible", us.margin, us.where, have_arcs && any_sing);
  add("legendre_clebsch", lc.margin, lc.where, have_arcs && any_sing);
  add("boundary_multiplier_sign", eta.margin, eta.where, have_arcs && any_bd);
  add("state_constraints", cons.margin, cons.where, have_arcs);
  add("hamiltonian_conservation", hcons.margin, hcons.where, have_arcs);

  // Junctions.
  Worst jump, hcont;
  bool any_junction_bd = false;
  if (have_arcs) {
    for (std::size_t j = 1; j < s.arcs.size(); ++j) {
      const Extremal zm = r.arcs[j - 1].traj.nodes().back();
      const Extremal zp = r.arcs[j].traj.nodes().front();
      const double tj = t[j];
      const std::string name = "junction " + std::to_string(j);
      hcont.update(vs.hamiltonian_tol - std::abs(hamiltonian(k, s.arcs[j], zp, s.bounds) -
                                                 hamiltonian(k, s.arcs[j - 1], zm, s.bounds)),
                   name, tj);
      if (is_boundary(s.arcs[j])) {
        any_junction_bd = true;
        const double nu = junction_jump(k, constraint_of(s.arcs[j]), zm, zp, JunctionKind::entry);
        jump.update(vs.jump_tol - std::abs(nu), name, tj);
      }
      if (is_boundary(s.arcs[j - 1])) {
        any_junction_bd = true;
        const double nu =
            junction_jump(k, constraint_of(s.arcs[j - 1]), zm, zp, JunctionKind::exit);
        jump.update(vs.jump_tol - std::abs(nu), name, tj);
      }
    }
  }
  add("junction_jumps", jump.margin, jump.where, have_arcs && any_junction_bd);
  add("hamiltonian_continuity", hcont.margin, hcont.where, have_arcs && s.arcs.size() > 1);

  if (have_arcs) {
    const Extremal zf = r.arcs.back().traj.nodes().back();
    const double b = std::max(std::abs(zf[0] - k.h_f), std::abs(zf[1] - k.v_f));
    const double tr = std::max(std::abs(zf[5] - (1.0 - s.alpha)),
                               std::abs(hamiltonian(k, s.arcs.back(), zf, s.bounds) - s.alpha));
    add("terminal_state", 1e-6 - b, "t_f");
    add("transversality", 1e-8 - tr, "t_f");
  }
  return rep;
}

std::string to_json(const ModelConstants& k, const ShootingResult& r) {
  nlohmann::ordered_json j;
  j["structure"] = r.structure.label();
  j["structure_pretty"] = pretty_label(r.structure.arcs);
  j["bounds"] = {{"phi_max_m_per_s", r.structure.bounds.phi_max},
                 {"psi_max", r.structure.bounds.psi_max}};
  j["alpha"] = r.structure.alpha;
  const std::vector<double> t = r.times();
  j["switching_times_s"] = std::vector<double>(t.begin() + 1, t.end() - 1);
  j["final_time_s"] = r.final_time();
  j["fuel_kg"] = r.fuel(k);
  j["p0"] = {r.y[0], r.y[1], r.y[2]};
  j["unknowns"] = std::vector<double>(r.y.data(), r.y.data() + r.y.size());
  j["residual_norm_inf"] = r.residual_norm;
  j["newton_iterations"] = r.iterations;
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto& c : r.validation.checks) {
    checks.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"margin", std::isfinite(c.margin) ? nlohmann::ordered_json(c.margin)
                                                         : nlohmann::ordered_json(nullptr)},
                      {"detail", c.detail}});
  }
  j["validation"] = {{"passed", r.validation.passed()}, {"checks", checks}};
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Seeds and structure edits.

Eigen::VectorXd unconstrained_seed(const ModelConstants& k, double t1, double t2, double tf,
                                   double alpha, const IntegratorSettings& settings) {
  const Bounds b{};
  const State x0{k.x0.h, k.x0.v, k.x0.m};
  const State x1 = expmap_state(k, ArcKind::bang_minus, x0, t1, b, settings);
  const State x2 = expmap_state(k, ArcKind::singular, x1, t2 - t1, b, settings);
  const State xf = expmap_state(k, ArcKind::bang_plus, x2, tf - t2, b, settings);
  const Vec3<double> xfa = xf.array();

  // The costate flow on a bang arc is linear in p: flow back three basis
  // costates and superpose.
  const std::array<Vec3<double>, 3> basis{Vec3<double>{1, 0, 0}, Vec3<double>{0, 1, 0},
                                          Vec3<double>{0, 0, 1.0 - alpha}};
  std::array<Extremal, 3> back;
  for (int i = 0; i < 3; ++i) {
    const Extremal zf{xfa[0], xfa[1], xfa[2], basis[i][0], basis[i][1], basis[i][2]};
    back[i] = expmap_extremal(k, ArcKind::bang_plus, zf, -(tf - t2), b, settings);
  }
  const Vec3<double> x2b = state_part(back[0]);
  const Vec3<double> F1 = control_field(k, x2b);
  const Vec3<double> Fp = dynamics(k, xfa, k.u_max);
  Eigen::Matrix2d A;
  Eigen::Vector2d rhs;
  for (int i = 0; i < 2; ++i) {
    A(0, i) = dot(costate_part(back[i]), F1);
    A(1, i) = Fp[i];
  }
  rhs << -dot(costate_part(back[2]), F1), alpha - (1.0 - alpha) * Fp[2];
  const Eigen::Vector2d php = A.fullPivLu().solve(rhs);
  Extremal z2;
  for (int c = 0; c < 3; ++c) z2[c] = x2b[c];
  for (int c = 0; c < 3; ++c) {
    z2[3 + c] = php[0] * back[0][3 + c] + php[1] * back[1][3 + c] + back[2][3 + c];
  }
  const Extremal z1 = expmap_extremal(k, ArcKind::singular, z2, -(t2 - t1), b, settings);
  const Extremal z0 = expmap_extremal(k, ArcKind::bang_minus, z1, -t1, b, settings);

  Eigen::VectorXd y(18);
  y << z0[3], z0[4], z0[5], t1, t2, tf, z1[0], z1[1], z1[2], z1[3], z1[4], z1[5], z2[0], z2[1],
      z2[2], z2[3], z2[4], z2[5];
  return y;
}

Eigen::VectorXd insert_arc(const ArcStructure& from, const Eigen::VectorXd& y, std::size_t at) {
  const std::size_t narcs = from.arcs.size();
  if (at < 1 || at >= narcs) throw StructureError("arc insertion position out of range");
  const ShootingLayout L(from);
  std::vector<double> out(y.data(), y.data() + 3);
  for (std::size_t j = 1; j <= narcs; ++j) {
    out.push_back(y[ShootingLayout::time(j)]);
    if (j == at) out.push_back(y[ShootingLayout::time(j)]);
  }
  for (std::size_t j = 1; j < narcs; ++j) {
    const std::size_t o = L.node(j);
    for (int c = 0; c < 6; ++c) out.push_back(y[o + c]);
    if (j == at) {
      for (int c = 0; c < 6; ++c) out.push_back(y[o + c]);
    }
  }
  return Eigen::Map<Eigen::VectorXd>(out.data(), out.size());
}

Eigen::VectorXd remove_arc(const ArcStructure& from, const Eigen::VectorXd& y, std::size_t at) {
  const std::size_t narcs = from.arcs.size();
  if (at < 1 || at + 1 >= narcs) throw StructureError("arc removal position out of range");
  const ShootingLayout L(from);
  std::vector<double> out(y.data(), y.data() + 3);
  for (std::size_t j = 1; j <= narcs; ++j) {
    if (j == at + 1) continue;
    out.push_back(y[ShootingLayout::time(j)]);
  }
  for (std::size_t j = 1; j < narcs; ++j) {
    if (j == at + 1) continue;
    const std::size_t o = L.node(j);
    for (int c = 0; c < 6; ++c) out.push_back(y[o + c]);
  }
  return Eigen::Map<Eigen::VectorXd>(out.data(), out.size());
}

}  // namespace climb
