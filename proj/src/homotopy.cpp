#include "climb/homotopy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <ostream>
#include <thread>

#include "json.hpp"

namespace climb {

const char* to_string(Monitor m) {
  switch (m) {
    case Monitor::M1:
      return "M1";
    case Monitor::M2:
      return "M2";
    case Monitor::M3:
      return "M3";
  }
  return "?";
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::reached_end:
      return "reached_end";
    case Termination::monitor:
      return "monitor";
    case Termination::step_failure:
      return "step_failure";
  }
  return "?";
}

double MonitorValues::get(Monitor m) const {
  switch (m) {
    case Monitor::M1:
      return m1;
    case Monitor::M2:
      return m2;
    case Monitor::M3:
      return m3;
  }
  return -INFINITY;
}

namespace {

constexpr std::size_t npos = static_cast<std::size_t>(-1);

std::size_t singular_index(const ArcStructure& s) {
  for (std::size_t j = 0; j < s.arcs.size(); ++j) {
    if (s.arcs[j] == ArcKind::singular) return j;
  }
  return npos;
}

/// Arc after which M2 would insert a c2 arc, or npos.
std::size_t m2_anchor(const ArcStructure& s) {
  const std::size_t js = singular_index(s);
  if (js != npos) return is_bang(s.arcs[js + 1]) ? js : npos;
  if (s.arcs.size() < 3) return npos;
  const std::size_t last = s.arcs.size() - 2;
  return s.arcs[last] == ArcKind::boundary_c1 ? last : npos;
}

Vec3<double> node_state(const ModelConstants& k, const ArcStructure& s, const Eigen::VectorXd& y,
                        std::size_t arc) {
  return state_part(arc_start(k, s, y, arc));
}

}  // namespace

MonitorValues monitor_values(const ModelConstants& k, const ArcStructure& s,
                             const Eigen::VectorXd& y) {
  MonitorValues mv;
  const std::size_t js = singular_index(s);
  const std::vector<double> t = junction_times(s, y);
  if (js != npos) {
    mv.m3 = -(t[js + 1] - t[js]);
    if (is_bang(s.arcs[js - 1])) {
      mv.m1 = c1(k, State::from(node_state(k, s, y, js)), s.bounds.phi_max);
    }
  }
  const std::size_t a2 = m2_anchor(s);
  if (a2 != npos) mv.m2 = c2(k, State::from(node_state(k, s, y, a2 + 1)), s.bounds.psi_max);
  return mv;
}

std::vector<Monitor> monitors(const ModelConstants& k, const ArcStructure& s,
                              const Eigen::VectorXd& y) {
  const MonitorValues mv = monitor_values(k, s, y);
  std::vector<Monitor> out;
  for (Monitor m : {Monitor::M1, Monitor::M2, Monitor::M3}) {
    if (mv.get(m) > 0.0) out.push_back(m);
  }
  return out;
}

namespace {

/// Position and kind of the edit a monitor implies.
struct Edit {
  bool insert;
  std::size_t at;
  ArcKind kind;
};

Edit edit_for(const ArcStructure& s, Monitor m) {
  const std::size_t js = singular_index(s);
  switch (m) {
    case Monitor::M1:
      if (js == npos || !is_bang(s.arcs[js - 1])) break;
      return {true, js, ArcKind::boundary_c1};
    case Monitor::M2: {
      const std::size_t a = m2_anchor(s);
      if (a == npos) break;
      return {true, a + 1, ArcKind::boundary_c2};
    }
    case Monitor::M3:
      if (js == npos) break;
      return {false, js, ArcKind::singular};
  }
  throw StructureError(std::string("monitor ") + to_string(m) + " does not apply to structure " +
                       s.label());
}

}  // namespace

ArcStructure structure_transition(const ArcStructure& s, Monitor m) {
  const Edit e = edit_for(s, m);
  ArcStructure out = s;
  if (e.insert) {
    out.arcs.insert(out.arcs.begin() + static_cast<std::ptrdiff_t>(e.at), e.kind);
  } else {
    out.arcs.erase(out.arcs.begin() + static_cast<std::ptrdiff_t>(e.at));
  }
  if (!in_catalog(out.arcs)) {
    throw StructureError("transition " + std::string(to_string(m)) + " of " + s.label() +
                         " leaves the structure catalog (" + out.label() + ")");
  }
  return out;
}

Eigen::VectorXd transition_unknowns(const ArcStructure& s, const Eigen::VectorXd& y, Monitor m) {
  const Edit e = edit_for(s, m);
  return e.insert ? insert_arc(s, y, e.at) : remove_arc(s, y, e.at);
}

double lambda_of(const Bounds& b, LambdaSelector sel) {
  return sel == LambdaSelector::phi_max ? b.phi_max : b.psi_max;
}

void set_lambda(Bounds& b, LambdaSelector sel, double lambda) {
  (sel == LambdaSelector::phi_max ? b.phi_max : b.psi_max) = lambda;
}

double lambda_scale(LambdaSelector sel) { return sel == LambdaSelector::phi_max ? 1.0 : 0.01; }

// ---------------------------------------------------------------------------
// Continuation.

namespace {

bool depends_on(const ArcStructure& s, LambdaSelector sel) {
  const ArcKind need =
      sel == LambdaSelector::phi_max ? ArcKind::boundary_c1 : ArcKind::boundary_c2;
  return std::find(s.arcs.begin(), s.arcs.end(), need) != s.arcs.end();
}

/// Working state of the predictor-corrector in scaled coordinates
/// w = (y ./ D, lambda / ls).
class Tracker {
 public:
  Tracker(const ModelConstants& k, const ArcStructure& s, LambdaSelector sel,
          const ContinuationSettings& cs, const Eigen::VectorXd& y0)
      : k_(k), s_(s), sel_(sel), cs_(cs), n_(s.dimension()), ls_(lambda_scale(sel)) {
    D_ = y0.cwiseAbs().cwiseMax(1e-2);
  }

  [[nodiscard]] std::size_t n() const { return n_; }
  [[nodiscard]] double ls() const { return ls_; }

  Eigen::VectorXd pack(const Eigen::VectorXd& y, double lambda) const {
    Eigen::VectorXd w(n_ + 1);
    w.head(n_) = y.cwiseQuotient(D_);
    w[n_] = lambda / ls_;
    return w;
  }
  Eigen::VectorXd y_of(const Eigen::VectorXd& w) const { return w.head(n_).cwiseProduct(D_); }
  double lambda_of_w(const Eigen::VectorXd& w) const { return w[n_] * ls_; }

  ArcStructure at(double lambda) const {
    ArcStructure s = s_;
    set_lambda(s.bounds, sel_, lambda);
    return s;
  }

  /// Residual at w; throws on flow failure.
  Eigen::VectorXd residual(const Eigen::VectorXd& w, ArcEndpoints* ep = nullptr) const {
    const ArcStructure s = at(lambda_of_w(w));
    const Eigen::VectorXd y = y_of(w);
    ArcEndpoints e = flow_arcs(k_, s, y, cs_.newton.flow);
    Eigen::VectorXd r = residual_from(k_, s, y, e);
    if (ep) *ep = std::move(e);
    return r;
  }

  /// Scaled n x (n+1) Jacobian [dh/dY, dh/dLambda] at w.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& w) const {
    const double lambda = lambda_of_w(w);
    const ArcStructure s = at(lambda);
    const Eigen::VectorXd y = y_of(w);
    const ArcEndpoints ep = flow_arcs(k_, s, y, cs_.newton.flow);
    const Eigen::VectorXd r = residual_from(k_, s, y, ep);
    Eigen::MatrixXd A(n_, n_ + 1);
    A.leftCols(n_) = shooting_jacobian(k_, s, y, ep, r, cs_.newton) * D_.asDiagonal();
    const double dl = cs_.newton.fd_rel * std::max(1.0, std::abs(lambda));
    const ArcStructure sp = at(lambda + dl);
    A.col(n_) = (residual_from(k_, sp, y, flow_arcs(k_, sp, y, cs_.newton.flow)) - r) / dl * ls_;
    return A;
  }

  /// Unit tangent of ker A, oriented along `orient` (or toward +lambda * dir).
  Eigen::VectorXd tangent(const Eigen::MatrixXd& A, const Eigen::VectorXd* orient,
                          double dir) const {
    const Eigen::MatrixXd Jy = A.leftCols(n_);
    const Eigen::VectorXd a = newton_direction(Jy, A.col(n_));  // solves Jy a = -h_lambda
    Eigen::VectorXd t(n_ + 1);
    t.head(n_) = a;
    t[n_] = 1.0;
    t.normalize();
    const double sgn = orient ? orient->dot(t) : dir * t[n_];
    if (sgn < 0) t = -t;
    return t;
  }

  /// Chord corrector with last row `g`: g.(w - anchor) = rhs.
  bool correct(Eigen::VectorXd& w, const Eigen::MatrixXd& A, const Eigen::VectorXd& g,
               const Eigen::VectorXd& anchor, double rhs, ArcEndpoints* ep) const {
    Eigen::MatrixXd M(n_ + 1, n_ + 1);
    M.topRows(n_) = A;
    M.row(n_) = g.transpose();
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
    double prev = INFINITY;
    for (int it = 0; it <= cs_.corrector_max_iter; ++it) {
      Eigen::VectorXd r;
      try {
        r = residual(w, ep);
      } catch (const std::exception&) {
        return false;
      }
      const double nr = r.lpNorm<Eigen::Infinity>();
      if (!std::isfinite(nr)) return false;
      const double gc = g.dot(w - anchor) - rhs;
      if (nr < cs_.corrector_tol && std::abs(gc) < 1e-10) return true;
      if (it == cs_.corrector_max_iter || nr > 2.0 * prev) return false;
      prev = nr;
      Eigen::VectorXd rr(n_ + 1);
      rr.head(n_) = r;
      rr[n_] = gc;
      const Eigen::VectorXd d = lu.solve(rr);
      if (!d.allFinite()) return false;
      w -= d;
    }
    return false;
  }

  /// Solution at fixed lambda starting from w (chord with A, then full
  /// Newton as a fallback).
  bool solve_at(double lambda, Eigen::VectorXd& w, const Eigen::MatrixXd& A,
                ArcEndpoints* ep) const {
    w[n_] = lambda / ls_;
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n_ + 1);
    e[n_] = 1.0;
    if (correct(w, A, e, w, 0.0, ep)) return true;
    try {
      NewtonSettings ns = cs_.newton;
      ns.tol = cs_.corrector_tol;
      NewtonOutcome o = newton(k_, at(lambda), y_of(w), ns);
      w = pack(o.y, lambda);
      if (ep) *ep = std::move(o.endpoints);
      return true;
    } catch (const std::exception&) {
      return false;
    }
  }

 private:
  const ModelConstants& k_;
  ArcStructure s_;
  LambdaSelector sel_;
  const ContinuationSettings& cs_;
  std::size_t n_;
  double ls_;
  Eigen::VectorXd D_;
};

StationPoint make_station(double lambda, const Eigen::VectorXd& y, const ArcEndpoints& ep,
                          const ModelConstants& k, const ArcStructure& s) {
  StationPoint sp;
  sp.lambda = lambda;
  sp.y = y;
  sp.final_time = y[ShootingLayout::time(s.arcs.size())];
  sp.fuel = k.x0.m - ep.end.back()[2];
  return sp;
}

/// Stations strictly after `a` and up to `b` (inclusive) along dir.
std::vector<double> stations_between(const std::vector<double>& st, double a, double b,
                                     double dir, bool include_a) {
  std::vector<double> out;
  for (double x : st) {
    const double da = dir * (x - a);
    const double db = dir * (b - x);
    if ((da > 1e-12 || (include_a && std::abs(x - a) <= 1e-12)) && db >= -1e-12) out.push_back(x);
  }
  std::sort(out.begin(), out.end(), [dir](double u, double v) { return dir * u < dir * v; });
  return out;
}

}  // namespace

PathResult continue_path(const ModelConstants& k, const HomotopyProblem& P,
                         const ContinuationSettings& cs) {
  PathResult res;
  res.structure = P.structure;
  set_lambda(res.structure.bounds, P.selector, P.lambda0);
  res.structure.validate();
  const double dir = P.lambda1 >= P.lambda0 ? 1.0 : -1.0;
  const double l0 = P.lambda0;
  const double l1 = P.lambda1;

  // Polish the seed at lambda0.
  NewtonSettings ns = cs.newton;
  ns.tol = cs.corrector_tol;
  NewtonOutcome seed;
  try {
    seed = newton(k, res.structure, P.seed, ns);
  } catch (const std::exception& e) {
    res.cause = Termination::step_failure;
    res.message = std::string("seed does not solve the shooting system: ") + e.what();
    return res;
  }
  res.points.push_back({seed.y, l0, 0.0, {}});
  for (double st : stations_between(P.stations, l0, l0, dir, true)) {
    res.stations.push_back(make_station(st, seed.y, seed.endpoints, k, res.structure));
  }
  if (l0 == l1) return res;

  if (!depends_on(res.structure, P.selector)) {
    // h does not depend on lambda: the path is constant and the only
    // lambda-dependent monitor crosses zero where the speed equals lambda.
    const Monitor m = P.selector == LambdaSelector::phi_max ? Monitor::M1 : Monitor::M2;
    const double v = monitor_values(k, res.structure, seed.y).get(m);
    double stop = l1;
    if (std::isfinite(v)) {
      const double cross = l0 + v;  // value(lambda) = v0 - (lambda - l0)
      if (dir < 0 && cross < l0 && cross > l1) stop = cross;
    }
    for (double st : stations_between(P.stations, l0, stop, dir, false)) {
      if (stop != l1 && std::abs(st - stop) <= 1e-12) continue;
      res.stations.push_back(make_station(st, seed.y, seed.endpoints, k, res.structure));
    }
    res.points.push_back({seed.y, stop, std::abs(stop - l0) / lambda_scale(P.selector), {}});
    if (stop != l1) {
      res.cause = Termination::monitor;
      res.trigger = m;
      res.trigger_lambda = stop;
      res.trigger_y = seed.y;
      res.points.back().monitor_flags = {m};
    }
    return res;
  }

  Tracker tr(k, res.structure, P.selector, cs, seed.y);
  Eigen::VectorXd w = tr.pack(seed.y, l0);
  Eigen::MatrixXd A;
  Eigen::VectorXd t;
  try {
    A = tr.jacobian(w);
    t = tr.tangent(A, nullptr, dir);
  } catch (const std::exception& e) {
    res.cause = Termination::step_failure;
    res.message = std::string("tangent undefined at the seed: ") + e.what();
    return res;
  }
  double ds = cs.step0;
  double arclength = 0.0;
  const std::size_t n = tr.n();
  const double target = l1 / tr.ls();

  for (int step = 0; step < cs.max_steps; ++step) {
    // Predictor, clipped at lambda1.
    bool last = false;
    double dsi = ds;
    if (dir * (w[n] + dsi * t[n] - target) >= 0.0) {
      dsi = (target - w[n]) / t[n];
      last = true;
    }
    Eigen::VectorXd wn = w + dsi * t;
    ArcEndpoints ep;
    bool ok;
    if (last) {
      ok = tr.solve_at(l1, wn, A, &ep);
    } else {
      ok = tr.correct(wn, A, t, w, dsi, &ep);
      if (!ok) {
        // Refactorize at the predicted point once.
        try {
          Eigen::VectorXd wp = w + dsi * t;
          const Eigen::MatrixXd Ap = tr.jacobian(wp);
          wn = wp;
          ok = tr.correct(wn, Ap, t, w, dsi, &ep);
        } catch (const std::exception&) {
          ok = false;
        }
      }
    }
    if (!ok) {
      ds *= 0.5;
      if (ds < cs.step_min) {
        res.cause = Termination::step_failure;
        res.message = "minimum arclength step reached";
        return res;
      }
      continue;
    }

    const double la = tr.lambda_of_w(w);
    double lb = last ? l1 : tr.lambda_of_w(wn);
    const ArcStructure sb = tr.at(lb);
    const Eigen::VectorXd yb = tr.y_of(wn);
    const std::vector<Monitor> fired = monitors(k, sb, yb);

    if (!fired.empty()) {
      // Earliest crossing by linear interpolation of the monitor values,
      // refined by regula falsi (Illinois) on fixed-lambda solutions.
      const ArcStructure sa = tr.at(la);
      const MonitorValues ma = monitor_values(k, sa, tr.y_of(w));
      const MonitorValues mb = monitor_values(k, sb, yb);
      Monitor best = fired.front();
      double best_frac = INFINITY;
      for (Monitor m : fired) {
        const double va = ma.get(m);
        const double vb = mb.get(m);
        const double frac = std::isfinite(va) ? va / (va - vb) : 0.0;
        if (frac < best_frac) {
          best_frac = frac;
          best = m;
        }
      }
      double xa = la, xb = lb;
      double fa = ma.get(best), fb = mb.get(best);
      Eigen::VectorXd wa = w, wb = wn;
      ArcEndpoints epa, epb = ep;
      int side = 0;
      for (int it = 0; it < 60 && std::abs(xb - xa) / tr.ls() > cs.trigger_tol; ++it) {
        double xm = (std::isfinite(fa) && fb != fa) ? xa - fa * (xb - xa) / (fb - fa)
                                                    : 0.5 * (xa + xb);
        if (!(dir * (xm - xa) > 0 && dir * (xb - xm) > 0)) xm = 0.5 * (xa + xb);
        const double th = (xm - xa) / (xb - xa);
        Eigen::VectorXd wm = (1.0 - th) * wa + th * wb;
        ArcEndpoints epm;
        if (!tr.solve_at(xm, wm, A, &epm)) {
          res.cause = Termination::step_failure;
          res.message = "corrector failed during trigger refinement";
          return res;
        }
        const double fm = monitor_values(k, tr.at(xm), tr.y_of(wm)).get(best);
        if (fm > 0.0) {
          xb = xm, fb = fm, wb = wm, epb = std::move(epm);
          if (side == 1) fa *= 0.5;
          side = 1;
        } else {
          xa = xm, fa = fm, wa = wm, epa = std::move(epm);
          if (side == -1) fb *= 0.5;
          side = -1;
        }
      }
      // Take the bracket end closer to the zero of the monitor.
      const bool use_b = !std::isfinite(fa) || std::abs(fb) < std::abs(fa);
      const double xs = use_b ? xb : xa;
      const Eigen::VectorXd ws = use_b ? wb : wa;
      // Stations passed before the trigger, with the old structure.
      for (double st : stations_between(P.stations, la, xs, dir, false)) {
        if (std::abs(st - xs) <= 1e-12) continue;
        const double th = (st - la) / (xs - la);
        Eigen::VectorXd wst = (1.0 - th) * w + th * ws;
        ArcEndpoints est;
        if (tr.solve_at(st, wst, A, &est)) {
          res.stations.push_back(make_station(st, tr.y_of(wst), est, k, tr.at(st)));
        }
      }
      arclength += (ws - w).norm();
      res.points.push_back({tr.y_of(ws), xs, arclength, {best}});
      res.cause = Termination::monitor;
      res.trigger = best;
      res.trigger_lambda = xs;
      res.trigger_y = tr.y_of(ws);
      return res;
    }

    for (double st : stations_between(P.stations, la, lb, dir, false)) {
      if (std::abs(st - lb) <= 1e-12) {
        res.stations.push_back(make_station(st, yb, ep, k, sb));
        continue;
      }
      const double th = (st - la) / (lb - la);
      Eigen::VectorXd wst = (1.0 - th) * w + th * wn;
      ArcEndpoints est;
      if (tr.solve_at(st, wst, A, &est)) {
        res.stations.push_back(make_station(st, tr.y_of(wst), est, k, tr.at(st)));
      }
    }
    arclength += (wn - w).norm();
    res.points.push_back({yb, lb, arclength, {}});
    if (last) return res;

    w = wn;
    try {
      A = tr.jacobian(w);
      t = tr.tangent(A, &t, dir);
    } catch (const std::exception& e) {
      res.cause = Termination::step_failure;
      res.message = std::string("tangent undefined: ") + e.what();
      return res;
    }
    ds = std::clamp(ds * 1.5, cs.step_min, cs.step_max);
  }
  res.cause = Termination::step_failure;
  res.message = "maximum number of continuation steps";
  return res;
}

CascadeResult follow_with_transitions(const ModelConstants& k, const HomotopyProblem& problem,
                                      const ContinuationSettings& cs, int max_transitions) {
  CascadeResult out;
  HomotopyProblem cur = problem;
  for (int i = 0; i <= max_transitions; ++i) {
    PathResult r = continue_path(k, cur, cs);
    const PathResult& seg = out.segments.emplace_back(std::move(r));
    if (seg.cause == Termination::reached_end) {
      out.final_structure = seg.structure;
      set_lambda(out.final_structure.bounds, cur.selector, cur.lambda1);
      out.final_y = seg.points.back().y;
      out.completed = true;
      return out;
    }
    if (seg.cause == Termination::step_failure) {
      out.error = seg.structure.label() + ": " + seg.message;
      return out;
    }
    ArcStructure next;
    try {
      next = structure_transition(seg.structure, seg.trigger);
    } catch (const StructureError& e) {
      out.error = e.what();
      return out;
    }
    set_lambda(next.bounds, cur.selector, seg.trigger_lambda);
    HomotopyProblem np;
    np.structure = next;
    np.selector = cur.selector;
    np.lambda0 = seg.trigger_lambda;
    np.lambda1 = cur.lambda1;
    np.seed = transition_unknowns(seg.structure, seg.trigger_y, seg.trigger);
    const double dir = cur.lambda1 >= cur.lambda0 ? 1.0 : -1.0;
    for (double st : cur.stations) {
      if (dir * (st - seg.trigger_lambda) >= -1e-12) np.stations.push_back(st);
    }
    cur = std::move(np);
  }
  out.error = "too many structure transitions";
  return out;
}

// ---------------------------------------------------------------------------
// Cartography.

double GridSpec::phi(int i) const {
  return n_phi == 1 ? phi_hi : phi_lo + (phi_hi - phi_lo) * i / (n_phi - 1);
}
double GridSpec::psi(int j) const {
  return n_psi == 1 ? psi_hi : psi_lo + (psi_hi - psi_lo) * j / (n_psi - 1);
}

std::vector<std::string> Cartography::labels() const {
  std::vector<std::string> out;
  for (const auto& c : cells) {
    if (c.resolved && std::find(out.begin(), out.end(), c.label) == out.end()) {
      out.push_back(c.label);
    }
  }
  return out;
}

Landmarks unconstrained_landmarks(const ModelConstants& k, const ShootingResult& u) {
  Landmarks lm;
  const ArcStructure& s = u.structure;
  const std::size_t js = singular_index(s);
  if (js == npos) throw StructureError("unconstrained solution has no singular arc");
  lm.phi_c1 = cas(k, State::from(node_state(k, s, u.y, js)));
  lm.psi_c2 = mach(k, State::from(node_state(k, s, u.y, js + 1)));
  return lm;
}

CascadeResult phi_row(const ModelConstants& k, const ShootingResult& u, const GridSpec& grid,
                      const ContinuationSettings& cs) {
  HomotopyProblem p;
  p.structure = u.structure;
  p.structure.bounds = {grid.phi_hi, grid.psi_hi};
  p.selector = LambdaSelector::phi_max;
  p.lambda0 = grid.phi_hi;
  p.lambda1 = grid.phi_lo;
  p.seed = u.y;
  for (int i = 0; i < grid.n_phi; ++i) p.stations.push_back(grid.phi(i));
  return follow_with_transitions(k, p, cs);
}

void row_landmarks(const ModelConstants& k, const CascadeResult& row, Landmarks& out) {
  for (const PathResult& seg : row.segments) {
    if (seg.cause != Termination::monitor || seg.trigger != Monitor::M3) continue;
    out.phi_s = seg.trigger_lambda;
    ArcStructure s = seg.structure;
    s.bounds.phi_max = seg.trigger_lambda;
    const auto arcs = reflow(k, s, seg.trigger_y);
    double best = -INFINITY;
    for (const auto& a : arcs) {
      const double dur = a.traj.t_end();
      for (int i = 0; i <= 400; ++i) {
        const Extremal z = a.traj(dur * i / 400);
        best = std::max(best, mach(k, State::from(state_part(z))));
      }
    }
    out.psi_s = best;
    return;
  }
}

namespace {

struct ColumnSeed {
  ArcStructure structure;
  Eigen::VectorXd y;
  bool ok = false;
};

void record_cascade(const CascadeResult& cr, LambdaSelector sel, double fixed,
                    std::vector<std::pair<double, CartographyCell>>& cells,
                    std::vector<BoundaryPoint>& bounds) {
  for (const PathResult& seg : cr.segments) {
    for (const StationPoint& sp : seg.stations) {
      CartographyCell c;
      c.phi = sel == LambdaSelector::phi_max ? sp.lambda : fixed;
      c.psi = sel == LambdaSelector::psi_max ? sp.lambda : fixed;
      c.label = seg.structure.label();
      c.final_time = sp.final_time;
      c.fuel = sp.fuel;
      c.resolved = true;
      cells.emplace_back(sp.lambda, c);
    }
    if (seg.cause == Termination::monitor) {
      BoundaryPoint b;
      b.phi = sel == LambdaSelector::phi_max ? seg.trigger_lambda : fixed;
      b.psi = sel == LambdaSelector::psi_max ? seg.trigger_lambda : fixed;
      b.from = seg.structure.label();
      try {
        b.to = structure_transition(seg.structure, seg.trigger).label();
      } catch (const StructureError&) {
        b.to = "?";
      }
      b.trigger = seg.trigger;
      bounds.push_back(b);
    }
  }
}

}  // namespace

Cartography build_cartography(const ModelConstants& k, const ShootingResult& u,
                              const GridSpec& grid, const ContinuationSettings& cs, int jobs) {
  Cartography c;
  c.grid = grid;
  c.cells.resize(static_cast<std::size_t>(grid.n_phi) * grid.n_psi);
  for (int i = 0; i < grid.n_phi; ++i) {
    for (int j = 0; j < grid.n_psi; ++j) {
      auto& cell = c.cells[static_cast<std::size_t>(i) * grid.n_psi + j];
      cell.phi = grid.phi(i);
      cell.psi = grid.psi(j);
    }
  }
  c.landmarks = unconstrained_landmarks(k, u);

  // Row at psi_max = psi_hi.
  const CascadeResult row = phi_row(k, u, grid, cs);
  row_landmarks(k, row, c.landmarks);
  std::vector<ColumnSeed> seeds(grid.n_phi);
  {
    std::vector<std::pair<double, CartographyCell>> dummy;
    record_cascade(row, LambdaSelector::phi_max, grid.psi_hi, dummy, c.boundaries);
  }
  for (const PathResult& seg : row.segments) {
    for (const StationPoint& sp : seg.stations) {
      for (int i = 0; i < grid.n_phi; ++i) {
        if (std::abs(grid.phi(i) - sp.lambda) <= 1e-9 && !seeds[i].ok) {
          seeds[i].structure = seg.structure;
          seeds[i].structure.bounds = {sp.lambda, grid.psi_hi};
          seeds[i].y = sp.y;
          seeds[i].ok = true;
        }
      }
    }
  }

  // Columns in psi_max, each sequential, distributed over threads.
  std::vector<std::vector<BoundaryPoint>> col_bounds(grid.n_phi);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= grid.n_phi) return;
      if (!seeds[i].ok) continue;
      HomotopyProblem p;
      p.structure = seeds[i].structure;
      p.selector = LambdaSelector::psi_max;
      p.lambda0 = grid.psi_hi;
      p.lambda1 = grid.psi_lo;
      p.seed = seeds[i].y;
      for (int j = 0; j < grid.n_psi; ++j) p.stations.push_back(grid.psi(j));
      const CascadeResult cr = follow_with_transitions(k, p, cs);
      std::vector<std::pair<double, CartographyCell>> cells;
      record_cascade(cr, LambdaSelector::psi_max, grid.phi(i), cells, col_bounds[i]);
      for (const auto& [lam, cell] : cells) {
        for (int j = 0; j < grid.n_psi; ++j) {
          if (std::abs(grid.psi(j) - lam) <= 1e-12) {
            c.cells[static_cast<std::size_t>(i) * grid.n_psi + j] = cell;
          }
        }
      }
    }
  };
  const int nt = std::max(1, jobs);
  std::vector<std::thread> threads;
  for (int t = 1; t < nt; ++t) threads.emplace_back(worker);
  worker();
  for (auto& th : threads) th.join();
  for (auto& b : col_bounds) c.boundaries.insert(c.boundaries.end(), b.begin(), b.end());
  c.fuel_min = locate_fuel_minimum(c);
  return c;
}

FuelMinimum locate_fuel_minimum(const Cartography& c) {
  FuelMinimum fm;
  const GridSpec& g = c.grid;
  int bi = -1, bj = -1;
  for (int i = 0; i < g.n_phi; ++i) {
    for (int j = 0; j < g.n_psi; ++j) {
      const auto& cell = c.at(i, j);
      if (cell.resolved && !(cell.fuel >= fm.fuel)) {
        fm.fuel = cell.fuel;
        bi = i;
        bj = j;
      }
    }
  }
  if (bi < 0) return fm;
  const auto& best = c.at(bi, bj);
  fm.phi = best.phi;
  fm.psi = best.psi;
  fm.label = best.label;
  // Quadratic fit f = a + b u + c w + d u^2 + e u w + f w^2 in cell units.
  std::vector<std::array<double, 3>> pts;
  for (int di = -1; di <= 1; ++di) {
    for (int dj = -1; dj <= 1; ++dj) {
      const int i = bi + di, j = bj + dj;
      if (i < 0 || j < 0 || i >= g.n_phi || j >= g.n_psi) continue;
      const auto& cell = c.at(i, j);
      if (!cell.resolved || cell.label != best.label) continue;
      pts.push_back({static_cast<double>(di), static_cast<double>(dj), cell.fuel});
    }
  }
  if (pts.size() < 6) return fm;
  Eigen::MatrixXd M(pts.size(), 6);
  Eigen::VectorXd f(pts.size());
  for (std::size_t r = 0; r < pts.size(); ++r) {
    const double u = pts[r][0], w = pts[r][1];
    M.row(r) << 1, u, w, u * u, u * w, w * w;
    f[r] = pts[r][2];
  }
  const Eigen::VectorXd q = M.colPivHouseholderQr().solve(f);
  Eigen::Matrix2d H;
  H << 2 * q[3], q[4], q[4], 2 * q[5];
  if (H.determinant() <= 0 || H(0, 0) <= 0) return fm;
  const Eigen::Vector2d x = H.ldlt().solve(-Eigen::Vector2d(q[1], q[2]));
  if (std::abs(x[0]) > 1.0 || std::abs(x[1]) > 1.0) return fm;
  const double dphi = g.n_phi > 1 ? (g.phi_hi - g.phi_lo) / (g.n_phi - 1) : 0.0;
  const double dpsi = g.n_psi > 1 ? (g.psi_hi - g.psi_lo) / (g.n_psi - 1) : 0.0;
  fm.phi = best.phi + x[0] * dphi;
  fm.psi = best.psi + x[1] * dpsi;
  fm.fuel = q[0] + q[1] * x[0] + q[2] * x[1] + q[3] * x[0] * x[0] + q[4] * x[0] * x[1] +
            q[5] * x[1] * x[1];
  return fm;
}

void write_cartography_csv(std::ostream& os, const Cartography& c) {
  os << "phi_max,psi_max,structure_label,t_f,delta_m\n";
  char buf[256];
  for (const auto& cell : c.cells) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6g,%s,%.6g,%.6g\n", cell.phi, cell.psi,
                  cell.resolved ? cell.label.c_str() : "unresolved", cell.final_time, cell.fuel);
    os << buf;
  }
}

std::string landmarks_json(const Cartography& c) {
  nlohmann::ordered_json j;
  j["phi_c1_m_per_s"] = c.landmarks.phi_c1;
  j["psi_c2"] = c.landmarks.psi_c2;
  j["phi_s_m_per_s"] = c.landmarks.phi_s;
  j["psi_s"] = c.landmarks.psi_s;
  j["fuel_minimum"] = {{"phi_max_m_per_s", c.fuel_min.phi},
                       {"psi_max", c.fuel_min.psi},
                       {"delta_m_kg", c.fuel_min.fuel},
                       {"structure", c.fuel_min.label}};
  nlohmann::ordered_json b = nlohmann::ordered_json::array();
  for (const auto& p : c.boundaries) {
    b.push_back({{"phi_max_m_per_s", p.phi},
                 {"psi_max", p.psi},
                 {"from", p.from},
                 {"to", p.to},
                 {"trigger", to_string(p.trigger)}});
  }
  j["boundaries"] = b;
  nlohmann::ordered_json labels = nlohmann::ordered_json::array();
  for (const auto& l : c.labels()) labels.push_back(l);
  j["labels"] = labels;
  return j.dump(2);
}

ShootingResult unconstrained_solution(const ModelConstants& k, double alpha,
                                      const std::vector<double>& times) {
  if (times.size() != 3) throw std::invalid_argument("unconstrained seed needs (t1, t2, t_f)");
  ArcStructure s{parse_structure("-s+"), Bounds{k.VMO, k.MMO}, alpha};
  return solve(k, s, unconstrained_seed(k, times[0], times[1], times[2], alpha));
}

ShootingResult solve_by_continuation(const ModelConstants& k, const ShootingResult& unconstrained,
                                     const Bounds& target, const ContinuationSettings& settings) {
  ArcStructure s = unconstrained.structure;
  Eigen::VectorXd y = unconstrained.y;
  auto leg = [&](LambdaSelector sel, double to) {
    const double from = lambda_of(s.bounds, sel);
    if (from == to) return;
    HomotopyProblem p;
    p.structure = s;
    p.selector = sel;
    p.lambda0 = from;
    p.lambda1 = to;
    p.seed = y;
    const CascadeResult c = follow_with_transitions(k, p, settings);
    if (!c.completed) {
      throw ShootingError("continuation to " + std::string(sel == LambdaSelector::phi_max ? "phi_max" : "psi_max") +
                          " = " + std::to_string(to) + " failed: " + c.error);
    }
    s = c.final_structure;
    y = c.final_y;
  };
  leg(LambdaSelector::phi_max, target.phi_max);
  leg(LambdaSelector::psi_max, target.psi_max);
  return solve(k, s, y, settings.newton);
}

}  // namespace climb
