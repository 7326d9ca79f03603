// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "check_suite.hpp"
#include "climb/homotopy.hpp"
#include "climb/nlp.hpp"

using namespace climb;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

bool within_rel(double x, double ref, double rel) { return std::abs(x - ref) <= rel * std::abs(ref); }
bool within_abs(double x, double ref, double tol) { return std::abs(x - ref) <= tol; }

int failures = 0;

void report(int id, const char* name, const std::function<Verdict()>& run) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = run();
  } catch (const std::exception& e) {
    v.pass = false;
    v.detail = std::string("exception: ") + e.what();
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!v.pass) ++failures;
  std::printf("%s criterion %d (%s) [%.1f s]: %s\n", v.pass ? "PASS" : "FAIL", id, name, dt, v.detail.c_str());
  std::fflush(stdout);
}

// Reference rows of the cost-index comparison: alpha, CAS, Mach, dm_CM, tf_CM, dm_SA, tf_SA.
struct RefRow {
  double alpha, cas, mach, dm_cm, tf_cm, dm_sa, tf_sa;
};
const std::vector<RefRow> kReference = {
    {0.000, 128.9, 0.6611, 862.7, 677.1, 860.0, 675.4}, {0.056, 129.4, 0.6631, 862.8, 675.7, 860.1, 674.0},
    {0.105, 129.9, 0.6651, 862.9, 674.3, 860.2, 672.6}, {0.158, 130.4, 0.6670, 863.1, 673.0, 860.4, 671.2},
    {0.210, 131.0, 0.6690, 863.4, 671.7, 860.7, 669.9}, {0.263, 131.6, 0.6709, 863.8, 670.5, 861.1, 668.6},
    {0.316, 132.2, 0.6729, 864.2, 669.3, 861.6, 667.4}, {0.368, 132.8, 0.6748, 864.8, 668.2, 862.2, 666.3},
    {0.421, 133.5, 0.6767, 865.5, 667.1, 862.9, 665.2}, {0.474, 134.2, 0.6787, 866.4, 666.1, 863.7, 664.1},
    {0.526, 134.9, 0.6808, 867.3, 665.1, 864.7, 663.2}, {0.579, 135.6, 0.6825, 868.4, 664.2, 865.8, 662.3},
    {0.631, 136.4, 0.6844, 869.7, 663.4, 867.1, 661.4}, {0.684, 137.2, 0.6863, 871.1, 662.7, 868.5, 660.7},
    {0.737, 138.1, 0.6882, 872.7, 662.0, 870.1, 660.0}, {0.790, 139.0, 0.6901, 874.5, 661.5, 872.0, 659.5},
    {0.842, 139.9, 0.6920, 876.6, 661.0, 874.0, 659.0}, {0.895, 140.9, 0.6939, 878.8, 660.7, 876.3, 658.7},
    {0.947, 142.0, 0.6959, 881.4, 660.4, 878.8, 658.5}, {1.000, 143.2, 0.6978, 884.3, 660.4, 881.6, 658.4},
};

// True when b is a with exactly one arc inserted (or vice versa).
bool one_arc_apart(const std::vector<ArcKind>& a, const std::vector<ArcKind>& b) {
  const auto& shorter = a.size() < b.size() ? a : b;
  const auto& longer = a.size() < b.size() ? b : a;
  if (longer.size() != shorter.size() + 1) return false;
  for (std::size_t i = 0; i < longer.size(); ++i) {
    std::vector<ArcKind> cut = longer;
    cut.erase(cut.begin() + static_cast<long>(i));
    if (cut == shorter) return true;
  }
  return false;
}

}  // namespace

int main() {
  const ModelConstants k;
  const int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  ShootingResult unconstrained;
  bool have_unconstrained = false;
  try {
    unconstrained = unconstrained_solution(k);
    have_unconstrained = true;
  } catch (const std::exception& e) {
    std::printf("note: unconstrained extremal failed: %s\n", e.what());
  }
  auto need_unconstrained = [&] {
    if (!have_unconstrained) throw std::runtime_error("unconstrained extremal unavailable");
  };

  report(8, "speed-function anchor", [&] {
    Verdict v;
    const EndpointSpeeds e = endpoint_speeds(k);
    v.note(fmt("phi0 = %.3f m/s, psi0 = %.4f", e.phi0, e.psi0));
    v.require(within_abs(e.phi0, 107.0, 1.0), "phi0 outside 107 +- 1");
    v.require(within_abs(e.psi0, 0.63, 0.01), "psi0 outside 0.63 +- 0.01");
    return v;
  });

  report(2, "unconstrained optimum", [&] {
    need_unconstrained();
    Verdict v;
    const double tf = unconstrained.final_time(), dm = unconstrained.fuel(k);
    v.note(fmt("t_f = %.3f s, dm = %.3f kg, |S| = %.2e", tf, dm, unconstrained.residual_norm));
    v.require(within_rel(tf, 658.0, 0.005), "t_f outside 658 +- 0.5%");
    v.require(within_rel(dm, 882.0, 0.005), "dm outside 882 +- 0.5%");
    v.require(unconstrained.validation.passed(), "validation failed");
    return v;
  });

  report(1, "singular-boundary shooting reproduction", [&] {
    need_unconstrained();
    Verdict v;
    const ShootingResult r = solve_by_continuation(k, unconstrained, Bounds{k.VMO, 0.7});
    const auto t = r.times();
    v.require(r.structure.label() == "-sc2+", "structure " + r.structure.label());
    if (t.size() == 5) {
      v.note(fmt("times (%.3f, %.3f, %.3f, %.3f) s", t[1], t[2], t[3], t[4]));
      const double ref[4] = {88.61, 455.7, 651.46, 661.37};
      for (int i = 0; i < 4; ++i) {
        v.require(within_rel(t[i + 1], ref[i], 0.01), fmt("t%d off %.3f%%", i + 1, 100 * (t[i + 1] / ref[i] - 1)));
      }
    }
    const Vec3<double> p0 = r.p0();
    const double pref[3] = {3.180e-2, 6.594e-1, -2.300e-1};
    v.note(fmt("p0 (%.4e, %.4e, %.4e), |S| = %.2e", p0[0], p0[1], p0[2], r.residual_norm));
    v.require(r.residual_norm < 1e-9, "residual");
    for (int i = 0; i < 3; ++i) v.require(within_rel(p0[i], pref[i], 0.02), fmt("p0[%d] off", i));
    return v;
  });

  Cartography cart;
  bool have_cart = false;
  report(4, "cartography 60 x 60", [&] {
    need_unconstrained();
    Verdict v;
    GridSpec g;
    g.phi_hi = k.VMO;
    g.psi_hi = k.MMO;
    g.n_phi = g.n_psi = 60;
    cart = build_cartography(k, unconstrained, g, {}, jobs);
    have_cart = true;
    std::map<std::string, int> count;
    int unresolved = 0;
    for (const auto& c : cart.cells) {
      if (c.resolved) ++count[c.label]; else ++unresolved;
    }
    std::string labels;
    for (const auto& [l, n] : count) labels += fmt("%s:%d ", l.c_str(), n);
    v.note("labels " + labels + fmt("unresolved %d", unresolved));
    std::set<std::string> expect;
    for (const auto& a : structure_catalog()) expect.insert(structure_label(a));
    std::set<std::string> got;
    for (const auto& [l, n] : count) got.insert(l);
    v.require(got == expect, "label set differs from the six-structure catalog");
    v.require(unresolved == 0, "unresolved cells");
    v.require(cart.at(0, 0).label == "-c1c2+", "low corner is " + cart.at(0, 0).label);
    v.require(cart.at(59, 59).label == "-s+", "high corner is " + cart.at(59, 59).label);
    v.require(cart.at(0, 59).label == "-c1+", "low-phi/high-psi corner is " + cart.at(0, 59).label);
    v.require(cart.at(59, 0).label == "-sc2+", "high-phi/low-psi corner is " + cart.at(59, 0).label);
    // Neighbouring cells differ by one arc, except next to the point
    // (phi_s, psi_s) where four regions meet.
    const double dphi = (g.phi_hi - g.phi_lo) / 59, dpsi = (g.psi_hi - g.psi_lo) / 59;
    int bad = 0;
    for (int i = 0; i < 60; ++i) {
      for (int j = 0; j < 60; ++j) {
        for (auto [di, dj] : {std::pair{1, 0}, std::pair{0, 1}}) {
          if (i + di >= 60 || j + dj >= 60) continue;
          const auto& a = cart.at(i, j);
          const auto& b = cart.at(i + di, j + dj);
          if (a.label == b.label || one_arc_apart(parse_structure(a.label), parse_structure(b.label))) continue;
          const bool near = std::abs(a.phi - cart.landmarks.phi_s) <= 1.5 * dphi &&
                            std::abs(a.psi - cart.landmarks.psi_s) <= 1.5 * dpsi;
          if (!near) ++bad;
        }
      }
    }
    v.require(bad == 0, fmt("%d non-adjacent neighbour pairs", bad));
    const FuelMinimum& fm = cart.fuel_min;
    v.note(fmt("fuel minimum %.3f kg at (%.3f, %.4f) %s", fm.fuel, fm.phi, fm.psi, fm.label.c_str()));
    v.require(within_abs(fm.phi, 128.9, 0.5), "fuel-minimum phi outside 128.9 +- 0.5");
    v.require(within_abs(fm.psi, 0.661, 0.005), "fuel-minimum psi outside 0.661 +- 0.005");
    return v;
  });

  report(3, "homotopy landmarks", [&] {
    need_unconstrained();
    Verdict v;
    Landmarks lm;
    if (have_cart) {
      lm = cart.landmarks;
    } else {
      GridSpec g;
      g.phi_hi = k.VMO;
      g.psi_hi = k.MMO;
      lm = unconstrained_landmarks(k, unconstrained);
      row_landmarks(k, phi_row(k, unconstrained, g), lm);
    }
    v.note(fmt("phi_s = %.3f m/s, psi_s = %.4f (phi_c1 = %.3f, psi_c2 = %.4f)", lm.phi_s, lm.psi_s, lm.phi_c1,
               lm.psi_c2));
    v.require(within_abs(lm.phi_s, 129.8, 0.5), "phi_s outside 129.8 +- 0.5");
    v.require(within_abs(lm.psi_s, 0.734, 0.005), "psi_s outside 0.734 +- 0.005");
    return v;
  });

  report(5, "cost-index table", [&] {
    Verdict v;
    std::vector<double> alphas;
    for (const auto& r : kReference) alphas.push_back(r.alpha);
    const auto rows = sweep_alpha(k, alphas);
    int off = 0, dominated = 0, failed = 0;
    double worst_t = 0.0, worst_m = 0.0, worst_cas = 0.0, worst_mach = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      const auto& ref = kReference[i];
      if (!(r.cm_ok && r.sa_ok)) {
        ++failed;
        continue;
      }
      const double e[4] = {std::abs(r.cm_fuel / ref.dm_cm - 1), std::abs(r.cm.final_time() / ref.tf_cm - 1),
                           std::abs(r.sa_fuel / ref.dm_sa - 1), std::abs(r.sa.final_time() / ref.tf_sa - 1)};
      worst_m = std::max({worst_m, e[0], e[2]});
      worst_t = std::max({worst_t, e[1], e[3]});
      worst_cas = std::max(worst_cas, std::abs(r.cm.cas_bound() - ref.cas));
      worst_mach = std::max(worst_mach, std::abs(r.cm.mach_bound() - ref.mach));
      if (*std::max_element(e, e + 4) > 0.005 || std::abs(r.cm.cas_bound() - ref.cas) > 0.5 ||
          std::abs(r.cm.mach_bound() - ref.mach) > 0.005) {
        ++off;
      }
      const double a = r.alpha;
      const double cost_cm = a * r.cm.final_time() + (1 - a) * r.cm_fuel;
      const double cost_sa = a * r.sa.final_time() + (1 - a) * r.sa_fuel;
      if (cost_sa > cost_cm) ++dominated;
    }
    const double gap = mean_relative_gap(rows);
    v.note(fmt("%zu rows, worst dm %.3f%%, worst t_f %.3f%%, worst CAS %.3f, worst Mach %.4f, mean gap %.3f%%",
               rows.size(), 100 * worst_m, 100 * worst_t, worst_cas, worst_mach, 100 * gap));
    v.require(rows.size() == 20, "row count");
    v.require(failed == 0, fmt("%d rows failed to converge", failed));
    v.require(off == 0, fmt("%d rows outside tolerance", off));
    v.require(dominated == 0, fmt("%d rows where CM beats SA", dominated));
    v.require(within_abs(gap, 0.003, 0.0015), "mean gap outside 0.3% +- 0.15");
    return v;
  });

  report(6, "fuel optima", [&] {
    Verdict v;
    const NlpSettings st;
    const NlpResult cm = solve_nlp(k, {Procedure::cm, 0.0}, nlp_seed(k, Procedure::cm, {32, 450, 676, 677}, st.flow), st);
    const NlpResult sa = solve_nlp(k, {Procedure::sa, 0.0}, nlp_seed(k, Procedure::sa, {47, 668, 675}, st.flow), st);
    const auto tc = cm.times(), ts = sa.times();
    const double dcm = cm.fuel(k, st.flow), dsa = sa.fuel(k, st.flow);
    v.note(fmt("CM (%.2f, %.2f, %.2f, %.2f) s %.3f kg", tc[0], tc[1], tc[2], tc[3], dcm));
    v.note(fmt("SA (%.2f, %.2f, %.2f) s %.3f kg", ts[0], ts[1], ts[2], dsa));
    const double rc[4] = {32, 450, 676, 677}, rs[3] = {47, 668, 675};
    for (int i = 0; i < 4; ++i) v.require(within_rel(tc[i], rc[i], 0.02), fmt("CM t%d", i + 1));
    for (int i = 0; i < 3; ++i) v.require(within_rel(ts[i], rs[i], 0.02), fmt("SA t%d", i + 1));
    v.require(within_rel(dcm, 863.0, 0.005), "CM dm");
    v.require(within_rel(dsa, 860.0, 0.005), "SA dm");
    v.require(cm.kkt < 1e-7 && sa.kkt < 1e-7, "KKT above 1e-7");
    return v;
  });

  report(7, "property suite", [&] {
    Verdict v;
    int failed = 0;
    for (const auto& c : climbopt::run_check_suite(k)) {
      if (!c.passed) {
        ++failed;
        v.require(false, c.name + " (" + c.detail + ")");
      }
    }
    v.note(fmt("check suite: %d failed", failed));
    need_unconstrained();
    // One accepted extremal per catalog structure.
    const std::vector<std::pair<std::string, Bounds>> samples = {
        {"-s+", {170.0, 0.78}},   {"-c1s+", {140.0, 0.78}},  {"-sc2+", {170.0, 0.68}},
        {"-c1sc2+", {145.0, 0.69}}, {"-c1c2+", {118.0, 0.66}}, {"-c1+", {114.0, 0.79}},
    };
    double sing = 0.0, bnd = 0.0;
    for (const auto& [label, b] : samples) {
      const ShootingResult r = solve_by_continuation(k, unconstrained, b);
      v.require(r.structure.label() == label, "expected " + label + ", got " + r.structure.label());
      for (const auto& c : r.validation.checks) {
        if (!c.passed) v.require(false, r.structure.label() + ": " + c.name + " margin " + fmt("%.3g", c.margin));
      }
      for (const auto& a : r.arcs) {
        for (const auto& z : a.traj.nodes()) {
          if (a.arc == ArcKind::singular) sing = std::max({sing, std::abs(lift_h1(k, z)), std::abs(lift_h01(k, z))});
          if (is_boundary(a.arc)) {
            const ConstraintId id = constraint_of(a.arc);
            bnd = std::max(bnd, std::abs(constraint(k, id, state_part(z), bound_of(id, r.structure.bounds))));
          }
        }
      }
      if (label == "-c1sc2+") {
        const ShootingResult again = solve_by_continuation(k, unconstrained, b);
        v.require(again.y == r.y, "continuation not deterministic");
      }
    }
    v.note(fmt("six structures validated, max |H1|,|H01| = %.2e, max |c| = %.2e", sing, bnd));
    v.require(sing <= 1e-8, "singular invariants");
    v.require(bnd <= 1e-7, "boundary invariants");
    return v;
  });

  std::printf("%s: %d criterion(s) failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
