#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <sstream>

#include "climb/nlp.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace climb;
using Catch::Approx;

namespace {

const NlpSettings kSettings;

NlpResult solve_at(Procedure p, double alpha, const std::vector<double>& times) {
  const ModelConstants k;
  return solve_nlp(k, {p, alpha}, nlp_seed(k, p, times, kSettings.flow), kSettings);
}

const NlpResult& sa0() {
  static const NlpResult r = solve_at(Procedure::sa, 0.0, {47.0, 668.0, 675.0});
  return r;
}
const NlpResult& cm0() {
  static const NlpResult r = solve_at(Procedure::cm, 0.0, {32.0, 450.0, 676.0, 677.0});
  return r;
}
const NlpResult& sa1() {
  static const NlpResult r = solve_at(Procedure::sa, 1.0, {72.0, 645.0, 658.0});
  return r;
}
const NlpResult& cm1() {
  static const NlpResult r = solve_at(Procedure::cm, 1.0, {32.0, 450.0, 660.0, 661.0});
  return r;
}

}  // namespace

TEST_CASE("decision and constraint sizes", "[nlp]") {
  CHECK(decision_size(Procedure::cm) == 15);
  CHECK(decision_size(Procedure::sa) == 9);
  CHECK(constraint_size(Procedure::cm) == 13);
  CHECK(constraint_size(Procedure::sa) == 8);
  CHECK(std::string(to_string(Procedure::cm)) == "CM");
  CHECK(table2_alphas().size() == 20);
  CHECK(table2_alphas().front() == 0.0);
  CHECK(table2_alphas().back() == 1.0);
}

TEST_CASE("seeds satisfy the matching constraints", "[nlp]") {
  const ModelConstants k;
  for (Procedure p : {Procedure::sa, Procedure::cm}) {
    const std::vector<double> t = p == Procedure::sa ? std::vector<double>{47.0, 668.0, 675.0}
                                                     : std::vector<double>{32.0, 450.0, 676.0, 677.0};
    const Eigen::VectorXd X = nlp_seed(k, p, t, kSettings.flow);
    CHECK(static_cast<std::size_t>(X.size()) == decision_size(p));
    const NlpEval e = nlp_eval(k, p, X, 0.5, kSettings.flow);
    CHECK(static_cast<std::size_t>(e.g.size()) == constraint_size(p));
    // Only the two terminal rows may be violated at a seed.
    CHECK(e.g.tail(e.g.size() - 2).lpNorm<Eigen::Infinity>() <= 1e-9);
  }
}

TEST_CASE("objective is the cost index", "[nlp]") {
  const ModelConstants k;
  const Eigen::VectorXd X = nlp_seed(k, Procedure::sa, {47.0, 668.0, 675.0}, kSettings.flow);
  const double tf = X[2];
  const NlpEval e0 = sa_eval(k, X, 0.0, kSettings.flow);
  const NlpEval e1 = sa_eval(k, X, 1.0, kSettings.flow);
  CHECK(e1.f == Approx(tf));
  const NlpEval eh = sa_eval(k, X, 0.5, kSettings.flow);
  CHECK(eh.f == Approx(0.5 * e0.f + 0.5 * e1.f).epsilon(1e-12));
}

TEST_CASE("forward-mode derivatives match finite differences", "[nlp]") {
  const ModelConstants k;
  for (Procedure p : {Procedure::sa, Procedure::cm}) {
    const std::vector<double> t = p == Procedure::sa ? std::vector<double>{60.0, 600.0, 660.0}
                                                     : std::vector<double>{40.0, 400.0, 650.0, 665.0};
    const Eigen::VectorXd X = nlp_seed(k, p, t, kSettings.flow);
    const NlpJacobian d = nlp_derivatives(k, p, X, 0.3, kSettings.flow);
    for (Eigen::Index j = 0; j < X.size(); ++j) {
      const double h = 1e-5 * std::max(1.0, std::abs(X[j]));
      Eigen::VectorXd xp = X, xm = X;
      xp[j] += h;
      xm[j] -= h;
      const NlpEval ep = nlp_eval(k, p, xp, 0.3, kSettings.flow), em = nlp_eval(k, p, xm, 0.3, kSettings.flow);
      const Eigen::VectorXd col = (ep.g - em.g) / (2 * h);
      const double gf = (ep.f - em.f) / (2 * h);
      INFO(to_string(p) << " column " << j);
      CHECK(d.grad[j] == Approx(gf).epsilon(1e-5).margin(1e-6));
      CHECK((d.jac.col(j) - col).lpNorm<Eigen::Infinity>() <= 1e-5 * std::max(1.0, col.lpNorm<Eigen::Infinity>()));
    }
  }
}

TEST_CASE("zero-length boundary arcs are admissible", "[nlp]") {
  const ModelConstants k;
  // t2 = t1: the CAS arc collapses and x2 = x1.
  const Eigen::VectorXd X = nlp_seed(k, Procedure::cm, {80.0, 80.0, 640.0, 660.0}, kSettings.flow);
  for (int i = 0; i < 3; ++i) CHECK(X[4 + 3 + i] == X[4 + i]);
  const NlpEval e = cm_eval(k, X, 1.0, kSettings.flow);
  CHECK(std::isfinite(e.f));
  CHECK(e.g.segment(2, 9).lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("SA fuel optimum", "[nlp]") {
  const ModelConstants k;
  const NlpResult& r = sa0();
  CHECK(r.kkt < 1e-7);
  CHECK(r.constraint_norm < 1e-6);
  CHECK(r.ordered);
  const auto t = r.times();
  CHECK(t[0] == Approx(47.0).epsilon(0.02));
  CHECK(t[1] == Approx(668.0).epsilon(0.02));
  CHECK(t[2] == Approx(675.0).epsilon(0.02));
  CHECK(r.fuel(k, kSettings.flow) == Approx(860.0).epsilon(0.005));
  CHECK(std::isnan(r.cas_bound()));
}

TEST_CASE("CM fuel optimum", "[nlp]") {
  const ModelConstants k;
  const NlpResult& r = cm0();
  CHECK(r.kkt < 1e-7);
  CHECK(r.ordered);
  const auto t = r.times();
  CHECK(t[0] == Approx(32.0).epsilon(0.02));
  CHECK(t[1] == Approx(450.0).epsilon(0.02));
  CHECK(t[2] == Approx(676.0).epsilon(0.02));
  CHECK(t[3] == Approx(677.0).epsilon(0.02));
  CHECK(r.fuel(k, kSettings.flow) == Approx(863.0).epsilon(0.005));
  CHECK(r.cas_bound() == Approx(128.9).margin(0.5));
  CHECK(r.mach_bound() == Approx(0.661).margin(0.005));
}

TEST_CASE("SA time optimum coincides with the shooting extremal", "[nlp]") {
  const ModelConstants k;
  const NlpResult& r = sa1();
  const ShootingResult& u = test_support::unconstrained();
  CHECK(r.kkt < 1e-7);
  CHECK(r.final_time() == Approx(u.final_time()).margin(0.05));
  CHECK(r.fuel(k, kSettings.flow) == Approx(u.fuel(k)).margin(0.5));
  const auto ts = u.times();
  CHECK(r.times()[0] == Approx(ts[1]).margin(0.5));
  CHECK(r.times()[1] == Approx(ts[2]).margin(0.5));
}

TEST_CASE("SA dominates CM", "[nlp][property]") {
  const ModelConstants k;
  CHECK(sa0().objective <= cm0().objective);
  CHECK(sa1().objective <= cm1().objective);
  CHECK(cm1().kkt < 1e-7);
  // Time weight shortens the climb and costs fuel.
  CHECK(cm1().final_time() < cm0().final_time());
  CHECK(cm1().fuel(k, kSettings.flow) > cm0().fuel(k, kSettings.flow));
  CHECK(sa1().final_time() < sa0().final_time());
}

TEST_CASE("solver reports multipliers and iteration counts", "[nlp]") {
  const ModelConstants k;
  const NlpResult& r = sa0();
  CHECK(static_cast<std::size_t>(r.multipliers.size()) == constraint_size(Procedure::sa));
  CHECK(r.iterations > 0);
  CHECK(r.iterations <= kSettings.max_iter);
}

TEST_CASE("iteration cap is reported", "[nlp]") {
  const ModelConstants k;
  NlpSettings st = kSettings;
  st.max_iter = 1;
  const Eigen::VectorXd X = nlp_seed(k, Procedure::sa, {60.0, 600.0, 660.0}, st.flow);
  CHECK_THROWS_AS(solve_nlp(k, {Procedure::sa, 0.5}, X, st), NlpError);
}

TEST_CASE("short sweep and gap", "[nlp]") {
  const ModelConstants k;
  const auto rows = sweep_alpha(k, {0.0, 0.5});
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) {
    CHECK(row.cm_ok);
    CHECK(row.sa_ok);
    CHECK(row.sa_fuel <= row.cm_fuel);
    CHECK(row.sa.final_time() <= row.cm.final_time());
  }
  const double gap = mean_relative_gap(rows);
  CHECK(gap > 0.0);
  CHECK(gap < 0.01);
  std::ostringstream os;
  write_table2_csv(os, rows);
  CHECK(os.str().rfind("alpha,CAS,Mach,dm_CM,tf_CM,dm_SA,tf_SA\n", 0) == 0);
  const auto j = nlohmann::json::parse(table2_json(rows));
  CHECK(j.dump().find("alpha") != std::string::npos);
}

TEST_CASE("an intermediate alpha is bracketed by its neighbours", "[nlp][property]") {
  const ModelConstants k;
  const auto rows = sweep_alpha(k, {0.474, 0.5, 0.526});
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) REQUIRE((r.cm_ok && r.sa_ok));
  auto between = [](double a, double x, double b) { return std::min(a, b) <= x && x <= std::max(a, b); };
  CHECK(between(rows[0].cm_fuel, rows[1].cm_fuel, rows[2].cm_fuel));
  CHECK(between(rows[0].sa_fuel, rows[1].sa_fuel, rows[2].sa_fuel));
  CHECK(between(rows[0].cm.final_time(), rows[1].cm.final_time(), rows[2].cm.final_time()));
  CHECK(between(rows[0].sa.final_time(), rows[1].sa.final_time(), rows[2].sa.final_time()));
  CHECK(between(rows[0].cm.cas_bound(), rows[1].cm.cas_bound(), rows[2].cm.cas_bound()));
  CHECK(between(rows[0].cm.mach_bound(), rows[1].cm.mach_bound(), rows[2].cm.mach_bound()));
}
