#include "climb/nlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>

#include "json.hpp"

namespace climb {

const char* to_string(Procedure p) { return p == Procedure::cm ? "CM" : "SA"; }

std::size_t decision_size(Procedure p) { return p == Procedure::cm ? 15 : 9; }
std::size_t constraint_size(Procedure p) { return p == Procedure::cm ? 13 : 8; }

namespace {

std::size_t time_count(Procedure p) { return p == Procedure::cm ? 4 : 3; }

template <typename T>
Vec3<T> state_at(const std::vector<T>& X, std::size_t i) {
  return {X[i], X[i + 1], X[i + 2]};
}

template <typename T>
void push_diff(std::vector<T>& g, const Vec3<T>& a, const Vec3<T>& b) {
  for (std::size_t i = 0; i < 3; ++i) g.push_back(a[i] - b[i]);
}

// Evaluates (f, g) for either procedure with T = double or Dual<double>.
template <typename T>
void eval_t(const ModelConstants& k, Procedure p, const std::vector<T>& X, double alpha,
            const IntegratorSettings& flow, T& f, std::vector<T>& g) {
  const Vec3<T> x0{T(k.x0.h), T(k.x0.v), T(k.x0.m)};
  g.clear();
  if (p == Procedure::cm) {
    const T &t1 = X[0], &t2 = X[1], &t3 = X[2], &tf = X[3];
    const Vec3<T> x1 = state_at(X, 4), x2 = state_at(X, 7), x3 = state_at(X, 10);
    const Bounds b{value(X[13]), value(X[14])};
    const Vec3<T> e1 = flow_state(k, ArcKind::bang_minus, x0, t1, b, flow);
    const Vec3<T> e2 = flow_state(k, ArcKind::boundary_c1, x1, T(t2 - t1), b, flow);
    const Vec3<T> e3 = flow_state(k, ArcKind::boundary_c2, x2, T(t3 - t2), b, flow);
    const Vec3<T> xf = flow_state(k, ArcKind::bang_plus, x3, T(tf - t3), b, flow);
    g.push_back(xf[0] - k.h_f);
    g.push_back(xf[1] - k.v_f);
    push_diff(g, x1, e1);
    push_diff(g, x2, e2);
    push_diff(g, x3, e3);
    g.push_back(X[13] - cas(k, x1));
    g.push_back(X[14] - mach(k, x2));
    f = alpha * tf + (1.0 - alpha) * (k.x0.m - xf[2]);
  } else {
    const T &t1 = X[0], &t2 = X[1], &tf = X[2];
    const Vec3<T> x1 = state_at(X, 3), x2 = state_at(X, 6);
    const Bounds b{k.VMO, k.MMO};
    const Vec3<T> e1 = flow_state(k, ArcKind::bang_minus, x0, t1, b, flow);
    const Vec3<T> e2 = flow_state(k, ArcKind::singular, x1, T(t2 - t1), b, flow);
    const Vec3<T> xf = flow_state(k, ArcKind::bang_plus, x2, T(tf - t2), b, flow);
    g.push_back(xf[0] - k.h_f);
    g.push_back(xf[1] - k.v_f);
    push_diff(g, x1, e1);
    push_diff(g, x2, e2);
    f = alpha * tf + (1.0 - alpha) * (k.x0.m - xf[2]);
  }
}

void check_size(Procedure p, const Eigen::VectorXd& X) {
  if (static_cast<std::size_t>(X.size()) != decision_size(p)) {
    throw std::invalid_argument(std::string(to_string(p)) + " decision must have " +
                                std::to_string(decision_size(p)) + " entries");
  }
}

}  // namespace

NlpEval nlp_eval(const ModelConstants& k, Procedure p, const Eigen::VectorXd& X, double alpha,
                 const IntegratorSettings& flow) {
  check_size(p, X);
  std::vector<double> x(X.data(), X.data() + X.size());
  double f = 0.0;
  std::vector<double> g;
  eval_t(k, p, x, alpha, flow, f, g);
  NlpEval out;
  out.f = f;
  out.g = Eigen::Map<Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
  return out;
}

NlpEval cm_eval(const ModelConstants& k, const Eigen::VectorXd& X, double alpha,
                const IntegratorSettings& flow) {
  return nlp_eval(k, Procedure::cm, X, alpha, flow);
}

NlpEval sa_eval(const ModelConstants& k, const Eigen::VectorXd& X, double alpha,
                const IntegratorSettings& flow) {
  return nlp_eval(k, Procedure::sa, X, alpha, flow);
}

NlpJacobian nlp_derivatives(const ModelConstants& k, Procedure p, const Eigen::VectorXd& X,
                            double alpha, const IntegratorSettings& flow) {
  check_size(p, X);
  const auto n = X.size();
  const auto m = static_cast<Eigen::Index>(constraint_size(p));
  NlpJacobian out;
  out.grad.resize(n);
  out.jac.resize(m, n);
  using D = Dual<double>;
  for (Eigen::Index j = 0; j < n; ++j) {
    std::vector<D> x(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) x[i] = D{X[i], i == j ? 1.0 : 0.0};
    D f{};
    std::vector<D> g;
    eval_t(k, p, x, alpha, flow, f, g);
    if (j == 0) {
      out.value.f = f.v;
      out.value.g.resize(m);
      for (Eigen::Index i = 0; i < m; ++i) out.value.g[i] = g[i].v;
    }
    out.grad[j] = f.d;
    for (Eigen::Index i = 0; i < m; ++i) out.jac(i, j) = g[i].d;
  }
  return out;
}

Eigen::VectorXd nlp_seed(const ModelConstants& k, Procedure p, const std::vector<double>& times,
                         const IntegratorSettings& flow) {
  if (times.size() != time_count(p)) {
    throw std::invalid_argument(std::string(to_string(p)) + " seed needs " +
                                std::to_string(time_count(p)) + " switching times");
  }
  Eigen::VectorXd X(static_cast<Eigen::Index>(decision_size(p)));
  for (std::size_t i = 0; i < times.size(); ++i) X[static_cast<Eigen::Index>(i)] = times[i];
  const Bounds b{k.VMO, k.MMO};
  Vec3<double> x = k.x0.array();
  const std::vector<ArcKind> arcs =
      p == Procedure::cm
          ? std::vector<ArcKind>{ArcKind::bang_minus, ArcKind::boundary_c1, ArcKind::boundary_c2}
          : std::vector<ArcKind>{ArcKind::bang_minus, ArcKind::singular};
  double t = 0.0;
  Eigen::Index at = static_cast<Eigen::Index>(times.size());
  for (std::size_t a = 0; a < arcs.size(); ++a) {
    x = flow_state(k, arcs[a], x, times[a] - t, b, flow);
    t = times[a];
    for (int i = 0; i < 3; ++i) X[at++] = x[i];
  }
  if (p == Procedure::cm) {
    X[13] = cas(k, State::from({X[4], X[5], X[6]}));
    X[14] = mach(k, State::from({X[7], X[8], X[9]}));
  }
  return X;
}

std::vector<double> NlpResult::times() const {
  const std::size_t n = time_count(procedure);
  return {X.data(), X.data() + n};
}

double NlpResult::fuel(const ModelConstants& k, const IntegratorSettings& flow) const {
  const auto t = times();
  const std::size_t last = t.size() - 1;
  const std::size_t node = t.size() + 3 * (last - 1);
  const Vec3<double> x{X[node], X[node + 1], X[node + 2]};
  const Vec3<double> xf =
      flow_state(k, ArcKind::bang_plus, x, t[last] - t[last - 1], Bounds{k.VMO, k.MMO}, flow);
  return k.x0.m - xf[2];
}

double NlpResult::cas_bound() const { return procedure == Procedure::cm ? X[13] : NAN; }
double NlpResult::mach_bound() const { return procedure == Procedure::cm ? X[14] : NAN; }

namespace {

// Typical magnitudes used to bring variables and constraints to O(1).
Eigen::VectorXd variable_scale(Procedure p) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(decision_size(p)));
  const Eigen::Index nt = static_cast<Eigen::Index>(time_count(p));
  for (Eigen::Index i = 0; i < nt; ++i) d[i] = 100.0;
  for (Eigen::Index i = nt; i + 2 < nt + 3 * (nt - 1); i += 3) {
    d[i] = 1000.0;
    d[i + 1] = 10.0;
    d[i + 2] = 1000.0;
  }
  if (p == Procedure::cm) {
    d[13] = 10.0;
    d[14] = 0.01;
  }
  return d;
}

Eigen::VectorXd constraint_scale(Procedure p) {
  Eigen::VectorXd s(static_cast<Eigen::Index>(constraint_size(p)));
  s[0] = 1000.0;
  s[1] = 10.0;
  const Eigen::Index nm = p == Procedure::cm ? 3 : 2;
  for (Eigen::Index a = 0; a < nm; ++a) {
    s[2 + 3 * a] = 1000.0;
    s[3 + 3 * a] = 10.0;
    s[4 + 3 * a] = 1000.0;
  }
  if (p == Procedure::cm) {
    s[11] = 10.0;
    s[12] = 0.01;
  }
  return s;
}

constexpr double kObjectiveScale = 100.0;

struct Scaled {
  double f = 0.0;
  Eigen::VectorXd g, grad;
  Eigen::MatrixXd jac;
};

class Sqp {
 public:
  Sqp(const ModelConstants& k, const NlpProblem& pb, const NlpSettings& st)
      : k_(k), pb_(pb), st_(st), dx_(variable_scale(pb.procedure)),
        sg_(constraint_scale(pb.procedure)) {}

  NlpResult run(const Eigen::VectorXd& X0) {
    Eigen::VectorXd xi = X0.cwiseQuotient(dx_);
    const auto n = xi.size();
    Eigen::MatrixXd B = Eigen::MatrixXd::Identity(n, n);
    double mu = 1.0;
    Scaled cur = derivatives(xi);
    Eigen::VectorXd lambda = multipliers(cur);
    int it = 0;
    for (;; ++it) {
      const double kkt = kkt_norm(cur, lambda);
      if (kkt < st_.kkt_tol) return finish(xi, cur, lambda, kkt, it);
      if (it >= st_.max_iter) {
        throw NlpMaxIterations(std::string(to_string(pb_.procedure)) +
                               " SQP: no convergence after " + std::to_string(it) +
                               " iterations (KKT " + std::to_string(kkt) + ")");
      }
      const auto m = cur.g.size();
      Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + m, n + m);
      K.topLeftCorner(n, n) = B;
      K.topRightCorner(n, m) = cur.jac.transpose();
      K.bottomLeftCorner(m, n) = cur.jac;
      Eigen::VectorXd rhs(n + m);
      rhs << -cur.grad, -cur.g;
      Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
      if (!lu.isInvertible()) throw NlpRankDeficient("SQP: singular KKT matrix");
      const Eigen::VectorXd sol = lu.solve(rhs);
      const Eigen::VectorXd d = sol.head(n);
      const Eigen::VectorXd lqp = sol.tail(m);
      mu = std::max(mu, 1.1 * lqp.cwiseAbs().maxCoeff() + 1e-3);

      const double phi0 = cur.f + mu * cur.g.lpNorm<1>();
      const double slope = cur.grad.dot(d) - mu * cur.g.lpNorm<1>();
      Eigen::VectorXd next;
      bool accepted = false;
      // Full step, then the second-order correction, then backtracking.
      if (merit(xi + d, mu) <= phi0 + st_.armijo * slope) {
        next = xi + d;
        accepted = true;
      } else {
        const auto trial = value(xi + d);
        if (trial) {
          const Eigen::MatrixXd JJt = cur.jac * cur.jac.transpose();
          const Eigen::VectorXd corr =
              -cur.jac.transpose() * JJt.ldlt().solve(trial->g);
          if (merit(xi + d + corr, mu) <= phi0 + st_.armijo * slope) {
            next = xi + d + corr;
            accepted = true;
          }
        }
      }
      for (double a = st_.backtrack; !accepted && a >= st_.min_step; a *= st_.backtrack) {
        if (merit(xi + a * d, mu) <= phi0 + st_.armijo * a * slope) {
          next = xi + a * d;
          accepted = true;
        }
      }
      if (!accepted) {
        throw NlpLineSearchFailure(std::string(to_string(pb_.procedure)) +
                                   " SQP: line search failed (KKT " + std::to_string(kkt) + ")");
      }

      Scaled nxt = derivatives(next);
      const Eigen::VectorXd lnext = multipliers(nxt);
      const Eigen::VectorXd s = next - xi;
      Eigen::VectorXd y = (nxt.grad + nxt.jac.transpose() * lnext) -
                          (cur.grad + cur.jac.transpose() * lnext);
      bfgs_update(B, s, y);
      xi = next;
      cur = std::move(nxt);
      lambda = lnext;
    }
  }

 private:
  static void bfgs_update(Eigen::MatrixXd& B, const Eigen::VectorXd& s, Eigen::VectorXd y) {
    const Eigen::VectorXd Bs = B * s;
    const double sBs = s.dot(Bs);
    if (!(sBs > 0.0) || s.norm() == 0.0) return;
    double sy = s.dot(y);
    // Powell damping keeps B positive definite.
    if (sy < 0.2 * sBs) {
      const double theta = 0.8 * sBs / (sBs - sy);
      y = theta * y + (1.0 - theta) * Bs;
      sy = s.dot(y);
    }
    if (!(sy > 0.0) || !std::isfinite(sy)) {
      B.setIdentity();
      return;
    }
    B += y * y.transpose() / sy - Bs * Bs.transpose() / sBs;
  }

  std::optional<Scaled> value(const Eigen::VectorXd& xi) const {
    try {
      const NlpEval e =
          nlp_eval(k_, pb_.procedure, xi.cwiseProduct(dx_), pb_.alpha, st_.flow);
      if (!std::isfinite(e.f) || !e.g.allFinite()) return std::nullopt;
      Scaled s;
      s.f = e.f / kObjectiveScale;
      s.g = e.g.cwiseQuotient(sg_);
      return s;
    } catch (const std::runtime_error&) {
      return std::nullopt;
    } catch (const std::domain_error&) {
      return std::nullopt;
    }
  }

  double merit(const Eigen::VectorXd& xi, double mu) const {
    const auto s = value(xi);
    if (!s) return std::numeric_limits<double>::infinity();
    return s->f + mu * s->g.lpNorm<1>();
  }

  Scaled derivatives(const Eigen::VectorXd& xi) const {
    const NlpJacobian d =
        nlp_derivatives(k_, pb_.procedure, xi.cwiseProduct(dx_), pb_.alpha, st_.flow);
    Scaled s;
    s.f = d.value.f / kObjectiveScale;
    s.g = d.value.g.cwiseQuotient(sg_);
    s.grad = d.grad.cwiseProduct(dx_) / kObjectiveScale;
    s.jac = sg_.cwiseInverse().asDiagonal() * d.jac * dx_.asDiagonal();
    return s;
  }

  static Eigen::VectorXd multipliers(const Scaled& s) {
    const Eigen::MatrixXd Jt = s.jac.transpose();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Jt);
    qr.setThreshold(1e-12);
    if (qr.rank() < s.jac.rows()) {
      throw NlpRankDeficient("SQP: constraint Jacobian is rank deficient");
    }
    return qr.solve(-s.grad);
  }

  static double kkt_norm(const Scaled& s, const Eigen::VectorXd& lambda) {
    const Eigen::VectorXd gl = s.grad + s.jac.transpose() * lambda;
    return std::max(gl.lpNorm<Eigen::Infinity>(), s.g.lpNorm<Eigen::Infinity>());
  }

  NlpResult finish(const Eigen::VectorXd& xi, const Scaled& s, const Eigen::VectorXd& lambda,
                   double kkt, int it) const {
    NlpResult r;
    r.procedure = pb_.procedure;
    r.alpha = pb_.alpha;
    r.X = xi.cwiseProduct(dx_);
    r.objective = s.f * kObjectiveScale;
    r.constraint_norm = s.g.cwiseProduct(sg_).lpNorm<Eigen::Infinity>();
    r.kkt = kkt;
    r.multipliers = lambda;
    r.iterations = it;
    const auto t = r.times();
    r.ordered = t.front() >= 0.0 && std::is_sorted(t.begin(), t.end());
    return r;
  }

  const ModelConstants& k_;
  NlpProblem pb_;
  NlpSettings st_;
  Eigen::VectorXd dx_, sg_;
};

}  // namespace

NlpResult solve_nlp(const ModelConstants& k, const NlpProblem& problem, const Eigen::VectorXd& X0,
                    const NlpSettings& settings) {
  check_size(problem.procedure, X0);
  NlpResult r = Sqp(k, problem, settings).run(X0);
  if (r.ordered) return r;
  std::vector<double> t(X0.data(), X0.data() + time_count(problem.procedure));
  for (double& ti : t) ti = std::max(ti, 0.0);
  std::sort(t.begin(), t.end());
  return Sqp(k, problem, settings).run(nlp_seed(k, problem.procedure, t, settings.flow));
}

const std::vector<double>& table2_alphas() {
  static const std::vector<double> a{0.0,   0.056, 0.105, 0.158, 0.210, 0.263, 0.316,
                                     0.368, 0.421, 0.474, 0.526, 0.579, 0.631, 0.684,
                                     0.737, 0.790, 0.842, 0.895, 0.947, 1.000};
  return a;
}

std::vector<Table2Row> sweep_alpha(const ModelConstants& k, std::vector<double> alphas,
                                   const SweepSettings& settings) {
  std::sort(alphas.begin(), alphas.end());
  std::vector<Table2Row> rows;
  Eigen::VectorXd cm_start = nlp_seed(k, Procedure::cm, settings.cm_seed_times, settings.nlp.flow);
  Eigen::VectorXd sa_start = nlp_seed(k, Procedure::sa, settings.sa_seed_times, settings.nlp.flow);
  for (double alpha : alphas) {
    Table2Row row;
    row.alpha = alpha;
    try {
      row.cm = solve_nlp(k, {Procedure::cm, alpha}, cm_start, settings.nlp);
      row.cm_ok = row.cm.ordered;
      row.cm_fuel = row.cm.fuel(k, settings.nlp.flow);
      if (row.cm_ok) cm_start = row.cm.X;
    } catch (const std::exception& e) {
      row.error += std::string("CM: ") + e.what() + "; ";
    }
    try {
      row.sa = solve_nlp(k, {Procedure::sa, alpha}, sa_start, settings.nlp);
      row.sa_ok = row.sa.ordered;
      row.sa_fuel = row.sa.fuel(k, settings.nlp.flow);
      if (row.sa_ok) sa_start = row.sa.X;
    } catch (const std::exception& e) {
      row.error += std::string("SA: ") + e.what() + "; ";
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

double mean_relative_gap(const std::vector<Table2Row>& rows) {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : rows) {
    if (!r.cm_ok || !r.sa_ok) continue;
    sum += (r.cm_fuel - r.sa_fuel) / r.sa_fuel;
    sum += (r.cm.final_time() - r.sa.final_time()) / r.sa.final_time();
    n += 2;
  }
  return n ? sum / n : NAN;
}

void write_table2_csv(std::ostream& os, const std::vector<Table2Row>& rows) {
  os << "alpha,CAS,Mach,dm_CM,tf_CM,dm_SA,tf_SA\n";
  char buf[256];
  for (const auto& r : rows) {
    const double nan = NAN;
    std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n", r.alpha,
                  r.cm_ok ? r.cm.cas_bound() : nan, r.cm_ok ? r.cm.mach_bound() : nan,
                  r.cm_ok ? r.cm_fuel : nan, r.cm_ok ? r.cm.final_time() : nan,
                  r.sa_ok ? r.sa_fuel : nan, r.sa_ok ? r.sa.final_time() : nan);
    os << buf;
  }
}

std::string table2_json(const std::vector<Table2Row>& rows) {
  using nlohmann::ordered_json;
  auto num = [](bool ok, double v) { return ok && std::isfinite(v) ? ordered_json(v) : ordered_json(); };
  ordered_json out = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json j;
    j["alpha"] = r.alpha;
    j["CM"] = {{"CAS_m_per_s", num(r.cm_ok, r.cm.cas_bound())},
               {"Mach", num(r.cm_ok, r.cm.mach_bound())},
               {"delta_m_kg", num(r.cm_ok, r.cm_fuel)},
               {"t_f_s", num(r.cm_ok, r.cm_ok ? r.cm.final_time() : NAN)},
               {"kkt", num(r.cm_ok, r.cm.kkt)}};
    j["SA"] = {{"delta_m_kg", num(r.sa_ok, r.sa_fuel)},
               {"t_f_s", num(r.sa_ok, r.sa_ok ? r.sa.final_time() : NAN)},
               {"kkt", num(r.sa_ok, r.sa.kkt)}};
    if (!r.error.empty()) j["error"] = r.error;
    out.push_back(j);
  }
  return out.dump(2);
}

}  // namespace climb
