#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "climb/flow.hpp"

namespace climb {

/// CAS/Mach procedure (sigma- sigma_c1 sigma_c2 sigma+) or singular-arc
/// procedure (sigma- sigma_s sigma+), both over state-only feedback flows.
enum class Procedure { cm, sa };
const char* to_string(Procedure p);

/// CM decision X = (t1, t2, t3, t_f, x1, x2, x3, phi_max, psi_max), 15 reals.
/// SA decision X = (t1, t2, t_f, x1, x2), 9 reals.
std::size_t decision_size(Procedure p);
std::size_t constraint_size(Procedure p);

struct NlpEval {
  double f = 0.0;
  Eigen::VectorXd g;
};

struct NlpJacobian {
  NlpEval value;
  Eigen::VectorXd grad;  ///< df/dX
  Eigen::MatrixXd jac;   ///< dg/dX
};

/// f = alpha t_f + (1 - alpha)(m0 - m_f); g = (b(x_f), x1 - e^{t1 F-}(x0),
/// x2 - e^{(t2-t1) F_c1}(x1), x3 - e^{(t3-t2) F_c2}(x2), phi_max - phi(x1),
/// psi_max - psi(x2)) with x_f = e^{(t_f-t3) F+}(x3).
NlpEval cm_eval(const ModelConstants& k, const Eigen::VectorXd& X, double alpha,
                const IntegratorSettings& flow = {});
/// f as above with x_f = e^{(t_f-t2) F+}(x2); g = (b(x_f), x1 - e^{t1 F-}(x0),
/// x2 - e^{(t2-t1) F_s}(x1)).
NlpEval sa_eval(const ModelConstants& k, const Eigen::VectorXd& X, double alpha,
                const IntegratorSettings& flow = {});
NlpEval nlp_eval(const ModelConstants& k, Procedure p, const Eigen::VectorXd& X, double alpha,
                 const IntegratorSettings& flow = {});

/// Value, gradient and constraint Jacobian by forward-mode differentiation
/// through the integrator (one pass per decision variable).
NlpJacobian nlp_derivatives(const ModelConstants& k, Procedure p, const Eigen::VectorXd& X,
                            double alpha, const IntegratorSettings& flow = {});

/// Feasible-matching seed: the states are obtained by flowing x0 with the
/// given switching times (CM: t1, t2, t3, t_f; SA: t1, t2, t_f). For CM the
/// bounds are phi(x1) and psi(x2).
Eigen::VectorXd nlp_seed(const ModelConstants& k, Procedure p, const std::vector<double>& times,
                         const IntegratorSettings& flow = {});

class NlpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class NlpMaxIterations : public NlpError {
 public:
  using NlpError::NlpError;
};
class NlpLineSearchFailure : public NlpError {
 public:
  using NlpError::NlpError;
};
class NlpRankDeficient : public NlpError {
 public:
  using NlpError::NlpError;
};

struct NlpSettings {
  double kkt_tol = 1e-7;  ///< on the scaled KKT residual (inf-norm)
  int max_iter = 200;
  double armijo = 1e-4;
  double backtrack = 0.5;
  double min_step = 1e-10;
  IntegratorSettings flow = [] {
    IntegratorSettings s;
    s.rel_tol = 1e-11;
    s.abs_tol = 1e-11;
    return s;
  }();
};

struct NlpProblem {
  Procedure procedure = Procedure::sa;
  double alpha = 1.0;
};

struct NlpResult {
  Procedure procedure = Procedure::sa;
  double alpha = 1.0;
  Eigen::VectorXd X;
  double objective = NAN;
  double constraint_norm = NAN;  ///< ||g||_inf, physical units
  double kkt = NAN;              ///< scaled KKT residual
  Eigen::VectorXd multipliers;   ///< for the scaled constraints
  int iterations = 0;
  bool ordered = false;          ///< 0 <= t1 <= ... <= t_f

  [[nodiscard]] std::vector<double> times() const;
  [[nodiscard]] double final_time() const { return times().back(); }
  [[nodiscard]] double fuel(const ModelConstants& k, const IntegratorSettings& flow = {}) const;
  /// Optimized bounds (CM only; NaN for SA).
  [[nodiscard]] double cas_bound() const;
  [[nodiscard]] double mach_bound() const;
};

/// Equality-constrained SQP: BFGS Lagrangian Hessian (damped update),
/// least-squares multipliers, l1 merit with Armijo backtracking and a
/// second-order correction. Variables and constraints are scaled to O(1).
/// Time ordering is checked afterwards; on violation the solve is rerun once
/// from the seed with sorted times.
NlpResult solve_nlp(const ModelConstants& k, const NlpProblem& problem, const Eigen::VectorXd& X0,
                    const NlpSettings& settings = {});

/// Cost-index grid of the comparison table (20 values from 0 to 1).
const std::vector<double>& table2_alphas();

struct Table2Row {
  double alpha = 0.0;
  bool cm_ok = false;
  bool sa_ok = false;
  NlpResult cm;
  NlpResult sa;
  double cm_fuel = NAN;
  double sa_fuel = NAN;
  std::string error;
};

struct SweepSettings {
  NlpSettings nlp;
  /// Seeds for the first row (alpha = 0 optima of both procedures).
  std::vector<double> cm_seed_times{32.0, 450.0, 676.0, 677.0};
  std::vector<double> sa_seed_times{47.0, 668.0, 675.0};
};

/// Solves both procedures for every alpha in increasing order, each row
/// warm-started from the previous optimum. Row failures are recorded and the
/// sweep continues from the last good optimum.
std::vector<Table2Row> sweep_alpha(const ModelConstants& k, std::vector<double> alphas,
                                   const SweepSettings& settings = {});

/// Mean over rows and over (fuel, final time) of (CM - SA) / SA.
double mean_relative_gap(const std::vector<Table2Row>& rows);

/// Columns alpha, CAS, Mach, dm_CM, tf_CM, dm_SA, tf_SA.
void write_table2_csv(std::ostream& os, const std::vector<Table2Row>& rows);
std::string table2_json(const std::vector<Table2Row>& rows);

}  // namespace climb
