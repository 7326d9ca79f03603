#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "climb/flow.hpp"

namespace climb {

/// Ordered arc sequence with the active bounds and the cost-index weight.
struct ArcStructure {
  std::vector<ArcKind> arcs;
  Bounds bounds;
  double alpha = 1.0;

  /// Number of interior junctions k.
  [[nodiscard]] std::size_t junctions() const { return arcs.size() - 1; }
  /// 3 + (k + 1) + 6k.
  [[nodiscard]] std::size_t dimension() const { return 3 + arcs.size() + 6 * junctions(); }
  [[nodiscard]] std::string label() const;
  /// Throws StructureError unless the sequence starts with '-', ends with '+'
  /// and has no two consecutive arcs of the same kind.
  void validate() const;
};

class StructureError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Compact label such as "-c1sc2+".
std::string structure_label(const std::vector<ArcKind>& arcs);
std::vector<ArcKind> parse_structure(const std::string& label);
/// Typeset label such as "σ−σc1σsσc2σ+".
std::string pretty_label(const std::vector<ArcKind>& arcs);

/// The six structures met over [phi0, VMO] x [psi0, MMO].
const std::vector<std::vector<ArcKind>>& structure_catalog();
bool in_catalog(const std::vector<ArcKind>& arcs);

/// Views into the shooting unknown vector
/// y = (p0, t_1..t_k, t_f, z_1..z_k).
struct ShootingLayout {
  std::size_t k;
  explicit ShootingLayout(const ArcStructure& s) : k(s.junctions()) {}
  [[nodiscard]] std::size_t size() const { return 3 + (k + 1) + 6 * k; }
  [[nodiscard]] static std::size_t p0() { return 0; }
  /// Index of t_j for j = 1..k+1 (t_{k+1} = t_f).
  [[nodiscard]] static std::size_t time(std::size_t j) { return 3 + j - 1; }
  [[nodiscard]] std::size_t node(std::size_t j) const { return 3 + (k + 1) + 6 * (j - 1); }
};

/// Starting points of every arc, their end points after flowing, and the
/// arc durations, for one unknown vector.
struct ArcEndpoints {
  std::vector<Extremal> start;
  std::vector<Extremal> end;
  std::vector<double> duration;
};

/// Junction times 0, t_1, ..., t_f.
std::vector<double> junction_times(const ArcStructure& s, const Eigen::VectorXd& y);
Extremal arc_start(const ModelConstants& k, const ArcStructure& s, const Eigen::VectorXd& y,
                   std::size_t arc);

ArcEndpoints flow_arcs(const ModelConstants& k, const ArcStructure& s, const Eigen::VectorXd& y,
                       const IntegratorSettings& settings = {});

/// Residual from already flowed arcs: entry conditions, terminal block
/// (h - h_f, v - v_f, p_m - (1 - alpha), H - alpha), matching conditions.
Eigen::VectorXd residual_from(const ModelConstants& k, const ArcStructure& s,
                              const Eigen::VectorXd& y, const ArcEndpoints& ep);

Eigen::VectorXd assemble_residual(const ModelConstants& k, const ArcStructure& s,
                                  const Eigen::VectorXd& y, const IntegratorSettings& settings = {});

/// Number of entry conditions imposed at the start of arc j (j >= 1).
std::size_t entry_condition_count(const ArcStructure& s, std::size_t j);

struct NewtonSettings {
  double tol = 1e-10;        ///< on ||S||_inf
  int max_iter = 50;
  double backtrack = 0.5;    ///< Armijo reduction factor
  double min_step = 1e-8;
  double fd_rel = 1e-7;      ///< FD step 1e-7 * max(1, |y_i|)
  IntegratorSettings flow = IntegratorSettings::shooting();
};

/// Forward-difference Jacobian. Each column only reflows the arcs whose start
/// point or duration depends on that unknown.
Eigen::MatrixXd shooting_jacobian(const ModelConstants& k, const ArcStructure& s,
                                  const Eigen::VectorXd& y, const ArcEndpoints& ep,
                                  const Eigen::VectorXd& r, const NewtonSettings& settings);

class ShootingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class NoConvergence : public ShootingError {
 public:
  using ShootingError::ShootingError;
};
class RankDeficient : public ShootingError {
 public:
  using ShootingError::ShootingError;
};

struct ValidationCheck {
  std::string name;
  bool passed;
  double margin;       ///< signed: >= 0 means satisfied with that much room
  std::string detail;  ///< location of the worst sample
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  [[nodiscard]] bool passed() const;
  [[nodiscard]] const ValidationCheck* find(const std::string& name) const;
};

struct ShootingResult {
  ArcStructure structure;
  Eigen::VectorXd y;
  double residual_norm = INFINITY;
  int iterations = 0;
  std::vector<ArcTrajectory> arcs;
  ValidationReport validation;

  [[nodiscard]] std::vector<double> times() const;
  [[nodiscard]] double final_time() const;
  [[nodiscard]] Vec3<double> p0() const { return {y[0], y[1], y[2]}; }
  /// m0 - m(t_f).
  [[nodiscard]] double fuel(const ModelConstants& k) const;
};

struct NewtonOutcome {
  Eigen::VectorXd y;
  Eigen::VectorXd residual;
  ArcEndpoints endpoints;
  int iterations = 0;
};

/// Bare damped Newton iteration (no reflow, no validation).
NewtonOutcome newton(const ModelConstants& k, const ArcStructure& s, const Eigen::VectorXd& y0,
                     const NewtonSettings& settings = {});

/// Solves J d = -r with column equilibration; throws RankDeficient.
Eigen::VectorXd newton_direction(const Eigen::MatrixXd& J, const Eigen::VectorXd& r);

/// Damped Newton on the shooting function. Throws NoConvergence or
/// RankDeficient; on success the result is reflowed and validated.
ShootingResult solve(const ModelConstants& k, const ArcStructure& s, const Eigen::VectorXd& y0,
                     const NewtonSettings& settings = {});

/// Dense reflow of every arc (absolute start times filled in).
std::vector<ArcTrajectory> reflow(const ModelConstants& k, const ArcStructure& s,
                                  const Eigen::VectorXd& y, const IntegratorSettings& settings = {});

struct ValidationSettings {
  int samples = 200;              ///< per arc
  double sign_tol = 1e-9;         ///< Phi noise allowed at the arc ends
  double a1_threshold = 1e-6;     ///< |F1 . c| lower bound
  double jump_tol = 1e-6;
  double hamiltonian_tol = 1e-8;
  double constraint_tol = 1e-7;
};

ValidationReport validate(const ModelConstants& k, const ShootingResult& r,
                          const ValidationSettings& settings = {});

/// Serializes unknowns, times, residual norm and validation as JSON text.
std::string to_json(const ModelConstants& k, const ShootingResult& r);

/// Extremal seed for the unconstrained structure from state-only switching
/// times (t1, t2, t_f): flows the state forward, solves the two linear
/// conditions H1(z(t2)) = 0, H(t_f) = alpha for (p_h, p_v) at t_f, and flows
/// the costate back.
Eigen::VectorXd unconstrained_seed(const ModelConstants& k, double t1, double t2, double tf,
                                   double alpha = 1.0, const IntegratorSettings& settings = {});

/// Unknown vector after inserting a zero-length arc that becomes arcs[at]
/// (1 <= at < arcs.size()): junction time and node at position `at` are
/// duplicated.
Eigen::VectorXd insert_arc(const ArcStructure& from, const Eigen::VectorXd& y, std::size_t at);
/// Unknown vector after deleting arc `at` (which should have zero length).
Eigen::VectorXd remove_arc(const ArcStructure& from, const Eigen::VectorXd& y, std::size_t at);

}  // namespace climb
