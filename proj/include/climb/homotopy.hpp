#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "climb/shooting.hpp"

namespace climb {

enum class LambdaSelector { phi_max, psi_max };

enum class Monitor { M1, M2, M3 };
const char* to_string(Monitor m);

/// Monitor values; a monitor fires when its value is positive.
///  M1: c1 at the entry of a singular arc entered from a bang arc.
///  M2: c2 at the exit of the singular arc (or, without one, of the last
///      interior arc) when it is followed by a bang arc.
///  M3: minus the singular arc duration.
/// Monitors that do not apply to the structure are -inf.
struct MonitorValues {
  double m1 = -INFINITY;
  double m2 = -INFINITY;
  double m3 = -INFINITY;
  [[nodiscard]] double get(Monitor m) const;
};

MonitorValues monitor_values(const ModelConstants& k, const ArcStructure& s,
                             const Eigen::VectorXd& y);
std::vector<Monitor> monitors(const ModelConstants& k, const ArcStructure& s,
                              const Eigen::VectorXd& y);

/// M1 inserts c1 before the singular arc, M2 inserts c2 after it (after the
/// last interior arc without one), M3 deletes it. Throws StructureError when
/// the result leaves the catalog.
ArcStructure structure_transition(const ArcStructure& s, Monitor m);
/// Transition applied to the unknowns (zero-length insertion or deletion).
Eigen::VectorXd transition_unknowns(const ArcStructure& s, const Eigen::VectorXd& y, Monitor m);

double lambda_of(const Bounds& b, LambdaSelector sel);
void set_lambda(Bounds& b, LambdaSelector sel, double lambda);

struct HomotopyProblem {
  ArcStructure structure;
  LambdaSelector selector = LambdaSelector::psi_max;
  double lambda0 = 0.0;
  double lambda1 = 0.0;
  Eigen::VectorXd seed;
  /// Lambda values at which a solution is recorded.
  std::vector<double> stations;
};

struct PathPoint {
  Eigen::VectorXd y;
  double lambda = 0.0;
  double s = 0.0;  ///< arclength in scaled units
  std::vector<Monitor> monitor_flags;
};

struct StationPoint {
  double lambda = 0.0;
  Eigen::VectorXd y;
  double final_time = 0.0;
  double fuel = 0.0;
};

enum class Termination { reached_end, monitor, step_failure };
const char* to_string(Termination t);

struct PathResult {
  ArcStructure structure;
  std::vector<PathPoint> points;
  std::vector<StationPoint> stations;
  Termination cause = Termination::reached_end;
  Monitor trigger = Monitor::M1;
  double trigger_lambda = NAN;
  Eigen::VectorXd trigger_y;  ///< solution of `structure` at trigger_lambda
  std::string message;
};

struct ContinuationSettings {
  double step0 = 0.1;
  double step_min = 1e-4;
  double step_max = 2.0;
  double corrector_tol = 1e-9;
  int corrector_max_iter = 8;
  /// Trigger refinement tolerance in scaled lambda units (1 m/s for phi,
  /// 0.01 for psi), i.e. 1e-3 m/s and 1e-5.
  double trigger_tol = 1e-3;
  int max_steps = 2000;
  NewtonSettings newton;
};

/// Scale that maps lambda to the unit used for the arclength.
double lambda_scale(LambdaSelector sel);

/// Pseudo-arclength predictor-corrector on h(y, lambda) = S_lambda(y).
PathResult continue_path(const ModelConstants& k, const HomotopyProblem& problem,
                         const ContinuationSettings& settings = {});

/// Follows lambda0 -> lambda1 applying structure transitions at every monitor
/// trigger.
struct CascadeResult {
  std::vector<PathResult> segments;
  ArcStructure final_structure;
  Eigen::VectorXd final_y;
  bool completed = false;
  std::string error;
};

CascadeResult follow_with_transitions(const ModelConstants& k, const HomotopyProblem& problem,
                                      const ContinuationSettings& settings = {},
                                      int max_transitions = 8);

/// Unconstrained sigma- sigma_s sigma+ extremal for the cost index alpha,
/// seeded from state switching times (t1, t2, t_f).
ShootingResult unconstrained_solution(const ModelConstants& k, double alpha = 1.0,
                                      const std::vector<double>& times = {72.075, 645.437,
                                                                          658.376});

/// BC-extremal at `target` reached from the unconstrained one: continuation
/// in phi_max at psi_max = unconstrained bound, then in psi_max, applying the
/// structure transitions met on the way.
ShootingResult solve_by_continuation(const ModelConstants& k, const ShootingResult& unconstrained,
                                     const Bounds& target, const ContinuationSettings& settings = {});

// ---------------------------------------------------------------------------
// Cartography.

struct GridSpec {
  double phi_lo = 107.0;
  double phi_hi = 180.0;
  int n_phi = 60;
  double psi_lo = 0.63;
  double psi_hi = 0.82;
  int n_psi = 60;
  [[nodiscard]] double phi(int i) const;
  [[nodiscard]] double psi(int j) const;
};

struct CartographyCell {
  double phi = 0.0;
  double psi = 0.0;
  std::string label;  ///< empty when unresolved
  double final_time = NAN;
  double fuel = NAN;
  bool resolved = false;
};

struct BoundaryPoint {
  double phi = 0.0;
  double psi = 0.0;
  std::string from;
  std::string to;
  Monitor trigger = Monitor::M1;
};

struct Landmarks {
  double phi_c1 = NAN;
  double psi_c2 = NAN;
  double phi_s = NAN;
  double psi_s = NAN;
};

struct FuelMinimum {
  double phi = NAN;
  double psi = NAN;
  double fuel = NAN;
  std::string label;
};

struct Cartography {
  GridSpec grid;
  std::vector<CartographyCell> cells;  ///< index i * n_psi + j
  Landmarks landmarks;
  std::vector<BoundaryPoint> boundaries;
  FuelMinimum fuel_min;
  [[nodiscard]] const CartographyCell& at(int i, int j) const {
    return cells[static_cast<std::size_t>(i) * grid.n_psi + j];
  }
  [[nodiscard]] std::vector<std::string> labels() const;
};

/// phi_c1 = phi(x(t1)), psi_c2 = psi(x(t2)) of the unconstrained solution.
Landmarks unconstrained_landmarks(const ModelConstants& k, const ShootingResult& unconstrained);

/// Step 2: continuation in phi_max at psi_max = psi_hi from phi_hi down to
/// phi_lo. Returns the cascade with stations at the grid phi values.
CascadeResult phi_row(const ModelConstants& k, const ShootingResult& unconstrained,
                      const GridSpec& grid, const ContinuationSettings& settings = {});

/// phi_s (M3 trigger of the row) and psi_s = max psi along the touch
/// trajectory at phi_s.
void row_landmarks(const ModelConstants& k, const CascadeResult& row, Landmarks& out);

/// Full cartography: the phi row, then one psi column per grid phi value.
/// Columns run on `jobs` threads; results are merged by index.
Cartography build_cartography(const ModelConstants& k, const ShootingResult& unconstrained,
                              const GridSpec& grid, const ContinuationSettings& settings = {},
                              int jobs = 1);

/// Minimum of the fuel surface: best grid cell refined by a local quadratic
/// fit over its resolved same-label 3x3 neighbourhood.
FuelMinimum locate_fuel_minimum(const Cartography& c);

void write_cartography_csv(std::ostream& os, const Cartography& c);
std::string landmarks_json(const Cartography& c);

}  // namespace climb
