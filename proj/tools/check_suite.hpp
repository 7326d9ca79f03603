#pragma once

#include <string>
#include <vector>

#include "climb/model.hpp"

namespace climbopt {

struct CheckOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Geometry FD oracles, flow invariants, determinism, endpoint anchors and
/// the unconstrained reproduction, all under the given constants.
std::vector<CheckOutcome> run_check_suite(const climb::ModelConstants& k);

}  // namespace climbopt
