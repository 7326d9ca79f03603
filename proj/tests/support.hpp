#pragma once

#include "climb/homotopy.hpp"

namespace test_support {

/// Unconstrained extremal under the default constants, solved once per binary.
inline const climb::ShootingResult& unconstrained() {
  static const climb::ShootingResult r = climb::unconstrained_solution(climb::ModelConstants{});
  return r;
}

}  // namespace test_support
