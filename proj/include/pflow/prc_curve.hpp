#pragma once

#include <vector>

namespace pflow {

// Sampled phase-response curve: shift as a function of the probe phase.
// Phases are radians in [0, 2pi), strictly increasing; shifts are degrees
// unless the caller opted into radians (see prc.hpp).
struct PRCCurve {
  std::vector<double> phases;
  std::vector<double> shifts;
};

}  // namespace pflow
