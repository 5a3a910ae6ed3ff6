#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace rvt {

struct GradCheckEntry {
  std::string name;
  double max_rel = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct GradSuiteResult {
  std::vector<GradCheckEntry> entries;
  bool passed = true;
};

// Finite-difference audit of every differentiable kernel plus a two-block
// end-to-end model, in f64 (1e-6) and f32 (1e-3). One line per check when
// a log stream is given.
GradSuiteResult run_gradient_suite(std::ostream* log = nullptr);

}  // namespace rvt
