#pragma once

#include "ist/nn.hpp"

#include <functional>
#include <string>

namespace ist {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  Eigen::Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
  bool passed = false;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor: rel = |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  // Five-point stencil, error O(h^4); otherwise plain central differences.
  bool fourth_order = true;
  // Entries checked per parameter; 0 checks all of them.
  std::size_t max_entries_per_param = 0;
  std::uint64_t seed = 0;
};

// Compares p->grad (already populated by the caller's analytic pass) against
// central differences of `loss` for every parameter in `params`. The loss must
// be a pure function of the parameter values. Parameter values are restored.
GradCheckReport finite_diff_check(const std::function<double()>& loss, const ParamRefs& params,
                                  const GradCheckOptions& options = {});

}  // namespace ist
