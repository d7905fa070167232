#pragma once

#include "ist/nn.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace ist {

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  // First and second moments keyed by parameter name.
  std::map<std::string, Mat> m;
  std::map<std::string, Mat> v;

  void round_to_storage();
};

// One bias-corrected Adam update of every parameter from its .grad. Moments
// are created on first use. Throws NumericError naming the parameter if a
// gradient is not finite; in that case nothing is modified.
void adam_step(AdamState& state, const ParamRefs& params);

}  // namespace ist
