#pragma once

#include "klda/param.hpp"

namespace klda {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment accumulators plus the update counter. Shapes always
// mirror the parameters they update.
struct AdamState {
  ParamVector m;
  ParamVector v;
  long long step = 0;

  static AdamState init(const ParamVector& params);
};

struct AdamResult {
  ParamVector params;
  AdamState state;
};

// One bias-corrected Adam update. Pure: inputs are untouched.
AdamResult adam_step(const ParamVector& params, const ParamVector& grads,
                     const AdamState& state, const AdamConfig& cfg);

}  // namespace klda
