// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "skybeam/tape.hpp"

namespace skybeam::ad {

// Bias-corrected Adam over a fixed parameter registry. Moment buffers are
// allocated on first use and must keep matching the registry afterwards.
struct AdamState {
  double lr = 4.0e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1.0e-8;
  long t = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

void adam_step(std::vector<Param>& params, AdamState& st);
void zero_grads(std::vector<Param>& params);
void scale_grads(std::vector<Param>& params, double s);

}  // namespace skybeam::ad
