// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "skybeam/linkrate.hpp"

namespace skybeam {

// One transmitter's precoding instance under perfect channel knowledge.
// extra_noise_w optionally adds per-user interference power measured outside
// this transmitter (empty: none).
struct PrecodeProblem {
  CMat h;                 // [users x antennas] channel rows
  double noise_w = 1e-13;
  double p_max_w = 1.0;
  int max_iters = 100;
  std::vector<double> extra_noise_w;
};

// Matched filter: conjugate rows, equal per-user power split.
CMat mrt(const PrecodeProblem& p);

// Interference nulling via the right pseudo-inverse, per-user normalized,
// equal power split. Requires full row rank.
CMat zf(const PrecodeProblem& p);

struct WmmseResult {
  CMat w;
  std::vector<double> trace;  // sum-rate objective after each iteration
  int iterations = 0;
};

// Alternating weighted-MMSE sum-rate maximization: scalar receivers, inverse
// MSE weights, transmitter update through an eigenbasis with bisection on the
// power multiplier. Returns the best iterate rescaled to the full budget.
WmmseResult wmmse(const PrecodeProblem& p);

// Single-transmitter sum rate used as the solver objective.
double solver_sum_rate(const PrecodeProblem& p, const CMat& w);

}  // namespace skybeam
