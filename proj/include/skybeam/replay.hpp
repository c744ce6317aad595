// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <vector>

#include "skybeam/linkrate.hpp"
#include "skybeam/rng.hpp"
#include "skybeam/tensor.hpp"

namespace skybeam {

// One stored interaction. The state holds the imperfect CSI planes the agent
// actually observed; the action is the sampled beamformer before power
// normalization; the reward is the shared network reward of that slot.
struct Transition {
  ad::Tensor state;  // [2 x rows x antennas]
  CMat action;
  double reward = 0.0;
  int layer = 0;  // 0: cluster layer, 1: platform layer
};

// Bounded FIFO with uniform sampling without replacement. The transaction
// counter splits into pushes and sample calls for accounting.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity);

  void push(Transition t);
  std::vector<const Transition*> sample(int batch, Rng& rng);

  size_t size() const { return buf_.size(); }
  size_t capacity() const { return capacity_; }
  long pushes() const { return pushes_; }
  long samples() const { return samples_; }
  long transactions() const { return pushes_ + samples_; }

 private:
  size_t capacity_;
  std::deque<Transition> buf_;
  long pushes_ = 0;
  long samples_ = 0;
};

}  // namespace skybeam
