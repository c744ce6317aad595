// SPDX-License-Identifier: Apache-2.0
#include "skybeam/replay.hpp"

#include <numeric>
#include <stdexcept>

namespace skybeam {

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (buf_.size() == capacity_) buf_.pop_front();
  buf_.push_back(std::move(t));
  ++pushes_;
}

std::vector<const Transition*> ReplayBuffer::sample(int batch, Rng& rng) {
  if (batch <= 0) throw std::invalid_argument("sample batch must be positive");
  if (static_cast<size_t>(batch) > buf_.size())
    throw std::invalid_argument("sample batch exceeds buffer occupancy");
  std::vector<size_t> idx(buf_.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  // partial Fisher-Yates: the first `batch` entries end up a uniform
  // draw without replacement
  for (int i = 0; i < batch; ++i) {
    size_t j = i + static_cast<size_t>(rng.uniform() * double(idx.size() - i));
    if (j >= idx.size()) j = idx.size() - 1;
    std::swap(idx[i], idx[j]);
  }
  std::vector<const Transition*> out(batch);
  for (int i = 0; i < batch; ++i) out[i] = &buf_[idx[i]];
  ++samples_;
  return out;
}

}  // namespace skybeam
