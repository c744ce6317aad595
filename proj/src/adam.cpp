// SPDX-License-Identifier: Apache-2.0
#include "skybeam/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace skybeam::ad {

void adam_step(std::vector<Param>& params, AdamState& st) {
  if (st.m.empty()) {
    for (const Param& p : params) {
      st.m.emplace_back(p.value.shape);
      st.v.emplace_back(p.value.shape);
    }
  }
  if (st.m.size() != params.size() || st.v.size() != params.size())
    throw std::invalid_argument("adam: optimizer state count mismatch");
  st.t += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (size_t i = 0; i < params.size(); ++i) {
    Param& p = params[i];
    Tensor& m = st.m[i];
    Tensor& v = st.v[i];
    if (!(m.shape == p.value.shape) || !(v.shape == p.value.shape))
      throw std::invalid_argument("adam: optimizer state shape mismatch for " + p.name);
    for (size_t k = 0; k < p.value.v.size(); ++k) {
      const double g = p.grad[k];
      m[k] = st.beta1 * m[k] + (1.0 - st.beta1) * g;
      v[k] = st.beta2 * v[k] + (1.0 - st.beta2) * g * g;
      const double mh = m[k] / bc1;
      const double vh = v[k] / bc2;
      p.value[k] -= st.lr * mh / (std::sqrt(vh) + st.eps);
    }
  }
}

void zero_grads(std::vector<Param>& params) {
  for (Param& p : params)
    for (double& g : p.grad.v) g = 0.0;
}

void scale_grads(std::vector<Param>& params, double s) {
  for (Param& p : params)
    for (double& g : p.grad.v) g *= s;
}

}  // namespace skybeam::ad
