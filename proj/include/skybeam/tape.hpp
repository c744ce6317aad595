// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "skybeam/rng.hpp"
#include "skybeam/tensor.hpp"

namespace skybeam::ad {

// Handle into a Tape. Nodes are created in topological order by construction,
// so the backward sweep is a single reverse pass over the record array.
struct Node {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Named trainable tensor with its gradient accumulator. Parameters live
// outside any tape; a tape leaf made from a Param reads the value in place
// and accumulates into `grad` during backward.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  Param() = default;
  Param(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    grad = Tensor(value.shape);
  }
};

class Tape {
 public:
  // Leaf with no gradient requirement (inputs, noise draws, masks).
  Node constant(Tensor v);
  // Leaf bound to an external parameter; backward accumulates into p.grad.
  Node param(Param& p);

  const Tensor& val(Node n) const;

  // Gradient buffer of a node after backward (zeros if untouched). Only
  // meaningful for nodes on a differentiable path; used by tests.
  const Tensor& grad(Node n) const;

  // Reverse sweep from a scalar root. Gradients accumulate additively, so a
  // value used twice receives both contributions. May be called once per tape.
  void backward(Node root);

  int size() const { return static_cast<int>(recs_.size()); }

  // --- builder internals (used by the op constructors below) ---
  int push(Tensor val, bool needs, std::function<void(Tape&)> pull);
  Tensor& gbuf(int id);
  bool needs(int id) const { return recs_[static_cast<size_t>(id)].needs; }
  bool touched(int id) const { return recs_[static_cast<size_t>(id)].grad_alloc; }

 private:
  struct Rec {
    Tensor val;               // owned for non-param nodes
    Tensor* pval = nullptr;   // param value (external)
    Tensor* pgrad = nullptr;  // param grad (external)
    Tensor grad;
    bool needs = false;
    bool grad_alloc = false;
    std::function<void(Tape&)> pull;
  };

  std::vector<Rec> recs_;
  bool ran_backward_ = false;
  Tensor zero_{{1}};
};

// ---- elementwise ----
Node add(Tape& t, Node a, Node b);
Node sub(Tape& t, Node a, Node b);
Node mul(Tape& t, Node a, Node b);
Node divide(Tape& t, Node a, Node b);
Node neg(Tape& t, Node a);
Node add_const(Tape& t, Node a, double c);
Node mul_const(Tape& t, Node a, double c);
Node rdiv_const(Tape& t, double c, Node a);  // c / a
Node vexp(Tape& t, Node a);
Node vlog(Tape& t, Node a);
Node vsqrt(Tape& t, Node a);
Node relu(Tape& t, Node a);  // subgradient 0 at the kink
Node clamp_const(Tape& t, Node a, double lo, double hi);

// ---- shape / reduction ----
Node reshape(Tape& t, Node a, std::vector<int> shape);
Node sum_all(Tape& t, Node a);            // -> [1]
Node sum_rows(Tape& t, Node a);           // [m x n] -> [m]
Node take_diag(Tape& t, Node a);          // [m x m] -> [m]
Node plane(Tape& t, Node a, int idx);     // slice along axis 0
Node scale_by(Tape& t, Node a, Node s);   // a * s, s is [1]
Node mul_rows(Tape& t, Node a, Node s);   // [m x n] * s[m] row-wise

// ---- linear / neural ----
Node dense(Tape& t, Node x, Node w, Node b);    // w[out x in] * x[in] + b[out]
Node matmul(Tape& t, Node a, Node b);           // [m x k][k x n]
Node matmul_nt(Tape& t, Node a, Node b);        // [m x k][n x k]^T -> [m x n]
Node softmax_last(Tape& t, Node a);             // softmax over the last axis
Node conv2d(Tape& t, Node x, Node k, Node b);   // odd kernel, stride 1, zero pad

// ---- spectral (complex tensors packed as [2 x ... ] re/im planes) ----
// Forward DFT is unscaled, inverse carries 1/(H*W); the pullback of the
// forward transform is the inverse transform scaled back by H*W.
Node fft2(Tape& t, Node packed, bool inverse);
// X packed [2 x Cin x H x W], Z split into re/im [Cout x Cin x mh x mw].
// Retains the mh-by-mw lowest-frequency corner, contracts over Cin there,
// mirrors the block to its conjugate partner bins, zeroes every other mode.
Node spectral_mul(Tape& t, Node xp, Node zr, Node zi, int mh, int mw);

// ---- sampling ----
struct SampleOut {
  Node action;
  Node log_prob;  // [1]
  Tensor eps;     // the standard-normal draw actually used
};
// Reparameterized Gaussian: action = mu + exp(log_std) * eps. log_std may be
// [1] (shared), [m] against a [m x n] mu (per-row), or the same shape as mu.
SampleOut gaussian_sample(Tape& t, Node mu, Node log_std, Rng& rng);
SampleOut gaussian_sample_with(Tape& t, Node mu, Node log_std, Tensor eps);

// ---- complex composites (pairs of real nodes) ----
struct CNode {
  Node re;
  Node im;
};
CNode cmatmul(Tape& t, CNode a, CNode b);     // [m x k][k x n]
CNode cmatmul_nt(Tape& t, CNode a, CNode b);  // [m x k][n x k]^T
Node cabs2(Tape& t, CNode a);                 // re^2 + im^2, elementwise

}  // namespace skybeam::ad
