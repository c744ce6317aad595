// SPDX-License-Identifier: Apache-2.0
#include "skybeam/actor.hpp"

#include <cmath>
#include <stdexcept>

namespace skybeam {

using ad::Node;
using ad::Param;
using ad::Tape;
using ad::Tensor;

void ActorConfig::validate() const {
  if (users < 1 || antennas < 1) throw std::invalid_argument("actor: empty state geometry");
  if (channels < 1 || hidden < 1) throw std::invalid_argument("actor: non-positive width");
  if (backbone == Backbone::fno) {
    if (modes_h < 1 || modes_w < 1 || modes_h > users || modes_w > antennas)
      throw std::invalid_argument("actor: retained modes exceed state extent");
  } else {
    if (cnn_kernel < 1 || cnn_kernel % 2 == 0)
      throw std::invalid_argument("actor: convolution kernel must be odd");
  }
  if (lrd_rank < 0) throw std::invalid_argument("actor: negative factor rank");
  if (lrd_rank > 0 && lrd_rank >= std::min(users, antennas))
    throw std::invalid_argument("actor: factor rank must be below min(users, antennas)");
}

namespace {

Tensor gaussian_tensor(std::vector<int> shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& x : t.v) x = stddev * rng.normal();
  return t;
}

int add_param(ActorNetwork& net, const std::string& name, Tensor value) {
  net.params.emplace_back(name, std::move(value));
  return static_cast<int>(net.params.size()) - 1;
}

void add_head(ActorNetwork& net, const std::string& role, int rows, int cols, Rng& rng) {
  const int hidden = net.cfg.hidden;
  const double he = std::sqrt(2.0 / hidden);
  ActorNetwork::HeadRef ref;
  ref.role = role;
  ref.rows = rows;
  ref.cols = cols;
  ref.w = add_param(net, "head." + role + ".w", gaussian_tensor({rows * cols, hidden}, he, rng));
  ref.b = add_param(net, "head." + role + ".b", Tensor({rows * cols}));
  net.heads.push_back(ref);
}

}  // namespace

ActorNetwork build_actor(const ActorConfig& cfg, Rng& rng) {
  cfg.validate();
  ActorNetwork net;
  net.cfg = cfg;
  const int rows = cfg.users, cols = cfg.antennas;
  if (cfg.backbone == Backbone::fno) {
    const double zscale = 1.0 / (2.0 * cfg.modes_h * cfg.modes_w);
    net.zr = add_param(net, "spectral.re",
                       gaussian_tensor({cfg.channels, 2, cfg.modes_h, cfg.modes_w}, zscale, rng));
    net.zi = add_param(net, "spectral.im",
                       gaussian_tensor({cfg.channels, 2, cfg.modes_h, cfg.modes_w}, zscale, rng));
  } else {
    const int k = cfg.cnn_kernel;
    const double he1 = std::sqrt(2.0 / (2.0 * k * k));
    const double he2 = std::sqrt(2.0 / (static_cast<double>(cfg.channels) * k * k));
    net.c1k = add_param(net, "conv1.k", gaussian_tensor({cfg.channels, 2, k, k}, he1, rng));
    net.c1b = add_param(net, "conv1.b", Tensor({cfg.channels}));
    net.c2k = add_param(net, "conv2.k",
                        gaussian_tensor({cfg.channels, cfg.channels, k, k}, he2, rng));
    net.c2b = add_param(net, "conv2.b", Tensor({cfg.channels}));
  }
  const int flat = cfg.channels * rows * cols;
  net.hw = add_param(net, "hidden.w", gaussian_tensor({cfg.hidden, flat}, std::sqrt(2.0 / flat), rng));
  net.hb = add_param(net, "hidden.b", Tensor({cfg.hidden}));
  if (cfg.lrd_rank == 0) {
    add_head(net, "mu_re", rows, cols, rng);
    add_head(net, "mu_im", rows, cols, rng);
    add_head(net, "sd_re", rows, 1, rng);
    add_head(net, "sd_im", rows, 1, rng);
  } else {
    const int j = cfg.lrd_rank;
    add_head(net, "mu_q_re", rows, j, rng);
    add_head(net, "mu_q_im", rows, j, rng);
    add_head(net, "mu_o_re", j, cols, rng);
    add_head(net, "mu_o_im", j, cols, rng);
    add_head(net, "sd_q_re", rows, 1, rng);
    add_head(net, "sd_q_im", rows, 1, rng);
    add_head(net, "sd_o_re", j, 1, rng);
    add_head(net, "sd_o_im", j, 1, rng);
  }
  return net;
}

namespace {

// Shared tail: flattened features -> hidden ReLU -> heads.
ActorForward run_tail(Tape& t, ActorNetwork& net, Node flat) {
  Node h = ad::relu(
      t, ad::dense(t, flat, t.param(net.params[static_cast<size_t>(net.hw)]),
                   t.param(net.params[static_cast<size_t>(net.hb)])));
  ActorForward out;
  // Heads come in (mu, sd) role pairs; walk the mu heads and locate the sd
  // head with the matching suffix.
  for (const auto& mu : net.heads) {
    if (mu.role.rfind("mu", 0) != 0) continue;
    const std::string sd_role = "sd" + mu.role.substr(2);
    const ActorNetwork::HeadRef* sd = nullptr;
    for (const auto& cand : net.heads)
      if (cand.role == sd_role) sd = &cand;
    if (!sd) throw std::logic_error("actor: missing log-std head " + sd_role);
    Node mu_raw = ad::dense(t, h, t.param(net.params[static_cast<size_t>(mu.w)]),
                            t.param(net.params[static_cast<size_t>(mu.b)]));
    // softmax over the head coordinates, then affine map onto [-1, 1]
    Node mu_out = ad::add_const(t, ad::mul_const(t, ad::softmax_last(t, mu_raw), 2.0), -1.0);
    mu_out = ad::reshape(t, mu_out, {mu.rows, mu.cols});
    Node sd_raw = ad::dense(t, h, t.param(net.params[static_cast<size_t>(sd->w)]),
                            t.param(net.params[static_cast<size_t>(sd->b)]));
    Node sd_out = ad::clamp_const(t, sd_raw, -5.0, 2.0);
    GaussianHeadOut part;
    part.mean = mu_out;
    part.log_std = sd_out;
    part.rows = mu.rows;
    part.cols = mu.cols;
    out.parts.push_back(part);
  }
  return out;
}

}  // namespace

ActorForward actor_forward(Tape& t, ActorNetwork& net, const Tensor& state) {
  const ActorConfig& cfg = net.cfg;
  if (!(state.shape == std::vector<int>{2, cfg.users, cfg.antennas}))
    throw std::invalid_argument("actor: state shape " + ad::shape_string(state.shape) +
                                " does not match config [2x" + std::to_string(cfg.users) + "x" +
                                std::to_string(cfg.antennas) + "]");
  const int rows = cfg.users, cols = cfg.antennas;
  Node feat;
  if (cfg.backbone == Backbone::fno) {
    // The two state planes enter as two real input channels of a complex
    // spectral pipeline: x -> F(x) -> Z contraction on retained modes ->
    // F^-1 -> real part.
    Tensor packed({2, 2, rows, cols});
    for (int c = 0; c < 2; ++c)
      for (int r = 0; r < rows; ++r)
        for (int q = 0; q < cols; ++q) packed.at(0, c, r, q) = state.at(c, r, q);
    Node x = t.constant(std::move(packed));
    Node spec = ad::fft2(t, x, false);
    spec = ad::spectral_mul(t, spec, t.param(net.params[static_cast<size_t>(net.zr)]),
                            t.param(net.params[static_cast<size_t>(net.zi)]), cfg.modes_h,
                            cfg.modes_w);
    spec = ad::fft2(t, spec, true);
    Node real_part = ad::plane(t, spec, 0);
    feat = ad::relu(t, real_part);
  } else {
    Node x = t.constant(state);
    Node c1 = ad::relu(t, ad::conv2d(t, x, t.param(net.params[static_cast<size_t>(net.c1k)]),
                                     t.param(net.params[static_cast<size_t>(net.c1b)])));
    feat = ad::relu(t, ad::conv2d(t, c1, t.param(net.params[static_cast<size_t>(net.c2k)]),
                                  t.param(net.params[static_cast<size_t>(net.c2b)])));
  }
  Node flat = ad::reshape(t, feat, {cfg.channels * rows * cols});
  return run_tail(t, net, flat);
}

PolicySample sample_action_with(Tape& t, const ActorForward& fwd, const ActorConfig& cfg,
                                std::vector<ad::Tensor> eps) {
  if (eps.size() != fwd.parts.size())
    throw std::invalid_argument("sample: eps count mismatch");
  std::vector<ad::SampleOut> draws;
  draws.reserve(fwd.parts.size());
  for (size_t i = 0; i < fwd.parts.size(); ++i) {
    const GaussianHeadOut& p = fwd.parts[i];
    draws.push_back(ad::gaussian_sample_with(t, p.mean, p.log_std, std::move(eps[i])));
  }
  PolicySample out;
  out.log_prob = draws[0].log_prob;
  for (size_t i = 1; i < draws.size(); ++i) out.log_prob = ad::add(t, out.log_prob, draws[i].log_prob);
  for (auto& d : draws) out.eps.push_back(d.eps);
  if (cfg.lrd_rank == 0) {
    out.w = ad::CNode{draws[0].action, draws[1].action};
  } else {
    ad::CNode q{draws[0].action, draws[1].action};
    ad::CNode o{draws[2].action, draws[3].action};
    out.w = ad::cmatmul(t, q, o);
  }
  return out;
}

PolicySample sample_action(Tape& t, const ActorForward& fwd, const ActorConfig& cfg, Rng& rng) {
  std::vector<Tensor> eps;
  eps.reserve(fwd.parts.size());
  for (const GaussianHeadOut& p : fwd.parts) {
    Tensor e({p.rows, p.cols});
    for (double& x : e.v) x = rng.normal();
    eps.push_back(std::move(e));
  }
  return sample_action_with(t, fwd, cfg, std::move(eps));
}

CMat lrd_compose(const CMat& q, const CMat& o) {
  if (q.cols != o.rows) throw std::invalid_argument("lrd: factor shape mismatch");
  CMat w(q.rows, o.cols);
  for (int i = 0; i < q.rows; ++i)
    for (int k = 0; k < q.cols; ++k) {
      const std::complex<double> qa = q.at(i, k);
      for (int j = 0; j < o.cols; ++j) w.at(i, j) += qa * o.at(k, j);
    }
  return w;
}

CMat sampled_matrix(const Tape& t, const PolicySample& s) {
  const Tensor& re = t.val(s.w.re);
  const Tensor& im = t.val(s.w.im);
  CMat out(re.dim(0), re.dim(1));
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) out.at(i, j) = {re.at(i, j), im.at(i, j)};
  return out;
}

}  // namespace skybeam
