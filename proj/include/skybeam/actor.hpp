// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "skybeam/linkrate.hpp"
#include "skybeam/rng.hpp"
#include "skybeam/tape.hpp"

namespace skybeam {

enum class Backbone { fno, cnn };

struct ActorConfig {
  Backbone backbone = Backbone::fno;
  int users = 4;      // state rows (served users)
  int antennas = 36;  // state columns
  int channels = 8;   // spectral / convolutional width
  int modes_h = 4;
  int modes_w = 12;
  int hidden = 512;
  int lrd_rank = 0;   // 0: heads emit the full matrix; j > 0: low-rank factors
  int cnn_kernel = 3;

  void validate() const;
};

// One Gaussian output block: a mean tensor plus a per-row log standard
// deviation. Mean heads are softmax-normalized then affinely mapped onto
// [-1, 1]; log-std heads are linear, clamped to [-5, 2].
struct GaussianHeadOut {
  ad::Node mean;     // [rows x cols]
  ad::Node log_std;  // [rows]
  int rows = 0;
  int cols = 0;
};

struct ActorForward {
  std::vector<GaussianHeadOut> parts;
};

struct ActorNetwork {
  ActorConfig cfg;
  std::vector<ad::Param> params;
  // registry indices by role
  int zr = -1, zi = -1;                          // spectral weights, re/im planes
  int c1k = -1, c1b = -1, c2k = -1, c2b = -1;    // convolutional backbone
  int hw = -1, hb = -1;                          // hidden layer
  struct HeadRef {
    std::string role;  // mu_re, sd_re, ... / mu_q_re, sd_o_im, ...
    int w = -1;
    int b = -1;
    int rows = 0;
    int cols = 0;  // 1 for log-std heads
  };
  std::vector<HeadRef> heads;
};

// Fresh network: He-initialized dense/conv weights, spectral weights complex
// Gaussian scaled by 1/(C_in * m_h * m_w), zero biases.
ActorNetwork build_actor(const ActorConfig& cfg, Rng& rng);

// Pure function of (parameters, state): builds the graph on the given tape.
// State must be [2 x users x antennas].
ActorForward actor_forward(ad::Tape& t, ActorNetwork& net, const ad::Tensor& state);

struct PolicySample {
  ad::CNode w;                  // [users x antennas] complex, pre-normalization
  ad::Node log_prob;            // [1]
  std::vector<ad::Tensor> eps;  // draws per part, in part order
};

PolicySample sample_action(ad::Tape& t, const ActorForward& fwd, const ActorConfig& cfg, Rng& rng);
PolicySample sample_action_with(ad::Tape& t, const ActorForward& fwd, const ActorConfig& cfg,
                                std::vector<ad::Tensor> eps);

// Low-rank composition W = Q * O at value level.
CMat lrd_compose(const CMat& q, const CMat& o);

// Extract the sampled beamformer as a value-level matrix.
CMat sampled_matrix(const ad::Tape& t, const PolicySample& s);

}  // namespace skybeam
