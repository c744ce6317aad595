// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "skybeam/actor.hpp"
#include "skybeam/adam.hpp"
#include "skybeam/env.hpp"
#include "skybeam/replay.hpp"

namespace skybeam {

struct TrainOptions {
  bool train_cluster = true;
  bool train_platform = true;
  bool platform_spectral_only = false;  // freeze all but the spectral weights
  const ActorNetwork* init_cluster = nullptr;   // copied when given
  const ActorNetwork* init_platform = nullptr;
  std::string checkpoint_dir;  // when set, a checkpoint file lands here
                               // every checkpoint_period episodes
};

struct TrainResult {
  ActorNetwork cluster_actor;   // one parameter set shared by every cluster
  ActorNetwork platform_actor;
  ad::AdamState opt_cluster;
  ad::AdamState opt_platform;
  std::vector<double> episode_reward;  // per-episode mean of the shared reward
  long buffer_pushes = 0;
  long buffer_samples = 0;
  int update_events = 0;       // gradient-update rounds across training
  int checkpoints_written = 0;
};

// Entropy-regularized actor-only training over the episodic simulator.
TrainResult train(const SystemConfig& cfg, const TrainOptions& opt = {});

// Differentiable per-transmitter mean rate rebuilt from the observed state:
// normalize the action to the power budget, form the stream gain matrix,
// diagonal over row-sum SINR, log2 rates, mean over served users.
ad::Node surrogate_mean_rate(ad::Tape& t, const ad::Tensor& state, const ad::CNode& w,
                             double p_max_w, double noise_w);

// Loss for one stored transition: entropy_weight * log_prob - surrogate rate,
// with a fresh reparameterized draw through the current policy.
ad::Node actor_loss(ad::Tape& t, ActorNetwork& net, const Transition& tr, double entropy_weight,
                    double p_max_w, double noise_w, Rng& rng);

// Fresh synthetic transitions: new topologies, channels, and corruption per
// entry; actions and rewards come from rolling the current policies on them.
std::vector<Transition> regenerate_batch(const SystemConfig& cfg, ActorNetwork& cluster_actor,
                                         ActorNetwork& platform_actor, int batch, Rng& rng);

// Gaussian-conjugate layer transfer: per transfer layer (hidden + heads,
// weights only) the source moments act as prior on the target moments; the
// target layer is affinely rescaled onto the posterior, z-scores preserved.
// Spectral and convolutional backbone parameters are left untouched.
void transfer_layers(const ActorNetwork& source, ActorNetwork& target, double beta);

struct EvalResult {
  double mean_reward = 0.0;
  double mean_sum_rate = 0.0;
  std::vector<double> per_slot_sum_rate;     // mean across episodes, length T
  std::vector<double> per_slot_ci95;         // normal 95% half-width across episodes
  std::vector<double> per_episode_reward;
  std::vector<double> per_episode_sum_rate;
};

// Frozen-policy evaluation; same seed yields identical channel realizations
// across calls, so different policies can be compared pairwise.
EvalResult evaluate_policy(const SystemConfig& cfg, ActorNetwork& cluster_actor,
                           ActorNetwork& platform_actor, int episodes, uint64_t seed);

// Classical solver evaluation under perfect channel knowledge. Clusters treat
// other clusters' interference as extra noise measured from the previous
// slot; the platform problem is exact. method: mrt | zf | wmmse.
EvalResult evaluate_baseline(const SystemConfig& cfg, const std::string& method, int episodes,
                             uint64_t seed);

// One slot of joint policy action: per-cluster and platform samples, power
// normalized beams, and the (reward-pending) transitions.
struct SlotRollout {
  BeamformingSet beams;
  std::vector<Transition> transitions;  // clusters first, platform last
};
SlotRollout policy_rollout(const SystemConfig& cfg, ActorNetwork& cluster_actor,
                           ActorNetwork& platform_actor, const EpisodeSim& sim, Rng& rng);

}  // namespace skybeam
