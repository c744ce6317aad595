// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "skybeam/actor.hpp"
#include "skybeam/channel.hpp"
#include "skybeam/linkrate.hpp"
#include "skybeam/rng.hpp"
#include "skybeam/topology.hpp"

namespace skybeam {

// Full simulation configuration. Defaults are the full-scale operating point;
// the bench layer offers a reduced desk profile for quick runs.
struct SystemConfig {
  // geometry
  int clusters = 4;            // B
  int users_per_cluster = 4;   // K
  double disc_radius_m = 2000.0;
  double grid_spacing_m = 6000.0;
  double laps_altitude_m = 2000.0;
  double haps_altitude_m = 20000.0;
  double haps_jitter_m = 500.0;

  // radio
  int laps_antennas = 36;
  int haps_antennas = 64;
  double laps_carrier_hz = 1.8e9;
  double haps_carrier_hz = 2.7e9;
  double rician_x = 10.0;
  double shadow_var_db2 = 3.0;
  double slot_seconds = 0.02;
  double velocity_mps = 1.0;
  double noise_dbm = -100.0;
  double laps_power_w = 40.0;
  double haps_power_w = 100.0;

  // CSI observation model
  CsiNoiseModel csi;

  // actor architecture
  Backbone backbone = Backbone::fno;
  int fno_channels = 8;
  int hidden = 512;
  int modes_laps_h = 4, modes_laps_w = 12;
  int modes_haps_h = 8, modes_haps_w = 20;
  int lrd_rank = 0;  // platform actor only; 0 disables the factorization
  int cnn_kernel = 3;

  // training
  int episodes = 200;
  int slots = 50;            // T
  int update_period = 4;     // slots between gradient updates
  int checkpoint_period = 10;  // episodes between checkpoints
  int batch = 32;
  double lr = 4e-4;
  double entropy_laps = 0.4;
  double entropy_haps = 0.4;
  size_t buffer_capacity = 10000;
  bool regenerate = false;  // false: replay buffer, true: synthetic minibatches
  int eval_episodes = 500;

  uint64_t seed = 1;

  int total_users() const { return clusters * users_per_cluster; }
  double noise_w() const;
  ChannelParams laps_channel_params() const;
  ChannelParams haps_channel_params() const;
  ActorConfig laps_actor_config() const;  // modes clamped to the state extent
  ActorConfig haps_actor_config() const;
  void validate() const;  // throws std::invalid_argument on bad values
};

// JSON round trip. The emitted document doubles as the config schema: loading
// rejects unknown keys and wrong-typed values before any computation.
nlohmann::json config_to_json(const SystemConfig& cfg);
SystemConfig config_from_json(const nlohmann::json& j);

// Applies "a.b.c=value" style assignments on top of a JSON document.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Per-episode world state: topology, shadowing, correlated fading. Advances
// slot by slot producing true channels and the (possibly corrupted) state
// matrices each agent observes.
class EpisodeSim {
 public:
  EpisodeSim(const SystemConfig& cfg, Rng rng);

  void begin();      // draws topology, shadowing, initial fading
  void next_slot();  // first call yields slot 0; later calls move users first

  const ChannelSet& channels() const { return ch_; }
  const std::vector<ad::Tensor>& cluster_states() const { return cluster_states_; }
  const ad::Tensor& platform_state() const { return platform_state_; }
  const NetworkTopology& topology() const { return topo_; }
  int slot() const { return slot_; }

  double cluster_gain(int b, int u) const { return gain_laps_[idx(b, u)]; }
  double platform_gain(int u) const { return gain_haps_[u]; }

 private:
  size_t idx(int b, int u) const { return static_cast<size_t>(b) * users_ + u; }
  void compute_channels();
  void build_states();

  SystemConfig cfg_;
  Rng rng_;
  int users_;
  ClusterLayout layout_;
  NetworkTopology topo_;
  int slot_ = -1;
  double rho_laps_ = 0.0, rho_haps_ = 0.0;

  std::vector<double> shadow_laps_;  // [B*U] dB draws, fixed per episode
  std::vector<double> shadow_haps_;  // [U]
  std::vector<CVec> nlos_laps_;      // [B*U] length N_b
  std::vector<CVec> nlos_haps_;      // [U] length N_b0
  std::vector<double> gain_laps_;    // [B*U] large-scale power gains
  std::vector<double> gain_haps_;    // [U]

  ChannelSet ch_;
  std::vector<ad::Tensor> cluster_states_;  // B entries [2 x K x N_b]
  ad::Tensor platform_state_;               // [2 x U x N_b0]
};

}  // namespace skybeam
