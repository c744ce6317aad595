// SPDX-License-Identifier: Apache-2.0
#include "skybeam/env.hpp"

#include <cmath>
#include <stdexcept>

namespace skybeam {

namespace {

using nlohmann::json;


std::string csi_name(CsiModel m) {
  switch (m) {
    case CsiModel::perfect: return "perfect";
    case CsiModel::additive: return "additive";
    case CsiModel::multiplicative: return "multiplicative";
  }
  return "perfect";
}

CsiModel csi_from_name(const std::string& s) {
  if (s == "perfect") return CsiModel::perfect;
  if (s == "additive") return CsiModel::additive;
  if (s == "multiplicative") return CsiModel::multiplicative;
  throw std::invalid_argument("unknown csi model: " + s);
}

std::string backbone_name(Backbone b) { return b == Backbone::fno ? "fno" : "cnn"; }

Backbone backbone_from_name(const std::string& s) {
  if (s == "fno") return Backbone::fno;
  if (s == "cnn") return Backbone::cnn;
  throw std::invalid_argument("unknown backbone: " + s);
}

// Structural check of a loaded document against the schema emitted by
// config_to_json: unknown keys and mismatched value kinds are rejected.
void check_against_schema(const json& schema, const json& doc, const std::string& path) {
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    std::string where = path.empty() ? it.key() : path + "." + it.key();
    if (!schema.contains(it.key()))
      throw std::invalid_argument("unknown config key: " + where);
    const json& ref = schema.at(it.key());
    const json& got = it.value();
    if (ref.is_object()) {
      if (!got.is_object())
        throw std::invalid_argument("config key " + where + " must be an object");
      check_against_schema(ref, got, where);
    } else if (ref.is_number() && !got.is_number()) {
      throw std::invalid_argument("config key " + where + " must be a number");
    } else if (ref.is_string() && !got.is_string()) {
      throw std::invalid_argument("config key " + where + " must be a string");
    } else if (ref.is_boolean() && !got.is_boolean()) {
      throw std::invalid_argument("config key " + where + " must be a boolean");
    }
  }
}

template <typename T>
void pull(const json& j, const char* group, const char* key, T& out) {
  if (j.contains(group) && j.at(group).contains(key)) j.at(group).at(key).get_to(out);
}

}  // namespace

double SystemConfig::noise_w() const { return 1e-3 * std::pow(10.0, noise_dbm / 10.0); }

ChannelParams SystemConfig::laps_channel_params() const {
  return {laps_carrier_hz, rician_x, shadow_var_db2, slot_seconds, velocity_mps};
}

ChannelParams SystemConfig::haps_channel_params() const {
  return {haps_carrier_hz, rician_x, shadow_var_db2, slot_seconds, velocity_mps};
}

ActorConfig SystemConfig::laps_actor_config() const {
  ActorConfig a;
  a.backbone = backbone;
  a.users = users_per_cluster;
  a.antennas = laps_antennas;
  a.channels = fno_channels;
  a.modes_h = std::min(modes_laps_h, users_per_cluster);
  a.modes_w = std::min(modes_laps_w, laps_antennas);
  a.hidden = hidden;
  a.lrd_rank = 0;
  a.cnn_kernel = cnn_kernel;
  return a;
}

ActorConfig SystemConfig::haps_actor_config() const {
  ActorConfig a;
  a.backbone = backbone;
  a.users = total_users();
  a.antennas = haps_antennas;
  a.channels = fno_channels;
  a.modes_h = std::min(modes_haps_h, total_users());
  a.modes_w = std::min(modes_haps_w, haps_antennas);
  a.hidden = hidden;
  a.lrd_rank = lrd_rank;
  a.cnn_kernel = cnn_kernel;
  return a;
}

void SystemConfig::validate() const {
  auto bad = [](const std::string& m) { throw std::invalid_argument("invalid config: " + m); };
  if (clusters < 1) bad("clusters must be >= 1");
  if (users_per_cluster < 1) bad("users_per_cluster must be >= 1");
  if (disc_radius_m <= 0) bad("disc_radius_m must be positive");
  if (grid_spacing_m <= 0) bad("grid_spacing_m must be positive");
  if (laps_altitude_m <= 0 || haps_altitude_m <= 0) bad("altitudes must be positive");
  if (haps_jitter_m < 0) bad("haps_jitter_m must be non-negative");
  if (laps_antennas < 1 || haps_antennas < 1) bad("antenna counts must be >= 1");
  if (laps_carrier_hz <= 0 || haps_carrier_hz <= 0) bad("carrier frequencies must be positive");
  if (rician_x < 0) bad("rician_x must be non-negative");
  if (shadow_var_db2 < 0) bad("shadow_var_db2 must be non-negative");
  if (slot_seconds <= 0) bad("slot_seconds must be positive");
  if (velocity_mps < 0) bad("velocity_mps must be non-negative");
  if (laps_power_w <= 0 || haps_power_w <= 0) bad("power budgets must be positive");
  if (csi.model == CsiModel::additive && (csi.xi <= 0 || csi.xi > 1))
    bad("csi.xi must lie in (0, 1]");
  if (csi.model == CsiModel::multiplicative && (csi.gamma_shape <= 0 || csi.gamma_scale <= 0))
    bad("gamma parameters must be positive");
  if (fno_channels < 1) bad("fno_channels must be >= 1");
  if (hidden < 1) bad("hidden must be >= 1");
  if (modes_laps_h < 1 || modes_laps_w < 1 || modes_haps_h < 1 || modes_haps_w < 1)
    bad("mode counts must be >= 1");
  if (cnn_kernel < 1 || cnn_kernel % 2 == 0) bad("cnn_kernel must be odd and positive");
  if (lrd_rank < 0) bad("lrd_rank must be non-negative");
  if (lrd_rank > 0 && lrd_rank >= std::min(total_users(), haps_antennas))
    bad("lrd_rank must be below min(total users, platform antennas)");
  if (episodes < 1) bad("episodes must be >= 1");
  if (slots < 1) bad("slots must be >= 1");
  if (update_period < 1) bad("update_period must be >= 1");
  if (checkpoint_period < 1) bad("checkpoint_period must be >= 1");
  if (batch < 1) bad("batch must be >= 1");
  if (buffer_capacity < static_cast<size_t>(batch))
    bad("buffer_capacity must be at least the batch size");
  if (lr <= 0) bad("lr must be positive");
  if (entropy_laps < 0 || entropy_haps < 0) bad("entropy coefficients must be non-negative");
  if (eval_episodes < 1) bad("eval_episodes must be >= 1");
  laps_actor_config().validate();
  haps_actor_config().validate();
}

json config_to_json(const SystemConfig& c) {
  json j;
  j["geometry"] = {{"clusters", c.clusters},
                   {"users_per_cluster", c.users_per_cluster},
                   {"disc_radius_m", c.disc_radius_m},
                   {"grid_spacing_m", c.grid_spacing_m},
                   {"laps_altitude_m", c.laps_altitude_m},
                   {"haps_altitude_m", c.haps_altitude_m},
                   {"haps_jitter_m", c.haps_jitter_m}};
  j["radio"] = {{"laps_antennas", c.laps_antennas},
                {"haps_antennas", c.haps_antennas},
                {"laps_carrier_hz", c.laps_carrier_hz},
                {"haps_carrier_hz", c.haps_carrier_hz},
                {"rician_x", c.rician_x},
                {"shadow_var_db2", c.shadow_var_db2},
                {"slot_seconds", c.slot_seconds},
                {"velocity_mps", c.velocity_mps},
                {"noise_dbm", c.noise_dbm},
                {"laps_power_w", c.laps_power_w},
                {"haps_power_w", c.haps_power_w}};
  j["csi"] = {{"model", csi_name(c.csi.model)},
              {"xi", c.csi.xi},
              {"gamma_shape", c.csi.gamma_shape},
              {"gamma_scale", c.csi.gamma_scale}};
  j["actor"] = {{"backbone", backbone_name(c.backbone)},
                {"channels", c.fno_channels},
                {"hidden", c.hidden},
                {"modes_laps_h", c.modes_laps_h},
                {"modes_laps_w", c.modes_laps_w},
                {"modes_haps_h", c.modes_haps_h},
                {"modes_haps_w", c.modes_haps_w},
                {"lrd_rank", c.lrd_rank},
                {"cnn_kernel", c.cnn_kernel}};
  j["train"] = {{"episodes", c.episodes},
                {"slots", c.slots},
                {"update_period", c.update_period},
                {"checkpoint_period", c.checkpoint_period},
                {"batch", c.batch},
                {"lr", c.lr},
                {"entropy_laps", c.entropy_laps},
                {"entropy_haps", c.entropy_haps},
                {"buffer_capacity", c.buffer_capacity},
                {"regenerate", c.regenerate},
                {"eval_episodes", c.eval_episodes}};
  j["seed"] = c.seed;
  return j;
}

SystemConfig config_from_json(const json& j) {
  SystemConfig c;
  check_against_schema(config_to_json(c), j, "");
  pull(j, "geometry", "clusters", c.clusters);
  pull(j, "geometry", "users_per_cluster", c.users_per_cluster);
  pull(j, "geometry", "disc_radius_m", c.disc_radius_m);
  pull(j, "geometry", "grid_spacing_m", c.grid_spacing_m);
  pull(j, "geometry", "laps_altitude_m", c.laps_altitude_m);
  pull(j, "geometry", "haps_altitude_m", c.haps_altitude_m);
  pull(j, "geometry", "haps_jitter_m", c.haps_jitter_m);
  pull(j, "radio", "laps_antennas", c.laps_antennas);
  pull(j, "radio", "haps_antennas", c.haps_antennas);
  pull(j, "radio", "laps_carrier_hz", c.laps_carrier_hz);
  pull(j, "radio", "haps_carrier_hz", c.haps_carrier_hz);
  pull(j, "radio", "rician_x", c.rician_x);
  pull(j, "radio", "shadow_var_db2", c.shadow_var_db2);
  pull(j, "radio", "slot_seconds", c.slot_seconds);
  pull(j, "radio", "velocity_mps", c.velocity_mps);
  pull(j, "radio", "noise_dbm", c.noise_dbm);
  pull(j, "radio", "laps_power_w", c.laps_power_w);
  pull(j, "radio", "haps_power_w", c.haps_power_w);
  if (j.contains("csi")) {
    std::string model = csi_name(c.csi.model);
    pull(j, "csi", "model", model);
    c.csi.model = csi_from_name(model);
    pull(j, "csi", "xi", c.csi.xi);
    pull(j, "csi", "gamma_shape", c.csi.gamma_shape);
    pull(j, "csi", "gamma_scale", c.csi.gamma_scale);
  }
  if (j.contains("actor")) {
    std::string bb = backbone_name(c.backbone);
    pull(j, "actor", "backbone", bb);
    c.backbone = backbone_from_name(bb);
    pull(j, "actor", "channels", c.fno_channels);
    pull(j, "actor", "hidden", c.hidden);
    pull(j, "actor", "modes_laps_h", c.modes_laps_h);
    pull(j, "actor", "modes_laps_w", c.modes_laps_w);
    pull(j, "actor", "modes_haps_h", c.modes_haps_h);
    pull(j, "actor", "modes_haps_w", c.modes_haps_w);
    pull(j, "actor", "lrd_rank", c.lrd_rank);
    pull(j, "actor", "cnn_kernel", c.cnn_kernel);
  }
  pull(j, "train", "episodes", c.episodes);
  pull(j, "train", "slots", c.slots);
  pull(j, "train", "update_period", c.update_period);
  pull(j, "train", "checkpoint_period", c.checkpoint_period);
  pull(j, "train", "batch", c.batch);
  pull(j, "train", "lr", c.lr);
  pull(j, "train", "entropy_laps", c.entropy_laps);
  pull(j, "train", "entropy_haps", c.entropy_haps);
  pull(j, "train", "buffer_capacity", c.buffer_capacity);
  pull(j, "train", "regenerate", c.regenerate);
  pull(j, "train", "eval_episodes", c.eval_episodes);
  if (j.contains("seed")) j.at("seed").get_to(c.seed);
  c.validate();
  return c;
}

void apply_override(json& doc, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::invalid_argument("override must look like key.path=value: " + assignment);
  std::string path = assignment.substr(0, eq);
  std::string raw = assignment.substr(eq + 1);

  json* cur = &doc;
  size_t pos = 0;
  while (true) {
    size_t dot = path.find('.', pos);
    std::string key = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (key.empty()) throw std::invalid_argument("empty key segment in override: " + assignment);
    // overrides land on a fully populated document, so the path must exist
    if (!cur->is_object() || !cur->contains(key))
      throw std::invalid_argument("unknown config field in override: " + assignment);
    if (dot == std::string::npos) {
      json value;
      try {
        value = json::parse(raw);
      } catch (const json::parse_error&) {
        value = raw;  // unquoted strings (csi model names, backbone)
      }
      if (!value.is_number() && !value.is_boolean() && !value.is_string())
        throw std::invalid_argument("override value must be scalar: " + assignment);
      (*cur)[key] = value;
      return;
    }
    cur = &(*cur)[key];
    pos = dot + 1;
  }
}

EpisodeSim::EpisodeSim(const SystemConfig& cfg, Rng rng)
    : cfg_(cfg),
      rng_(rng),
      users_(cfg.total_users()),
      layout_(make_layout(cfg.clusters, cfg.disc_radius_m, cfg.grid_spacing_m,
                          cfg.laps_altitude_m, cfg.haps_altitude_m, cfg.haps_jitter_m)),
      platform_state_(ad::Tensor::zeros({2, users_, cfg.haps_antennas})) {
  rho_laps_ = doppler_rho(cfg.velocity_mps, cfg.laps_carrier_hz, cfg.slot_seconds);
  rho_haps_ = doppler_rho(cfg.velocity_mps, cfg.haps_carrier_hz, cfg.slot_seconds);
  ch_.laps.assign(cfg.clusters, std::vector<CVec>(users_));
  ch_.haps.assign(users_, CVec());
  cluster_states_.assign(cfg.clusters,
                         ad::Tensor::zeros({2, cfg.users_per_cluster, cfg.laps_antennas}));
  shadow_laps_.assign(static_cast<size_t>(cfg.clusters) * users_, 0.0);
  shadow_haps_.assign(users_, 0.0);
  nlos_laps_.assign(static_cast<size_t>(cfg.clusters) * users_, CVec());
  nlos_haps_.assign(users_, CVec());
  gain_laps_.assign(static_cast<size_t>(cfg.clusters) * users_, 0.0);
  gain_haps_.assign(users_, 0.0);
}

void EpisodeSim::begin() {
  topo_ = init_episode(layout_, cfg_.users_per_cluster, cfg_.velocity_mps, rng_);
  double sd = std::sqrt(cfg_.shadow_var_db2);
  for (int b = 0; b < cfg_.clusters; ++b)
    for (int u = 0; u < users_; ++u) shadow_laps_[idx(b, u)] = sd * rng_.normal();
  for (int u = 0; u < users_; ++u) shadow_haps_[u] = sd * rng_.normal();
  for (int b = 0; b < cfg_.clusters; ++b)
    for (int u = 0; u < users_; ++u) {
      CVec& z = nlos_laps_[idx(b, u)];
      z.resize(cfg_.laps_antennas);
      for (auto& e : z) e = rng_.cnormal();
    }
  for (int u = 0; u < users_; ++u) {
    CVec& z = nlos_haps_[u];
    z.resize(cfg_.haps_antennas);
    for (auto& e : z) e = rng_.cnormal();
  }
  slot_ = -1;
}

void EpisodeSim::next_slot() {
  if (slot_ < 0) {
    slot_ = 0;  // initial draws from begin() serve the first slot
  } else {
    step_mobility(topo_, cfg_.slot_seconds, rng_);
    for (auto& z : nlos_laps_) step_nlos(z, rho_laps_, rng_);
    for (auto& z : nlos_haps_) step_nlos(z, rho_haps_, rng_);
    ++slot_;
  }
  compute_channels();
  build_states();
}

void EpisodeSim::compute_channels() {
  for (int b = 0; b < cfg_.clusters; ++b) {
    BsSite site = laps_site(topo_, b);
    for (int u = 0; u < users_; ++u) {
      const Vec2& p = topo_.users[u].pos;
      double d = distance_to(site, p);
      Angles an = angles_to(site, p);
      double g = large_scale_gain(d, cfg_.laps_carrier_hz, shadow_laps_[idx(b, u)]);
      gain_laps_[idx(b, u)] = g;
      CVec los = steering_vector(an.theta, an.phi, cfg_.laps_antennas);
      ch_.laps[b][u] = compose_channel(los, nlos_laps_[idx(b, u)], cfg_.rician_x, g);
    }
  }
  BsSite hs = haps_site(topo_);
  for (int u = 0; u < users_; ++u) {
    const Vec2& p = topo_.users[u].pos;
    double d = distance_to(hs, p);
    Angles an = angles_to(hs, p);
    double g = large_scale_gain(d, cfg_.haps_carrier_hz, shadow_haps_[u]);
    gain_haps_[u] = g;
    CVec los = steering_vector(an.theta, an.phi, cfg_.haps_antennas);
    ch_.haps[u] = compose_channel(los, nlos_haps_[u], cfg_.rician_x, g);
  }
}

void EpisodeSim::build_states() {
  int K = cfg_.users_per_cluster;
  for (int b = 0; b < cfg_.clusters; ++b) {
    std::vector<CVec> rows(K);
    for (int k = 0; k < K; ++k) {
      int u = b * K + k;  // the cluster observes its own served users
      rows[k] = corrupt_csi(ch_.laps[b][u], cfg_.csi, rng_, std::sqrt(gain_laps_[idx(b, u)]));
    }
    cluster_states_[b] = state_matrix(rows);
  }
  std::vector<CVec> rows(users_);
  for (int u = 0; u < users_; ++u)
    rows[u] = corrupt_csi(ch_.haps[u], cfg_.csi, rng_, std::sqrt(gain_haps_[u]));
  platform_state_ = state_matrix(rows);
}

}  // namespace skybeam
