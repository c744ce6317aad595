// SPDX-License-Identifier: Apache-2.0
#include "skybeam/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace skybeam {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "skybeam-checkpoint-1";

json actor_config_json(const ActorConfig& c) {
  return {{"backbone", c.backbone == Backbone::fno ? "fno" : "cnn"},
          {"users", c.users},
          {"antennas", c.antennas},
          {"channels", c.channels},
          {"modes_h", c.modes_h},
          {"modes_w", c.modes_w},
          {"hidden", c.hidden},
          {"lrd_rank", c.lrd_rank},
          {"cnn_kernel", c.cnn_kernel}};
}

ActorConfig actor_config_from_json(const json& j) {
  ActorConfig c;
  std::string bb = j.at("backbone").get<std::string>();
  if (bb != "fno" && bb != "cnn") throw std::invalid_argument("checkpoint: unknown backbone " + bb);
  c.backbone = bb == "fno" ? Backbone::fno : Backbone::cnn;
  j.at("users").get_to(c.users);
  j.at("antennas").get_to(c.antennas);
  j.at("channels").get_to(c.channels);
  j.at("modes_h").get_to(c.modes_h);
  j.at("modes_w").get_to(c.modes_w);
  j.at("hidden").get_to(c.hidden);
  j.at("lrd_rank").get_to(c.lrd_rank);
  j.at("cnn_kernel").get_to(c.cnn_kernel);
  return c;
}

bool same_config(const ActorConfig& a, const ActorConfig& b) {
  return a.backbone == b.backbone && a.users == b.users && a.antennas == b.antennas &&
         a.channels == b.channels && a.modes_h == b.modes_h && a.modes_w == b.modes_w &&
         a.hidden == b.hidden && a.lrd_rank == b.lrd_rank && a.cnn_kernel == b.cnn_kernel;
}

json actor_to_json(const ActorNetwork& net) {
  json params = json::array();
  for (const auto& p : net.params)
    params.push_back({{"name", p.name}, {"shape", p.value.shape}, {"data", p.value.v}});
  return {{"config", actor_config_json(net.cfg)}, {"params", params}};
}

ActorNetwork actor_from_json(const json& j, const ActorConfig& expect) {
  ActorConfig stored = actor_config_from_json(j.at("config"));
  if (!same_config(stored, expect))
    throw std::invalid_argument("checkpoint geometry mismatch for actor (" +
                                std::to_string(stored.users) + "x" +
                                std::to_string(stored.antennas) + " stored)");
  Rng scratch(0);
  ActorNetwork net = build_actor(stored, scratch);
  for (const auto& pj : j.at("params")) {
    std::string name = pj.at("name").get<std::string>();
    bool found = false;
    for (auto& p : net.params) {
      if (p.name != name) continue;
      std::vector<int> shape = pj.at("shape").get<std::vector<int>>();
      if (shape != p.value.shape)
        throw std::invalid_argument("checkpoint shape mismatch for parameter " + name);
      pj.at("data").get_to(p.value.v);
      if (p.value.v.size() != static_cast<size_t>(p.value.numel()))
        throw std::invalid_argument("checkpoint data length mismatch for parameter " + name);
      found = true;
      break;
    }
    if (!found) throw std::invalid_argument("checkpoint names unknown parameter " + name);
  }
  return net;
}

json optim_to_json(const ad::AdamState& s) {
  json m = json::array(), v = json::array();
  for (const auto& t : s.m) m.push_back({{"shape", t.shape}, {"data", t.v}});
  for (const auto& t : s.v) v.push_back({{"shape", t.shape}, {"data", t.v}});
  return {{"lr", s.lr}, {"beta1", s.beta1}, {"beta2", s.beta2},
          {"eps", s.eps}, {"t", s.t},       {"m", m},
          {"v", v}};
}

ad::AdamState optim_from_json(const json& j) {
  ad::AdamState s;
  j.at("lr").get_to(s.lr);
  j.at("beta1").get_to(s.beta1);
  j.at("beta2").get_to(s.beta2);
  j.at("eps").get_to(s.eps);
  j.at("t").get_to(s.t);
  for (const auto& tj : j.at("m")) {
    ad::Tensor t(tj.at("shape").get<std::vector<int>>());
    tj.at("data").get_to(t.v);
    s.m.push_back(std::move(t));
  }
  for (const auto& tj : j.at("v")) {
    ad::Tensor t(tj.at("shape").get<std::vector<int>>());
    tj.at("data").get_to(t.v);
    s.v.push_back(std::move(t));
  }
  return s;
}

}  // namespace

uint64_t config_fingerprint(const SystemConfig& cfg) {
  json doc = config_to_json(cfg);
  json sub = {{"geometry", doc.at("geometry")}, {"radio", doc.at("radio")}, {"actor", doc.at("actor")}};
  std::string s = sub.dump();
  uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void save_checkpoint(const std::string& path, const SystemConfig& cfg, const ActorNetwork& laps,
                     const ActorNetwork& haps, const ad::AdamState& opt_laps,
                     const ad::AdamState& opt_haps, int episode) {
  json doc;
  doc["format"] = kFormat;
  doc["fingerprint"] = config_fingerprint(cfg);
  doc["episode"] = episode;
  doc["actors"] = {{"cluster", actor_to_json(laps)}, {"platform", actor_to_json(haps)}};
  doc["optim"] = {{"cluster", optim_to_json(opt_laps)}, {"platform", optim_to_json(opt_haps)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint file " + path);
  out << doc.dump();
  out.close();
  if (!out) throw std::runtime_error("failed writing checkpoint file " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path, const SystemConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint file " + path);
  json doc = json::parse(in, nullptr, true);
  if (!doc.contains("format") || doc.at("format").get<std::string>() != kFormat)
    throw std::invalid_argument("unsupported checkpoint format in " + path);
  LoadedCheckpoint out;
  doc.at("episode").get_to(out.episode);
  doc.at("fingerprint").get_to(out.fingerprint);
  out.laps = actor_from_json(doc.at("actors").at("cluster"), cfg.laps_actor_config());
  out.haps = actor_from_json(doc.at("actors").at("platform"), cfg.haps_actor_config());
  out.opt_laps = optim_from_json(doc.at("optim").at("cluster"));
  out.opt_haps = optim_from_json(doc.at("optim").at("platform"));
  return out;
}

}  // namespace skybeam
