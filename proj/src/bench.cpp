// SPDX-License-Identifier: Apache-2.0
#include "skybeam/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "skybeam/checkpoint.hpp"
#include "skybeam/learn.hpp"

namespace skybeam {

namespace {

using nlohmann::json;

constexpr const char* kManifestFormat = "skybeam-run-1";

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// CSI column encoding: 1 perfect, the correlation factor for the additive
// model, -1 for the multiplicative model.
double xi_code(const CsiNoiseModel& m) {
  switch (m.model) {
    case CsiModel::perfect: return 1.0;
    case CsiModel::additive: return m.xi;
    case CsiModel::multiplicative: return -1.0;
  }
  return 1.0;
}

struct Row {
  std::string method;
  double xi = 1.0;
  double param = 0.0;
  double value = 0.0;
  double ci = 0.0;
};

struct Ctx {
  const ScenarioRequest& req;
  std::vector<Row> rows;
  std::map<std::string, double> wall;
  std::map<std::string, std::string> group_of_row;  // row index -> group key
  const std::map<std::string, double>* fixed_wall = nullptr;

  explicit Ctx(const ScenarioRequest& r) : req(r) {}

  // Runs fn, attributing every row it appends to one timed group.
  void group(const std::string& key, const std::function<void()>& fn) {
    size_t before = rows.size();
    auto t0 = std::chrono::steady_clock::now();
    fn();
    double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (fixed_wall) {
      auto it = fixed_wall->find(key);
      if (it == fixed_wall->end())
        throw std::runtime_error("manifest timing missing for group " + key);
      sec = it->second;
    }
    wall[key] = sec;
    for (size_t i = before; i < rows.size(); ++i) group_of_row[std::to_string(i)] = key;
  }
};

double aggregate_ci(const std::vector<double>& xs) {
  size_t n = xs.size();
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= double(n);
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= double(n - 1);
  return 1.96 * std::sqrt(var / double(n));
}

LoadedCheckpoint require_checkpoint(const ScenarioRequest& req) {
  if (req.checkpoint_path.empty())
    throw std::runtime_error("scenario " + req.scenario +
                             " needs a trained policy checkpoint; run the train_curve scenario "
                             "first and pass its checkpoint_final.json");
  return load_checkpoint(req.checkpoint_path, req.cfg);
}

std::vector<std::string> default_methods(const std::string& scenario) {
  if (scenario == "train_curve") return {"policy"};
  if (scenario == "rate_vs_slot" || scenario == "sweep_l" || scenario == "sweep_velocity")
    return {"policy", "mrt", "zf", "wmmse"};
  if (scenario == "sweep_B" || scenario == "sweep_K" || scenario == "sweep_lrd")
    return {"policy"};
  if (scenario == "buffer_vs_regen") return {"buffer", "regenerate"};
  if (scenario == "transfer_compare") return {"full", "transfer"};
  if (scenario == "baseline_only") return {"mrt", "zf", "wmmse"};
  if (scenario == "complexity") return {"spectral", "conv", "dense", "wmmse"};
  throw std::invalid_argument("unknown scenario: " + scenario);
}

std::vector<double> default_sweep(const std::string& scenario, const SystemConfig& cfg) {
  if (scenario == "sweep_l") return {2, 3, 4, 5, 6};
  if (scenario == "sweep_velocity") return {0.5, 1.0, 2.0, 3.0};
  if (scenario == "sweep_B") return {4, 9, 12, 16};
  if (scenario == "sweep_K") return {2, 3, 4};
  if (scenario == "sweep_lrd") {
    std::vector<double> v{0};
    int cap = std::min(cfg.total_users(), cfg.haps_antennas);
    for (int j = 1; j <= 3 && j < cap; ++j) v.push_back(j);
    return v;
  }
  return {};
}

void push_eval_rows(Ctx& c, const std::string& method, double xi, double param,
                    const EvalResult& ev) {
  Row r;
  r.method = method;
  r.xi = xi;
  r.param = param;
  r.value = ev.mean_sum_rate;
  r.ci = aggregate_ci(ev.per_episode_sum_rate);
  c.rows.push_back(r);
}

void run_train_curve(Ctx& c) {
  const SystemConfig& cfg = c.req.cfg;
  double xi = xi_code(cfg.csi);
  c.group("policy@" + fmt17(xi), [&] {
    TrainOptions topt;
    topt.checkpoint_dir = c.req.out_dir;
    TrainResult res = train(cfg, topt);
    save_checkpoint(c.req.out_dir + "/checkpoint_final.json", cfg, res.cluster_actor,
                    res.platform_actor, res.opt_cluster, res.opt_platform, cfg.episodes);
    for (size_t e = 0; e < res.episode_reward.size(); ++e)
      c.rows.push_back({"policy", xi, double(e + 1), res.episode_reward[e], 0.0});
  });
}

void run_rate_vs_slot(Ctx& c, const std::vector<std::string>& methods) {
  const SystemConfig& cfg = c.req.cfg;
  for (const std::string& m : methods) {
    if (m == "policy") {
      LoadedCheckpoint ck = require_checkpoint(c.req);
      // the figure's three observation regimes: exact, lightly and heavily
      // degraded channel knowledge
      std::vector<CsiNoiseModel> variants;
      variants.push_back({CsiModel::perfect, 1.0, 10.0, 0.1});
      variants.push_back({CsiModel::additive, 0.8, 10.0, 0.1});
      variants.push_back({CsiModel::additive, 0.6, 10.0, 0.1});
      for (const auto& v : variants) {
        SystemConfig c2 = cfg;
        c2.csi = v;
        double xi = xi_code(v);
        c.group("policy@" + fmt17(xi), [&] {
          EvalResult ev =
              evaluate_policy(c2, ck.laps, ck.haps, cfg.eval_episodes, cfg.seed);
          for (int t = 0; t < cfg.slots; ++t)
            c.rows.push_back({"policy", xi, double(t + 1), ev.per_slot_sum_rate[t],
                              ev.per_slot_ci95[t]});
        });
      }
    } else {
      c.group(m + "@1", [&] {
        EvalResult ev = evaluate_baseline(cfg, m, cfg.eval_episodes, cfg.seed);
        for (int t = 0; t < cfg.slots; ++t)
          c.rows.push_back({m, 1.0, double(t + 1), ev.per_slot_sum_rate[t],
                            ev.per_slot_ci95[t]});
      });
    }
  }
}

void run_point_sweep(Ctx& c, const std::vector<std::string>& methods,
                     const std::vector<double>& values) {
  const SystemConfig& cfg = c.req.cfg;
  const std::string& sc = c.req.scenario;
  LoadedCheckpoint ck;
  bool have_ck = false;
  if (std::find(methods.begin(), methods.end(), std::string("policy")) != methods.end()) {
    ck = require_checkpoint(c.req);
    have_ck = true;
  }
  for (const std::string& m : methods) {
    double xi = (m == "policy") ? xi_code(cfg.csi) : 1.0;
    c.group(m + "@" + fmt17(xi), [&] {
      for (double v : values) {
        SystemConfig c2 = cfg;
        if (sc == "sweep_l")
          c2.grid_spacing_m = v * 1000.0;  // sweep values in kilometers
        else
          c2.velocity_mps = v;
        c2.validate();
        EvalResult ev;
        if (m == "policy") {
          (void)have_ck;
          ev = evaluate_policy(c2, ck.laps, ck.haps, cfg.eval_episodes, cfg.seed);
        } else {
          ev = evaluate_baseline(c2, m, cfg.eval_episodes, cfg.seed);
        }
        push_eval_rows(c, m, xi, v, ev);
      }
    });
  }
}

void run_retrain_sweep(Ctx& c, const std::vector<double>& values) {
  const SystemConfig& cfg = c.req.cfg;
  const std::string& sc = c.req.scenario;
  double xi = xi_code(cfg.csi);

  // cluster-count sweeps keep the trained cluster policy and refit the
  // platform actor whose geometry changes with the cluster count
  LoadedCheckpoint ck;
  if (sc == "sweep_B") ck = require_checkpoint(c.req);

  c.group("policy@" + fmt17(xi), [&] {
    for (double v : values) {
      SystemConfig c2 = cfg;
      if (sc == "sweep_B")
        c2.clusters = static_cast<int>(v);
      else if (sc == "sweep_K")
        c2.users_per_cluster = static_cast<int>(v);
      else
        c2.lrd_rank = static_cast<int>(v);
      c2.validate();
      TrainOptions topt;
      if (sc == "sweep_B") {
        topt.train_cluster = false;
        topt.init_cluster = &ck.laps;
      }
      TrainResult res = train(c2, topt);
      EvalResult ev = evaluate_policy(c2, res.cluster_actor, res.platform_actor,
                                      cfg.eval_episodes, cfg.seed);
      push_eval_rows(c, "policy", xi, v, ev);
    }
  });
}

void run_buffer_vs_regen(Ctx& c, const std::vector<std::string>& methods) {
  const SystemConfig& cfg = c.req.cfg;
  double xi = xi_code(cfg.csi);
  for (const std::string& m : methods) {
    if (m != "buffer" && m != "regenerate")
      throw std::invalid_argument("buffer_vs_regen methods are buffer and regenerate");
    c.group(m + "@" + fmt17(xi), [&] {
      SystemConfig c2 = cfg;
      c2.regenerate = (m == "regenerate");
      TrainResult res = train(c2);
      for (size_t e = 0; e < res.episode_reward.size(); ++e)
        c.rows.push_back({m, xi, double(e + 1), res.episode_reward[e], 0.0});
      EvalResult ev = evaluate_policy(c2, res.cluster_actor, res.platform_actor,
                                      cfg.eval_episodes, cfg.seed);
      push_eval_rows(c, m, xi, 0.0, ev);
    });
  }
}

void run_transfer_compare(Ctx& c) {
  const SystemConfig& cfg = c.req.cfg;
  double xi = xi_code(cfg.csi);
  TrainResult full;
  c.group("full@" + fmt17(xi), [&] {
    full = train(cfg);
    for (size_t e = 0; e < full.episode_reward.size(); ++e)
      c.rows.push_back({"full", xi, double(e + 1), full.episode_reward[e], 0.0});
    EvalResult ev = evaluate_policy(cfg, full.cluster_actor, full.platform_actor,
                                    cfg.eval_episodes, cfg.seed);
    push_eval_rows(c, "full", xi, 0.0, ev);
  });
  c.group("transfer@" + fmt17(xi), [&] {
    Rng r = Rng(cfg.seed).fork(0xA3);
    ActorNetwork fresh = build_actor(cfg.haps_actor_config(), r);
    transfer_layers(full.cluster_actor, fresh, 1.0);
    TrainOptions topt;
    topt.train_cluster = false;
    topt.init_cluster = &full.cluster_actor;
    topt.init_platform = &fresh;
    topt.platform_spectral_only = true;
    TrainResult res = train(cfg, topt);
    for (size_t e = 0; e < res.episode_reward.size(); ++e)
      c.rows.push_back({"transfer", xi, double(e + 1), res.episode_reward[e], 0.0});
    EvalResult ev = evaluate_policy(cfg, res.cluster_actor, res.platform_actor,
                                    cfg.eval_episodes, cfg.seed);
    push_eval_rows(c, "transfer", xi, 0.0, ev);
  });
}

void run_baseline_only(Ctx& c, const std::vector<std::string>& methods) {
  const SystemConfig& cfg = c.req.cfg;
  for (const std::string& m : methods) {
    c.group(m + "@1", [&] {
      EvalResult ev = evaluate_baseline(cfg, m, cfg.eval_episodes, cfg.seed);
      push_eval_rows(c, m, 1.0, 0.0, ev);
    });
  }
}

void run_complexity(Ctx& c, const std::vector<std::string>& methods) {
  const SystemConfig& cfg = c.req.cfg;
  ComplexityInput in;
  in.users = cfg.total_users();
  in.antennas = cfg.haps_antennas;
  in.modes_h = cfg.modes_haps_h;
  in.modes_w = cfg.modes_haps_w;
  in.channels = cfg.fno_channels;
  in.kernel = cfg.cnn_kernel;
  in.c_out = cfg.fno_channels;
  in.hidden = cfg.hidden;
  ComplexityReport rep = complexity_estimate(in);
  double u = double(in.users);
  c.group("complexity@1", [&] {
    for (const std::string& m : methods) {
      double v = 0.0;
      if (m == "spectral") v = double(rep.spectral);
      else if (m == "conv") v = double(rep.conv);
      else if (m == "dense") v = double(rep.dense);
      else if (m == "wmmse") v = double(rep.wmmse);
      else throw std::invalid_argument("unknown complexity method: " + m);
      c.rows.push_back({m, 1.0, u, v, 0.0});
    }
    c.rows.push_back({"spectral_reference", 1.0, u, double(rep.spectral_reference), 0.0});
    c.rows.push_back({"conv_reference", 1.0, u, double(rep.conv_reference), 0.0});
  });
}

ScenarioResult write_outputs(const Ctx& c) {
  namespace fs = std::filesystem;
  fs::create_directories(c.req.out_dir);
  ScenarioResult out;
  out.csv_path = c.req.out_dir + "/metrics.csv";
  out.manifest_path = c.req.out_dir + "/manifest.json";

  std::ofstream csv(out.csv_path);
  if (!csv) throw std::runtime_error("cannot write " + out.csv_path);
  csv << "scenario,method,xi,param,value_bpshz,ci95,wall_s\n";
  for (size_t i = 0; i < c.rows.size(); ++i) {
    const Row& r = c.rows[i];
    double wall = c.wall.at(c.group_of_row.at(std::to_string(i)));
    csv << c.req.scenario << ',' << r.method << ',' << fmt17(r.xi) << ',' << fmt17(r.param)
        << ',' << fmt17(r.value) << ',' << fmt17(r.ci) << ',' << fmt17(wall) << '\n';
  }
  csv.close();
  if (!csv) throw std::runtime_error("failed writing " + out.csv_path);

  json manifest;
  manifest["format"] = kManifestFormat;
  manifest["scenario"] = c.req.scenario;
  manifest["methods"] = c.req.methods;
  manifest["sweep_values"] = c.req.sweep_values;
  manifest["checkpoint"] = c.req.checkpoint_path;
  manifest["out_csv"] = "metrics.csv";
  manifest["config"] = config_to_json(c.req.cfg);
  json timings = json::object();
  for (const auto& [k, v] : c.wall) timings[k] = v;
  manifest["timings"] = timings;
  std::ofstream mf(out.manifest_path);
  if (!mf) throw std::runtime_error("cannot write " + out.manifest_path);
  mf << manifest.dump(2);
  mf.close();
  if (!mf) throw std::runtime_error("failed writing " + out.manifest_path);
  return out;
}

ScenarioResult run_impl(ScenarioRequest req, const std::map<std::string, double>* fixed_wall) {
  if (std::find(kScenarioNames.begin(), kScenarioNames.end(), req.scenario) ==
      kScenarioNames.end())
    throw std::invalid_argument("unknown scenario: " + req.scenario);
  req.cfg.validate();
  if (req.methods.empty()) req.methods = default_methods(req.scenario);
  if (req.sweep_values.empty()) req.sweep_values = default_sweep(req.scenario, req.cfg);

  std::filesystem::create_directories(req.out_dir);
  Ctx c(req);
  c.fixed_wall = fixed_wall;

  const std::string& sc = req.scenario;
  if (sc == "train_curve") run_train_curve(c);
  else if (sc == "rate_vs_slot") run_rate_vs_slot(c, req.methods);
  else if (sc == "sweep_l" || sc == "sweep_velocity") run_point_sweep(c, req.methods, req.sweep_values);
  else if (sc == "sweep_B" || sc == "sweep_K" || sc == "sweep_lrd") run_retrain_sweep(c, req.sweep_values);
  else if (sc == "buffer_vs_regen") run_buffer_vs_regen(c, req.methods);
  else if (sc == "transfer_compare") run_transfer_compare(c);
  else if (sc == "baseline_only") run_baseline_only(c, req.methods);
  else run_complexity(c, req.methods);

  return write_outputs(c);
}

}  // namespace

const std::vector<std::string> kScenarioNames = {
    "train_curve", "rate_vs_slot",  "sweep_l",        "sweep_B",
    "sweep_K",     "sweep_lrd",     "sweep_velocity", "buffer_vs_regen",
    "transfer_compare", "baseline_only", "complexity"};

void apply_desk_profile(SystemConfig& cfg) {
  cfg.clusters = 2;
  cfg.users_per_cluster = 2;
  cfg.laps_antennas = 4;
  cfg.haps_antennas = 8;
  cfg.slots = 20;
  cfg.episodes = 50;
}

ComplexityReport complexity_estimate(const ComplexityInput& in) {
  if (in.users < 1 || in.antennas < 1 || in.modes_h < 1 || in.modes_w < 1 || in.channels < 1 ||
      in.layers < 1 || in.kernel < 1 || in.c_in < 1 || in.c_out < 1 || in.hidden < 1 ||
      in.wmmse_iters < 1)
    throw std::invalid_argument("complexity estimate needs positive arguments");
  ComplexityReport rep;
  double u = in.users, n = in.antennas;
  double fno = 2.0 * (2.0 * u * n * std::log2(u) + 2.0 * u * n * std::log2(n) +
                      double(in.layers) * in.modes_h * in.modes_w +
                      double(in.layers) * in.channels);
  rep.spectral = llround(fno);
  long long uk = std::max(0, in.users - in.kernel + 1);
  long long nk = std::max(0, in.antennas - in.kernel + 1);
  rep.conv = uk * nk * in.c_in * in.c_out * (long long)(in.kernel) * in.kernel;
  rep.dense = (long long)(in.channels) * in.users * in.antennas * in.hidden;
  long long U = in.users, N = in.antennas;
  rep.wmmse = (long long)(in.wmmse_iters) * (U * U * N + U * N * N * N);
  return rep;
}

ScenarioResult run_scenario(const ScenarioRequest& req) { return run_impl(req, nullptr); }

ScenarioResult rerun_manifest(const std::string& manifest_path, const std::string& out_dir) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot read manifest " + manifest_path);
  json doc = json::parse(in);
  if (!doc.contains("format") || doc.at("format").get<std::string>() != kManifestFormat)
    throw std::invalid_argument("unsupported manifest format in " + manifest_path);
  ScenarioRequest req;
  doc.at("scenario").get_to(req.scenario);
  doc.at("methods").get_to(req.methods);
  doc.at("sweep_values").get_to(req.sweep_values);
  doc.at("checkpoint").get_to(req.checkpoint_path);
  req.cfg = config_from_json(doc.at("config"));
  req.out_dir = out_dir;
  std::map<std::string, double> timings;
  for (const auto& [k, v] : doc.at("timings").items()) timings[k] = v.get<double>();
  return run_impl(req, &timings);
}

}  // namespace skybeam
