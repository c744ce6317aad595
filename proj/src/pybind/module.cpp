// SPDX-License-Identifier: Apache-2.0
//
// Python bindings over the main operations: configuration, training,
// evaluation, scenario runs, and the channel-model helpers.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "skybeam/bench.hpp"
#include "skybeam/channel.hpp"
#include "skybeam/checkpoint.hpp"
#include "skybeam/learn.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace skybeam;

namespace {

SystemConfig parse_config(const std::string& text) {
  return config_from_json(json::parse(text));
}

py::dict eval_dict(const EvalResult& ev) {
  py::dict d;
  d["mean_reward"] = ev.mean_reward;
  d["mean_sum_rate"] = ev.mean_sum_rate;
  d["per_slot_sum_rate"] = ev.per_slot_sum_rate;
  d["per_slot_ci95"] = ev.per_slot_ci95;
  d["per_episode_reward"] = ev.per_episode_reward;
  d["per_episode_sum_rate"] = ev.per_episode_sum_rate;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "beamforming laboratory for a two-layer aerial network";

  m.def("default_config", [] { return config_to_json(SystemConfig{}).dump(2); },
        "Default configuration as a JSON string");

  m.def("desk_config", [] {
    SystemConfig cfg;
    apply_desk_profile(cfg);
    return config_to_json(cfg).dump(2);
  },
        "Reduced desk-scale configuration as a JSON string");

  m.def("validate_config", [](const std::string& text) { (void)parse_config(text); },
        py::arg("config_json"), "Parses and validates; raises ValueError on bad input");

  m.def(
      "train",
      [](const std::string& config_json, const std::string& checkpoint_dir) {
        SystemConfig cfg = parse_config(config_json);
        TrainOptions opt;
        opt.checkpoint_dir = checkpoint_dir;
        TrainResult res = train(cfg, opt);
        if (!checkpoint_dir.empty())
          save_checkpoint(checkpoint_dir + "/checkpoint_final.json", cfg, res.cluster_actor,
                          res.platform_actor, res.opt_cluster, res.opt_platform, cfg.episodes);
        py::dict d;
        d["episode_reward"] = res.episode_reward;
        d["update_events"] = res.update_events;
        d["buffer_pushes"] = res.buffer_pushes;
        d["buffer_samples"] = res.buffer_samples;
        d["checkpoints_written"] = res.checkpoints_written;
        return d;
      },
      py::arg("config_json"), py::arg("checkpoint_dir") = std::string(),
      "Runs the training loop; returns the per-episode reward curve");

  m.def(
      "evaluate_policy",
      [](const std::string& config_json, const std::string& checkpoint_path, int episodes,
         uint64_t seed) {
        SystemConfig cfg = parse_config(config_json);
        LoadedCheckpoint ck = load_checkpoint(checkpoint_path, cfg);
        return eval_dict(evaluate_policy(cfg, ck.laps, ck.haps, episodes, seed));
      },
      py::arg("config_json"), py::arg("checkpoint_path"), py::arg("episodes") = 100,
      py::arg("seed") = 1, "Frozen-policy evaluation from a checkpoint file");

  m.def(
      "evaluate_baseline",
      [](const std::string& config_json, const std::string& method, int episodes,
         uint64_t seed) {
        SystemConfig cfg = parse_config(config_json);
        return eval_dict(evaluate_baseline(cfg, method, episodes, seed));
      },
      py::arg("config_json"), py::arg("method"), py::arg("episodes") = 100, py::arg("seed") = 1,
      "Classical solver evaluation: method is mrt, zf, or wmmse");

  m.def(
      "run_scenario",
      [](const std::string& scenario, const std::string& config_json, const std::string& out_dir,
         const std::vector<std::string>& methods, const std::vector<double>& values,
         const std::string& checkpoint) {
        ScenarioRequest req;
        req.scenario = scenario;
        req.cfg = parse_config(config_json);
        req.out_dir = out_dir;
        req.methods = methods;
        req.sweep_values = values;
        req.checkpoint_path = checkpoint;
        ScenarioResult res = run_scenario(req);
        return py::make_tuple(res.csv_path, res.manifest_path);
      },
      py::arg("scenario"), py::arg("config_json"), py::arg("out_dir"),
      py::arg("methods") = std::vector<std::string>{},
      py::arg("values") = std::vector<double>{}, py::arg("checkpoint") = std::string(),
      "Runs one experiment scenario; returns (csv_path, manifest_path)");

  m.def(
      "rerun_manifest",
      [](const std::string& manifest, const std::string& out_dir) {
        ScenarioResult res = rerun_manifest(manifest, out_dir);
        return py::make_tuple(res.csv_path, res.manifest_path);
      },
      py::arg("manifest_path"), py::arg("out_dir"),
      "Replays a recorded run for bit-identical CSV output");

  m.def(
      "complexity",
      [](int users, int antennas, int modes_h, int modes_w, int channels, int layers, int kernel,
         int hidden, int wmmse_iters) {
        ComplexityInput in;
        in.users = users;
        in.antennas = antennas;
        in.modes_h = modes_h;
        in.modes_w = modes_w;
        in.channels = channels;
        in.layers = layers;
        in.kernel = kernel;
        in.hidden = hidden;
        in.wmmse_iters = wmmse_iters;
        ComplexityReport rep = complexity_estimate(in);
        py::dict d;
        d["spectral"] = rep.spectral;
        d["conv"] = rep.conv;
        d["dense"] = rep.dense;
        d["wmmse"] = rep.wmmse;
        d["spectral_reference"] = rep.spectral_reference;
        d["conv_reference"] = rep.conv_reference;
        return d;
      },
      py::arg("users") = 16, py::arg("antennas") = 64, py::arg("modes_h") = 8,
      py::arg("modes_w") = 20, py::arg("channels") = 8, py::arg("layers") = 16,
      py::arg("kernel") = 3, py::arg("hidden") = 512, py::arg("wmmse_iters") = 100,
      "Per-method operation counts plus the published reference totals");

  m.def("large_scale_gain", &large_scale_gain, py::arg("distance_m"), py::arg("carrier_hz"),
        py::arg("shadow_db") = 0.0, "Free-space power gain with dB-domain shadowing");

  m.def("doppler_rho", &doppler_rho, py::arg("velocity_mps"), py::arg("carrier_hz"),
        py::arg("slot_seconds"), "Lag-one fading correlation coefficient");
}
