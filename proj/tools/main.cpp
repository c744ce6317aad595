// SPDX-License-Identifier: Apache-2.0
//
// Command line front end: training, evaluation, parameter sweeps, classical
// baselines, complexity estimates, and config validation.
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "skybeam/bench.hpp"
#include "skybeam/env.hpp"

namespace {

using nlohmann::json;
using namespace skybeam;

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "run_out";
  std::string manifest;
  std::string checkpoint;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool desk = false;
};

void add_common(CLI::App* sub, CommonOpts& o, bool with_checkpoint) {
  sub->add_option("--config", o.config_path, "JSON configuration file");
  sub->add_option("--out", o.out_dir, "output directory");
  sub->add_option("--override", o.overrides,
                  "dotted-path assignment applied to the configuration, e.g. train.episodes=5");
  sub->add_option("--seed", o.seed, "random seed")->each([&o](const std::string&) {
    o.seed_set = true;
  });
  sub->add_flag("--desk", o.desk, "apply the reduced desk-scale profile");
  sub->add_option("--manifest", o.manifest,
                  "replay a recorded run from its manifest (other options ignored)");
  if (with_checkpoint)
    sub->add_option("--checkpoint", o.checkpoint, "trained policy checkpoint file");
}

SystemConfig build_config(const CommonOpts& o) {
  json doc = config_to_json(SystemConfig{});
  if (!o.config_path.empty()) {
    std::ifstream f(o.config_path);
    if (!f) throw std::invalid_argument("config file not found: " + o.config_path);
    json user = json::parse(f);
    doc.merge_patch(user);
  }
  if (o.desk) {
    doc.merge_patch(json{{"geometry", {{"clusters", 2}, {"users_per_cluster", 2}}},
                         {"radio", {{"laps_antennas", 4}, {"haps_antennas", 8}}},
                         {"train", {{"slots", 20}, {"episodes", 50}}}});
  }
  for (const std::string& ov : o.overrides) apply_override(doc, ov);
  SystemConfig cfg = config_from_json(doc);
  if (o.seed_set) cfg.seed = o.seed;
  return cfg;
}

int run_request(const CommonOpts& o, const std::string& scenario,
                const std::vector<std::string>& methods, const std::vector<double>& values) {
  ScenarioRequest req;
  try {
    if (!o.manifest.empty()) {
      std::ifstream probe(o.manifest);
      if (!probe) throw std::invalid_argument("manifest file not found: " + o.manifest);
    } else {
      req.scenario = scenario;
      req.cfg = build_config(o);
      req.methods = methods;
      req.sweep_values = values;
      req.checkpoint_path = o.checkpoint;
      req.out_dir = o.out_dir;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  try {
    ScenarioResult res = o.manifest.empty() ? run_scenario(req)
                                            : rerun_manifest(o.manifest, o.out_dir);
    std::cout << res.csv_path << "\n" << res.manifest_path << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"beamforming laboratory for a two-layer aerial network"};
  app.require_subcommand(1);

  CommonOpts train_o, eval_o, sweep_o, base_o, valid_o;
  std::string sweep_name;
  std::string sweep_values_arg, base_methods = "mrt,zf,wmmse";

  CLI::App* train = app.add_subcommand("train", "train both policies (train_curve scenario)");
  add_common(train, train_o, false);

  CLI::App* eval = app.add_subcommand("eval", "evaluate a trained policy against the solvers");
  add_common(eval, eval_o, true);

  CLI::App* sweep = app.add_subcommand("sweep", "run a parameter sweep scenario");
  add_common(sweep, sweep_o, true);
  sweep->add_option("--scenario", sweep_name,
                    "one of sweep_l, sweep_B, sweep_K, sweep_lrd, sweep_velocity, "
                    "buffer_vs_regen, transfer_compare, rate_vs_slot");
  sweep->add_option("--values", sweep_values_arg, "comma-separated sweep grid");

  CLI::App* base = app.add_subcommand("baseline", "evaluate the classical solvers only");
  add_common(base, base_o, false);
  base->add_option("--methods", base_methods, "comma-separated subset of mrt,zf,wmmse");

  ComplexityInput cx;
  std::string cx_out;
  CLI::App* comp = app.add_subcommand("complexity", "print per-method operation counts");
  comp->add_option("--U", cx.users, "served users");
  comp->add_option("--N", cx.antennas, "transmit antennas");
  comp->add_option("--modes-h", cx.modes_h, "retained modes, first axis");
  comp->add_option("--modes-w", cx.modes_w, "retained modes, second axis");
  comp->add_option("--channels", cx.channels, "spectral width");
  comp->add_option("--layers", cx.layers, "spectral filter depth");
  comp->add_option("--kernel", cx.kernel, "convolution kernel");
  comp->add_option("--hidden", cx.hidden, "hidden layer width");
  comp->add_option("--Tbar", cx.wmmse_iters, "solver iteration cap");

  CLI::App* valid = app.add_subcommand("validate-config", "parse and validate a configuration");
  add_common(valid, valid_o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (train->parsed()) return run_request(train_o, "train_curve", {}, {});

  if (eval->parsed()) return run_request(eval_o, "rate_vs_slot", {}, {});

  if (sweep->parsed()) {
    if (sweep_o.manifest.empty() && sweep_name.empty()) {
      std::cerr << "error: sweep requires --scenario (or --manifest)\n";
      return 1;
    }
    std::vector<double> values;
    for (const std::string& s : split_csv(sweep_values_arg)) {
      try {
        values.push_back(std::stod(s));
      } catch (const std::exception&) {
        std::cerr << "error: bad sweep value: " << s << "\n";
        return 1;
      }
    }
    return run_request(sweep_o, sweep_name, {}, values);
  }

  if (base->parsed()) return run_request(base_o, "baseline_only", split_csv(base_methods), {});

  if (comp->parsed()) {
    try {
      ComplexityReport rep = complexity_estimate(cx);
      std::cout << "spectral " << rep.spectral << "\n"
                << "conv " << rep.conv << "\n"
                << "dense " << rep.dense << "\n"
                << "wmmse " << rep.wmmse << "\n"
                << "spectral_reference " << rep.spectral_reference << "\n"
                << "conv_reference " << rep.conv_reference << "\n";
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
    return 0;
  }

  if (valid->parsed()) {
    try {
      SystemConfig cfg = build_config(valid_o);
      (void)cfg;
      std::cout << "ok\n";
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
    return 0;
  }

  return 1;
}
