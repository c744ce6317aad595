// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "skybeam/env.hpp"

namespace skybeam {

// Reduced problem size for quick interactive or CI runs.
void apply_desk_profile(SystemConfig& cfg);

struct ComplexityInput {
  int users = 16;
  int antennas = 64;
  int modes_h = 8;
  int modes_w = 20;
  int channels = 8;   // spectral width
  int layers = 16;    // spectral filter depth used by the estimate
  int kernel = 3;
  int c_in = 2;
  int c_out = 8;
  int hidden = 512;
  int wmmse_iters = 100;
};

struct ComplexityReport {
  long long spectral = 0;  // transform-based backbone
  long long conv = 0;      // convolutional backbone
  long long dense = 0;     // flatten-to-hidden product
  long long wmmse = 0;     // iterative solver, exact integer formula
  // published full-pipeline totals, surfaced as reference constants
  long long spectral_reference = 5260542;
  long long conv_reference = 6808832;
};

ComplexityReport complexity_estimate(const ComplexityInput& in);

// One experiment request. Sweep scenarios take their parameter grid from
// sweep_values (scenario defaults apply when empty); frozen-policy scenarios
// need checkpoint_path from an earlier train_curve run.
struct ScenarioRequest {
  std::string scenario;
  SystemConfig cfg;
  std::vector<std::string> methods;
  std::vector<double> sweep_values;
  std::string checkpoint_path;
  std::string out_dir = ".";
};

struct ScenarioResult {
  std::string csv_path;
  std::string manifest_path;
};

extern const std::vector<std::string> kScenarioNames;

// Runs the scenario and writes metrics.csv plus manifest.json into out_dir.
// CSV columns: scenario,method,xi,param,value_bpshz,ci95,wall_s with floats
// at 17 significant digits. param 0 marks a whole-run aggregate row where a
// scenario mixes aggregates with curves.
ScenarioResult run_scenario(const ScenarioRequest& req);

// Replays a recorded run: same configuration and seed, wall-clock values
// carried over from the manifest, so the CSV reproduces byte for byte.
ScenarioResult rerun_manifest(const std::string& manifest_path, const std::string& out_dir);

}  // namespace skybeam
