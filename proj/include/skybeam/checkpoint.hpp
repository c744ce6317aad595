// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "skybeam/actor.hpp"
#include "skybeam/adam.hpp"
#include "skybeam/env.hpp"

namespace skybeam {

// Hash of the configuration fields that fix the network and channel geometry
// (geometry, radio, actor groups). Training-schedule knobs are excluded so an
// evaluation config with different episode counts still matches.
uint64_t config_fingerprint(const SystemConfig& cfg);

struct LoadedCheckpoint {
  ActorNetwork laps;
  ActorNetwork haps;
  ad::AdamState opt_laps;
  ad::AdamState opt_haps;
  int episode = 0;
  uint64_t fingerprint = 0;
};

// Self-describing JSON document: format version, fingerprint, episode index,
// both actors (config + named parameter tensors) and optimizer moments.
// Values survive the round trip bit-for-bit.
void save_checkpoint(const std::string& path, const SystemConfig& cfg, const ActorNetwork& laps,
                     const ActorNetwork& haps, const ad::AdamState& opt_laps,
                     const ad::AdamState& opt_haps, int episode);

// Throws on unreadable files, version mismatch, or when the stored actor
// geometry disagrees with the supplied configuration.
LoadedCheckpoint load_checkpoint(const std::string& path, const SystemConfig& cfg);

}  // namespace skybeam
