// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <vector>

#include "skybeam/channel.hpp"

namespace skybeam {

// Row-major complex matrix; row u holds the beamforming vector of user u.
struct CMat {
  int rows = 0;
  int cols = 0;
  std::vector<std::complex<double>> a;

  CMat() = default;
  CMat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c) {}

  std::complex<double>& at(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  const std::complex<double>& at(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }
};

// Downlink beams for the whole network. Cluster b serves users
// [b*K, (b+1)*K); the platform layer serves every user.
struct BeamformingSet {
  std::vector<CMat> laps;  // B matrices, each K x N_b
  CMat haps;               // U x N_b0
};

// True propagation state for one slot: laps[b][u] is the vector from cluster
// b's transmitter to (global) user u; haps[u] the platform vector to user u.
struct ChannelSet {
  std::vector<std::vector<CVec>> laps;
  std::vector<CVec> haps;
};

// Scale the matrix so the summed squared magnitude equals the power budget
// exactly. An all-zero matrix has no direction to scale and is an error.
CMat normalize_power(const CMat& w, double p_max);

// Per-user SINR on the cluster layer: the serving beam against every other
// cluster-layer beam received through that user's own cross-channels.
double sinr_laps(int user, const ChannelSet& ch, const BeamformingSet& w, int users_per_cluster,
                 double noise_w);

// Platform layer: interference comes only from the platform's other beams.
double sinr_haps(int user, const ChannelSet& ch, const BeamformingSet& w, double noise_w);

struct RateReport {
  std::vector<double> laps_rate;   // bps/Hz per user
  std::vector<double> haps_rate;
  std::vector<double> total_rate;  // sum of both links per user
  double sum_rate = 0.0;
  double reward = 0.0;             // mean per-user total rate
};

RateReport evaluate_rates(const ChannelSet& ch, const BeamformingSet& w, int users_per_cluster,
                          double noise_w);

}  // namespace skybeam
