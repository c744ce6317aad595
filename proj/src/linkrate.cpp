// SPDX-License-Identifier: Apache-2.0
#include "skybeam/linkrate.hpp"

#include <cmath>
#include <stdexcept>

namespace skybeam {

namespace {

std::complex<double> row_dot(const CVec& h, const CMat& w, int row) {
  std::complex<double> acc{0.0, 0.0};
  for (int j = 0; j < w.cols; ++j) acc += h[static_cast<size_t>(j)] * w.at(row, j);
  return acc;
}

double log2_rate(double sinr) { return std::log2(1.0 + sinr); }

void check_network(const ChannelSet& ch, const BeamformingSet& w, int users_per_cluster) {
  if (users_per_cluster < 1) throw std::invalid_argument("rates: users per cluster must be positive");
  const size_t clusters = w.laps.size();
  if (ch.laps.size() != clusters) throw std::invalid_argument("rates: cluster count mismatch");
  const size_t total = ch.haps.size();
  if (total != clusters * static_cast<size_t>(users_per_cluster))
    throw std::invalid_argument("rates: user count mismatch");
  if (w.haps.rows != static_cast<int>(total)) throw std::invalid_argument("rates: platform beam rows mismatch");
  for (size_t b = 0; b < clusters; ++b) {
    if (w.laps[b].rows != users_per_cluster)
      throw std::invalid_argument("rates: cluster beam rows mismatch");
    if (ch.laps[b].size() != total) throw std::invalid_argument("rates: cross-channel rows mismatch");
  }
}

}  // namespace

CMat normalize_power(const CMat& w, double p_max) {
  if (p_max <= 0.0) throw std::invalid_argument("normalize: non-positive power budget");
  double total = 0.0;
  for (const auto& z : w.a) total += std::norm(z);
  if (total <= 0.0) throw std::invalid_argument("degenerate beamformer");
  const double s = std::sqrt(p_max / total);
  CMat out = w;
  for (auto& z : out.a) z *= s;
  return out;
}

double sinr_laps(int user, const ChannelSet& ch, const BeamformingSet& w, int users_per_cluster,
                 double noise_w) {
  check_network(ch, w, users_per_cluster);
  if (noise_w <= 0.0) throw std::invalid_argument("rates: non-positive noise power");
  const int b = user / users_per_cluster;
  const int k = user % users_per_cluster;
  const size_t uu = static_cast<size_t>(user);
  const double signal = std::norm(row_dot(ch.laps[static_cast<size_t>(b)][uu],
                                          w.laps[static_cast<size_t>(b)], k));
  double denom = noise_w;
  for (size_t bp = 0; bp < w.laps.size(); ++bp) {
    const CVec& h = ch.laps[bp][uu];
    for (int kp = 0; kp < w.laps[bp].rows; ++kp) {
      if (static_cast<int>(bp) == b && kp == k) continue;
      denom += std::norm(row_dot(h, w.laps[bp], kp));
    }
  }
  return signal / denom;
}

double sinr_haps(int user, const ChannelSet& ch, const BeamformingSet& w, double noise_w) {
  if (noise_w <= 0.0) throw std::invalid_argument("rates: non-positive noise power");
  const size_t uu = static_cast<size_t>(user);
  const CVec& h = ch.haps[uu];
  const double signal = std::norm(row_dot(h, w.haps, user));
  double denom = noise_w;
  for (int up = 0; up < w.haps.rows; ++up) {
    if (up == user) continue;
    denom += std::norm(row_dot(h, w.haps, up));
  }
  return signal / denom;
}

RateReport evaluate_rates(const ChannelSet& ch, const BeamformingSet& w, int users_per_cluster,
                          double noise_w) {
  check_network(ch, w, users_per_cluster);
  const int total = static_cast<int>(ch.haps.size());
  RateReport rep;
  rep.laps_rate.resize(static_cast<size_t>(total));
  rep.haps_rate.resize(static_cast<size_t>(total));
  rep.total_rate.resize(static_cast<size_t>(total));
  for (int u = 0; u < total; ++u) {
    const double rl = log2_rate(sinr_laps(u, ch, w, users_per_cluster, noise_w));
    const double rh = log2_rate(sinr_haps(u, ch, w, noise_w));
    rep.laps_rate[static_cast<size_t>(u)] = rl;
    rep.haps_rate[static_cast<size_t>(u)] = rh;
    rep.total_rate[static_cast<size_t>(u)] = rl + rh;
    rep.sum_rate += rl + rh;
  }
  rep.reward = total > 0 ? rep.sum_rate / total : 0.0;
  return rep;
}

}  // namespace skybeam
