// SPDX-License-Identifier: Apache-2.0
#include "skybeam/topology.hpp"

#include <cmath>
#include <stdexcept>

namespace skybeam {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

Vec2 uniform_disc(const Vec2& center, double radius, Rng& rng) {
  const double r = radius * std::sqrt(rng.uniform());
  const double a = rng.uniform() * kTwoPi;
  return {center.x + r * std::cos(a), center.y + r * std::sin(a)};
}
}  // namespace

ClusterLayout make_layout(int clusters, double radius_m, double spacing_m,
                          double laps_altitude_m, double haps_altitude_m, double haps_jitter_m) {
  if (clusters < 1) throw std::invalid_argument("layout: cluster count must be positive");
  if (radius_m <= 0.0 || spacing_m <= 0.0) throw std::invalid_argument("layout: non-positive extent");
  if (laps_altitude_m <= 0.0 || haps_altitude_m <= 0.0)
    throw std::invalid_argument("layout: non-positive altitude");
  if (haps_jitter_m < 0.0) throw std::invalid_argument("layout: negative jitter radius");
  ClusterLayout out;
  out.clusters = clusters;
  out.radius_m = radius_m;
  out.spacing_m = spacing_m;
  out.laps_altitude_m = laps_altitude_m;
  out.haps_altitude_m = haps_altitude_m;
  out.haps_jitter_m = haps_jitter_m;
  // Row-major square-ish grid, recentered so the centroid sits at the origin.
  int cols = 1;
  while (cols * cols < clusters) ++cols;
  out.centers.reserve(static_cast<size_t>(clusters));
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < clusters; ++i) {
    const int r = i / cols, c = i % cols;
    Vec2 p{c * spacing_m, -r * spacing_m};
    mx += p.x;
    my += p.y;
    out.centers.push_back(p);
  }
  mx /= clusters;
  my /= clusters;
  for (Vec2& p : out.centers) {
    p.x -= mx;
    p.y -= my;
  }
  return out;
}

NetworkTopology init_episode(const ClusterLayout& layout, int users_per_cluster,
                             double velocity_mps, Rng& rng) {
  if (users_per_cluster < 1) throw std::invalid_argument("topology: users per cluster must be positive");
  if (velocity_mps < 0.0) throw std::invalid_argument("topology: negative velocity");
  NetworkTopology topo;
  topo.layout = layout;
  topo.users_per_cluster = users_per_cluster;
  topo.velocity_mps = velocity_mps;
  topo.haps_pos = uniform_disc({0.0, 0.0}, layout.haps_jitter_m, rng);
  topo.users.reserve(static_cast<size_t>(layout.clusters) * users_per_cluster);
  for (int b = 0; b < layout.clusters; ++b) {
    for (int k = 0; k < users_per_cluster; ++k) {
      UserState u;
      u.cluster = b;
      u.pos = uniform_disc(layout.centers[static_cast<size_t>(b)], layout.radius_m, rng);
      u.heading = rng.uniform() * kTwoPi;
      topo.users.push_back(u);
    }
  }
  return topo;
}

void step_mobility(NetworkTopology& topo, double slot_seconds, Rng& rng) {
  if (slot_seconds <= 0.0) throw std::invalid_argument("mobility: non-positive slot length");
  const double step = topo.velocity_mps * slot_seconds;
  const double q = topo.layout.radius_m;
  for (UserState& u : topo.users) {
    const Vec2 c = topo.layout.centers[static_cast<size_t>(u.cluster)];
    double heading = u.heading;
    bool moved = false;
    for (int attempt = 0; attempt < 64; ++attempt) {
      const Vec2 p{u.pos.x + step * std::cos(heading), u.pos.y + step * std::sin(heading)};
      const double dx = p.x - c.x, dy = p.y - c.y;
      if (dx * dx + dy * dy <= q * q) {
        u.pos = p;
        u.heading = heading;
        moved = true;
        break;
      }
      heading = rng.uniform() * kTwoPi;
    }
    if (!moved) u.heading = heading;  // hold position, keep the last drawn direction
  }
}

BsSite laps_site(const NetworkTopology& topo, int cluster) {
  if (cluster < 0 || cluster >= topo.layout.clusters)
    throw std::out_of_range("topology: cluster index out of range");
  return {topo.layout.centers[static_cast<size_t>(cluster)], topo.layout.laps_altitude_m};
}

BsSite haps_site(const NetworkTopology& topo) {
  return {topo.haps_pos, topo.layout.haps_altitude_m};
}

double distance_to(const BsSite& site, const Vec2& user) {
  const double dx = user.x - site.pos.x;
  const double dy = user.y - site.pos.y;
  const double dz = site.altitude_m;
  const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
  if (d <= 0.0) throw std::invalid_argument("degenerate geometry: coincident points");
  return d;
}

Angles angles_to(const BsSite& site, const Vec2& user) {
  const double dx = user.x - site.pos.x;
  const double dy = user.y - site.pos.y;
  const double d = distance_to(site, user);
  Angles a;
  a.theta = std::asin(site.altitude_m / d);
  a.phi = std::atan2(dy, dx);
  return a;
}

}  // namespace skybeam
