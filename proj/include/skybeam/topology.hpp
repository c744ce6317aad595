// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "skybeam/rng.hpp"

namespace skybeam {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Static geometry of the two-layer network: one high-altitude platform above
// a square-ish grid of low-altitude platform clusters.
struct ClusterLayout {
  int clusters = 1;
  double radius_m = 2000.0;        // user disc radius per cluster
  double spacing_m = 6000.0;       // grid spacing between cluster centers
  double laps_altitude_m = 2000.0;
  double haps_altitude_m = 20000.0;
  double haps_jitter_m = 500.0;    // placement disc radius around the centroid
  std::vector<Vec2> centers;       // centroid at the origin
};

ClusterLayout make_layout(int clusters, double radius_m, double spacing_m,
                          double laps_altitude_m, double haps_altitude_m, double haps_jitter_m);

struct UserState {
  Vec2 pos;
  double heading = 0.0;  // radians
  int cluster = 0;
};

struct NetworkTopology {
  ClusterLayout layout;
  Vec2 haps_pos;                  // horizontal position; altitude in layout
  std::vector<UserState> users;   // cluster-major: user u serves cluster u / K
  int users_per_cluster = 0;
  double velocity_mps = 1.0;
};

// Fresh episode: platform jittered uniformly over its placement disc, users
// uniform over their cluster discs with uniform headings.
NetworkTopology init_episode(const ClusterLayout& layout, int users_per_cluster,
                             double velocity_mps, Rng& rng);

// Random-direction mobility: each user advances v * dt along its heading; a
// step that would exit the cluster disc redraws the heading uniformly, up to
// 64 attempts, after which the user holds position for the slot.
void step_mobility(NetworkTopology& topo, double slot_seconds, Rng& rng);

struct BsSite {
  Vec2 pos;
  double altitude_m = 0.0;
};

BsSite laps_site(const NetworkTopology& topo, int cluster);
BsSite haps_site(const NetworkTopology& topo);

// Slant distance from an elevated site to a ground user.
double distance_to(const BsSite& site, const Vec2& user);

struct Angles {
  double theta = 0.0;  // elevation measured from the horizontal plane
  double phi = 0.0;    // azimuth, atan2 convention; 0 at nadir
};

Angles angles_to(const BsSite& site, const Vec2& user);

}  // namespace skybeam
