#pragma once

#include <cstddef>
#include <vector>

#include "waydcm/geometry.hpp"
#include "waydcm/scene.hpp"

namespace waydcm {

// Radial grid of candidate goals in front of the target, expressed in the
// target-centric frame (target at origin, heading along +x).
struct GridSpec {
  std::size_t k_sectors = 5;
  double span = kPi;        // total angular span, centered on the heading
  std::size_t k_rings = 3;
  double min_maxl = 2.0;    // lower bound on the outer radius [m]
  double reach_scale = 1.5; // outer radius = reach_scale * v_obs * horizon

  std::size_t k_total() const { return k_sectors * k_rings; }
};

// One candidate goal: center point plus the sector cone it lives in.
struct Alternative {
  std::size_t k = 0;       // flat index, k = sector * k_rings + ring
  std::size_t sector = 0;
  std::size_t ring = 0;
  double mid = 0.0;        // sector bisector, signed angle from heading
  double d_left = 0.0;     // left cone edge  (mid + width/2)
  double d_right = 0.0;    // right cone edge (mid - width/2)
  double radius = 0.0;     // distance from origin to the center
  Vec2 center;             // center in the local frame
};

struct RadialGrid {
  GridSpec spec;
  double maxl = 0.0;  // outer radius actually used [m]
  std::vector<Alternative> alts;
};

// Builds the grid for a normalized scene. v_obs is the target speed at t_obs;
// the horizon is t_f * dt seconds.
RadialGrid build_grid(const Scene& scene, const GridSpec& spec = {});

// Same construction from raw quantities (used by tests and the generator).
RadialGrid build_grid(double v_obs, double horizon_seconds, const GridSpec& spec = {});

// Index of the alternative whose center is closest to the endpoint of the
// observed future; ties resolve to the lowest index. Requires scene.future.
std::size_t label_ground_truth(const RadialGrid& grid, const Scene& scene);

// Center coordinates in alternative order, as fed to the goal encoder.
std::vector<Vec2> goal_embedding_inputs(const RadialGrid& grid);

}  // namespace waydcm
