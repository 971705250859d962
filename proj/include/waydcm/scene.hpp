#pragma once

#include <optional>
#include <string>
#include <vector>

#include "waydcm/geometry.hpp"

namespace waydcm {

struct AgentState {
  double x = 0.0;      // m
  double y = 0.0;      // m
  double v = 0.0;      // m/s, >= 0
  double theta = 0.0;  // rad, wrapped to (-pi, pi]

  Vec2 pos() const { return {x, y}; }
};

struct AgentTrack {
  std::string agent_id;
  std::vector<AgentState> states;  // length t_obs
  std::vector<bool> valid;         // per-step mask, same length

  bool fully_invalid() const;
  // State at step t with invalid steps filled from the nearest valid one
  // (last valid carried forward; leading gaps backfilled).
  AgentState state_at(std::size_t t) const;
};

struct Scene {
  std::string id;
  double dt = 0.1;  // s per step
  AgentTrack target;
  std::vector<AgentTrack> neighbors;
  Vec2 waypoint;                           // long-term waypoint
  std::optional<std::vector<Vec2>> future; // t_f ground-truth positions
  std::size_t t_obs = 0;
  std::size_t t_f = 0;                     // future steps

  // Set by normalize_scene; maps target-frame coordinates back to the world.
  std::optional<FrameTransform> world_from_local;

  double horizon_seconds() const { return double(t_f) * dt; }
};

struct InteractionSpace {
  double ahead = 40.0;
  double behind = 10.0;
  double side = 25.0;
};

// Rotates/translates every agent state, the waypoint and the future into the
// frame whose origin is the target position at t_obs and whose x-axis points
// along the target heading. The inverse transform is kept on the scene.
Scene normalize_scene(const Scene& raw);

// Keeps neighbors whose (carried-forward) position at t_obs lies inside
// [-behind, ahead] x [-side, side]. Requires a normalized scene.
Scene filter_neighbors(const Scene& scene, const InteractionSpace& box);

// Sanity bound on every track: consecutive valid states may move at most
// v_max * dt apart. Violations raise DataError naming the agent and step.
void check_scene_continuity(const Scene& scene, double v_max);

// JSON-Lines scenario files, world frame. Errors carry the line number and
// offending field.
std::vector<Scene> read_scenes(const std::string& path);
void write_scenes(const std::vector<Scene>& scenes, const std::string& path);

std::string scene_to_json_line(const Scene& scene);
Scene scene_from_json_line(const std::string& line, std::size_t line_no);

}  // namespace waydcm
