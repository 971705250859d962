#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "waydcm/geometry.hpp"
#include "waydcm/rng.hpp"
#include "waydcm/scene.hpp"
#include "waydcm/tape.hpp"

namespace waydcm::test {

// Constant-velocity history of t_obs steps ending at `end` with heading theta.
inline AgentTrack straight_track(std::string id, Vec2 end, double speed, double theta,
                                 std::size_t t_obs, double dt) {
  AgentTrack t;
  t.agent_id = std::move(id);
  t.states.resize(t_obs);
  t.valid.assign(t_obs, true);
  Vec2 pos = end;
  for (std::size_t i = t_obs; i-- > 0;) {
    t.states[i] = {pos.x, pos.y, speed, theta};
    pos = pos - Vec2{std::cos(theta), std::sin(theta)} * (speed * dt);
  }
  return t;
}

// Rigidly maps a target-frame scene into a world pose.
inline Scene scene_to_world(const Scene& local, const FrameTransform& pose) {
  Scene w = local;
  auto move = [&](AgentTrack& t) {
    for (auto& s : t.states) {
      const Vec2 p = pose.to_world({s.x, s.y});
      s.x = p.x;
      s.y = p.y;
      s.theta = wrap_angle(s.theta + pose.heading);
    }
  };
  move(w.target);
  for (auto& nb : w.neighbors) move(nb);
  w.waypoint = pose.to_world(local.waypoint);
  if (local.future) {
    std::vector<Vec2> fut;
    for (const auto& p : *local.future) fut.push_back(pose.to_world(p));
    w.future = std::move(fut);
  }
  w.world_from_local.reset();
  return w;
}

// Random world-frame scene: moving target, a handful of neighbors near the
// target, a waypoint, and (optionally) a jittered forward future.
inline Scene random_world_scene(Rng& rng, bool with_future = true,
                                std::size_t t_obs = 8, std::size_t t_f = 12) {
  Scene local;
  local.dt = 0.1;
  local.t_obs = t_obs;
  local.t_f = t_f;
  const double speed = rng.uniform(0.5, 15.0);
  local.target = straight_track("target", {0.0, 0.0}, speed, 0.0, t_obs, local.dt);

  const std::size_t n = rng.uniform_int(5);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 pos{rng.uniform(-15.0, 45.0), rng.uniform(-30.0, 30.0)};
    local.neighbors.push_back(straight_track("n" + std::to_string(i), pos,
                                             rng.uniform(0.0, 10.0),
                                             rng.uniform(-kPi, kPi), t_obs, local.dt));
  }
  local.waypoint = {rng.uniform(-40.0, 60.0), rng.uniform(-40.0, 40.0)};
  if (with_future) {
    std::vector<Vec2> fut(t_f);
    Vec2 p{0.0, 0.0};
    for (auto& q : fut) {
      p = p + Vec2{speed * local.dt + rng.normal(0.0, 0.05), rng.normal(0.0, 0.05)};
      q = p;
    }
    local.future = std::move(fut);
  }

  const FrameTransform pose{{rng.uniform(-200.0, 200.0), rng.uniform(-200.0, 200.0)},
                            rng.uniform(-kPi, kPi)};
  Scene w = scene_to_world(local, pose);
  w.id = "r" + std::to_string(rng.uniform_int(1u << 30));
  return w;
}

// Central-difference gradient check over every component of every parameter.
// `build` reconstructs the graph from fresh leaves and returns the scalar
// root. Returns the largest relative error, with a unit floor on the scale so
// near-zero gradients are compared absolutely.
inline double fd_max_rel_error(
    const std::vector<Tensor>& params,
    const std::function<NodeId(Tape&, const std::vector<NodeId>&)>& build,
    double h = 1e-5) {
  Tape tape;
  std::vector<NodeId> ids;
  for (const auto& p : params) ids.push_back(tape.param(p));
  const NodeId root = build(tape, ids);
  tape.backward(root);
  std::vector<std::vector<double>> analytic;
  for (const NodeId id : ids) analytic.push_back(tape.gradient(id));

  auto value_at = [&](const std::vector<Tensor>& ps) {
    Tape t2;
    std::vector<NodeId> ids2;
    for (const auto& p : ps) ids2.push_back(t2.param(p));
    const NodeId r = build(t2, ids2);
    return t2.value(r).values[0];
  };

  double worst = 0.0;
  std::vector<Tensor> work = params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].numel(); ++i) {
      const double keep = work[p].values[i];
      work[p].values[i] = keep + h;
      const double up = value_at(work);
      work[p].values[i] = keep - h;
      const double dn = value_at(work);
      work[p].values[i] = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double a = analytic[p][i];
      const double err = std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
      if (err > worst) worst = err;
    }
  }
  return worst;
}

}  // namespace waydcm::test
