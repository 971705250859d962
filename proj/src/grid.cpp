#include "waydcm/grid.hpp"

#include <algorithm>
#include <cmath>

#include "waydcm/errors.hpp"

namespace waydcm {

RadialGrid build_grid(double v_obs, double horizon_seconds, const GridSpec& spec) {
  if (spec.k_sectors == 0 || spec.k_rings == 0)
    throw ConfigError("grid needs at least one sector and one ring");
  if (spec.k_total() < 2)
    throw ConfigError("grid needs at least two alternatives");
  if (spec.span <= 0.0 || spec.span > 2.0 * kPi)
    throw ConfigError("grid span must lie in (0, 2*pi]");
  if (spec.min_maxl <= 0.0) throw ConfigError("grid min_maxl must be positive");

  RadialGrid grid;
  grid.spec = spec;
  grid.maxl = std::max(spec.reach_scale * v_obs * horizon_seconds, spec.min_maxl);

  const double width = spec.span / static_cast<double>(spec.k_sectors);
  grid.alts.reserve(spec.k_total());
  for (std::size_t s = 0; s < spec.k_sectors; ++s) {
    // Sector 0 starts at the right edge of the span; mid angles increase
    // counterclockwise across the heading.
    const double mid = -spec.span / 2.0 + (static_cast<double>(s) + 0.5) * width;
    for (std::size_t r = 0; r < spec.k_rings; ++r) {
      Alternative a;
      a.k = s * spec.k_rings + r;
      a.sector = s;
      a.ring = r;
      a.mid = mid;
      a.d_left = mid + width / 2.0;
      a.d_right = mid - width / 2.0;
      a.radius = grid.maxl * static_cast<double>(r + 1) / static_cast<double>(spec.k_rings);
      a.center = {a.radius * std::cos(mid), a.radius * std::sin(mid)};
      grid.alts.push_back(a);
    }
  }
  return grid;
}

RadialGrid build_grid(const Scene& scene, const GridSpec& spec) {
  const AgentState obs = scene.target.state_at(scene.t_obs - 1);
  return build_grid(obs.v, scene.horizon_seconds(), spec);
}

std::vector<Vec2> goal_embedding_inputs(const RadialGrid& grid) {
  std::vector<Vec2> centers;
  centers.reserve(grid.alts.size());
  for (const auto& a : grid.alts) centers.push_back(a.center);
  return centers;
}

std::size_t label_ground_truth(const RadialGrid& grid, const Scene& scene) {
  if (!scene.future || scene.future->empty())
    throw DataError("scene '" + scene.id + "' has no future track to label");
  const Vec2 end = scene.future->back();
  std::size_t best = 0;
  double best_d = (grid.alts[0].center - end).norm();
  for (std::size_t k = 1; k < grid.alts.size(); ++k) {
    const double d = (grid.alts[k].center - end).norm();
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

}  // namespace waydcm
