#include "waydcm/features.hpp"

#include <cmath>
#include <fstream>
#include <iostream>

#include "waydcm/errors.hpp"
#include "waydcm/parallel.hpp"

namespace waydcm {

const std::array<std::string, FeatureRow::kCount>& FeatureRow::names() {
  static const std::array<std::string, kCount> n{"dir", "occ", "coll", "dangle", "ddist"};
  return n;
}

std::vector<double> feature_dir(const RadialGrid& grid, double heading) {
  std::vector<double> out(grid.alts.size());
  for (const auto& a : grid.alts) out[a.k] = abs_angle_deg(a.mid, heading);
  return out;
}

namespace {

// Neighbor snapshot at the observation step: position and heading.
struct NeighborObs {
  Vec2 pos;
  double theta;
};

std::vector<NeighborObs> observe_neighbors(const Scene& scene) {
  std::vector<NeighborObs> out;
  out.reserve(scene.neighbors.size());
  for (const auto& nb : scene.neighbors) {
    const AgentState s = nb.state_at(scene.t_obs - 1);
    out.push_back({{s.x, s.y}, s.theta});
  }
  return out;
}

}  // namespace

std::vector<double> feature_occupancy(const RadialGrid& grid, const Scene& scene,
                                      const ColliderParams&) {
  const auto nbs = observe_neighbors(scene);
  const double cutoff = grid.maxl / 3.0;
  std::vector<double> out(grid.alts.size(), 0.0);
  for (const auto& a : grid.alts) {
    double sum = 0.0;
    for (const auto& nb : nbs) {
      const double dist = (nb.pos - a.center).norm();
      if (dist < cutoff) sum += std::exp(-dist);
    }
    out[a.k] = sum;
  }
  return out;
}

std::vector<double> feature_collision(const RadialGrid& grid, const Scene& scene,
                                      const ColliderParams& params) {
  const auto nbs = observe_neighbors(scene);
  std::vector<double> out(grid.alts.size(), 0.0);
  // One collider per sector cone; every ring in the sector shares its value.
  for (std::size_t s = 0; s < grid.spec.k_sectors; ++s) {
    const Alternative& a0 = grid.alts[s * grid.spec.k_rings];
    double best_opp = -1.0;
    double coll = 0.0;
    for (const auto& nb : nbs) {
      const double d_i = std::atan2(nb.pos.y, nb.pos.x);
      if (!(d_i > a0.d_right && d_i < a0.d_left)) continue;
      const double dist = nb.pos.norm();
      if (!(dist > 0.0 && dist < 2.0 * grid.maxl)) continue;
      const double opp = std::abs(wrap_angle(nb.theta - a0.mid));
      if (!(opp > kPi / 2.0 && opp < kPi)) continue;
      if (opp > best_opp) {  // ties keep the earliest neighbor
        best_opp = opp;
        coll = params.alpha * std::exp(params.rho * dist);
      }
    }
    for (std::size_t r = 0; r < grid.spec.k_rings; ++r)
      out[s * grid.spec.k_rings + r] = coll;
  }
  return out;
}

std::vector<double> feature_dangle(const RadialGrid& grid, const Vec2& waypoint,
                                   const std::string& scene_id) {
  std::vector<double> out(grid.alts.size(), 0.0);
  if (waypoint.norm() == 0.0) {
    std::cerr << "warning: waypoint coincides with the target position"
              << (scene_id.empty() ? "" : " in scene '" + scene_id + "'")
              << "; goal angles degenerate to 0\n";
    return out;
  }
  const double wp_angle = std::atan2(waypoint.y, waypoint.x);
  for (const auto& a : grid.alts) out[a.k] = abs_angle_deg(a.mid, wp_angle);
  return out;
}

std::vector<double> feature_ddist(const RadialGrid& grid, const Vec2& waypoint) {
  std::vector<double> out(grid.alts.size());
  for (const auto& a : grid.alts) out[a.k] = (waypoint - a.center).norm();
  return out;
}

std::vector<FeatureRow> feature_matrix(const Scene& scene, const RadialGrid& grid,
                                       const ColliderParams& params) {
  const auto dir = feature_dir(grid);
  const auto occ = feature_occupancy(grid, scene, params);
  const auto coll = feature_collision(grid, scene, params);
  const auto dangle = feature_dangle(grid, scene.waypoint, scene.id);
  const auto ddist = feature_ddist(grid, scene.waypoint);
  std::vector<FeatureRow> rows(grid.alts.size());
  for (std::size_t k = 0; k < rows.size(); ++k)
    rows[k] = {dir[k], occ[k], coll[k], dangle[k], ddist[k]};
  return rows;
}

std::vector<std::vector<FeatureRow>> feature_batch_serial(
    const std::vector<Scene>& scenes, const std::vector<RadialGrid>& grids,
    const ColliderParams& params) {
  if (scenes.size() != grids.size())
    throw ConfigError("feature batch: scene and grid counts differ");
  std::vector<std::vector<FeatureRow>> out(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i)
    out[i] = feature_matrix(scenes[i], grids[i], params);
  return out;
}

std::vector<std::vector<FeatureRow>> feature_batch_parallel(
    const std::vector<Scene>& scenes, const std::vector<RadialGrid>& grids,
    const ColliderParams& params) {
  if (scenes.size() != grids.size())
    throw ConfigError("feature batch: scene and grid counts differ");
  std::vector<std::vector<FeatureRow>> out(scenes.size());
  parallel_for(scenes.size(), [&](std::size_t i) {
    out[i] = feature_matrix(scenes[i], grids[i], params);
  });
  return out;
}

FeatureScaler FeatureScaler::fit(const std::vector<std::vector<FeatureRow>>& batches) {
  FeatureScaler sc;
  std::array<double, FeatureRow::kCount> sum{}, sumsq{};
  std::size_t n = 0;
  for (const auto& rows : batches) {
    for (const auto& row : rows) {
      for (std::size_t j = 0; j < FeatureRow::kCount; ++j) {
        sum[j] += row[j];
        sumsq[j] += row[j] * row[j];
      }
      ++n;
    }
  }
  if (n == 0) throw DataError("cannot fit feature scaler on an empty batch");
  for (std::size_t j = 0; j < FeatureRow::kCount; ++j) {
    sc.mean[j] = sum[j] / static_cast<double>(n);
    const double var = sumsq[j] / static_cast<double>(n) - sc.mean[j] * sc.mean[j];
    sc.sd[j] = std::sqrt(std::max(var, 0.0));
    if (sc.sd[j] < 1e-12) sc.sd[j] = 1e-12;
  }
  return sc;
}

FeatureScaler FeatureScaler::identity() {
  FeatureScaler sc;
  sc.mean.fill(0.0);
  sc.sd.fill(1.0);
  return sc;
}

std::array<double, FeatureRow::kCount> FeatureScaler::transform(const FeatureRow& row) const {
  std::array<double, FeatureRow::kCount> z{};
  for (std::size_t j = 0; j < FeatureRow::kCount; ++j) z[j] = (row[j] - mean[j]) / sd[j];
  return z;
}

FeatureRow FeatureScaler::untransform(const std::array<double, FeatureRow::kCount>& z) const {
  FeatureRow row;
  row.dir = z[0] * sd[0] + mean[0];
  row.occ = z[1] * sd[1] + mean[1];
  row.coll = z[2] * sd[2] + mean[2];
  row.dangle = z[3] * sd[3] + mean[3];
  row.ddist = z[4] * sd[4] + mean[4];
  return row;
}

void dump_features_csv(const std::string& path, const std::vector<Scene>& scenes,
                       const std::vector<std::vector<FeatureRow>>& batches) {
  if (scenes.size() != batches.size())
    throw ConfigError("feature dump: scene and batch counts differ");
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "scene_id,alternative";
  for (const auto& name : FeatureRow::names()) out << ',' << name;
  out << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    for (std::size_t k = 0; k < batches[i].size(); ++k) {
      out << scenes[i].id << ',' << k;
      for (std::size_t j = 0; j < FeatureRow::kCount; ++j) out << ',' << batches[i][k][j];
      out << '\n';
    }
  }
}

}  // namespace waydcm
