#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "waydcm/grid.hpp"
#include "waydcm/scene.hpp"

namespace waydcm {

// Per-alternative descriptors, in this fixed order.
struct FeatureRow {
  double dir = 0.0;    // angular offset from the heading [deg, 0..180]
  double occ = 0.0;    // proximity-weighted crowding around the center
  double coll = 0.0;   // oncoming-agent pressure, shared across a sector
  double dangle = 0.0; // angle between goal ray and waypoint ray [deg, 0..180]
  double ddist = 0.0;  // distance from center to the waypoint [m]

  double operator[](std::size_t i) const {
    const std::array<const double*, 5> p{&dir, &occ, &coll, &dangle, &ddist};
    return *p[i];
  }
  static constexpr std::size_t kCount = 5;
  static const std::array<std::string, kCount>& names();
};

struct ColliderParams {
  double alpha = 1.0;  // collision weight at zero distance
  double rho = -0.1;   // exponential decay rate per meter (negative)
};

// Individual feature kernels. All take a scene already normalized into the
// target frame (target at origin, heading 0) with neighbors filtered to the
// interaction space.
std::vector<double> feature_dir(const RadialGrid& grid, double heading = 0.0);
std::vector<double> feature_occupancy(const RadialGrid& grid, const Scene& scene,
                                      const ColliderParams& params = {});
std::vector<double> feature_collision(const RadialGrid& grid, const Scene& scene,
                                      const ColliderParams& params = {});
std::vector<double> feature_dangle(const RadialGrid& grid, const Vec2& waypoint,
                                   const std::string& scene_id = {});
std::vector<double> feature_ddist(const RadialGrid& grid, const Vec2& waypoint);

// All five features for every alternative of the grid.
std::vector<FeatureRow> feature_matrix(const Scene& scene, const RadialGrid& grid,
                                       const ColliderParams& params = {});

// Batch kernels: one feature matrix per scene. Both produce identical output;
// the parallel version writes into preallocated per-scene slots and is safe at
// any thread count.
std::vector<std::vector<FeatureRow>> feature_batch_serial(
    const std::vector<Scene>& scenes, const std::vector<RadialGrid>& grids,
    const ColliderParams& params = {});
std::vector<std::vector<FeatureRow>> feature_batch_parallel(
    const std::vector<Scene>& scenes, const std::vector<RadialGrid>& grids,
    const ColliderParams& params = {});

// Per-feature affine standardization (x - mean) / sd.
struct FeatureScaler {
  std::array<double, FeatureRow::kCount> mean{};
  std::array<double, FeatureRow::kCount> sd{};

  // Moments over every row of every scene; sd floors at 1e-12 to keep
  // constant features finite.
  static FeatureScaler fit(const std::vector<std::vector<FeatureRow>>& batches);
  static FeatureScaler identity();
  std::array<double, FeatureRow::kCount> transform(const FeatureRow& row) const;
  FeatureRow untransform(const std::array<double, FeatureRow::kCount>& z) const;
};

// Writes one line per (scene, alternative) with a header row.
void dump_features_csv(const std::string& path, const std::vector<Scene>& scenes,
                       const std::vector<std::vector<FeatureRow>>& batches);

}  // namespace waydcm
