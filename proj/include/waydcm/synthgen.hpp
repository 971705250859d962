#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "waydcm/choice.hpp"
#include "waydcm/features.hpp"
#include "waydcm/grid.hpp"
#include "waydcm/rng.hpp"
#include "waydcm/scene.hpp"

namespace waydcm {

// Corpus generator: target agents pick an intermediate goal through a known
// multinomial logit over the five standardized features and then follow a
// smooth path toward it, so fitted coefficients have a ground truth to hit.
struct GenConfig {
  std::size_t n_scenes = 5000;
  BetaVector true_beta{-2.64, -0.06, -0.05, -10.83, -20.86};
  std::size_t min_neighbors = 1;
  std::size_t max_neighbors = 3;
  double speed_min = 2.0;   // target speed range [m/s]
  double speed_max = 18.0;
  // waypoint distance sampled as a multiple of the grid reach, so near and
  // far waypoints stay informative across the whole speed range
  double wp_rel_min = 0.15;
  double wp_rel_max = 3.0;
  double noise_sigma = 0.3;  // position jitter on the future track [m]
  std::size_t t_obs = 8;
  std::size_t t_f = 30;
  double dt = 0.1;
  std::uint64_t seed = 42;
  std::size_t pilot_scenes = 1024;  // scaler-moment estimation batch
  GridSpec grid;
  ColliderParams collider;
  InteractionSpace box;
};

struct GenResult {
  std::vector<Scene> scenes;        // world frame
  std::vector<std::size_t> labels;  // drawn alternative per scene
  FeatureScaler scaler;             // frozen pilot moments behind the draws
  GenConfig config;
};

GenResult generate(const GenConfig& config);

// Sidecar metadata stored next to the corpus JSONL.
struct CorpusMeta {
  BetaVector true_beta;
  FeatureScaler scaler;
  std::vector<std::size_t> labels;
};

// Writes `path` (JSONL) plus `path`.meta.json.
void write_corpus(const GenResult& result, const std::string& path);
CorpusMeta read_corpus_meta(const std::string& corpus_path);
// nullopt when no sidecar exists; malformed sidecars still throw.
std::optional<CorpusMeta> try_read_corpus_meta(const std::string& corpus_path);

// Fitting data from a corpus. With metadata, the drawn labels and frozen
// scaler are used; otherwise labels come from the future endpoints and the
// scaler is fitted on the corpus itself.
LabeledChoiceData choice_data_from_scenes(const std::vector<Scene>& scenes,
                                          const GridSpec& grid_spec,
                                          const ColliderParams& collider,
                                          const InteractionSpace& box,
                                          const CorpusMeta* meta = nullptr,
                                          FeatureScaler* scaler_out = nullptr);

// Repeated-context sampling check: draws goals from the analytic distribution
// and reports observed frequencies against it.
struct FrequencyReport {
  std::vector<double> observed;  // empirical frequency per alternative
  std::vector<double> expected;  // analytic probability
  double chi_squared = 0.0;
  std::size_t draws = 0;
};

FrequencyReport empirical_choice_frequencies(
    const std::vector<std::array<double, FeatureRow::kCount>>& features_std,
    const BetaVector& beta, std::size_t draws, Rng& rng);

}  // namespace waydcm
