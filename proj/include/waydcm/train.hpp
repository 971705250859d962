#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "waydcm/model.hpp"

namespace waydcm {

// --- losses ----------------------------------------------------------------

struct LossBreakdown {
  double l_reg = 0.0;
  double l_score = 0.0;
  double l_cls = 0.0;
  double total = 0.0;  // always the plain sum of the three parts
};

// Optional study multipliers; the training objective uses them, the logged
// breakdown never does.
struct LossWeights {
  double reg = 1.0;
  double score = 1.0;
  double cls = 1.0;

  bool all_unit() const { return reg == 1.0 && score == 1.0 && cls == 1.0; }
};

struct LossNodes {
  NodeId l_reg = 0;
  NodeId l_score = 0;
  NodeId l_cls = 0;
  NodeId total = 0;      // l_reg + l_score + l_cls
  NodeId objective = 0;  // weighted sum actually optimized
  std::size_t winner = 0;  // mode with the lowest summed NLL
  std::size_t l_star = 0;  // mode with the smallest final displacement
  LossBreakdown values;
};

// Builds the three-part loss on the tape. Requires ground truth in `in`
// (future of length t_f; a goal label when the forward pass scored goals).
LossNodes build_losses(Tape& tape, const TapeForward& fwd, const SceneInputs& in,
                       const LossWeights& weights = {});

// Plain-value counterparts used for evaluation and closed-form checks.
double gauss_nll_value(const GaussianStep& g, const Vec2& truth);
double loss_reg_value(const MixtureTrajectory& mix, const std::vector<Vec2>& truth,
                      std::size_t* winner = nullptr);
double loss_score_value(const MixtureTrajectory& mix, const std::vector<Vec2>& truth,
                        std::size_t* l_star = nullptr);
double loss_cls_value(const std::vector<double>& goal_probs, std::size_t k_star);

// --- optimizer ---------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(const ParamStore& params, AdamConfig config);
  // One update from gradients aligned with the store's manifest order.
  void step(ParamStore& params, const std::vector<std::vector<double>>& grads);

 private:
  AdamConfig config_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// --- training loop ----------------------------------------------------------

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t epochs = 20;
  AdamConfig adam;
  LossWeights loss_weights;
  double val_fraction = 0.1;
  std::uint64_t seed = 42;
  // Per-scene terms of a batch may run in parallel; gradients fold in scene
  // order either way, so the result is bit-identical at any thread count.
  bool parallel_batches = true;
};

struct Dataset {
  std::vector<SceneInputs> train;
  std::vector<SceneInputs> val;
  FeatureScaler scaler;
};

// Seeded-shuffle 90/10 style split, feature extraction, and scaler fitting on
// the training part (or adoption of `fixed_scaler` when provided).
Dataset prepare_dataset(const std::vector<Scene>& scenes, const GridSpec& grid_spec,
                        const ColliderParams& collider, const InteractionSpace& box,
                        double val_fraction, std::uint64_t seed,
                        bool standardize = true,
                        const FeatureScaler* fixed_scaler = nullptr);

struct EpochLog {
  std::size_t epoch = 0;
  LossBreakdown train_loss;  // means over the epoch's training scenes
  double val_total = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val = 0.0;
};

// Mini-batch training; on return the model holds the best-validation weights.
TrainResult train(Model& model, const Dataset& data, const TrainConfig& config);

// --- metrics ----------------------------------------------------------------

struct SceneMetrics {
  double ade_1 = 0.0, fde_1 = 0.0;
  double ade_6 = 0.0, fde_6 = 0.0;
};

// Displacement errors of the k most probable modes (k = 1 and min(6, L)),
// mode ranking by probability with ties to the lower index.
SceneMetrics scene_metrics(const MixtureTrajectory& mix, const std::vector<Vec2>& truth);

struct MetricReport {
  double min_ade_1 = 0.0, min_fde_1 = 0.0;
  double min_ade_6 = 0.0, min_fde_6 = 0.0;
  std::size_t scene_count = 0;
};

// Scene-order sum, then one divide; serial and parallel paths agree bitwise.
MetricReport reduce_metrics(const std::vector<SceneMetrics>& per_scene);
MetricReport evaluate_serial(const Model& model, const std::vector<SceneInputs>& scenes);
MetricReport evaluate_parallel(const Model& model, const std::vector<SceneInputs>& scenes);

// --- variant comparison -------------------------------------------------------

struct CompareRow {
  Variant variant = Variant::LSTM;
  std::uint64_t seed = 0;
  MetricReport metrics;
  double train_seconds = 0.0;
  double eval_seconds = 0.0;
};

// Trains all four variants on one split/seed and evaluates on the validation
// part. `out_dir`, when nonempty, receives per-variant checkpoints and logs.
std::vector<CompareRow> compare_variants(const std::vector<Scene>& corpus,
                                         const ModelConfig& base,
                                         const GridSpec& grid_spec,
                                         const ColliderParams& collider,
                                         const TrainConfig& config,
                                         bool standardize,
                                         const std::string& out_dir = {},
                                         const std::string& stamp = {});

// --- reports ----------------------------------------------------------------
// Every writer prefixes the file with `stamp` (a "# key=value ..." comment
// carrying config hash, seed, and version).

void write_training_log_csv(const std::string& path, const std::vector<EpochLog>& log,
                            const std::string& stamp);
void write_metrics_csv(const std::string& path, const MetricReport& report,
                       const std::string& stamp);
void write_compare_csv(const std::string& path, const std::vector<CompareRow>& rows,
                       const std::string& stamp);
// Wall-clock timings live apart from the deterministic outputs.
void write_compare_timing_csv(const std::string& path, const std::vector<CompareRow>& rows);

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng);

}  // namespace waydcm
