#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "waydcm/choice.hpp"
#include "waydcm/features.hpp"
#include "waydcm/grid.hpp"
#include "waydcm/rng.hpp"
#include "waydcm/scene.hpp"
#include "waydcm/tape.hpp"

namespace waydcm {

// Social-tensor resolution over the interaction space (cells along the
// heading by cells across it).
struct SocialGridSpec {
  std::size_t cells_x = 13;
  std::size_t cells_y = 3;

  std::size_t cell_count() const { return cells_x * cells_y; }
};

struct ModelConfig {
  Variant variant = Variant::WayDCM2;
  std::size_t embed_dim = 16;      // state embedding width
  std::size_t enc_hidden = 32;     // encoder recurrent width
  std::size_t attn_dim = 32;       // per-head attention width
  std::size_t dec_hidden = 32;     // decoder recurrent width
  std::size_t goal_embed_dim = 16; // goal-coordinate embedding width
  std::size_t n_modes = 6;         // trajectory modes L
  std::size_t k_goals = 15;        // grid alternatives K; must match the grid
  SocialGridSpec social;
  InteractionSpace box;

  bool uses_goals() const { return variant != Variant::LSTM; }
  std::size_t n_heads() const { return uses_goals() ? k_goals + n_modes : 0; }
  std::size_t n_beta() const;  // active utility coefficients for the variant
};

// Named parameter tensors in a fixed manifest order.
struct ParamEntry {
  std::string name;
  Tensor value;
};

class ParamStore {
 public:
  void add(std::string name, Tensor value);
  std::size_t count() const { return entries_.size(); }
  std::size_t total_values() const;
  ParamEntry& operator[](std::size_t i) { return entries_[i]; }
  const ParamEntry& operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<ParamEntry>& entries() const { return entries_; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

 private:
  std::vector<ParamEntry> entries_;
};

// Everything the network consumes for one scene, extracted once up front.
struct SceneInputs {
  std::string id;
  std::vector<std::vector<std::array<double, 4>>> tracks;  // target first
  std::vector<Vec2> neighbor_pos;  // at t_obs, aligned with tracks[1..]
  std::vector<std::array<double, FeatureRow::kCount>> features;  // standardized
  std::vector<FeatureRow> raw_features;
  std::vector<Vec2> centers;       // goal centers, alternative order
  std::size_t t_f = 0;
  std::vector<Vec2> future;        // empty when the scene carries no truth
  std::size_t k_star = 0;          // valid iff has_label
  bool has_label = false;
};

// Normalizes, filters, builds the grid and standardized features.
SceneInputs make_scene_inputs(const Scene& scene, const GridSpec& grid_spec,
                              const FeatureScaler& scaler,
                              const ColliderParams& collider,
                              const InteractionSpace& box);

// Per-step prediction after squashing: means, standard deviations, correlation.
struct GaussianStep {
  double mu_x = 0.0, mu_y = 0.0;
  double sigma_x = 1.0, sigma_y = 1.0;
  double rho = 0.0;
};

// Maps a raw decoder emission (mu_x, mu_y, log_sigma_x, log_sigma_y, pre_rho)
// through the same clamped exp/tanh the training graph uses.
GaussianStep theta_to_step(const std::array<double, 5>& theta);

struct MixtureTrajectory {
  std::vector<std::vector<GaussianStep>> modes;  // [mode][step]
  std::vector<double> mode_probs;
};

// Tape handles produced by one forward pass, for loss construction.
struct TapeForward {
  bool has_goals = false;
  NodeId goal_probs = 0;                   // vector over K (if has_goals)
  GoalDistribution goal_dist;              // plain values (if has_goals)
  std::vector<std::size_t> top_goals;      // chosen goal per mode
  NodeId mode_probs = 0;                   // vector over L
  std::vector<std::vector<NodeId>> theta;  // [mode][step], raw 5-vectors
};

struct Prediction {
  GoalDistribution goal_dist;          // empty for the plain LSTM variant
  std::vector<std::size_t> top_goals;  // likewise
  MixtureTrajectory mixture;
};

// Reusable network pieces (also exercised directly by tests).

struct LstmCellIds {
  NodeId Wx = 0, Wh = 0, b = 0;
  std::size_t hidden = 0;
};

// Runs the cell over the input sequence from a zero state; returns the final
// hidden node.
NodeId lstm_encode(Tape& tape, const LstmCellIds& cell, const std::vector<NodeId>& inputs);

// Flat cell index (x-major) -> neighbor index, or SIZE_MAX for empty cells.
// Collisions keep the neighbor nearest the cell center; exact ties keep the
// earlier index.
std::vector<std::size_t> social_pool_assign(const std::vector<Vec2>& positions,
                                            const InteractionSpace& box,
                                            const SocialGridSpec& cells);

struct AttentionIds {
  NodeId Wq = 0, Wk = 0, Wv = 0;
};

struct AttentionResult {
  NodeId context = 0;  // attn_dim vector (zero constant when nothing occupied)
  NodeId weights = 0;  // simplex over occupied states (valid iff any_occupied)
  bool any_occupied = false;
};

// Scaled dot-product attention of one head over the occupied cell states.
AttentionResult attend_one(Tape& tape, const AttentionIds& head, NodeId query_state,
                           const std::vector<NodeId>& occupied_states,
                           std::size_t attn_dim);

// Top-n indices by descending probability, ties to the lower index.
std::vector<std::size_t> top_n_indices(const std::vector<double>& probs, std::size_t n);

class Model {
 public:
  explicit Model(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) per tensor, in manifest order.
  void init_weights(Rng& rng);

  // Active utility coefficients (padded with zeros for inactive columns).
  BetaVector beta() const;
  void set_beta(const BetaVector& beta);

  // Registers every parameter as a tape leaf; returned ids align with the
  // param store's manifest order.
  std::vector<NodeId> to_tape(Tape& tape) const;

  TapeForward forward(Tape& tape, const std::vector<NodeId>& param_ids,
                      const SceneInputs& in) const;

  // Forward pass without gradient bookkeeping.
  Prediction predict(const SceneInputs& in) const;

  // Checkpoint: manifest JSON at `path`, weights at `path` + ".bin" as a flat
  // little-endian float64 blob in manifest order.
  void save_checkpoint(const std::string& path, const FeatureScaler& scaler) const;
  static std::pair<Model, FeatureScaler> load_checkpoint(const std::string& path);

 private:
  void build_manifest();

  ModelConfig config_;
  ParamStore params_;
};

}  // namespace waydcm
