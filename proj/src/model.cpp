#include "waydcm/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "waydcm/errors.hpp"
#include "waydcm/version.hpp"

namespace waydcm {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian");

std::size_t ModelConfig::n_beta() const {
  const auto mask = variant_features(variant);
  std::size_t n = 0;
  for (bool m : mask) n += m ? 1 : 0;
  return n;
}

void ParamStore::add(std::string name, Tensor value) {
  entries_.push_back({std::move(name), std::move(value)});
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

Tensor& ParamStore::at(const std::string& name) {
  for (auto& e : entries_)
    if (e.name == name) return e.value;
  throw DataError("unknown parameter '" + name + "'");
}

const Tensor& ParamStore::at(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.value;
  throw DataError("unknown parameter '" + name + "'");
}

SceneInputs make_scene_inputs(const Scene& scene, const GridSpec& grid_spec,
                              const FeatureScaler& scaler,
                              const ColliderParams& collider,
                              const InteractionSpace& box) {
  const Scene local = filter_neighbors(normalize_scene(scene), box);
  const RadialGrid grid = build_grid(local, grid_spec);

  SceneInputs in;
  in.id = local.id;
  in.t_f = local.t_f;
  in.tracks.reserve(1 + local.neighbors.size());
  auto push_track = [&](const AgentTrack& t) {
    std::vector<std::array<double, 4>> rows;
    rows.reserve(local.t_obs);
    for (std::size_t step = 0; step < local.t_obs; ++step) {
      const AgentState s = t.state_at(step);
      rows.push_back({s.x, s.y, s.v, s.theta});
    }
    in.tracks.push_back(std::move(rows));
  };
  push_track(local.target);
  for (const auto& nb : local.neighbors) {
    push_track(nb);
    const AgentState s = nb.state_at(local.t_obs - 1);
    in.neighbor_pos.push_back({s.x, s.y});
  }

  in.raw_features = feature_matrix(local, grid, collider);
  in.features.reserve(in.raw_features.size());
  for (const auto& row : in.raw_features) in.features.push_back(scaler.transform(row));
  in.centers = goal_embedding_inputs(grid);
  if (local.future) {
    in.future = *local.future;
    in.k_star = label_ground_truth(grid, local);
    in.has_label = true;
  }
  return in;
}

GaussianStep theta_to_step(const std::array<double, 5>& theta) {
  auto clamp = [](double x, double b) { return std::min(std::max(x, -b), b); };
  GaussianStep s;
  s.mu_x = theta[0];
  s.mu_y = theta[1];
  s.sigma_x = std::exp(clamp(theta[2], kExpClamp));
  s.sigma_y = std::exp(clamp(theta[3], kExpClamp));
  s.rho = std::tanh(clamp(theta[4], kRhoClamp));
  return s;
}

namespace {

struct LstmState {
  NodeId h, c;
};

LstmState lstm_step(Tape& tape, const LstmCellIds& cell, NodeId zero_gates,
                    LstmState s, NodeId x) {
  const std::size_t H = cell.hidden;
  const NodeId gates =
      tape.add(tape.affine(cell.Wx, x, cell.b), tape.affine(cell.Wh, s.h, zero_gates));
  const NodeId i = tape.sigmoid_(tape.slice(gates, 0, H));
  const NodeId f = tape.sigmoid_(tape.slice(gates, H, H));
  const NodeId g = tape.tanh_(tape.slice(gates, 2 * H, H));
  const NodeId o = tape.sigmoid_(tape.slice(gates, 3 * H, H));
  const NodeId c = tape.add(tape.mul(f, s.c), tape.mul(i, g));
  const NodeId h = tape.mul(o, tape.tanh_(c));
  return {h, c};
}

}  // namespace

NodeId lstm_encode(Tape& tape, const LstmCellIds& cell, const std::vector<NodeId>& inputs) {
  const NodeId zero_h = tape.constant(Tensor::zeros({cell.hidden}));
  const NodeId zero_gates = tape.constant(Tensor::zeros({4 * cell.hidden}));
  LstmState s{zero_h, zero_h};
  for (NodeId x : inputs) s = lstm_step(tape, cell, zero_gates, s, x);
  return s.h;
}

std::vector<std::size_t> social_pool_assign(const std::vector<Vec2>& positions,
                                            const InteractionSpace& box,
                                            const SocialGridSpec& cells) {
  constexpr std::size_t kEmpty = static_cast<std::size_t>(-1);
  std::vector<std::size_t> assign(cells.cell_count(), kEmpty);
  const double span_x = box.ahead + box.behind;
  const double span_y = 2.0 * box.side;
  const double wx = span_x / static_cast<double>(cells.cells_x);
  const double wy = span_y / static_cast<double>(cells.cells_y);

  auto cell_center = [&](std::size_t ix, std::size_t iy) -> Vec2 {
    return {-box.behind + (static_cast<double>(ix) + 0.5) * wx,
            -box.side + (static_cast<double>(iy) + 0.5) * wy};
  };

  for (std::size_t i = 0; i < positions.size(); ++i) {
    const Vec2& p = positions[i];
    if (p.x < -box.behind || p.x > box.ahead || p.y < -box.side || p.y > box.side)
      continue;  // outside the interaction space
    auto bin = [](double v, double lo, double w, std::size_t n) {
      const auto idx = static_cast<std::ptrdiff_t>(std::floor((v - lo) / w));
      return static_cast<std::size_t>(
          std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(n) - 1));
    };
    const std::size_t ix = bin(p.x, -box.behind, wx, cells.cells_x);
    const std::size_t iy = bin(p.y, -box.side, wy, cells.cells_y);
    const std::size_t c = ix * cells.cells_y + iy;
    if (assign[c] == kEmpty) {
      assign[c] = i;
      continue;
    }
    // keep whichever sits nearer the cell center; ties keep the earlier agent
    const Vec2 center = cell_center(ix, iy);
    const double d_new = (p - center).norm();
    const double d_old = (positions[assign[c]] - center).norm();
    if (d_new < d_old) assign[c] = i;
  }
  return assign;
}

AttentionResult attend_one(Tape& tape, const AttentionIds& head, NodeId query_state,
                           const std::vector<NodeId>& occupied_states,
                           std::size_t attn_dim) {
  AttentionResult res;
  if (occupied_states.empty()) {
    res.context = tape.constant(Tensor::zeros({attn_dim}));
    res.weights = res.context;
    res.any_occupied = false;
    return res;
  }
  const NodeId zero_d = tape.constant(Tensor::zeros({attn_dim}));
  const NodeId q = tape.affine(head.Wq, query_state, zero_d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(attn_dim));
  std::vector<NodeId> scores, values;
  scores.reserve(occupied_states.size());
  values.reserve(occupied_states.size());
  for (NodeId s : occupied_states) {
    const NodeId key = tape.affine(head.Wk, s, zero_d);
    values.push_back(tape.affine(head.Wv, s, zero_d));
    scores.push_back(tape.affine_scalar(tape.dot(q, key), scale, 0.0));
  }
  res.weights = tape.softmax(tape.stack(scores));
  res.context = tape.weighted_sum(res.weights, values);
  res.any_occupied = true;
  return res;
}

std::vector<std::size_t> top_n_indices(const std::vector<double>& probs, std::size_t n) {
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  order.resize(std::min(n, order.size()));
  return order;
}

Model::Model(ModelConfig config) : config_(std::move(config)) {
  if (config_.n_modes == 0) throw ConfigError("model needs at least one mode");
  if (config_.uses_goals() && config_.k_goals < config_.n_modes)
    throw ConfigError("model needs at least as many goals as modes");
  build_manifest();
}

void Model::build_manifest() {
  const auto& c = config_;
  const std::size_t H = c.enc_hidden, D = c.attn_dim, Hd = c.dec_hidden;
  auto add = [&](const std::string& name, std::vector<std::size_t> shape) {
    params_.add(name, Tensor::zeros(std::move(shape)));
  };
  add("embed.W", {c.embed_dim, 4});
  add("embed.b", {c.embed_dim});
  add("enc.Wx", {4 * H, c.embed_dim});
  add("enc.Wh", {4 * H, H});
  add("enc.b", {4 * H});
  if (c.uses_goals()) {
    for (std::size_t i = 0; i < c.n_heads(); ++i) {
      const std::string prefix = "attn" + std::to_string(i);
      add(prefix + ".Wq", {D, H});
      add(prefix + ".Wk", {D, H});
      add(prefix + ".Wv", {D, H});
    }
    add("zhead.W", {1, H + D});
    add("zhead.b", {1});
    add("goal.W", {c.goal_embed_dim, 2});
    add("goal.b", {c.goal_embed_dim});
  } else {
    add("mode_embed", {c.n_modes, D});
  }
  add("score.W", {1, H + D});
  add("score.b", {1});
  const std::size_t dec_in = H + D + (c.uses_goals() ? c.goal_embed_dim : 0);
  add("dec.Wx", {4 * Hd, dec_in});
  add("dec.Wh", {4 * Hd, Hd});
  add("dec.b", {4 * Hd});
  add("out.W", {5, Hd});
  add("out.b", {5});
  if (c.uses_goals()) add("beta", {c.n_beta()});
}

void Model::init_weights(Rng& rng) {
  for (std::size_t i = 0; i < params_.count(); ++i) {
    auto& e = params_[i];
    const bool is_bias = e.name.size() > 2 && e.name.ends_with(".b");
    if (is_bias || e.name == "beta") {
      std::fill(e.value.values.begin(), e.value.values.end(), 0.0);
      continue;
    }
    const double r = 1.0 / std::sqrt(static_cast<double>(e.value.cols()));
    for (double& v : e.value.values) v = rng.uniform(-r, r);
  }
}

BetaVector Model::beta() const {
  BetaVector b;
  if (!config_.uses_goals()) return b;
  const auto mask = variant_features(config_.variant);
  const auto& raw = params_.at("beta").values;
  std::size_t j = 0;
  for (std::size_t f = 0; f < BetaVector::kCount; ++f)
    if (mask[f]) b[f] = raw[j++];
  return b;
}

void Model::set_beta(const BetaVector& beta) {
  if (!config_.uses_goals())
    throw ConfigError("the lstm variant carries no utility coefficients");
  const auto mask = variant_features(config_.variant);
  auto& raw = params_.at("beta").values;
  std::size_t j = 0;
  for (std::size_t f = 0; f < BetaVector::kCount; ++f)
    if (mask[f]) raw[j++] = beta[f];
}

std::vector<NodeId> Model::to_tape(Tape& tape) const {
  std::vector<NodeId> ids;
  ids.reserve(params_.count());
  for (const auto& e : params_.entries()) ids.push_back(tape.param(e.value));
  return ids;
}

namespace {

std::vector<NodeId> decode_rollout(Tape& tape, const LstmCellIds& cell, NodeId Wout,
                                   NodeId bout, NodeId input, std::size_t steps) {
  const NodeId zero_h = tape.constant(Tensor::zeros({cell.hidden}));
  const NodeId zero_gates = tape.constant(Tensor::zeros({4 * cell.hidden}));
  LstmState s{zero_h, zero_h};
  std::vector<NodeId> theta;
  theta.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    s = lstm_step(tape, cell, zero_gates, s, input);
    theta.push_back(tape.affine(Wout, s.h, bout));
  }
  return theta;
}

}  // namespace

TapeForward Model::forward(Tape& tape, const std::vector<NodeId>& param_ids,
                           const SceneInputs& in) const {
  const auto& c = config_;
  if (param_ids.size() != params_.count())
    throw ConfigError("forward: parameter id list does not match the manifest");
  std::size_t cursor = 0;
  auto P = [&](const std::string& name) {
    // manifest order is fixed, so lookups walk forward monotonically
    for (std::size_t i = 0; i < params_.count(); ++i) {
      const std::size_t j = (cursor + i) % params_.count();
      if (params_[j].name == name) {
        cursor = j;
        return param_ids[j];
      }
    }
    throw DataError("unknown parameter '" + name + "'");
  };

  // shared-weight encoder over the target (and, with goals, the neighbors)
  const LstmCellIds enc{P("enc.Wx"), P("enc.Wh"), P("enc.b"), c.enc_hidden};
  const NodeId embed_W = P("embed.W"), embed_b = P("embed.b");
  const std::size_t n_agents = c.uses_goals() ? in.tracks.size() : 1;
  std::vector<NodeId> hidden;
  hidden.reserve(n_agents);
  for (std::size_t a = 0; a < n_agents; ++a) {
    std::vector<NodeId> emb;
    emb.reserve(in.tracks[a].size());
    for (const auto& s : in.tracks[a]) {
      const NodeId x = tape.constant(Tensor::vector({s[0], s[1], s[2], s[3]}));
      emb.push_back(tape.tanh_(tape.affine(embed_W, x, embed_b)));
    }
    hidden.push_back(lstm_encode(tape, enc, emb));
  }
  const NodeId h_T = hidden[0];

  TapeForward fwd;
  fwd.theta.resize(c.n_modes);

  const NodeId score_W = P("score.W"), score_b = P("score.b");
  const LstmCellIds dec{P("dec.Wx"), P("dec.Wh"), P("dec.b"), c.dec_hidden};
  const NodeId out_W = P("out.W"), out_b = P("out.b");

  if (!c.uses_goals()) {
    // plain encoder-decoder: learned per-mode embeddings stand in for the
    // attention contexts
    const NodeId modes = P("mode_embed");
    std::vector<NodeId> mode_scores;
    for (std::size_t l = 0; l < c.n_modes; ++l) {
      const NodeId c_l = tape.concat(h_T, tape.slice(modes, l * c.attn_dim, c.attn_dim));
      mode_scores.push_back(tape.affine(score_W, c_l, score_b));
      fwd.theta[l] = decode_rollout(tape, dec, out_W, out_b, c_l, in.t_f);
    }
    fwd.mode_probs = tape.softmax(tape.stack(mode_scores));
    return fwd;
  }

  if (in.features.size() != c.k_goals)
    throw ConfigError("forward: scene has " + std::to_string(in.features.size()) +
                      " alternatives but the model expects " + std::to_string(c.k_goals));

  // social tensor: flat cells in x-major order, occupied ones in cell order
  const auto assign = social_pool_assign(in.neighbor_pos, c.box, c.social);
  std::vector<NodeId> occupied;
  for (std::size_t cell = 0; cell < assign.size(); ++cell) {
    if (assign[cell] != static_cast<std::size_t>(-1))
      occupied.push_back(hidden[1 + assign[cell]]);
  }

  // goal scores s_k = u_k + z_k
  const auto mask = variant_features(c.variant);
  const NodeId beta_id = P("beta");
  const NodeId zhead_W = P("zhead.W"), zhead_b = P("zhead.b");
  std::vector<NodeId> s_nodes, u_nodes;
  s_nodes.reserve(c.k_goals);
  for (std::size_t k = 0; k < c.k_goals; ++k) {
    std::vector<double> active;
    for (std::size_t f = 0; f < FeatureRow::kCount; ++f)
      if (mask[f]) active.push_back(in.features[k][f]);
    const NodeId u_k = tape.dot(beta_id, tape.constant(Tensor::vector(std::move(active))));
    const AttentionIds head{P("attn" + std::to_string(k) + ".Wq"),
                            P("attn" + std::to_string(k) + ".Wk"),
                            P("attn" + std::to_string(k) + ".Wv")};
    const AttentionResult att = attend_one(tape, head, h_T, occupied, c.attn_dim);
    const NodeId z_k = tape.affine(zhead_W, tape.concat(h_T, att.context), zhead_b);
    u_nodes.push_back(u_k);
    s_nodes.push_back(tape.add(u_k, z_k));
  }
  const NodeId s_vec = tape.stack(s_nodes);
  fwd.has_goals = true;
  fwd.goal_probs = tape.softmax(s_vec);
  fwd.goal_dist.probs = tape.value(fwd.goal_probs).values;
  fwd.goal_dist.scores = tape.value(s_vec).values;
  fwd.goal_dist.utilities.reserve(c.k_goals);
  for (NodeId u : u_nodes) fwd.goal_dist.utilities.push_back(tape.value(u).values[0]);

  // decode one trajectory per mode, each conditioned on a top-scored goal
  fwd.top_goals = top_n_indices(fwd.goal_dist.probs, c.n_modes);
  const NodeId goal_W = P("goal.W"), goal_b = P("goal.b");
  std::vector<NodeId> mode_scores;
  for (std::size_t l = 0; l < c.n_modes; ++l) {
    const AttentionIds head{P("attn" + std::to_string(c.k_goals + l) + ".Wq"),
                            P("attn" + std::to_string(c.k_goals + l) + ".Wk"),
                            P("attn" + std::to_string(c.k_goals + l) + ".Wv")};
    const AttentionResult att = attend_one(tape, head, h_T, occupied, c.attn_dim);
    const NodeId c_l = tape.concat(h_T, att.context);
    mode_scores.push_back(tape.affine(score_W, c_l, score_b));
    const Vec2 center = in.centers[fwd.top_goals[l]];
    const NodeId g_emb = tape.tanh_(
        tape.affine(goal_W, tape.constant(Tensor::vector({center.x, center.y})), goal_b));
    fwd.theta[l] = decode_rollout(tape, dec, out_W, out_b, tape.concat(c_l, g_emb), in.t_f);
  }
  fwd.mode_probs = tape.softmax(tape.stack(mode_scores));
  return fwd;
}

Prediction Model::predict(const SceneInputs& in) const {
  Tape tape;
  const auto ids = to_tape(tape);
  const TapeForward fwd = forward(tape, ids, in);

  Prediction pred;
  pred.goal_dist = fwd.goal_dist;
  pred.top_goals = fwd.top_goals;
  pred.mixture.mode_probs = tape.value(fwd.mode_probs).values;
  pred.mixture.modes.resize(fwd.theta.size());
  for (std::size_t l = 0; l < fwd.theta.size(); ++l) {
    pred.mixture.modes[l].reserve(fwd.theta[l].size());
    for (NodeId id : fwd.theta[l]) {
      const auto& v = tape.value(id).values;
      pred.mixture.modes[l].push_back(theta_to_step({v[0], v[1], v[2], v[3], v[4]}));
    }
  }
  return pred;
}

namespace {

json social_to_json(const SocialGridSpec& s) {
  return json{{"cells_x", s.cells_x}, {"cells_y", s.cells_y}};
}

json box_to_json(const InteractionSpace& b) {
  return json{{"ahead", b.ahead}, {"behind", b.behind}, {"side", b.side}};
}

}  // namespace

void Model::save_checkpoint(const std::string& path, const FeatureScaler& scaler) const {
  json manifest;
  manifest["format"] = "waydcm-checkpoint";
  manifest["format_version"] = 1;
  manifest["version"] = kVersion;
  json cfg;
  cfg["variant"] = to_string(config_.variant);
  cfg["embed_dim"] = config_.embed_dim;
  cfg["enc_hidden"] = config_.enc_hidden;
  cfg["attn_dim"] = config_.attn_dim;
  cfg["dec_hidden"] = config_.dec_hidden;
  cfg["goal_embed_dim"] = config_.goal_embed_dim;
  cfg["n_modes"] = config_.n_modes;
  cfg["k_goals"] = config_.k_goals;
  cfg["social"] = social_to_json(config_.social);
  cfg["box"] = box_to_json(config_.box);
  manifest["config"] = std::move(cfg);
  manifest["scaler"] = {{"mean", scaler.mean}, {"sd", scaler.sd}};
  if (config_.uses_goals()) {
    const BetaVector b = beta();
    json bj;
    const auto mask = variant_features(config_.variant);
    for (std::size_t f = 0; f < BetaVector::kCount; ++f)
      if (mask[f]) bj["beta_" + FeatureRow::names()[f]] = b[f];
    manifest["beta"] = std::move(bj);
  }
  json plist = json::array();
  for (const auto& e : params_.entries())
    plist.push_back({{"name", e.name}, {"shape", e.value.shape}});
  manifest["params"] = std::move(plist);
  manifest["total_values"] = params_.total_values();
  const std::string blob_name = path.substr(path.find_last_of('/') + 1) + ".bin";
  manifest["blob"] = blob_name;

  std::ofstream mf(path);
  if (!mf) throw DataError("cannot open for writing: " + path);
  mf << manifest.dump(2) << '\n';

  std::ofstream bf(path + ".bin", std::ios::binary);
  if (!bf) throw DataError("cannot open for writing: " + path + ".bin");
  for (const auto& e : params_.entries()) {
    bf.write(reinterpret_cast<const char*>(e.value.values.data()),
             static_cast<std::streamsize>(e.value.values.size() * sizeof(double)));
  }
}

std::pair<Model, FeatureScaler> Model::load_checkpoint(const std::string& path) {
  std::ifstream mf(path);
  if (!mf) throw DataError("cannot open checkpoint manifest: " + path);
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::parse_error& e) {
    throw DataError("malformed checkpoint manifest " + path + ": " + e.what());
  }
  if (manifest.value("format", "") != "waydcm-checkpoint")
    throw DataError(path + " is not a checkpoint manifest");

  ModelConfig cfg;
  const json& cj = manifest.at("config");
  cfg.variant = variant_from_string(cj.at("variant").get<std::string>());
  cfg.embed_dim = cj.at("embed_dim").get<std::size_t>();
  cfg.enc_hidden = cj.at("enc_hidden").get<std::size_t>();
  cfg.attn_dim = cj.at("attn_dim").get<std::size_t>();
  cfg.dec_hidden = cj.at("dec_hidden").get<std::size_t>();
  cfg.goal_embed_dim = cj.at("goal_embed_dim").get<std::size_t>();
  cfg.n_modes = cj.at("n_modes").get<std::size_t>();
  cfg.k_goals = cj.at("k_goals").get<std::size_t>();
  cfg.social.cells_x = cj.at("social").at("cells_x").get<std::size_t>();
  cfg.social.cells_y = cj.at("social").at("cells_y").get<std::size_t>();
  cfg.box.ahead = cj.at("box").at("ahead").get<double>();
  cfg.box.behind = cj.at("box").at("behind").get<double>();
  cfg.box.side = cj.at("box").at("side").get<double>();

  Model model(cfg);
  const json& plist = manifest.at("params");
  if (plist.size() != model.params_.count())
    throw DataError("checkpoint lists " + std::to_string(plist.size()) +
                    " parameters, model expects " + std::to_string(model.params_.count()));
  for (std::size_t i = 0; i < model.params_.count(); ++i) {
    const auto& expect = model.params_[i];
    const std::string name = plist[i].at("name").get<std::string>();
    const auto shape = plist[i].at("shape").get<std::vector<std::size_t>>();
    if (name != expect.name)
      throw DataError("checkpoint parameter '" + name + "' at position " +
                      std::to_string(i) + " does not match expected '" + expect.name + "'");
    if (shape != expect.value.shape)
      throw DataError("checkpoint parameter '" + name + "' has mismatched shape");
  }

  const std::string dir = path.find('/') == std::string::npos
                              ? std::string()
                              : path.substr(0, path.find_last_of('/') + 1);
  const std::string blob_path = dir + manifest.at("blob").get<std::string>();
  std::ifstream bf(blob_path, std::ios::binary);
  if (!bf) throw DataError("cannot open checkpoint blob: " + blob_path);
  for (std::size_t i = 0; i < model.params_.count(); ++i) {
    auto& e = model.params_[i];
    bf.read(reinterpret_cast<char*>(e.value.values.data()),
            static_cast<std::streamsize>(e.value.values.size() * sizeof(double)));
    if (!bf)
      throw DataError("checkpoint blob truncated while reading parameter '" + e.name + "'");
  }
  char extra;
  if (bf.read(&extra, 1))
    throw DataError("checkpoint blob longer than the manifest describes");

  FeatureScaler scaler = FeatureScaler::identity();
  const json& sj = manifest.at("scaler");
  for (std::size_t f = 0; f < FeatureRow::kCount; ++f) {
    scaler.mean[f] = sj.at("mean").at(f).get<double>();
    scaler.sd[f] = sj.at("sd").at(f).get<double>();
  }
  return {std::move(model), scaler};
}

}  // namespace waydcm
