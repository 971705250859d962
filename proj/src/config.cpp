#include "waydcm/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include "json.hpp"
#include "waydcm/errors.hpp"

namespace waydcm {

using nlohmann::json;

namespace {

// Rejects keys outside the schema; `prefix` is the dotted path for messages.
void check_keys(const json& j, const std::string& prefix,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw ConfigError("config section '" + prefix + "' must be a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError("unknown config key '" +
                        (prefix.empty() ? item.key() : prefix + "." + item.key()) +
                        "'");
  }
}

template <typename T>
void read_field(const json& j, const std::string& prefix, const char* key, T& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + (prefix.empty() ? std::string(key)
                                                       : prefix + "." + std::string(key)) +
                      "': " + e.what());
  }
}

void parse_grid(const json& j, GridSpec& g) {
  check_keys(j, "grid", {"k_sectors", "span", "k_rings", "min_maxl", "reach_scale"});
  read_field(j, "grid", "k_sectors", g.k_sectors);
  read_field(j, "grid", "span", g.span);
  read_field(j, "grid", "k_rings", g.k_rings);
  read_field(j, "grid", "min_maxl", g.min_maxl);
  read_field(j, "grid", "reach_scale", g.reach_scale);
}

void parse_collider(const json& j, ColliderParams& c) {
  check_keys(j, "collider", {"alpha", "rho"});
  read_field(j, "collider", "alpha", c.alpha);
  read_field(j, "collider", "rho", c.rho);
}

void parse_box(const json& j, InteractionSpace& b) {
  check_keys(j, "box", {"ahead", "behind", "side"});
  read_field(j, "box", "ahead", b.ahead);
  read_field(j, "box", "behind", b.behind);
  read_field(j, "box", "side", b.side);
}

void parse_social(const json& j, SocialGridSpec& s) {
  check_keys(j, "social", {"cells_x", "cells_y"});
  read_field(j, "social", "cells_x", s.cells_x);
  read_field(j, "social", "cells_y", s.cells_y);
}

void parse_model(const json& j, ModelConfig& m) {
  check_keys(j, "model",
             {"embed_dim", "enc_hidden", "attn_dim", "dec_hidden", "goal_embed_dim",
              "n_modes"});
  read_field(j, "model", "embed_dim", m.embed_dim);
  read_field(j, "model", "enc_hidden", m.enc_hidden);
  read_field(j, "model", "attn_dim", m.attn_dim);
  read_field(j, "model", "dec_hidden", m.dec_hidden);
  read_field(j, "model", "goal_embed_dim", m.goal_embed_dim);
  read_field(j, "model", "n_modes", m.n_modes);
}

void parse_train(const json& j, TrainConfig& t) {
  check_keys(j, "train",
             {"batch_size", "epochs", "adam", "loss_weights", "val_fraction",
              "parallel_batches"});
  read_field(j, "train", "batch_size", t.batch_size);
  read_field(j, "train", "epochs", t.epochs);
  read_field(j, "train", "val_fraction", t.val_fraction);
  read_field(j, "train", "parallel_batches", t.parallel_batches);
  if (const auto it = j.find("adam"); it != j.end()) {
    check_keys(*it, "train.adam", {"lr", "beta1", "beta2", "eps"});
    read_field(*it, "train.adam", "lr", t.adam.lr);
    read_field(*it, "train.adam", "beta1", t.adam.beta1);
    read_field(*it, "train.adam", "beta2", t.adam.beta2);
    read_field(*it, "train.adam", "eps", t.adam.eps);
  }
  if (const auto it = j.find("loss_weights"); it != j.end()) {
    check_keys(*it, "train.loss_weights", {"reg", "score", "cls"});
    read_field(*it, "train.loss_weights", "reg", t.loss_weights.reg);
    read_field(*it, "train.loss_weights", "score", t.loss_weights.score);
    read_field(*it, "train.loss_weights", "cls", t.loss_weights.cls);
  }
}

void parse_fit(const json& j, FitOptions& f) {
  check_keys(j, "fit", {"max_iters", "grad_tol", "l2", "parallel"});
  read_field(j, "fit", "max_iters", f.max_iters);
  read_field(j, "fit", "grad_tol", f.grad_tol);
  read_field(j, "fit", "l2", f.l2);
  read_field(j, "fit", "parallel", f.parallel);
}

void parse_gen(const json& j, GenConfig& g) {
  check_keys(j, "gen",
             {"n_scenes", "true_beta", "min_neighbors", "max_neighbors", "speed_min",
              "speed_max", "wp_rel_min", "wp_rel_max", "noise_sigma", "t_obs", "t_f",
              "dt", "pilot_scenes"});
  read_field(j, "gen", "n_scenes", g.n_scenes);
  read_field(j, "gen", "min_neighbors", g.min_neighbors);
  read_field(j, "gen", "max_neighbors", g.max_neighbors);
  read_field(j, "gen", "speed_min", g.speed_min);
  read_field(j, "gen", "speed_max", g.speed_max);
  read_field(j, "gen", "wp_rel_min", g.wp_rel_min);
  read_field(j, "gen", "wp_rel_max", g.wp_rel_max);
  read_field(j, "gen", "noise_sigma", g.noise_sigma);
  read_field(j, "gen", "t_obs", g.t_obs);
  read_field(j, "gen", "t_f", g.t_f);
  read_field(j, "gen", "dt", g.dt);
  read_field(j, "gen", "pilot_scenes", g.pilot_scenes);
  if (const auto it = j.find("true_beta"); it != j.end()) {
    check_keys(*it, "gen.true_beta", {"dir", "occ", "coll", "dangle", "ddist"});
    read_field(*it, "gen.true_beta", "dir", g.true_beta.dir);
    read_field(*it, "gen.true_beta", "occ", g.true_beta.occ);
    read_field(*it, "gen.true_beta", "coll", g.true_beta.coll);
    read_field(*it, "gen.true_beta", "dangle", g.true_beta.dangle);
    read_field(*it, "gen.true_beta", "ddist", g.true_beta.ddist);
  }
}

}  // namespace

void reconcile(RunConfig& c) {
  c.model.variant = c.variant;
  c.model.k_goals = c.grid.k_total();
  c.model.social = c.social;
  c.model.box = c.box;
  c.train.seed = c.seed;
  c.gen.seed = c.seed;
  c.gen.grid = c.grid;
  c.gen.collider = c.collider;
  c.gen.box = c.box;
}

RunConfig run_config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what());
  }
  check_keys(j, "",
             {"seed", "out_dir", "variant", "standardize", "grid", "collider", "box",
              "social", "model", "train", "fit", "gen"});

  RunConfig c;
  read_field(j, "", "seed", c.seed);
  read_field(j, "", "out_dir", c.out_dir);
  read_field(j, "", "standardize", c.standardize);
  if (const auto it = j.find("variant"); it != j.end()) {
    std::string name;
    read_field(j, "", "variant", name);
    c.variant = variant_from_string(name);
  }
  if (const auto it = j.find("grid"); it != j.end()) parse_grid(*it, c.grid);
  if (const auto it = j.find("collider"); it != j.end()) parse_collider(*it, c.collider);
  if (const auto it = j.find("box"); it != j.end()) parse_box(*it, c.box);
  if (const auto it = j.find("social"); it != j.end()) parse_social(*it, c.social);
  if (const auto it = j.find("model"); it != j.end()) parse_model(*it, c.model);
  if (const auto it = j.find("train"); it != j.end()) parse_train(*it, c.train);
  if (const auto it = j.find("fit"); it != j.end()) parse_fit(*it, c.fit);
  if (const auto it = j.find("gen"); it != j.end()) parse_gen(*it, c.gen);
  reconcile(c);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return run_config_from_json_text(buf.str());
}

std::string run_config_to_json_text(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["variant"] = to_string(c.variant);
  j["standardize"] = c.standardize;
  j["grid"] = {{"k_sectors", c.grid.k_sectors},
               {"span", c.grid.span},
               {"k_rings", c.grid.k_rings},
               {"min_maxl", c.grid.min_maxl},
               {"reach_scale", c.grid.reach_scale}};
  j["collider"] = {{"alpha", c.collider.alpha}, {"rho", c.collider.rho}};
  j["box"] = {{"ahead", c.box.ahead}, {"behind", c.box.behind}, {"side", c.box.side}};
  j["social"] = {{"cells_x", c.social.cells_x}, {"cells_y", c.social.cells_y}};
  j["model"] = {{"embed_dim", c.model.embed_dim},
                {"enc_hidden", c.model.enc_hidden},
                {"attn_dim", c.model.attn_dim},
                {"dec_hidden", c.model.dec_hidden},
                {"goal_embed_dim", c.model.goal_embed_dim},
                {"n_modes", c.model.n_modes}};
  j["train"] = {{"batch_size", c.train.batch_size},
                {"epochs", c.train.epochs},
                {"adam",
                 {{"lr", c.train.adam.lr},
                  {"beta1", c.train.adam.beta1},
                  {"beta2", c.train.adam.beta2},
                  {"eps", c.train.adam.eps}}},
                {"loss_weights",
                 {{"reg", c.train.loss_weights.reg},
                  {"score", c.train.loss_weights.score},
                  {"cls", c.train.loss_weights.cls}}},
                {"val_fraction", c.train.val_fraction},
                {"parallel_batches", c.train.parallel_batches}};
  j["fit"] = {{"max_iters", c.fit.max_iters},
              {"grad_tol", c.fit.grad_tol},
              {"l2", c.fit.l2},
              {"parallel", c.fit.parallel}};
  j["gen"] = {{"n_scenes", c.gen.n_scenes},
              {"true_beta",
               {{"dir", c.gen.true_beta.dir},
                {"occ", c.gen.true_beta.occ},
                {"coll", c.gen.true_beta.coll},
                {"dangle", c.gen.true_beta.dangle},
                {"ddist", c.gen.true_beta.ddist}}},
              {"min_neighbors", c.gen.min_neighbors},
              {"max_neighbors", c.gen.max_neighbors},
              {"speed_min", c.gen.speed_min},
              {"speed_max", c.gen.speed_max},
              {"wp_rel_min", c.gen.wp_rel_min},
              {"wp_rel_max", c.gen.wp_rel_max},
              {"noise_sigma", c.gen.noise_sigma},
              {"t_obs", c.gen.t_obs},
              {"t_f", c.gen.t_f},
              {"dt", c.gen.dt},
              {"pilot_scenes", c.gen.pilot_scenes}};
  return j.dump();
}

std::uint64_t config_hash(const RunConfig& c) {
  const std::string text = run_config_to_json_text(c);
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char byte : text) {
    h ^= byte;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string config_stamp(const RunConfig& c) {
  std::ostringstream os;
  os << "# config_hash=" << std::hex << config_hash(c) << std::dec
     << " seed=" << c.seed << " version=" << kVersion;
  return os.str();
}

}  // namespace waydcm
