#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "waydcm/errors.hpp"
#include "waydcm/train.hpp"

using namespace waydcm;
using test::random_world_scene;

namespace {

ModelConfig tiny_config(Variant v = Variant::WayDCM2) {
  ModelConfig c;
  c.variant = v;
  c.embed_dim = 4;
  c.enc_hidden = 4;
  c.attn_dim = 4;
  c.dec_hidden = 4;
  c.goal_embed_dim = 4;
  c.n_modes = 2;
  c.k_goals = 4;
  c.social = {3, 3};
  return c;
}

GridSpec tiny_grid_spec() {
  GridSpec g;
  g.k_sectors = 2;
  g.k_rings = 2;
  return g;
}

std::vector<Scene> random_scenes(Rng& rng, std::size_t n) {
  std::vector<Scene> scenes;
  for (std::size_t i = 0; i < n; ++i) {
    Scene s = random_world_scene(rng, true, 6, 8);
    s.id = "sc" + std::to_string(i);
    scenes.push_back(std::move(s));
  }
  return scenes;
}

// Mixture with constant per-step parameters per mode.
MixtureTrajectory flat_mixture(const std::vector<Vec2>& truth,
                               const std::vector<Vec2>& mode_offsets,
                               const std::vector<double>& probs) {
  MixtureTrajectory mix;
  mix.mode_probs = probs;
  for (const Vec2& off : mode_offsets) {
    std::vector<GaussianStep> steps;
    for (const Vec2& p : truth) steps.push_back({p.x + off.x, p.y + off.y, 1.0, 1.0, 0.0});
    mix.modes.push_back(std::move(steps));
  }
  return mix;
}

std::vector<Vec2> straight_truth(std::size_t t_f) {
  std::vector<Vec2> truth;
  for (std::size_t t = 0; t < t_f; ++t) truth.push_back({double(t + 1), 0.0});
  return truth;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("regression loss closed forms") {
  const auto truth = straight_truth(12);

  SUBCASE("a mode sitting on the truth with unit spread costs t_f log(2 pi)") {
    const auto mix = flat_mixture(truth, {{0.0, 0.0}}, {1.0});
    std::size_t winner = 99;
    const double got = loss_reg_value(mix, truth, &winner);
    CHECK(std::abs(got - 12.0 * std::log(2.0 * kPi)) < 1e-9);
    CHECK(winner == 0);
  }

  SUBCASE("the best mode wins") {
    const auto mix = flat_mixture(truth, {{5.0, 0.0}, {0.1, 0.0}, {-3.0, 4.0}},
                                  {0.2, 0.3, 0.5});
    std::size_t winner = 99;
    const double got = loss_reg_value(mix, truth, &winner);
    CHECK(winner == 1);
    // identical to summing that mode's step densities directly
    double want = 0.0;
    for (std::size_t t = 0; t < truth.size(); ++t)
      want += gauss_nll_value(mix.modes[1][t], truth[t]);
    CHECK(got == want);
  }

  SUBCASE("degenerate mixtures are rejected") {
    MixtureTrajectory empty;
    CHECK_THROWS_AS(loss_reg_value(empty, truth), DataError);
    auto mix = flat_mixture(truth, {{0, 0}}, {1.0});
    mix.modes[0].pop_back();
    CHECK_THROWS_AS(loss_reg_value(mix, truth), DataError);
  }
}

TEST_CASE("score loss picks the mode with the closest endpoint") {
  const auto truth = straight_truth(8);

  SUBCASE("uniform probabilities cost log L") {
    const auto mix = flat_mixture(truth, {{1, 0}, {0.5, 0}, {2, 0}, {3, 0}, {4, 0}, {5, 0}},
                                  std::vector<double>(6, 1.0 / 6.0));
    std::size_t l_star = 99;
    const double got = loss_score_value(mix, truth, &l_star);
    CHECK(l_star == 1);
    CHECK(std::abs(got - std::log(6.0)) < 1e-12);
  }

  SUBCASE("full confidence on the best mode costs nothing") {
    const auto mix = flat_mixture(truth, {{0.01, 0}}, {1.0});
    CHECK(loss_score_value(mix, truth) == 0.0);
  }
}

TEST_CASE("goal classification loss is the label's negative log probability") {
  const std::vector<double> uniform(15, 1.0 / 15.0);
  CHECK(std::abs(loss_cls_value(uniform, 4) - std::log(15.0)) < 1e-12);

  CHECK(loss_cls_value({0.0, 1.0}, 1) == 0.0);

  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> u(6);
    for (double& x : u) x = rng.uniform(-2.0, 2.0);
    const auto dist = goal_probabilities(u);
    const std::size_t k = rng.uniform_int(6);
    CHECK(loss_cls_value(dist.probs, k) == -std::log(std::max(dist.probs[k], 1e-300)));
  }

  CHECK_THROWS_AS(loss_cls_value(uniform, 15), DataError);
}

TEST_CASE("step density value matches an independent evaluation") {
  Rng rng(15);
  for (int trial = 0; trial < 30; ++trial) {
    GaussianStep g;
    g.mu_x = rng.uniform(-3.0, 3.0);
    g.mu_y = rng.uniform(-3.0, 3.0);
    g.sigma_x = rng.uniform(0.2, 4.0);
    g.sigma_y = rng.uniform(0.2, 4.0);
    g.rho = rng.uniform(-0.95, 0.95);
    const Vec2 p{rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)};

    const double c = 1.0 - g.rho * g.rho;
    const double dx = (p.x - g.mu_x) / g.sigma_x;
    const double dy = (p.y - g.mu_y) / g.sigma_y;
    const double want = std::log(2.0 * kPi * g.sigma_x * g.sigma_y * std::sqrt(c)) +
                        (dx * dx - 2.0 * g.rho * dx * dy + dy * dy) / (2.0 * c);
    const double got = gauss_nll_value(g, p);
    CHECK(std::abs(got - want) < 1e-11 * std::max(1.0, std::abs(want)));
  }

  CHECK_THROWS_AS(gauss_nll_value({0, 0, 0.0, 1.0, 0.0}, {0, 0}), NumericError);
  CHECK_THROWS_AS(gauss_nll_value({0, 0, 1.0, 1.0, 1.0}, {0, 0}), NumericError);
}

TEST_CASE("tape losses agree with the value-side formulas") {
  Rng rng(2024);
  const ModelConfig cfg = tiny_config();
  Model model(cfg);
  Rng init(5);
  model.init_weights(init);
  model.set_beta({-1.0, -0.2, -0.1, -2.0, -3.0});

  for (int trial = 0; trial < 5; ++trial) {
    const Scene w = random_world_scene(rng, true, 6, 8);
    const SceneInputs in =
        make_scene_inputs(w, tiny_grid_spec(), FeatureScaler::identity(), {}, cfg.box);

    Tape tape;
    const auto ids = model.to_tape(tape);
    const TapeForward fwd = model.forward(tape, ids, in);
    const LossNodes nodes = build_losses(tape, fwd, in);

    const Prediction pred = model.predict(in);
    std::size_t winner = 0, l_star = 0;
    const double reg = loss_reg_value(pred.mixture, in.future, &winner);
    const double score = loss_score_value(pred.mixture, in.future, &l_star);
    const double cls = loss_cls_value(pred.goal_dist.probs, in.k_star);

    CHECK(nodes.winner == winner);
    CHECK(nodes.l_star == l_star);
    CHECK(std::abs(nodes.values.l_reg - reg) < 1e-11 * std::max(1.0, std::abs(reg)));
    CHECK(nodes.values.l_score == score);
    CHECK(nodes.values.l_cls == cls);
    CHECK(nodes.values.total ==
          nodes.values.l_reg + nodes.values.l_score + nodes.values.l_cls);
    CHECK(tape.value(nodes.objective).values[0] == nodes.values.total);
  }
}

TEST_CASE("study multipliers reweight the objective but never the breakdown") {
  Rng rng(31);
  const ModelConfig cfg = tiny_config();
  Model model(cfg);
  Rng init(6);
  model.init_weights(init);

  const Scene w = random_world_scene(rng, true, 6, 8);
  const SceneInputs in =
      make_scene_inputs(w, tiny_grid_spec(), FeatureScaler::identity(), {}, cfg.box);

  Tape tape;
  const auto ids = model.to_tape(tape);
  const TapeForward fwd = model.forward(tape, ids, in);
  LossWeights weights;
  weights.reg = 0.5;
  weights.cls = 2.0;
  const LossNodes nodes = build_losses(tape, fwd, in, weights);
  const double want = 0.5 * nodes.values.l_reg + 1.0 * nodes.values.l_score +
                      2.0 * nodes.values.l_cls;
  CHECK(tape.value(nodes.objective).values[0] ==
        doctest::Approx(want).epsilon(1e-14));
  CHECK(nodes.values.total ==
        nodes.values.l_reg + nodes.values.l_score + nodes.values.l_cls);
}

TEST_CASE("losses demand complete ground truth") {
  Rng rng(32);
  const ModelConfig cfg = tiny_config();
  Model model(cfg);
  Rng init(7);
  model.init_weights(init);

  const Scene w = random_world_scene(rng, false, 6, 8);  // no future
  const SceneInputs in =
      make_scene_inputs(w, tiny_grid_spec(), FeatureScaler::identity(), {}, cfg.box);
  Tape tape;
  const auto ids = model.to_tape(tape);
  const TapeForward fwd = model.forward(tape, ids, in);
  CHECK_THROWS_WITH_AS(build_losses(tape, fwd, in), doctest::Contains(w.id.c_str()),
                       DataError);
}

TEST_CASE("only the winning mode receives regression gradients") {
  // Hand-built forward result: each mode's emissions are leaves, so gradient
  // flow is directly observable per mode.
  Tape tape;
  const std::size_t t_f = 3;
  SceneInputs in;
  in.id = "fake";
  in.t_f = t_f;
  in.future = {{1.0, 0.0}, {2.0, 0.0}, {3.0, 0.0}};

  TapeForward fwd;
  fwd.has_goals = false;
  const NodeId score_vec = tape.param(Tensor::vector({0.2, -0.1}));
  fwd.mode_probs = tape.softmax(score_vec);
  fwd.theta.resize(2);
  std::vector<NodeId> winner_leaves, loser_leaves;
  for (std::size_t t = 0; t < t_f; ++t) {
    // mode 0 tracks the truth; mode 1 sits far away
    const NodeId good =
        tape.param(Tensor::vector({in.future[t].x, in.future[t].y, 0.0, 0.0, 0.0}));
    const NodeId bad = tape.param(Tensor::vector({50.0, 50.0, 0.0, 0.0, 0.0}));
    fwd.theta[0].push_back(good);
    fwd.theta[1].push_back(bad);
    winner_leaves.push_back(good);
    loser_leaves.push_back(bad);
  }

  const LossNodes nodes = build_losses(tape, fwd, in);
  CHECK(nodes.winner == 0);
  CHECK(nodes.l_star == 0);
  tape.backward(nodes.objective);

  bool winner_touched = false;
  for (NodeId id : winner_leaves)
    for (double g : tape.gradient(id))
      if (g != 0.0) winner_touched = true;
  CHECK(winner_touched);

  for (NodeId id : loser_leaves)
    for (double g : tape.gradient(id)) CHECK(g == 0.0);

  // the score head still learns from both modes through the softmax
  const auto gs = tape.gradient(score_vec);
  CHECK(gs[0] != 0.0);
  CHECK(gs[1] != 0.0);
}

TEST_CASE("optimizer reproduces the hand-derived update") {
  ParamStore store;
  store.add("w", Tensor::vector({1.0, -2.0}));
  AdamConfig cfg;
  cfg.lr = 0.01;
  Adam adam(store, cfg);

  const std::vector<std::vector<double>> g1{{0.5, -1.0}};
  adam.step(store, g1);

  double m[2] = {0, 0}, v[2] = {0, 0}, w[2] = {1.0, -2.0};
  auto apply = [&](const double* g, std::size_t t) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(t));
    for (int j = 0; j < 2; ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      w[j] -= cfg.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg.eps);
    }
  };
  apply(g1[0].data(), 1);
  CHECK(store.at("w").values[0] == w[0]);
  CHECK(store.at("w").values[1] == w[1]);

  const std::vector<std::vector<double>> g2{{-0.25, 0.75}};
  adam.step(store, g2);
  apply(g2[0].data(), 2);
  CHECK(store.at("w").values[0] == w[0]);
  CHECK(store.at("w").values[1] == w[1]);
}

TEST_CASE("optimizer rejects misaligned gradients") {
  ParamStore store;
  store.add("w", Tensor::vector({1.0, 2.0}));
  Adam adam(store, {});
  CHECK_THROWS_AS(adam.step(store, {}), ConfigError);
  CHECK_THROWS_AS(adam.step(store, {{1.0}}), ConfigError);
}

TEST_CASE("shuffles are complete permutations and seed-stable") {
  Rng a(5), b(5), c(6);
  const auto pa = shuffled_indices(50, a);
  const auto pb = shuffled_indices(50, b);
  const auto pc = shuffled_indices(50, c);
  CHECK(pa == pb);
  CHECK(pa != pc);

  auto sorted = pa;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);

  Rng d(1);
  CHECK(shuffled_indices(0, d).empty());
  CHECK(shuffled_indices(1, d) == std::vector<std::size_t>{0});
}

TEST_CASE("dataset preparation splits, standardizes and stays deterministic") {
  Rng rng(404);
  const auto scenes = random_scenes(rng, 100);
  const GridSpec gspec = tiny_grid_spec();

  const Dataset data = prepare_dataset(scenes, gspec, {}, {}, 0.25, 7);
  CHECK(data.train.size() == 75);
  CHECK(data.val.size() == 25);

  // disjoint and complete: every scene id appears exactly once
  std::vector<std::string> ids;
  for (const auto& in : data.train) ids.push_back(in.id);
  for (const auto& in : data.val) ids.push_back(in.id);
  std::sort(ids.begin(), ids.end());
  CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
  CHECK(ids.size() == scenes.size());

  // the scaler comes from the training part only
  std::vector<std::vector<FeatureRow>> train_rows;
  for (const auto& in : data.train) train_rows.push_back(in.raw_features);
  const FeatureScaler want = FeatureScaler::fit(train_rows);
  CHECK(data.scaler.mean == want.mean);
  CHECK(data.scaler.sd == want.sd);
  for (const auto& in : data.train)
    for (std::size_t k = 0; k < in.features.size(); ++k)
      CHECK(in.features[k] == data.scaler.transform(in.raw_features[k]));

  // identical call, identical split
  const Dataset again = prepare_dataset(scenes, gspec, {}, {}, 0.25, 7);
  REQUIRE(again.train.size() == data.train.size());
  for (std::size_t i = 0; i < data.train.size(); ++i)
    CHECK(again.train[i].id == data.train[i].id);

  // a different seed shuffles differently
  const Dataset other = prepare_dataset(scenes, gspec, {}, {}, 0.25, 8);
  bool any_diff = false;
  for (std::size_t i = 0; i < data.train.size(); ++i)
    if (other.train[i].id != data.train[i].id) any_diff = true;
  CHECK(any_diff);

  // opting out of standardization keeps raw features
  const Dataset raw = prepare_dataset(scenes, gspec, {}, {}, 0.25, 7, false);
  CHECK(raw.scaler.mean == FeatureScaler::identity().mean);
  for (std::size_t k = 0; k < raw.train[0].features.size(); ++k)
    for (std::size_t j = 0; j < FeatureRow::kCount; ++j)
      CHECK(raw.train[0].features[k][j] == raw.train[0].raw_features[k][j]);

  // a pinned scaler is adopted verbatim
  FeatureScaler fixed;
  fixed.mean = {1, 2, 3, 4, 5};
  fixed.sd = {2, 2, 2, 2, 2};
  const Dataset pinned = prepare_dataset(scenes, gspec, {}, {}, 0.25, 7, true, &fixed);
  CHECK(pinned.scaler.mean == fixed.mean);
  CHECK(pinned.scaler.sd == fixed.sd);
}

TEST_CASE("training with the same seed is reproducible to the byte") {
  Rng rng(13);
  const auto scenes = random_scenes(rng, 24);
  const Dataset data = prepare_dataset(scenes, tiny_grid_spec(), {}, {}, 0.25, 3);

  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 8;
  tc.seed = 3;

  auto run = [&](const std::string& tag) {
    Model model(tiny_config());
    Rng init(21);
    model.init_weights(init);
    const TrainResult r = train(model, data, tc);
    // same basename per run: the manifest records its blob's file name
    const auto dir = std::filesystem::temp_directory_path() / ("waydcm_repro_" + tag);
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "model.ckpt").string();
    model.save_checkpoint(path, data.scaler);
    return std::make_pair(r, path);
  };
  const auto [ra, pa] = run("a");
  const auto [rb, pb] = run("b");

  REQUIRE(ra.log.size() == rb.log.size());
  for (std::size_t e = 0; e < ra.log.size(); ++e) {
    CHECK(ra.log[e].train_loss.total == rb.log[e].train_loss.total);
    CHECK(ra.log[e].val_total == rb.log[e].val_total);
  }
  CHECK(ra.best_epoch == rb.best_epoch);
  CHECK(slurp(pa) == slurp(pb));
  CHECK(slurp(pa + ".bin") == slurp(pb + ".bin"));
  for (const auto& p : {pa, pb}) {
    std::remove(p.c_str());
    std::remove((p + ".bin").c_str());
  }
}

TEST_CASE("serial and parallel batch execution produce identical training") {
  Rng rng(19);
  const auto scenes = random_scenes(rng, 20);
  const Dataset data = prepare_dataset(scenes, tiny_grid_spec(), {}, {}, 0.2, 9);

  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 8;
  tc.seed = 9;

  auto run = [&](bool parallel) {
    Model model(tiny_config());
    Rng init(33);
    model.init_weights(init);
    TrainConfig c = tc;
    c.parallel_batches = parallel;
    const TrainResult r = train(model, data, c);
    return std::make_pair(r, model.params().at("out.W").values);
  };
  const auto [rs, ws] = run(false);
  const auto [rp, wp] = run(true);
  CHECK(ws == wp);
  for (std::size_t e = 0; e < rs.log.size(); ++e) {
    CHECK(rs.log[e].train_loss.total == rp.log[e].train_loss.total);
    CHECK(rs.log[e].val_total == rp.log[e].val_total);
  }
}

TEST_CASE("training reduces the loss and tracks the best validation epoch") {
  Rng rng(23);
  const auto scenes = random_scenes(rng, 40);
  const Dataset data = prepare_dataset(scenes, tiny_grid_spec(), {}, {}, 0.2, 11);

  Model model(tiny_config());
  Rng init(55);
  model.init_weights(init);

  TrainConfig tc;
  tc.epochs = 8;
  tc.batch_size = 8;
  tc.seed = 11;
  tc.adam.lr = 3e-3;
  const TrainResult r = train(model, data, tc);

  REQUIRE(r.log.size() == 8);
  CHECK(r.log.back().train_loss.total < r.log.front().train_loss.total);

  double best = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  for (const auto& e : r.log)
    if (e.val_total < best) {
      best = e.val_total;
      best_epoch = e.epoch;
    }
  CHECK(r.best_val == best);
  CHECK(r.best_epoch == best_epoch);

  // the restored weights reproduce the best validation loss exactly
  double sum = 0.0;
  for (const auto& in : data.val) {
    Tape tape;
    const auto ids = model.to_tape(tape);
    const TapeForward fwd = model.forward(tape, ids, in);
    sum += build_losses(tape, fwd, in).values.total;
  }
  CHECK(sum / double(data.val.size()) == r.best_val);
}

TEST_CASE("without validation scenes the final weights stand") {
  Rng rng(29);
  const auto scenes = random_scenes(rng, 12);
  const Dataset data = prepare_dataset(scenes, tiny_grid_spec(), {}, {}, 0.0, 13);
  CHECK(data.val.empty());

  Model model(tiny_config());
  Rng init(77);
  model.init_weights(init);
  const auto w0 = model.params().at("out.W").values;

  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 8;
  tc.seed = 13;
  const TrainResult r = train(model, data, tc);
  CHECK(r.best_epoch == 2);  // last epoch by definition
  CHECK(model.params().at("out.W").values != w0);  // training really ran
}

TEST_CASE("an empty training part leaves the weights untouched") {
  Rng rng(37);
  const auto scenes = random_scenes(rng, 6);
  const Dataset data = prepare_dataset(scenes, tiny_grid_spec(), {}, {}, 1.0, 17);
  CHECK(data.train.empty());
  CHECK(data.val.size() == 6);

  Model model(tiny_config());
  Rng init(88);
  model.init_weights(init);
  const auto w0 = model.params().at("out.W").values;

  TrainConfig tc;
  tc.epochs = 2;
  tc.seed = 17;
  train(model, data, tc);
  CHECK(model.params().at("out.W").values == w0);
}

TEST_CASE("an exploding step size raises a numeric error naming the batch") {
  Rng rng(43);
  const auto scenes = random_scenes(rng, 32);
  const Dataset data = prepare_dataset(scenes, tiny_grid_spec(), {}, {}, 0.0, 19);

  Model model(tiny_config());
  Rng init(99);
  model.init_weights(init);

  TrainConfig tc;
  tc.epochs = 4;
  tc.batch_size = 16;
  tc.seed = 19;
  tc.adam.lr = 1e300;
  CHECK_THROWS_WITH_AS(train(model, data, tc), doctest::Contains("epoch"),
                       NumericError);
}

TEST_CASE("training fits a handful of scenes far better than initialization") {
  Rng rng(47);
  const auto scenes = random_scenes(rng, 4);
  const Dataset data = prepare_dataset(scenes, tiny_grid_spec(), {}, {}, 0.0, 23);

  Model model(tiny_config());
  Rng init(111);
  model.init_weights(init);
  const MetricReport before = evaluate_serial(model, data.train);

  TrainConfig tc;
  tc.epochs = 400;
  tc.batch_size = 4;
  tc.seed = 23;
  tc.adam.lr = 8e-3;
  train(model, data, tc);
  const MetricReport after = evaluate_serial(model, data.train);
  CHECK(after.min_ade_6 < 0.5 * before.min_ade_6);
  CHECK(after.min_fde_6 < before.min_fde_6);
}

TEST_CASE("displacement metrics over ranked modes") {
  const auto truth = straight_truth(10);

  SUBCASE("a perfect single mode scores zero everywhere") {
    const auto mix = flat_mixture(truth, {{0, 0}}, {1.0});
    const SceneMetrics m = scene_metrics(mix, truth);
    CHECK(m.ade_1 == 0.0);
    CHECK(m.fde_1 == 0.0);
    CHECK(m.ade_6 == 0.0);
    CHECK(m.fde_6 == 0.0);
  }

  SUBCASE("the top-1 metric uses only the most probable mode") {
    const auto mix = flat_mixture(truth, {{0, 0}, {2, 0}}, {0.3, 0.7});
    const SceneMetrics m = scene_metrics(mix, truth);
    CHECK(m.ade_1 == 2.0);
    CHECK(m.fde_1 == 2.0);
    CHECK(m.ade_6 == 0.0);  // the exact mode is within the top 6
    CHECK(m.fde_6 == 0.0);
  }

  SUBCASE("probability ties rank the lower mode index first") {
    const auto mix = flat_mixture(truth, {{1, 0}, {3, 0}}, {0.5, 0.5});
    const SceneMetrics m = scene_metrics(mix, truth);
    CHECK(m.ade_1 == 1.0);
  }

  SUBCASE("offsets translate into exact displacement values") {
    const auto mix = flat_mixture(truth, {{3.0, 4.0}}, {1.0});
    const SceneMetrics m = scene_metrics(mix, truth);
    CHECK(m.ade_1 == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(m.fde_1 == doctest::Approx(5.0).epsilon(1e-12));
  }

  SUBCASE("empty inputs are rejected") {
    MixtureTrajectory empty;
    CHECK_THROWS_AS(scene_metrics(empty, truth), DataError);
  }

  SUBCASE("matches an independent restatement on random mixtures") {
    Rng rng(53);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t L = 1 + rng.uniform_int(8);
      const std::size_t t_f = 2 + rng.uniform_int(10);
      std::vector<Vec2> tr;
      for (std::size_t t = 0; t < t_f; ++t)
        tr.push_back({rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0)});

      MixtureTrajectory mix;
      std::vector<double> raw(L);
      for (double& x : raw) x = rng.uniform(0.0, 1.0);
      if (trial % 7 == 0 && L > 1) raw[1] = raw[0];  // exercise exact ties
      mix.mode_probs = raw;
      for (std::size_t l = 0; l < L; ++l) {
        std::vector<GaussianStep> steps;
        for (std::size_t t = 0; t < t_f; ++t)
          steps.push_back(
              {rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0), 1.0, 1.0, 0.0});
        mix.modes.push_back(std::move(steps));
      }

      const SceneMetrics got = scene_metrics(mix, tr);

      // rank by probability, stable on ties
      std::vector<std::size_t> order(L);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return mix.mode_probs[a] > mix.mode_probs[b];
      });
      auto ade = [&](std::size_t l) {
        double s = 0.0;
        for (std::size_t t = 0; t < t_f; ++t)
          s += std::hypot(mix.modes[l][t].mu_x - tr[t].x, mix.modes[l][t].mu_y - tr[t].y);
        return s / double(t_f);
      };
      auto fde = [&](std::size_t l) {
        return std::hypot(mix.modes[l].back().mu_x - tr.back().x,
                          mix.modes[l].back().mu_y - tr.back().y);
      };
      double a1 = ade(order[0]), f1 = fde(order[0]);
      double a6 = a1, f6 = f1;
      for (std::size_t r = 1; r < std::min<std::size_t>(6, L); ++r) {
        a6 = std::min(a6, ade(order[r]));
        f6 = std::min(f6, fde(order[r]));
      }
      CHECK(got.ade_1 == a1);
      CHECK(got.fde_1 == f1);
      CHECK(got.ade_6 == a6);
      CHECK(got.fde_6 == f6);
      CHECK(got.ade_6 <= got.ade_1);
      CHECK(got.fde_6 <= got.fde_1);
    }
  }
}

TEST_CASE("metric reduction is a scene-order mean") {
  std::vector<SceneMetrics> per{{1.0, 2.0, 0.5, 1.0}, {3.0, 4.0, 1.5, 2.0},
                                {0.1, 0.2, 0.05, 0.1}};
  const MetricReport r = reduce_metrics(per);
  CHECK(r.scene_count == 3);
  CHECK(r.min_ade_1 == (1.0 + 3.0 + 0.1) / 3.0);
  CHECK(r.min_fde_1 == (2.0 + 4.0 + 0.2) / 3.0);
  CHECK(r.min_ade_6 == (0.5 + 1.5 + 0.05) / 3.0);
  CHECK(r.min_fde_6 == (1.0 + 2.0 + 0.1) / 3.0);

  const MetricReport empty = reduce_metrics({});
  CHECK(empty.scene_count == 0);
  CHECK(empty.min_ade_6 == 0.0);
}

TEST_CASE("serial and parallel evaluation agree bitwise") {
  Rng rng(59);
  const auto scenes = random_scenes(rng, 50);
  const Dataset data = prepare_dataset(scenes, tiny_grid_spec(), {}, {}, 0.0, 29);

  Model model(tiny_config());
  Rng init(29);
  model.init_weights(init);
  model.set_beta({-1.0, -0.1, -0.1, -2.0, -4.0});

  const MetricReport s = evaluate_serial(model, data.train);
  const MetricReport p = evaluate_parallel(model, data.train);
  CHECK(s.scene_count == p.scene_count);
  CHECK(s.min_ade_1 == p.min_ade_1);
  CHECK(s.min_fde_1 == p.min_fde_1);
  CHECK(s.min_ade_6 == p.min_ade_6);
  CHECK(s.min_fde_6 == p.min_fde_6);
}

TEST_CASE("report writers emit stamped CSV") {
  const std::string stamp = "# config_hash=deadbeef seed=1 version=0.0.0";

  SUBCASE("training log") {
    const std::string path = temp_path("waydcm_train_log.csv");
    std::vector<EpochLog> log(2);
    log[0].epoch = 0;
    log[0].train_loss = {10.0, 1.0, 2.0, 13.0};
    log[0].val_total = 14.0;
    log[1].epoch = 1;
    log[1].train_loss = {8.0, 0.5, 1.5, 10.0};
    log[1].val_total = 11.0;
    write_training_log_csv(path, log, stamp);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == stamp);
    std::getline(in, line);
    CHECK(line == "epoch,l_reg,l_score,l_cls,total,val_total");
    std::getline(in, line);
    CHECK(line == "0,10,1,2,13,14");
    std::remove(path.c_str());
  }

  SUBCASE("metric report") {
    const std::string path = temp_path("waydcm_metrics.csv");
    MetricReport r;
    r.min_ade_1 = 1.5;
    r.min_fde_1 = 2.5;
    r.min_ade_6 = 0.5;
    r.min_fde_6 = 1.0;
    r.scene_count = 7;
    write_metrics_csv(path, r, stamp);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == stamp);
    std::getline(in, line);
    CHECK(line == "min_ade_1,min_fde_1,min_ade_6,min_fde_6,scenes");
    std::getline(in, line);
    CHECK(line == "1.5,2.5,0.5,1,7");
    std::remove(path.c_str());
  }

  SUBCASE("variant comparison splits metrics from timings") {
    const std::string mpath = temp_path("waydcm_compare.csv");
    const std::string tpath = temp_path("waydcm_compare_timing.csv");
    std::vector<CompareRow> rows(2);
    rows[0].variant = Variant::LSTM;
    rows[0].seed = 42;
    rows[0].metrics.min_ade_6 = 2.0;
    rows[0].metrics.min_fde_6 = 4.0;
    rows[0].metrics.scene_count = 10;
    rows[0].train_seconds = 12.5;
    rows[1].variant = Variant::WayDCM2;
    rows[1].seed = 42;
    rows[1].metrics.min_ade_6 = 1.0;
    rows[1].metrics.min_fde_6 = 2.0;
    rows[1].metrics.scene_count = 10;
    write_compare_csv(mpath, rows, stamp);
    write_compare_timing_csv(tpath, rows);

    std::ifstream in(mpath);
    std::string line;
    std::getline(in, line);
    CHECK(line == stamp);
    std::getline(in, line);
    CHECK(line == "variant,seed,min_ade_6,min_fde_6,min_ade_1,min_fde_1,scenes");
    std::getline(in, line);
    CHECK(line.rfind("lstm,42,2,4,", 0) == 0);

    std::ifstream tin(tpath);
    std::getline(tin, line);
    CHECK(line == "variant,train_seconds,eval_seconds");
    std::getline(tin, line);
    CHECK(line.rfind("lstm,12.5,", 0) == 0);
    std::remove(mpath.c_str());
    std::remove(tpath.c_str());
  }
}

TEST_CASE("the four-way comparison runs every variant deterministically") {
  Rng rng(61);
  const auto scenes = random_scenes(rng, 16);

  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 8;
  tc.val_fraction = 0.25;
  tc.seed = 31;

  const auto rows = compare_variants(scenes, tiny_config(), tiny_grid_spec(), {}, tc, true);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].variant == Variant::LSTM);
  CHECK(rows[1].variant == Variant::TrajDCM);
  CHECK(rows[2].variant == Variant::WayDCM1);
  CHECK(rows[3].variant == Variant::WayDCM2);
  for (const auto& r : rows) {
    CHECK(r.seed == 31);
    CHECK(r.metrics.scene_count == 4);
    CHECK(r.metrics.min_ade_6 > 0.0);
  }

  const auto again = compare_variants(scenes, tiny_config(), tiny_grid_spec(), {}, tc, true);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].metrics.min_ade_6 == again[i].metrics.min_ade_6);
    CHECK(rows[i].metrics.min_fde_6 == again[i].metrics.min_fde_6);
  }
}
