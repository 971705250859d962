#include "waydcm/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "waydcm/errors.hpp"
#include "waydcm/parallel.hpp"

namespace waydcm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double clamp_mag(double x, double bound) { return std::min(std::max(x, -bound), bound); }

}  // namespace

LossNodes build_losses(Tape& tape, const TapeForward& fwd, const SceneInputs& in,
                       const LossWeights& weights) {
  if (in.future.size() != in.t_f)
    throw DataError("loss: scene '" + in.id + "' lacks a full ground-truth future");
  if (fwd.has_goals && !in.has_label)
    throw DataError("loss: scene '" + in.id + "' lacks a goal label");

  LossNodes out;
  const std::size_t L = fwd.theta.size();

  // summed step NLL per mode; the winner is chosen on values, so gradients
  // reach only the winning mode's parameters
  std::vector<NodeId> mode_nll(L);
  for (std::size_t l = 0; l < L; ++l) {
    std::vector<NodeId> steps;
    steps.reserve(in.t_f);
    for (std::size_t t = 0; t < in.t_f; ++t)
      steps.push_back(tape.gauss_nll(fwd.theta[l][t], in.future[t].x, in.future[t].y));
    mode_nll[l] = tape.sum(tape.stack(steps));
  }
  out.winner = 0;
  for (std::size_t l = 1; l < L; ++l) {
    if (tape.value(mode_nll[l]).values[0] < tape.value(mode_nll[out.winner]).values[0])
      out.winner = l;
  }
  out.l_reg = mode_nll[out.winner];

  // the scored mode is the one whose mean ends nearest the true endpoint
  out.l_star = 0;
  double best_fd = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < L; ++l) {
    const auto& th = tape.value(fwd.theta[l].back()).values;
    const double fd = std::hypot(th[0] - in.future.back().x, th[1] - in.future.back().y);
    if (fd < best_fd) {
      best_fd = fd;
      out.l_star = l;
    }
  }
  out.l_score = tape.affine_scalar(tape.log_(tape.pick(fwd.mode_probs, out.l_star)), -1.0, 0.0);

  out.l_cls = fwd.has_goals
                  ? tape.affine_scalar(tape.log_(tape.pick(fwd.goal_probs, in.k_star)), -1.0, 0.0)
                  : tape.constant(Tensor::scalar(0.0));

  out.total = tape.add(tape.add(out.l_reg, out.l_score), out.l_cls);
  out.objective = weights.all_unit()
                      ? out.total
                      : tape.add(tape.add(tape.affine_scalar(out.l_reg, weights.reg, 0.0),
                                          tape.affine_scalar(out.l_score, weights.score, 0.0)),
                                 tape.affine_scalar(out.l_cls, weights.cls, 0.0));

  out.values.l_reg = tape.value(out.l_reg).values[0];
  out.values.l_score = tape.value(out.l_score).values[0];
  out.values.l_cls = tape.value(out.l_cls).values[0];
  out.values.total = tape.value(out.total).values[0];
  return out;
}

double gauss_nll_value(const GaussianStep& g, const Vec2& truth) {
  if (!(g.sigma_x > 0.0) || !(g.sigma_y > 0.0))
    throw NumericError("gaussian step with non-positive sigma");
  if (!(std::abs(g.rho) < 1.0)) throw NumericError("gaussian step with |rho| >= 1");
  const double c = 1.0 - g.rho * g.rho;
  const double u = (truth.x - g.mu_x) / g.sigma_x;
  const double v = (truth.y - g.mu_y) / g.sigma_y;
  const double q = u * u - 2.0 * g.rho * u * v + v * v;
  return kLog2Pi + std::log(g.sigma_x) + std::log(g.sigma_y) + 0.5 * std::log(c) +
         q / (2.0 * c);
}

double loss_reg_value(const MixtureTrajectory& mix, const std::vector<Vec2>& truth,
                      std::size_t* winner) {
  if (mix.modes.empty()) throw DataError("loss: mixture has no modes");
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_l = 0;
  for (std::size_t l = 0; l < mix.modes.size(); ++l) {
    if (mix.modes[l].size() != truth.size())
      throw DataError("loss: mode length differs from the ground truth");
    double nll = 0.0;
    for (std::size_t t = 0; t < truth.size(); ++t)
      nll += gauss_nll_value(mix.modes[l][t], truth[t]);
    if (nll < best) {
      best = nll;
      best_l = l;
    }
  }
  if (winner) *winner = best_l;
  return best;
}

double loss_score_value(const MixtureTrajectory& mix, const std::vector<Vec2>& truth,
                        std::size_t* l_star) {
  if (mix.modes.empty() || truth.empty()) throw DataError("loss: empty mixture or truth");
  std::size_t best_l = 0;
  double best_fd = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < mix.modes.size(); ++l) {
    const GaussianStep& last = mix.modes[l].back();
    const double fd = std::hypot(last.mu_x - truth.back().x, last.mu_y - truth.back().y);
    if (fd < best_fd) {
      best_fd = fd;
      best_l = l;
    }
  }
  if (l_star) *l_star = best_l;
  return -std::log(std::max(mix.mode_probs[best_l], kLogFloor));
}

double loss_cls_value(const std::vector<double>& goal_probs, std::size_t k_star) {
  if (k_star >= goal_probs.size()) throw DataError("loss: goal label out of range");
  return -std::log(std::max(goal_probs[k_star], kLogFloor));
}

Adam::Adam(const ParamStore& params, AdamConfig config) : config_(config) {
  m_.reserve(params.count());
  v_.reserve(params.count());
  for (const auto& e : params.entries()) {
    m_.emplace_back(e.value.numel(), 0.0);
    v_.emplace_back(e.value.numel(), 0.0);
  }
}

void Adam::step(ParamStore& params, const std::vector<std::vector<double>>& grads) {
  if (grads.size() != m_.size())
    throw ConfigError("optimizer: gradient list does not match the parameter manifest");
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto& value = params[i].value.values;
    if (grads[i].size() != value.size())
      throw ConfigError("optimizer: gradient size mismatch on '" + params[i].name + "'");
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double g = grads[i][j];
      m_[i][j] = config_.beta1 * m_[i][j] + (1.0 - config_.beta1) * g;
      v_[i][j] = config_.beta2 * v_[i][j] + (1.0 - config_.beta2) * g * g;
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      value[j] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = n; i > 1; --i)
    std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
  return idx;
}

Dataset prepare_dataset(const std::vector<Scene>& scenes, const GridSpec& grid_spec,
                        const ColliderParams& collider, const InteractionSpace& box,
                        double val_fraction, std::uint64_t seed, bool standardize,
                        const FeatureScaler* fixed_scaler) {
  // first pass with an identity scaler; standardized columns are filled in
  // once the training-set moments are known
  std::vector<SceneInputs> inputs(scenes.size());
  const FeatureScaler id = FeatureScaler::identity();
  parallel_for(scenes.size(), [&](std::size_t i) {
    inputs[i] = make_scene_inputs(scenes[i], grid_spec, id, collider, box);
  });

  Rng rng = Rng::derived(seed, 0x5b1d);
  const auto order = shuffled_indices(scenes.size(), rng);
  const auto n_val = static_cast<std::size_t>(
      std::llround(static_cast<double>(scenes.size()) * val_fraction));
  const std::size_t n_train = scenes.size() - n_val;

  Dataset data;
  data.train.reserve(n_train);
  data.val.reserve(n_val);
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_train ? data.train : data.val).push_back(std::move(inputs[order[i]]));

  if (fixed_scaler) {
    data.scaler = *fixed_scaler;
  } else if (standardize && !data.train.empty()) {
    std::vector<std::vector<FeatureRow>> rows;
    rows.reserve(data.train.size());
    for (const auto& in : data.train) rows.push_back(in.raw_features);
    data.scaler = FeatureScaler::fit(rows);
  } else {
    data.scaler = FeatureScaler::identity();
  }

  auto apply = [&](std::vector<SceneInputs>& part) {
    for (auto& in : part)
      for (std::size_t k = 0; k < in.features.size(); ++k)
        in.features[k] = data.scaler.transform(in.raw_features[k]);
  };
  apply(data.train);
  apply(data.val);
  return data;
}

namespace {

struct SceneGrads {
  LossBreakdown loss;
  std::vector<std::vector<double>> grads;  // per parameter, manifest order
  bool finite = true;
};

SceneGrads scene_backward(const Model& model, const SceneInputs& in,
                          const LossWeights& weights) {
  Tape tape;
  const auto ids = model.to_tape(tape);
  const TapeForward fwd = model.forward(tape, ids, in);
  const LossNodes loss = build_losses(tape, fwd, in, weights);
  SceneGrads out;
  out.loss = loss.values;
  out.finite = std::isfinite(loss.values.total);
  if (!out.finite) return out;
  tape.backward(loss.objective);
  out.grads.reserve(ids.size());
  for (NodeId id : ids) out.grads.push_back(tape.gradient(id));
  return out;
}

double validation_total(const Model& model, const std::vector<SceneInputs>& val,
                        bool parallel) {
  if (val.empty()) return 0.0;
  std::vector<double> totals(val.size());
  auto eval_one = [&](std::size_t i) {
    Tape tape;
    const auto ids = model.to_tape(tape);
    const TapeForward fwd = model.forward(tape, ids, val[i]);
    totals[i] = build_losses(tape, fwd, val[i]).values.total;
  };
  if (parallel)
    parallel_for(val.size(), eval_one);
  else
    for (std::size_t i = 0; i < val.size(); ++i) eval_one(i);
  double sum = 0.0;
  for (double t : totals) sum += t;
  return sum / static_cast<double>(val.size());
}

}  // namespace

TrainResult train(Model& model, const Dataset& data, const TrainConfig& config) {
  if (config.batch_size == 0) throw ConfigError("batch size must be at least 1");
  TrainResult result;
  Adam adam(model.params(), config.adam);

  // With no validation data there is nothing to select on; the final weights
  // stand (the overfitting workflow relies on this).
  const bool track_best = !data.val.empty();
  std::vector<ParamEntry> best_params = model.params().entries();
  result.best_val = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng = Rng::derived(config.seed, 0xe0 + epoch);
    const auto order = shuffled_indices(data.train.size(), shuffle_rng);

    LossBreakdown epoch_sum;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      std::vector<SceneGrads> slots(count);
      auto run_one = [&](std::size_t j) {
        slots[j] = scene_backward(model, data.train[order[start + j]], config.loss_weights);
      };
      if (config.parallel_batches)
        parallel_for(count, run_one);
      else
        for (std::size_t j = 0; j < count; ++j) run_one(j);

      std::vector<std::vector<double>> grads;
      grads.reserve(model.params().count());
      for (const auto& e : model.params().entries())
        grads.emplace_back(e.value.numel(), 0.0);
      for (std::size_t j = 0; j < count; ++j) {
        if (!slots[j].finite)
          throw NumericError("training diverged: non-finite loss at epoch " +
                             std::to_string(epoch) + ", batch " +
                             std::to_string(start / config.batch_size));
        for (std::size_t p = 0; p < grads.size(); ++p)
          for (std::size_t k = 0; k < grads[p].size(); ++k)
            grads[p][k] += slots[j].grads[p][k];
        epoch_sum.l_reg += slots[j].loss.l_reg;
        epoch_sum.l_score += slots[j].loss.l_score;
        epoch_sum.l_cls += slots[j].loss.l_cls;
        epoch_sum.total += slots[j].loss.total;
      }
      const double inv = 1.0 / static_cast<double>(count);
      for (auto& g : grads)
        for (double& v : g) v *= inv;
      adam.step(model.params(), grads);
      seen += count;
    }

    EpochLog log;
    log.epoch = epoch;
    if (seen > 0) {
      const double inv = 1.0 / static_cast<double>(seen);
      log.train_loss.l_reg = epoch_sum.l_reg * inv;
      log.train_loss.l_score = epoch_sum.l_score * inv;
      log.train_loss.l_cls = epoch_sum.l_cls * inv;
      log.train_loss.total = epoch_sum.total * inv;
    }
    log.val_total = validation_total(model, data.val, config.parallel_batches);
    result.log.push_back(log);

    if (track_best && log.val_total < result.best_val) {
      result.best_val = log.val_total;
      result.best_epoch = epoch;
      best_params = model.params().entries();
    }
  }

  if (track_best && !result.log.empty()) {
    for (std::size_t i = 0; i < best_params.size(); ++i)
      model.params()[i].value = best_params[i].value;
  } else if (!result.log.empty()) {
    result.best_epoch = result.log.size() - 1;
    result.best_val = result.log.back().val_total;
  }
  return result;
}

SceneMetrics scene_metrics(const MixtureTrajectory& mix, const std::vector<Vec2>& truth) {
  if (mix.modes.empty() || truth.empty())
    throw DataError("metrics: empty prediction or ground truth");
  const auto order = top_n_indices(mix.mode_probs, mix.mode_probs.size());

  auto min_over = [&](std::size_t k, bool final_only) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < std::min(k, order.size()); ++r) {
      const auto& mode = mix.modes[order[r]];
      double err;
      if (final_only) {
        err = std::hypot(mode.back().mu_x - truth.back().x,
                         mode.back().mu_y - truth.back().y);
      } else {
        double sum = 0.0;
        for (std::size_t t = 0; t < truth.size(); ++t)
          sum += std::hypot(mode[t].mu_x - truth[t].x, mode[t].mu_y - truth[t].y);
        err = sum / static_cast<double>(truth.size());
      }
      if (err < best) best = err;
    }
    return best;
  };

  SceneMetrics m;
  m.ade_1 = min_over(1, false);
  m.fde_1 = min_over(1, true);
  m.ade_6 = min_over(6, false);
  m.fde_6 = min_over(6, true);
  return m;
}

MetricReport reduce_metrics(const std::vector<SceneMetrics>& per_scene) {
  MetricReport r;
  r.scene_count = per_scene.size();
  if (per_scene.empty()) return r;
  double a1 = 0, f1 = 0, a6 = 0, f6 = 0;
  for (const auto& m : per_scene) {
    a1 += m.ade_1;
    f1 += m.fde_1;
    a6 += m.ade_6;
    f6 += m.fde_6;
  }
  const double n = static_cast<double>(per_scene.size());
  r.min_ade_1 = a1 / n;
  r.min_fde_1 = f1 / n;
  r.min_ade_6 = a6 / n;
  r.min_fde_6 = f6 / n;
  return r;
}

namespace {

MetricReport evaluate_impl(const Model& model, const std::vector<SceneInputs>& scenes,
                           bool parallel) {
  std::vector<SceneMetrics> per_scene(scenes.size());
  auto eval_one = [&](std::size_t i) {
    if (scenes[i].future.size() != scenes[i].t_f)
      throw DataError("evaluate: scene '" + scenes[i].id + "' lacks ground truth");
    per_scene[i] = scene_metrics(model.predict(scenes[i]).mixture, scenes[i].future);
  };
  if (parallel)
    parallel_for(scenes.size(), eval_one);
  else
    for (std::size_t i = 0; i < scenes.size(); ++i) eval_one(i);
  return reduce_metrics(per_scene);
}

}  // namespace

MetricReport evaluate_serial(const Model& model, const std::vector<SceneInputs>& scenes) {
  return evaluate_impl(model, scenes, false);
}

MetricReport evaluate_parallel(const Model& model, const std::vector<SceneInputs>& scenes) {
  return evaluate_impl(model, scenes, true);
}

std::vector<CompareRow> compare_variants(const std::vector<Scene>& corpus,
                                         const ModelConfig& base,
                                         const GridSpec& grid_spec,
                                         const ColliderParams& collider,
                                         const TrainConfig& config, bool standardize,
                                         const std::string& out_dir,
                                         const std::string& stamp) {
  const Dataset data = prepare_dataset(corpus, grid_spec, collider, base.box,
                                       config.val_fraction, config.seed, standardize);
  const Variant variants[] = {Variant::LSTM, Variant::TrajDCM, Variant::WayDCM1,
                              Variant::WayDCM2};
  std::vector<CompareRow> rows;
  for (std::size_t vi = 0; vi < 4; ++vi) {
    ModelConfig cfg = base;
    cfg.variant = variants[vi];
    Model model(cfg);
    Rng init_rng = Rng::derived(config.seed, 0x11a + vi);
    model.init_weights(init_rng);

    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    const TrainResult tr = train(model, data, config);
    const auto t1 = clock::now();
    const MetricReport metrics = evaluate_parallel(model, data.val);
    const auto t2 = clock::now();

    CompareRow row;
    row.variant = variants[vi];
    row.seed = config.seed;
    row.metrics = metrics;
    row.train_seconds = std::chrono::duration<double>(t1 - t0).count();
    row.eval_seconds = std::chrono::duration<double>(t2 - t1).count();
    rows.push_back(row);

    if (!out_dir.empty()) {
      const std::string tag = to_string(variants[vi]);
      model.save_checkpoint(out_dir + "/" + tag + ".ckpt", data.scaler);
      write_training_log_csv(out_dir + "/" + tag + "_training.csv", tr.log, stamp);
    }
  }
  return rows;
}

namespace {

std::ofstream open_report(const std::string& path, const std::string& stamp) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.precision(17);
  if (!stamp.empty()) out << stamp << '\n';
  return out;
}

}  // namespace

void write_training_log_csv(const std::string& path, const std::vector<EpochLog>& log,
                            const std::string& stamp) {
  auto out = open_report(path, stamp);
  out << "epoch,l_reg,l_score,l_cls,total,val_total\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << e.train_loss.l_reg << ',' << e.train_loss.l_score << ','
        << e.train_loss.l_cls << ',' << e.train_loss.total << ',' << e.val_total << '\n';
  }
}

void write_metrics_csv(const std::string& path, const MetricReport& report,
                       const std::string& stamp) {
  auto out = open_report(path, stamp);
  out << "min_ade_1,min_fde_1,min_ade_6,min_fde_6,scenes\n";
  out << report.min_ade_1 << ',' << report.min_fde_1 << ',' << report.min_ade_6 << ','
      << report.min_fde_6 << ',' << report.scene_count << '\n';
}

void write_compare_csv(const std::string& path, const std::vector<CompareRow>& rows,
                       const std::string& stamp) {
  auto out = open_report(path, stamp);
  out << "variant,seed,min_ade_6,min_fde_6,min_ade_1,min_fde_1,scenes\n";
  for (const auto& r : rows) {
    out << to_string(r.variant) << ',' << r.seed << ',' << r.metrics.min_ade_6 << ','
        << r.metrics.min_fde_6 << ',' << r.metrics.min_ade_1 << ',' << r.metrics.min_fde_1
        << ',' << r.metrics.scene_count << '\n';
  }
}

void write_compare_timing_csv(const std::string& path, const std::vector<CompareRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.precision(6);
  out << "variant,train_seconds,eval_seconds\n";
  for (const auto& r : rows)
    out << to_string(r.variant) << ',' << r.train_seconds << ',' << r.eval_seconds << '\n';
}

}  // namespace waydcm
