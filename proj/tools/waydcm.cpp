// Command-line front end: generate / fit-dcm / train / eval / compare / inspect.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "waydcm/config.hpp"
#include "waydcm/errors.hpp"
#include "waydcm/parallel.hpp"

namespace fs = std::filesystem;

namespace waydcm {
namespace {

struct Flags {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string variant;
  std::string scenes;
  std::string checkpoint;
  std::string scene_id;  // inspect only
};

bool flag_given(const CLI::App* cmd, const std::string& name) {
  const CLI::Option* opt = cmd->get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

// Effective configuration: file (if any), then flag overrides, then the
// cross-field mirroring.
RunConfig make_config(const CLI::App* cmd, const Flags& f) {
  RunConfig cfg = f.config_path.empty() ? RunConfig{} : load_run_config(f.config_path);
  if (flag_given(cmd, "--seed")) cfg.seed = f.seed;
  if (flag_given(cmd, "--out")) cfg.out_dir = f.out_dir;
  if (flag_given(cmd, "--variant") && f.variant != "all")
    cfg.variant = variant_from_string(f.variant);
  reconcile(cfg);
  return cfg;
}

void ensure_parent_dir(const std::string& file_path) {
  const fs::path parent = fs::path(file_path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

// Effective-config sidecar so every run directory is self-describing.
void write_run_config(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  const std::string path = cfg.out_dir + "/run_config.json";
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "{\"config_hash\":\"" << std::hex << config_hash(cfg) << std::dec
      << "\",\"version\":\"" << kVersion << "\",\"config\":" << run_config_to_json_text(cfg)
      << "}\n";
}

std::vector<Scene> load_corpus(const std::string& path) {
  if (path.empty()) throw ConfigError("no corpus given (--scenes PATH)");
  return read_scenes(path);
}

// Weight-init stream per (seed, variant); matches the comparison runner so a
// standalone train of one variant reproduces its compare row.
Rng init_rng(const RunConfig& cfg, Variant v) {
  return Rng::derived(cfg.seed, 0x11a + static_cast<std::uint64_t>(v));
}

void cmd_generate(const CLI::App* cmd, const Flags& f) {
  RunConfig cfg = make_config(cmd, f);
  write_run_config(cfg);
  const std::string path =
      f.scenes.empty() ? cfg.out_dir + "/corpus.jsonl" : f.scenes;
  ensure_parent_dir(path);

  const GenResult res = generate(cfg.gen);
  write_corpus(res, path);

  std::size_t total_neighbors = 0;
  for (const auto& s : res.scenes) total_neighbors += s.neighbors.size();
  std::vector<std::size_t> hist(cfg.grid.k_total(), 0);
  for (const std::size_t k : res.labels) ++hist[k];

  std::cout << "wrote " << path << " and " << path << ".meta.json\n";
  std::cout << "scenes " << res.scenes.size() << '\n';
  std::cout << "mean_neighbors "
            << (res.scenes.empty()
                    ? 0.0
                    : double(total_neighbors) / double(res.scenes.size()))
            << '\n';
  std::size_t total = 0;
  for (std::size_t k = 0; k < hist.size(); ++k) {
    std::cout << "label " << k << ' ' << hist[k] << '\n';
    total += hist[k];
  }
  std::cout << "label_total " << total << '\n';
}

void cmd_fit_dcm(const CLI::App* cmd, const Flags& f) {
  RunConfig cfg = make_config(cmd, f);
  write_run_config(cfg);
  const std::string stamp = config_stamp(cfg);

  const auto scenes = load_corpus(f.scenes);
  const auto meta = try_read_corpus_meta(f.scenes);
  FeatureScaler scaler;
  const LabeledChoiceData data = choice_data_from_scenes(
      scenes, cfg.grid, cfg.collider, cfg.box, meta ? &*meta : nullptr, &scaler);

  std::vector<Variant> variants;
  if (f.variant == "all")
    variants = {Variant::TrajDCM, Variant::WayDCM1, Variant::WayDCM2};
  else
    variants = {cfg.variant};

  std::vector<InterpretabilityRow> rows;
  for (const Variant v : variants) {
    const FitReport rep = fit_mnl(data, v, cfg.fit);
    const std::string report_path = cfg.out_dir + "/fit_" + to_string(v) + ".json";
    write_fit_report_json(report_path, rep, stamp);
    rows.push_back(interpret_fit(to_string(v), v, rep.beta));

    std::cout << to_string(v) << " nll " << std::setprecision(12) << rep.nll
              << " iterations " << rep.iterations << " converged "
              << (rep.converged ? "yes" : "no") << '\n';
    const auto mask = variant_features(v);
    for (std::size_t j = 0; j < BetaVector::kCount; ++j)
      if (mask[j])
        std::cout << "  beta_" << FeatureRow::names()[j] << ' '
                  << std::setprecision(12) << rep.beta[j] << '\n';
    std::cout << "  report " << report_path << '\n';
  }

  const std::string table_path = cfg.out_dir + "/beta_table.csv";
  write_beta_table_csv(table_path, rows, stamp);
  std::cout << "table " << table_path << '\n';
}

void cmd_train(const CLI::App* cmd, const Flags& f) {
  RunConfig cfg = make_config(cmd, f);
  write_run_config(cfg);
  const std::string stamp = config_stamp(cfg);

  const auto scenes = load_corpus(f.scenes);
  const Dataset ds =
      prepare_dataset(scenes, cfg.grid, cfg.collider, cfg.box,
                      cfg.train.val_fraction, cfg.seed, cfg.standardize);

  Model model(cfg.model);
  Rng rng = init_rng(cfg, cfg.model.variant);
  model.init_weights(rng);
  const TrainResult result = train(model, ds, cfg.train);

  const std::string tag = to_string(cfg.model.variant);
  const std::string ckpt = f.checkpoint.empty() ? cfg.out_dir + "/" + tag + ".ckpt"
                                                : f.checkpoint;
  ensure_parent_dir(ckpt);
  model.save_checkpoint(ckpt, ds.scaler);
  const std::string log_path = cfg.out_dir + "/" + tag + "_training.csv";
  write_training_log_csv(log_path, result.log, stamp);

  std::cout << "variant " << tag << '\n';
  std::cout << "epochs " << result.log.size() << " best_epoch " << result.best_epoch
            << " best_val " << std::setprecision(12) << result.best_val << '\n';
  std::cout << "checkpoint " << ckpt << '\n';
  std::cout << "log " << log_path << '\n';
}

void cmd_eval(const CLI::App* cmd, const Flags& f) {
  RunConfig cfg = make_config(cmd, f);
  write_run_config(cfg);
  const std::string stamp = config_stamp(cfg);

  auto [model, scaler] = Model::load_checkpoint(f.checkpoint);
  const auto scenes = load_corpus(f.scenes);

  std::vector<SceneInputs> inputs(scenes.size());
  parallel_for(scenes.size(), [&](std::size_t i) {
    inputs[i] = make_scene_inputs(scenes[i], cfg.grid, scaler, cfg.collider, cfg.box);
  });
  const MetricReport rep = evaluate_parallel(model, inputs);

  const std::string path = cfg.out_dir + "/metrics.csv";
  write_metrics_csv(path, rep, stamp);

  std::cout << "scenes " << rep.scene_count << '\n';
  std::cout << std::setprecision(12);
  std::cout << "min_ade_1 " << rep.min_ade_1 << '\n';
  std::cout << "min_fde_1 " << rep.min_fde_1 << '\n';
  std::cout << "min_ade_6 " << rep.min_ade_6 << '\n';
  std::cout << "min_fde_6 " << rep.min_fde_6 << '\n';
  std::cout << "metrics " << path << '\n';
}

void cmd_compare(const CLI::App* cmd, const Flags& f) {
  RunConfig cfg = make_config(cmd, f);
  write_run_config(cfg);
  const std::string stamp = config_stamp(cfg);

  const auto scenes = load_corpus(f.scenes);
  const auto rows = compare_variants(scenes, cfg.model, cfg.grid, cfg.collider,
                                     cfg.train, cfg.standardize, cfg.out_dir, stamp);

  write_compare_csv(cfg.out_dir + "/compare.csv", rows, stamp);
  write_compare_timing_csv(cfg.out_dir + "/compare_timing.csv", rows);

  std::cout << std::left << std::setw(10) << "model" << std::right << std::setw(12)
            << "minADE_1" << std::setw(12) << "minFDE_1" << std::setw(12) << "minADE_6"
            << std::setw(12) << "minFDE_6" << '\n';
  std::cout << std::setprecision(4) << std::fixed;
  for (const auto& row : rows) {
    std::cout << std::left << std::setw(10) << to_string(row.variant) << std::right
              << std::setw(12) << row.metrics.min_ade_1 << std::setw(12)
              << row.metrics.min_fde_1 << std::setw(12) << row.metrics.min_ade_6
              << std::setw(12) << row.metrics.min_fde_6 << '\n';
  }
  std::cout.unsetf(std::ios::fixed);
  std::cout << "table " << cfg.out_dir << "/compare.csv\n";
}

void cmd_inspect(const CLI::App* cmd, const Flags& f) {
  RunConfig cfg = make_config(cmd, f);
  write_run_config(cfg);
  const std::string stamp = config_stamp(cfg);

  auto [model, scaler] = Model::load_checkpoint(f.checkpoint);
  if (!model.config().uses_goals())
    throw ConfigError(
        "inspect needs a goal-scoring checkpoint (trajdcm, waydcm1 or waydcm2)");

  const auto scenes = load_corpus(f.scenes);
  const Scene* scene = nullptr;
  for (const auto& s : scenes)
    if (s.id == f.scene_id) {
      scene = &s;
      break;
    }
  if (!scene) throw DataError("unknown scene id '" + f.scene_id + "' in " + f.scenes);

  const SceneInputs in =
      make_scene_inputs(*scene, cfg.grid, scaler, cfg.collider, cfg.box);
  const Prediction pred = model.predict(in);
  const GoalDistribution& gd = pred.goal_dist;

  const std::string path = cfg.out_dir + "/inspect_" + f.scene_id + ".csv";
  {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << stamp << '\n';
    out.precision(17);
    out << "alternative,dir,occ,coll,dangle,ddist,dir_std,occ_std,coll_std,"
           "dangle_std,ddist_std,u,z,s,pi\n";
    for (std::size_t k = 0; k < gd.probs.size(); ++k) {
      out << k;
      for (std::size_t j = 0; j < FeatureRow::kCount; ++j)
        out << ',' << in.raw_features[k][j];
      for (std::size_t j = 0; j < FeatureRow::kCount; ++j)
        out << ',' << in.features[k][j];
      out << ',' << gd.utilities[k] << ',' << gd.scores[k] - gd.utilities[k] << ','
          << gd.scores[k] << ',' << gd.probs[k] << '\n';
    }
  }

  std::cout << "scene " << f.scene_id << " (" << in.neighbor_pos.size()
            << " neighbors)\n";
  std::cout << std::left << std::setw(4) << "k" << std::right << std::setw(9) << "dir"
            << std::setw(9) << "occ" << std::setw(9) << "coll" << std::setw(9)
            << "dangle" << std::setw(9) << "ddist" << std::setw(11) << "u"
            << std::setw(11) << "z" << std::setw(11) << "s" << std::setw(9) << "pi"
            << '\n';
  std::cout << std::setprecision(3) << std::fixed;
  double pi_sum = 0.0;
  for (std::size_t k = 0; k < gd.probs.size(); ++k) {
    std::cout << std::left << std::setw(4) << k << std::right;
    for (std::size_t j = 0; j < FeatureRow::kCount; ++j)
      std::cout << std::setw(9) << in.raw_features[k][j];
    std::cout << std::setw(11) << gd.utilities[k] << std::setw(11)
              << gd.scores[k] - gd.utilities[k] << std::setw(11) << gd.scores[k]
              << std::setw(9) << gd.probs[k] << '\n';
    pi_sum += gd.probs[k];
  }
  std::cout << "pi_sum " << std::setprecision(12) << pi_sum << '\n';
  std::cout.unsetf(std::ios::fixed);
  std::cout << "top_goals";
  for (const std::size_t k : pred.top_goals) std::cout << ' ' << k;
  std::cout << '\n';
  std::cout << "mode_probs";
  std::cout << std::setprecision(6);
  for (const double p : pred.mixture.mode_probs) std::cout << ' ' << p;
  std::cout << '\n';
  std::cout << "csv " << path << '\n';
}

int run(int argc, char** argv) {
  CLI::App app{"waypoint-conditioned goal-driven trajectory prediction toolkit"};
  app.require_subcommand(1);

  Flags f;
  auto add_common = [&](CLI::App* cmd, bool with_variant) {
    cmd->add_option("--config", f.config_path, "run configuration JSON");
    cmd->add_option("--seed", f.seed, "seed override");
    cmd->add_option("--out", f.out_dir, "output directory");
    if (with_variant)
      cmd->add_option("--variant", f.variant,
                      "lstm, trajdcm, waydcm1, waydcm2 (fit-dcm also: all)");
    return cmd;
  };

  CLI::App* gen = add_common(app.add_subcommand("generate", "write a synthetic corpus"),
                             false);
  gen->add_option("--scenes", f.scenes, "corpus output path (default OUT/corpus.jsonl)");
  gen->callback([&] { cmd_generate(gen, f); });

  CLI::App* fit = add_common(
      app.add_subcommand("fit-dcm", "estimate utility coefficients on a corpus"), true);
  fit->add_option("--scenes", f.scenes, "corpus path")->required();
  fit->callback([&] { cmd_fit_dcm(fit, f); });

  CLI::App* tr = add_common(app.add_subcommand("train", "train one variant"), true);
  tr->add_option("--scenes", f.scenes, "corpus path")->required();
  tr->add_option("--checkpoint", f.checkpoint, "checkpoint output path");
  tr->callback([&] { cmd_train(tr, f); });

  CLI::App* ev = add_common(app.add_subcommand("eval", "evaluate a checkpoint"), false);
  ev->add_option("--scenes", f.scenes, "corpus path")->required();
  ev->add_option("--checkpoint", f.checkpoint, "checkpoint path")->required();
  ev->callback([&] { cmd_eval(ev, f); });

  CLI::App* cp = add_common(
      app.add_subcommand("compare", "train and evaluate all four variants"), false);
  cp->add_option("--scenes", f.scenes, "corpus path")->required();
  cp->callback([&] { cmd_compare(cp, f); });

  CLI::App* ins = add_common(
      app.add_subcommand("inspect", "per-alternative goal scores for one scene"), false);
  ins->add_option("scene_id", f.scene_id, "scene to explain")->required();
  ins->add_option("--scenes", f.scenes, "corpus path")->required();
  ins->add_option("--checkpoint", f.checkpoint, "checkpoint path")->required();
  ins->callback([&] { cmd_inspect(ins, f); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  return 0;
}

}  // namespace
}  // namespace waydcm

int main(int argc, char** argv) {
  try {
    return waydcm::run(argc, argv);
  } catch (const waydcm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const waydcm::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const waydcm::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
