// Side-by-side timings of the parallel kernels against their serial
// references. Run with WAYDCM_THREADS=N to sweep worker counts.

#include <benchmark/benchmark.h>

#include "waydcm/choice.hpp"
#include "waydcm/features.hpp"
#include "waydcm/synthgen.hpp"
#include "waydcm/train.hpp"

using namespace waydcm;

namespace {

// One shared fixture: a mid-sized corpus plus everything derived from it.
struct Fixture {
  std::vector<Scene> locals;
  std::vector<RadialGrid> grids;
  LabeledChoiceData choice_data;
  BetaVector beta{-2.64, -0.06, -0.05, -10.83, -20.86};
  std::array<bool, FeatureRow::kCount> mask{true, true, true, true, true};
  Model model{[] {
    ModelConfig m;
    m.embed_dim = 16;
    m.enc_hidden = 16;
    m.attn_dim = 16;
    m.dec_hidden = 16;
    m.goal_embed_dim = 8;
    m.n_modes = 3;
    m.k_goals = 15;
    return m;
  }()};
  std::vector<SceneInputs> inputs;

  Fixture() {
    GenConfig gc;
    gc.n_scenes = 128;
    gc.t_f = 12;
    gc.pilot_scenes = 128;
    gc.seed = 99;
    const GenResult res = generate(gc);

    for (const Scene& s : res.scenes) {
      const Scene local = filter_neighbors(normalize_scene(s), gc.box);
      grids.push_back(build_grid(local, gc.grid));
      locals.push_back(local);
    }
    choice_data = choice_data_from_scenes(res.scenes, gc.grid, gc.collider, gc.box);

    Rng init(99);
    model.init_weights(init);
    model.set_beta(beta);
    inputs.resize(res.scenes.size());
    for (std::size_t i = 0; i < res.scenes.size(); ++i)
      inputs[i] = make_scene_inputs(res.scenes[i], gc.grid, FeatureScaler::identity(),
                                    gc.collider, gc.box);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_feature_batch_serial(benchmark::State& state) {
  Fixture& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(feature_batch_serial(f.locals, f.grids));
}

void BM_feature_batch_parallel(benchmark::State& state) {
  Fixture& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(feature_batch_parallel(f.locals, f.grids));
}

void BM_mnl_nll_grad_serial(benchmark::State& state) {
  Fixture& f = fixture();
  BetaVector grad;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        mnl_nll_grad_serial(f.choice_data, f.beta, f.mask, &grad));
    benchmark::DoNotOptimize(grad);
  }
}

void BM_mnl_nll_grad_parallel(benchmark::State& state) {
  Fixture& f = fixture();
  BetaVector grad;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        mnl_nll_grad_parallel(f.choice_data, f.beta, f.mask, &grad));
    benchmark::DoNotOptimize(grad);
  }
}

void BM_evaluate_serial(benchmark::State& state) {
  Fixture& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(evaluate_serial(f.model, f.inputs));
}

void BM_evaluate_parallel(benchmark::State& state) {
  Fixture& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(evaluate_parallel(f.model, f.inputs));
}

}  // namespace

BENCHMARK(BM_feature_batch_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_feature_batch_parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mnl_nll_grad_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mnl_nll_grad_parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_evaluate_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_evaluate_parallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
