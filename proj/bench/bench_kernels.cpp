// Parallel kernels against their serial references on desk-sized inputs.

#include <benchmark/benchmark.h>

#include "lateralsim/evaluate.hpp"
#include "lateralsim/experiment.hpp"

using namespace lateralsim;

namespace {

struct Corpus {
  GenerationConfig config;
  std::vector<Episode> episodes;
  std::vector<Network> networks;
  FeatureSchema schema;
  Dataset dataset;
  MlpModel model;
  std::vector<const TrainingGroup*> batch;
  std::vector<double> rows;
};

const Corpus& corpus() {
  static const Corpus c = [] {
    Corpus out;
    out.episodes = run_campaigns(out.config, HeuristicWeights{}, 40, 1);
    out.networks = networks_for(out.episodes);
    out.schema = FeatureSchema::for_config(out.config, true);
    out.dataset = build_dataset(out.episodes, out.networks, out.schema);
    out.model = init_model(out.schema, TrainConfig{});
    for (std::size_t i = 0; i < 32 && i < out.dataset.groups.size(); ++i) {
      out.batch.push_back(&out.dataset.groups[i]);
    }
    const TrainingGroup& g = out.dataset.groups.front();
    const int w = out.schema.candidate_width();
    for (int r = 0; r < 2000; ++r) {
      out.rows.insert(out.rows.end(), g.state.begin(), g.state.end());
      const auto row = g.row(r % g.rows(), w);
      out.rows.insert(out.rows.end(), row.begin(), row.end());
    }
    return out;
  }();
  return c;
}

void BM_Campaigns(benchmark::State& state) {
  const bool parallel = state.range(0) != 0;
  const GenerationConfig config;
  for (auto _ : state) {
    auto eps = parallel ? run_campaigns(config, HeuristicWeights{}, 32, 3)
                        : run_campaigns_serial(config, HeuristicWeights{}, 32, 3);
    benchmark::DoNotOptimize(eps);
  }
}
BENCHMARK(BM_Campaigns)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_BuildDataset(benchmark::State& state) {
  const auto& c = corpus();
  const bool parallel = state.range(0) != 0;
  for (auto _ : state) {
    auto ds = parallel ? build_dataset(c.episodes, c.networks, c.schema)
                       : build_dataset_serial(c.episodes, c.networks, c.schema);
    benchmark::DoNotOptimize(ds);
  }
}
BENCHMARK(BM_BuildDataset)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_BatchGradients(benchmark::State& state) {
  const auto& c = corpus();
  const bool parallel = state.range(0) != 0;
  for (auto _ : state) {
    auto lg = parallel ? batch_loss_and_gradients(c.model, c.batch, 0.0)
                       : batch_loss_and_gradients_serial(c.model, c.batch, 0.0);
    benchmark::DoNotOptimize(lg);
  }
}
BENCHMARK(BM_BatchGradients)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_EvaluateCorpus(benchmark::State& state) {
  const auto& c = corpus();
  const bool parallel = state.range(0) != 0;
  for (auto _ : state) {
    auto v = parallel ? evaluate_corpus(c.model, c.episodes, c.networks, c.schema)
                      : evaluate_corpus_serial(c.model, c.episodes, c.networks, c.schema);
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_EvaluateCorpus)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_ForwardBatch(benchmark::State& state) {
  const auto& c = corpus();
  const bool parallel = state.range(0) != 0;
  for (auto _ : state) {
    auto z = parallel ? forward_batch(c.model, c.rows) : forward_batch_serial(c.model, c.rows);
    benchmark::DoNotOptimize(z);
  }
}
BENCHMARK(BM_ForwardBatch)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
