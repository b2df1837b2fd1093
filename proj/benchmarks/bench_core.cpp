#include <benchmark/benchmark.h>

#include <random>

#include "cite/protocol.hpp"
#include "cite/sampling.hpp"

using namespace cite;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (double& v : m.values()) v = n(rng);
  return m;
}

struct Fixture {
  SynthSpec spec;
  std::vector<SynthDataset> domains = generate(spec);
  ClassSplit split = split_base_new(spec.n_classes, spec.base_fraction, spec.seed);
  Checkpoint pretrained = pretrain(spec, PretrainConfig{});
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, 64, 1), b = random_matrix(64, 64, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}
BENCHMARK(BM_Matmul)->Arg(8)->Arg(32)->Arg(128);

// Forward plus backward of the combined objective on one fine-tuning batch.
void BM_TotalLoss(benchmark::State& state) {
  const Fixture& f = fixture();
  const Vocabulary vocab(f.spec.n_classes);
  const auto b = static_cast<std::size_t>(state.range(0));
  const auto prompts = task_prompts(vocab, f.split.base);
  VLBatch batch;
  batch.image_features = random_matrix(b, f.spec.feature_dim, 3);
  for (std::size_t i = 0; i < b; ++i) {
    batch.class_ids.push_back(i % f.split.base.size());
    batch.prompts.push_back(prompts[i % prompts.size()]);
  }
  const Checkpoint init = with_classifier(f.pretrained, prompts);
  const LossConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(total_loss(batch, init.model, init.model, init.classifier, cfg));
}
BENCHMARK(BM_TotalLoss)->Arg(8)->Arg(32);

void BM_FinetuneBng(benchmark::State& state) {
  const Fixture& f = fixture();
  const SplitSpec spec = make_split_spec(Protocol::kBNG, f.split, f.spec.n_classes, 0, 0);
  TrainConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(run_protocol(spec, f.domains, f.pretrained, cfg, EnsembleConfig{}));
}
BENCHMARK(BM_FinetuneBng)->Unit(benchmark::kMillisecond);

void BM_Pretrain(benchmark::State& state) {
  const SynthSpec spec;
  for (auto _ : state) benchmark::DoNotOptimize(pretrain(spec, PretrainConfig{}));
}
BENCHMARK(BM_Pretrain)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
