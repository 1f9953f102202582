#include <benchmark/benchmark.h>

#include "mnagt/model.hpp"
#include "mnagt/synthetic.hpp"
#include "mnagt/training.hpp"

using namespace mnagt;

namespace {

Tensor<float> random_tensor(std::size_t r, std::size_t c, Rng& rng) {
  Tensor<float> t(Shape{r, c});
  for (auto& v : t.values()) v = static_cast<float>(uniform(rng, -1, 1));
  return t;
}

ModelConfig reference_model(std::size_t input_dim) {
  ModelConfig m;
  m.input_dim = input_dim;
  m.num_classes = 2;
  m.mna.dim = 128;
  m.mna.heads = 3;
  m.mna.head_dim = 8;
  m.mna.max_hop = 3;
  return m;
}

// Graphs with roughly NCI1's size profile: ~30 nodes, ~32 edges, 37 features.
std::vector<Graph> nci1_like(std::size_t count, Rng& rng) {
  std::vector<Graph> graphs;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t n = 20 + uniform_index(rng, 20);
    graphs.push_back(random_graph(n, 2.2 / static_cast<double>(n), 37, rng, static_cast<int>(i % 2)));
  }
  return graphs;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng = make_rng(0, Stream::Data);
  const auto a = random_tensor(n, 128, rng), b = random_tensor(128, 128, rng);
  for (auto _ : state) {
    Tape<float> tape;
    benchmark::DoNotOptimize(ops::matmul(tape.constant(a), tape.constant(b)).value().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n));
}
BENCHMARK(BM_Matmul)->Arg(256)->Arg(4096);

void BM_Propagate(benchmark::State& state) {
  Rng rng = make_rng(1, Stream::Data);
  const auto graphs = nci1_like(256, rng);
  const GraphBatch batch = make_batch(std::span<const Graph>(graphs), NormalizationKind::Symmetric);
  const auto h = random_tensor(batch.num_nodes(), 128, rng);
  for (auto _ : state) {
    Tape<float> tape;
    benchmark::DoNotOptimize(propagate(tape.constant(h), batch.a_hat, static_cast<int>(state.range(0))).value().data());
  }
}
BENCHMARK(BM_Propagate)->Arg(1)->Arg(3);

void BM_BlockAttention(benchmark::State& state) {
  Rng rng = make_rng(2, Stream::Data);
  const auto graphs = nci1_like(256, rng);
  const GraphBatch batch = make_batch(std::span<const Graph>(graphs), NormalizationKind::Symmetric);
  const std::size_t n = batch.num_nodes();
  const auto q = random_tensor(n, 8, rng), k = random_tensor(n, 8, rng), v = random_tensor(n, 8, rng);
  for (auto _ : state) {
    Tape<float> tape;
    benchmark::DoNotOptimize(scaled_dot_attention(tape.constant(q), tape.constant(k), tape.constant(v),
                                                  std::span<const std::size_t>(batch.offsets))
                                 .value()
                                 .data());
  }
}
BENCHMARK(BM_BlockAttention);

// One forward + backward of the reference model on a batch of 256 graphs.
void BM_ModelStep(benchmark::State& state) {
  Rng rng = make_rng(3, Stream::Data);
  const auto graphs = nci1_like(256, rng);
  const ModelConfig cfg = reference_model(37);
  const GraphBatch batch = make_batch(std::span<const Graph>(graphs), cfg.norm);
  Rng init = make_rng(0, Stream::Init);
  const auto params = init_model_params<float>(cfg, init);
  Rng drop = make_rng(0, Stream::Dropout);
  const bool backward = state.range(0) != 0;
  for (auto _ : state) {
    Tape<float> tape;
    const auto vars = bind(tape, params);
    const auto logits = model_forward(tape, batch, vars, cfg, ForwardContext{backward, &drop});
    const auto loss = ops::cross_entropy_logits(logits, std::span<const int>(batch.labels));
    if (backward) tape.backward(loss);
    benchmark::DoNotOptimize(loss.value().data());
  }
}
BENCHMARK(BM_ModelStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

// A training epoch over an NCI1-sized train split (3288 graphs). Multiply by
// epochs x seeds to estimate a full run.
void BM_TrainEpochNci1Sized(benchmark::State& state) {
  Rng rng = make_rng(4, Stream::Data);
  const auto graphs = nci1_like(3288, rng);
  const ModelConfig cfg = reference_model(37);
  TrainConfig t;
  t.batch_size = 256;
  for (auto _ : state) {
    auto ts = make_train_state<float>(cfg, t, 0, graphs.size());
    benchmark::DoNotOptimize(train_epoch(ts, cfg, t, std::span<const Graph>(graphs), 1).loss);
  }
}
BENCHMARK(BM_TrainEpochNci1Sized)->Unit(benchmark::kSecond)->Iterations(1);

}  // namespace
BENCHMARK_MAIN();
