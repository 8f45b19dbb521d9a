#include <benchmark/benchmark.h>

#include "pedalid/autodiff/ops.hpp"
#include "pedalid/data/synth.hpp"
#include "pedalid/data/windowing.hpp"
#include "pedalid/models/models.hpp"
#include "pedalid/nn/layers.hpp"
#include "pedalid/util/random.hpp"

namespace {

using namespace pedalid;
using ad::Tape;
using ad::Tensor;

Tensor noise(const ad::Shape& shape, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> v(ad::shape_numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor(shape, std::move(v));
}

void BM_Conv1dForward(benchmark::State& st) {
  const auto c = static_cast<std::size_t>(st.range(0));
  const Tensor x = noise({32, c, 80}, 1);
  const Tensor w = noise({c, c, 5}, 2);
  const Tensor b = noise({c}, 3);
  auto tape = Tape::inference();
  for (auto _ : st) benchmark::DoNotOptimize(ad::ops::conv1d(tape, x, w, b, {1, 2}));
}
BENCHMARK(BM_Conv1dForward)->Arg(8)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Conv1dBackward(benchmark::State& st) {
  const auto c = static_cast<std::size_t>(st.range(0));
  const Tensor x = noise({32, c, 80}, 1);
  Tensor w = Tensor::parameter({c, c, 5}, std::vector<double>(c * c * 5, 0.01));
  for (auto _ : st) {
    Tape tape;
    tape.backward(ad::ops::sum(tape, ad::ops::conv1d(tape, x, w, Tensor(), {1, 2})));
    w.zero_grad();
  }
}
BENCHMARK(BM_Conv1dBackward)->Arg(8)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_LstmSequence(benchmark::State& st) {
  Rng rng(4);
  nn::Lstm lstm(2, 75, 2, 0.2, rng, 5);
  const Tensor x = noise({32, 2, 80}, 6);
  auto tape = Tape::inference();
  for (auto _ : st) benchmark::DoNotOptimize(lstm.sequence(tape, x, nn::Mode::eval));
}
BENCHMARK(BM_LstmSequence)->Unit(benchmark::kMillisecond);

void BM_ModelForward(benchmark::State& st) {
  models::ModelSpec spec;
  spec.architecture = static_cast<models::Architecture>(st.range(0));
  spec.classes = 10;
  models::Classifier model(spec, 7);
  const Tensor x = noise({32, 2, 80}, 8);
  auto tape = Tape::inference();
  for (auto _ : st) benchmark::DoNotOptimize(model.forward(tape, x, nn::Mode::eval));
}
BENCHMARK(BM_ModelForward)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& st) {
  models::ModelSpec spec;
  spec.classes = 10;
  models::Classifier model(spec, 7);
  const Tensor x = noise({32, 2, 80}, 8);
  std::vector<std::size_t> y(32);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = i % 10;
  for (auto _ : st) {
    Tape tape;
    tape.backward(ad::ops::nll_loss(tape, model.forward(tape, x, nn::Mode::train), y));
    for (auto& p : model.registry().parameters) p.tensor.zero_grad();
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_SynthGenerate(benchmark::State& st) {
  const auto profiles = data::make_profiles(1, 1);
  for (auto _ : st) benchmark::DoNotOptimize(data::synth_generate(profiles, 300));
}
BENCHMARK(BM_SynthGenerate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
