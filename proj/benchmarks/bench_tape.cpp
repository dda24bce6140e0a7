#include <benchmark/benchmark.h>

#include "dair/rng.hpp"
#include "dair/tape.hpp"
#include "dair/tensor.hpp"

namespace {

using dair::Rng;
using dair::ad::Tape;
using dair::ad::Tensor;
using dair::ad::Val;

void fill(Tensor& t, Rng& rng) {
  for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
}

// Forward+backward through a 2-layer MLP at the batch sizes the trainer uses.
void bm_mlp_forward_backward(benchmark::State& state) {
  const std::size_t batch = state.range(0);
  const std::size_t dim = state.range(1);
  Rng rng(1);
  Tensor x(batch, 8), w1(8, dim), b1(1, dim), w2(dim, dim), b2(1, dim);
  fill(x, rng);
  fill(w1, rng);
  fill(b1, rng);
  fill(w2, rng);
  fill(b2, rng);

  Tape tape;
  for (auto _ : state) {
    tape.reset();
    Val h = tape.relu(tape.add(tape.matmul(tape.constant(x), tape.param(w1)), tape.param(b1)));
    Val y = tape.add(tape.matmul(h, tape.param(w2)), tape.param(b2));
    Val loss = tape.mean(tape.square(y));
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.value(loss));
    w1.zero_grad();
    b1.zero_grad();
    w2.zero_grad();
    b2.zero_grad();
  }
  state.SetItemsProcessed(state.iterations() * batch);
}

void bm_softmax_rows(benchmark::State& state) {
  const std::size_t batch = state.range(0);
  Rng rng(2);
  Tensor x(batch, 4);
  fill(x, rng);
  Tape tape;
  for (auto _ : state) {
    tape.reset();
    benchmark::DoNotOptimize(tape.values(tape.softmax_rows(tape.constant(x))));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}

}  // namespace

BENCHMARK(bm_mlp_forward_backward)->Args({1, 16})->Args({128, 16})->Args({128, 64})->Args({512, 64});
BENCHMARK(bm_softmax_rows)->Arg(1)->Arg(128)->Arg(512);

BENCHMARK_MAIN();
