#include <benchmark/benchmark.h>

#include "rvt/attention.hpp"
#include "rvt/ops.hpp"
#include "rvt/rng.hpp"

namespace {

rvt::Tensor<float> random_tensor(rvt::Shape shape, rvt::Rng& rng) {
  std::vector<float> data(static_cast<std::size_t>(rvt::shape_numel(shape)));
  for (auto& v : data) v = static_cast<float>(rng.uniform(-1, 1));
  return rvt::Tensor<float>(std::move(shape), std::move(data));
}

void BM_Matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  rvt::Rng rng(1);
  auto a = random_tensor({n, n}, rng);
  auto b = random_tensor({n, n}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(rvt::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * int64_t(n) * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_Conv2d(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  rvt::Rng rng(2);
  auto x = random_tensor({1, c, 32, 32}, rng);
  auto w = random_tensor({c, c, 3, 3}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(rvt::conv2d(x, w, 1, 1));
}
BENCHMARK(BM_Conv2d)->Arg(8)->Arg(16)->Arg(32);

void BM_Attention(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  rvt::Rng rng(3);
  auto q = random_tensor({n, 64}, rng);
  auto k = random_tensor({n, 64}, rng);
  auto v = random_tensor({n, 64}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(rvt::sdp_attention(q, k, v));
}
BENCHMARK(BM_Attention)->Arg(16)->Arg(64)->Arg(196);

void BM_PaasAttention(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  rvt::Rng rng(4);
  auto q = random_tensor({n, 64}, rng);
  auto k = random_tensor({n, 64}, rng);
  auto v = random_tensor({n, 64}, rng);
  auto wp = random_tensor({n, n}, rng);
  for (auto _ : state)
    benchmark::DoNotOptimize(rvt::paas_attention(q, k, v, wp));
}
BENCHMARK(BM_PaasAttention)->Arg(16)->Arg(64)->Arg(196);

}  // namespace
