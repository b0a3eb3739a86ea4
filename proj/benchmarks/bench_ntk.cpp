#include "preqn/common.hpp"
#include "preqn/env.hpp"
#include "preqn/nn.hpp"
#include "preqn/ntk.hpp"

#include <benchmark/benchmark.h>

#include <vector>

namespace {

using preqn::Rng;
using preqn::Vector;

std::vector<Vector> pendulum_rails_dataset(int n, std::uint64_t seed) {
  auto env = preqn::rl::pendulum_env(seed);
  Rng rng(preqn::derive_seed(seed, 1));
  return preqn::rl::collect_rails_dataset(*env, n, rng);
}

preqn::nn::Mlp critic(int width, int depth, std::uint64_t seed) {
  std::vector<int> sizes;
  sizes.push_back(4);
  for (int l = 0; l < depth; ++l) sizes.push_back(width);
  sizes.push_back(1);
  return preqn::nn::mlp_init(sizes, preqn::nn::Activation::kTanh, seed);
}

// Gradients plus Gram matrix, the full cost of one kernel evaluation.
void bm_build_ntk(benchmark::State& state) {
  const auto net = critic(64, 2, 91);
  const auto data =
      pendulum_rails_dataset(static_cast<int>(state.range(0)), 92);
  for (auto _ : state) {
    auto grads = preqn::nn::grad_per_sample(net, data);
    auto kernel = preqn::ntk::build_ntk(grads);
    benchmark::DoNotOptimize(kernel.k.data());
  }
}
BENCHMARK(bm_build_ntk)->Arg(32)->Arg(128)->Arg(256);

// Gram product alone, with gradients precomputed.
void bm_gram_only(benchmark::State& state) {
  const auto net = critic(64, 2, 93);
  const auto data =
      pendulum_rails_dataset(static_cast<int>(state.range(0)), 94);
  const auto grads = preqn::nn::grad_per_sample(net, data);
  for (auto _ : state) {
    auto kernel = preqn::ntk::build_ntk(grads);
    benchmark::DoNotOptimize(kernel.k.data());
  }
}
BENCHMARK(bm_gram_only)->Arg(128)->Arg(256);

void bm_row_ratio(benchmark::State& state) {
  const auto net = critic(64, 2, 95);
  const auto data = pendulum_rails_dataset(256, 96);
  const auto kernel =
      preqn::ntk::build_ntk(preqn::nn::grad_per_sample(net, data));
  for (auto _ : state) {
    Vector r = preqn::ntk::row_ratio(kernel);
    benchmark::DoNotOptimize(r.data());
  }
}
BENCHMARK(bm_row_ratio);

// One sweep cell at the documented architecture grid's heaviest corner.
void bm_sweep_cell(benchmark::State& state) {
  const auto data = pendulum_rails_dataset(128, 97);
  for (auto _ : state) {
    auto cells = preqn::ntk::ntk_sweep(
        "pendulum", data, {64}, {static_cast<int>(state.range(0))},
        {preqn::nn::Activation::kRelu}, 1, 98);
    benchmark::DoNotOptimize(cells.front().stats.row_ratio_mean);
  }
}
BENCHMARK(bm_sweep_cell)->Arg(1)->Arg(4);

}  // namespace
