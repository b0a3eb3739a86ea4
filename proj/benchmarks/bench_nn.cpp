#include "preqn/common.hpp"
#include "preqn/nn.hpp"

#include <benchmark/benchmark.h>

#include <vector>

namespace {

using preqn::Rng;
using preqn::Vector;

std::vector<int> pendulum_critic_sizes(int width, int depth) {
  std::vector<int> sizes;
  sizes.push_back(4);  // 3 obs + 1 action
  for (int l = 0; l < depth; ++l) sizes.push_back(width);
  sizes.push_back(1);
  return sizes;
}

std::vector<Vector> random_inputs(int n, int dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vector> xs;
  xs.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) xs.push_back(rng.uniform_vector(dim, -2.0, 2.0));
  return xs;
}

void bm_forward_scalar(benchmark::State& state) {
  const auto net = preqn::nn::mlp_init(
      pendulum_critic_sizes(static_cast<int>(state.range(0)), 2),
      preqn::nn::Activation::kTanh, 81);
  const auto xs = random_inputs(1, 4, 82);
  for (auto _ : state) {
    double y = preqn::nn::forward_scalar(net, xs[0]);
    benchmark::DoNotOptimize(y);
  }
}
BENCHMARK(bm_forward_scalar)->Arg(64)->Arg(256);

void bm_forward_batch(benchmark::State& state) {
  const auto net = preqn::nn::mlp_init(pendulum_critic_sizes(64, 2),
                                       preqn::nn::Activation::kTanh, 83);
  const auto xs = random_inputs(static_cast<int>(state.range(0)), 4, 84);
  for (auto _ : state) {
    double acc = 0.0;
    for (const auto& x : xs) acc += preqn::nn::forward_scalar(net, x);
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_forward_batch)->Arg(32)->Arg(256);

// Per-sample gradients are the inner loop of every kernel build; batch size
// matches the training defaults.
void bm_grad_per_sample(benchmark::State& state) {
  const auto net = preqn::nn::mlp_init(
      pendulum_critic_sizes(static_cast<int>(state.range(0)), 2),
      preqn::nn::Activation::kTanh, 85);
  const auto xs = random_inputs(32, 4, 86);
  for (auto _ : state) {
    auto grads = preqn::nn::grad_per_sample(net, xs);
    benchmark::DoNotOptimize(grads.phi.data());
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(bm_grad_per_sample)->Arg(64)->Arg(256);

void bm_apply_param_step(benchmark::State& state) {
  const auto net = preqn::nn::mlp_init(pendulum_critic_sizes(256, 2),
                                       preqn::nn::Activation::kTanh, 87);
  Rng rng(88);
  const Vector dir =
      rng.uniform_vector(static_cast<int>(net.params.size()), -1.0, 1.0);
  for (auto _ : state) {
    auto moved = preqn::nn::apply_param_step(net, dir, 1e-3);
    benchmark::DoNotOptimize(moved.params.data());
  }
}
BENCHMARK(bm_apply_param_step);

}  // namespace
