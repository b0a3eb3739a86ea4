#include "preqn/common.hpp"
#include "preqn/env.hpp"
#include "preqn/ntk.hpp"
#include "preqn/tabular.hpp"
#include "preqn/trainer.hpp"

#include <benchmark/benchmark.h>

#include <optional>
#include <vector>

namespace {

using preqn::Matrix;
using preqn::Rng;
using preqn::Vector;
namespace tab = preqn::tabular;

void bm_tabular_backup(benchmark::State& state) {
  const auto mdp = tab::make_random_mdp(static_cast<int>(state.range(0)), 4,
                                        0.99, 101);
  Rng rng(102);
  const auto q = tab::random_q(mdp, -10.0, 10.0, rng);
  for (auto _ : state) {
    auto t = tab::bellman_optimal(mdp, q);
    benchmark::DoNotOptimize(t.values.data());
  }
}
BENCHMARK(bm_tabular_backup)->Arg(16)->Arg(64)->Arg(256);

void bm_kernel_bellman_update(benchmark::State& state) {
  const int n_states = static_cast<int>(state.range(0));
  const auto mdp = tab::make_random_mdp(n_states, 4, 0.99, 103);
  Rng rng(104);
  const auto q = tab::random_q(mdp, -10.0, 10.0, rng);
  const auto rho = tab::uniform_rho(mdp.n_pairs());
  const tab::KernelSpec kernel{
      Matrix::Identity(mdp.n_pairs(), mdp.n_pairs())};
  for (auto _ : state) {
    auto t = tab::kernel_bellman_update(mdp, q, rho, kernel, 0.1);
    benchmark::DoNotOptimize(t.values.data());
  }
}
BENCHMARK(bm_kernel_bellman_update)->Arg(16)->Arg(64);

std::vector<preqn::rl::Transition> pendulum_batch(int n, std::uint64_t seed) {
  auto env = preqn::rl::pendulum_env(seed);
  Rng rng(preqn::derive_seed(seed, 1));
  std::vector<preqn::rl::Transition> batch;
  Vector obs = env->reset();
  while (static_cast<int>(batch.size()) < n) {
    const Vector a = rng.uniform_vector(1, -2.0, 2.0);
    const auto res = env->step(a);
    preqn::rl::Transition t;
    t.s = obs;
    t.a = a;
    t.r = res.reward;
    t.s_next = res.obs;
    batch.push_back(std::move(t));
    obs = res.time_limit ? env->reset() : res.obs;
  }
  return batch;
}

preqn::trainer::PreqnConfig bench_config(int batch) {
  auto cfg = preqn::trainer::desk_scale_defaults();
  cfg.batch_size = batch;
  return cfg;
}

// Full preconditioned critic update: gradients, Gram matrix, least-squares
// solve, linesearch, actor step.
void bm_preqn_update(benchmark::State& state) {
  const int batch_size = static_cast<int>(state.range(0));
  const auto cfg = bench_config(batch_size);
  const auto ac = preqn::trainer::make_actor_critic(
      3, 1, Vector::Constant(1, -2.0), Vector::Constant(1, 2.0),
      cfg.hidden_sizes, cfg.activation, 105);
  const auto batch = pendulum_batch(batch_size, 106);
  for (auto _ : state) {
    auto res = preqn::trainer::preqn_update(ac, batch, cfg);
    benchmark::DoNotOptimize(res.ac.q_net.params.data());
  }
}
BENCHMARK(bm_preqn_update)->Arg(32)->Arg(64)->Arg(128);

void bm_baseline_update(benchmark::State& state) {
  const int batch_size = static_cast<int>(state.range(0));
  const auto cfg = bench_config(batch_size);
  const auto ac = preqn::trainer::make_actor_critic(
      3, 1, Vector::Constant(1, -2.0), Vector::Constant(1, 2.0),
      cfg.hidden_sizes, cfg.activation, 107);
  const auto batch = pendulum_batch(batch_size, 108);
  std::optional<Vector> no_target;
  for (auto _ : state) {
    auto res =
        preqn::trainer::baseline_dql_update(ac, no_target, batch, 1e-3, cfg);
    benchmark::DoNotOptimize(res.ac.q_net.params.data());
  }
}
BENCHMARK(bm_baseline_update)->Arg(64)->Arg(128);

void bm_env_step(benchmark::State& state) {
  auto env = preqn::rl::pendulum_env(109);
  Rng rng(110);
  env->reset();
  std::int64_t steps = 0;
  for (auto _ : state) {
    const auto res = env->step(rng.uniform_vector(1, -2.0, 2.0));
    benchmark::DoNotOptimize(res.reward);
    if (res.time_limit) env->reset();
    ++steps;
  }
  state.SetItemsProcessed(steps);
}
BENCHMARK(bm_env_step);

}  // namespace
