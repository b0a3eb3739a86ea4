#include "preqn/trainer.hpp"

#include <doctest.h>

#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

using namespace preqn::trainer;
using preqn::Rng;
using preqn::Vector;
namespace nn = preqn::nn;
namespace rl = preqn::rl;

namespace {

Vector vec3(double a, double b, double c) {
  Vector v(3);
  v << a, b, c;
  return v;
}

rl::Transition make_tr(const Vector& s, double a, double r, const Vector& s2,
                       double done = 0.0) {
  rl::Transition t;
  t.s = s;
  t.a = Vector::Constant(1, a);
  t.r = r;
  t.s_next = s2;
  t.done = done;
  return t;
}

// Critic Q(x) = w . x + b over x = (s, a) in R^4 and actor raw(s) = v . s + c,
// both as genuine one-layer networks so every library path applies.
ActorCritic linear_ac(const Vector& w, double b, const Vector& v, double c) {
  ActorCritic ac;
  ac.q_net = nn::mlp_init({4, 1}, nn::Activation::kTanh, 0);
  ac.q_net.params << w[0], w[1], w[2], w[3], b;
  ac.mu_net = nn::mlp_init({3, 1}, nn::Activation::kTanh, 0);
  ac.mu_net.params << v[0], v[1], v[2], c;
  ac.act_low = Vector::Constant(1, -2.0);
  ac.act_high = Vector::Constant(1, 2.0);
  return ac;
}

ActorCritic zero_linear_ac() {
  return linear_ac(Vector::Zero(4), 0.0, Vector::Zero(3), 0.0);
}

// Transitions gathered from a uniform-action pendulum rollout; the standard
// realistic batch for update tests.
std::vector<rl::Transition> pendulum_batch(int n, std::uint64_t seed) {
  auto env = rl::pendulum_env(seed);
  Rng rng(seed + 1);
  std::vector<rl::Transition> out;
  Vector obs = env->reset();
  while (static_cast<int>(out.size()) < n) {
    Vector a(1);
    a << rng.uniform(-2.0, 2.0);
    const rl::StepResult res = env->step(a);
    rl::Transition t;
    t.s = obs;
    t.a = a;
    t.r = res.reward;
    t.s_next = res.obs;
    t.done = 0.0;
    out.push_back(std::move(t));
    obs = res.time_limit ? env->reset() : res.obs;
  }
  return out;
}

}  // namespace

TEST_CASE("actor-critic factory builds matching shapes deterministically") {
  const Vector low = Vector::Constant(2, -1.0);
  const Vector high = Vector::Constant(2, 1.0);
  const ActorCritic ac = make_actor_critic(4, 2, low, high, {8, 8},
                                           nn::Activation::kSin, 5);
  CHECK(ac.q_net.input_dim() == 6);
  CHECK(ac.q_net.output_dim() == 1);
  CHECK(ac.mu_net.input_dim() == 4);
  CHECK(ac.mu_net.output_dim() == 2);
  const ActorCritic twin = make_actor_critic(4, 2, low, high, {8, 8},
                                             nn::Activation::kSin, 5);
  CHECK((ac.q_net.params - twin.q_net.params).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((ac.mu_net.params - twin.mu_net.params).lpNorm<Eigen::Infinity>() == 0.0);
  const ActorCritic other = make_actor_critic(4, 2, low, high, {8, 8},
                                              nn::Activation::kSin, 6);
  CHECK((ac.q_net.params - other.q_net.params).lpNorm<Eigen::Infinity>() > 0.0);

  CHECK_THROWS_AS(make_actor_critic(0, 2, low, high, {8}, nn::Activation::kSin, 0),
                  preqn::ShapeError);
  CHECK_THROWS_AS(make_actor_critic(4, 1, low, high, {8}, nn::Activation::kSin, 0),
                  preqn::ShapeError);
}

TEST_CASE("policy actions are squashed into the box") {
  // Zero actor plays the box center; saturated raw outputs approach a rail.
  ActorCritic ac = zero_linear_ac();
  CHECK(policy_action(ac, vec3(0.3, -0.2, 0.9))[0] == 0.0);
  ac.mu_net.params << 0.0, 0.0, 0.0, 50.0;  // constant huge raw output
  const double a = policy_action(ac, vec3(0.0, 0.0, 0.0))[0];
  CHECK(a <= 2.0);
  CHECK(a == doctest::Approx(2.0).epsilon(1e-12));
  ac.mu_net.params << 1.0, 0.0, 0.0, 0.0;  // raw = s0
  CHECK(policy_action(ac, vec3(0.5, 0.0, 0.0))[0] ==
        doctest::Approx(2.0 * std::tanh(0.5)).epsilon(1e-15));
}

TEST_CASE("q_values_on_batch matches pointwise evaluation") {
  Vector w(4);
  w << 1.0, -2.0, 0.5, 1.0;
  const ActorCritic ac = linear_ac(w, 0.25, Vector::Zero(3), 0.0);
  const auto batch = pendulum_batch(6, 3);
  const Vector q = q_values_on_batch(ac, batch);
  REQUIRE(q.size() == 6);
  for (int i = 0; i < 6; ++i)
    CHECK(q[i] == q_value(ac, batch[i].s, batch[i].a));
}

TEST_CASE("TD errors reduce to rewards when both networks are zero") {
  const ActorCritic ac = zero_linear_ac();
  const std::vector<rl::Transition> batch = {
      make_tr(vec3(1, 0, 0), 0.5, -3.0, vec3(0, 1, 0)),
      make_tr(vec3(0, 2, 0), -1.0, 7.0, vec3(0, 0, 1)),
  };
  const Vector delta = compute_td_errors(ac, batch, 0.99);
  CHECK(delta[0] == -3.0);
  CHECK(delta[1] == 7.0);
}

TEST_CASE("TD errors follow the one-step formula on a hand-built critic") {
  Vector w(4);
  w << 1.0, -1.0, 2.0, 0.5;
  const ActorCritic ac = linear_ac(w, 0.25, vec3(0.3, 0.0, 0.0), 0.1);
  const Vector s = vec3(1.0, 2.0, -1.0);
  const Vector s2 = vec3(0.5, -0.5, 1.0);
  const double a = 0.7, r = -2.0, gamma = 0.9;
  const Vector delta = compute_td_errors(ac, {make_tr(s, a, r, s2)}, gamma);

  const double a_next = 2.0 * std::tanh(0.3 * s2[0] + 0.1);
  const double boot = w[0] * s2[0] + w[1] * s2[1] + w[2] * s2[2] + w[3] * a_next + 0.25;
  const double q_here = w[0] * s[0] + w[1] * s[1] + w[2] * s[2] + w[3] * a + 0.25;
  CHECK(delta[0] == doctest::Approx(r + gamma * boot - q_here).epsilon(1e-14));
}

TEST_CASE("terminal transitions drop the bootstrap entirely") {
  Vector w(4);
  w << 100.0, 100.0, 100.0, 100.0;  // any bootstrap leak would be enormous
  const ActorCritic ac = linear_ac(w, 0.0, Vector::Zero(3), 0.0);
  const auto done_tr = make_tr(vec3(0.01, 0.0, 0.0), 0.0, 5.0, vec3(1, 1, 1), 1.0);
  const Vector delta = compute_td_errors(ac, {done_tr}, 0.99);
  CHECK(delta[0] == doctest::Approx(5.0 - 1.0).epsilon(1e-13));
  CHECK_THROWS_AS(compute_td_errors(ac, {}, 0.99), preqn::ArgumentError);
}

TEST_CASE("preconditioned update with zero TD error leaves the critic alone") {
  const ActorCritic ac = zero_linear_ac();
  // Zero rewards and a zero critic: delta is identically zero.
  const std::vector<rl::Transition> batch = {
      make_tr(vec3(1, 0, 0), 0.5, 0.0, vec3(0, 1, 0)),
      make_tr(vec3(0, 1, 0), -0.5, 0.0, vec3(1, 0, 0)),
  };
  PreqnConfig cfg;
  cfg.actor_lr = 0.0;
  const UpdateResult out = preqn_update(ac, batch, cfg);
  CHECK(out.diag.accepted);
  CHECK(out.diag.backtracks == 0);
  CHECK(out.diag.alignment_cos == 1.0);  // degenerate pair counts as aligned
  CHECK(out.diag.td_mean_abs == 0.0);
  CHECK(out.diag.q_batch_mean == 0.0);
  CHECK((out.ac.q_net.params - ac.q_net.params).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((out.ac.mu_net.params - ac.mu_net.params).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("on a linear critic the realized Q change is exactly the scaled TD error") {
  // For a linear model the first-order prediction is exact, so the accepted
  // candidate realizes critic_lr * delta on the batch with no backtracking.
  Vector w(4);
  w << 0.2, -0.4, 0.1, 0.3;
  const ActorCritic ac = linear_ac(w, -0.2, vec3(0.1, -0.2, 0.05), 0.0);
  const std::vector<rl::Transition> batch = {
      make_tr(vec3(1.0, 0.5, -0.3), 0.8, 1.0, vec3(0.2, -1.0, 0.4)),
      make_tr(vec3(-0.7, 1.2, 0.6), -1.1, -0.5, vec3(0.9, 0.1, -0.8)),
      make_tr(vec3(0.3, -0.9, 1.5), 1.7, 2.0, vec3(-0.4, 0.7, 1.1)),
  };
  PreqnConfig cfg;
  cfg.critic_lr = 0.25;
  cfg.actor_lr = 0.0;
  cfg.eta = 0.97;
  const Vector delta = compute_td_errors(ac, batch, cfg.gamma);
  const Vector q_before = q_values_on_batch(ac, batch);
  const UpdateResult out = preqn_update(ac, batch, cfg);
  const Vector q_after = q_values_on_batch(out.ac, batch);

  CHECK(out.diag.accepted);
  CHECK(out.diag.backtracks == 0);
  CHECK(out.diag.alignment_cos == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(((q_after - q_before) - cfg.critic_lr * delta).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK(out.diag.leading_order_residual < 1e-10);
  CHECK((out.ac.mu_net.params - ac.mu_net.params).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("a realistic critic update is accepted at the alignment threshold") {
  const auto batch = pendulum_batch(32, 7);
  const ActorCritic ac =
      make_actor_critic(3, 1, Vector::Constant(1, -2.0), Vector::Constant(1, 2.0),
                        {64, 64}, nn::Activation::kSin, 8);
  PreqnConfig cfg = desk_scale_defaults();
  const UpdateResult out = preqn_update(ac, batch, cfg);
  CHECK(out.diag.accepted);
  CHECK(out.diag.alignment_cos >= cfg.eta);
  CHECK(out.diag.td_mean_abs > 0.0);
  // The critic moved and the actor moved.
  CHECK((out.ac.q_net.params - ac.q_net.params).lpNorm<Eigen::Infinity>() > 0.0);
  CHECK((out.ac.mu_net.params - ac.mu_net.params).lpNorm<Eigen::Infinity>() > 0.0);
}

TEST_CASE("an always-accepting threshold reproduces the raw step bitwise") {
  const auto batch = pendulum_batch(16, 9);
  const ActorCritic ac =
      make_actor_critic(3, 1, Vector::Constant(1, -2.0), Vector::Constant(1, 2.0),
                        {16, 16}, nn::Activation::kSin, 10);
  PreqnConfig cfg = desk_scale_defaults();
  cfg.eta = -0.5;  // first candidate always passes
  cfg.actor_lr = 0.0;
  const UpdateResult out = preqn_update(ac, batch, cfg);
  const Vector raw = preqn_raw_step_params(ac, batch, cfg.critic_lr, cfg.gamma,
                                           cfg.pinv_rel_tol);
  CHECK(out.diag.backtracks == 0);
  CHECK((out.ac.q_net.params - raw).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("contradictory data defeats the linesearch and the critic is skipped") {
  // Two transitions with the same input but opposite rewards: any parameter
  // step moves both Q values together, while the TD errors point apart, so no
  // candidate can align. The solved step is the zero vector.
  const ActorCritic ac = zero_linear_ac();
  const std::vector<rl::Transition> batch = {
      make_tr(vec3(1, 2, 3), 0.5, 1.0, vec3(0, 0, 1)),
      make_tr(vec3(1, 2, 3), 0.5, -1.0, vec3(0, 0, 1)),
  };
  PreqnConfig cfg;
  cfg.linesearch_max_backtracks = 3;
  cfg.actor_lr = 0.0;
  const UpdateResult out = preqn_update(ac, batch, cfg);
  CHECK_FALSE(out.diag.accepted);
  CHECK(out.diag.backtracks == 4);  // every candidate including c = 1 failed
  CHECK(out.diag.alignment_cos == 0.0);
  CHECK(out.diag.leading_order_residual == 0.0);
  CHECK((out.ac.q_net.params - ac.q_net.params).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("non-finite rewards abort the update") {
  const ActorCritic ac = zero_linear_ac();
  const auto bad = make_tr(vec3(1, 0, 0), 0.0, std::nan(""), vec3(0, 1, 0));
  PreqnConfig cfg;
  CHECK_THROWS_AS(preqn_update(ac, {bad}, cfg), preqn::UpdateAbortError);
  std::optional<Vector> no_target;
  CHECK_THROWS_AS(baseline_dql_update(ac, no_target, {bad}, 0.1, cfg),
                  preqn::UpdateAbortError);
}

TEST_CASE("primal and dual forms of the preconditioned step agree") {
  const auto batch = pendulum_batch(8, 11);
  const ActorCritic ac =
      make_actor_critic(3, 1, Vector::Constant(1, -2.0), Vector::Constant(1, 2.0),
                        {16, 16}, nn::Activation::kSin, 12);
  const double alpha = 0.1;
  const Vector primal = preqn_raw_step_params(ac, batch, alpha);
  const Vector dual = natural_gradient_reference_step(ac, batch, alpha);
  const Vector step_p = primal - ac.q_net.params;
  const Vector step_d = dual - ac.q_net.params;
  CHECK(step_p.lpNorm<Eigen::Infinity>() > 0.0);
  CHECK((step_p - step_d).lpNorm<Eigen::Infinity>() <=
        1e-6 * std::max(1.0, step_p.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("baseline update with zero learning rates is a no-op") {
  Vector w(4);
  w << 0.3, 0.1, -0.2, 0.5;
  const ActorCritic ac = linear_ac(w, 0.1, vec3(0.2, 0.0, -0.1), 0.0);
  const auto batch = pendulum_batch(4, 13);
  PreqnConfig cfg;
  cfg.actor_lr = 0.0;
  std::optional<Vector> no_target;
  const UpdateResult out = baseline_dql_update(ac, no_target, batch, 0.0, cfg);
  CHECK(out.diag.accepted);
  CHECK((out.ac.q_net.params - ac.q_net.params).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((out.ac.mu_net.params - ac.mu_net.params).lpNorm<Eigen::Infinity>() == 0.0);
  // Nothing moved, so the realized change is degenerate against nonzero TD.
  CHECK(out.diag.alignment_cos == 0.0);
}

TEST_CASE("baseline step on one transition is lr times delta times the gradient") {
  Vector w(4);
  w << 0.5, -0.5, 0.25, 1.0;
  const ActorCritic ac = linear_ac(w, 0.0, Vector::Zero(3), 0.0);
  const auto tr = make_tr(vec3(1.0, -2.0, 0.5), 0.8, 1.5, vec3(0.3, 0.3, -0.6));
  PreqnConfig cfg;
  cfg.gamma = 0.9;
  cfg.actor_lr = 0.0;
  std::optional<Vector> no_target;
  const double lr = 0.05;
  const UpdateResult out = baseline_dql_update(ac, no_target, {tr}, lr, cfg);

  const double delta = compute_td_errors(ac, {tr}, cfg.gamma)[0];
  Vector grad(5);  // gradient of w.x + b is (x, 1)
  grad << tr.s[0], tr.s[1], tr.s[2], tr.a[0], 1.0;
  const Vector want = ac.q_net.params + lr * delta * grad;
  CHECK((out.ac.q_net.params - want).lpNorm<Eigen::Infinity>() < 1e-15);
  // One sample, linear model: realized change aligns exactly with delta.
  CHECK(out.diag.alignment_cos == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("target-network baseline bootstraps from the frozen critic") {
  Vector w(4);
  w << 1.0, 0.0, 0.0, 0.0;
  const ActorCritic ac = linear_ac(w, 0.0, Vector::Zero(3), 0.0);
  Vector frozen(5);
  frozen << 2.0, 2.0, 2.0, 2.0, 0.0;
  std::optional<Vector> target = frozen;
  const auto tr = make_tr(vec3(0.5, 0.0, 0.0), 0.0, 1.0, vec3(1.0, 1.0, 1.0));
  PreqnConfig cfg;
  cfg.gamma = 0.5;
  cfg.actor_lr = 0.0;
  cfg.polyak = 0.9;
  const double lr = 0.1;
  const UpdateResult out = baseline_dql_update(ac, target, {tr}, lr, cfg);

  // Live actor plays squash(0) = 0; frozen bootstrap = 2+2+2+0 = 6.
  // delta = 1 + 0.5 * 6 - Q_live(s, a) = 4 - 0.5 = 3.5.
  Vector grad(5);
  grad << 0.5, 0.0, 0.0, 0.0, 1.0;
  const Vector want_params = ac.q_net.params + lr * 3.5 * grad;
  CHECK((out.ac.q_net.params - want_params).lpNorm<Eigen::Infinity>() < 1e-13);

  // Target slides toward the fresh parameters by 1 - polyak.
  REQUIRE(target.has_value());
  const Vector want_target = 0.9 * frozen + 0.1 * want_params;
  CHECK((*target - want_target).lpNorm<Eigen::Infinity>() < 1e-13);

  Vector short_target = Vector::Zero(3);
  std::optional<Vector> bad = short_target;
  CHECK_THROWS_AS(baseline_dql_update(ac, bad, {tr}, lr, cfg), preqn::ShapeError);
  std::optional<Vector> ok = frozen;
  CHECK_THROWS_AS(baseline_dql_update(ac, ok, {tr}, -0.1, cfg), preqn::ArgumentError);
}

TEST_CASE("config validation rejects out-of-range settings") {
  PreqnConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.gamma = 1.0;
  CHECK_THROWS_AS(cfg.validate(), preqn::ArgumentError);
  cfg = PreqnConfig{};
  cfg.eta = 1.5;
  CHECK_THROWS_AS(cfg.validate(), preqn::ArgumentError);
  cfg = PreqnConfig{};
  cfg.linesearch_decay = 1.0;
  CHECK_THROWS_AS(cfg.validate(), preqn::ArgumentError);
  cfg = PreqnConfig{};
  cfg.hidden_sizes = {};
  CHECK_THROWS_AS(cfg.validate(), preqn::ArgumentError);
  cfg = PreqnConfig{};
  cfg.buffer_capacity = 8;
  CHECK_THROWS_AS(cfg.validate(), preqn::ArgumentError);
  cfg = PreqnConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), preqn::ArgumentError);
}

TEST_CASE("config JSON round-trips every field") {
  PreqnConfig cfg;
  cfg.gamma = 0.9;
  cfg.batch_size = 17;
  cfg.critic_lr = 0.031;
  cfg.actor_lr = 0.0021;
  cfg.eta = 0.5;
  cfg.update_every = 7;
  cfg.update_after = 123;
  cfg.start_steps = 456;
  cfg.action_noise_std = 0.05;
  cfg.linesearch_decay = 0.6;
  cfg.linesearch_max_backtracks = 9;
  cfg.pinv_rel_tol = 1e-8;
  cfg.polyak = 0.9;
  cfg.hidden_sizes = {5, 6, 7};
  cfg.activation = nn::Activation::kRelu;
  cfg.buffer_capacity = 2048;
  const PreqnConfig back = config_from_json(config_to_json(cfg));
  CHECK(back.gamma == cfg.gamma);
  CHECK(back.batch_size == cfg.batch_size);
  CHECK(back.critic_lr == cfg.critic_lr);
  CHECK(back.actor_lr == cfg.actor_lr);
  CHECK(back.eta == cfg.eta);
  CHECK(back.update_every == cfg.update_every);
  CHECK(back.update_after == cfg.update_after);
  CHECK(back.start_steps == cfg.start_steps);
  CHECK(back.action_noise_std == cfg.action_noise_std);
  CHECK(back.linesearch_decay == cfg.linesearch_decay);
  CHECK(back.linesearch_max_backtracks == cfg.linesearch_max_backtracks);
  CHECK(back.pinv_rel_tol == cfg.pinv_rel_tol);
  CHECK(back.polyak == cfg.polyak);
  CHECK(back.hidden_sizes == cfg.hidden_sizes);
  CHECK(back.activation == cfg.activation);
  CHECK(back.buffer_capacity == cfg.buffer_capacity);
}

TEST_CASE("partial config JSON only overrides the named fields") {
  PreqnConfig cfg = desk_scale_defaults();
  apply_config_json(cfg, R"({"critic_lr": 0.42, "hidden_sizes": [32]})");
  CHECK(cfg.critic_lr == 0.42);
  CHECK(cfg.hidden_sizes == std::vector<int>{32});
  CHECK(cfg.batch_size == 64);       // desk-scale value untouched
  CHECK(cfg.update_after == 1000);   // desk-scale value untouched
  CHECK(cfg.eta == 0.97);

  CHECK_THROWS_AS(apply_config_json(cfg, R"({"learning_rate": 0.1})"),
                  preqn::ArgumentError);
  CHECK_THROWS_AS(apply_config_json(cfg, R"({"gamma": "high"})"), preqn::ArgumentError);
  CHECK_THROWS_AS(apply_config_json(cfg, "not json"), preqn::ArgumentError);
  CHECK_THROWS_AS(config_from_json(R"({"gamma": 2.0})"), preqn::ArgumentError);
}

TEST_CASE("desk-scale defaults shrink the standard settings") {
  const PreqnConfig desk = desk_scale_defaults();
  CHECK(desk.batch_size == 64);
  CHECK(desk.hidden_sizes == std::vector<int>{64, 64});
  CHECK(desk.update_after == 1000);
  CHECK(desk.start_steps == 1000);
  const PreqnConfig full;
  CHECK(full.batch_size == 256);
  CHECK(full.hidden_sizes == std::vector<int>{256, 256});
  CHECK(desk.gamma == full.gamma);
  CHECK(desk.eta == full.eta);
}

TEST_CASE("algorithm names parse with the target-network flag") {
  CHECK(algo_from_string("preqn", false) == Algo::kPreqn);
  CHECK(algo_from_string("baseline", false) == Algo::kBaseline);
  CHECK(algo_from_string("baseline", true) == Algo::kBaselineTarget);
  CHECK_THROWS_AS(algo_from_string("preqn", true), preqn::ArgumentError);
  CHECK_THROWS_AS(algo_from_string("dqn", false), preqn::ArgumentError);
  CHECK(to_string(Algo::kPreqn) == "preqn");
  CHECK(to_string(Algo::kBaseline) == "baseline");
  CHECK(to_string(Algo::kBaselineTarget) == "baseline+target");
}

namespace {

PreqnConfig tiny_train_config() {
  PreqnConfig cfg = desk_scale_defaults();
  cfg.hidden_sizes = {16, 16};
  cfg.batch_size = 16;
  cfg.start_steps = 200;
  cfg.update_after = 200;
  cfg.update_every = 50;
  cfg.buffer_capacity = 10000;
  return cfg;
}

}  // namespace

TEST_CASE("training runs are deterministic and scheduled as configured") {
  const PreqnConfig cfg = tiny_train_config();
  auto env_a = rl::make_env("masspoint", 77);
  const TrainResult a = train(*env_a, Algo::kPreqn, cfg, 2000, 5);
  auto env_b = rl::make_env("masspoint", 77);
  const TrainResult b = train(*env_b, Algo::kPreqn, cfg, 2000, 5);
  auto env_c = rl::make_env("masspoint", 77);
  const TrainResult c = train(*env_c, Algo::kPreqn, cfg, 2000, 6);

  // Rounds fire at steps 200, 250, ..., 2000, each running 50 updates.
  CHECK(a.updates_total == 37 * 50);
  CHECK(a.updates_aborted == 0);
  CHECK_FALSE(a.watchdog_tripped);
  CHECK(a.watchdog_step == -1);
  REQUIRE(a.metrics.size() == 2);
  CHECK(a.metrics[0].step == 1000);
  CHECK(a.metrics[1].step == 2000);
  CHECK(a.metrics[1].accepted > 0.5);
  CHECK(a.metrics[1].alignment_cos > 0.9);
  CHECK(a.metrics[0].eval_return_std >= 0.0);

  CHECK((a.final_ac.q_net.params - b.final_ac.q_net.params).lpNorm<Eigen::Infinity>() ==
        0.0);
  CHECK((a.final_ac.mu_net.params - b.final_ac.mu_net.params).lpNorm<Eigen::Infinity>() ==
        0.0);
  CHECK(a.metrics[1].eval_return_mean == b.metrics[1].eval_return_mean);
  CHECK((a.final_ac.q_net.params - c.final_ac.q_net.params).lpNorm<Eigen::Infinity>() >
        0.0);
}

TEST_CASE("no updates happen before the configured warmup") {
  const PreqnConfig cfg = tiny_train_config();
  auto env = rl::make_env("masspoint", 78);
  const TrainResult out = train(*env, Algo::kPreqn, cfg, 150, 0);
  CHECK(out.updates_total == 0);
  CHECK(out.metrics.empty());
}

TEST_CASE("update and checkpoint hooks fire on schedule") {
  const PreqnConfig cfg = tiny_train_config();
  auto env = rl::make_env("masspoint", 79);
  std::int64_t n_updates = 0;
  std::int64_t first_step = -1;
  std::vector<std::int64_t> ckpt_steps;
  bool indices_ok = true;
  bool saw_critic_move = false;
  TrainHooks hooks;
  hooks.on_update = [&](const UpdateRecord& rec) {
    if (first_step < 0) first_step = rec.env_step;
    if (rec.update_index != n_updates) indices_ok = false;
    if (rec.env_step % 50 != 0) indices_ok = false;
    if ((rec.after.q_net.params - rec.before.q_net.params).lpNorm<Eigen::Infinity>() >
        0.0)
      saw_critic_move = true;
    ++n_updates;
  };
  hooks.on_checkpoint = [&](std::int64_t step, const ActorCritic&) {
    ckpt_steps.push_back(step);
  };
  hooks.checkpoint_every = 500;
  const TrainResult out = train(*env, Algo::kPreqn, cfg, 1000, 1, hooks);
  CHECK(n_updates == out.updates_total);
  CHECK(first_step == 200);
  CHECK(indices_ok);
  CHECK(saw_critic_move);
  CHECK(ckpt_steps == std::vector<std::int64_t>{500, 1000});
}

TEST_CASE("both baseline variants run end to end") {
  PreqnConfig cfg = tiny_train_config();
  cfg.critic_lr = 1e-3;  // plain gradient scale, not the preconditioned one
  for (Algo algo : {Algo::kBaseline, Algo::kBaselineTarget}) {
    auto env = rl::make_env("masspoint", 80);
    const TrainResult out = train(*env, algo, cfg, 500, 2);
    CHECK(out.updates_total == 7 * 50);
    CHECK(out.updates_accepted == out.updates_total);
    CHECK_FALSE(out.watchdog_tripped);
  }
}

TEST_CASE("the divergence watchdog halts an exploding baseline run") {
  PreqnConfig cfg = tiny_train_config();
  cfg.critic_lr = 1e8;  // guaranteed blow-up on the first round
  cfg.start_steps = 50;
  cfg.update_after = 50;
  cfg.update_every = 10;
  cfg.batch_size = 8;
  auto env = rl::make_env("masspoint", 81);
  const TrainResult out = train(*env, Algo::kBaseline, cfg, 2000, 3);
  CHECK(out.watchdog_tripped);
  CHECK(out.watchdog_step >= 50);
  CHECK(out.watchdog_step <= 200);  // long before the step budget ran out
}

TEST_CASE("metrics CSV uses the documented schema") {
  EvalPoint pt;
  pt.step = 1000;
  pt.eval_return_mean = -1.5;
  pt.eval_return_std = 0.25;
  pt.q_mean = 2.0;
  pt.td_mean_abs = 0.125;
  pt.alignment_cos = 0.5;
  pt.backtracks = 1.5;
  pt.accepted = 0.75;
  std::ostringstream out;
  write_metrics_csv({pt}, out);
  CHECK(out.str() ==
        "step,eval_return_mean,eval_return_std,q_mean,td_mean_abs,alignment_cos,"
        "backtracks,accepted\n"
        "1000,-1.5,0.25,2,0.125,0.5,1.5,0.75\n");
}
