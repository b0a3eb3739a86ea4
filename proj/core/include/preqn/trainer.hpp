#pragma once

#include "preqn/common.hpp"
#include "preqn/env.hpp"
#include "preqn/nn.hpp"
#include "preqn/replay.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace preqn::trainer {

/// Hyperparameters for the actor-critic loops. Defaults are the full-scale
/// settings; desk_scale_defaults() shrinks them to something that runs in
/// seconds.
struct PreqnConfig {
  double gamma = 0.99;
  int batch_size = 256;
  double critic_lr = 0.1;   // step size on the preconditioned critic update
  double actor_lr = 1e-3;
  double eta = 0.97;        // minimum cosine between realized and desired Q change
  int update_every = 50;    // env steps between update rounds; also the number
                            // of updates per round (1:1 with env steps)
  int update_after = 5000;  // env steps before the first update round
  int start_steps = 5000;   // env steps of uniform-random warmup actions
  double action_noise_std = 0.1;
  double linesearch_decay = 0.8;
  int linesearch_max_backtracks = 20;
  double pinv_rel_tol = 1e-10;
  double polyak = 0.995;  // target-critic averaging (baseline variant only)
  std::vector<int> hidden_sizes = {256, 256};
  nn::Activation activation = nn::Activation::kSin;
  std::size_t buffer_capacity = 1'000'000;

  void validate() const;
};

/// Small-problem settings: batch 64, two hidden layers of 64, updates start
/// (and warmup ends) at step 1000.
PreqnConfig desk_scale_defaults();

/// JSON round-trip using the exact field names of PreqnConfig. Parsing starts
/// from defaults and overrides the keys present; unknown keys are an error.
std::string config_to_json(const PreqnConfig& cfg);
PreqnConfig config_from_json(const std::string& text);
/// Overrides only the fields named in the JSON text, leaving the rest of cfg
/// untouched. config_from_json is this applied to a default config.
void apply_config_json(PreqnConfig& cfg, const std::string& text);

enum class Algo { kPreqn, kBaseline, kBaselineTarget };
Algo algo_from_string(std::string_view name, bool target_network);
std::string_view to_string(Algo algo);

/// Critic Q(s, a) over concatenated inputs plus a deterministic actor whose
/// raw outputs are tanh-squashed into the action box.
struct ActorCritic {
  nn::Mlp q_net;   // input obs_dim + act_dim, scalar output
  nn::Mlp mu_net;  // input obs_dim, output act_dim (pre-squash)
  Vector act_low;
  Vector act_high;
};

ActorCritic make_actor_critic(int obs_dim, int act_dim, const Vector& act_low,
                              const Vector& act_high,
                              const std::vector<int>& hidden_sizes,
                              nn::Activation activation, std::uint64_t seed);

/// Deterministic (noise-free) action: squash(mu(obs)).
Vector policy_action(const ActorCritic& ac, const Vector& obs);
double q_value(const ActorCritic& ac, const Vector& obs, const Vector& act);
/// Q(s_i, a_i) for every transition in the batch.
Vector q_values_on_batch(const ActorCritic& ac, const std::vector<rl::Transition>& batch);

/// One-step temporal-difference errors with actor bootstrap and no target
/// network: delta_i = r_i + gamma * (1 - done_i) * Q(s'_i, mu(s'_i)) - Q(s_i, a_i).
Vector compute_td_errors(const ActorCritic& ac, const std::vector<rl::Transition>& batch,
                         double gamma);

struct UpdateDiagnostics {
  double td_mean_abs = 0.0;
  double alignment_cos = 0.0;  // cosine between realized Q change and TD errors
  int backtracks = 0;
  bool accepted = false;
  double q_batch_mean = 0.0;
  /// || realized Q change - predicted first-order change ||_2 on the batch.
  double leading_order_residual = 0.0;
};

struct UpdateResult {
  ActorCritic ac;
  UpdateDiagnostics diag;
};

/// Preconditioned critic update with a backtracking linesearch, then one
/// actor ascent step against the post-linesearch critic.
///
/// The critic step solves K z = delta in the least-squares sense, where K is
/// the gradient Gram matrix of the minibatch, and moves parameters along
/// Phi z scaled by critic_lr. Candidates c = 1, decay, decay^2, ... shrink
/// until the realized Q change on the batch has cosine >= eta with delta;
/// after linesearch_max_backtracks failures the critic update is skipped.
/// Throws UpdateAbortError if TD errors or gradients are non-finite.
UpdateResult preqn_update(const ActorCritic& ac, const std::vector<rl::Transition>& batch,
                          const PreqnConfig& cfg);

/// The critic parameters preqn_update would propose before any backtracking
/// (candidate c = 1). Exists so the dual formulation below can be compared
/// against it directly.
Vector preqn_raw_step_params(const ActorCritic& ac,
                             const std::vector<rl::Transition>& batch, double alpha,
                             double gamma = 0.99, double pinv_rel_tol = 1e-10);

/// Dual form of the same step, computed in parameter space:
/// theta + alpha * pinv(Phi Phi^T) * Phi * delta. Kept as an independent
/// reference implementation; it must agree with preqn_raw_step_params.
Vector natural_gradient_reference_step(const ActorCritic& ac,
                                       const std::vector<rl::Transition>& batch,
                                       double alpha, double gamma = 0.99,
                                       double pinv_rel_tol = 1e-10);

/// Plain deep-Q-style update: theta += lr * mean_i(delta_i * grad Q_i), then
/// one actor ascent step. When target_q_params is present the bootstrap uses
/// that parameter vector for Q(s', .) and is polyak-averaged toward the new
/// parameters afterwards.
UpdateResult baseline_dql_update(const ActorCritic& ac,
                                 std::optional<Vector>& target_q_params,
                                 const std::vector<rl::Transition>& batch, double lr,
                                 const PreqnConfig& cfg);

struct EvalPoint {
  std::int64_t step = 0;
  double eval_return_mean = 0.0;
  double eval_return_std = 0.0;
  double q_mean = 0.0;
  double td_mean_abs = 0.0;
  double alignment_cos = 0.0;
  double backtracks = 0.0;  // mean over the window's updates
  double accepted = 0.0;    // fraction of the window's updates accepted
};

/// Snapshot handed to the update hook. References stay valid only during the
/// callback.
struct UpdateRecord {
  std::int64_t env_step = 0;
  std::int64_t update_index = 0;
  const ActorCritic& before;
  const ActorCritic& after;
  const std::vector<rl::Transition>& batch;
  const UpdateDiagnostics& diag;
};

struct TrainHooks {
  std::function<void(const UpdateRecord&)> on_update;
  std::function<void(std::int64_t step, const ActorCritic&)> on_checkpoint;
  std::int64_t checkpoint_every = 0;  // 0 disables checkpoints
};

struct TrainResult {
  std::vector<EvalPoint> metrics;
  ActorCritic final_ac;
  std::int64_t updates_total = 0;
  std::int64_t updates_accepted = 0;
  std::int64_t updates_aborted = 0;
  bool watchdog_tripped = false;
  std::int64_t watchdog_step = -1;
};

/// Full training loop: warmup with uniform actions, then noisy policy
/// actions; one update round of update_every minibatch updates every
/// update_every env steps (after update_after); deterministic 5-episode
/// evaluation every 1000 steps. A divergence watchdog stops the run if |Q|
/// exceeds 1e6 on a fixed probe set. Fully deterministic given the env's
/// seed and `seed`.
TrainResult train(rl::ContinuousEnv& env, Algo algo, const PreqnConfig& cfg,
                  std::int64_t total_steps, std::uint64_t seed,
                  const TrainHooks& hooks = {});

/// CSV schema: step,eval_return_mean,eval_return_std,q_mean,td_mean_abs,
/// alignment_cos,backtracks,accepted.
void write_metrics_csv(const std::vector<EvalPoint>& points, std::ostream& out);

}  // namespace preqn::trainer
