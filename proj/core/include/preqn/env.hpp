#pragma once

#include "preqn/common.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace preqn::rl {

/// One environment step as seen by an off-policy learner.
struct Transition {
  Vector s;
  Vector a;
  double r = 0.0;
  Vector s_next;
  double done = 0.0;  // 1 only for true terminal states; horizon cuts stay 0
};

struct StepResult {
  Vector obs;
  double reward = 0.0;
  bool terminal = false;    // reached an absorbing state (none of the built-in
                            // tasks have one)
  bool time_limit = false;  // episode ended by horizon; bootstrap through it
};

/// Episodic continuous-control task with a box action space and a fixed
/// horizon. Subclasses supply the dynamics; this base owns the episode
/// bookkeeping, action clipping, and the random source.
class ContinuousEnv {
 public:
  virtual ~ContinuousEnv() = default;

  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }
  const Vector& act_low() const { return act_low_; }
  const Vector& act_high() const { return act_high_; }
  int horizon() const { return horizon_; }

  virtual std::string name() const = 0;
  /// Same task, fresh episode state, new random stream.
  virtual std::unique_ptr<ContinuousEnv> fresh(std::uint64_t seed) const = 0;

  /// Starts a new episode and returns the first observation.
  Vector reset();

  /// Applies the action (clipped to the box) and advances one step. Throws
  /// StateError if called before reset() or after the episode ended.
  StepResult step(const Vector& action);

  /// Places the environment in an exact internal state and starts an episode
  /// there. Intended for tests and deterministic probes.
  void set_state(const Vector& internal_state);
  virtual Vector state() const = 0;

  Vector observe_current() const { return observe(); }

 protected:
  ContinuousEnv(int obs_dim, int act_dim, Vector act_low, Vector act_high,
                int horizon, std::uint64_t seed);

  virtual void do_reset(Rng& rng) = 0;
  virtual void do_set_state(const Vector& internal_state) = 0;
  /// Advances the dynamics under an already-clipped action and returns the
  /// reward for that step.
  virtual double advance(const Vector& clipped_action) = 0;
  virtual Vector observe() const = 0;

 private:
  int obs_dim_;
  int act_dim_;
  int horizon_;
  Vector act_low_;
  Vector act_high_;
  Rng rng_;
  int steps_taken_ = 0;
  bool in_episode_ = false;
};

/// Torque-limited swing-up task. Internal state (angle, angular velocity);
/// observation (cos angle, sin angle, angular velocity); torque box [-2, 2];
/// horizon 200.
std::unique_ptr<ContinuousEnv> pendulum_env(std::uint64_t seed);

/// 2-D double integrator driven to the origin. Internal state
/// (px, py, vx, vy) = observation; acceleration box [-1, 1]^2; horizon 100.
std::unique_ptr<ContinuousEnv> masspoint_env(std::uint64_t seed);

/// Factory by name ("pendulum" or "masspoint").
std::unique_ptr<ContinuousEnv> make_env(const std::string& env_name, std::uint64_t seed);

/// Snaps a free draw u to the action-box boundary by sign: coordinates with
/// u_i >= 0 go to the high rail, the rest to the low rail.
Vector rails_action_from_draw(const Vector& u, const Vector& low, const Vector& high);

/// Exploration policy that always plays extreme actions: draws u uniformly
/// from the box and snaps it to the rails. Maximizes state-space coverage for
/// kernel probes.
Vector rails_random_policy(const ContinuousEnv& env, Rng& rng);

struct TraceRow {
  std::int64_t step = 0;
  Vector s;
  Vector a;
  double r = 0.0;
  double done = 0.0;
};

using Policy = std::function<Vector(const Vector& obs)>;

/// Runs the policy for n_steps environment steps, resetting at episode
/// boundaries. Rows record the observation the action was taken from.
std::vector<TraceRow> rollout(ContinuousEnv& env, const Policy& policy,
                              std::int64_t n_steps);

/// CSV schema: step,s0..s{obs_dim-1},a0..a{act_dim-1},r,done.
void write_trace_csv(const std::vector<TraceRow>& rows, std::ostream& out);

/// (obs, action) rows from a rails-random rollout, each row
/// concat(observation, action). The standard input set for kernel sweeps.
std::vector<Vector> collect_rails_dataset(ContinuousEnv& env, int n_samples, Rng& rng);

}  // namespace preqn::rl
