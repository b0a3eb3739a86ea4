#include "preqn/env.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

namespace preqn::rl {

namespace {

double clip(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

// Maps an angle to [-pi, pi); pi itself wraps to -pi.
double wrap_angle(double x) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return x - two_pi * std::floor((x + std::numbers::pi) / two_pi);
}

}  // namespace

ContinuousEnv::ContinuousEnv(int obs_dim, int act_dim, Vector act_low, Vector act_high,
                             int horizon, std::uint64_t seed)
    : obs_dim_(obs_dim),
      act_dim_(act_dim),
      horizon_(horizon),
      act_low_(std::move(act_low)),
      act_high_(std::move(act_high)),
      rng_(seed) {
  if (obs_dim_ <= 0 || act_dim_ <= 0 || horizon_ <= 0)
    throw ShapeError("ContinuousEnv: dimensions and horizon must be positive");
  if (act_low_.size() != act_dim_ || act_high_.size() != act_dim_)
    throw ShapeError("ContinuousEnv: action bounds do not match action dimension");
}

Vector ContinuousEnv::reset() {
  do_reset(rng_);
  steps_taken_ = 0;
  in_episode_ = true;
  return observe();
}

StepResult ContinuousEnv::step(const Vector& action) {
  if (!in_episode_)
    throw StateError(name() + ": step() called outside an episode; call reset()");
  if (action.size() != act_dim_)
    throw ShapeError(name() + ": action has length " + std::to_string(action.size()) +
                     ", expected " + std::to_string(act_dim_));
  if (!all_finite(action)) throw NumericError(name() + ": non-finite action");
  Vector clipped(act_dim_);
  for (int i = 0; i < act_dim_; ++i) clipped[i] = clip(action[i], act_low_[i], act_high_[i]);
  StepResult out;
  out.reward = advance(clipped);
  ++steps_taken_;
  out.terminal = false;
  out.time_limit = steps_taken_ >= horizon_;
  if (out.time_limit) in_episode_ = false;
  out.obs = observe();
  return out;
}

void ContinuousEnv::set_state(const Vector& internal_state) {
  do_set_state(internal_state);
  steps_taken_ = 0;
  in_episode_ = true;
}

namespace {

class PendulumEnv final : public ContinuousEnv {
 public:
  explicit PendulumEnv(std::uint64_t seed)
      : ContinuousEnv(3, 1, Vector::Constant(1, -kMaxTorque),
                      Vector::Constant(1, kMaxTorque), 200, seed) {}

  std::string name() const override { return "pendulum"; }

  std::unique_ptr<ContinuousEnv> fresh(std::uint64_t seed) const override {
    return std::make_unique<PendulumEnv>(seed);
  }

  Vector state() const override {
    Vector s(2);
    s << th_, th_dot_;
    return s;
  }

 protected:
  void do_reset(Rng& rng) override {
    th_ = rng.uniform(-std::numbers::pi, std::numbers::pi);
    th_dot_ = rng.uniform(-1.0, 1.0);
  }

  void do_set_state(const Vector& s) override {
    if (s.size() != 2) throw ShapeError("pendulum: internal state is (angle, velocity)");
    th_ = s[0];
    th_dot_ = s[1];
  }

  double advance(const Vector& a) override {
    const double u = a[0];
    const double cost =
        wrap_angle(th_) * wrap_angle(th_) + 0.1 * th_dot_ * th_dot_ + 0.001 * u * u;
    // Semi-implicit Euler on the rigid-pendulum dynamics
    //   th_ddot = (3 g / (2 l)) sin(th) + (3 / (m l^2)) u
    // with g = 10, m = 1, l = 1.
    th_dot_ += (1.5 * kGravity * std::sin(th_) + 3.0 * u) * kDt;
    th_dot_ = clip(th_dot_, -kMaxSpeed, kMaxSpeed);
    th_ += th_dot_ * kDt;
    return -cost;
  }

  Vector observe() const override {
    Vector o(3);
    o << std::cos(th_), std::sin(th_), th_dot_;
    return o;
  }

 private:
  static constexpr double kGravity = 10.0;
  static constexpr double kDt = 0.05;
  static constexpr double kMaxSpeed = 8.0;
  static constexpr double kMaxTorque = 2.0;

  double th_ = 0.0;
  double th_dot_ = 0.0;
};

class MasspointEnv final : public ContinuousEnv {
 public:
  explicit MasspointEnv(std::uint64_t seed)
      : ContinuousEnv(4, 2, Vector::Constant(2, -1.0), Vector::Constant(2, 1.0), 100,
                      seed) {}

  std::string name() const override { return "masspoint"; }

  std::unique_ptr<ContinuousEnv> fresh(std::uint64_t seed) const override {
    return std::make_unique<MasspointEnv>(seed);
  }

  Vector state() const override {
    Vector s(4);
    s << pos_[0], pos_[1], vel_[0], vel_[1];
    return s;
  }

 protected:
  void do_reset(Rng& rng) override {
    pos_[0] = rng.uniform(-2.0, 2.0);
    pos_[1] = rng.uniform(-2.0, 2.0);
    vel_[0] = 0.0;
    vel_[1] = 0.0;
  }

  void do_set_state(const Vector& s) override {
    if (s.size() != 4) throw ShapeError("masspoint: internal state is (px, py, vx, vy)");
    pos_[0] = s[0];
    pos_[1] = s[1];
    vel_[0] = s[2];
    vel_[1] = s[3];
  }

  double advance(const Vector& a) override {
    const double cost = pos_[0] * pos_[0] + pos_[1] * pos_[1] +
                        0.01 * (a[0] * a[0] + a[1] * a[1]);
    for (int i = 0; i < 2; ++i) {
      vel_[i] = clip(vel_[i] + a[i] * kDt, -kMaxSpeed, kMaxSpeed);
      pos_[i] += vel_[i] * kDt;
    }
    return -cost;
  }

  Vector observe() const override { return state(); }

 private:
  static constexpr double kDt = 0.1;
  static constexpr double kMaxSpeed = 2.0;

  double pos_[2] = {0.0, 0.0};
  double vel_[2] = {0.0, 0.0};
};

}  // namespace

std::unique_ptr<ContinuousEnv> pendulum_env(std::uint64_t seed) {
  return std::make_unique<PendulumEnv>(seed);
}

std::unique_ptr<ContinuousEnv> masspoint_env(std::uint64_t seed) {
  return std::make_unique<MasspointEnv>(seed);
}

std::unique_ptr<ContinuousEnv> make_env(const std::string& env_name, std::uint64_t seed) {
  if (env_name == "pendulum") return pendulum_env(seed);
  if (env_name == "masspoint") return masspoint_env(seed);
  throw ArgumentError("make_env: unknown environment '" + env_name +
                      "' (expected pendulum or masspoint)");
}

Vector rails_action_from_draw(const Vector& u, const Vector& low, const Vector& high) {
  if (u.size() != low.size() || u.size() != high.size())
    throw ShapeError("rails_action_from_draw: mismatched lengths");
  Vector a(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) a[i] = u[i] >= 0.0 ? high[i] : low[i];
  return a;
}

Vector rails_random_policy(const ContinuousEnv& env, Rng& rng) {
  Vector u(env.act_dim());
  for (int i = 0; i < env.act_dim(); ++i)
    u[i] = rng.uniform(env.act_low()[i], env.act_high()[i]);
  return rails_action_from_draw(u, env.act_low(), env.act_high());
}

std::vector<TraceRow> rollout(ContinuousEnv& env, const Policy& policy,
                              std::int64_t n_steps) {
  std::vector<TraceRow> rows;
  rows.reserve(n_steps);
  Vector obs = env.reset();
  for (std::int64_t t = 0; t < n_steps; ++t) {
    TraceRow row;
    row.step = t;
    row.s = obs;
    row.a = policy(obs);
    StepResult res = env.step(row.a);
    row.r = res.reward;
    row.done = res.terminal ? 1.0 : 0.0;
    rows.push_back(std::move(row));
    obs = res.time_limit ? env.reset() : res.obs;
  }
  return rows;
}

void write_trace_csv(const std::vector<TraceRow>& rows, std::ostream& out) {
  if (rows.empty()) {
    out << "step,r,done\n";
    return;
  }
  out << "step";
  for (Eigen::Index i = 0; i < rows.front().s.size(); ++i) out << ",s" << i;
  for (Eigen::Index i = 0; i < rows.front().a.size(); ++i) out << ",a" << i;
  out << ",r,done\n";
  for (const auto& row : rows) {
    out << row.step;
    for (Eigen::Index i = 0; i < row.s.size(); ++i) out << ',' << format_double(row.s[i]);
    for (Eigen::Index i = 0; i < row.a.size(); ++i) out << ',' << format_double(row.a[i]);
    out << ',' << format_double(row.r) << ',' << format_double(row.done) << '\n';
  }
}

std::vector<Vector> collect_rails_dataset(ContinuousEnv& env, int n_samples, Rng& rng) {
  if (n_samples <= 0) throw ArgumentError("collect_rails_dataset: need a positive count");
  auto rows = rollout(
      env, [&](const Vector&) { return rails_random_policy(env, rng); }, n_samples);
  std::vector<Vector> xs;
  xs.reserve(rows.size());
  for (const auto& row : rows) {
    Vector x(row.s.size() + row.a.size());
    x << row.s, row.a;
    xs.push_back(std::move(x));
  }
  return xs;
}

}  // namespace preqn::rl
