#include "preqn/trainer.hpp"

#include "preqn/linalg.hpp"
#include "preqn/ntk.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace preqn::trainer {

namespace {

using nlohmann::json;

constexpr std::int64_t kEvalEvery = 1000;
constexpr int kEvalEpisodes = 5;
constexpr int kProbeSize = 32;
constexpr double kWatchdogLimit = 1e6;

Vector critic_input(const Vector& s, const Vector& a) {
  Vector x(s.size() + a.size());
  x << s, a;
  return x;
}

std::vector<Vector> critic_inputs(const std::vector<rl::Transition>& batch) {
  std::vector<Vector> xs;
  xs.reserve(batch.size());
  for (const auto& t : batch) xs.push_back(critic_input(t.s, t.a));
  return xs;
}

Vector squash(const Vector& raw, const Vector& low, const Vector& high) {
  Vector a(raw.size());
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    const double center = 0.5 * (high[i] + low[i]);
    const double half = 0.5 * (high[i] - low[i]);
    a[i] = center + half * std::tanh(raw[i]);
  }
  return a;
}

void check_batch(const std::vector<rl::Transition>& batch, const char* who) {
  if (batch.empty()) throw ArgumentError(std::string(who) + ": empty batch");
}

// Ascent step on mean_i Q(s_i, mu(s_i)); returns the updated actor
// parameters. The chain rule runs through the tanh squashing, so saturated
// actor outputs receive vanishing gradient.
Vector actor_ascent_params(const ActorCritic& ac,
                           const std::vector<rl::Transition>& batch, double lr) {
  if (lr == 0.0) return ac.mu_net.params;
  const int act_dim = static_cast<int>(ac.act_low.size());
  Vector accum = Vector::Zero(ac.mu_net.params.size());
  for (const auto& t : batch) {
    const Vector raw = nn::forward(ac.mu_net, t.s);
    Vector tanh_raw(raw.size());
    for (Eigen::Index i = 0; i < raw.size(); ++i) tanh_raw[i] = std::tanh(raw[i]);
    const Vector a = squash(raw, ac.act_low, ac.act_high);
    const Vector gx = nn::input_gradient(ac.q_net, critic_input(t.s, a));
    const Vector ga = gx.tail(act_dim);
    Vector graw(raw.size());
    for (Eigen::Index i = 0; i < raw.size(); ++i) {
      const double half = 0.5 * (ac.act_high[i] - ac.act_low[i]);
      graw[i] = half * (1.0 - tanh_raw[i] * tanh_raw[i]) * ga[i];
    }
    accum += nn::param_grad_vjp(ac.mu_net, t.s, graw);
  }
  accum /= static_cast<double>(batch.size());
  if (!all_finite(accum))
    throw UpdateAbortError("actor update produced non-finite gradients");
  return ac.mu_net.params + lr * accum;
}

double mean_abs(const Vector& v) { return v.cwiseAbs().mean(); }

}  // namespace

void PreqnConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ArgumentError("config: gamma must lie in (0, 1)");
  if (batch_size <= 0) throw ArgumentError("config: batch_size must be positive");
  if (!(critic_lr > 0.0)) throw ArgumentError("config: critic_lr must be positive");
  if (actor_lr < 0.0) throw ArgumentError("config: actor_lr must be nonnegative");
  if (!(eta > -1.0 && eta <= 1.0)) throw ArgumentError("config: eta must lie in (-1, 1]");
  if (update_every <= 0) throw ArgumentError("config: update_every must be positive");
  if (update_after < 0 || start_steps < 0)
    throw ArgumentError("config: update_after and start_steps must be nonnegative");
  if (action_noise_std < 0.0) throw ArgumentError("config: action_noise_std must be nonnegative");
  if (!(linesearch_decay > 0.0 && linesearch_decay < 1.0))
    throw ArgumentError("config: linesearch_decay must lie in (0, 1)");
  if (linesearch_max_backtracks < 0)
    throw ArgumentError("config: linesearch_max_backtracks must be nonnegative");
  if (!(pinv_rel_tol > 0.0 && pinv_rel_tol < 1.0))
    throw ArgumentError("config: pinv_rel_tol must lie in (0, 1)");
  if (!(polyak >= 0.0 && polyak < 1.0)) throw ArgumentError("config: polyak must lie in [0, 1)");
  if (hidden_sizes.empty()) throw ArgumentError("config: need at least one hidden layer");
  for (int w : hidden_sizes)
    if (w <= 0) throw ArgumentError("config: hidden widths must be positive");
  if (buffer_capacity < static_cast<std::size_t>(batch_size))
    throw ArgumentError("config: buffer_capacity must be at least batch_size");
}

PreqnConfig desk_scale_defaults() {
  PreqnConfig cfg;
  cfg.batch_size = 64;
  cfg.hidden_sizes = {64, 64};
  cfg.update_after = 1000;
  cfg.start_steps = 1000;
  return cfg;
}

std::string config_to_json(const PreqnConfig& cfg) {
  json j;
  j["gamma"] = cfg.gamma;
  j["batch_size"] = cfg.batch_size;
  j["critic_lr"] = cfg.critic_lr;
  j["actor_lr"] = cfg.actor_lr;
  j["eta"] = cfg.eta;
  j["update_every"] = cfg.update_every;
  j["update_after"] = cfg.update_after;
  j["start_steps"] = cfg.start_steps;
  j["action_noise_std"] = cfg.action_noise_std;
  j["linesearch_decay"] = cfg.linesearch_decay;
  j["linesearch_max_backtracks"] = cfg.linesearch_max_backtracks;
  j["pinv_rel_tol"] = cfg.pinv_rel_tol;
  j["polyak"] = cfg.polyak;
  j["hidden_sizes"] = cfg.hidden_sizes;
  j["activation"] = std::string(nn::to_string(cfg.activation));
  j["buffer_capacity"] = cfg.buffer_capacity;
  return j.dump(2);
}

void apply_config_json(PreqnConfig& cfg, const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ArgumentError(std::string("config_from_json: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ArgumentError("config_from_json: top level must be an object");
  try {
    for (const auto& [key, val] : j.items()) {
      if (key == "gamma") cfg.gamma = val.get<double>();
      else if (key == "batch_size") cfg.batch_size = val.get<int>();
      else if (key == "critic_lr") cfg.critic_lr = val.get<double>();
      else if (key == "actor_lr") cfg.actor_lr = val.get<double>();
      else if (key == "eta") cfg.eta = val.get<double>();
      else if (key == "update_every") cfg.update_every = val.get<int>();
      else if (key == "update_after") cfg.update_after = val.get<int>();
      else if (key == "start_steps") cfg.start_steps = val.get<int>();
      else if (key == "action_noise_std") cfg.action_noise_std = val.get<double>();
      else if (key == "linesearch_decay") cfg.linesearch_decay = val.get<double>();
      else if (key == "linesearch_max_backtracks")
        cfg.linesearch_max_backtracks = val.get<int>();
      else if (key == "pinv_rel_tol") cfg.pinv_rel_tol = val.get<double>();
      else if (key == "polyak") cfg.polyak = val.get<double>();
      else if (key == "hidden_sizes") cfg.hidden_sizes = val.get<std::vector<int>>();
      else if (key == "activation")
        cfg.activation = nn::activation_from_string(val.get<std::string>());
      else if (key == "buffer_capacity") cfg.buffer_capacity = val.get<std::size_t>();
      else
        throw ArgumentError("config_from_json: unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("config_from_json: bad value: ") + e.what());
  }
}

PreqnConfig config_from_json(const std::string& text) {
  PreqnConfig cfg;
  apply_config_json(cfg, text);
  cfg.validate();
  return cfg;
}

Algo algo_from_string(std::string_view name, bool target_network) {
  if (name == "preqn") {
    if (target_network)
      throw ArgumentError("algo: the preconditioned update does not use a target network");
    return Algo::kPreqn;
  }
  if (name == "baseline") return target_network ? Algo::kBaselineTarget : Algo::kBaseline;
  throw ArgumentError("algo: unknown algorithm '" + std::string(name) +
                      "' (expected preqn or baseline)");
}

std::string_view to_string(Algo algo) {
  switch (algo) {
    case Algo::kPreqn: return "preqn";
    case Algo::kBaseline: return "baseline";
    case Algo::kBaselineTarget: return "baseline+target";
  }
  return "?";
}

ActorCritic make_actor_critic(int obs_dim, int act_dim, const Vector& act_low,
                              const Vector& act_high,
                              const std::vector<int>& hidden_sizes,
                              nn::Activation activation, std::uint64_t seed) {
  if (obs_dim <= 0 || act_dim <= 0)
    throw ShapeError("make_actor_critic: dimensions must be positive");
  if (act_low.size() != act_dim || act_high.size() != act_dim)
    throw ShapeError("make_actor_critic: bounds do not match action dimension");
  std::vector<int> q_sizes;
  q_sizes.push_back(obs_dim + act_dim);
  q_sizes.insert(q_sizes.end(), hidden_sizes.begin(), hidden_sizes.end());
  q_sizes.push_back(1);
  std::vector<int> mu_sizes;
  mu_sizes.push_back(obs_dim);
  mu_sizes.insert(mu_sizes.end(), hidden_sizes.begin(), hidden_sizes.end());
  mu_sizes.push_back(act_dim);
  ActorCritic ac;
  ac.q_net = nn::mlp_init(q_sizes, activation, derive_seed(seed, 1));
  ac.mu_net = nn::mlp_init(mu_sizes, activation, derive_seed(seed, 2));
  ac.act_low = act_low;
  ac.act_high = act_high;
  return ac;
}

Vector policy_action(const ActorCritic& ac, const Vector& obs) {
  return squash(nn::forward(ac.mu_net, obs), ac.act_low, ac.act_high);
}

double q_value(const ActorCritic& ac, const Vector& obs, const Vector& act) {
  return nn::forward_scalar(ac.q_net, critic_input(obs, act));
}

Vector q_values_on_batch(const ActorCritic& ac, const std::vector<rl::Transition>& batch) {
  check_batch(batch, "q_values_on_batch");
  Vector q(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    q[static_cast<Eigen::Index>(i)] = q_value(ac, batch[i].s, batch[i].a);
  return q;
}

Vector compute_td_errors(const ActorCritic& ac, const std::vector<rl::Transition>& batch,
                         double gamma) {
  check_batch(batch, "compute_td_errors");
  Vector delta(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& t = batch[i];
    const Vector a_next = policy_action(ac, t.s_next);
    const double boot = q_value(ac, t.s_next, a_next);
    delta[static_cast<Eigen::Index>(i)] =
        t.r + gamma * (1.0 - t.done) * boot - q_value(ac, t.s, t.a);
  }
  return delta;
}

namespace {

struct CriticStep {
  Vector delta;     // TD errors at the current parameters
  Vector q_before;  // Q on the batch at the current parameters
  Vector direction; // Phi z in parameter space
  Vector predicted; // K z, the first-order Q change per unit critic_lr
};

CriticStep solve_critic_step(const ActorCritic& ac,
                             const std::vector<rl::Transition>& batch,
                             double pinv_rel_tol, double gamma) {
  CriticStep st;
  st.delta = compute_td_errors(ac, batch, gamma);
  if (!all_finite(st.delta)) throw UpdateAbortError("non-finite TD errors");
  st.q_before = q_values_on_batch(ac, batch);
  const nn::GradBatch grads = nn::grad_per_sample(ac.q_net, critic_inputs(batch));
  if (!all_finite(grads.phi)) throw UpdateAbortError("non-finite critic gradients");
  const ntk::NtkMatrix kernel = ntk::build_ntk(grads);
  const Vector z = linalg::lstsq_psd(kernel.k, st.delta, pinv_rel_tol);
  st.direction = grads.phi * z;
  st.predicted = kernel.k * z;
  return st;
}

}  // namespace

UpdateResult preqn_update(const ActorCritic& ac, const std::vector<rl::Transition>& batch,
                          const PreqnConfig& cfg) {
  check_batch(batch, "preqn_update");
  const CriticStep st = solve_critic_step(ac, batch, cfg.pinv_rel_tol, cfg.gamma);

  UpdateResult out;
  out.diag.td_mean_abs = mean_abs(st.delta);
  out.diag.q_batch_mean = st.q_before.mean();

  nn::Mlp accepted_q = ac.q_net;
  double scale = 1.0;
  for (int attempt = 0; attempt <= cfg.linesearch_max_backtracks; ++attempt) {
    nn::Mlp candidate = nn::apply_param_step(ac.q_net, st.direction, scale * cfg.critic_lr);
    ActorCritic cand_ac{candidate, ac.mu_net, ac.act_low, ac.act_high};
    const Vector q_after = q_values_on_batch(cand_ac, batch);
    if (all_finite(q_after)) {
      const Vector realized = q_after - st.q_before;
      const double align = linalg::cosine(realized, st.delta);
      if (align >= cfg.eta) {
        out.diag.accepted = true;
        out.diag.alignment_cos = align;
        out.diag.leading_order_residual =
            (realized - scale * cfg.critic_lr * st.predicted).norm();
        accepted_q = std::move(candidate);
        break;
      }
    }
    ++out.diag.backtracks;
    scale *= cfg.linesearch_decay;
  }
  if (!out.diag.accepted) {
    // Skipped: critic stays put, so the realized change is zero.
    out.diag.alignment_cos = linalg::cosine(Vector::Zero(st.delta.size()), st.delta);
    out.diag.leading_order_residual = 0.0;
  }

  out.ac = ac;
  out.ac.q_net = std::move(accepted_q);
  out.ac.mu_net.params = actor_ascent_params(out.ac, batch, cfg.actor_lr);
  return out;
}

Vector preqn_raw_step_params(const ActorCritic& ac,
                             const std::vector<rl::Transition>& batch, double alpha,
                             double gamma, double pinv_rel_tol) {
  check_batch(batch, "preqn_raw_step_params");
  const CriticStep st = solve_critic_step(ac, batch, pinv_rel_tol, gamma);
  return ac.q_net.params + alpha * st.direction;
}

Vector natural_gradient_reference_step(const ActorCritic& ac,
                                       const std::vector<rl::Transition>& batch,
                                       double alpha, double gamma,
                                       double pinv_rel_tol) {
  check_batch(batch, "natural_gradient_reference_step");
  const Vector delta = compute_td_errors(ac, batch, gamma);
  const nn::GradBatch grads = nn::grad_per_sample(ac.q_net, critic_inputs(batch));
  const Matrix outer = grads.phi * grads.phi.transpose();
  const Vector step = linalg::sym_pinv(outer, pinv_rel_tol) * (grads.phi * delta);
  return ac.q_net.params + alpha * step;
}

UpdateResult baseline_dql_update(const ActorCritic& ac,
                                 std::optional<Vector>& target_q_params,
                                 const std::vector<rl::Transition>& batch, double lr,
                                 const PreqnConfig& cfg) {
  check_batch(batch, "baseline_dql_update");
  if (!(lr >= 0.0) || !std::isfinite(lr))
    throw ArgumentError("baseline_dql_update: lr must be finite and nonnegative");

  Vector delta;
  if (target_q_params.has_value()) {
    if (target_q_params->size() != ac.q_net.params.size())
      throw ShapeError("baseline_dql_update: target parameter size mismatch");
    ActorCritic frozen = ac;
    frozen.q_net.params = *target_q_params;
    delta = Vector(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& t = batch[i];
      const Vector a_next = policy_action(ac, t.s_next);
      const double boot = q_value(frozen, t.s_next, a_next);
      delta[static_cast<Eigen::Index>(i)] =
          t.r + cfg.gamma * (1.0 - t.done) * boot - q_value(ac, t.s, t.a);
    }
  } else {
    delta = compute_td_errors(ac, batch, cfg.gamma);
  }
  if (!all_finite(delta)) throw UpdateAbortError("non-finite TD errors");

  const Vector q_before = q_values_on_batch(ac, batch);
  const nn::GradBatch grads = nn::grad_per_sample(ac.q_net, critic_inputs(batch));
  if (!all_finite(grads.phi)) throw UpdateAbortError("non-finite critic gradients");

  UpdateResult out;
  out.diag.td_mean_abs = mean_abs(delta);
  out.diag.q_batch_mean = q_before.mean();
  out.diag.accepted = true;

  out.ac = ac;
  out.ac.q_net.params =
      ac.q_net.params + (lr / static_cast<double>(batch.size())) * (grads.phi * delta);
  const Vector q_after = q_values_on_batch(out.ac, batch);
  out.diag.alignment_cos = linalg::cosine(q_after - q_before, delta);

  if (target_q_params.has_value())
    *target_q_params = cfg.polyak * (*target_q_params) +
                       (1.0 - cfg.polyak) * out.ac.q_net.params;

  out.ac.mu_net.params = actor_ascent_params(out.ac, batch, cfg.actor_lr);
  return out;
}

namespace {

double eval_return(rl::ContinuousEnv& env, const ActorCritic& ac) {
  Vector obs = env.reset();
  double total = 0.0;
  while (true) {
    const rl::StepResult res = env.step(policy_action(ac, obs));
    total += res.reward;
    if (res.time_limit || res.terminal) return total;
    obs = res.obs;
  }
}

}  // namespace

TrainResult train(rl::ContinuousEnv& env, Algo algo, const PreqnConfig& cfg,
                  std::int64_t total_steps, std::uint64_t seed,
                  const TrainHooks& hooks) {
  cfg.validate();
  if (total_steps < 0) throw ArgumentError("train: total_steps must be nonnegative");

  Rng noise_rng(derive_seed(seed, 3));
  Rng buffer_rng(derive_seed(seed, 4));
  Rng warmup_rng(derive_seed(seed, 5));
  const std::uint64_t eval_seed = derive_seed(seed, 6);

  TrainResult result;
  ActorCritic ac = make_actor_critic(env.obs_dim(), env.act_dim(), env.act_low(),
                                     env.act_high(), cfg.hidden_sizes, cfg.activation,
                                     derive_seed(seed, 1));
  std::optional<Vector> target_q;
  if (algo == Algo::kBaselineTarget) target_q = ac.q_net.params;

  rl::ReplayBuffer buffer(cfg.buffer_capacity);
  std::vector<std::pair<Vector, Vector>> probes;  // fixed (s, a) watchdog set

  // Diagnostics accumulated between metric rows.
  double win_q = 0.0, win_td = 0.0, win_align = 0.0, win_back = 0.0, win_acc = 0.0;
  std::int64_t win_n = 0;

  Vector obs = env.reset();
  for (std::int64_t t = 0; t < total_steps; ++t) {
    Vector action;
    if (t < cfg.start_steps) {
      action = Vector(env.act_dim());
      for (int i = 0; i < env.act_dim(); ++i)
        action[i] = warmup_rng.uniform(env.act_low()[i], env.act_high()[i]);
    } else {
      action = policy_action(ac, obs);
      for (int i = 0; i < env.act_dim(); ++i) {
        action[i] += noise_rng.normal(0.0, cfg.action_noise_std);
        action[i] = std::clamp(action[i], env.act_low()[i], env.act_high()[i]);
      }
    }
    const rl::StepResult res = env.step(action);
    rl::Transition tr;
    tr.s = obs;
    tr.a = action;
    tr.r = res.reward;
    tr.s_next = res.obs;
    tr.done = res.terminal ? 1.0 : 0.0;
    buffer.push(std::move(tr));
    obs = res.time_limit ? env.reset() : res.obs;

    const std::int64_t step = t + 1;
    if (step >= cfg.update_after && step % cfg.update_every == 0) {
      if (probes.empty()) {
        const std::size_t n = std::min<std::size_t>(kProbeSize, buffer.size());
        for (std::size_t i = 0; i < n; ++i)
          probes.emplace_back(buffer.at_age(i).s, buffer.at_age(i).a);
      }
      for (int k = 0; k < cfg.update_every; ++k) {
        const auto batch = buffer.sample(cfg.batch_size, buffer_rng);
        try {
          UpdateResult up;
          switch (algo) {
            case Algo::kPreqn: up = preqn_update(ac, batch, cfg); break;
            case Algo::kBaseline:
            case Algo::kBaselineTarget:
              up = baseline_dql_update(ac, target_q, batch, cfg.critic_lr, cfg);
              break;
          }
          if (hooks.on_update) {
            UpdateRecord rec{step, result.updates_total, ac, up.ac, batch, up.diag};
            hooks.on_update(rec);
          }
          ++result.updates_total;
          if (up.diag.accepted) ++result.updates_accepted;
          win_q += up.diag.q_batch_mean;
          win_td += up.diag.td_mean_abs;
          win_align += up.diag.alignment_cos;
          win_back += up.diag.backtracks;
          win_acc += up.diag.accepted ? 1.0 : 0.0;
          ++win_n;
          ac = std::move(up.ac);
        } catch (const UpdateAbortError&) {
          ++result.updates_aborted;
        }
      }
      for (const auto& [ps, pa] : probes) {
        const double q = q_value(ac, ps, pa);
        if (!std::isfinite(q) || std::abs(q) > kWatchdogLimit) {
          result.watchdog_tripped = true;
          result.watchdog_step = step;
          break;
        }
      }
    }

    if (step % kEvalEvery == 0) {
      auto eval_env = env.fresh(eval_seed);  // same starting states every round
      Vector returns(kEvalEpisodes);
      for (int e = 0; e < kEvalEpisodes; ++e) returns[e] = eval_return(*eval_env, ac);
      EvalPoint pt;
      pt.step = step;
      pt.eval_return_mean = returns.mean();
      pt.eval_return_std =
          std::sqrt((returns.array() - returns.mean()).square().mean());
      if (win_n > 0) {
        const double n = static_cast<double>(win_n);
        pt.q_mean = win_q / n;
        pt.td_mean_abs = win_td / n;
        pt.alignment_cos = win_align / n;
        pt.backtracks = win_back / n;
        pt.accepted = win_acc / n;
      }
      result.metrics.push_back(pt);
      win_q = win_td = win_align = win_back = win_acc = 0.0;
      win_n = 0;
    }

    if (hooks.checkpoint_every > 0 && hooks.on_checkpoint &&
        step % hooks.checkpoint_every == 0)
      hooks.on_checkpoint(step, ac);

    if (result.watchdog_tripped) break;
  }

  result.final_ac = std::move(ac);
  return result;
}

void write_metrics_csv(const std::vector<EvalPoint>& points, std::ostream& out) {
  out << "step,eval_return_mean,eval_return_std,q_mean,td_mean_abs,alignment_cos,"
         "backtracks,accepted\n";
  for (const auto& p : points) {
    out << p.step << ',' << format_double(p.eval_return_mean) << ','
        << format_double(p.eval_return_std) << ',' << format_double(p.q_mean) << ','
        << format_double(p.td_mean_abs) << ',' << format_double(p.alignment_cos) << ','
        << format_double(p.backtracks) << ',' << format_double(p.accepted) << '\n';
  }
}

}  // namespace preqn::trainer
