#include "preqn/tabular.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace preqn::tabular {

namespace {

using nlohmann::json;

void check_q(const FiniteMdp& mdp, const QTable& q, const char* who) {
  if (q.values.size() != mdp.n_pairs())
    throw ShapeError(std::string(who) + ": Q table has " +
                     std::to_string(q.values.size()) + " entries, MDP has " +
                     std::to_string(mdp.n_pairs()) + " pairs");
}

void check_rho(const FiniteMdp& mdp, const Rho& rho, const char* who) {
  if (rho.probs.size() != mdp.n_pairs())
    throw ShapeError(std::string(who) + ": rho length does not match pair count");
  if ((rho.probs.array() < 0.0).any())
    throw ArgumentError(std::string(who) + ": rho has negative entries");
}

// max_a' Q(s', a') for each s'.
Vector state_values(const FiniteMdp& mdp, const QTable& q) {
  Vector v(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    double best = q.values[pair_index(mdp, s, 0)];
    for (int a = 1; a < mdp.n_actions; ++a)
      best = std::max(best, q.values[pair_index(mdp, s, a)]);
    v[s] = best;
  }
  return v;
}

Vector bellman_residual(const FiniteMdp& mdp, const QTable& q) {
  QTable tq = bellman_optimal(mdp, q);
  return tq.values - q.values;
}

}  // namespace

void FiniteMdp::validate() const {
  if (n_states <= 0 || n_actions <= 0)
    throw ShapeError("FiniteMdp: state and action counts must be positive");
  const auto expect = static_cast<std::size_t>(n_states) * n_actions * n_states;
  if (transition.size() != expect || reward.size() != expect)
    throw ShapeError("FiniteMdp: tensor sizes do not match n_states/n_actions");
  if (!(gamma > 0.0 && gamma < 1.0))
    throw ArgumentError("FiniteMdp: gamma must lie in (0, 1)");
  for (double x : transition)
    if (!(x >= 0.0) || !std::isfinite(x))
      throw NumericError("FiniteMdp: transition entries must be finite and nonnegative");
  for (double x : reward)
    if (!std::isfinite(x)) throw NumericError("FiniteMdp: rewards must be finite");
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) sum += p(s, a, s2);
      if (std::abs(sum - 1.0) > 1e-12)
        throw NumericError("FiniteMdp: transition row (s=" + std::to_string(s) +
                           ", a=" + std::to_string(a) + ") sums to " +
                           format_double(sum));
    }
}

double sup_dist(const QTable& a, const QTable& b) {
  if (a.values.size() != b.values.size())
    throw ShapeError("sup_dist: tables differ in size");
  return (a.values - b.values).lpNorm<Eigen::Infinity>();
}

FiniteMdp make_random_mdp(int n_states, int n_actions, double gamma,
                          std::uint64_t seed) {
  if (n_states <= 0 || n_actions <= 0)
    throw ArgumentError("make_random_mdp: dimensions must be positive");
  if (!(gamma > 0.0 && gamma < 1.0))
    throw ArgumentError("make_random_mdp: gamma must lie in (0, 1)");
  FiniteMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  const auto sz = static_cast<std::size_t>(n_states) * n_actions * n_states;
  mdp.transition.resize(sz);
  mdp.reward.resize(sz);
  Rng rng(seed);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) {
      const std::size_t base = (static_cast<std::size_t>(s) * n_actions + a) * n_states;
      double sum = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) {
        const double w = std::exp(rng.uniform());
        mdp.transition[base + s2] = w;
        sum += w;
      }
      for (int s2 = 0; s2 < n_states; ++s2) mdp.transition[base + s2] /= sum;
      for (int s2 = 0; s2 < n_states; ++s2) mdp.reward[base + s2] = rng.uniform();
    }
  mdp.validate();
  return mdp;
}

QTable zero_q(const FiniteMdp& mdp) { return {Vector::Zero(mdp.n_pairs())}; }

QTable random_q(const FiniteMdp& mdp, double lo, double hi, Rng& rng) {
  return {rng.uniform_vector(mdp.n_pairs(), lo, hi)};
}

Rho uniform_rho(int n_pairs) {
  if (n_pairs <= 0) throw ArgumentError("uniform_rho: n_pairs must be positive");
  return {Vector::Constant(n_pairs, 1.0 / n_pairs)};
}

Rho random_rho(int n_pairs, Rng& rng) {
  if (n_pairs <= 0) throw ArgumentError("random_rho: n_pairs must be positive");
  Vector w(n_pairs);
  for (int i = 0; i < n_pairs; ++i) w[i] = std::exp(rng.uniform());
  return {w / w.sum()};
}

Vector one_hot_pair_features(const FiniteMdp& mdp, int s, int a) {
  if (s < 0 || s >= mdp.n_states || a < 0 || a >= mdp.n_actions)
    throw ArgumentError("one_hot_pair_features: index out of range");
  Vector x = Vector::Zero(mdp.n_states + mdp.n_actions);
  x[s] = 1.0;
  x[mdp.n_states + a] = 1.0;
  return x;
}

std::vector<Vector> all_pair_features(const FiniteMdp& mdp) {
  std::vector<Vector> xs;
  xs.reserve(mdp.n_pairs());
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      xs.push_back(one_hot_pair_features(mdp, s, a));
  return xs;
}

QTable bellman_optimal(const FiniteMdp& mdp, const QTable& q) {
  check_q(mdp, q, "bellman_optimal");
  const Vector v = state_values(mdp, q);
  QTable out{Vector(mdp.n_pairs())};
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      double acc = 0.0;
      for (int s2 = 0; s2 < mdp.n_states; ++s2)
        acc += mdp.p(s, a, s2) * (mdp.r(s, a, s2) + mdp.gamma * v[s2]);
      out.values[pair_index(mdp, s, a)] = acc;
    }
  return out;
}

int greedy_action(const FiniteMdp& mdp, const QTable& q, int s) {
  check_q(mdp, q, "greedy_action");
  int best = 0;
  for (int a = 1; a < mdp.n_actions; ++a)
    if (q.values[pair_index(mdp, s, a)] > q.values[pair_index(mdp, s, best)])
      best = a;
  return best;
}

QTable value_iteration(const FiniteMdp& mdp, const QTable& q0, double tol,
                       std::int64_t max_iters) {
  check_q(mdp, q0, "value_iteration");
  if (!(tol > 0.0)) throw ArgumentError("value_iteration: tol must be positive");
  QTable q = q0;
  for (std::int64_t k = 0; k < max_iters; ++k) {
    QTable next = bellman_optimal(mdp, q);
    const double step = sup_dist(next, q);
    q = std::move(next);
    if (step <= tol) return q;
  }
  throw ConvergenceError("value_iteration: no convergence to tol " +
                             format_double(tol) + " within " +
                             std::to_string(max_iters) + " iterations",
                         q.values);
}

QTable tabular_q_learning(const FiniteMdp& mdp, const QTable& q0,
                          std::int64_t steps, const LrSchedule& lr,
                          std::uint64_t seed) {
  check_q(mdp, q0, "tabular_q_learning");
  QTable q = q0;
  Rng rng(seed);
  for (std::int64_t k = 0; k < steps; ++k) {
    const int s = static_cast<int>(rng.uniform_int(mdp.n_states));
    const int a = static_cast<int>(rng.uniform_int(mdp.n_actions));
    // Categorical draw over successors by cumulative scan.
    const double u = rng.uniform();
    int s2 = mdp.n_states - 1;
    double cum = 0.0;
    for (int c = 0; c < mdp.n_states; ++c) {
      cum += mdp.p(s, a, c);
      if (u < cum) {
        s2 = c;
        break;
      }
    }
    double best = q.values[pair_index(mdp, s2, 0)];
    for (int a2 = 1; a2 < mdp.n_actions; ++a2)
      best = std::max(best, q.values[pair_index(mdp, s2, a2)]);
    const double target = mdp.r(s, a, s2) + mdp.gamma * best;
    const int i = pair_index(mdp, s, a);
    const double alpha = lr(k);
    if (!(alpha >= 0.0) || !std::isfinite(alpha))
      throw ArgumentError("tabular_q_learning: schedule produced invalid rate at step " +
                          std::to_string(k));
    q.values[i] += alpha * (target - q.values[i]);
  }
  return q;
}

QTable damped_bellman_update(const FiniteMdp& mdp, const QTable& q, double alpha) {
  check_q(mdp, q, "damped_bellman_update");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ArgumentError("damped_bellman_update: alpha must lie in (0, 1)");
  return {q.values + alpha * bellman_residual(mdp, q)};
}

QTable weighted_bellman_update(const FiniteMdp& mdp, const QTable& q,
                               const Rho& rho, double alpha) {
  check_q(mdp, q, "weighted_bellman_update");
  check_rho(mdp, rho, "weighted_bellman_update");
  const double rho_max = rho.probs.maxCoeff();
  if (!(rho_max > 0.0))
    throw ArgumentError("weighted_bellman_update: rho must have positive mass");
  if (!(alpha > 0.0 && alpha < 1.0 / rho_max))
    throw ArgumentError("weighted_bellman_update: alpha must lie in (0, 1/max(rho))");
  return {q.values + alpha * (rho.probs.array() * bellman_residual(mdp, q).array()).matrix()};
}

QTable kernel_bellman_update(const FiniteMdp& mdp, const QTable& q,
                             const Rho& rho, const KernelSpec& kernel,
                             double alpha) {
  check_q(mdp, q, "kernel_bellman_update");
  check_rho(mdp, rho, "kernel_bellman_update");
  if (kernel.matrix.rows() != mdp.n_pairs() || kernel.matrix.cols() != mdp.n_pairs())
    throw ShapeError("kernel_bellman_update: kernel shape does not match pair count");
  if (!(alpha > 0.0))
    throw ArgumentError("kernel_bellman_update: alpha must be positive");
  const Vector weighted = rho.probs.array() * bellman_residual(mdp, q).array();
  return {q.values + alpha * (kernel.matrix * weighted)};
}

double update_modulus_bound(const KernelSpec& kernel, const Rho& rho,
                            double alpha, double gamma) {
  const auto n = kernel.matrix.rows();
  if (kernel.matrix.cols() != n) throw ShapeError("update_modulus_bound: kernel not square");
  if (rho.probs.size() != n)
    throw ShapeError("update_modulus_bound: rho length does not match kernel");
  if (!(alpha > 0.0)) throw ArgumentError("update_modulus_bound: alpha must be positive");
  if (!(gamma > 0.0 && gamma < 1.0))
    throw ArgumentError("update_modulus_bound: gamma must lie in (0, 1)");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double diag_step = alpha * kernel.matrix(i, i) * rho.probs[i];
    if (!(diag_step < 1.0))
      throw OvershootError("update_modulus_bound: alpha * K_ii * rho_i = " +
                               format_double(diag_step) + " >= 1 at row " +
                               std::to_string(i),
                           static_cast<int>(i));
    double off = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) off += std::abs(kernel.matrix(i, j)) * rho.probs[j];
    const double row = 1.0 - (1.0 - gamma) * diag_step + (1.0 + gamma) * alpha * off;
    worst = std::max(worst, row);
  }
  return worst;
}

ContractionReport check_contraction_conditions(const KernelSpec& kernel,
                                               const Rho& rho, double alpha,
                                               double gamma) {
  const auto n = kernel.matrix.rows();
  if (kernel.matrix.cols() != n)
    throw ShapeError("check_contraction_conditions: kernel not square");
  if (rho.probs.size() != n)
    throw ShapeError("check_contraction_conditions: rho length does not match kernel");
  if (!(alpha > 0.0))
    throw ArgumentError("check_contraction_conditions: alpha must be positive");
  if (!(gamma > 0.0 && gamma < 1.0))
    throw ArgumentError("check_contraction_conditions: gamma must lie in (0, 1)");
  ContractionReport rep;
  rep.step_size_ok.resize(n);
  rep.diag_dom_ok.resize(n);
  rep.contraction_guaranteed = true;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double diag = kernel.matrix(i, i) * rho.probs[i];
    double off = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) off += std::abs(kernel.matrix(i, j)) * rho.probs[j];
    rep.step_size_ok[i] = alpha * diag < 1.0;
    rep.diag_dom_ok[i] = (1.0 + gamma) * off <= (1.0 - gamma) * diag;
    if (!rep.step_size_ok[i] || !rep.diag_dom_ok[i]) rep.contraction_guaranteed = false;
  }
  return rep;
}

SequenceRun operator_sequence_run(const FiniteMdp& mdp, const QTable& q0,
                                  const std::vector<QOperator>& ops,
                                  std::int64_t iters) {
  check_q(mdp, q0, "operator_sequence_run");
  if (ops.empty()) throw ArgumentError("operator_sequence_run: empty operator list");
  SequenceRun run;
  run.q_star = value_iteration(mdp, zero_q(mdp), 1e-13, 1'000'000);
  run.iterates.reserve(iters + 1);
  run.dist_to_fixed_point.reserve(iters + 1);
  run.iterates.push_back(q0);
  run.dist_to_fixed_point.push_back(sup_dist(q0, run.q_star));
  QTable q = q0;
  for (std::int64_t k = 0; k < iters; ++k) {
    q = ops[static_cast<std::size_t>(k % static_cast<std::int64_t>(ops.size()))](q);
    run.iterates.push_back(q);
    run.dist_to_fixed_point.push_back(sup_dist(q, run.q_star));
  }
  return run;
}

double empirical_modulus(const FiniteMdp& mdp, const QOperator& op,
                         int n_samples, Rng& rng, QTable* arg_q1,
                         QTable* arg_q2) {
  if (n_samples <= 0) throw ArgumentError("empirical_modulus: n_samples must be positive");
  double worst = 0.0;
  for (int k = 0; k < n_samples; ++k) {
    QTable q1 = random_q(mdp, -10.0, 10.0, rng);
    QTable q2 = random_q(mdp, -10.0, 10.0, rng);
    const double denom = sup_dist(q1, q2);
    if (denom < 1e-9) continue;  // vanishing gap, ratio uninformative
    const double ratio = sup_dist(op(q1), op(q2)) / denom;
    if (ratio > worst) {
      worst = ratio;
      if (arg_q1) *arg_q1 = q1;
      if (arg_q2) *arg_q2 = q2;
    }
  }
  return worst;
}

std::string mdp_to_json(const FiniteMdp& mdp) {
  mdp.validate();
  json j;
  j["n_states"] = mdp.n_states;
  j["n_actions"] = mdp.n_actions;
  j["gamma"] = mdp.gamma;
  auto tensor = [&](const std::vector<double>& t) {
    json out = json::array();
    for (int s = 0; s < mdp.n_states; ++s) {
      json row_s = json::array();
      for (int a = 0; a < mdp.n_actions; ++a) {
        json row_a = json::array();
        const std::size_t base =
            (static_cast<std::size_t>(s) * mdp.n_actions + a) * mdp.n_states;
        for (int s2 = 0; s2 < mdp.n_states; ++s2) row_a.push_back(t[base + s2]);
        row_s.push_back(std::move(row_a));
      }
      out.push_back(std::move(row_s));
    }
    return out;
  };
  j["transition"] = tensor(mdp.transition);
  j["reward"] = tensor(mdp.reward);
  return j.dump(2);
}

FiniteMdp mdp_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ArgumentError(std::string("mdp_from_json: invalid JSON: ") + e.what());
  }
  FiniteMdp mdp;
  try {
    mdp.n_states = j.at("n_states").get<int>();
    mdp.n_actions = j.at("n_actions").get<int>();
    mdp.gamma = j.at("gamma").get<double>();
    const auto read_tensor = [&](const json& t, std::vector<double>& out) {
      out.assign(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions * mdp.n_states,
                 0.0);
      for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
          for (int s2 = 0; s2 < mdp.n_states; ++s2)
            out[(static_cast<std::size_t>(s) * mdp.n_actions + a) * mdp.n_states + s2] =
                t.at(s).at(a).at(s2).get<double>();
    };
    read_tensor(j.at("transition"), mdp.transition);
    read_tensor(j.at("reward"), mdp.reward);
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("mdp_from_json: bad schema: ") + e.what());
  }
  mdp.validate();
  return mdp;
}

void save_mdp(const FiniteMdp& mdp, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw StateError("save_mdp: cannot open " + path);
  f << mdp_to_json(mdp) << '\n';
}

FiniteMdp load_mdp(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw StateError("load_mdp: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return mdp_from_json(ss.str());
}

}  // namespace preqn::tabular
