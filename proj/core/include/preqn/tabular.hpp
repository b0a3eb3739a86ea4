#pragma once

#include "preqn/common.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace preqn::tabular {

/// Finite MDP with dense transition and reward tensors, both laid out
/// [state][action][next_state] in row-major order.
struct FiniteMdp {
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.99;
  std::vector<double> transition;  // P(s' | s, a)
  std::vector<double> reward;      // R(s, a, s')

  int n_pairs() const { return n_states * n_actions; }
  double p(int s, int a, int s2) const {
    return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }
  double r(int s, int a, int s2) const {
    return reward[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }

  /// Throws if shapes are wrong, probabilities are negative, any transition
  /// row fails to sum to 1 within 1e-12, gamma is outside (0, 1), or any
  /// entry is non-finite.
  void validate() const;
};

/// Q-values over state-action pairs, flattened as index = s * n_actions + a.
struct QTable {
  Vector values;
};

/// Probability weights over state-action pairs (same flattening as QTable).
struct Rho {
  Vector probs;
};

/// Symmetric PSD kernel over state-action pairs.
struct KernelSpec {
  Matrix matrix;
};

inline int pair_index(const FiniteMdp& mdp, int s, int a) {
  return s * mdp.n_actions + a;
}

double sup_dist(const QTable& a, const QTable& b);

/// Random dense MDP: each transition row is exp(Unif(0,1)) draws normalized
/// to sum to one, rewards are Unif(0,1). Deterministic per seed.
FiniteMdp make_random_mdp(int n_states, int n_actions, double gamma, std::uint64_t seed);

QTable zero_q(const FiniteMdp& mdp);
QTable random_q(const FiniteMdp& mdp, double lo, double hi, Rng& rng);
Rho uniform_rho(int n_pairs);
/// Normalized exp(Unif(0,1)) weights; strictly positive.
Rho random_rho(int n_pairs, Rng& rng);

/// One-hot encoding of (s, a): concat(onehot(s), onehot(a)), length
/// n_states + n_actions. Used to put neural-network kernels on tabular
/// problems.
Vector one_hot_pair_features(const FiniteMdp& mdp, int s, int a);
std::vector<Vector> all_pair_features(const FiniteMdp& mdp);

/// One application of the optimality backup: (TQ)(s,a) =
/// sum_s' P(s'|s,a) [R(s,a,s') + gamma * max_a' Q(s',a')].
QTable bellman_optimal(const FiniteMdp& mdp, const QTable& q);

/// Greedy action under q at state s; ties break to the lowest action index.
int greedy_action(const FiniteMdp& mdp, const QTable& q, int s);

/// Iterates bellman_optimal from q0 until successive iterates are within tol
/// in sup norm. Throws ConvergenceError carrying the last iterate if
/// max_iters is exhausted.
QTable value_iteration(const FiniteMdp& mdp, const QTable& q0, double tol,
                       std::int64_t max_iters);

using LrSchedule = std::function<double(std::int64_t step)>;

/// Sampled one-step Q-learning under uniform-random exploration: each step
/// draws (s, a) uniformly, draws s' from P(.|s,a), and applies
/// Q(s,a) += lr(k) * (R + gamma * max_a' Q(s',a') - Q(s,a)).
QTable tabular_q_learning(const FiniteMdp& mdp, const QTable& q0,
                          std::int64_t steps, const LrSchedule& lr,
                          std::uint64_t seed);

/// Q + alpha * (TQ - Q). Requires alpha in (0, 1).
QTable damped_bellman_update(const FiniteMdp& mdp, const QTable& q, double alpha);

/// Q + alpha * D_rho * (TQ - Q) with D_rho = diag(rho). Requires
/// alpha in (0, 1 / max(rho)).
QTable weighted_bellman_update(const FiniteMdp& mdp, const QTable& q,
                               const Rho& rho, double alpha);

/// Q + alpha * K * D_rho * (TQ - Q). No step-size restriction; this update
/// can expand, which is the point of studying it.
QTable kernel_bellman_update(const FiniteMdp& mdp, const QTable& q,
                             const Rho& rho, const KernelSpec& kernel,
                             double alpha);

/// Worst-row contraction modulus bound for kernel_bellman_update:
/// max_i [ 1 - (1-gamma) * alpha * K_ii * rho_i
///         + (1+gamma) * alpha * sum_{j != i} |K_ij| * rho_j ].
/// Precondition: alpha * K_ii * rho_i < 1 for every i; otherwise throws
/// OvershootError identifying the first offending row.
double update_modulus_bound(const KernelSpec& kernel, const Rho& rho,
                            double alpha, double gamma);

/// Per-row sufficient conditions for kernel_bellman_update to contract.
struct ContractionReport {
  std::vector<bool> step_size_ok;  // alpha * K_ii * rho_i < 1
  std::vector<bool> diag_dom_ok;   // (1+gamma) sum_{j!=i} |K_ij| rho_j
                                   //   <= (1-gamma) K_ii rho_i
  bool contraction_guaranteed = false;  // all rows pass both checks
};

ContractionReport check_contraction_conditions(const KernelSpec& kernel,
                                               const Rho& rho, double alpha,
                                               double gamma);

/// An update map already bound to its MDP and step parameters.
using QOperator = std::function<QTable(const QTable&)>;

struct SequenceRun {
  std::vector<QTable> iterates;            // q0 first, then one per application
  std::vector<double> dist_to_fixed_point; // sup distance to q_star, same length
  QTable q_star;
};

/// Applies ops cyclically (ops[0], ops[1], ..., ops[0], ...) for iters steps,
/// recording the sup-norm distance to the MDP's optimal Q after each
/// application. q_star is computed internally by value iteration.
SequenceRun operator_sequence_run(const FiniteMdp& mdp, const QTable& q0,
                                  const std::vector<QOperator>& ops,
                                  std::int64_t iters);

/// Monte-Carlo estimate of the operator's Lipschitz modulus in sup norm:
/// draws n_samples pairs of tables with entries Unif(-10, 10) and returns the
/// largest ratio ||U q1 - U q2||_inf / ||q1 - q2||_inf observed. A value
/// above 1 is a certified expansion witness; the maximizing pair is written
/// to *arg_q1 / *arg_q2 when provided.
double empirical_modulus(const FiniteMdp& mdp, const QOperator& op,
                         int n_samples, Rng& rng, QTable* arg_q1 = nullptr,
                         QTable* arg_q2 = nullptr);

std::string mdp_to_json(const FiniteMdp& mdp);
FiniteMdp mdp_from_json(const std::string& text);
void save_mdp(const FiniteMdp& mdp, const std::string& path);
FiniteMdp load_mdp(const std::string& path);

}  // namespace preqn::tabular
