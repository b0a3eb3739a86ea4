#pragma once

#include "preqn/common.hpp"
#include "preqn/nn.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace preqn::ntk {

/// Gram matrix of per-sample parameter gradients: K = phi^T phi, symmetrized
/// by averaging with its transpose. Entry (i, j) measures how much a step
/// along sample j's gradient moves the output at sample i.
struct NtkMatrix {
  Matrix k;
};

NtkMatrix build_ntk(const nn::GradBatch& grads);

/// Mean absolute off-diagonal weight of each row relative to its diagonal:
/// ratio_i = (1/N) * sum_{j != i} |K_ij| / K_ii. Large values mean updates
/// generalize (or interfere) across samples. Throws DegenerateDiagonalError
/// if any K_ii <= 1e-14.
Vector row_ratio(const NtkMatrix& ntk);

struct NtkStats {
  double diag_mean = 0.0;
  double diag_min = 0.0;
  double diag_max = 0.0;
  double row_ratio_mean = 0.0;
};

NtkStats compute_stats(const NtkMatrix& ntk);

/// One (env, width, depth, activation, trial) cell of a sweep.
struct SweepCell {
  std::string env;
  int width = 0;
  int depth = 0;
  nn::Activation activation = nn::Activation::kTanh;
  int trial = 0;
  std::uint64_t net_seed = 0;
  NtkStats stats;
};

/// Evaluates freshly initialized networks on a fixed dataset across the grid
/// of widths x depths x activations, `trials` independent initializations
/// each. `depth` counts hidden layers; every hidden layer has width `width`.
/// Inputs are the dataset rows; outputs are scalar. Deterministic per seed.
std::vector<SweepCell> ntk_sweep(const std::string& env_name,
                                 const std::vector<Vector>& dataset,
                                 const std::vector<int>& widths,
                                 const std::vector<int>& depths,
                                 const std::vector<nn::Activation>& activations,
                                 int trials, std::uint64_t seed);

/// CSV schema: env,width,depth,activation,trial,diag_mean,diag_min,diag_max,
/// row_ratio_mean.
void write_sweep_csv(const std::vector<SweepCell>& cells, std::ostream& out);

}  // namespace preqn::ntk
