#pragma once

#include "preqn/common.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace preqn::nn {

enum class Activation { kTanh, kRelu, kSin };

Activation activation_from_string(std::string_view name);
std::string_view to_string(Activation act);

/// Fully-connected network with the same activation after every hidden layer
/// and a linear output layer. Parameters live in one flat vector: for each
/// affine layer, the weight matrix in row-major order, then the bias vector.
struct Mlp {
  std::vector<int> layer_sizes;  // input, hidden..., output widths
  Activation activation = Activation::kTanh;
  Vector params;

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  int n_affine_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }

  std::int64_t param_count() const;
  std::int64_t weight_offset(int layer) const;
  std::int64_t bias_offset(int layer) const;
};

/// Per-sample parameter gradients of a scalar-output network, one column per
/// sample: phi is (param_count x batch).
struct GradBatch {
  Matrix phi;
};

/// Weights drawn Unif(-1/sqrt(fan_in), +1/sqrt(fan_in)) in storage order,
/// biases zero. Deterministic per seed.
Mlp mlp_init(const std::vector<int>& layer_sizes, Activation act, std::uint64_t seed);

Vector forward(const Mlp& net, const Vector& x);
/// forward() for a scalar-output network; throws ContractError otherwise.
double forward_scalar(const Mlp& net, const Vector& x);

/// Parameter gradient of the scalar output at each sample, computed by
/// reverse accumulation one sample at a time. ReLU uses subgradient 0 at 0.
GradBatch grad_per_sample(const Mlp& net, const std::vector<Vector>& xs);

/// Gradient of cotangent . f(x) with respect to the parameters (vector-output
/// networks allowed).
Vector param_grad_vjp(const Mlp& net, const Vector& x, const Vector& cotangent);

/// Gradient of the scalar output with respect to the input.
Vector input_gradient(const Mlp& net, const Vector& x);

/// Returns a copy of the network with params + scale * direction.
Mlp apply_param_step(const Mlp& net, const Vector& direction, double scale);

/// Checkpoint format: {"layer_sizes": [...], "activation": "...",
/// "params": [...]}. Round-trips parameters exactly.
std::string mlp_to_json(const Mlp& net);
Mlp mlp_from_json(const std::string& text);
void save_mlp(const Mlp& net, const std::string& path);
Mlp load_mlp(const std::string& path);

}  // namespace preqn::nn
