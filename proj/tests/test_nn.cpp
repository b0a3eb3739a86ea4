#include "preqn/nn.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

using namespace preqn::nn;
using preqn::Rng;
using preqn::Vector;

namespace {

double act_eval(Activation a, double z) {
  switch (a) {
    case Activation::kTanh: return std::tanh(z);
    case Activation::kRelu: return z > 0.0 ? z : 0.0;
    case Activation::kSin: return std::sin(z);
  }
  return 0.0;
}

// Independent straight-line forward pass reading weights through the offset
// accessors, nothing shared with the library implementation.
Vector reference_forward(const Mlp& net, const Vector& x) {
  Vector h = x;
  for (int l = 0; l < net.n_affine_layers(); ++l) {
    const int rows = net.layer_sizes[l + 1];
    const int cols = net.layer_sizes[l];
    Vector z(rows);
    for (int i = 0; i < rows; ++i) {
      double acc = net.params[net.bias_offset(l) + i];
      for (int j = 0; j < cols; ++j)
        acc += net.params[net.weight_offset(l) + static_cast<std::int64_t>(i) * cols + j] * h[j];
      z[i] = acc;
    }
    if (l + 1 < net.n_affine_layers())
      for (int i = 0; i < rows; ++i) z[i] = act_eval(net.activation, z[i]);
    h = z;
  }
  return h;
}

double fd_directional(const Mlp& net, const Vector& x, const Vector& dir, double h) {
  const double up = forward_scalar(apply_param_step(net, dir, h), x);
  const double down = forward_scalar(apply_param_step(net, dir, -h), x);
  return (up - down) / (2.0 * h);
}

}  // namespace

TEST_CASE("parameter layout counts and offsets") {
  const Mlp net = mlp_init({3, 64, 64, 1}, Activation::kTanh, 0);
  CHECK(net.param_count() == 4481);  // 3*64+64 + 64*64+64 + 64*1+1
  CHECK(net.params.size() == 4481);
  CHECK(net.input_dim() == 3);
  CHECK(net.output_dim() == 1);
  CHECK(net.n_affine_layers() == 3);
  CHECK(net.weight_offset(0) == 0);
  CHECK(net.bias_offset(0) == 192);
  CHECK(net.weight_offset(1) == 256);
  CHECK(net.bias_offset(1) == 256 + 4096);
  CHECK(net.weight_offset(2) == 256 + 4160);
  CHECK(net.bias_offset(2) == 4481 - 1);
}

TEST_CASE("initialization is deterministic, bounded, and zero-biased") {
  const Mlp a = mlp_init({4, 32, 1}, Activation::kRelu, 9);
  const Mlp b = mlp_init({4, 32, 1}, Activation::kRelu, 9);
  const Mlp c = mlp_init({4, 32, 1}, Activation::kRelu, 10);
  CHECK((a.params - b.params).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((a.params - c.params).lpNorm<Eigen::Infinity>() > 0.0);

  // Layer 0 weights bounded by 1/sqrt(4), layer 1 by 1/sqrt(32), biases zero.
  for (std::int64_t i = 0; i < 128; ++i) CHECK(std::abs(a.params[i]) <= 0.5);
  for (std::int64_t i = 0; i < 32; ++i) CHECK(a.params[a.bias_offset(0) + i] == 0.0);
  for (std::int64_t i = 0; i < 32; ++i)
    CHECK(std::abs(a.params[a.weight_offset(1) + i]) <= 1.0 / std::sqrt(32.0));
  CHECK(a.params[a.bias_offset(1)] == 0.0);

  // Crude law check: a few hundred Unif draws should straddle zero.
  double mean = 0.0;
  for (std::int64_t i = 0; i < 128; ++i) mean += a.params[i];
  CHECK(std::abs(mean / 128.0) < 0.15);
}

TEST_CASE("initialization rejects degenerate shapes") {
  CHECK_THROWS_AS(mlp_init({5}, Activation::kTanh, 0), preqn::ShapeError);
  CHECK_THROWS_AS(mlp_init({3, 0, 1}, Activation::kTanh, 0), preqn::ShapeError);
  CHECK_THROWS_AS(mlp_init({}, Activation::kTanh, 0), preqn::ShapeError);
}

TEST_CASE("forward pass matches the reference interpreter") {
  Rng rng(11);
  for (Activation act : {Activation::kTanh, Activation::kRelu, Activation::kSin}) {
    for (const std::vector<int>& sizes :
         {std::vector<int>{3, 1}, {3, 5, 1}, {2, 7, 4, 1}, {4, 6, 6, 3}}) {
      const Mlp net = mlp_init(sizes, act, 12);
      for (int t = 0; t < 5; ++t) {
        const Vector x = rng.uniform_vector(sizes.front(), -2.0, 2.0);
        const Vector got = forward(net, x);
        const Vector want = reference_forward(net, x);
        REQUIRE(got.size() == sizes.back());
        CHECK((got - want).lpNorm<Eigen::Infinity>() < 1e-13);
      }
    }
  }
}

TEST_CASE("a single affine layer computes Wx + b exactly") {
  Mlp net = mlp_init({2, 1}, Activation::kTanh, 0);
  net.params << 3.0, -2.0, 0.5;  // W = [3, -2], b = 0.5
  Vector x(2);
  x << 1.0, 4.0;
  CHECK(forward_scalar(net, x) == 3.0 - 8.0 + 0.5);
}

TEST_CASE("hand-computed two-layer tanh forward") {
  // 1-2-1 net with simple weights; check against explicit arithmetic.
  Mlp net = mlp_init({1, 2, 1}, Activation::kTanh, 0);
  net.params << 1.0, -1.0,        // layer 0 weights (2x1)
      0.5, -0.5,                  // layer 0 biases
      2.0, 3.0,                   // layer 1 weights (1x2)
      0.25;                       // layer 1 bias
  Vector x(1);
  x << 0.7;
  const double h0 = std::tanh(1.0 * 0.7 + 0.5);
  const double h1 = std::tanh(-1.0 * 0.7 - 0.5);
  CHECK(forward_scalar(net, x) ==
        doctest::Approx(2.0 * h0 + 3.0 * h1 + 0.25).epsilon(1e-15));
}

TEST_CASE("forward_scalar insists on scalar outputs") {
  const Mlp net = mlp_init({3, 4, 2}, Activation::kTanh, 0);
  CHECK_THROWS_AS(forward_scalar(net, Vector::Zero(3)), preqn::ContractError);
}

TEST_CASE("forward rejects mis-sized inputs") {
  const Mlp net = mlp_init({3, 4, 1}, Activation::kTanh, 0);
  CHECK_THROWS_AS(forward(net, Vector::Zero(2)), preqn::ShapeError);
}

TEST_CASE("per-sample gradients agree with central differences") {
  Rng rng(13);
  for (Activation act : {Activation::kTanh, Activation::kRelu, Activation::kSin}) {
    for (const std::vector<int>& sizes :
         {std::vector<int>{2, 1}, {3, 8, 1}, {3, 6, 6, 1}, {2, 4, 4, 4, 1}}) {
      const Mlp net = mlp_init(sizes, act, 14);
      std::vector<Vector> xs;
      for (int t = 0; t < 3; ++t) xs.push_back(rng.uniform_vector(sizes.front(), -1.5, 1.5));
      const GradBatch g = grad_per_sample(net, xs);
      REQUIRE(g.phi.rows() == net.param_count());
      REQUIRE(g.phi.cols() == 3);
      for (int col = 0; col < 3; ++col) {
        // Probe along a handful of random directions rather than every
        // coordinate; that keeps the finite-difference cost tiny.
        for (int probe = 0; probe < 6; ++probe) {
          Vector dir = rng.uniform_vector(net.param_count(), -1.0, 1.0);
          dir /= dir.norm();
          const double analytic = g.phi.col(col).dot(dir);
          const double numeric = fd_directional(net, xs[col], dir, 1e-5);
          const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
          CAPTURE(static_cast<int>(act));
          CHECK(std::abs(analytic - numeric) / scale < 1e-4);
        }
      }
    }
  }
}

TEST_CASE("gradient of a single affine layer is the input with a trailing one") {
  Mlp net = mlp_init({3, 1}, Activation::kTanh, 0);
  Rng rng(15);
  const Vector x = rng.uniform_vector(3, -2.0, 2.0);
  const GradBatch g = grad_per_sample(net, {x});
  Vector want(4);
  want << x[0], x[1], x[2], 1.0;
  CHECK((g.phi.col(0) - want).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("an all-zero relu network has a gradient only at the output bias") {
  Mlp net = mlp_init({2, 4, 1}, Activation::kRelu, 0);
  net.params.setZero();
  Vector x(2);
  x << 1.0, -1.0;
  const GradBatch g = grad_per_sample(net, {x});
  // Pre-activations are all zero and the subgradient at zero is zero, so
  // every path through the hidden layer is dead; only the final bias moves
  // the output.
  Vector want = Vector::Zero(net.param_count());
  want[net.param_count() - 1] = 1.0;
  CHECK((g.phi.col(0) - want).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("per-sample gradients validate their inputs") {
  const Mlp scalar_net = mlp_init({2, 3, 1}, Activation::kTanh, 0);
  CHECK_THROWS_AS(grad_per_sample(scalar_net, {}), preqn::ArgumentError);
  const Mlp vec_net = mlp_init({2, 3, 2}, Activation::kTanh, 0);
  CHECK_THROWS_AS(grad_per_sample(vec_net, {Vector::Zero(2)}), preqn::ContractError);
}

TEST_CASE("vjp on a scalar network with unit cotangent equals the plain gradient") {
  const Mlp net = mlp_init({3, 5, 1}, Activation::kSin, 16);
  Rng rng(17);
  const Vector x = rng.uniform_vector(3, -2.0, 2.0);
  Vector one(1);
  one << 1.0;
  const Vector vjp = param_grad_vjp(net, x, one);
  const GradBatch g = grad_per_sample(net, {x});
  CHECK((vjp - g.phi.col(0)).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("vjp on a vector network matches summed finite differences") {
  const Mlp net = mlp_init({2, 5, 3}, Activation::kTanh, 18);
  Rng rng(19);
  const Vector x = rng.uniform_vector(2, -1.0, 1.0);
  const Vector c = rng.uniform_vector(3, -1.0, 1.0);
  const Vector vjp = param_grad_vjp(net, x, c);
  REQUIRE(vjp.size() == net.param_count());
  for (int probe = 0; probe < 8; ++probe) {
    Vector dir = rng.uniform_vector(net.param_count(), -1.0, 1.0);
    dir /= dir.norm();
    const double h = 1e-5;
    const double up = c.dot(forward(apply_param_step(net, dir, h), x));
    const double down = c.dot(forward(apply_param_step(net, dir, -h), x));
    const double numeric = (up - down) / (2.0 * h);
    CHECK(std::abs(vjp.dot(dir) - numeric) < 1e-6);
  }
}

TEST_CASE("input gradient agrees with finite differences in x") {
  for (Activation act : {Activation::kTanh, Activation::kSin}) {
    const Mlp net = mlp_init({3, 6, 6, 1}, act, 20);
    Rng rng(21);
    const Vector x = rng.uniform_vector(3, -1.0, 1.0);
    const Vector g = input_gradient(net, x);
    REQUIRE(g.size() == 3);
    for (int i = 0; i < 3; ++i) {
      Vector xp = x, xm = x;
      xp[i] += 1e-6;
      xm[i] -= 1e-6;
      const double numeric = (forward_scalar(net, xp) - forward_scalar(net, xm)) / 2e-6;
      CHECK(g[i] == doctest::Approx(numeric).epsilon(1e-4));
    }
  }
}

TEST_CASE("parameter steps compose and invert to tight tolerance") {
  const Mlp net = mlp_init({3, 8, 1}, Activation::kTanh, 22);
  Rng rng(23);
  const Vector dir = rng.uniform_vector(net.param_count(), -1.0, 1.0);
  const Mlp stepped = apply_param_step(net, dir, 0.3);
  CHECK((stepped.params - (net.params + 0.3 * dir)).lpNorm<Eigen::Infinity>() == 0.0);
  const Mlp back = apply_param_step(stepped, dir, -0.3);
  CHECK((back.params - net.params).lpNorm<Eigen::Infinity>() < 1e-15);
  CHECK_THROWS_AS(apply_param_step(net, Vector::Zero(3), 1.0), preqn::ShapeError);
}

TEST_CASE("outputs vary continuously in the parameters") {
  const Mlp net = mlp_init({2, 16, 1}, Activation::kTanh, 24);
  Rng rng(25);
  const Vector x = rng.uniform_vector(2, -1.0, 1.0);
  const double base = forward_scalar(net, x);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    Vector dir = rng.uniform_vector(net.param_count(), -1.0, 1.0);
    dir /= dir.norm();
    worst = std::max(worst,
                     std::abs(forward_scalar(apply_param_step(net, dir, 1e-7), x) - base));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("activation names round-trip and reject junk") {
  for (Activation a : {Activation::kTanh, Activation::kRelu, Activation::kSin})
    CHECK(activation_from_string(to_string(a)) == a);
  CHECK(to_string(Activation::kSin) == "sin");
  CHECK_THROWS_AS(activation_from_string("sigmoid"), preqn::ArgumentError);
  CHECK_THROWS_AS(activation_from_string(""), preqn::ArgumentError);
}

TEST_CASE("network JSON round-trips parameters bitwise") {
  const Mlp net = mlp_init({3, 7, 5, 1}, Activation::kSin, 26);
  const Mlp back = mlp_from_json(mlp_to_json(net));
  CHECK(back.layer_sizes == net.layer_sizes);
  CHECK(back.activation == net.activation);
  CHECK((back.params - net.params).lpNorm<Eigen::Infinity>() == 0.0);

  const std::string path = "/tmp/preqn_test_net.json";
  save_mlp(net, path);
  const Mlp loaded = load_mlp(path);
  CHECK((loaded.params - net.params).lpNorm<Eigen::Infinity>() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("network JSON rejects malformed payloads") {
  CHECK_THROWS_AS(mlp_from_json("nope"), preqn::ArgumentError);
  CHECK_THROWS_AS(
      mlp_from_json(R"({"layer_sizes":[2,1],"activation":"swish","params":[0,0,0]})"),
      preqn::ArgumentError);
  // Wrong parameter count for the declared shape.
  CHECK_THROWS_AS(
      mlp_from_json(R"({"layer_sizes":[2,1],"activation":"tanh","params":[0,0]})"),
      preqn::ShapeError);
  CHECK_THROWS_AS(load_mlp("/tmp/preqn_no_such_file.json"), preqn::StateError);
}
