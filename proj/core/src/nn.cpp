#include "preqn/nn.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace preqn::nn {

namespace {

using nlohmann::json;
using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void check_sizes(const std::vector<int>& sizes) {
  if (sizes.size() < 2)
    throw ShapeError("Mlp: need at least an input and an output layer");
  for (int w : sizes)
    if (w <= 0) throw ShapeError("Mlp: layer widths must be positive");
}

void check_net(const Mlp& net, const char* who) {
  check_sizes(net.layer_sizes);
  if (net.params.size() != net.param_count())
    throw ShapeError(std::string(who) + ": parameter vector has " +
                     std::to_string(net.params.size()) + " entries, layout needs " +
                     std::to_string(net.param_count()));
}

void check_input(const Mlp& net, const Vector& x, const char* who) {
  if (x.size() != net.input_dim())
    throw ShapeError(std::string(who) + ": input length " + std::to_string(x.size()) +
                     " does not match network input width " +
                     std::to_string(net.input_dim()));
}

double act_value(Activation a, double z) {
  switch (a) {
    case Activation::kTanh: return std::tanh(z);
    case Activation::kRelu: return z > 0.0 ? z : 0.0;
    case Activation::kSin: return std::sin(z);
  }
  return 0.0;
}

double act_slope(Activation a, double z) {
  switch (a) {
    case Activation::kTanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::kRelu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::kSin: return std::cos(z);
  }
  return 0.0;
}

struct Workspace {
  std::vector<Vector> post;  // post[0] = input, post[l+1] = layer l output
  std::vector<Vector> pre;   // pre-activation of each affine layer
  std::vector<Vector> dpre;  // gradient of the loss wrt each pre-activation

  void resize(const Mlp& net) {
    const int n = net.n_affine_layers();
    post.resize(n + 1);
    pre.resize(n);
    dpre.resize(n);
    for (int l = 0; l < n; ++l) {
      pre[l].resize(net.layer_sizes[l + 1]);
      dpre[l].resize(net.layer_sizes[l + 1]);
      post[l + 1].resize(net.layer_sizes[l + 1]);
    }
  }
};

void run_forward(const Mlp& net, const Vector& x, Workspace& ws) {
  const int n = net.n_affine_layers();
  ws.post[0] = x;
  for (int l = 0; l < n; ++l) {
    RowMajorMap w(net.params.data() + net.weight_offset(l), net.layer_sizes[l + 1],
                  net.layer_sizes[l]);
    Eigen::Map<const Vector> b(net.params.data() + net.bias_offset(l),
                               net.layer_sizes[l + 1]);
    ws.pre[l].noalias() = w * ws.post[l];
    ws.pre[l] += b;
    if (l + 1 < n) {
      for (Eigen::Index i = 0; i < ws.pre[l].size(); ++i)
        ws.post[l + 1][i] = act_value(net.activation, ws.pre[l][i]);
    } else {
      ws.post[l + 1] = ws.pre[l];  // linear output layer
    }
  }
}

// Reverse pass for cotangent c (a vector over the outputs). Fills `grad` with
// d(c . f)/d(params); when `input_grad` is non-null also writes d(c . f)/dx.
// Assumes run_forward has populated the workspace for this input.
void run_backward(const Mlp& net, const Vector& c, Workspace& ws,
                  Eigen::Ref<Vector> grad, Vector* input_grad) {
  const int n = net.n_affine_layers();
  ws.dpre[n - 1] = c;
  for (int l = n - 1; l >= 0; --l) {
    if (l < n - 1)
      for (Eigen::Index i = 0; i < ws.dpre[l].size(); ++i)
        ws.dpre[l][i] *= act_slope(net.activation, ws.pre[l][i]);

    const int out = net.layer_sizes[l + 1];
    const int in = net.layer_sizes[l];
    // d/dW is the outer product dpre * post^T, flattened row-major to match
    // the parameter layout; d/db is dpre itself.
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        gw(grad.data() + net.weight_offset(l), out, in);
    gw.noalias() = ws.dpre[l] * ws.post[l].transpose();
    Eigen::Map<Vector> gb(grad.data() + net.bias_offset(l), out);
    gb = ws.dpre[l];

    if (l > 0 || input_grad != nullptr) {
      RowMajorMap w(net.params.data() + net.weight_offset(l), out, in);
      Vector back = w.transpose() * ws.dpre[l];
      if (l > 0)
        ws.dpre[l - 1] = std::move(back);
      else
        *input_grad = std::move(back);
    }
  }
}

}  // namespace

Activation activation_from_string(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "sin") return Activation::kSin;
  throw ArgumentError("unknown activation '" + std::string(name) +
                      "' (expected tanh, relu, or sin)");
}

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kSin: return "sin";
  }
  return "?";
}

std::int64_t Mlp::param_count() const {
  std::int64_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
    n += static_cast<std::int64_t>(layer_sizes[l + 1]) * layer_sizes[l] + layer_sizes[l + 1];
  return n;
}

std::int64_t Mlp::weight_offset(int layer) const {
  std::int64_t off = 0;
  for (int l = 0; l < layer; ++l)
    off += static_cast<std::int64_t>(layer_sizes[l + 1]) * layer_sizes[l] + layer_sizes[l + 1];
  return off;
}

std::int64_t Mlp::bias_offset(int layer) const {
  return weight_offset(layer) +
         static_cast<std::int64_t>(layer_sizes[layer + 1]) * layer_sizes[layer];
}

Mlp mlp_init(const std::vector<int>& layer_sizes, Activation act, std::uint64_t seed) {
  check_sizes(layer_sizes);
  Mlp net;
  net.layer_sizes = layer_sizes;
  net.activation = act;
  net.params = Vector::Zero(net.param_count());
  Rng rng(seed);
  for (int l = 0; l < net.n_affine_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer_sizes[l]));
    double* w = net.params.data() + net.weight_offset(l);
    const std::int64_t n_w = static_cast<std::int64_t>(layer_sizes[l + 1]) * layer_sizes[l];
    for (std::int64_t k = 0; k < n_w; ++k) w[k] = rng.uniform(-bound, bound);
    // biases stay zero
  }
  return net;
}

Vector forward(const Mlp& net, const Vector& x) {
  check_net(net, "forward");
  check_input(net, x, "forward");
  Workspace ws;
  ws.resize(net);
  run_forward(net, x, ws);
  return ws.post.back();
}

double forward_scalar(const Mlp& net, const Vector& x) {
  if (net.output_dim() != 1)
    throw ContractError("forward_scalar: network output width is " +
                        std::to_string(net.output_dim()) + ", need 1");
  return forward(net, x)[0];
}

GradBatch grad_per_sample(const Mlp& net, const std::vector<Vector>& xs) {
  check_net(net, "grad_per_sample");
  if (net.output_dim() != 1)
    throw ContractError("grad_per_sample: network must have scalar output");
  if (xs.empty()) throw ArgumentError("grad_per_sample: empty batch");
  GradBatch out;
  out.phi.resize(net.param_count(), static_cast<Eigen::Index>(xs.size()));
  Workspace ws;
  ws.resize(net);
  const Vector one = Vector::Ones(1);
  for (std::size_t j = 0; j < xs.size(); ++j) {
    check_input(net, xs[j], "grad_per_sample");
    run_forward(net, xs[j], ws);
    run_backward(net, one, ws, out.phi.col(static_cast<Eigen::Index>(j)), nullptr);
  }
  return out;
}

Vector param_grad_vjp(const Mlp& net, const Vector& x, const Vector& cotangent) {
  check_net(net, "param_grad_vjp");
  check_input(net, x, "param_grad_vjp");
  if (cotangent.size() != net.output_dim())
    throw ShapeError("param_grad_vjp: cotangent length does not match output width");
  Workspace ws;
  ws.resize(net);
  run_forward(net, x, ws);
  Vector grad(net.param_count());
  run_backward(net, cotangent, ws, grad, nullptr);
  return grad;
}

Vector input_gradient(const Mlp& net, const Vector& x) {
  check_net(net, "input_gradient");
  check_input(net, x, "input_gradient");
  if (net.output_dim() != 1)
    throw ContractError("input_gradient: network must have scalar output");
  Workspace ws;
  ws.resize(net);
  run_forward(net, x, ws);
  Vector grad(net.param_count());
  Vector dx;
  run_backward(net, Vector::Ones(1), ws, grad, &dx);
  return dx;
}

Mlp apply_param_step(const Mlp& net, const Vector& direction, double scale) {
  check_net(net, "apply_param_step");
  if (direction.size() != net.params.size())
    throw ShapeError("apply_param_step: direction length does not match parameters");
  if (!std::isfinite(scale)) throw NumericError("apply_param_step: scale is not finite");
  Mlp out = net;
  out.params += scale * direction;
  return out;
}

std::string mlp_to_json(const Mlp& net) {
  check_net(net, "mlp_to_json");
  json j;
  j["layer_sizes"] = net.layer_sizes;
  j["activation"] = std::string(to_string(net.activation));
  std::vector<double> p(net.params.data(), net.params.data() + net.params.size());
  j["params"] = std::move(p);
  return j.dump();
}

Mlp mlp_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ArgumentError(std::string("mlp_from_json: invalid JSON: ") + e.what());
  }
  Mlp net;
  try {
    net.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    net.activation = activation_from_string(j.at("activation").get<std::string>());
    const auto p = j.at("params").get<std::vector<double>>();
    net.params = Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size()));
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("mlp_from_json: bad schema: ") + e.what());
  }
  check_net(net, "mlp_from_json");
  return net;
}

void save_mlp(const Mlp& net, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw StateError("save_mlp: cannot open " + path);
  f << mlp_to_json(net) << '\n';
}

Mlp load_mlp(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw StateError("load_mlp: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return mlp_from_json(ss.str());
}

}  // namespace preqn::nn
