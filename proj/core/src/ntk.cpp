#include "preqn/ntk.hpp"

#include <ostream>

namespace preqn::ntk {

NtkMatrix build_ntk(const nn::GradBatch& grads) {
  if (grads.phi.size() == 0) throw ShapeError("build_ntk: empty gradient batch");
  if (!all_finite(grads.phi)) throw NumericError("build_ntk: non-finite gradients");
  Matrix k = grads.phi.transpose() * grads.phi;
  return {0.5 * (k + k.transpose())};
}

Vector row_ratio(const NtkMatrix& ntk) {
  const auto n = ntk.k.rows();
  if (ntk.k.cols() != n) throw ShapeError("row_ratio: kernel not square");
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double diag = ntk.k(i, i);
    if (diag <= 1e-14)
      throw DegenerateDiagonalError("row_ratio: K(" + std::to_string(i) + "," +
                                    std::to_string(i) + ") = " + format_double(diag) +
                                    " is numerically zero");
    double off = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) off += std::abs(ntk.k(i, j));
    out[i] = off / (diag * static_cast<double>(n));
  }
  return out;
}

NtkStats compute_stats(const NtkMatrix& ntk) {
  NtkStats s;
  s.diag_mean = ntk.k.diagonal().mean();
  s.diag_min = ntk.k.diagonal().minCoeff();
  s.diag_max = ntk.k.diagonal().maxCoeff();
  s.row_ratio_mean = row_ratio(ntk).mean();
  return s;
}

std::vector<SweepCell> ntk_sweep(const std::string& env_name,
                                 const std::vector<Vector>& dataset,
                                 const std::vector<int>& widths,
                                 const std::vector<int>& depths,
                                 const std::vector<nn::Activation>& activations,
                                 int trials, std::uint64_t seed) {
  if (dataset.empty()) throw ArgumentError("ntk_sweep: empty dataset");
  if (trials <= 0) throw ArgumentError("ntk_sweep: trials must be positive");
  const int in_dim = static_cast<int>(dataset.front().size());
  std::vector<SweepCell> cells;
  // Seed each cell by its grid position, not by iteration order, so adding a
  // width or activation to the sweep does not shuffle everyone else's draws.
  std::uint64_t cell_id = 0;
  for (int width : widths)
    for (int depth : depths)
      for (auto act : activations) {
        if (width <= 0) throw ArgumentError("ntk_sweep: widths must be positive");
        if (depth <= 0) throw ArgumentError("ntk_sweep: depths must be positive");
        for (int trial = 0; trial < trials; ++trial) {
          SweepCell cell;
          cell.env = env_name;
          cell.width = width;
          cell.depth = depth;
          cell.activation = act;
          cell.trial = trial;
          cell.net_seed =
              derive_seed(seed, cell_id * 1000 + static_cast<std::uint64_t>(trial));
          std::vector<int> sizes;
          sizes.push_back(in_dim);
          for (int l = 0; l < depth; ++l) sizes.push_back(width);
          sizes.push_back(1);
          nn::Mlp net = nn::mlp_init(sizes, act, cell.net_seed);
          cell.stats = compute_stats(build_ntk(nn::grad_per_sample(net, dataset)));
          cells.push_back(std::move(cell));
        }
        ++cell_id;
      }
  return cells;
}

void write_sweep_csv(const std::vector<SweepCell>& cells, std::ostream& out) {
  out << "env,width,depth,activation,trial,diag_mean,diag_min,diag_max,row_ratio_mean\n";
  for (const auto& c : cells) {
    out << c.env << ',' << c.width << ',' << c.depth << ',' << to_string(c.activation)
        << ',' << c.trial << ',' << format_double(c.stats.diag_mean) << ','
        << format_double(c.stats.diag_min) << ',' << format_double(c.stats.diag_max)
        << ',' << format_double(c.stats.row_ratio_mean) << '\n';
  }
}

}  // namespace preqn::ntk
