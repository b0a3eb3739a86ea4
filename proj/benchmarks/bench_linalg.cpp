#include "preqn/common.hpp"
#include "preqn/linalg.hpp"

#include <benchmark/benchmark.h>

namespace {

using preqn::Matrix;
using preqn::Rng;
using preqn::Vector;

// Well-conditioned PSD Gram matrix of the given size, plus a right-hand side.
struct PsdProblem {
  Matrix g;
  Vector b;
};

PsdProblem make_psd_problem(int n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix phi(2 * n, n);
  for (Eigen::Index j = 0; j < phi.cols(); ++j)
    phi.col(j) = rng.uniform_vector(static_cast<int>(phi.rows()), -1.0, 1.0);
  PsdProblem p;
  p.g = phi.transpose() * phi;
  p.b = rng.uniform_vector(n, -1.0, 1.0);
  return p;
}

void bm_sym_pinv(benchmark::State& state) {
  const auto problem = make_psd_problem(static_cast<int>(state.range(0)), 71);
  for (auto _ : state) {
    Matrix inv = preqn::linalg::sym_pinv(problem.g);
    benchmark::DoNotOptimize(inv.data());
  }
}
BENCHMARK(bm_sym_pinv)->Arg(16)->Arg(64)->Arg(256);

void bm_lstsq_psd(benchmark::State& state) {
  const auto problem = make_psd_problem(static_cast<int>(state.range(0)), 72);
  for (auto _ : state) {
    Vector z = preqn::linalg::lstsq_psd(problem.g, problem.b);
    benchmark::DoNotOptimize(z.data());
  }
}
BENCHMARK(bm_lstsq_psd)->Arg(16)->Arg(64)->Arg(256);

// Rank-deficient case: more columns than rows in phi, so the Gram matrix has
// a large null space and the cutoff path does real work.
void bm_lstsq_rank_deficient(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(73);
  Matrix phi(n / 2, n);
  for (Eigen::Index j = 0; j < phi.cols(); ++j)
    phi.col(j) = rng.uniform_vector(static_cast<int>(phi.rows()), -1.0, 1.0);
  const Matrix g = phi.transpose() * phi;
  const Vector b = rng.uniform_vector(n, -1.0, 1.0);
  for (auto _ : state) {
    Vector z = preqn::linalg::lstsq_psd(g, b);
    benchmark::DoNotOptimize(z.data());
  }
}
BENCHMARK(bm_lstsq_rank_deficient)->Arg(64)->Arg(256);

void bm_cosine(benchmark::State& state) {
  Rng rng(74);
  const int n = static_cast<int>(state.range(0));
  const Vector u = rng.uniform_vector(n, -1.0, 1.0);
  const Vector v = rng.uniform_vector(n, -1.0, 1.0);
  for (auto _ : state) {
    double c = preqn::linalg::cosine(u, v);
    benchmark::DoNotOptimize(c);
  }
}
BENCHMARK(bm_cosine)->Arg(64)->Arg(4096);

}  // namespace
