#include "preqn/common.hpp"

#include <charconv>
#include <cmath>
#include <numbers>

namespace preqn {

bool all_finite(const Matrix& m) { return m.allFinite(); }
bool all_finite(const Vector& v) { return v.allFinite(); }

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

std::uint64_t mix_bits(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  return mix_bits(root + 0x9e3779b97f4a7c15ull * (stream + 1));
}

double Rng::uniform() {
  // Top 53 bits of the raw draw; uniform on [0, 1) with full double precision.
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::int64_t Rng::uniform_int(std::int64_t n) {
  if (n <= 0) throw ArgumentError("uniform_int: n must be positive");
  // Rejection-free multiply-shift would bias by < 2^-53 for the sizes used
  // here; plain scaling keeps the draw count fixed at one per call.
  auto idx = static_cast<std::int64_t>(uniform() * static_cast<double>(n));
  return idx >= n ? n - 1 : idx;
}

double Rng::normal(double mean, double stddev) {
  // Box-Muller, cosine branch only. No cached spare: two uniforms per draw,
  // always, so interleaved consumers stay reproducible.
  double u1 = 1.0 - uniform();  // (0, 1]
  double u2 = uniform();
  double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  return mean + stddev * z;
}

Vector Rng::uniform_vector(int n, double lo, double hi) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = uniform(lo, hi);
  return v;
}

}  // namespace preqn
