#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace preqn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension mismatch between inputs (or between an input and a model).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A scalar argument outside its documented range.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Non-finite or otherwise numerically unusable input.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An operation was called in a state where it is not meaningful
/// (e.g. stepping an environment that was never reset).
class StateError : public Error {
 public:
  using Error::Error;
};

/// A structural precondition was violated (e.g. a vector-output network
/// passed where a scalar-output one is required).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Iterative solve failed to reach tolerance; carries the last iterate so
/// callers can inspect how far it got.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, Vector last)
      : Error(what), last_iterate(std::move(last)) {}

  Vector last_iterate;
};

/// Step size too large for a diagonal entry of the update map; `index` is the
/// offending coordinate.
class OvershootError : public Error {
 public:
  OvershootError(const std::string& what, int bad_index)
      : Error(what), index(bad_index) {}

  int index;
};

/// A kernel diagonal entry is numerically zero where a positive one is needed.
class DegenerateDiagonalError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// An optimizer step produced non-finite intermediates and was abandoned.
class UpdateAbortError : public Error {
 public:
  using Error::Error;
};

bool all_finite(const Matrix& m);
bool all_finite(const Vector& v);

/// Shortest decimal string that round-trips the value exactly. Used for every
/// numeric field written to CSV or JSON reports so repeated runs are
/// byte-identical.
std::string format_double(double v);

/// SplitMix64 finalizer; decorrelates nearby seeds.
std::uint64_t mix_bits(std::uint64_t x);

/// Derives the seed for a named subcomponent from a root seed. Streams are
/// small constants chosen by the caller; distinct streams give independent
/// generators.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream);

/// Deterministic pseudo-random source. Wraps std::mt19937_64 but does all
/// real-valued conversion itself so that sequences are reproducible
/// bit-for-bit across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return gen_(); }

  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n); n must be positive.
  std::int64_t uniform_int(std::int64_t n);
  /// Box-Muller normal draw; consumes exactly two uniforms per call.
  double normal(double mean = 0.0, double stddev = 1.0);

  Vector uniform_vector(int n, double lo, double hi);

  /// Independent generator for a subcomponent, derived from this generator's
  /// construction seed (not its current state).
  Rng child(std::uint64_t stream) const { return Rng(derive_seed(seed_, stream)); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace preqn
