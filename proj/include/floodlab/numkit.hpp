#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "floodlab/errors.hpp"

namespace floodlab {

// Dense row-major storage is the one layout used for serialization and tests.
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixX<double>;
using RowVector = RowVectorX<double>;

template <typename Derived>
std::string shape_string(const Eigen::EigenBase<Derived>& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

/// Standard matrix product with a checked inner dimension.
template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> matmul(const Eigen::MatrixBase<DerivedA>& a,
                                          const Eigen::MatrixBase<DerivedB>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: shape mismatch " + shape_string(a) + " * " +
                         shape_string(b));
  }
  return a * b;
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

/// xoshiro256** seeded through splitmix64.
///
/// The algorithm is fixed so that a seed reproduces the same stream on every
/// platform. An Rng is single-owner state; give each worker its own instance
/// (see derive_seed) instead of sharing one.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Unbiased integer in [0, bound). bound must be positive.
  std::uint64_t bounded(std::uint64_t bound);

 private:
  std::array<std::uint64_t, 4> state_;
};

std::uint64_t splitmix64(std::uint64_t& state);

/// Independent seed for a named sub-stream (init, shuffle, split, ...).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Shortest decimal string that round-trips to the same double.
std::string format_real(double x);

/// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> rng_shuffle(Rng& rng, std::size_t n);

/// n i.i.d. normal draws via Box-Muller. Throws ParameterError on std < 0.
std::vector<double> rng_gauss(Rng& rng, std::size_t n, double mean, double std);

}  // namespace floodlab
