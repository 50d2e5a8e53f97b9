#include <map>

#include "doctest.h"
#include "floodlab/numkit.hpp"
#include "oracles.hpp"

using namespace floodlab;

TEST_CASE("matmul basic products") {
  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  CHECK(matmul(Matrix::Identity(2, 2), a) == a);

  Matrix row(1, 2), col(2, 1);
  row << 1, 2;
  col << 3, 4;
  const Matrix p = matmul(row, col);
  REQUIRE(p.rows() == 1);
  CHECK(p(0, 0) == 11.0);

  CHECK(matmul(Matrix::Zero(3, 2), a).isZero(0.0));
}

TEST_CASE("matmul shape mismatch names both shapes") {
  try {
    matmul(Matrix::Zero(2, 3), Matrix::Zero(2, 3));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(2x3)") != std::string::npos);
  }
}

TEST_CASE("matmul is associative on random chains") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = 1 + static_cast<Eigen::Index>(rng.bounded(6));
    const auto n = 1 + static_cast<Eigen::Index>(rng.bounded(6));
    const auto p = 1 + static_cast<Eigen::Index>(rng.bounded(6));
    const auto q = 1 + static_cast<Eigen::Index>(rng.bounded(6));
    const Matrix a = testing::random_matrix(rng, m, n);
    const Matrix b = testing::random_matrix(rng, n, p);
    const Matrix c = testing::random_matrix(rng, p, q);
    const Matrix left = matmul(matmul(a, b), c);
    const Matrix right = matmul(a, matmul(b, c));
    CHECK((left - right).norm() <= 1e-9 * std::max(1.0, left.norm()));
  }
}

TEST_CASE("rng streams are reproducible") {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs |= x != c.next_u64();
  }
  CHECK(differs);
}

TEST_CASE("xoshiro256** reference stream") {
  // Seed 0 through splitmix64; values from an independent Python transcription.
  Rng rng(0);
  std::vector<std::uint64_t> first;
  for (int i = 0; i < 3; ++i) first.push_back(rng.next_u64());
  Rng again(0);
  for (auto v : first) CHECK(again.next_u64() == v);
  CHECK(first[0] == 0x99ec5f36cb75f2b4ULL);
  CHECK(first[1] == 0xbf6e1f784956452aULL);
  CHECK(first[2] == 0x1a5f849d4933e6e0ULL);
}

TEST_CASE("rng_shuffle edge cases and pinned permutation") {
  Rng rng(1);
  CHECK(rng_shuffle(rng, 0).empty());
  CHECK(rng_shuffle(rng, 1) == std::vector<std::size_t>{0});

  Rng fresh(2024);
  const auto perm = rng_shuffle(fresh, 5);
  Rng again(2024);
  CHECK(rng_shuffle(again, 5) == perm);
  // Pinned against an independent Python transcription of the generator.
  CHECK(perm == std::vector<std::size_t>{1, 2, 4, 3, 0});
}

TEST_CASE("rng_shuffle is uniform over permutations of 4") {
  Rng rng(99);
  std::map<std::vector<std::size_t>, int> freq;
  const int trials = 100000;
  for (int i = 0; i < trials; ++i) ++freq[rng_shuffle(rng, 4)];
  CHECK(freq.size() == 24);
  for (const auto& [perm, count] : freq) {
    CHECK(std::abs(static_cast<double>(count) / trials - 1.0 / 24.0) < 0.01);
  }
}

TEST_CASE("rng_gauss moments, degenerate std and errors") {
  Rng rng(5);
  const auto flat = rng_gauss(rng, 10, 3.5, 0.0);
  for (double v : flat) CHECK(v == 3.5);

  Rng big(6);
  const auto xs = rng_gauss(big, 100000, 0.0, 1.0);
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  const double std = std::sqrt(var / static_cast<double>(xs.size() - 1));
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(std - 1.0) < 0.02);

  Rng a(7), b(7);
  CHECK(rng_gauss(a, 33, 1.0, 2.0) == rng_gauss(b, 33, 1.0, 2.0));
  CHECK(rng_gauss(a, 3, 0.0, 1.0).size() == 3);
  CHECK_THROWS_AS(rng_gauss(a, 3, 0.0, -1.0), ParameterError);
}

TEST_CASE("bounded stays in range") {
  Rng rng(3);
  for (std::uint64_t bound : {1ULL, 2ULL, 3ULL, 7ULL, 1000ULL}) {
    for (int i = 0; i < 200; ++i) CHECK(rng.bounded(bound) < bound);
  }
  CHECK_THROWS_AS(rng.bounded(0), ParameterError);
}

TEST_CASE("format_real round-trips") {
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform() * 1e3 - 500.0;
    CHECK(std::stod(format_real(x)) == x);
  }
  CHECK(format_real(0.1) == "0.1");
  CHECK(format_real(-1.0) == "-1");
}
