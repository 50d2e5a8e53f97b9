#include <cmath>

#include "doctest.h"
#include "floodlab/imbalance.hpp"
#include "floodlab/numkit.hpp"

using namespace floodlab;

TEST_CASE("longtail_counts endpoints and interior") {
  const auto counts = longtail_counts({10, 5000, 10.0});
  REQUIRE(counts.size() == 10);
  CHECK(counts[0] == 5000);
  CHECK(counts[9] == 500);
  // 5000 * 10^(-1/3) = 2320.79...
  CHECK(counts[3] == 2321);
  for (std::size_t k = 1; k < counts.size(); ++k) CHECK(counts[k] <= counts[k - 1]);

  for (std::size_t n : longtail_counts({7, 123, 1.0})) CHECK(n == 123);
  CHECK(longtail_counts({10, 5000, 100.0})[9] == 50);
  CHECK(longtail_counts({5, 400, 20.0}) == ClassCounts{400, 189, 89, 42, 20});
}

TEST_CASE("longtail_counts clamps at one and validates") {
  const auto counts = longtail_counts({4, 10, 1000.0});
  CHECK(counts.back() == 1);
  CHECK_THROWS_AS(longtail_counts({1, 100, 10.0}), ParameterError);
  CHECK_THROWS_AS(longtail_counts({3, 100, 0.5}), ParameterError);
  CHECK_THROWS_AS(longtail_counts({3, 0, 2.0}), ParameterError);
}

TEST_CASE("flooding_schedule") {
  const auto s = flooding_schedule(0.1, {900, 100});
  CHECK(s.levels[0] == doctest::Approx(0.09).epsilon(1e-14));
  CHECK(s.levels[1] == doctest::Approx(0.01).epsilon(1e-14));
  CHECK(s.b_base == 0.1);
  CHECK(s.min_level() == s.levels[1]);

  for (double b : flooding_schedule(0.05, ClassCounts(5, 37)).levels) {
    CHECK(b == doctest::Approx(0.01).epsilon(1e-14));
  }
  CHECK_THROWS_AS(flooding_schedule(0.1, {10, 0, 3}), ParameterError);
  CHECK_THROWS_AS(flooding_schedule(-0.1, {10, 3}), ParameterError);
}

TEST_CASE("property: schedules sum to b_base, are ordered and scale-free") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto k = 2 + rng.bounded(20);
    ClassCounts counts(k);
    for (auto& c : counts) c = 1 + rng.bounded(5000);
    const double b_base = rng.uniform();
    const auto s = flooding_schedule(b_base, counts);
    double sum = 0.0;
    for (double b : s.levels) sum += b;
    CHECK(std::abs(sum - b_base) <= 1e-12);

    ClassCounts scaled = counts;
    const auto factor = 1 + rng.bounded(50);
    for (auto& c : scaled) c *= factor;
    CHECK(flooding_schedule(b_base, scaled).levels == s.levels);

    const auto lt = longtail_counts({k, 1 + rng.bounded(5000), 1.0 + rng.uniform() * 200.0});
    const auto lt_schedule = flooding_schedule(b_base, lt);
    for (std::size_t i = 1; i < lt.size(); ++i) {
      CHECK(lt[i] <= lt[i - 1]);
      CHECK(lt_schedule.levels[i] <= lt_schedule.levels[i - 1]);
    }
  }
}

TEST_CASE("uniform schedule from a balanced long tail") {
  const auto s = flooding_schedule(0.05, longtail_counts({5, 200, 1.0}));
  for (double b : s.levels) CHECK(b == doctest::Approx(0.01).epsilon(1e-14));
}

TEST_CASE("class_weights") {
  for (double w : class_weights({50, 50, 50})) CHECK(w == 1.0);
  const auto w = class_weights({900, 100});
  CHECK(w[0] == doctest::Approx(1000.0 / 1800.0).epsilon(1e-15));
  CHECK(w[1] == doctest::Approx(5.0).epsilon(1e-15));

  const ClassCounts counts{400, 189, 89, 42, 20};
  const auto lw = class_weights(counts);
  double total = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) total += lw[k] * static_cast<double>(counts[k]);
  CHECK(total == doctest::Approx(740.0).epsilon(1e-13));
  CHECK_THROWS_AS(class_weights({3, 0}), ParameterError);
}
