#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "bbm/offspring.hpp"
#include "bbm/random.hpp"

using namespace bbm;

TEST_CASE("offspring law validation") {
  REQUIRE_NOTHROW(OffspringLaw::binary());
  REQUIRE(OffspringLaw::binary().second_factorial_moment() == Catch::Approx(2.0));

  // Mixed law with mean 2: p1 = p3 = 1/2, K = 0.5*0 + 0.5*6 = 3.
  const auto mixed = OffspringLaw::from_probabilities({0.5, 0.0, 0.5});
  REQUIRE(mixed.second_factorial_moment() == Catch::Approx(3.0));

  REQUIRE_THROWS_AS(OffspringLaw::from_probabilities({1.0}), validation_error);        // mean 1
  REQUIRE_THROWS_AS(OffspringLaw::from_probabilities({0.5, 0.4}), validation_error);   // sum != 1
  REQUIRE_THROWS_AS(OffspringLaw::from_probabilities({-0.1, 1.1}), validation_error);  // negative
  REQUIRE_THROWS_AS(OffspringLaw::from_probabilities({}), validation_error);

  // Test hook bypasses the checks.
  const auto degenerate = OffspringLaw::unchecked({1.0});
  REQUIRE(degenerate.second_factorial_moment() == 0.0);
}

TEST_CASE("offspring sampling matches probabilities") {
  const auto mixed = OffspringLaw::from_probabilities({0.5, 0.0, 0.5});
  RandomStream rng(5);
  int ones = 0, threes = 0;
  const int n = 200'000;
  for (int i = 0; i < n; ++i) {
    const int k = mixed.sample(rng);
    REQUIRE((k == 1 || k == 3));
    (k == 1 ? ones : threes)++;
  }
  REQUIRE(std::abs(static_cast<double>(ones) / n - 0.5) < 0.005);

  // Deterministic support consumes no randomness.
  RandomStream a(6), b(6);
  const auto binary = OffspringLaw::binary();
  REQUIRE(binary.sample(a) == 2);
  REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("generating value is the Horner sum of p_k u^k") {
  const auto binary = OffspringLaw::binary();
  REQUIRE(binary.generating_value(0.5) == Catch::Approx(0.25));
  REQUIRE(binary.generating_value(1.0) == Catch::Approx(1.0));
  const auto mixed = OffspringLaw::from_probabilities({0.5, 0.0, 0.5});
  REQUIRE(mixed.generating_value(0.5) == Catch::Approx(0.5 * 0.5 + 0.5 * 0.125));
}
