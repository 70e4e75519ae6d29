#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "bbm/engine.hpp"
#include "bbm/frontier.hpp"
#include "bbm/stats.hpp"

using namespace bbm;

namespace {
const OffspringLaw kBinary = OffspringLaw::binary();
const PruneConfig kNoPrune{12.0, 50'000'000, false, 1.0};
}  // namespace

TEST_CASE("front centering") {
  REQUIRE(front_centering(1.0) == Catch::Approx(kSqrt2).epsilon(1e-12));
  const double e2 = std::exp(2.0);
  REQUIRE(front_centering(e2) == Catch::Approx(kSqrt2 * e2 - 3.0 / kSqrt2).epsilon(1e-12));
  REQUIRE(front_centering(std::exp(2.0)) == Catch::Approx(8.32817).epsilon(1e-5));

  // Increment over one time unit at t=100 sits just below sqrt(2).
  const double inc = front_centering(100.0) - front_centering(99.0) - kSqrt2;
  REQUIRE(inc > -0.02);
  REQUIRE(inc < 0.0);

  REQUIRE_THROWS_AS(front_centering(0.0), validation_error);
  REQUIRE_THROWS_AS(front_centering(-1.0), validation_error);
}

TEST_CASE("front centering decomposition identity") {
  // m(t) = m(t-s) + sqrt(2) s + (3/(2 sqrt 2)) ln((t-s)/t), up to rounding.
  for (auto [t, s] : {std::pair{100.0, 1.0}, {30.0, 7.5}, {5.0, 4.0}}) {
    const double lhs = front_centering(t) - front_centering(t - s) - kSqrt2 * s -
                       1.5 / kSqrt2 * std::log((t - s) / t);
    REQUIRE(std::abs(lhs) < 1e-12);
  }
}

TEST_CASE("relative heights") {
  RandomStream rng(31);
  auto pop = init_population(0.1, rng, {1.0, false});

  SECTION("root particle at time zero") {
    const auto hs = relative_heights(pop);
    REQUIRE(hs.size() == 1);
    REQUIRE(hs[0].first == 0.0);
    REQUIRE(hs[0].second == 0.0);
  }

  SECTION("consistent with positions, and z bounded by its maximum") {
    pop.advance(3.0, kBinary, kNoPrune, rng);
    const auto hs = relative_heights(pop);
    REQUIRE(hs.size() == pop.size());
    const double zmax = std::exp(-1.0) / kSqrt2;  // attained at y = 1/sqrt(2)
    for (std::size_t i = 0; i < hs.size(); ++i) {
      const auto [y, z] = hs[i];
      REQUIRE(y == Catch::Approx(kSqrt2 * 3.0 - pop.position(i)).epsilon(1e-12));
      REQUIRE(z == Catch::Approx(y * std::exp(-kSqrt2 * y)).epsilon(1e-12));
      REQUIRE(z <= zmax + 1e-12);
    }
  }

  SECTION("z value at y = 1/sqrt(2)") {
    const double y = 1.0 / kSqrt2;
    REQUIRE(y * std::exp(-kSqrt2 * y) == Catch::Approx(0.26007).epsilon(1e-4));
  }
}

TEST_CASE("martingale snapshot") {
  RandomStream rng(32);
  auto pop = init_population(0.1, rng, {1.0, false});

  SECTION("initial values") {
    const auto s = martingale_snapshot(pop);
    REQUIRE(s.Y == 1.0);
    REQUIRE(s.Z == 0.0);
    REQUIRE(s.Z2 == 0.0);
    REQUIRE(s.min_y == 0.0);
  }

  SECTION("agrees with recomputation from sorted positions") {
    pop.advance(4.0, kBinary, kNoPrune, rng);
    const auto s = martingale_snapshot(pop);
    double y_sum = 0, z_sum = 0, z2_sum = 0;
    for (double x : snapshot_positions(pop)) {
      const double y = kSqrt2 * 4.0 - x;
      y_sum += std::exp(-kSqrt2 * y);
      z_sum += y * std::exp(-kSqrt2 * y);
      z2_sum += y * y * std::exp(-2.0 * kSqrt2 * y);
    }
    REQUIRE(s.Y == Catch::Approx(y_sum).epsilon(1e-10));
    REQUIRE(s.Z == Catch::Approx(z_sum).epsilon(1e-10));
    REQUIRE(s.Z2 == Catch::Approx(z2_sum).epsilon(1e-10));
    REQUIRE(s.Y > 0.0);
    REQUIRE(s.Z2 >= 0.0);
  }

  SECTION("additive martingale decays in the median") {
    const PruneConfig prune{8.0, 5'000'000, true, 1.0};
    std::vector<double> ratio;
    for (int rep = 0; rep < 200; ++rep) {
      RandomStream sub = RandomStream::substream(77, rep, "ytrend");
      auto p = init_population(0.1, sub, {1.0, false});
      p.advance(3.0, kBinary, prune, sub);
      const double y3 = martingale_snapshot(p).Y;
      p.advance(8.0, kBinary, prune, sub);
      ratio.push_back(martingale_snapshot(p).Y / y3);
    }
    REQUIRE(median(ratio) < 1.0);
  }
}

TEST_CASE("max displacement") {
  RandomStream rng(33);
  auto pop = init_population(0.1, rng, {1.0, false});
  REQUIRE_THROWS_AS(max_displacement(pop), validation_error);  // undefined at t=0

  pop.advance(2.0, kBinary, kNoPrune, rng);
  const double m = max_displacement(pop);
  for (std::size_t j = 0; j < pop.size(); ++j)
    REQUIRE(m >= pop.position(j) - front_centering(2.0) - 1e-12);
}

TEST_CASE("empirical cdf") {
  SECTION("constant path gives a step function") {
    std::vector<std::pair<double, double>> path;
    for (int i = 0; i < 50; ++i) path.emplace_back(0.1 * i, 1.5);
    const auto cdf = empirical_cdf(path, {0.0, 1.0, 1.49, 1.5, 2.0});
    REQUIRE(cdf.values == std::vector<double>{0.0, 0.0, 0.0, 1.0, 1.0});
  }

  SECTION("bounds and monotonicity on a random path") {
    RandomStream rng(34);
    std::vector<std::pair<double, double>> path;
    for (int i = 0; i < 400; ++i) path.emplace_back(0.1 * i, rng.gaussian());
    std::vector<double> grid;
    for (double x = -4.0; x <= 4.0; x += 0.25) grid.push_back(x);
    const auto cdf = empirical_cdf(path, grid);
    REQUIRE(cdf.values.front() == 0.0);
    REQUIRE(cdf.values.back() == 1.0);
    for (std::size_t i = 1; i < cdf.values.size(); ++i) {
      REQUIRE(cdf.values[i] >= cdf.values[i - 1]);
      REQUIRE(cdf.values[i] <= 1.0);
      REQUIRE(cdf.values[i] >= 0.0);
    }
  }

  SECTION("validation") {
    REQUIRE_THROWS_AS(empirical_cdf({}, {0.0}), validation_error);
    std::vector<std::pair<double, double>> bad{{0.0, 1.0}, {0.1, 1.0}, {0.35, 1.0}};
    REQUIRE_THROWS_AS(empirical_cdf(bad, {0.0}), validation_error);
  }
}

TEST_CASE("gumbel prediction") {
  const GumbelParams p{2.0, 0.5};  // C Z = 1

  SECTION("fixed values") {
    REQUIRE(gumbel_predict(p, 0.0) == Catch::Approx(std::exp(-1.0)).epsilon(1e-14));
    const double x_star = std::log(2.0 * 0.5) / kSqrt2;
    REQUIRE(gumbel_predict(p, x_star) == Catch::Approx(std::exp(-1.0)).epsilon(1e-12));
    REQUIRE(gumbel_predict(p, 60.0) == Catch::Approx(1.0).epsilon(1e-12));
    REQUIRE(gumbel_predict(p, -60.0) == Catch::Approx(0.0).margin(1e-12));
  }

  SECTION("strictly increasing") {
    double prev = 0.0;
    for (double x = -3.0; x <= 5.0; x += 0.1) {
      const double v = gumbel_predict(p, x);
      REQUIRE(v > prev);
      prev = v;
    }
  }

  SECTION("shift of x equals scaling of Z") {
    const double a = 0.73;
    for (double x = -2.0; x <= 4.0; x += 0.5) {
      const GumbelParams scaled{p.C, p.Z * std::exp(-kSqrt2 * a)};
      REQUIRE(gumbel_predict(p, x + a) ==
              Catch::Approx(gumbel_predict(scaled, x)).epsilon(1e-14));
    }
  }

  SECTION("validation") {
    REQUIRE_THROWS_AS(gumbel_predict({0.0, 1.0}, 0.0), validation_error);
    REQUIRE_THROWS_AS(gumbel_predict({1.0, -2.0}, 0.0), validation_error);
  }
}

TEST_CASE("conditional max cdf") {
  SECTION("single frozen particle, tiny horizon, large level") {
    RandomStream rng(35);
    auto pop = init_population(0.1, rng, {0.0, false});  // branching disabled
    pop.advance(0.5, kBinary, kNoPrune, rng);
    const auto cdf =
        conditional_max_cdf(pop, 0.6, {5.0, 10.0}, 100, rng, kBinary, kNoPrune);
    REQUIRE(cdf.values[0] == 1.0);
    REQUIRE(cdf.values[1] == 1.0);
  }

  SECTION("estimates at different budgets agree within binomial error") {
    RandomStream rng(36);
    auto pop = init_population(0.1, rng, {1.0, false});
    pop.advance(2.0, kBinary, kNoPrune, rng);
    const PruneConfig prune{8.0, 5'000'000, true, 1.0};
    std::vector<double> grid{-1.0, 0.0, 1.0};
    RandomStream ra(100), rb(200);
    const auto a = conditional_max_cdf(pop, 6.0, grid, 200, ra, kBinary, prune);
    const auto b = conditional_max_cdf(pop, 6.0, grid, 800, rb, kBinary, prune);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double p = (a.values[i] + b.values[i]) / 2.0;
      const double se = std::sqrt(std::max(p * (1.0 - p), 1e-4) * (1.0 / 200 + 1.0 / 800));
      REQUIRE(std::abs(a.values[i] - b.values[i]) <= 4.0 * se);
    }
  }

  SECTION("validation") {
    RandomStream rng(37);
    auto pop = init_population(0.1, rng, {1.0, false});
    pop.advance(1.0, kBinary, kNoPrune, rng);
    REQUIRE_THROWS_AS(conditional_max_cdf(pop, 0.5, {0.0}, 100, rng, kBinary, kNoPrune),
                      validation_error);
    REQUIRE_THROWS_AS(conditional_max_cdf(pop, 2.0, {0.0}, 50, rng, kBinary, kNoPrune),
                      validation_error);
  }
}
