#include "blockcast/model.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

using namespace blockcast;

namespace {

ChannelParams channel(double loss, std::uint32_t packet_size = 1) {
  return ChannelParams{loss, packet_size};
}

// Direct textbook evaluation, independent of the library's expm1 path.
double arrival_direct(double p, double loss, double k, double n) {
  return 1.0 - std::pow((1.0 - p) + p * std::pow(loss, k), n);
}

}  // namespace

TEST_CASE("normalize_values basic maps") {
  const auto uniform = normalize_values(std::vector<double>{1, 1, 1, 1});
  for (double p : uniform.probabilities) CHECK(p == doctest::Approx(0.25));

  const auto skewed = normalize_values(std::vector<double>{3, 1});
  CHECK(skewed.probabilities[0] == doctest::Approx(0.75));
  CHECK(skewed.probabilities[1] == doctest::Approx(0.25));

  const auto with_zeros = normalize_values(std::vector<double>{0, 5, 0, 5});
  CHECK(with_zeros.probabilities[0] == 0.0);
  CHECK(with_zeros.probabilities[1] == doctest::Approx(0.5));
  CHECK(with_zeros.probabilities[2] == 0.0);
  CHECK(with_zeros.probabilities[3] == doctest::Approx(0.5));
}

TEST_CASE("normalize_values rejects bad input") {
  CHECK_THROWS_WITH_AS(normalize_values(std::vector<double>{0, 0}),
                       doctest::Contains("degenerate"), Error);
  CHECK_THROWS_WITH_AS(normalize_values(std::vector<double>{1, -0.5}),
                       doctest::Contains("negative"), Error);
  CHECK_THROWS_AS(normalize_values(std::vector<double>{}), Error);
}

TEST_CASE("values_from_heatmap") {
  const auto proportional =
      values_from_heatmap(std::vector<std::uint64_t>{10, 30}, 0.0);
  CHECK(proportional.probabilities[0] == doctest::Approx(0.25));
  CHECK(proportional.probabilities[1] == doctest::Approx(0.75));

  // Floor lifts zero-count blocks to 1% of the max count.
  const auto floored =
      values_from_heatmap(std::vector<std::uint64_t>{0, 100}, 0.01);
  CHECK(floored.values[0] == doctest::Approx(1.0));
  CHECK(floored.values[1] == doctest::Approx(100.0));
  CHECK(floored.probabilities[0] == doctest::Approx(1.0 / 101.0));
  CHECK(floored.probabilities[1] == doctest::Approx(100.0 / 101.0));

  const auto flat =
      values_from_heatmap(std::vector<std::uint64_t>{7, 7, 7}, 0.01);
  for (double p : flat.probabilities) CHECK(p == doctest::Approx(1.0 / 3.0));

  CHECK_THROWS_WITH_AS(
      values_from_heatmap(std::vector<std::uint64_t>{0, 0}, 0.0),
      doctest::Contains("degenerate"), Error);
}

TEST_CASE("block_success_prob") {
  CHECK(block_success_prob(channel(0.0), 1) == 1.0);
  CHECK(block_success_prob(channel(0.0), 7) == 1.0);
  CHECK(block_success_prob(channel(1.0), 1) == 0.0);
  CHECK(block_success_prob(channel(1.0), 3) == 0.0);
  CHECK(block_success_prob(channel(0.5), 2) == doctest::Approx(0.75));
}

TEST_CASE("plan_transmission sizes and counts") {
  // 256x144 grayscale in 8x8 blocks: 576 blocks of 64 bytes; double budget.
  const std::size_t count = 576;
  const auto uniform = normalize_values(std::vector<double>(count, 1.0));
  SizingParams sizing{64, 576 * 64, 2.0 * 576 * 64};
  const auto plan =
      plan_transmission(channel(0.25, 64), sizing, uniform, {count});
  CHECK(plan.total_transmissions == 1152);
  CHECK(plan.fragments_per_block == 1);

  double expected_sum = 0.0;
  for (double e : plan.expected_counts) expected_sum += e;
  CHECK(std::abs(expected_sum -
                 static_cast<double>(plan.total_transmissions)) < 1e-6);

  // 1024-byte blocks over 256-byte packets fragment 4 ways.
  const auto one = normalize_values(std::vector<double>{1.0});
  const auto frag = plan_transmission(channel(0.0, 256),
                                      SizingParams{1024, 1024, 1024}, one, {1});
  CHECK(frag.fragments_per_block == 4);

  // Single block, budget = original: one certain send over a clean channel.
  const auto single =
      plan_transmission(channel(0.0, 64), SizingParams{64, 64, 64}, one, {1});
  CHECK(single.total_transmissions == 1);
  CHECK(single.expected_counts[0] == doctest::Approx(1.0));
  CHECK(single.arrival_probs[0] == doctest::Approx(1.0));
}

TEST_CASE("plan_transmission rejects bad sizing") {
  const auto one = normalize_values(std::vector<double>{1.0});
  // 100-byte blocks do not split into 64-byte packets.
  CHECK_THROWS_AS(plan_transmission(channel(0.0, 64),
                                    SizingParams{100, 100, 100}, one, {1}),
                  Error);
  // A budget that rounds to zero sends is an error, not a plan.
  CHECK_THROWS_WITH_AS(
      plan_transmission(channel(0.0, 64), SizingParams{64, 64, 20.0}, one,
                        {1}),
      doctest::Contains("empty budget"), Error);
  // Mismatched original size.
  CHECK_THROWS_AS(plan_transmission(channel(0.0, 64),
                                    SizingParams{64, 640, 64}, one, {1}),
                  Error);
}

TEST_CASE("arrival_probability examples") {
  // Two fair coin flips of a 2-block uniform map on a clean channel: the
  // block is missing only when both sends pick the other block.
  CHECK(arrival_probability(0.5, channel(0.0), 1, 2) == doctest::Approx(0.75));
  CHECK(arrival_probability(0.0, channel(0.7), 1, 50) == 0.0);
  CHECK(arrival_probability(1.0, channel(0.0), 1, 1) == 1.0);
}

TEST_CASE("arrival_probability matches the exhaustive enumeration oracle") {
  const double loss_grid[] = {0.0, 0.25, 0.5, 0.9, 1.0};
  std::mt19937_64 rng(2024);
  auto uniform = [&rng] {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };
  double worst = 0.0;
  for (int blocks = 1; blocks <= 3; ++blocks) {
    for (int sends = 1; sends <= 4; ++sends) {
      for (double loss : loss_grid) {
        // A few random maps per configuration.
        for (int rep = 0; rep < 4; ++rep) {
          std::vector<double> weights(blocks);
          for (double& w : weights) w = 0.05 + uniform();
          const auto map = normalize_values(weights);
          for (int target = 0; target < blocks; ++target) {
            const double enumerated = oracles::arrival_prob_exhaustive(
                map.probabilities, loss, sends, target);
            const double model = arrival_probability(
                map.probabilities[target], channel(loss), 1, sends);
            worst = std::max(worst, std::abs(enumerated - model));
          }
        }
      }
    }
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("arrival_probability agrees with a Monte Carlo oracle") {
  const double model = arrival_probability(0.1, channel(0.25), 1, 100);
  const int trials = 1'000'000;
  const double empirical =
      oracles::arrival_prob_monte_carlo(0.1, 0.25, 100, trials, 99);
  const double se = std::sqrt(model * (1.0 - model) / trials);
  CHECK(std::abs(empirical - model) <= 3.0 * se);
}

TEST_CASE("arrival_probability monotonicity") {
  std::mt19937_64 rng(7);
  auto uniform = [&rng] {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };
  for (int rep = 0; rep < 500; ++rep) {
    const double p = uniform();
    const double loss = uniform();
    const std::uint32_t k = 1 + static_cast<std::uint32_t>(uniform() * 4);
    const std::uint64_t n = 1 + static_cast<std::uint64_t>(uniform() * 500);
    const double base = arrival_probability(p, channel(loss), k, n);
    CHECK(arrival_probability(std::min(1.0, p + 0.05), channel(loss), k, n) >=
          base - 1e-15);
    CHECK(arrival_probability(p, channel(loss), k, n + 3) >= base - 1e-15);
    CHECK(arrival_probability(p, channel(std::min(1.0, loss + 0.05)), k, n) <=
          base + 1e-15);
  }
}

TEST_CASE("min_probability_for examples") {
  CHECK(min_probability_for(0.0, channel(1.0), 1, 10) == 0.0);
  CHECK(min_probability_for(0.0, channel(0.3), 2, 1) == 0.0);

  // Frozen from the bisection oracle below (and checked against it live).
  const double p_min = min_probability_for(0.99, channel(0.1), 1, 100);
  CHECK(p_min == doctest::Approx(0.050008237754).epsilon(1e-9));
  const double bisected = oracles::min_probability_bisection(
      [](double p) { return arrival_direct(p, 0.1, 1, 100); }, 0.99, 1.0);
  CHECK(std::abs(p_min - bisected) <= 1e-9);

  // Inverse of the two-send enumeration example.
  CHECK(min_probability_for(0.75, channel(0.0), 1, 2) == doctest::Approx(0.5));

  CHECK_THROWS_WITH_AS(min_probability_for(0.5, channel(1.0), 3, 10),
                       doctest::Contains("channel delivers nothing"), Error);
  CHECK_THROWS_WITH_AS(min_probability_for(1.0, channel(0.1), 1, 10),
                       doctest::Contains("unattainable"), Error);
}

TEST_CASE("inverse consistency over random tuples") {
  std::mt19937_64 rng(11);
  auto uniform = [&rng] {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };
  for (int rep = 0; rep < 2000; ++rep) {
    const double requirement = uniform() * 0.999;
    const double loss = uniform() * 0.9;
    const std::uint32_t k = 1 + static_cast<std::uint32_t>(uniform() * 3);
    const std::uint64_t n = 1 + static_cast<std::uint64_t>(uniform() * 9999);
    const double p = min_probability_for(requirement, channel(loss), k, n);
    const double back = arrival_probability(p, channel(loss), k, n);
    CHECK(std::abs(back - requirement) <= 1e-9);
  }
}

TEST_CASE("feasibility_check examples") {
  // Boundary: two blocks, one clean send, both demanding a coin flip.
  const auto boundary = feasibility_check(Requirements{{0.5, 0.5}},
                                          channel(0.0), 1, 1);
  CHECK(boundary.lhs == doctest::Approx(1.0));
  CHECK(boundary.rhs == doctest::Approx(1.0));
  CHECK(boundary.feasible);
  CHECK(boundary.slack == doctest::Approx(0.0));

  // Vacuous requirements are always feasible.
  const auto vacuous = feasibility_check(Requirements{{0.0, 0.0, 0.0}},
                                         channel(0.97), 2, 5);
  CHECK(vacuous.feasible);

  const auto impossible =
      feasibility_check(Requirements{{0.9, 0.9}}, channel(0.0), 1, 1);
  CHECK(impossible.lhs == doctest::Approx(0.2));
  CHECK_FALSE(impossible.feasible);
}

TEST_CASE("values_from_requirements") {
  // Boundary case: the minima consume the whole probability budget.
  const auto boundary = values_from_requirements(Requirements{{0.5, 0.5}},
                                                 channel(0.0), 1, 1);
  CHECK(boundary.probabilities[0] == doctest::Approx(0.5));
  CHECK(boundary.probabilities[1] == doctest::Approx(0.5));

  // All-zero requirements fall back to uniform.
  const auto relaxed = values_from_requirements(Requirements{{0.0, 0.0, 0.0, 0.0}},
                                                channel(0.4), 1, 9);
  for (double p : relaxed.probabilities) CHECK(p == doctest::Approx(0.25));

  // One demanding block and one passenger.
  const ChannelParams ch = channel(0.1);
  const auto mixed =
      values_from_requirements(Requirements{{0.99, 0.0}}, ch, 1, 100);
  CHECK(mixed.probabilities[0] >= 0.050008237754 - 1e-12);
  CHECK(arrival_probability(mixed.probabilities[0], ch, 1, 100) >=
        0.99 - 1e-9);
  CHECK(mixed.probabilities[0] + mixed.probabilities[1] ==
        doctest::Approx(1.0));

  CHECK_THROWS_AS(
      values_from_requirements(Requirements{{0.9, 0.9}}, channel(0.0), 1, 1),
      InfeasibleError);
  try {
    values_from_requirements(Requirements{{0.9, 0.9}}, channel(0.0), 1, 1);
  } catch (const InfeasibleError& e) {
    CHECK(e.report().slack < 0.0);
  }
}

TEST_CASE("feasibility soundness over random requirement sets") {
  std::mt19937_64 rng(31);
  auto uniform = [&rng] {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };
  int feasible_seen = 0, infeasible_seen = 0;
  for (int rep = 0; rep < 400; ++rep) {
    const std::size_t count = 1 + static_cast<std::size_t>(uniform() * 16);
    const double loss = uniform() * 0.8;
    const std::uint64_t n = 1 + static_cast<std::uint64_t>(uniform() * 30);
    Requirements req;
    // Skew demands high on alternating reps so both outcomes occur often.
    const bool harsh = rep % 2 == 0;
    for (std::size_t i = 0; i < count; ++i) {
      const double u = uniform();
      req.required_reception.push_back(
          std::min(0.9999, harsh ? std::cbrt(u) : u * 0.7));
    }
    const ChannelParams ch = channel(loss);
    const auto verdict = feasibility_check(req, ch, 1, n);
    if (verdict.feasible) {
      ++feasible_seen;
      const auto map = values_from_requirements(req, ch, 1, n);
      double sum = 0.0;
      for (std::size_t i = 0; i < count; ++i) {
        sum += map.probabilities[i];
        CHECK(arrival_probability(map.probabilities[i], ch, 1, n) >=
              req.required_reception[i] - 1e-9);
      }
      CHECK(std::abs(sum - 1.0) <= 1e-9);
    } else {
      ++infeasible_seen;
      CHECK_THROWS_AS(values_from_requirements(req, ch, 1, n),
                      InfeasibleError);
    }
  }
  CHECK(feasible_seen > 20);
  CHECK(infeasible_seen > 20);
}
