#include "blockcast/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace blockcast {

namespace {

void check_channel(const ChannelParams& channel) {
  if (!(channel.loss_rate >= 0.0 && channel.loss_rate <= 1.0)) {
    throw Error("loss rate must lie in [0,1]");
  }
}

// (1 - R)^(1/N), evaluated as exp(log1p(-R)/N) to stay accurate for R near 1
// and for large N.
double nth_root_of_complement(double requirement, std::uint64_t n) {
  return std::exp(std::log1p(-requirement) / static_cast<double>(n));
}

}  // namespace

ValueMap normalize_values(std::span<const double> values) {
  if (values.empty()) {
    throw Error("empty value map");
  }
  double sum = 0.0;
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error("negative value");
    }
    sum += v;
  }
  if (sum <= 0.0) {
    throw Error("degenerate value map: all values are zero");
  }
  ValueMap map;
  map.values.assign(values.begin(), values.end());
  map.probabilities.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    map.probabilities[i] = values[i] / sum;
  }
  return map;
}

ValueMap values_from_heatmap(std::span<const std::uint64_t> frequencies,
                             double floor_fraction) {
  if (frequencies.empty()) {
    throw Error("empty heatmap");
  }
  if (!(floor_fraction >= 0.0)) {
    throw Error("heatmap floor must be non-negative");
  }
  const std::uint64_t max_freq =
      *std::max_element(frequencies.begin(), frequencies.end());
  const double floor_value = floor_fraction * static_cast<double>(max_freq);
  std::vector<double> values(frequencies.size());
  for (std::size_t i = 0; i < frequencies.size(); ++i) {
    values[i] = std::max(static_cast<double>(frequencies[i]), floor_value);
  }
  return normalize_values(values);
}

double block_success_prob(const ChannelParams& channel,
                          std::uint32_t fragments_per_block) {
  check_channel(channel);
  if (fragments_per_block < 1) {
    throw Error("fragments per block must be >= 1");
  }
  return 1.0 - std::pow(channel.loss_rate,
                        static_cast<double>(fragments_per_block));
}

double arrival_probability(double transmit_prob, const ChannelParams& channel,
                           std::uint32_t fragments_per_block,
                           std::uint64_t total_transmissions) {
  if (!(transmit_prob >= 0.0) || !std::isfinite(transmit_prob)) {
    throw Error("transmit probability must be non-negative");
  }
  if (total_transmissions < 1) {
    throw Error("total transmissions must be >= 1");
  }
  const double success = block_success_prob(channel, fragments_per_block);
  const double per_send = transmit_prob * success;
  if (per_send >= 1.0) {
    return 1.0;
  }
  // 1 - (1 - p*s)^N, via expm1/log1p so tiny probabilities keep precision.
  return -std::expm1(static_cast<double>(total_transmissions) *
                     std::log1p(-per_send));
}

double min_probability_for(double requirement, const ChannelParams& channel,
                           std::uint32_t fragments_per_block,
                           std::uint64_t total_transmissions) {
  if (!(requirement >= 0.0)) {
    throw Error("requirement must be non-negative");
  }
  if (requirement == 0.0) {
    return 0.0;  // nothing demanded, nothing needed
  }
  if (requirement >= 1.0) {
    throw Error("unattainable requirement: required reception must be < 1");
  }
  if (total_transmissions < 1) {
    throw Error("total transmissions must be >= 1");
  }
  const double success = block_success_prob(channel, fragments_per_block);
  if (success <= 0.0) {
    throw Error("channel delivers nothing: loss^K = 1");
  }
  const double deficit =
      -std::expm1(std::log1p(-requirement) /
                  static_cast<double>(total_transmissions));
  return deficit / success;
}

FeasibilityReport feasibility_check(const Requirements& requirements,
                                    const ChannelParams& channel,
                                    std::uint32_t fragments_per_block,
                                    std::uint64_t total_transmissions) {
  if (requirements.size() == 0) {
    throw Error("empty requirements");
  }
  if (total_transmissions < 1) {
    throw Error("total transmissions must be >= 1");
  }
  check_channel(channel);
  if (fragments_per_block < 1) {
    throw Error("fragments per block must be >= 1");
  }
  FeasibilityReport report;
  for (double r : requirements.required_reception) {
    if (!(r >= 0.0 && r < 1.0)) {
      throw Error("each requirement must lie in [0,1)");
    }
    report.lhs += nth_root_of_complement(r, total_transmissions);
  }
  report.rhs = static_cast<double>(requirements.size()) - 1.0 +
               std::pow(channel.loss_rate,
                        static_cast<double>(fragments_per_block));
  report.slack = report.lhs - report.rhs;
  report.feasible = report.lhs >= report.rhs;
  return report;
}

ValueMap values_from_requirements(const Requirements& requirements,
                                  const ChannelParams& channel,
                                  std::uint32_t fragments_per_block,
                                  std::uint64_t total_transmissions) {
  const FeasibilityReport report = feasibility_check(
      requirements, channel, fragments_per_block, total_transmissions);
  if (!report.feasible) {
    throw InfeasibleError(report, "infeasible requirements: slack " +
                                      std::to_string(report.slack));
  }
  const std::size_t count = requirements.size();
  std::vector<double> minima(count);
  double mass = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    minima[i] = min_probability_for(requirements.required_reception[i],
                                    channel, fragments_per_block,
                                    total_transmissions);
    mass += minima[i];
  }
  std::vector<double> probs(count);
  if (mass <= 0.0) {
    // No block demanded anything; fall back to the uniform map.
    std::fill(probs.begin(), probs.end(), 1.0 / static_cast<double>(count));
  } else {
    // Scaling by 1/mass hands the surplus (1 - mass) to each block in
    // proportion to its minimum, so every block keeps p >= minimum.
    for (std::size_t i = 0; i < count; ++i) {
      probs[i] = minima[i] / mass;
    }
  }
  return normalize_values(probs);
}

TransmissionPlan plan_transmission(const ChannelParams& channel,
                                   const SizingParams& sizing,
                                   const ValueMap& value_map,
                                   const BlockIndexSet& blocks) {
  check_channel(channel);
  if (blocks.count < 1) {
    throw Error("block set must contain at least one block");
  }
  if (value_map.size() != blocks.count) {
    throw Error("value map size does not match block count");
  }
  if (channel.packet_size < 1) {
    throw Error("packet size must be >= 1");
  }
  if (sizing.block_size < 1) {
    throw Error("block size must be >= 1");
  }
  if (sizing.original_size !=
      static_cast<std::uint64_t>(blocks.count) * sizing.block_size) {
    throw Error("original size must equal block count * block size");
  }
  if (!(sizing.transmit_size > 0.0)) {
    throw Error("empty budget: transmit size must be positive");
  }
  if (sizing.block_size % channel.packet_size != 0) {
    throw Error("block size must be an integer multiple of packet size");
  }

  TransmissionPlan plan;
  plan.channel = channel;
  plan.sizing = sizing;
  plan.value_map = value_map;
  plan.fragments_per_block = sizing.block_size / channel.packet_size;

  const double n_exact = static_cast<double>(blocks.count) *
                         sizing.transmit_size /
                         static_cast<double>(sizing.original_size);
  const long long n = std::llround(n_exact);
  if (n < 1) {
    throw Error("empty budget: transmit size rounds to zero sends");
  }
  plan.total_transmissions = static_cast<std::uint64_t>(n);

  plan.expected_counts.resize(blocks.count);
  plan.arrival_probs.resize(blocks.count);
  for (std::size_t i = 0; i < blocks.count; ++i) {
    const double p = value_map.probabilities[i];
    plan.expected_counts[i] = p * static_cast<double>(plan.total_transmissions);
    plan.arrival_probs[i] = arrival_probability(
        p, channel, plan.fragments_per_block, plan.total_transmissions);
  }
  return plan;
}

}  // namespace blockcast
