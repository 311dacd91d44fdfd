#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "blockcast/errors.hpp"

namespace blockcast {

/// Dense block identifiers 0..count-1 for one image.
struct BlockIndexSet {
  std::size_t count = 0;
};

/// Channel parameters the sender plans against. Loss is i.i.d. per packet.
struct ChannelParams {
  double loss_rate = 0.0;         // per-packet loss probability in [0,1]
  std::uint32_t packet_size = 0;  // datagram payload bytes, >= 1
};

/// Byte-level sizing of one transmission.
struct SizingParams {
  std::uint32_t block_size = 0;    // bytes per block
  std::uint64_t original_size = 0; // bytes of the whole image, = count * block_size
  double transmit_size = 0.0;      // byte budget for the stochastic transmission
};

/// Per-block importance weights and the transmission probabilities derived
/// from them. probabilities[i] = values[i] / sum(values), so the
/// probabilities always sum to 1.
struct ValueMap {
  std::vector<double> values;
  std::vector<double> probabilities;

  std::size_t size() const { return values.size(); }
};

/// Per-block lower bounds on the arrival probability. Each entry must lie in
/// [0,1); a requirement of exactly 1 is unattainable with finitely many
/// lossy transmissions.
struct Requirements {
  std::vector<double> required_reception;

  std::size_t size() const { return required_reception.size(); }
};

/// Outcome of the requirement feasibility test. The requirement set is
/// satisfiable iff lhs >= rhs; slack = lhs - rhs.
struct FeasibilityReport {
  bool feasible = false;
  double slack = 0.0;
  double lhs = 0.0;  // sum_i (1 - R_i)^(1/N)
  double rhs = 0.0;  // count - 1 + loss^K
};

class InfeasibleError : public Error {
 public:
  InfeasibleError(const FeasibilityReport& report, const std::string& what)
      : Error(what), report_(report) {}
  const FeasibilityReport& report() const { return report_; }

 private:
  FeasibilityReport report_;
};

/// Everything needed to execute one stochastic transmission: channel and
/// sizing inputs, the value map, the derived totals, and the per-block
/// expectations and arrival probabilities.
struct TransmissionPlan {
  ChannelParams channel;
  SizingParams sizing;
  ValueMap value_map;
  std::uint64_t total_transmissions = 0;  // N, number of block sends
  std::uint32_t fragments_per_block = 0;  // K = block_size / packet_size
  std::vector<double> expected_counts;    // probabilities[i] * N
  std::vector<double> arrival_probs;      // P(block i received at least once)

  std::size_t block_count() const { return value_map.size(); }
};

/// Normalizes non-negative weights into a ValueMap. Order is preserved.
/// Throws on a negative entry or when every entry is zero.
ValueMap normalize_values(std::span<const double> values);

/// Builds a value map from per-block appearance counts. Each value is
/// max(frequency, floor_fraction * max frequency), so zero-count blocks keep
/// a small transmit probability when floor_fraction > 0.
ValueMap values_from_heatmap(std::span<const std::uint64_t> frequencies,
                             double floor_fraction);

/// Probability that one block attempt (all of its fragments) survives the
/// channel: 1 - loss^K. This is the block-atomic loss model; the per-packet
/// alternative (1 - loss)^K coincides with it only at K = 1.
double block_success_prob(const ChannelParams& channel,
                          std::uint32_t fragments_per_block);

/// Probability that a block with transmit probability p is received at least
/// once over N independent block sends:
///   1 - ((1 - p) + p * loss^K)^N.
/// Non-decreasing in p and N, non-increasing in loss. Values of p above 1
/// (as produced by min_probability_for on over-constrained inputs) are
/// evaluated formally with the same expression.
double arrival_probability(double transmit_prob, const ChannelParams& channel,
                           std::uint32_t fragments_per_block,
                           std::uint64_t total_transmissions);

/// Smallest transmit probability that achieves arrival probability
/// `requirement`:
///   (1 - (1 - R)^(1/N)) / (1 - loss^K).
/// A requirement of 0 needs no transmissions and returns 0 for any channel.
double min_probability_for(double requirement, const ChannelParams& channel,
                           std::uint32_t fragments_per_block,
                           std::uint64_t total_transmissions);

/// Tests whether any value map can satisfy all reception requirements:
/// feasible iff sum_i (1 - R_i)^(1/N) >= count - 1 + loss^K.
FeasibilityReport feasibility_check(const Requirements& requirements,
                                    const ChannelParams& channel,
                                    std::uint32_t fragments_per_block,
                                    std::uint64_t total_transmissions);

/// Solves for a value map meeting every requirement. Each block first gets
/// its minimum probability; leftover probability mass is then distributed
/// proportionally to those minima (uniformly when all minima are zero).
/// Throws InfeasibleError when feasibility_check fails.
ValueMap values_from_requirements(const Requirements& requirements,
                                  const ChannelParams& channel,
                                  std::uint32_t fragments_per_block,
                                  std::uint64_t total_transmissions);

/// Derives the full transmission plan from channel, sizing and values.
/// N = round(count * transmit_size / original_size), K = block/packet size.
/// Throws when the sizes are inconsistent, indivisible, or the budget rounds
/// to zero sends.
TransmissionPlan plan_transmission(const ChannelParams& channel,
                                   const SizingParams& sizing,
                                   const ValueMap& value_map,
                                   const BlockIndexSet& blocks);

}  // namespace blockcast
