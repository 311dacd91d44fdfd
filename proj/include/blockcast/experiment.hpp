#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blockcast/channel.hpp"
#include "blockcast/image.hpp"
#include "blockcast/model.hpp"
#include "blockcast/protocol.hpp"

namespace blockcast {

/// Stable seed derivation (splitmix64 chain over the arguments), so every
/// sweep cell and trial owns an independent, reproducible stream.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                          std::uint64_t b = 0, std::uint64_t c = 0);

/// Bit pattern of a double, for hashing sweep coordinates.
std::uint64_t double_bits(double v);

/// Deterministic test pattern image.
ImageBuffer synthetic_image(std::uint32_t width, std::uint32_t height,
                            std::uint32_t channels);

/// Per-block appearance counts shaped as a centered 2-D Gaussian over the
/// grid: round(peak * exp(-d^2 / (2 sigma^2))), saturated at `cap`. A cap
/// well below the peak produces a plateau of equally hot central blocks,
/// like a target that dwells inside a bounded zone. cap = 0 disables
/// saturation.
std::vector<std::uint64_t> synthetic_heatmap(const BlockGrid& grid,
                                             double sigma, double peak,
                                             std::uint64_t cap);

/// Ids of the ceil(fraction * count) highest-valued blocks, ties broken by
/// lower id. fraction 0.1 gives the top decile.
std::vector<std::uint32_t> top_fraction_region(const ValueMap& value_map,
                                               double fraction);

/// Arrival probability under per-packet loss semantics, where a block needs
/// all K fragments: 1 - (1 - p (1-loss)^K)^N. Reported alongside the
/// block-atomic model so the two channel readings can be compared.
double arrival_probability_fragment_semantics(double transmit_prob,
                                              double loss_rate,
                                              std::uint32_t fragments_per_block,
                                              std::uint64_t total_transmissions);

/// One Monte Carlo sweep: full in-process protocol runs (agreement + block
/// phase over a simulated channel) for every loss x ratio cell.
struct ExperimentSpec {
  ImageBuffer image;
  std::uint32_t block_width = 8;
  std::uint32_t block_height = 8;
  ValueMap value_map;                     // one entry per grid block
  std::vector<std::uint32_t> region;      // empty: top decile of value_map
  ChannelMode channel_mode = ChannelMode::SimBlock;
  std::uint32_t packet_size = 0;          // 0: one packet per block
  std::vector<double> loss_rates{0.0};
  std::vector<double> ratios{1.0};
  std::uint32_t trials = 1000;
  std::uint64_t seed = 1;
  std::uint32_t send_interval_us = 1000;  // virtual time
  std::uint32_t delay_us = 0;
  unsigned jobs = 0;                      // 0: hardware concurrency
  std::string dump_reports_dir;           // when set, per-trial report CSVs
};

struct TrialRow {
  double loss = 0.0;
  double ratio = 0.0;
  std::uint32_t trial = 0;
  std::uint64_t unique_blocks = 0;
  double filling_rate = 0.0;
  double region_coverage = 0.0;
  bool full_region = false;
  std::uint64_t packets_sent = 0;  // datagrams from the sender, all phases
  Micros duration_us = 0;          // block phase, first to last send
  std::uint32_t agreement_restarts = 0;
};

struct CellStats {
  double loss = 0.0;
  double ratio = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t total_transmissions = 0;  // N for this cell
  double mean_filling = 0.0, se_filling = 0.0;
  double mean_coverage = 0.0, se_coverage = 0.0;
  double full_region_rate = 0.0, se_full_region = 0.0;
  // Independence product of the per-block arrival model over the region,
  // using the semantics of the configured channel mode.
  double analytic_full_region = 0.0;
};

struct BlockStat {
  double loss = 0.0;
  double ratio = 0.0;
  std::uint32_t block_id = 0;
  double probability = 0.0;
  double rho_block_model = 0.0;   // 1 - ((1-p) + p loss^K)^N
  double rho_packet_model = 0.0;  // 1 - (1 - p (1-loss)^K)^N
  double empirical = 0.0;         // arrivals / trials
};

struct SweepResult {
  std::vector<TrialRow> rows;     // ordered by (loss, ratio, trial)
  std::vector<CellStats> cells;   // ordered by (loss, ratio)
  std::vector<BlockStat> blocks;  // ordered by (loss, ratio, block)
};

SweepResult run_sweep(const ExperimentSpec& spec);

}  // namespace blockcast
