#include "blockcast/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <mutex>
#include <numeric>
#include <thread>

#include "blockcast/csv.hpp"

namespace blockcast {

namespace {

std::uint64_t splitmix(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double standard_error(double mean, std::uint64_t n) {
  if (n < 1) return 0.0;
  return std::sqrt(std::max(mean * (1.0 - mean), 0.0) /
                   static_cast<double>(n));
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                          std::uint64_t b, std::uint64_t c) {
  std::uint64_t state = master;
  std::uint64_t out = splitmix(state);
  state ^= a;
  out ^= splitmix(state);
  state ^= b;
  out ^= splitmix(state);
  state ^= c;
  out ^= splitmix(state);
  return out;
}

std::uint64_t double_bits(double v) { return std::bit_cast<std::uint64_t>(v); }

ImageBuffer synthetic_image(std::uint32_t width, std::uint32_t height,
                            std::uint32_t channels) {
  ImageBuffer image;
  image.width = width;
  image.height = height;
  image.channels = channels;
  image.pixels.resize(image.byte_size());
  std::size_t i = 0;
  for (std::uint32_t y = 0; y < height; ++y) {
    for (std::uint32_t x = 0; x < width; ++x) {
      for (std::uint32_t c = 0; c < channels; ++c) {
        image.pixels[i++] =
            static_cast<std::uint8_t>(x * 7u + y * 13u + c * 101u);
      }
    }
  }
  return image;
}

std::vector<std::uint64_t> synthetic_heatmap(const BlockGrid& grid,
                                             double sigma, double peak,
                                             std::uint64_t cap) {
  if (!(sigma > 0.0) || !(peak > 0.0)) {
    throw Error("heatmap sigma and peak must be positive");
  }
  const double cx = (static_cast<double>(grid.cols()) - 1.0) / 2.0;
  const double cy = (static_cast<double>(grid.rows()) - 1.0) / 2.0;
  std::vector<std::uint64_t> counts(grid.count());
  for (std::uint32_t y = 0; y < grid.rows(); ++y) {
    for (std::uint32_t x = 0; x < grid.cols(); ++x) {
      const double dx = static_cast<double>(x) - cx;
      const double dy = static_cast<double>(y) - cy;
      const double g =
          peak * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      std::uint64_t count = static_cast<std::uint64_t>(std::llround(g));
      if (cap > 0 && count > cap) count = cap;
      counts[static_cast<std::size_t>(y) * grid.cols() + x] = count;
    }
  }
  return counts;
}

std::vector<std::uint32_t> top_fraction_region(const ValueMap& value_map,
                                               double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error("region fraction must lie in (0,1]");
  }
  const std::size_t count = value_map.size();
  const std::size_t take = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::ceil(fraction * static_cast<double>(count))));
  std::vector<std::uint32_t> ids(count);
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     return value_map.values[a] > value_map.values[b];
                   });
  ids.resize(take);
  std::sort(ids.begin(), ids.end());
  return ids;
}

double arrival_probability_fragment_semantics(
    double transmit_prob, double loss_rate, std::uint32_t fragments_per_block,
    std::uint64_t total_transmissions) {
  const double success =
      std::pow(1.0 - loss_rate, static_cast<double>(fragments_per_block));
  const double per_send = transmit_prob * success;
  if (per_send >= 1.0) return 1.0;
  return -std::expm1(static_cast<double>(total_transmissions) *
                     std::log1p(-per_send));
}

namespace {

struct CellResult {
  std::vector<TrialRow> rows;
  CellStats stats;
  std::vector<BlockStat> blocks;
};

struct CellTask {
  double loss = 0.0;
  double ratio = 0.0;
  std::uint64_t index = 0;  // stable coordinate for seed derivation
};

// Runs one protocol session against an in-process link; restarts with a
// fresh derived seed when the lossy channel defeats the agreement phase.
TrialRow run_trial(const ExperimentSpec& spec, const TransmissionPlan& plan,
                   const Tiling& tiling,
                   const std::vector<std::uint32_t>& region,
                   const CellTask& cell, std::uint32_t trial,
                   std::vector<std::uint32_t>& arrivals,
                   std::string* report_out) {
  const std::uint64_t trial_tag =
      derive_seed(spec.seed, double_bits(cell.loss), double_bits(cell.ratio),
                  trial);
  for (std::uint32_t restart = 0;; ++restart) {
    if (restart > 200) {
      throw Error("agreement kept failing after 200 session restarts");
    }
    ChannelConfig config;
    config.mode = spec.channel_mode;
    config.loss_rate = cell.loss;
    config.seed = derive_seed(trial_tag, 0xC0FFEE, restart);
    config.delay_us = spec.delay_us;
    config.fragments_per_block = plan.fragments_per_block;
    SimLink link(config);

    Receiver receiver;
    link.set_b_sink([&receiver, &link](Received&& r) {
      if (auto reply = receiver.on_datagram(r.bytes, r.at)) {
        link.endpoint_b().send(*reply, r.at);
      }
    });

    SenderOptions options;
    options.send_interval_us = spec.send_interval_us;
    options.seed = derive_seed(trial_tag, 0x5A3D, restart);
    Sender sender(plan, tiling, options);

    VirtualClock clock;
    try {
      sender.run_agreement(link.endpoint_a(), clock);
    } catch (const AgreementFailed&) {
      continue;
    }
    const SendLog& log = sender.run_block_phase(link.endpoint_a(), clock);
    clock.wait_until(receiver.deadline());
    Receiver::Result result = receiver.finalize(clock.now());

    TrialRow row;
    row.loss = cell.loss;
    row.ratio = cell.ratio;
    row.trial = trial;
    row.unique_blocks = result.report.unique_blocks;
    row.filling_rate = pixel_filling_rate(result.image);
    const RegionCoverage coverage = region_coverage(result.image, region);
    row.region_coverage = coverage.fraction;
    row.full_region = coverage.full;
    const SimLink::Stats stats = link.stats();
    row.packets_sent = stats.sent_ab;
    row.duration_us =
        log.entries.empty() ? 0 : log.phase_end - log.phase_start;
    row.agreement_restarts = restart;

    for (std::size_t i = 0; i < result.report.block_received.size(); ++i) {
      if (result.report.block_received[i]) ++arrivals[i];
    }
    if (trial == 0) {
      // Honesty check on the full stack: a received block's pixels must be
      // the source bytes verbatim.
      const Tiling echo = tile(result.image.image, tiling.grid.block_width,
                               tiling.grid.block_height);
      for (const BlockPayload& payload : tiling.blocks) {
        if (!result.report.block_received[payload.block_id]) continue;
        if (echo.blocks[payload.block_id].bytes != payload.bytes) {
          throw Error("received block bytes differ from the source image");
        }
      }
    }
    if (report_out != nullptr) {
      *report_out = render_reception_report(result.report);
    }
    return row;
  }
}

CellResult run_cell(const ExperimentSpec& spec, const Tiling& tiling,
                    const std::vector<std::uint32_t>& region,
                    const CellTask& cell) {
  const BlockGrid& grid = tiling.grid;
  ChannelParams channel;
  channel.loss_rate = cell.loss;
  channel.packet_size =
      spec.packet_size == 0 ? grid.block_bytes() : spec.packet_size;
  SizingParams sizing;
  sizing.block_size = grid.block_bytes();
  sizing.original_size =
      static_cast<std::uint64_t>(grid.count()) * grid.block_bytes();
  sizing.transmit_size =
      cell.ratio * static_cast<double>(sizing.original_size);
  const TransmissionPlan plan = plan_transmission(
      channel, sizing, spec.value_map, BlockIndexSet{grid.count()});

  CellResult result;
  result.rows.reserve(spec.trials);
  std::vector<std::uint32_t> arrivals(grid.count(), 0);
  for (std::uint32_t trial = 0; trial < spec.trials; ++trial) {
    std::string report_text;
    std::string* report_ptr =
        spec.dump_reports_dir.empty() ? nullptr : &report_text;
    result.rows.push_back(run_trial(spec, plan, tiling, region, cell, trial,
                                    arrivals, report_ptr));
    if (report_ptr != nullptr) {
      const std::string name = spec.dump_reports_dir + "/report_L" +
                               format_double(cell.loss) + "_R" +
                               format_double(cell.ratio) + "_T" +
                               std::to_string(trial) + ".csv";
      write_text_file(name, report_text);
    }
  }

  CellStats& stats = result.stats;
  stats.loss = cell.loss;
  stats.ratio = cell.ratio;
  stats.trials = spec.trials;
  stats.total_transmissions = plan.total_transmissions;
  for (const TrialRow& row : result.rows) {
    stats.mean_filling += row.filling_rate;
    stats.mean_coverage += row.region_coverage;
    stats.full_region_rate += row.full_region ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(spec.trials);
  stats.mean_filling /= n;
  stats.mean_coverage /= n;
  stats.full_region_rate /= n;
  // Filling/coverage are means of [0,1] variables; the Bernoulli bound is a
  // conservative standard error for them.
  stats.se_filling = standard_error(stats.mean_filling, spec.trials);
  stats.se_coverage = standard_error(stats.mean_coverage, spec.trials);
  stats.se_full_region = standard_error(stats.full_region_rate, spec.trials);

  stats.analytic_full_region = 1.0;
  result.blocks.reserve(grid.count());
  for (std::uint32_t id = 0; id < grid.count(); ++id) {
    BlockStat b;
    b.loss = cell.loss;
    b.ratio = cell.ratio;
    b.block_id = id;
    b.probability = spec.value_map.probabilities[id];
    b.rho_block_model = plan.arrival_probs[id];
    b.rho_packet_model = arrival_probability_fragment_semantics(
        b.probability, cell.loss, plan.fragments_per_block,
        plan.total_transmissions);
    b.empirical = static_cast<double>(arrivals[id]) / n;
    result.blocks.push_back(b);
  }
  for (std::uint32_t id : region) {
    stats.analytic_full_region *= spec.channel_mode == ChannelMode::SimBlock
                                      ? result.blocks[id].rho_block_model
                                      : result.blocks[id].rho_packet_model;
  }
  return result;
}

}  // namespace

SweepResult run_sweep(const ExperimentSpec& spec) {
  if (spec.trials < 1) {
    throw Error("trials must be >= 1");
  }
  if (spec.loss_rates.empty() || spec.ratios.empty()) {
    throw Error("sweep needs at least one loss rate and one ratio");
  }
  if (spec.channel_mode != ChannelMode::SimPacket &&
      spec.channel_mode != ChannelMode::SimBlock) {
    throw Error("sweeps run on simulated channels only");
  }

  const Tiling tiling = tile(spec.image, spec.block_width, spec.block_height);
  if (spec.value_map.size() != tiling.grid.count()) {
    throw Error("value map size does not match the block grid");
  }
  std::vector<std::uint32_t> region = spec.region;
  if (region.empty()) {
    region = top_fraction_region(spec.value_map, 0.1);
  } else {
    for (std::uint32_t id : region) {
      if (id >= tiling.grid.count()) {
        throw Error("region block id out of range");
      }
    }
  }

  std::vector<CellTask> cells;
  for (std::size_t li = 0; li < spec.loss_rates.size(); ++li) {
    for (std::size_t ri = 0; ri < spec.ratios.size(); ++ri) {
      cells.push_back({spec.loss_rates[li], spec.ratios[ri],
                       li * spec.ratios.size() + ri});
    }
  }

  unsigned jobs = spec.jobs == 0 ? std::thread::hardware_concurrency()
                                 : spec.jobs;
  if (jobs == 0) jobs = 1;
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(cells.size()));

  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (unsigned w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t index = next.fetch_add(1);
        if (index >= cells.size()) return;
        try {
          results[index] = run_cell(spec, tiling, region, cells[index]);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (std::thread& worker : workers) worker.join();
  if (failure) std::rethrow_exception(failure);

  SweepResult sweep;
  for (CellResult& cell : results) {
    sweep.rows.insert(sweep.rows.end(), cell.rows.begin(), cell.rows.end());
    sweep.cells.push_back(cell.stats);
    sweep.blocks.insert(sweep.blocks.end(), cell.blocks.begin(),
                        cell.blocks.end());
  }
  return sweep;
}

}  // namespace blockcast
