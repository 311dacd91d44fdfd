// blockcast: stochastic image transmission over lossy datagram channels.
//
// Subcommands:
//   plan      derive N, K, per-block probabilities and arrival model
//   send      transmit an image (UDP, or an in-process simulated loopback)
//   recv      receive an image over UDP and write the partial result
//   simulate  Monte Carlo sweep over loss rates and byte budgets
//   metrics   recompute metrics from reception-report artifacts
//   synth     generate a synthetic test image / heatmap / region

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "blockcast/csv.hpp"
#include "blockcast/experiment.hpp"

namespace fs = std::filesystem;
using namespace blockcast;

namespace {

struct BlockDims {
  std::uint32_t width = 8;
  std::uint32_t height = 8;
};

BlockDims parse_block_dims(const std::string& text) {
  BlockDims dims;
  if (std::sscanf(text.c_str(), "%ux%u", &dims.width, &dims.height) != 2 ||
      dims.width == 0 || dims.height == 0) {
    throw CLI::ValidationError("--block", "expected WxH, e.g. 8x8");
  }
  return dims;
}

ChannelMode parse_mode(const std::string& name) {
  if (name == "udp") return ChannelMode::Udp;
  if (name == "simpacket") return ChannelMode::SimPacket;
  if (name == "simblock") return ChannelMode::SimBlock;
  if (name == "scripted") return ChannelMode::Scripted;
  throw CLI::ValidationError("--channel",
                             "must be udp|simpacket|simblock|scripted");
}

// Drop scripts: one 1-based datagram sequence number or "a-b" range per
// line. Sequence 1 is the agreement request.
std::vector<std::uint64_t> read_drop_script(const std::string& path) {
  std::vector<std::uint64_t> drops;
  const std::string text = read_text_file(path);
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::uint64_t lo = 0, hi = 0;
    if (std::sscanf(line.c_str(), "%lu-%lu", &lo, &hi) == 2) {
      for (std::uint64_t s = lo; s <= hi; ++s) drops.push_back(s);
    } else if (std::sscanf(line.c_str(), "%lu", &lo) == 1) {
      drops.push_back(lo);
    } else {
      throw Error("bad drop-script line: " + line);
    }
  }
  return drops;
}

struct ValueFlags {
  std::string values_csv;
  std::string heatmap_csv;
  std::string requirements_csv;
  double heatmap_floor = 0.01;
};

struct ResolvedValues {
  ValueMap map;
  std::optional<FeasibilityReport> feasibility;
};

// Requirements need the cell's N and K, so resolution happens after the
// grid and budget are known.
ResolvedValues resolve_values(const ValueFlags& flags, std::size_t count,
                              const ChannelParams& channel, std::uint32_t k,
                              std::uint64_t n) {
  ResolvedValues out;
  if (!flags.values_csv.empty()) {
    const auto values = read_indexed_doubles(flags.values_csv);
    if (values.size() != count) {
      throw Error("value CSV has " + std::to_string(values.size()) +
                  " rows, grid has " + std::to_string(count) + " blocks");
    }
    out.map = normalize_values(values);
  } else if (!flags.heatmap_csv.empty()) {
    const auto counts = read_indexed_counts(flags.heatmap_csv);
    if (counts.size() != count) {
      throw Error("heatmap CSV has " + std::to_string(counts.size()) +
                  " rows, grid has " + std::to_string(count) + " blocks");
    }
    out.map = values_from_heatmap(counts, flags.heatmap_floor);
  } else if (!flags.requirements_csv.empty()) {
    Requirements requirements;
    requirements.required_reception =
        read_indexed_doubles(flags.requirements_csv);
    if (requirements.size() != count) {
      throw Error("requirements CSV has " +
                  std::to_string(requirements.size()) + " rows, grid has " +
                  std::to_string(count) + " blocks");
    }
    out.feasibility = feasibility_check(requirements, channel, k, n);
    // Throws InfeasibleError with the report when the check fails.
    out.map = values_from_requirements(requirements, channel, k, n);
  } else {
    out.map = normalize_values(std::vector<double>(count, 1.0));
  }
  return out;
}

std::uint64_t budget_sends(std::size_t count, double ratio) {
  const long long n = std::llround(static_cast<double>(count) * ratio);
  return n < 1 ? 0 : static_cast<std::uint64_t>(n);
}

void print_feasibility(const FeasibilityReport& report) {
  std::cout << (report.feasible ? "feasible" : "INFEASIBLE")
            << "  lhs=" << format_double(report.lhs)
            << " rhs=" << format_double(report.rhs)
            << " slack=" << format_double(report.slack) << "\n";
}

// ---------------------------------------------------------------- plan ----

struct PlanArgs {
  std::string image_path;
  std::string block = "8x8";
  ValueFlags values;
  double loss = 0.0;
  double ratio = 1.0;
  std::uint32_t packet_size = 0;
  std::string out_dir = ".";
};

int cmd_plan(const PlanArgs& args) {
  const ImageBuffer image = load_image_file(args.image_path);
  const BlockDims dims = parse_block_dims(args.block);
  const BlockGrid grid = make_grid(image, dims.width, dims.height);

  ChannelParams channel;
  channel.loss_rate = args.loss;
  channel.packet_size =
      args.packet_size == 0 ? grid.block_bytes() : args.packet_size;
  if (grid.block_bytes() % channel.packet_size != 0) {
    throw Error("packet size must divide the block size");
  }
  const std::uint32_t k = grid.block_bytes() / channel.packet_size;
  const std::uint64_t n = budget_sends(grid.count(), args.ratio);
  if (n == 0) {
    throw Error("empty budget: ratio rounds to zero sends");
  }

  const ResolvedValues resolved =
      resolve_values(args.values, grid.count(), channel, k, n);

  SizingParams sizing;
  sizing.block_size = grid.block_bytes();
  sizing.original_size =
      static_cast<std::uint64_t>(grid.count()) * grid.block_bytes();
  sizing.transmit_size =
      args.ratio * static_cast<double>(sizing.original_size);
  const TransmissionPlan plan =
      plan_transmission(channel, sizing, resolved.map,
                        BlockIndexSet{grid.count()});

  fs::create_directories(args.out_dir);
  const FeasibilityReport* feasibility =
      resolved.feasibility ? &*resolved.feasibility : nullptr;
  write_text_file(args.out_dir + "/plan.txt",
                  render_plan_summary(plan, feasibility));
  write_text_file(args.out_dir + "/plan_blocks.csv", render_plan_blocks(plan));

  std::cout << "blocks=" << grid.count() << " block_bytes="
            << grid.block_bytes() << " K=" << plan.fragments_per_block
            << " N=" << plan.total_transmissions << "\n";
  if (feasibility != nullptr) {
    print_feasibility(*feasibility);
  }
  std::cout << "wrote " << args.out_dir << "/plan.txt and plan_blocks.csv\n";
  return 0;
}

// ---------------------------------------------------------------- send ----

struct SendArgs {
  std::string image_path;
  std::string block = "8x8";
  ValueFlags values;
  double loss = 0.0;
  double ratio = 1.0;
  std::uint32_t packet_size = 0;
  std::string channel_name = "udp";
  std::string peer;
  std::uint16_t bind_port = 0;
  std::uint32_t interval_us = 1000;
  std::uint32_t delay_us = 0;
  std::uint64_t seed = 1;
  std::string drop_script;
  std::string send_log;
  std::string out_image;   // loopback modes: received image
  std::string out_report;  // loopback modes: reception report
};

std::pair<std::string, std::uint16_t> parse_host_port(const std::string& text) {
  const std::size_t colon = text.rfind(':');
  if (colon == std::string::npos || colon + 1 >= text.size()) {
    throw Error("expected host:port, got '" + text + "'");
  }
  return {text.substr(0, colon),
          static_cast<std::uint16_t>(std::stoul(text.substr(colon + 1)))};
}

int cmd_send(const SendArgs& args) {
  const ImageBuffer image = load_image_file(args.image_path);
  const BlockDims dims = parse_block_dims(args.block);
  const Tiling tiling = tile(image, dims.width, dims.height);
  const BlockGrid& grid = tiling.grid;

  ChannelParams channel;
  channel.loss_rate = args.loss;
  channel.packet_size =
      args.packet_size == 0 ? grid.block_bytes() : args.packet_size;
  const std::uint32_t k = grid.block_bytes() / channel.packet_size;
  const std::uint64_t n = budget_sends(grid.count(), args.ratio);
  if (n == 0) {
    throw Error("empty budget: ratio rounds to zero sends");
  }
  const ResolvedValues resolved =
      resolve_values(args.values, grid.count(), channel, k, n);

  SizingParams sizing;
  sizing.block_size = grid.block_bytes();
  sizing.original_size =
      static_cast<std::uint64_t>(grid.count()) * grid.block_bytes();
  sizing.transmit_size =
      args.ratio * static_cast<double>(sizing.original_size);
  const TransmissionPlan plan = plan_transmission(
      channel, sizing, resolved.map, BlockIndexSet{grid.count()});

  SenderOptions options;
  options.send_interval_us = args.interval_us;
  options.seed = args.seed;
  Sender sender(plan, tiling, options);

  const ChannelMode mode = parse_mode(args.channel_name);
  if (mode == ChannelMode::Udp) {
    if (args.peer.empty()) {
      throw Error("--peer host:port is required for UDP");
    }
    const auto [host, port] = parse_host_port(args.peer);
    UdpTransport transport("", args.bind_port);
    transport.connect_peer(host, port);
    SteadyClock clock;
    const AgreementInfo info = sender.run_agreement(transport, clock);
    std::cout << "session " << info.session_id << " established after "
              << info.requests_sent << " request(s)\n";
    const SendLog& log = sender.run_block_phase(transport, clock);
    std::cout << "sent " << log.entries.size() << " transmissions, "
              << log.data_packets_sent << " data packets, "
              << (log.phase_end - log.phase_start) << " us\n";
    if (!args.send_log.empty()) {
      write_text_file(args.send_log, render_send_log(log));
    }
    return 0;
  }

  // In-process loopback over a simulated channel: runs the receiver too.
  ChannelConfig config;
  config.mode = mode;
  config.loss_rate = args.loss;
  config.seed = args.seed;
  config.delay_us = args.delay_us;
  config.fragments_per_block = plan.fragments_per_block;
  if (mode == ChannelMode::Scripted) {
    if (args.drop_script.empty()) {
      throw Error("scripted channel needs --drop-script");
    }
    config.drop_list = read_drop_script(args.drop_script);
  }
  SimLink link(config);
  Receiver receiver;
  link.set_b_sink([&receiver, &link](Received&& r) {
    if (auto reply = receiver.on_datagram(r.bytes, r.at)) {
      link.endpoint_b().send(*reply, r.at);
    }
  });
  VirtualClock clock;
  const AgreementInfo info = sender.run_agreement(link.endpoint_a(), clock);
  std::cout << "session " << info.session_id << " established after "
            << info.requests_sent << " request(s)\n";
  const SendLog& log = sender.run_block_phase(link.endpoint_a(), clock);
  clock.wait_until(receiver.deadline());
  Receiver::Result result = receiver.finalize(clock.now());
  std::cout << "sent " << log.entries.size() << " transmissions; receiver got "
            << result.report.unique_blocks << "/" << grid.count()
            << " blocks\n";
  if (!args.send_log.empty()) {
    write_text_file(args.send_log, render_send_log(log));
  }
  if (!args.out_image.empty()) {
    save_image_file(result.image.image, args.out_image);
  }
  if (!args.out_report.empty()) {
    write_text_file(args.out_report,
                    render_reception_report(result.report));
  }
  return 0;
}

// ---------------------------------------------------------------- recv ----

struct RecvArgs {
  std::uint16_t listen_port = 0;
  std::string out_image = "received.pgm";
  std::string out_report;
  std::uint32_t fill = 0;
  std::uint32_t session_timeout_s = 60;
};

int cmd_recv(const RecvArgs& args) {
  UdpTransport transport("", args.listen_port);
  std::cout << "listening on UDP port " << transport.local_port() << "\n";
  SteadyClock clock;
  ReceiverOptions options;
  options.fill = static_cast<std::uint8_t>(args.fill);
  Receiver receiver(options);

  const Micros session_deadline =
      clock.now() + static_cast<Micros>(args.session_timeout_s) * 1'000'000;
  while (!receiver.session_established()) {
    auto datagram = next_datagram(transport, clock, session_deadline);
    if (!datagram) {
      std::cerr << "no session within " << args.session_timeout_s << "s\n";
      return 1;
    }
    if (auto reply = receiver.on_datagram(datagram->bytes, datagram->at)) {
      transport.send(*reply, clock.now());
    }
  }
  std::cout << "session established; N=" << receiver.agreement().total_transmissions
            << " deadline in "
            << (receiver.deadline() - clock.now()) / 1000 << " ms\n";

  while (!receiver.complete() && clock.now() < receiver.deadline()) {
    auto datagram = next_datagram(transport, clock, receiver.deadline());
    if (!datagram) break;
    if (auto reply = receiver.on_datagram(datagram->bytes, datagram->at)) {
      transport.send(*reply, clock.now());
    }
  }
  Receiver::Result result = receiver.finalize(
      std::max(clock.now(), receiver.deadline()));
  std::cout << "received " << result.report.unique_blocks << " blocks ("
            << format_double(pixel_filling_rate(result.image) * 100)
            << "% of pixels)\n";
  save_image_file(result.image.image, args.out_image);
  if (!args.out_report.empty()) {
    write_text_file(args.out_report, render_reception_report(result.report));
  }
  return 0;
}

// ------------------------------------------------------------ simulate ----

struct SimulateArgs {
  std::string image_path;
  std::string block = "8x8";
  ValueFlags values;
  std::string region_csv;
  std::string channel_name = "simblock";
  std::vector<double> losses{0.0};
  std::vector<double> ratios{1.0};
  std::uint32_t packet_size = 0;
  std::uint32_t trials = 1000;
  std::uint64_t seed = 1;
  std::uint32_t interval_us = 1000;
  std::uint32_t delay_us = 0;
  unsigned jobs = 0;
  bool dump_reports = false;
  std::string out_dir = "out";
};

int cmd_simulate(const SimulateArgs& args) {
  ExperimentSpec spec;
  spec.image = load_image_file(args.image_path);
  const BlockDims dims = parse_block_dims(args.block);
  spec.block_width = dims.width;
  spec.block_height = dims.height;
  const BlockGrid grid = make_grid(spec.image, dims.width, dims.height);

  spec.channel_mode = parse_mode(args.channel_name);
  spec.packet_size = args.packet_size;
  spec.loss_rates = args.losses;
  spec.ratios = args.ratios;
  spec.trials = args.trials;
  spec.seed = args.seed;
  spec.send_interval_us = args.interval_us;
  spec.delay_us = args.delay_us;
  spec.jobs = args.jobs;

  if (!args.values.requirements_csv.empty() &&
      (args.losses.size() != 1 || args.ratios.size() != 1)) {
    throw Error(
        "requirements-driven values need exactly one loss and one ratio");
  }
  ChannelParams channel;
  channel.loss_rate = args.losses.front();
  channel.packet_size =
      args.packet_size == 0 ? grid.block_bytes() : args.packet_size;
  const std::uint32_t k = grid.block_bytes() / channel.packet_size;
  const std::uint64_t n = budget_sends(grid.count(), args.ratios.front());
  spec.value_map =
      resolve_values(args.values, grid.count(), channel, k, n).map;
  if (!args.region_csv.empty()) {
    spec.region = read_id_list(args.region_csv);
  }

  fs::create_directories(args.out_dir);
  if (args.dump_reports) {
    spec.dump_reports_dir = args.out_dir + "/reports";
    fs::create_directories(spec.dump_reports_dir);
  }

  const SweepResult result = run_sweep(spec);
  write_text_file(args.out_dir + "/report.csv",
                  render_trial_rows(result.rows));
  write_text_file(args.out_dir + "/cells.csv",
                  render_cell_stats(result.cells));
  write_text_file(args.out_dir + "/blocks.csv",
                  render_block_stats(result.blocks));

  std::cout << "loss     ratio    mean_fill  full_region  analytic\n";
  for (const CellStats& cell : result.cells) {
    std::printf("%-8g %-8g %-10.4f %-12.4f %-10.4f\n", cell.loss, cell.ratio,
                cell.mean_filling, cell.full_region_rate,
                cell.analytic_full_region);
  }
  std::cout << "wrote " << args.out_dir
            << "/report.csv, cells.csv, blocks.csv\n";
  return 0;
}

// ------------------------------------------------------------- metrics ----

struct MetricsArgs {
  std::string reports_dir;
  std::string region_csv;
  std::string out_csv = "metrics.csv";
};

int cmd_metrics(const MetricsArgs& args) {
  std::vector<std::uint32_t> region;
  if (!args.region_csv.empty()) {
    region = read_id_list(args.region_csv);
  }
  std::vector<fs::path> files;
  if (!fs::is_directory(args.reports_dir)) {
    throw Error("not a directory: " + args.reports_dir);
  }
  for (const auto& entry : fs::directory_iterator(args.reports_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") {
      files.push_back(entry.path());
    }
  }
  if (files.empty()) {
    throw Error("no reception reports in " + args.reports_dir);
  }
  std::sort(files.begin(), files.end());

  std::string out = "# blockcast-metrics v1\n";
  out += "file,unique_blocks,pixel_filling_rate,region_coverage,full_region\n";
  for (const fs::path& file : files) {
    const std::vector<bool> flags = read_reception_flags(file.string());
    const std::size_t count = flags.size();
    std::size_t unique = 0;
    for (bool f : flags) unique += f ? 1 : 0;
    const double filling =
        static_cast<double>(unique) / static_cast<double>(count);
    double coverage = 0.0;
    bool full = false;
    if (!region.empty()) {
      std::size_t hit = 0;
      for (std::uint32_t id : region) {
        if (id >= count) {
          throw Error("region id out of range for " + file.string());
        }
        if (flags[id]) ++hit;
      }
      coverage = static_cast<double>(hit) / static_cast<double>(region.size());
      full = hit == region.size();
    }
    out += file.filename().string() + ',' + std::to_string(unique) + ',' +
           format_double(filling) + ',' + format_double(coverage) + ',' +
           (full ? "1" : "0") + '\n';
  }
  write_text_file(args.out_csv, out);
  std::cout << "wrote " << args.out_csv << " (" << files.size()
            << " reports)\n";
  return 0;
}

// --------------------------------------------------------------- synth ----

struct SynthArgs {
  std::uint32_t width = 256;
  std::uint32_t height = 144;
  std::uint32_t channels = 1;
  std::string block = "8x8";
  std::string image_out;
  std::string heatmap_out;
  std::string region_out;
  double sigma = 1.2;
  double peak = 3e6;
  std::uint64_t cap = 2500;
  double heatmap_floor = 0.01;
  double region_fraction = 0.1;
};

int cmd_synth(const SynthArgs& args) {
  const ImageBuffer image =
      synthetic_image(args.width, args.height, args.channels);
  if (!args.image_out.empty()) {
    save_image_file(image, args.image_out);
    std::cout << "wrote " << args.image_out << "\n";
  }
  if (!args.heatmap_out.empty() || !args.region_out.empty()) {
    const BlockDims dims = parse_block_dims(args.block);
    const BlockGrid grid = make_grid(image, dims.width, dims.height);
    const auto counts =
        synthetic_heatmap(grid, args.sigma, args.peak, args.cap);
    if (!args.heatmap_out.empty()) {
      write_indexed_counts(args.heatmap_out, "blockcast-heatmap v1", counts);
      std::cout << "wrote " << args.heatmap_out << "\n";
    }
    if (!args.region_out.empty()) {
      const ValueMap map = values_from_heatmap(counts, args.heatmap_floor);
      const auto region = top_fraction_region(map, args.region_fraction);
      write_id_list(args.region_out, region);
      std::cout << "wrote " << args.region_out << " (" << region.size()
                << " blocks)\n";
    }
  }
  return 0;
}

void add_value_flags(CLI::App* cmd, ValueFlags& flags) {
  auto* values = cmd->add_option("--values-csv", flags.values_csv,
                                 "Per-block values (index,value)");
  auto* heatmap = cmd->add_option("--heatmap-csv", flags.heatmap_csv,
                                  "Per-block appearance counts (index,count)");
  auto* reqs = cmd->add_option("--requirements-csv", flags.requirements_csv,
                               "Per-block required reception (index,R)");
  cmd->add_option("--heatmap-floor", flags.heatmap_floor,
                  "Value floor as a fraction of the max count")
      ->capture_default_str();
  values->excludes(heatmap)->excludes(reqs);
  heatmap->excludes(reqs);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"value-weighted stochastic image transmission"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Flat key=value config file; flags override");

  PlanArgs plan_args;
  auto* plan = app.add_subcommand("plan", "derive the transmission plan");
  plan->add_option("--image", plan_args.image_path, "PGM/PPM input")
      ->required();
  plan->add_option("--block", plan_args.block, "block WxH")->capture_default_str();
  add_value_flags(plan, plan_args.values);
  plan->add_option("--loss", plan_args.loss, "packet loss rate");
  plan->add_option("--ratio", plan_args.ratio, "transmit/original size ratio")
      ->capture_default_str();
  plan->add_option("--packet-size", plan_args.packet_size,
                   "bytes per packet (default: one block)");
  plan->add_option("--out-dir", plan_args.out_dir, "output directory")
      ->capture_default_str();

  SendArgs send_args;
  auto* send = app.add_subcommand("send", "transmit an image");
  send->add_option("--image", send_args.image_path, "PGM/PPM input")
      ->required();
  send->add_option("--block", send_args.block, "block WxH")->capture_default_str();
  add_value_flags(send, send_args.values);
  send->add_option("--loss", send_args.loss,
                   "loss rate (simulated channels)");
  send->add_option("--ratio", send_args.ratio, "transmit/original size ratio")
      ->capture_default_str();
  send->add_option("--packet-size", send_args.packet_size, "bytes per packet");
  send->add_option("--channel", send_args.channel_name,
                   "udp|simpacket|simblock|scripted")
      ->capture_default_str();
  send->add_option("--peer", send_args.peer, "receiver host:port (udp)");
  send->add_option("--bind-port", send_args.bind_port, "local UDP port");
  send->add_option("--interval-us", send_args.interval_us,
                   "pacing interval per transmission")
      ->capture_default_str();
  send->add_option("--delay-us", send_args.delay_us,
                   "one-way delay (simulated channels)");
  send->add_option("--seed", send_args.seed, "RNG seed")->capture_default_str();
  send->add_option("--drop-script", send_args.drop_script,
                   "scripted drop list file");
  send->add_option("--send-log", send_args.send_log, "send log CSV output");
  send->add_option("--out-image", send_args.out_image,
                   "received image (loopback modes)");
  send->add_option("--out-report", send_args.out_report,
                   "reception report CSV (loopback modes)");

  RecvArgs recv_args;
  auto* recv = app.add_subcommand("recv", "receive an image over UDP");
  recv->add_option("--listen", recv_args.listen_port, "UDP port (0 = any)");
  recv->add_option("--out", recv_args.out_image, "output image path")
      ->capture_default_str();
  recv->add_option("--report", recv_args.out_report, "reception report CSV");
  recv->add_option("--fill", recv_args.fill, "fill byte for missing blocks")
      ->capture_default_str();
  recv->add_option("--session-timeout-s", recv_args.session_timeout_s,
                   "seconds to wait for an agreement")
      ->capture_default_str();

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo sweep");
  simulate->add_option("--image", sim_args.image_path, "PGM/PPM input")
      ->required();
  simulate->add_option("--block", sim_args.block, "block WxH")
      ->capture_default_str();
  add_value_flags(simulate, sim_args.values);
  simulate->add_option("--region-csv", sim_args.region_csv,
                       "coverage region block ids (default: top decile)");
  simulate->add_option("--channel", sim_args.channel_name,
                       "simpacket|simblock")
      ->capture_default_str();
  simulate->add_option("--losses", sim_args.losses, "loss rates to sweep")
      ->delimiter(',')
      ->capture_default_str();
  simulate->add_option("--ratios", sim_args.ratios, "budget ratios to sweep")
      ->delimiter(',')
      ->capture_default_str();
  simulate->add_option("--packet-size", sim_args.packet_size,
                       "bytes per packet");
  simulate->add_option("--trials", sim_args.trials, "trials per cell")
      ->capture_default_str();
  simulate->add_option("--seed", sim_args.seed, "master seed")
      ->capture_default_str();
  simulate->add_option("--interval-us", sim_args.interval_us,
                       "virtual pacing interval")
      ->capture_default_str();
  simulate->add_option("--delay-us", sim_args.delay_us, "one-way delay");
  simulate->add_option("--jobs", sim_args.jobs,
                       "parallel cells (0 = hardware)");
  simulate->add_flag("--dump-reports", sim_args.dump_reports,
                     "write per-trial reception reports");
  simulate->add_option("--out-dir", sim_args.out_dir, "output directory")
      ->capture_default_str();

  MetricsArgs metrics_args;
  auto* metrics =
      app.add_subcommand("metrics", "recompute metrics from artifacts");
  metrics->add_option("--reports-dir", metrics_args.reports_dir,
                      "directory of reception reports")
      ->required();
  metrics->add_option("--region-csv", metrics_args.region_csv,
                      "coverage region block ids");
  metrics->add_option("--out", metrics_args.out_csv, "metrics CSV output")
      ->capture_default_str();

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate synthetic inputs");
  synth->add_option("--width", synth_args.width)->capture_default_str();
  synth->add_option("--height", synth_args.height)->capture_default_str();
  synth->add_option("--channels", synth_args.channels)->capture_default_str();
  synth->add_option("--block", synth_args.block, "block WxH for the heatmap")
      ->capture_default_str();
  synth->add_option("--image-out", synth_args.image_out, "PGM/PPM output");
  synth->add_option("--heatmap-out", synth_args.heatmap_out, "heatmap CSV");
  synth->add_option("--region-out", synth_args.region_out,
                    "top-value region CSV");
  synth->add_option("--sigma", synth_args.sigma, "heatmap spread, blocks")
      ->capture_default_str();
  synth->add_option("--peak", synth_args.peak, "heatmap peak count")
      ->capture_default_str();
  synth->add_option("--cap", synth_args.cap,
                    "saturation cap for counts (0 = off)")
      ->capture_default_str();
  synth->add_option("--heatmap-floor", synth_args.heatmap_floor,
                    "floor fraction when deriving the region")
      ->capture_default_str();
  synth->add_option("--region-fraction", synth_args.region_fraction,
                    "fraction of blocks in the region")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help
    }
    app.exit(e);
    return 2;
  }

  try {
    if (plan->parsed()) return cmd_plan(plan_args);
    if (send->parsed()) return cmd_send(send_args);
    if (recv->parsed()) return cmd_recv(recv_args);
    if (simulate->parsed()) return cmd_simulate(sim_args);
    if (metrics->parsed()) return cmd_metrics(metrics_args);
    if (synth->parsed()) return cmd_synth(synth_args);
  } catch (const InfeasibleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    print_feasibility(e.report());
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
