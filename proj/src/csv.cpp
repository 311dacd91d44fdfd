#include "blockcast/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace blockcast {

namespace {

// Splits a text file into non-empty, non-comment lines.
std::vector<std::string> data_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::uint64_t parse_uint(const std::string& field, const std::string& path) {
  std::uint64_t value = 0;
  const auto* begin = field.data();
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error("bad integer field '" + field + "' in " + path);
  }
  return value;
}

double parse_double(const std::string& field, const std::string& path) {
  double value = 0.0;
  const auto* begin = field.data();
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error("bad numeric field '" + field + "' in " + path);
  }
  return value;
}

// Parses "index,value" rows and checks the indices are 0..n-1 in order.
template <typename T, typename Parse>
std::vector<T> read_indexed(const std::string& path, Parse parse) {
  const auto lines = data_lines(read_text_file(path));
  if (lines.empty()) {
    throw Error("no data rows in " + path);
  }
  std::vector<T> values;
  values.reserve(lines.size());
  for (const std::string& line : lines) {
    const auto fields = split_fields(line);
    if (fields.size() != 2) {
      throw Error("expected 'index,value' rows in " + path);
    }
    const std::uint64_t index = parse_uint(fields[0], path);
    if (index != values.size()) {
      throw Error("indices must be dense and ordered in " + path);
    }
    values.push_back(parse(fields[1], path));
  }
  return values;
}

void append_row_end(std::string& out) { out.push_back('\n'); }

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open file: " + path);
  }
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error("cannot open output file: " + path);
  }
  out << content;
  if (!out) {
    throw Error("write failed: " + path);
  }
}

std::vector<double> read_indexed_doubles(const std::string& path) {
  return read_indexed<double>(path, parse_double);
}

std::vector<std::uint64_t> read_indexed_counts(const std::string& path) {
  return read_indexed<std::uint64_t>(path, parse_uint);
}

void write_indexed_doubles(const std::string& path, const std::string& label,
                           std::span<const double> values) {
  std::string out = "# " + label + "\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += std::to_string(i) + ',' + format_double(values[i]);
    append_row_end(out);
  }
  write_text_file(path, out);
}

void write_indexed_counts(const std::string& path, const std::string& label,
                          std::span<const std::uint64_t> values) {
  std::string out = "# " + label + "\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += std::to_string(i) + ',' + std::to_string(values[i]);
    append_row_end(out);
  }
  write_text_file(path, out);
}

std::vector<std::uint32_t> read_id_list(const std::string& path) {
  const auto lines = data_lines(read_text_file(path));
  std::vector<std::uint32_t> ids;
  ids.reserve(lines.size());
  for (const std::string& line : lines) {
    ids.push_back(static_cast<std::uint32_t>(parse_uint(line, path)));
  }
  return ids;
}

void write_id_list(const std::string& path,
                   std::span<const std::uint32_t> ids) {
  std::string out = "# blockcast-region v1\n";
  for (std::uint32_t id : ids) {
    out += std::to_string(id);
    append_row_end(out);
  }
  write_text_file(path, out);
}

std::string render_send_log(const SendLog& log) {
  std::string out = "# blockcast-send-log v1\n";
  out += "# data_packets_sent=" + std::to_string(log.data_packets_sent) + "\n";
  out += "sequence,block_id,sent_at_us\n";
  for (const SendLogEntry& e : log.entries) {
    out += std::to_string(e.sequence) + ',' + std::to_string(e.block_id) +
           ',' + std::to_string(e.sent_at);
    append_row_end(out);
  }
  return out;
}

std::string render_reception_report(const ReceptionReport& report) {
  std::string out = "# blockcast-reception-report v1\n";
  out += "# unique_blocks=" + std::to_string(report.unique_blocks) + "\n";
  out += "# data_packets=" + std::to_string(report.data_packets) + "\n";
  out += "# duplicate_fragments=" + std::to_string(report.duplicate_fragments) + "\n";
  out += "# undecodable=" + std::to_string(report.undecodable) + "\n";
  out += "# ignored_late=" + std::to_string(report.ignored_late) + "\n";
  out += "# established_at_us=" + std::to_string(report.established_at) + "\n";
  out += "# deadline_us=" + std::to_string(report.deadline) + "\n";
  out += "block_id,received\n";
  for (std::size_t i = 0; i < report.block_received.size(); ++i) {
    out += std::to_string(i) + ',' + (report.block_received[i] ? "1" : "0");
    append_row_end(out);
  }
  return out;
}

std::vector<bool> read_reception_flags(const std::string& path) {
  const auto lines = data_lines(read_text_file(path));
  std::vector<bool> flags;
  for (const std::string& line : lines) {
    const auto fields = split_fields(line);
    if (fields.size() != 2) {
      throw Error("expected 'block_id,received' rows in " + path);
    }
    if (fields[0] == "block_id") continue;  // column header
    const std::uint64_t index = parse_uint(fields[0], path);
    if (index != flags.size()) {
      throw Error("indices must be dense and ordered in " + path);
    }
    flags.push_back(parse_uint(fields[1], path) != 0);
  }
  if (flags.empty()) {
    throw Error("no per-block rows in " + path);
  }
  return flags;
}

std::string render_trial_rows(std::span<const TrialRow> rows) {
  std::string out = "# blockcast-simreport v1\n";
  out +=
      "loss,ratio,trial,unique_blocks,pixel_filling_rate,region_coverage,"
      "full_region,packets_sent,duration_us,agreement_restarts\n";
  for (const TrialRow& r : rows) {
    out += format_double(r.loss) + ',' + format_double(r.ratio) + ',' +
           std::to_string(r.trial) + ',' + std::to_string(r.unique_blocks) +
           ',' + format_double(r.filling_rate) + ',' +
           format_double(r.region_coverage) + ',' + (r.full_region ? "1" : "0") +
           ',' + std::to_string(r.packets_sent) + ',' +
           std::to_string(r.duration_us) + ',' +
           std::to_string(r.agreement_restarts);
    append_row_end(out);
  }
  return out;
}

std::string render_cell_stats(std::span<const CellStats> cells) {
  std::string out = "# blockcast-cells v1\n";
  out +=
      "loss,ratio,trials,n,mean_filling_rate,se_filling_rate,"
      "mean_region_coverage,se_region_coverage,full_region_rate,"
      "se_full_region,analytic_full_region\n";
  for (const CellStats& c : cells) {
    out += format_double(c.loss) + ',' + format_double(c.ratio) + ',' +
           std::to_string(c.trials) + ',' +
           std::to_string(c.total_transmissions) + ',' +
           format_double(c.mean_filling) + ',' + format_double(c.se_filling) +
           ',' + format_double(c.mean_coverage) + ',' +
           format_double(c.se_coverage) + ',' +
           format_double(c.full_region_rate) + ',' +
           format_double(c.se_full_region) + ',' +
           format_double(c.analytic_full_region);
    append_row_end(out);
  }
  return out;
}

std::string render_block_stats(std::span<const BlockStat> blocks) {
  std::string out = "# blockcast-blocks v1\n";
  out += "loss,ratio,block_id,probability,rho_block_model,rho_packet_model,"
         "empirical\n";
  for (const BlockStat& b : blocks) {
    out += format_double(b.loss) + ',' + format_double(b.ratio) + ',' +
           std::to_string(b.block_id) + ',' + format_double(b.probability) +
           ',' + format_double(b.rho_block_model) + ',' +
           format_double(b.rho_packet_model) + ',' +
           format_double(b.empirical);
    append_row_end(out);
  }
  return out;
}

std::string render_plan_summary(const TransmissionPlan& plan,
                                const FeasibilityReport* feasibility) {
  std::string out = "# blockcast-plan v1\n";
  out += "block_count=" + std::to_string(plan.block_count()) + "\n";
  out += "block_size=" + std::to_string(plan.sizing.block_size) + "\n";
  out += "original_size=" + std::to_string(plan.sizing.original_size) + "\n";
  out += "transmit_size=" + format_double(plan.sizing.transmit_size) + "\n";
  out += "packet_size=" + std::to_string(plan.channel.packet_size) + "\n";
  out += "loss_rate=" + format_double(plan.channel.loss_rate) + "\n";
  out += "n=" + std::to_string(plan.total_transmissions) + "\n";
  out += "k=" + std::to_string(plan.fragments_per_block) + "\n";
  out += "block_success_prob=" +
         format_double(block_success_prob(plan.channel,
                                          plan.fragments_per_block)) +
         "\n";
  if (feasibility != nullptr) {
    out += "feasible=" + std::string(feasibility->feasible ? "1" : "0") + "\n";
    out += "feasibility_lhs=" + format_double(feasibility->lhs) + "\n";
    out += "feasibility_rhs=" + format_double(feasibility->rhs) + "\n";
    out += "feasibility_slack=" + format_double(feasibility->slack) + "\n";
  }
  return out;
}

std::string render_plan_blocks(const TransmissionPlan& plan) {
  std::string out = "# blockcast-plan-blocks v1\n";
  out += "block_id,value,probability,expected_count,arrival_prob\n";
  for (std::size_t i = 0; i < plan.block_count(); ++i) {
    out += std::to_string(i) + ',' + format_double(plan.value_map.values[i]) +
           ',' + format_double(plan.value_map.probabilities[i]) + ',' +
           format_double(plan.expected_counts[i]) + ',' +
           format_double(plan.arrival_probs[i]);
    append_row_end(out);
  }
  return out;
}

}  // namespace blockcast
