#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "blockcast/experiment.hpp"
#include "blockcast/model.hpp"
#include "blockcast/protocol.hpp"

namespace blockcast {

/// Shortest round-trip decimal form (std::to_chars), locale-independent.
std::string format_double(double value);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Indexed per-block tables: "index,value" rows, 0-based dense indices,
// '#' lines are comments.
std::vector<double> read_indexed_doubles(const std::string& path);
std::vector<std::uint64_t> read_indexed_counts(const std::string& path);
void write_indexed_doubles(const std::string& path, const std::string& label,
                           std::span<const double> values);
void write_indexed_counts(const std::string& path, const std::string& label,
                          std::span<const std::uint64_t> values);

/// Region file: one block id per row.
std::vector<std::uint32_t> read_id_list(const std::string& path);
void write_id_list(const std::string& path, std::span<const std::uint32_t> ids);

std::string render_send_log(const SendLog& log);
std::string render_reception_report(const ReceptionReport& report);
/// Reads back the per-block received flags of a reception report.
std::vector<bool> read_reception_flags(const std::string& path);

std::string render_trial_rows(std::span<const TrialRow> rows);
std::string render_cell_stats(std::span<const CellStats> cells);
std::string render_block_stats(std::span<const BlockStat> blocks);

/// Key-value plan summary ("# blockcast-plan v1" header).
std::string render_plan_summary(const TransmissionPlan& plan,
                                const FeasibilityReport* feasibility);
/// Per-block plan table: block_id,value,probability,expected_count,arrival_prob.
std::string render_plan_blocks(const TransmissionPlan& plan);

}  // namespace blockcast
