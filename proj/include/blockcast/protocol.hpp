#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "blockcast/channel.hpp"
#include "blockcast/image.hpp"
#include "blockcast/model.hpp"
#include "blockcast/wire.hpp"

namespace blockcast {

/// Constant-time weighted sampling of block ids via Walker/Vose alias
/// tables. Draws come from mt19937_64 through the uniform53 mapping, so a
/// fixed seed yields the same id sequence on every platform.
class BlockSampler {
 public:
  BlockSampler(std::span<const double> probabilities, std::uint64_t seed);

  std::uint32_t sample();
  std::size_t size() const { return cutoff_.size(); }

 private:
  std::vector<double> cutoff_;
  std::vector<std::uint32_t> alias_;
  std::mt19937_64 rng_;
};

class AgreementFailed : public Error {
 public:
  using Error::Error;
};

struct SenderOptions {
  std::uint32_t send_interval_us = 1000;
  std::uint64_t seed = 0;
  std::uint32_t max_retransmits = 4;        // agreement phase only
  Micros initial_timeout_us = 2'000'000;    // doubled per retransmission
};

struct SendLogEntry {
  std::uint64_t sequence = 0;  // transmission index, 0..N-1
  std::uint32_t block_id = 0;
  Micros sent_at = 0;
};

struct SendLog {
  std::vector<SendLogEntry> entries;
  std::uint64_t data_packets_sent = 0;  // entries * K when complete
  Micros phase_start = 0;
  Micros phase_end = 0;
};

struct AgreementInfo {
  std::uint32_t requests_sent = 0;
  Micros established_at = 0;
  std::uint16_t session_id = 0;
};

enum class SenderPhase { Agreeing, Transmitting, Done };

/// Client side of a session: reliable parameter handshake, then exactly N
/// paced stochastic block transmissions with no retransmission.
class Sender {
 public:
  /// `tiling` must outlive the sender and match the plan's sizing.
  Sender(const TransmissionPlan& plan, const Tiling& tiling,
         const SenderOptions& options);

  /// Confirmable request/ack exchange with exponential backoff. Throws
  /// AgreementFailed when the retransmit budget is exhausted.
  AgreementInfo run_agreement(Transport& transport, Clock& clock);

  /// Sends all N block transmissions, each as K back-to-back fragment
  /// packets, paced on an absolute schedule of one transmission per
  /// send_interval. Never retransmits, never listens.
  const SendLog& run_block_phase(Transport& transport, Clock& clock);

  SenderPhase phase() const { return phase_; }
  const SendLog& send_log() const { return log_; }
  const AgreementRequest& agreement_request() const { return request_; }

 private:
  const TransmissionPlan& plan_;
  const Tiling& tiling_;
  SenderOptions options_;
  SessionParams session_;
  AgreementRequest request_;
  BlockSampler sampler_;
  SenderPhase phase_ = SenderPhase::Agreeing;
  std::uint16_t next_message_id_ = 0;
  SendLog log_;
};

struct ReceiverOptions {
  std::uint8_t fill = 0;
  std::uint32_t deadline_guard_intervals = 50;
};

enum class ReceiverPhase { AwaitingAgreement, Receiving, Finalized };

struct ReceptionReport {
  std::vector<bool> block_received;
  std::uint64_t unique_blocks = 0;
  std::uint64_t data_packets = 0;        // decoded block-data packets
  std::uint64_t duplicate_fragments = 0;
  std::uint64_t undecodable = 0;
  std::uint64_t ignored_late = 0;        // after the deadline
  std::uint64_t ignored_pre_session = 0;
  std::uint64_t ignored_other_session = 0;
  std::uint64_t agreement_duplicates = 0;
  Micros established_at = 0;
  Micros deadline = 0;
};

/// Server side: reacts to datagrams, assembles fragments, reassembles the
/// image once the computed deadline passes (or every block has arrived).
/// Not internally synchronized; a single owner must serialize calls.
class Receiver {
 public:
  explicit Receiver(ReceiverOptions options = {});

  /// Processes one datagram. Returns the ack to send back, if any.
  /// Undecodable input is counted, never fatal.
  std::optional<std::vector<std::uint8_t>> on_datagram(
      std::span<const std::uint8_t> bytes, Micros now);

  ReceiverPhase phase() const { return phase_; }
  bool session_established() const {
    return phase_ != ReceiverPhase::AwaitingAgreement;
  }
  /// All K fragments of every block have arrived.
  bool complete() const;
  Micros deadline() const;
  const SessionParams& session() const;
  const AgreementRequest& agreement() const;

  struct Result {
    PartialImage image;
    ReceptionReport report;
  };

  /// Allowed once the deadline has passed or reception is complete.
  Result finalize(Micros now);

 private:
  std::optional<std::vector<std::uint8_t>> establish(
      const AgreementRequest& request, std::uint16_t message_id, Micros now);
  void ingest_block(const BlockData& data);

  ReceiverOptions options_;
  ReceiverPhase phase_ = ReceiverPhase::AwaitingAgreement;
  AgreementRequest request_;
  SessionParams session_;
  BlockGrid grid_;
  std::vector<std::uint8_t> ack_bytes_;  // re-sent on duplicate requests
  std::vector<std::uint8_t> assembly_;   // count * block_size bytes
  std::vector<std::uint32_t> fragments_seen_;  // per block
  std::vector<std::vector<bool>> fragment_map_;
  std::uint64_t blocks_complete_ = 0;
  ReceptionReport report_;
};

}  // namespace blockcast
