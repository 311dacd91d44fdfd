#include "blockcast/protocol.hpp"

#include <algorithm>
#include <cmath>

namespace blockcast {

namespace {

// splitmix64 finalizer; used to spread a seed over derived identifiers.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

BlockSampler::BlockSampler(std::span<const double> probabilities,
                           std::uint64_t seed)
    : rng_(seed) {
  const std::size_t n = probabilities.size();
  if (n == 0) {
    throw Error("sampler needs at least one probability");
  }
  double sum = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0)) {
      throw Error("sampler probabilities must be non-negative");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error("sampler probabilities must sum to 1");
  }

  cutoff_.assign(n, 1.0);
  alias_.resize(n);
  for (std::size_t i = 0; i < n; ++i) alias_[i] = static_cast<std::uint32_t>(i);

  std::vector<double> scaled(n);
  std::vector<std::uint32_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = probabilities[i] * static_cast<double>(n);
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    const std::uint32_t s = small.back();
    const std::uint32_t l = large.back();
    small.pop_back();
    large.pop_back();
    cutoff_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    (scaled[l] < 1.0 ? small : large).push_back(l);
  }
  // Leftovers on either list are within rounding of probability 1.
}

std::uint32_t BlockSampler::sample() {
  const std::size_t n = cutoff_.size();
  const double u1 = uniform53(rng_());
  std::size_t idx = static_cast<std::size_t>(u1 * static_cast<double>(n));
  if (idx >= n) idx = n - 1;
  const double u2 = uniform53(rng_());
  return u2 < cutoff_[idx] ? static_cast<std::uint32_t>(idx) : alias_[idx];
}

Sender::Sender(const TransmissionPlan& plan, const Tiling& tiling,
               const SenderOptions& options)
    : plan_(plan),
      tiling_(tiling),
      options_(options),
      sampler_(plan.value_map.probabilities, mix64(options.seed)) {
  const BlockGrid& grid = tiling.grid;
  if (grid.count() != plan.block_count()) {
    throw Error("tiling block count does not match the plan");
  }
  if (grid.block_bytes() != plan.sizing.block_size) {
    throw Error("tiling block size does not match the plan");
  }
  if (tiling.blocks.size() != grid.count()) {
    throw Error("tiling is missing block payloads");
  }
  if (plan.channel.packet_size > 0xFFFF || grid.image_width > 0xFFFF ||
      grid.image_height > 0xFFFF) {
    throw Error("dimensions exceed the wire format's field widths");
  }

  request_.session_id =
      static_cast<std::uint16_t>(mix64(options.seed ^ 0x5e551041u));
  request_.block_id_bits =
      static_cast<std::uint8_t>(block_id_bits_for(grid.count()));
  request_.total_transmissions = plan.total_transmissions;
  request_.image_width = static_cast<std::uint16_t>(grid.image_width);
  request_.image_height = static_cast<std::uint16_t>(grid.image_height);
  request_.channels = static_cast<std::uint8_t>(grid.channels);
  request_.block_width = static_cast<std::uint16_t>(grid.block_width);
  request_.block_height = static_cast<std::uint16_t>(grid.block_height);
  request_.packet_size = static_cast<std::uint16_t>(plan.channel.packet_size);
  request_.send_interval_us = options.send_interval_us;
  session_ = session_params_from(request_);
  if (session_.fragments_per_block != plan.fragments_per_block) {
    throw Error("fragment count disagrees between plan and session");
  }
  next_message_id_ = static_cast<std::uint16_t>(mix64(options.seed ^ 0x31d5));
}

AgreementInfo Sender::run_agreement(Transport& transport, Clock& clock) {
  if (phase_ != SenderPhase::Agreeing) {
    throw Error("agreement already ran");
  }
  const std::uint16_t message_id = next_message_id_++;
  const std::vector<std::uint8_t> request_bytes = encode(
      Packet{{MsgType::Confirmable, kCodeAgreementRequest, message_id},
             request_});

  AgreementInfo info;
  info.session_id = request_.session_id;
  Micros timeout = options_.initial_timeout_us;
  for (std::uint32_t attempt = 0; attempt <= options_.max_retransmits;
       ++attempt) {
    transport.send(request_bytes, clock.now());
    ++info.requests_sent;
    const Micros window_end = clock.now() + timeout;
    while (auto received = next_datagram(transport, clock, window_end)) {
      Packet packet;
      try {
        packet = decode(received->bytes);
      } catch (const DecodeError&) {
        continue;
      }
      const auto* ack = std::get_if<AgreementAck>(&packet.body);
      if (ack != nullptr && packet.base.message_id == message_id &&
          ack->session_id == request_.session_id) {
        phase_ = SenderPhase::Transmitting;
        info.established_at = clock.now();
        return info;
      }
      // Acks for someone else's session are ignored.
    }
    timeout *= 2;
  }
  throw AgreementFailed("agreement failed after " +
                        std::to_string(info.requests_sent) + " requests");
}

const SendLog& Sender::run_block_phase(Transport& transport, Clock& clock) {
  if (phase_ != SenderPhase::Transmitting) {
    throw Error("block phase requires an established session");
  }
  const std::uint64_t total = plan_.total_transmissions;
  const std::uint32_t fragments = plan_.fragments_per_block;
  const std::uint32_t packet_size = plan_.channel.packet_size;
  const Micros interval = options_.send_interval_us;

  log_.entries.reserve(total);
  const Micros start = clock.now();
  log_.phase_start = start;
  for (std::uint64_t seq = 0; seq < total; ++seq) {
    clock.wait_until(start + static_cast<Micros>(seq) * interval);
    const Micros now = clock.now();
    const std::uint32_t block_id = sampler_.sample();
    const std::vector<std::uint8_t>& payload = tiling_.blocks[block_id].bytes;
    for (std::uint32_t f = 0; f < fragments; ++f) {
      BlockData data;
      data.block_id = block_id;
      data.fragment_index = f;
      data.fragment.assign(
          payload.begin() + static_cast<std::size_t>(f) * packet_size,
          payload.begin() + static_cast<std::size_t>(f + 1) * packet_size);
      const auto bytes = encode(
          Packet{{MsgType::NonConfirmable, kCodeBlockData, next_message_id_++},
                 std::move(data)},
          &session_);
      transport.send(bytes, now);
      ++log_.data_packets_sent;
    }
    log_.entries.push_back({seq, block_id, now});
  }
  log_.phase_end = clock.now();
  phase_ = SenderPhase::Done;
  return log_;
}

Receiver::Receiver(ReceiverOptions options) : options_(options) {}

bool Receiver::complete() const {
  return phase_ == ReceiverPhase::Receiving &&
         blocks_complete_ == session_.block_count;
}

Micros Receiver::deadline() const {
  if (phase_ == ReceiverPhase::AwaitingAgreement) {
    throw Error("no session, no deadline");
  }
  return report_.deadline;
}

const SessionParams& Receiver::session() const {
  if (phase_ == ReceiverPhase::AwaitingAgreement) {
    throw Error("no session established");
  }
  return session_;
}

const AgreementRequest& Receiver::agreement() const {
  if (phase_ == ReceiverPhase::AwaitingAgreement) {
    throw Error("no session established");
  }
  return request_;
}

std::optional<std::vector<std::uint8_t>> Receiver::establish(
    const AgreementRequest& request, std::uint16_t message_id, Micros now) {
  SessionParams session;
  try {
    session = session_params_from(request);
  } catch (const Error&) {
    ++report_.undecodable;
    return std::nullopt;
  }
  request_ = request;
  session_ = session;
  grid_.image_width = request.image_width;
  grid_.image_height = request.image_height;
  grid_.channels = request.channels;
  grid_.block_width = request.block_width;
  grid_.block_height = request.block_height;

  const std::size_t block_bytes =
      static_cast<std::size_t>(session.fragments_per_block) *
      session.packet_size;
  assembly_.assign(session.block_count * block_bytes, 0);
  fragments_seen_.assign(session.block_count, 0);
  fragment_map_.assign(session.block_count,
                       std::vector<bool>(session.fragments_per_block, false));

  report_.established_at = now;
  report_.deadline =
      now + static_cast<Micros>(request.total_transmissions +
                                options_.deadline_guard_intervals) *
                request.send_interval_us;
  phase_ = ReceiverPhase::Receiving;

  ack_bytes_ = encode(Packet{{MsgType::Acknowledgement, kCodeAgreementAck,
                              message_id},
                             AgreementAck{request.session_id}});
  return ack_bytes_;
}

void Receiver::ingest_block(const BlockData& data) {
  ++report_.data_packets;
  if (fragment_map_[data.block_id][data.fragment_index]) {
    ++report_.duplicate_fragments;
    return;
  }
  fragment_map_[data.block_id][data.fragment_index] = true;
  const std::size_t block_bytes =
      static_cast<std::size_t>(session_.fragments_per_block) *
      session_.packet_size;
  std::copy(data.fragment.begin(), data.fragment.end(),
            assembly_.begin() + data.block_id * block_bytes +
                static_cast<std::size_t>(data.fragment_index) *
                    session_.packet_size);
  if (++fragments_seen_[data.block_id] == session_.fragments_per_block) {
    ++blocks_complete_;
  }
}

std::optional<std::vector<std::uint8_t>> Receiver::on_datagram(
    std::span<const std::uint8_t> bytes, Micros now) {
  if (phase_ == ReceiverPhase::Finalized) {
    ++report_.ignored_late;
    return std::nullopt;
  }

  if (phase_ == ReceiverPhase::AwaitingAgreement) {
    Packet packet;
    try {
      packet = decode(bytes);
    } catch (const DecodeError&) {
      if (looks_like_block_data(bytes)) {
        ++report_.ignored_pre_session;  // data before any agreement
      } else {
        ++report_.undecodable;
      }
      return std::nullopt;
    }
    if (const auto* request = std::get_if<AgreementRequest>(&packet.body)) {
      return establish(*request, packet.base.message_id, now);
    }
    ++report_.ignored_pre_session;
    return std::nullopt;
  }

  // Receiving.
  Packet packet;
  bool decoded = true;
  try {
    packet = decode(bytes, &session_);
  } catch (const DecodeError&) {
    decoded = false;
  }
  if (decoded) {
    if (const auto* request = std::get_if<AgreementRequest>(&packet.body)) {
      if (request->session_id == request_.session_id) {
        // The ack was lost. The sender is provably still in the agreement
        // phase, so the expected transmission end time moves out with it.
        ++report_.agreement_duplicates;
        report_.deadline =
            now + static_cast<Micros>(request_.total_transmissions +
                                      options_.deadline_guard_intervals) *
                      request_.send_interval_us;
        return ack_bytes_;
      }
      if (now > report_.deadline) {
        ++report_.ignored_late;
      } else {
        ++report_.ignored_other_session;
      }
      return std::nullopt;
    }
  }
  if (now > report_.deadline) {
    ++report_.ignored_late;
    return std::nullopt;
  }
  if (!decoded) {
    ++report_.undecodable;
    return std::nullopt;
  }
  if (const auto* data = std::get_if<BlockData>(&packet.body)) {
    ingest_block(*data);
    return std::nullopt;
  }
  ++report_.ignored_other_session;  // stray ack
  return std::nullopt;
}

Receiver::Result Receiver::finalize(Micros now) {
  if (phase_ == ReceiverPhase::Finalized) {
    throw Error("already finalized");
  }
  if (phase_ == ReceiverPhase::AwaitingAgreement) {
    throw Error("cannot finalize before a session is established");
  }
  if (!complete() && now < report_.deadline) {
    throw Error("cannot finalize before the deadline");
  }

  const std::size_t block_bytes =
      static_cast<std::size_t>(session_.fragments_per_block) *
      session_.packet_size;
  std::vector<BlockPayload> payloads;
  payloads.reserve(blocks_complete_);
  report_.block_received.assign(session_.block_count, false);
  for (std::size_t id = 0; id < session_.block_count; ++id) {
    if (fragments_seen_[id] == session_.fragments_per_block) {
      report_.block_received[id] = true;
      BlockPayload payload;
      payload.block_id = static_cast<std::uint32_t>(id);
      payload.bytes.assign(assembly_.begin() + id * block_bytes,
                           assembly_.begin() + (id + 1) * block_bytes);
      payloads.push_back(std::move(payload));
    }
  }
  report_.unique_blocks = blocks_complete_;

  Result result;
  result.image = reassemble(grid_, payloads, options_.fill);
  result.report = report_;
  phase_ = ReceiverPhase::Finalized;
  return result;
}

}  // namespace blockcast
