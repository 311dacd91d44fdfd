#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "blockcast/errors.hpp"

namespace blockcast {

// Datagram layout, all multi-byte integers big-endian:
//
//   byte 0   : version(2) | type(2) | token length(4, always 0)
//   byte 1   : code
//   bytes 2-3: message id
//   bytes 4..: body
//
// Token and Options are never present; the body starts immediately after the
// fixed 4-byte header, so these datagrams are not parseable by generic CoAP
// stacks. Three codes are used:
//
//   0.02 POST    + CON  agreement request (fixed 26-byte body, see below)
//   2.04 Changed + ACK  agreement ack     (2-byte body: session id)
//   0.03 PUT     + NON  block data        (BT header + one fragment)
//
// The BT header packs (block id, fragment index) as a single big-endian
// integer value (block_id << fragment_bits) | fragment_index, stored in
// ceil((block_id_bits + fragment_bits)/8) bytes; unused high bits are zero.
// The fragment index field exists only when a block spans several packets
// (fragment_bits = 0 when K = 1).

inline constexpr std::uint8_t kWireVersion = 1;

enum class MsgType : std::uint8_t {
  Confirmable = 0,
  NonConfirmable = 1,
  Acknowledgement = 2,
  Reset = 3,
};

inline constexpr std::uint8_t kCodeAgreementRequest = 0x02;  // 0.02 POST
inline constexpr std::uint8_t kCodeBlockData = 0x03;         // 0.03 PUT
inline constexpr std::uint8_t kCodeAgreementAck = 0x44;      // 2.04 Changed

struct BaseHeader {
  MsgType type = MsgType::NonConfirmable;
  std::uint8_t code = 0;
  std::uint16_t message_id = 0;
};

/// Bits needed to address `block_count` blocks: ceil(log2(count)), with a
/// floor of one bit so the field never vanishes.
std::uint32_t block_id_bits_for(std::size_t block_count);

/// Bits for the fragment index: 0 when a block fits one packet.
std::uint32_t fragment_bits_for(std::uint32_t fragments_per_block);

/// Everything both ends must agree on before block data can be framed.
struct SessionParams {
  std::size_t block_count = 0;
  std::uint32_t block_id_bits = 0;
  std::uint32_t fragments_per_block = 1;
  std::uint32_t fragment_bits = 0;
  std::uint32_t packet_size = 0;

  std::size_t bt_header_bytes() const {
    return (block_id_bits + fragment_bits + 7) / 8;
  }
};

/// Body of the confirmable request opening a session. Fixed 26-byte layout,
/// in order: session_id u16, block_id_bits u8, total_transmissions u64,
/// image_width u16, image_height u16, channels u8, block_width u16,
/// block_height u16, packet_size u16, send_interval_us u32.
struct AgreementRequest {
  std::uint16_t session_id = 0;
  std::uint8_t block_id_bits = 0;
  std::uint64_t total_transmissions = 0;
  std::uint16_t image_width = 0;
  std::uint16_t image_height = 0;
  std::uint8_t channels = 1;
  std::uint16_t block_width = 0;
  std::uint16_t block_height = 0;
  std::uint16_t packet_size = 0;
  std::uint32_t send_interval_us = 0;

  bool operator==(const AgreementRequest&) const = default;
};

struct AgreementAck {
  std::uint16_t session_id = 0;
  bool operator==(const AgreementAck&) const = default;
};

struct BlockData {
  std::uint32_t block_id = 0;
  std::uint32_t fragment_index = 0;
  std::vector<std::uint8_t> fragment;
  bool operator==(const BlockData&) const = default;
};

struct Packet {
  BaseHeader base;
  std::variant<AgreementRequest, AgreementAck, BlockData> body;
};

/// Derives and validates session parameters from an agreement request.
/// Throws when the geometry is inconsistent (non-dividing blocks, indivisible
/// packet size, wrong block_id_bits, bad channel count).
SessionParams session_params_from(const AgreementRequest& request);

/// Serializes a packet. `session` is required for block-data packets and
/// ignored otherwise. Throws on invariant violations (type/code mismatch,
/// field overflow, wrong fragment length).
std::vector<std::uint8_t> encode(const Packet& packet,
                                 const SessionParams* session = nullptr);

/// Parses a datagram. `session` is required to frame block-data packets;
/// without it such datagrams raise a DecodeError. decode(encode(p)) == p.
Packet decode(std::span<const std::uint8_t> bytes,
              const SessionParams* session = nullptr);

/// Cheap classifier used by the block-atomic channel: true when the first
/// bytes look like a block-data packet (version 1, NON, PUT).
bool looks_like_block_data(std::span<const std::uint8_t> bytes);

}  // namespace blockcast
