#include "blockcast/wire.hpp"

#include <bit>

namespace blockcast {

namespace {

constexpr std::size_t kBaseHeaderBytes = 4;
constexpr std::size_t kAgreementRequestBytes = 26;
constexpr std::size_t kAgreementAckBytes = 2;

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) {
  out.push_back(v);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) {
    out.push_back(static_cast<std::uint8_t>(v >> shift));
  }
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) {
    out.push_back(static_cast<std::uint8_t>(v >> shift));
  }
}

struct Reader {
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;

  std::uint8_t u8() { return data[pos++]; }
  std::uint16_t u16() {
    std::uint16_t v = static_cast<std::uint16_t>(data[pos] << 8 | data[pos + 1]);
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = v << 8 | data[pos++];
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = v << 8 | data[pos++];
    return v;
  }
};

void require_pairing(MsgType type, std::uint8_t code) {
  const bool ok = (code == kCodeAgreementRequest && type == MsgType::Confirmable) ||
                  (code == kCodeAgreementAck && type == MsgType::Acknowledgement) ||
                  (code == kCodeBlockData && type == MsgType::NonConfirmable);
  if (!ok) {
    throw DecodeError(DecodeErrorKind::BadField,
                      "message type does not match code");
  }
}

}  // namespace

std::uint32_t block_id_bits_for(std::size_t block_count) {
  if (block_count < 1) {
    throw Error("block count must be >= 1");
  }
  if (block_count == 1) return 1;  // never emit a zero-width field
  return static_cast<std::uint32_t>(std::bit_width(block_count - 1));
}

std::uint32_t fragment_bits_for(std::uint32_t fragments_per_block) {
  if (fragments_per_block < 1) {
    throw Error("fragments per block must be >= 1");
  }
  if (fragments_per_block == 1) return 0;
  return static_cast<std::uint32_t>(std::bit_width(fragments_per_block - 1u));
}

SessionParams session_params_from(const AgreementRequest& request) {
  if (request.image_width < 1 || request.image_height < 1 ||
      request.block_width < 1 || request.block_height < 1 ||
      request.packet_size < 1 || request.total_transmissions < 1) {
    throw Error("agreement fields must be positive");
  }
  if (request.channels != 1 && request.channels != 3) {
    throw Error("agreement channels must be 1 or 3");
  }
  if (request.image_width % request.block_width != 0 ||
      request.image_height % request.block_height != 0) {
    throw Error("agreement block dimensions must divide the image");
  }
  const std::size_t count =
      static_cast<std::size_t>(request.image_width / request.block_width) *
      (request.image_height / request.block_height);
  const std::uint32_t block_bytes = static_cast<std::uint32_t>(
      request.block_width * request.block_height * request.channels);
  if (block_bytes % request.packet_size != 0) {
    throw Error("agreement packet size must divide the block size");
  }
  if (request.block_id_bits != block_id_bits_for(count)) {
    throw Error("agreement block id width does not match the block count");
  }
  SessionParams session;
  session.block_count = count;
  session.block_id_bits = request.block_id_bits;
  session.fragments_per_block = block_bytes / request.packet_size;
  session.fragment_bits = fragment_bits_for(session.fragments_per_block);
  session.packet_size = request.packet_size;
  if (session.block_id_bits + session.fragment_bits > 64) {
    throw Error("BT header wider than 64 bits");
  }
  return session;
}

std::vector<std::uint8_t> encode(const Packet& packet,
                                 const SessionParams* session) {
  const BaseHeader& base = packet.base;
  std::uint8_t code = 0;
  if (std::holds_alternative<AgreementRequest>(packet.body)) {
    code = kCodeAgreementRequest;
  } else if (std::holds_alternative<AgreementAck>(packet.body)) {
    code = kCodeAgreementAck;
  } else {
    code = kCodeBlockData;
  }
  if (base.code != code) {
    throw Error("packet code does not match its body");
  }
  require_pairing(base.type, code);

  std::vector<std::uint8_t> out;
  out.push_back(static_cast<std::uint8_t>(
      kWireVersion << 6 | (static_cast<std::uint8_t>(base.type) & 0x3) << 4));
  out.push_back(base.code);
  put_u16(out, base.message_id);

  if (const auto* req = std::get_if<AgreementRequest>(&packet.body)) {
    put_u16(out, req->session_id);
    put_u8(out, req->block_id_bits);
    put_u64(out, req->total_transmissions);
    put_u16(out, req->image_width);
    put_u16(out, req->image_height);
    put_u8(out, req->channels);
    put_u16(out, req->block_width);
    put_u16(out, req->block_height);
    put_u16(out, req->packet_size);
    put_u32(out, req->send_interval_us);
  } else if (const auto* ack = std::get_if<AgreementAck>(&packet.body)) {
    put_u16(out, ack->session_id);
  } else {
    const auto& data = std::get<BlockData>(packet.body);
    if (session == nullptr) {
      throw Error("session parameters required to encode block data");
    }
    if (data.block_id >= session->block_count ||
        static_cast<std::uint64_t>(data.block_id) >> session->block_id_bits !=
            0) {
      throw Error("field overflow: block id does not fit the agreed width");
    }
    if (data.fragment_index >= session->fragments_per_block) {
      throw Error("field overflow: fragment index out of range");
    }
    if (data.fragment.size() != session->packet_size) {
      throw Error("fragment length must equal the packet size");
    }
    const std::uint64_t packed =
        static_cast<std::uint64_t>(data.block_id) << session->fragment_bits |
        data.fragment_index;
    const std::size_t bt_bytes = session->bt_header_bytes();
    for (std::size_t i = 0; i < bt_bytes; ++i) {
      out.push_back(
          static_cast<std::uint8_t>(packed >> (8 * (bt_bytes - 1 - i))));
    }
    out.insert(out.end(), data.fragment.begin(), data.fragment.end());
  }
  return out;
}

Packet decode(std::span<const std::uint8_t> bytes,
              const SessionParams* session) {
  if (bytes.size() < kBaseHeaderBytes) {
    throw DecodeError(DecodeErrorKind::ShortBuffer, "short header");
  }
  const std::uint8_t b0 = bytes[0];
  if (b0 >> 6 != kWireVersion) {
    throw DecodeError(DecodeErrorKind::BadVersion, "bad version");
  }
  if ((b0 & 0x0F) != 0) {
    throw DecodeError(DecodeErrorKind::BadField, "nonzero token length");
  }
  Packet packet;
  packet.base.type = static_cast<MsgType>(b0 >> 4 & 0x3);
  packet.base.code = bytes[1];
  packet.base.message_id =
      static_cast<std::uint16_t>(bytes[2] << 8 | bytes[3]);

  Reader body{bytes.subspan(kBaseHeaderBytes)};
  switch (packet.base.code) {
    case kCodeAgreementRequest: {
      require_pairing(packet.base.type, packet.base.code);
      if (body.data.size() != kAgreementRequestBytes) {
        throw DecodeError(DecodeErrorKind::LengthMismatch,
                          "agreement request length mismatch");
      }
      AgreementRequest req;
      req.session_id = body.u16();
      req.block_id_bits = body.u8();
      req.total_transmissions = body.u64();
      req.image_width = body.u16();
      req.image_height = body.u16();
      req.channels = body.u8();
      req.block_width = body.u16();
      req.block_height = body.u16();
      req.packet_size = body.u16();
      req.send_interval_us = body.u32();
      packet.body = req;
      return packet;
    }
    case kCodeAgreementAck: {
      require_pairing(packet.base.type, packet.base.code);
      if (body.data.size() != kAgreementAckBytes) {
        throw DecodeError(DecodeErrorKind::LengthMismatch,
                          "agreement ack length mismatch");
      }
      packet.body = AgreementAck{body.u16()};
      return packet;
    }
    case kCodeBlockData: {
      require_pairing(packet.base.type, packet.base.code);
      if (session == nullptr) {
        throw DecodeError(DecodeErrorKind::BadField,
                          "no session parameters for block data");
      }
      const std::size_t bt_bytes = session->bt_header_bytes();
      if (body.data.size() != bt_bytes + session->packet_size) {
        throw DecodeError(DecodeErrorKind::LengthMismatch,
                          "block data length mismatch");
      }
      std::uint64_t packed = 0;
      for (std::size_t i = 0; i < bt_bytes; ++i) packed = packed << 8 | body.u8();
      const std::uint32_t total_bits =
          session->block_id_bits + session->fragment_bits;
      if (total_bits < 64 && packed >> total_bits != 0) {
        throw DecodeError(DecodeErrorKind::BadField,
                          "nonzero padding bits in BT header");
      }
      BlockData data;
      data.fragment_index = static_cast<std::uint32_t>(
          packed & ((1ULL << session->fragment_bits) - 1));
      data.block_id =
          static_cast<std::uint32_t>(packed >> session->fragment_bits);
      if (data.block_id >= session->block_count) {
        throw DecodeError(DecodeErrorKind::BadField, "block id out of range");
      }
      if (data.fragment_index >= session->fragments_per_block) {
        throw DecodeError(DecodeErrorKind::BadField,
                          "fragment index out of range");
      }
      data.fragment.assign(body.data.begin() + bt_bytes, body.data.end());
      packet.body = std::move(data);
      return packet;
    }
    default:
      throw DecodeError(DecodeErrorKind::UnknownCode, "unknown code");
  }
}

bool looks_like_block_data(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= kBaseHeaderBytes && bytes[0] >> 6 == kWireVersion &&
         (bytes[0] >> 4 & 0x3) ==
             static_cast<std::uint8_t>(MsgType::NonConfirmable) &&
         bytes[1] == kCodeBlockData;
}

}  // namespace blockcast
