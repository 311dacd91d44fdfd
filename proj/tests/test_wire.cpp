#include "blockcast/wire.hpp"

#include <random>

#include "doctest.h"

using namespace blockcast;

namespace {

AgreementRequest request_for(std::uint16_t image_w, std::uint16_t image_h,
                             std::uint16_t block_w, std::uint16_t block_h,
                             std::uint16_t packet_size) {
  AgreementRequest req;
  req.session_id = 0xBEEF;
  req.total_transmissions = 576;
  req.image_width = image_w;
  req.image_height = image_h;
  req.channels = 1;
  req.block_width = block_w;
  req.block_height = block_h;
  req.packet_size = packet_size;
  req.send_interval_us = 1000;
  const std::size_t count =
      static_cast<std::size_t>(image_w / block_w) * (image_h / block_h);
  req.block_id_bits = static_cast<std::uint8_t>(block_id_bits_for(count));
  return req;
}

}  // namespace

TEST_CASE("block id widths") {
  CHECK(block_id_bits_for(576) == 10);
  CHECK(block_id_bits_for(144) == 8);
  CHECK(block_id_bits_for(256) == 8);
  CHECK(block_id_bits_for(257) == 9);
  CHECK(block_id_bits_for(2) == 1);
  CHECK(block_id_bits_for(1) == 1);  // floor of one bit
  CHECK(fragment_bits_for(1) == 0);
  CHECK(fragment_bits_for(2) == 1);
  CHECK(fragment_bits_for(4) == 2);
  CHECK(fragment_bits_for(5) == 3);
}

TEST_CASE("bt header sizing drives the packet length") {
  // 576 blocks, one fragment: 10 bits -> 2 bytes of BT header.
  const auto session576 =
      session_params_from(request_for(256, 144, 8, 8, 64));
  CHECK(session576.block_id_bits == 10);
  CHECK(session576.bt_header_bytes() == 2);

  // 144 blocks: 8 bits -> 1 byte.
  const auto session144 =
      session_params_from(request_for(256, 144, 16, 16, 256));
  CHECK(session144.bt_header_bytes() == 1);

  // Degenerate single-block grid still carries one bit -> 1 byte.
  const auto session1 = session_params_from(request_for(8, 8, 8, 8, 64));
  CHECK(session1.block_id_bits == 1);
  CHECK(session1.bt_header_bytes() == 1);

  // Encoded block-data length = 4 + bt + packet bytes, exactly.
  BlockData data;
  data.block_id = 413;
  data.fragment.assign(64, 0xAB);
  const auto bytes =
      encode(Packet{{MsgType::NonConfirmable, kCodeBlockData, 7}, data},
             &session576);
  CHECK(bytes.size() == 4 + 2 + 64);
}

TEST_CASE("agreement round trip") {
  const auto request = request_for(256, 144, 8, 8, 64);
  const auto bytes = encode(
      Packet{{MsgType::Confirmable, kCodeAgreementRequest, 0x1234}, request});
  CHECK(bytes.size() == 4 + 26);
  const auto packet = decode(bytes);
  CHECK(packet.base.type == MsgType::Confirmable);
  CHECK(packet.base.message_id == 0x1234);
  CHECK(std::get<AgreementRequest>(packet.body) == request);

  const auto ack_bytes = encode(
      Packet{{MsgType::Acknowledgement, kCodeAgreementAck, 0x1234},
             AgreementAck{0xBEEF}});
  CHECK(ack_bytes.size() == 6);
  const auto ack = decode(ack_bytes);
  CHECK(std::get<AgreementAck>(ack.body).session_id == 0xBEEF);
}

TEST_CASE("decode error kinds are distinct") {
  const auto expect_kind = [](const std::vector<std::uint8_t>& bytes,
                              const SessionParams* session,
                              DecodeErrorKind kind) {
    try {
      decode(bytes, session);
      FAIL("decode unexpectedly succeeded");
    } catch (const DecodeError& e) {
      CHECK(e.kind() == kind);
    }
  };

  expect_kind({0x40, 0x02}, nullptr, DecodeErrorKind::ShortBuffer);
  // Version 0.
  expect_kind({0x00, 0x02, 0, 1, 0, 0}, nullptr, DecodeErrorKind::BadVersion);
  // Unknown code 0.05.
  expect_kind({0x40, 0x05, 0, 1}, nullptr, DecodeErrorKind::UnknownCode);
  // Agreement request with a truncated body.
  expect_kind({0x40, 0x02, 0, 1, 0xBE, 0xEF}, nullptr,
              DecodeErrorKind::LengthMismatch);
  // Nonzero token length.
  expect_kind({0x42, 0x02, 0, 1}, nullptr, DecodeErrorKind::BadField);

  // Block data with the wrong payload length.
  const auto session = session_params_from(request_for(256, 144, 8, 8, 64));
  BlockData data;
  data.block_id = 1;
  data.fragment.assign(64, 1);
  auto bytes = encode(
      Packet{{MsgType::NonConfirmable, kCodeBlockData, 2}, data}, &session);
  bytes.pop_back();
  expect_kind(bytes, &session, DecodeErrorKind::LengthMismatch);

  // Block data without session context cannot be framed.
  bytes.push_back(1);
  expect_kind(bytes, nullptr, DecodeErrorKind::BadField);
}

TEST_CASE("encode rejects invariant violations") {
  const auto session = session_params_from(request_for(256, 144, 8, 8, 64));
  BlockData data;
  data.block_id = 576;  // out of range
  data.fragment.assign(64, 0);
  CHECK_THROWS_WITH_AS(
      encode(Packet{{MsgType::NonConfirmable, kCodeBlockData, 0}, data},
             &session),
      doctest::Contains("overflow"), Error);

  data.block_id = 0;
  data.fragment.assign(63, 0);  // wrong fragment size
  CHECK_THROWS_AS(
      encode(Packet{{MsgType::NonConfirmable, kCodeBlockData, 0}, data},
             &session),
      Error);

  // Type/code pairing is enforced both ways.
  data.fragment.assign(64, 0);
  CHECK_THROWS_AS(
      encode(Packet{{MsgType::Confirmable, kCodeBlockData, 0}, data},
             &session),
      Error);
  auto bytes = encode(
      Packet{{MsgType::NonConfirmable, kCodeBlockData, 0}, data}, &session);
  bytes[0] = 0x40;  // flip NON to CON
  CHECK_THROWS_AS(decode(bytes, &session), DecodeError);
}

TEST_CASE("random packets round-trip") {
  std::mt19937_64 rng(404);
  for (int rep = 0; rep < 2000; ++rep) {
    // Random session geometry.
    const std::uint16_t block_w = 1 << (rng() % 4);          // 1..8
    const std::uint16_t block_h = 1 << (rng() % 4);
    const std::uint16_t cols = 1 + rng() % 40;
    const std::uint16_t rows = 1 + rng() % 40;
    const std::uint8_t channels = rng() % 2 == 0 ? 1 : 3;
    const std::uint32_t block_bytes = block_w * block_h * channels;
    // Pick a packet size dividing the block size.
    std::uint32_t packet_size = block_bytes;
    if (block_bytes % 2 == 0 && rng() % 2 == 0) packet_size = block_bytes / 2;
    if (block_bytes % 4 == 0 && rng() % 2 == 0) packet_size = block_bytes / 4;

    AgreementRequest req;
    req.session_id = static_cast<std::uint16_t>(rng());
    req.total_transmissions = 1 + rng() % 100000;
    req.image_width = block_w * cols;
    req.image_height = block_h * rows;
    req.channels = channels;
    req.block_width = block_w;
    req.block_height = block_h;
    req.packet_size = static_cast<std::uint16_t>(packet_size);
    req.send_interval_us = static_cast<std::uint32_t>(rng());
    req.block_id_bits = static_cast<std::uint8_t>(
        block_id_bits_for(static_cast<std::size_t>(cols) * rows));
    const auto session = session_params_from(req);

    const std::uint16_t mid = static_cast<std::uint16_t>(rng());
    Packet packet;
    switch (rng() % 3) {
      case 0:
        packet = {{MsgType::Confirmable, kCodeAgreementRequest, mid}, req};
        break;
      case 1:
        packet = {{MsgType::Acknowledgement, kCodeAgreementAck, mid},
                  AgreementAck{static_cast<std::uint16_t>(rng())}};
        break;
      default: {
        BlockData data;
        data.block_id =
            static_cast<std::uint32_t>(rng() % session.block_count);
        data.fragment_index = static_cast<std::uint32_t>(
            rng() % session.fragments_per_block);
        data.fragment.resize(session.packet_size);
        for (auto& b : data.fragment) b = static_cast<std::uint8_t>(rng());
        packet = {{MsgType::NonConfirmable, kCodeBlockData, mid},
                  std::move(data)};
        break;
      }
    }
    const auto bytes = encode(packet, &session);
    const auto back = decode(bytes, &session);
    CHECK(back.base.type == packet.base.type);
    CHECK(back.base.code == packet.base.code);
    CHECK(back.base.message_id == packet.base.message_id);
    CHECK(back.body == packet.body);
    // decode(encode()) byte identity as well
    CHECK(encode(back, &session) == bytes);
  }
}
