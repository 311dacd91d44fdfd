#include <thread>

#include "blockcast/csv.hpp"
#include "blockcast/experiment.hpp"
#include "blockcast/protocol.hpp"
#include "doctest.h"

using namespace blockcast;

// Full client/server exchange over loopback UDP sockets: a loss-free run
// with a generous budget must reproduce the image byte for byte.
TEST_CASE("udp loopback image transfer") {
  const ImageBuffer image = synthetic_image(32, 32, 1);
  const Tiling tiling = tile(image, 8, 8);  // 16 blocks
  const auto map = normalize_values(std::vector<double>(16, 1.0));
  ChannelParams channel{0.0, tiling.grid.block_bytes()};
  SizingParams sizing{tiling.grid.block_bytes(),
                      16ULL * tiling.grid.block_bytes(),
                      12.0 * 16 * tiling.grid.block_bytes()};
  const auto plan =
      plan_transmission(channel, sizing, map, BlockIndexSet{16});

  UdpTransport server_transport("127.0.0.1", 0);
  const std::uint16_t port = server_transport.local_port();

  ImageBuffer received_image;
  ReceptionReport report;
  std::thread server([&] {
    SteadyClock clock;
    // Generous deadline guard: this test checks integrity, and a loaded
    // machine may delay thread scheduling well past the pacing interval.
    Receiver receiver(ReceiverOptions{0, 2000});
    const Micros give_up = clock.now() + 10'000'000;
    while (!receiver.session_established() && clock.now() < give_up) {
      if (auto datagram =
              next_datagram(server_transport, clock, give_up)) {
        if (auto reply =
                receiver.on_datagram(datagram->bytes, datagram->at)) {
          server_transport.send(*reply, clock.now());
        }
      }
    }
    REQUIRE(receiver.session_established());
    while (!receiver.complete() && clock.now() < receiver.deadline()) {
      if (auto datagram = next_datagram(server_transport, clock,
                                        receiver.deadline())) {
        receiver.on_datagram(datagram->bytes, datagram->at);
      }
    }
    auto result =
        receiver.finalize(std::max(clock.now(), receiver.deadline()));
    received_image = std::move(result.image.image);
    report = result.report;
  });

  SteadyClock clock;
  UdpTransport client("127.0.0.1", 0);
  client.connect_peer("127.0.0.1", port);
  SenderOptions options;
  options.send_interval_us = 200;
  options.seed = 99;
  Sender sender(plan, tiling, options);
  const auto info = sender.run_agreement(client, clock);
  CHECK(info.requests_sent >= 1);
  const SendLog& log = sender.run_block_phase(client, clock);
  CHECK(log.entries.size() == plan.total_transmissions);
  server.join();

  CHECK(report.unique_blocks == 16);
  CHECK(received_image == image);
}
