#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blockcast/errors.hpp"

namespace blockcast {

/// Microseconds since the clock's epoch.
using Micros = std::int64_t;

/// Time source the protocol runs against. A virtual clock makes simulations
/// instantaneous and exactly reproducible; the steady clock paces for real.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual Micros now() = 0;
  virtual void wait_until(Micros t) = 0;
};

class VirtualClock : public Clock {
 public:
  Micros now() override { return now_; }
  void wait_until(Micros t) override {
    if (t > now_) now_ = t;
  }

 private:
  Micros now_ = 0;
};

class SteadyClock : public Clock {
 public:
  SteadyClock();
  Micros now() override;
  void wait_until(Micros t) override;

 private:
  std::int64_t epoch_ns_;
};

enum class ChannelMode {
  Udp,        // real datagrams
  SimPacket,  // each datagram dropped i.i.d. with probability loss_rate
  SimBlock,   // each K-packet block attempt dropped atomically w.p. loss^K
  Scripted,   // exact datagram sequence numbers dropped, no randomness
};

struct ChannelConfig {
  ChannelMode mode = ChannelMode::SimPacket;
  double loss_rate = 0.0;
  std::uint64_t seed = 0;
  std::uint32_t delay_us = 0;
  // Scripted: 1-based forward-path (A to B) send sequence numbers to drop;
  // the reverse path of a scripted link is lossless.
  std::vector<std::uint64_t> drop_list;
  std::uint32_t fragments_per_block = 1;  // SimBlock: K
};

struct Received {
  std::vector<std::uint8_t> bytes;
  Micros at = 0;  // delivery timestamp
};

/// One endpoint of a datagram channel.
class Transport {
 public:
  virtual ~Transport() = default;

  virtual void send(std::span<const std::uint8_t> bytes, Micros now) = 0;

  /// Returns the next datagram whose delivery time has been reached.
  virtual std::optional<Received> poll(Micros now) = 0;

  /// Blocks (real transports) or advances the clock (virtual) until either a
  /// datagram may be ready or `until` is reached. Returns false on timeout
  /// with nothing pending.
  virtual bool wait_ready(Clock& clock, Micros until) = 0;
};

/// Deterministic uniform draw in [0,1) from a 64-bit generator word:
/// the top 53 bits scaled by 2^-53. Stable across platforms.
double uniform53(std::uint64_t word);

/// In-process bidirectional link between endpoints A and B with i.i.d.
/// Bernoulli loss, block-atomic loss, or scripted drops. Loss decisions are
/// made in send order with one RNG stream per direction, so a fixed seed
/// reproduces the exact drop pattern. Queues are mutex-guarded; either side
/// may live on its own thread.
class SimLink {
 public:
  explicit SimLink(const ChannelConfig& config);
  ~SimLink();

  Transport& endpoint_a();
  Transport& endpoint_b();

  /// Routes B-side deliveries to a callback instead of B's queue. Replies
  /// sent through endpoint_b() inside the callback traverse the link back
  /// to A as usual. Used by single-threaded in-process sessions.
  void set_b_sink(std::function<void(Received&&)> sink);

  struct Stats {
    std::uint64_t sent_ab = 0, delivered_ab = 0, dropped_ab = 0;
    std::uint64_t sent_ba = 0, delivered_ba = 0, dropped_ba = 0;
  };
  Stats stats() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

/// Plain UDP endpoint. When no peer is configured, replies go to the source
/// of the most recently received datagram.
class UdpTransport : public Transport {
 public:
  UdpTransport(const std::string& bind_host, std::uint16_t bind_port);
  ~UdpTransport() override;

  void connect_peer(const std::string& host, std::uint16_t port);
  std::uint16_t local_port() const;

  void send(std::span<const std::uint8_t> bytes, Micros now) override;
  std::optional<Received> poll(Micros now) override;
  bool wait_ready(Clock& clock, Micros until) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Polls until a datagram arrives or `until` is reached.
std::optional<Received> next_datagram(Transport& transport, Clock& clock,
                                      Micros until);

}  // namespace blockcast
