#include "blockcast/channel.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <random>
#include <thread>

#include "blockcast/wire.hpp"

namespace blockcast {

SteadyClock::SteadyClock()
    : epoch_ns_(std::chrono::steady_clock::now().time_since_epoch().count()) {}

Micros SteadyClock::now() {
  const auto ns = std::chrono::steady_clock::now().time_since_epoch().count();
  return (ns - epoch_ns_) / 1000;
}

void SteadyClock::wait_until(Micros t) {
  const Micros current = now();
  if (t > current) {
    std::this_thread::sleep_for(std::chrono::microseconds(t - current));
  }
}

double uniform53(std::uint64_t word) {
  return static_cast<double>(word >> 11) * 0x1.0p-53;
}

namespace {

struct TimedDatagram {
  std::vector<std::uint8_t> bytes;
  Micros deliver_at;
};

}  // namespace

struct SimLink::Impl {
  struct Direction {
    std::mt19937_64 rng;
    std::uint64_t send_seq = 0;        // 1-based, counts every datagram
    std::uint64_t data_packet_count = 0;
    bool attempt_drop = false;         // current block attempt's fate
    std::uint64_t sent = 0, delivered = 0, dropped = 0;
  };

  ChannelConfig config;
  double attempt_loss = 0.0;  // loss^K, drawn once per block attempt
  mutable std::mutex mutex;
  Direction ab, ba;
  std::deque<TimedDatagram> to_a, to_b;
  std::function<void(Received&&)> b_sink;
  std::unique_ptr<Transport> endpoint_a, endpoint_b;

  explicit Impl(const ChannelConfig& cfg) : config(cfg) {
    if (!(cfg.loss_rate >= 0.0 && cfg.loss_rate <= 1.0)) {
      throw Error("loss rate must lie in [0,1]");
    }
    if (cfg.mode == ChannelMode::Udp) {
      throw Error("SimLink cannot run in UDP mode");
    }
    if (cfg.mode == ChannelMode::Scripted && cfg.drop_list.empty()) {
      throw Error("scripted mode requires a drop list");
    }
    if (cfg.fragments_per_block < 1) {
      throw Error("fragments per block must be >= 1");
    }
    attempt_loss =
        std::pow(cfg.loss_rate, static_cast<double>(cfg.fragments_per_block));
    ab.rng.seed(cfg.seed);
    ba.rng.seed(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  }

  bool decide_drop(Direction& dir, std::span<const std::uint8_t> bytes) {
    ++dir.send_seq;
    switch (config.mode) {
      case ChannelMode::Scripted:
        // The drop list addresses the forward (A to B) path; the reverse
        // path of a scripted link is lossless.
        return &dir == &ab &&
               std::find(config.drop_list.begin(), config.drop_list.end(),
                         dir.send_seq) != config.drop_list.end();
      case ChannelMode::SimPacket:
        return uniform53(dir.rng()) < config.loss_rate;
      case ChannelMode::SimBlock: {
        if (!looks_like_block_data(bytes)) {
          return uniform53(dir.rng()) < config.loss_rate;
        }
        // One fate per K-fragment block attempt, drawn on its first fragment.
        if (dir.data_packet_count % config.fragments_per_block == 0) {
          dir.attempt_drop = uniform53(dir.rng()) < attempt_loss;
        }
        ++dir.data_packet_count;
        return dir.attempt_drop;
      }
      case ChannelMode::Udp:
        break;
    }
    return false;
  }

  void send_from(bool from_a, std::span<const std::uint8_t> bytes, Micros now) {
    std::function<void(Received&&)> sink;
    Micros at = 0;
    {
      std::lock_guard lock(mutex);
      Direction& dir = from_a ? ab : ba;
      ++dir.sent;
      if (decide_drop(dir, bytes)) {
        ++dir.dropped;
        return;
      }
      ++dir.delivered;
      at = now + config.delay_us;
      if (from_a && b_sink) {
        sink = b_sink;  // dispatch outside the lock
      } else {
        auto& queue = from_a ? to_b : to_a;
        queue.push_back({{bytes.begin(), bytes.end()}, at});
        return;
      }
    }
    sink(Received{{bytes.begin(), bytes.end()}, at});
  }

  std::optional<Received> poll_side(bool side_a, Micros now) {
    std::lock_guard lock(mutex);
    auto& queue = side_a ? to_a : to_b;
    if (queue.empty() || queue.front().deliver_at > now) {
      return std::nullopt;
    }
    Received r{std::move(queue.front().bytes), queue.front().deliver_at};
    queue.pop_front();
    return r;
  }

  bool wait_side(bool side_a, Clock& clock, Micros until) {
    Micros next = -1;
    {
      std::lock_guard lock(mutex);
      auto& queue = side_a ? to_a : to_b;
      if (!queue.empty()) next = queue.front().deliver_at;
    }
    if (next >= 0 && next <= until) {
      clock.wait_until(std::max(next, clock.now()));
      return true;
    }
    clock.wait_until(until);
    return false;
  }
};

namespace {

class SimEndpoint : public Transport {
 public:
  SimEndpoint(SimLink::Impl& impl, bool is_a) : impl_(impl), is_a_(is_a) {}

  void send(std::span<const std::uint8_t> bytes, Micros now) override {
    impl_.send_from(is_a_, bytes, now);
  }
  std::optional<Received> poll(Micros now) override {
    return impl_.poll_side(is_a_, now);
  }
  bool wait_ready(Clock& clock, Micros until) override {
    return impl_.wait_side(is_a_, clock, until);
  }

 private:
  SimLink::Impl& impl_;
  bool is_a_;
};

}  // namespace

SimLink::SimLink(const ChannelConfig& config)
    : impl_(std::make_unique<Impl>(config)) {
  impl_->endpoint_a = std::make_unique<SimEndpoint>(*impl_, true);
  impl_->endpoint_b = std::make_unique<SimEndpoint>(*impl_, false);
}

SimLink::~SimLink() = default;

Transport& SimLink::endpoint_a() { return *impl_->endpoint_a; }

Transport& SimLink::endpoint_b() { return *impl_->endpoint_b; }

void SimLink::set_b_sink(std::function<void(Received&&)> sink) {
  std::lock_guard lock(impl_->mutex);
  impl_->b_sink = std::move(sink);
}

SimLink::Stats SimLink::stats() const {
  std::lock_guard lock(impl_->mutex);
  Stats s;
  s.sent_ab = impl_->ab.sent;
  s.delivered_ab = impl_->ab.delivered;
  s.dropped_ab = impl_->ab.dropped;
  s.sent_ba = impl_->ba.sent;
  s.delivered_ba = impl_->ba.delivered;
  s.dropped_ba = impl_->ba.dropped;
  return s;
}

struct UdpTransport::Impl {
  int fd = -1;
  sockaddr_in peer{};
  bool has_peer = false;

  ~Impl() {
    if (fd >= 0) ::close(fd);
  }
};

namespace {

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (host.empty()) {
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    return addr;
  }
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) {
    return addr;
  }
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_DGRAM;
  addrinfo* result = nullptr;
  if (getaddrinfo(host.c_str(), nullptr, &hints, &result) != 0 || !result) {
    throw Error("cannot resolve host: " + host);
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(result->ai_addr)->sin_addr;
  freeaddrinfo(result);
  return addr;
}

}  // namespace

UdpTransport::UdpTransport(const std::string& bind_host,
                           std::uint16_t bind_port)
    : impl_(std::make_unique<Impl>()) {
  impl_->fd = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (impl_->fd < 0) {
    throw Error("cannot create UDP socket");
  }
  sockaddr_in addr = resolve(bind_host, bind_port);
  if (::bind(impl_->fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    throw Error("cannot bind UDP socket: " + std::string(std::strerror(errno)));
  }
}

UdpTransport::~UdpTransport() = default;

void UdpTransport::connect_peer(const std::string& host, std::uint16_t port) {
  impl_->peer = resolve(host, port);
  impl_->has_peer = true;
}

std::uint16_t UdpTransport::local_port() const {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  if (::getsockname(impl_->fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    throw Error("getsockname failed");
  }
  return ntohs(addr.sin_port);
}

void UdpTransport::send(std::span<const std::uint8_t> bytes, Micros) {
  if (!impl_->has_peer) {
    throw Error("no peer address to send to");
  }
  const ssize_t n = ::sendto(impl_->fd, bytes.data(), bytes.size(), 0,
                             reinterpret_cast<sockaddr*>(&impl_->peer),
                             sizeof impl_->peer);
  if (n < 0 || static_cast<std::size_t>(n) != bytes.size()) {
    throw Error("UDP send failed: " + std::string(std::strerror(errno)));
  }
}

std::optional<Received> UdpTransport::poll(Micros now) {
  std::uint8_t buf[65536];
  sockaddr_in from{};
  socklen_t from_len = sizeof from;
  const ssize_t n =
      ::recvfrom(impl_->fd, buf, sizeof buf, MSG_DONTWAIT,
                 reinterpret_cast<sockaddr*>(&from), &from_len);
  if (n < 0) {
    if (errno == EAGAIN || errno == EWOULDBLOCK) return std::nullopt;
    throw Error("UDP recv failed: " + std::string(std::strerror(errno)));
  }
  if (!impl_->has_peer) {
    impl_->peer = from;  // reply to whoever spoke first
    impl_->has_peer = true;
  }
  return Received{{buf, buf + n}, now};
}

bool UdpTransport::wait_ready(Clock& clock, Micros until) {
  const Micros now = clock.now();
  if (until <= now) return false;
  pollfd pfd{impl_->fd, POLLIN, 0};
  const int timeout_ms =
      static_cast<int>(std::min<Micros>((until - now + 999) / 1000, 60'000));
  return ::poll(&pfd, 1, timeout_ms) > 0;
}

std::optional<Received> next_datagram(Transport& transport, Clock& clock,
                                      Micros until) {
  for (;;) {
    if (auto r = transport.poll(clock.now())) return r;
    if (clock.now() >= until) return std::nullopt;
    transport.wait_ready(clock, until);
    if (auto r = transport.poll(clock.now())) return r;
    if (clock.now() >= until) return std::nullopt;
  }
}

}  // namespace blockcast
