#pragma once

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "provega/data_source.hpp"
#include "provega/net/server.hpp"
#include "provega/protocol.hpp"

namespace provega::net {

enum class GeneratorMode {
  compliant,   // waits for ack{b} while ack_window batches are unacknowledged
  flood,       // ignores ACKs and sends everything as fast as the socket allows
  disconnect,  // compliant, but drops the connection after `disconnect_after` batches
};

inline std::optional<GeneratorMode> parse_generator_mode(std::string_view s) {
  if (s == "compliant") return GeneratorMode::compliant;
  if (s == "flood") return GeneratorMode::flood;
  if (s == "disconnect") return GeneratorMode::disconnect;
  return std::nullopt;
}

struct FakeGeneratorOptions {
  std::uint64_t chunk_size = 100;
  double delay_ms = 0.0;
  std::uint64_t ack_window = 1;
  GeneratorMode mode = GeneratorMode::compliant;
  std::uint64_t disconnect_after = 0;
};

// What the generator observed. `max_in_flight` counts sent-but-unacknowledged
// batches at the moment of every send.
struct FakeGeneratorReport {
  std::uint64_t batches = 0;
  std::uint64_t sent = 0;
  std::uint64_t acked = 0;
  std::uint64_t max_in_flight = 0;
  std::uint64_t bad_acks = 0;  // acks for batches never sent, or acked twice
  bool ended = false;
  std::optional<std::string> error;
};

// Scripted WebSocket generator speaking the chunk/end/ack catalog. Either
// connects to an engine's `/ingest` or listens for an engine started with
// `--backend`. Runs on the caller's io_context; `on_done` fires once.
class FakeGenerator : public std::enable_shared_from_this<FakeGenerator> {
 public:
  using Done = std::function<void(const FakeGeneratorReport&)>;

  FakeGenerator(asio::io_context& ioc, const Dataset& data, FakeGeneratorOptions options, Done on_done)
      : ioc_(ioc), options_(options), on_done_(std::move(on_done)), timer_(ioc), acceptor_(ioc) {
    if (options_.chunk_size == 0) options_.chunk_size = 1;
    for (std::size_t i = 0; i < data.rows.size(); i += options_.chunk_size) {
      std::vector<Columns> batch;
      for (std::size_t j = i; j < std::min(data.rows.size(), i + options_.chunk_size); ++j)
        batch.push_back(data.rows[j].columns);
      batches_.push_back(std::move(batch));
    }
    report_.batches = batches_.size();
  }

  void connect(const std::string& url) {
    WsUrl target = parse_ws_url(url);
    auto resolver = std::make_shared<tcp::resolver>(ioc_);
    ws_ = std::make_unique<WsStream>(ioc_);
    resolver->async_resolve(target.host, target.port,
                            [self = shared_from_this(), resolver, target](beast::error_code ec, tcp::resolver::results_type r) {
                              if (ec) return self->finish("resolve: " + ec.message());
                              beast::get_lowest_layer(*self->ws_).async_connect(
                                  r, [self, target](beast::error_code ec, tcp::resolver::results_type::endpoint_type ep) {
                                    if (ec) return self->finish("connect: " + ec.message());
                                    self->ws_->async_handshake(target.host + ":" + std::to_string(ep.port()), target.target,
                                                               [self](beast::error_code ec) {
                                                                 if (ec) return self->finish("handshake: " + ec.message());
                                                                 self->begin();
                                                               });
                                  });
                            });
  }

  // Listens for one engine connection; returns the bound port.
  unsigned short listen(const std::string& address, unsigned short port) {
    tcp::endpoint endpoint(asio::ip::make_address(address), port);
    try {
      acceptor_.open(endpoint.protocol());
      acceptor_.set_option(asio::socket_base::reuse_address(true));
      acceptor_.bind(endpoint);
      acceptor_.listen();
    } catch (const boost::system::system_error& e) {
      throw BindError("cannot listen on " + address + ":" + std::to_string(port) + ": " + e.what());
    }
    acceptor_.async_accept([self = shared_from_this()](beast::error_code ec, tcp::socket socket) {
      boost::system::error_code ignored;
      self->acceptor_.close(ignored);
      if (ec) return self->finish("accept: " + ec.message());
      self->ws_ = std::make_unique<WsStream>(std::move(socket));
      self->ws_->async_accept([self](beast::error_code ec) {
        if (ec) return self->finish("handshake: " + ec.message());
        self->begin();
      });
    });
    return acceptor_.local_endpoint().port();
  }

  void cancel() {
    asio::post(ioc_, [self = shared_from_this()] { self->finish("cancelled"); });
  }

  const FakeGeneratorReport& report() const { return report_; }

 private:
  bool compliant() const { return options_.mode != GeneratorMode::flood; }
  std::uint64_t in_flight() const { return static_cast<std::uint64_t>(unacked_.size()); }

  void begin() {
    ws_->text(true);
    read_acks();
    send_next();
  }

  void read_acks() {
    ws_->async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        if (!self->done_) self->finish(self->complete() ? std::string() : "connection lost: " + ec.message());
        return;
      }
      std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      try {
        auto m = parse_message(std::string_view(text));
        if (const auto* ack = std::get_if<AckMsg>(&m)) {
          if (self->unacked_.erase(ack->batch) == 0) ++self->report_.bad_acks;
          else ++self->report_.acked;
        }
      } catch (const ProtocolError&) {
        ++self->report_.bad_acks;
      }
      if (self->complete()) return self->close();
      if (!self->writing_ && !self->waiting_) self->send_next();
      self->read_acks();
    });
  }

  bool complete() const { return report_.ended && unacked_.empty(); }

  void send_next() {
    if (done_ || writing_) return;
    if (next_ >= batches_.size()) {
      if (report_.ended) return;
      write(serialize(EndMsg{}), [self = shared_from_this()] {
        self->report_.ended = true;
        if (self->complete() || !self->compliant()) self->close_when_acked();
      });
      return;
    }
    if (options_.mode == GeneratorMode::disconnect && report_.sent >= options_.disconnect_after) {
      beast::error_code ec;
      beast::get_lowest_layer(*ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
      beast::get_lowest_layer(*ws_).socket().close(ec);
      finish(std::string());
      return;
    }
    if (compliant() && in_flight() >= options_.ack_window) return;  // resumed by the next ack
    std::uint64_t b = next_++;
    unacked_.insert(b);
    ++report_.sent;
    report_.max_in_flight = std::max(report_.max_in_flight, in_flight());
    write(serialize(ChunkMsg{b, batches_[b]}), [self = shared_from_this()] { self->pace(); });
  }

  void pace() {
    if (options_.delay_ms <= 0.0) return send_next();
    waiting_ = true;
    timer_.expires_after(std::chrono::microseconds(static_cast<std::int64_t>(options_.delay_ms * 1000.0)));
    timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
      self->waiting_ = false;
      if (!ec) self->send_next();
    });
  }

  // A flooding generator still waits for the engine to drain before leaving.
  void close_when_acked() {
    if (complete()) close();
  }

  template <class Then>
  void write(std::string text, Then then) {
    writing_ = true;
    auto payload = std::make_shared<std::string>(std::move(text));
    ws_->async_write(asio::buffer(*payload), [self = shared_from_this(), payload, then](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      if (ec) {
        if (!self->done_) self->finish("write: " + ec.message());
        return;
      }
      then();
    });
  }

  void close() {
    if (done_ || closing_) return;
    closing_ = true;
    ws_->async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) { self->finish({}); });
  }

  void finish(const std::string& error) {
    if (done_) return;
    done_ = true;
    if (!error.empty()) report_.error = error;
    timer_.cancel();
    boost::system::error_code ec;
    acceptor_.close(ec);
    if (ws_ && !closing_) beast::get_lowest_layer(*ws_).socket().close(ec);
    if (on_done_) on_done_(report_);
  }

  asio::io_context& ioc_;
  FakeGeneratorOptions options_;
  Done on_done_;
  asio::steady_timer timer_;
  tcp::acceptor acceptor_;
  std::unique_ptr<WsStream> ws_;
  beast::flat_buffer buffer_;
  std::vector<std::vector<Columns>> batches_;
  std::set<std::uint64_t> unacked_;
  std::uint64_t next_ = 0;
  bool writing_ = false;
  bool waiting_ = false;
  bool closing_ = false;
  bool done_ = false;
  FakeGeneratorReport report_;
};

}  // namespace provega::net
