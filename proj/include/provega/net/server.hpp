#pragma once

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "provega/data_source.hpp"
#include "provega/live.hpp"
#include "provega/protocol.hpp"
#include "provega/scheduler.hpp"

namespace provega::net {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using WsStream = websocket::stream<beast::tcp_stream>;

struct WsUrl {
  std::string host;
  std::string port;
  std::string target;
};

inline WsUrl parse_ws_url(const std::string& url) {
  const std::string scheme = "ws://";
  if (url.rfind(scheme, 0) != 0) throw ConnectError("only ws:// URLs are supported: " + url);
  std::string rest = url.substr(scheme.size());
  WsUrl out;
  auto slash = rest.find('/');
  std::string authority = rest.substr(0, slash);
  out.target = slash == std::string::npos ? "/" : rest.substr(slash);
  auto colon = authority.rfind(':');
  if (colon == std::string::npos) {
    out.host = authority;
    out.port = "80";
  } else {
    out.host = authority.substr(0, colon);
    out.port = authority.substr(colon + 1);
  }
  if (out.host.empty()) throw ConnectError("missing host in " + url);
  return out;
}

inline std::string_view mime_type(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".ico") return "image/x-icon";
  if (ext == ".wasm") return "application/wasm";
  return "application/octet-stream";
}

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 7878;
  std::filesystem::path ui_dir;
  // Rows read from the generator but not yet acknowledged; beyond this,
  // frames are left unread. Unbounded by default.
  std::uint64_t max_buffer_rows = std::numeric_limits<std::uint64_t>::max();
  // Outgoing messages queued for an observer before it is dropped.
  std::size_t client_queue_limit = 1024;
  std::optional<std::string> backend_url;
  bool verbose = true;
  // Sees every session event on the driver thread, before it is fanned out.
  std::function<void(const Event&, const Session&)> observer;
};

// Builds a session. A null document means the one the server was started with.
using SessionFactory = std::function<std::unique_ptr<Session>(const Json* document)>;

class Server;

// ---- UI client ----------------------------------------------------------------

class UiClient : public std::enable_shared_from_this<UiClient> {
 public:
  UiClient(tcp::socket socket, Server& server, std::size_t queue_limit)
      : ws_(std::move(socket)), server_(server), queue_limit_(queue_limit) {}

  void accept(http::request<http::string_body> req);
  void send(std::shared_ptr<const std::string> text);
  void close();
  bool closed() const { return closed_; }
  std::uint64_t id() const { return id_; }
  void set_id(std::uint64_t id) { id_ = id; }

 private:
  void read();
  void write_next();

  WsStream ws_;
  Server& server_;
  std::size_t queue_limit_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  bool writing_ = false;
  bool closed_ = false;
  std::uint64_t id_ = 0;
};

// ---- generator link -----------------------------------------------------------------

// Reads chunk frames from a generator. A new frame is read only while the
// unacknowledged batches stay under the ACK window (when ACK flow control is
// on) and the uncommitted rows under the buffer cap.
class GeneratorLink : public std::enable_shared_from_this<GeneratorLink> {
 public:
  GeneratorLink(WsStream ws, Server& server, bool ack_flow_control, std::uint64_t window, std::uint64_t max_rows)
      : ws_(std::move(ws)), server_(server), ack_flow_control_(ack_flow_control), window_(window), max_rows_(max_rows) {}

  void start() { maybe_read(); }
  void on_ack(std::uint64_t batch);
  void close();
  std::uint64_t unacked() const { return unacked_.size(); }

 private:
  void maybe_read();
  void on_frame(const std::string& text);
  void write_next();
  void fail(const std::string& reason);

  WsStream ws_;
  Server& server_;
  bool ack_flow_control_;
  std::uint64_t window_;
  std::uint64_t max_rows_;
  beast::flat_buffer buffer_;
  ChunkStream stream_;
  std::map<std::uint64_t, std::size_t> unacked_;  // batch -> rows
  std::uint64_t buffered_rows_ = 0;
  std::deque<std::string> outbox_;
  bool reading_ = false;
  bool writing_ = false;
  bool ended_ = false;
  bool closed_ = false;
};

// ---- server ---------------------------------------------------------------------------

class Server {
 public:
  Server(asio::io_context& ioc, ServerOptions options, SessionFactory factory)
      : ioc_(ioc), options_(std::move(options)), factory_(std::move(factory)), acceptor_(ioc) {}

  ~Server() { stop(); }

  // Binds, starts the session driver and begins accepting. Throws BindError.
  void start() {
    auto session = factory_(nullptr);
    generator_driven_ = session->generator_driven();
    ack_flow_control_ = session->spec().progression.control.ack_flow_control;
    ack_window_ = session->spec().progression.control.ack_window;
    try {
      tcp::endpoint endpoint(asio::ip::make_address(options_.address), options_.port);
      acceptor_.open(endpoint.protocol());
      acceptor_.set_option(asio::socket_base::reuse_address(true));
      acceptor_.bind(endpoint);
      acceptor_.listen(asio::socket_base::max_listen_connections);
    } catch (const boost::system::system_error& e) {
      throw BindError("cannot listen on " + options_.address + ":" + std::to_string(options_.port) + ": " + e.what());
    }
    live_ = std::make_unique<LiveSession>(std::move(session),
                                          [this](const Event& ev, const Session& s) { on_event(ev, s); });
    live_->run();
    log("listening on " + options_.address + ":" + std::to_string(port()));
    accept();
    if (options_.backend_url) connect_backend(*options_.backend_url);
  }

  // Call from the io thread, or once the io context has stopped running.
  void stop() {
    if (stopped_) return;
    stopped_ = true;
    if (live_) live_->shutdown();
    boost::system::error_code ec;
    acceptor_.close(ec);
    for (auto& c : std::vector<std::shared_ptr<UiClient>>(clients_)) c->close();
    if (generator_) generator_->close();
  }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }
  LiveSession& live() { return *live_; }
  asio::io_context& ioc() { return ioc_; }
  const ServerOptions& options() const { return options_; }

  void log(const std::string& line) const {
    if (options_.verbose) std::clog << "[provega] " << line << std::endl;
  }

  // ---- called on the io thread ----

  void join(const std::shared_ptr<UiClient>& client) {
    client->set_id(++client_seq_);
    bool controller = !controller_.lock();
    if (controller) controller_ = client;
    log("client " + std::to_string(client->id()) + " joined as " + (controller ? "controller" : "observer"));
    // Registration happens on the driver thread so the catch-up state and the
    // broadcast stream line up exactly.
    std::weak_ptr<UiClient> weak = client;
    live_->post([this, weak](Session& s, double) {
      auto hello = share(serialize(hello_for(s)));
      std::shared_ptr<const std::string> catch_up;
      if (s.state().step >= 0) catch_up = share(serialize(snapshot_message(s)));
      auto status = share(serialize(StatusMsg{s.state().status, s.alive(s.now()), s.state().warning}));
      asio::post(ioc_, [this, weak, hello, catch_up, status] {
        auto c = weak.lock();
        if (!c || c->closed()) return;
        clients_.push_back(c);
        c->send(hello);
        if (catch_up) c->send(catch_up);
        c->send(status);
      });
    });
  }

  void leave(const std::shared_ptr<UiClient>& client) {
    std::erase(clients_, client);
    if (controller_.lock() == client) controller_.reset();
    log("client " + std::to_string(client->id()) + " left");
  }

  void on_client_message(const std::shared_ptr<UiClient>& client, const std::string& text) {
    Message message;
    try {
      message = parse_message(std::string_view(text));
    } catch (const ProtocolError& e) {
      reply_status(client, e.what());
      return;
    }
    if (std::holds_alternative<SnapshotRequestMsg>(message)) {
      std::weak_ptr<UiClient> weak = client;
      live_->post([this, weak](Session& s, double) {
        auto snap = share(serialize(snapshot_message(s)));
        asio::post(ioc_, [weak, snap] {
          if (auto c = weak.lock()) c->send(snap);
        });
      });
      return;
    }
    const bool steering = std::holds_alternative<ControlMsg>(message) || std::holds_alternative<SetMsg>(message);
    if (!steering) {
      reply_status(client, "unexpected message type from a client");
      return;
    }
    auto current = controller_.lock();
    if (current && current != client) {
      reply_status(client, "not controller");
      return;
    }
    if (!current) {
      controller_ = client;
      log("client " + std::to_string(client->id()) + " promoted to controller");
    }
    std::weak_ptr<UiClient> weak = client;
    if (const auto* control = std::get_if<ControlMsg>(&message)) {
      if (control->action == "restart") {
        restart(client, control->params);
        return;
      }
      auto action = parse_action(control->action);
      if (!action) {
        reply_status(client, "unknown action '" + control->action + "'");
        return;
      }
      log("control " + control->action);
      live_->post([this, weak, a = *action](Session& s, double now) {
        try {
          s.control(a, now);
        } catch (const Error& e) {
          reply_status_from_driver(weak, s, e.what());
        }
      });
      return;
    }
    const auto& set = std::get<SetMsg>(message);
    std::optional<std::uint64_t> value;
    if (set.value.is_number_unsigned()) {
      value = set.value.get<std::uint64_t>();
    } else if (set.value.is_number_integer()) {
      value = set.value.get<std::int64_t>() < 0 ? 0 : set.value.get<std::uint64_t>();
    } else if (!set.value.is_null()) {
      reply_status(client, "set: value must be a non-negative integer or null");
      return;
    }
    live_->post([this, weak, key = set.key, value](Session& s, double now) {
      try {
        s.set_parameter(key, value, now);
      } catch (const Error& e) {
        reply_status_from_driver(weak, s, e.what());
      }
    });
  }

  // Driver thread -> io thread fan-out.
  void on_event(const Event& ev, const Session& s) {
    if (options_.observer) options_.observer(ev, s);
    if (const auto* ack = std::get_if<AckEvent>(&ev)) {
      auto b = ack->batch;
      asio::post(ioc_, [this, b] {
        if (generator_) generator_->on_ack(b);
      });
      return;
    }
    std::shared_ptr<const std::string> text;
    if (const auto* cs = std::get_if<ChangesetEvent>(&ev)) {
      text = share(serialize(to_message(*cs)));
    } else if (const auto* st = std::get_if<StatusEvent>(&ev)) {
      text = share(serialize(to_message(*st)));
      log(std::string("status ") + std::string(to_string(st->status)) + (st->warning ? " (" + *st->warning + ")" : ""));
      if (st->status == Status::stopped && generator_driven_) {
        asio::post(ioc_, [this] {
          if (generator_) generator_->close();
        });
      }
    }
    asio::post(ioc_, [this, text] {
      for (auto& c : std::vector<std::shared_ptr<UiClient>>(clients_)) c->send(text);
    });
  }

  void attach_generator(WsStream ws) {
    if (!generator_driven_ || generator_) {
      log("generator rejected: " + std::string(generator_ ? "one is already attached" : "session reads its own data"));
      auto holder = std::make_shared<WsStream>(std::move(ws));
      holder->async_close(websocket::close_code::policy_error, [holder](beast::error_code) {});
      return;
    }
    generator_ = std::make_shared<GeneratorLink>(std::move(ws), *this, ack_flow_control_, ack_window_,
                                                 options_.max_buffer_rows);
    log("generator attached");
    generator_->start();
  }

  bool is_controller(const UiClient& client) const {
    auto c = controller_.lock();
    return c && c.get() == &client;
  }

  // Largest number of unacknowledged batches any generator link held.
  std::uint64_t max_unacked() const { return max_unacked_; }
  void note_unacked(std::uint64_t n) {
    if (n > max_unacked_) max_unacked_ = n;
  }

  void handle_http(tcp::socket socket);

 private:
  static std::shared_ptr<const std::string> share(std::string s) {
    return std::make_shared<const std::string>(std::move(s));
  }

  static ChangesetMsg snapshot_message(const Session& s) {
    ChangesetMsg m;
    m.changeset = s.catch_up();
    m.quality = s.last_quality();
    for (const auto& r : m.changeset.inserts) m.report.changed_ids.push_back(r.id);
    m.report.highlight_duration_ms = 0;
    return m;
  }

  void reply_status(const std::shared_ptr<UiClient>& client, std::string warning) {
    std::weak_ptr<UiClient> weak = client;
    live_->post([this, weak, warning](Session& s, double) { reply_status_from_driver(weak, s, warning); });
  }

  void reply_status_from_driver(std::weak_ptr<UiClient> weak, const Session& s, const std::string& warning) {
    auto text = share(serialize(StatusMsg{s.state().status, s.alive(s.now()), warning}));
    asio::post(ioc_, [weak, text] {
      if (auto c = weak.lock()) c->send(text);
    });
  }

  void restart(const std::shared_ptr<UiClient>& client, const std::optional<Json>& params) {
    const Json* doc = nullptr;
    if (params && params->is_object() && params->contains("spec")) doc = &(*params)["spec"];
    std::unique_ptr<Session> next;
    try {
      next = factory_(doc);
    } catch (const Error& e) {
      reply_status(client, std::string("restart rejected: ") + e.what());
      return;
    }
    if (next->generator_driven()) {
      reply_status(client, "restart rejected: generator-driven sessions cannot restart");
      return;
    }
    log("restart");
    auto hello = share(serialize(hello_for(*next)));
    live_->post([this, hello](Session&, double) {
      asio::post(ioc_, [this, hello] {
        for (auto& c : clients_) c->send(hello);
      });
    });
    live_->replace(std::move(next));
  }

  void accept() {
    acceptor_.async_accept(asio::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) {
        if (ec != asio::error::operation_aborted) log("accept failed: " + ec.message());
        if (!acceptor_.is_open()) return;
      } else {
        handle_http(std::move(socket));
      }
      if (acceptor_.is_open()) accept();
    });
  }

  void connect_backend(const std::string& url);

  asio::io_context& ioc_;
  ServerOptions options_;
  SessionFactory factory_;
  tcp::acceptor acceptor_;
  std::unique_ptr<LiveSession> live_;
  std::vector<std::shared_ptr<UiClient>> clients_;
  std::weak_ptr<UiClient> controller_;
  std::shared_ptr<GeneratorLink> generator_;
  std::uint64_t client_seq_ = 0;
  bool generator_driven_ = false;
  bool ack_flow_control_ = false;
  std::uint64_t ack_window_ = 1;
  std::atomic<std::uint64_t> max_unacked_{0};
  bool stopped_ = false;
};

// ---- HTTP entry: static files or WebSocket upgrade ------------------------------

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket socket, Server& server) : stream_(std::move(socket)), server_(server) {}

  void start() { read(); }

 private:
  void read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->route();
    });
  }

  void route() {
    stream_.expires_never();
    if (websocket::is_upgrade(req_)) {
      std::string target(req_.target());
      if (auto q = target.find('?'); q != std::string::npos) target.resize(q);
      if (target == "/session") {
        auto client = std::make_shared<UiClient>(stream_.release_socket(), server_, server_.options().client_queue_limit);
        client->accept(std::move(req_));
        return;
      }
      if (target == "/ingest") {
        auto ws = std::make_shared<WsStream>(stream_.release_socket());
        ws->read_message_max(64 * 1024 * 1024);
        ws->async_accept(req_, [ws, &server = server_](beast::error_code ec) {
          if (ec) return;
          server.attach_generator(std::move(*ws));
        });
        return;
      }
      respond(http::status::not_found, "text/plain", "unknown WebSocket endpoint\n");
      return;
    }
    serve_static();
  }

  void serve_static() {
    if (req_.method() != http::verb::get && req_.method() != http::verb::head) {
      respond(http::status::method_not_allowed, "text/plain", "method not allowed\n");
      return;
    }
    const auto& root = server_.options().ui_dir;
    std::string target(req_.target());
    if (auto q = target.find('?'); q != std::string::npos) target.resize(q);
    if (root.empty() || target.empty() || target[0] != '/' || target.find("..") != std::string::npos) {
      respond(http::status::not_found, "text/plain", "not found\n");
      return;
    }
    std::filesystem::path path = root / target.substr(1);
    if (target.back() == '/') path /= "index.html";
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
      respond(http::status::not_found, "text/plain", "not found\n");
      return;
    }
    std::ifstream in(path, std::ios::binary);
    std::ostringstream body;
    body << in.rdbuf();
    respond(http::status::ok, mime_type(path), body.str());
  }

  void respond(http::status status, std::string_view type, std::string body) {
    auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
    res->set(http::field::server, "provega");
    res->set(http::field::content_type, beast::string_view(type.data(), type.size()));
    res->keep_alive(false);
    res->body() = req_.method() == http::verb::head ? std::string() : std::move(body);
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
      beast::error_code ec;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
    });
  }

  beast::tcp_stream stream_;
  Server& server_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
};

inline void Server::handle_http(tcp::socket socket) {
  std::make_shared<HttpSession>(std::move(socket), *this)->start();
}

inline void Server::connect_backend(const std::string& url) {
  WsUrl target;
  try {
    target = parse_ws_url(url);
  } catch (const ConnectError& e) {
    live_->post([reason = std::string(e.what())](Session& s, double now) { s.push_disconnect(reason, now); });
    return;
  }
  auto resolver = std::make_shared<tcp::resolver>(ioc_);
  auto ws = std::make_shared<WsStream>(asio::make_strand(ioc_));
  auto failed = [this, url](const std::string& what) {
    log("backend " + url + ": " + what);
    live_->post([reason = "cannot reach generator " + url + ": " + what](Session& s, double now) {
      s.push_disconnect(reason, now);
    });
  };
  resolver->async_resolve(target.host, target.port, [this, resolver, ws, target, failed](beast::error_code ec,
                                                                                           tcp::resolver::results_type results) {
    if (ec) return failed(ec.message());
    beast::get_lowest_layer(*ws).expires_after(std::chrono::seconds(10));
    beast::get_lowest_layer(*ws).async_connect(results, [this, ws, target, failed](beast::error_code ec,
                                                                                   tcp::resolver::results_type::endpoint_type ep) {
      if (ec) return failed(ec.message());
      beast::get_lowest_layer(*ws).expires_never();
      ws->read_message_max(64 * 1024 * 1024);
      ws->async_handshake(target.host + ":" + std::to_string(ep.port()), target.target,
                          [this, ws, failed](beast::error_code ec) {
                            if (ec) return failed(ec.message());
                            attach_generator(std::move(*ws));
                          });
    });
  });
}

// ---- UiClient ----------------------------------------------------------------------

inline void UiClient::accept(http::request<http::string_body> req) {
  ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
  ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
    if (ec) return;
    self->server_.join(self);
    self->read();
  });
}

inline void UiClient::read() {
  ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->closed_ = true;
      self->server_.leave(self);
      return;
    }
    std::string text = beast::buffers_to_string(self->buffer_.data());
    self->buffer_.consume(self->buffer_.size());
    self->server_.on_client_message(self, text);
    if (!self->closed_) self->read();
  });
}

inline void UiClient::send(std::shared_ptr<const std::string> text) {
  if (closed_) return;
  if (queue_.size() >= queue_limit_ && !server_.is_controller(*this)) {
    server_.log("client " + std::to_string(id_) + " dropped: outgoing queue over " + std::to_string(queue_limit_));
    close();
    return;
  }
  queue_.push_back(std::move(text));
  if (!writing_) write_next();
}

inline void UiClient::write_next() {
  if (queue_.empty() || closed_) {
    writing_ = false;
    return;
  }
  writing_ = true;
  ws_.text(true);
  ws_.async_write(asio::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->closed_ = true;
      return;
    }
    self->queue_.pop_front();
    self->write_next();
  });
}

inline void UiClient::close() {
  if (closed_) return;
  closed_ = true;
  queue_.clear();
  ws_.async_close(websocket::close_code::going_away, [self = shared_from_this()](beast::error_code) {});
  server_.leave(shared_from_this());
}

// ---- GeneratorLink ------------------------------------------------------------------

inline void GeneratorLink::maybe_read() {
  if (reading_ || closed_) return;
  // After end{} the link only waits for the close handshake.
  if (!ended_) {
    if (ack_flow_control_ && unacked_.size() >= window_) return;
    if (buffered_rows_ >= max_rows_) return;
  }
  reading_ = true;
  ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
    self->reading_ = false;
    if (ec) {
      if (self->ended_) {
        self->closed_ = true;
        return;
      }
      self->fail(ec.message());
      return;
    }
    std::string text = beast::buffers_to_string(self->buffer_.data());
    self->buffer_.consume(self->buffer_.size());
    self->on_frame(text);
    self->maybe_read();
  });
}

inline void GeneratorLink::on_frame(const std::string& text) {
  Message message;
  try {
    message = parse_message(std::string_view(text));
    if (ended_) throw ProtocolError("message after end");
    if (auto* chunk = std::get_if<ChunkMsg>(&message)) {
      if (unacked_.contains(chunk->batch)) throw ProtocolError("chunk: duplicate batch " + std::to_string(chunk->batch));
      std::size_t n = chunk->rows.size();
      stream_.push_batch(chunk->batch, std::move(chunk->rows));
      unacked_[chunk->batch] = n;
      server_.note_unacked(unacked_.size());
      buffered_rows_ += n;
      while (auto ev = stream_.try_pop()) {
        auto batch = std::make_shared<BatchEvent>(std::get<BatchEvent>(std::move(*ev)));
        server_.live().post([batch](Session& s, double now) { s.push_batch(std::move(*batch), now); });
      }
      return;
    }
    if (std::holds_alternative<EndMsg>(message)) {
      ended_ = true;
      server_.live().post([](Session& s, double now) { s.push_end(now); });
      server_.log("generator sent end");
      return;
    }
    throw ProtocolError("generator may only send chunk or end messages");
  } catch (const ProtocolError& e) {
    fail(std::string("protocol error: ") + e.what());
  }
}

inline void GeneratorLink::on_ack(std::uint64_t batch) {
  if (closed_) return;
  if (auto it = unacked_.find(batch); it != unacked_.end()) {
    buffered_rows_ -= it->second;
    unacked_.erase(it);
  }
  outbox_.push_back(serialize(AckMsg{batch}));
  if (!writing_) write_next();
  maybe_read();
}

inline void GeneratorLink::write_next() {
  if (outbox_.empty() || closed_) {
    writing_ = false;
    return;
  }
  writing_ = true;
  ws_.text(true);
  ws_.async_write(asio::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->writing_ = false;
      return;
    }
    self->outbox_.pop_front();
    self->write_next();
  });
}

inline void GeneratorLink::fail(const std::string& reason) {
  if (closed_) return;
  server_.log("generator lost: " + reason);
  if (!ended_) server_.live().post([reason](Session& s, double now) { s.push_disconnect(reason, now); });
  close();
}

inline void GeneratorLink::close() {
  if (closed_) return;
  closed_ = true;
  ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
}

}  // namespace provega::net
