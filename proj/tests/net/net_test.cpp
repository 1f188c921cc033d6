#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include "provega/net/fake_generator.hpp"
#include "provega/net/server.hpp"
#include "provega/spec.hpp"
#include "support/ws_client.hpp"

using namespace provega;
using namespace provega::net;
using namespace std::chrono_literals;
using provega::test::Client;

namespace {

Dataset xy_rows(std::size_t n) {
  Dataset ds;
  ds.header = {"x", "y"};
  ds.types = {ColumnType::floating, ColumnType::floating};
  for (std::size_t i = 0; i < n; ++i) {
    Row r{i, {}};
    r.columns.set("x", static_cast<double>(i % 37));
    r.columns.set("y", static_cast<double>(i % 11));
    ds.rows.push_back(std::move(r));
  }
  return ds;
}

Json data_doc(const char* mode, std::uint64_t chunk = 5, std::uint64_t freq = 20) {
  return {{"data", {{"url", "rows.csv"}}},
          {"mark", "point"},
          {"encoding", {{"x", {{"field", "x"}, {"type", "quantitative"}}}, {"y", {{"field", "y"}, {"type", "quantitative"}}}}},
          {"provega",
           {{"progression",
             {{"chunking", {{"type", "data"}, {"reading", {{"method", "ascending"}, {"chunk_size", chunk}, {"frequency", freq}}}}},
              {"control", {{"mode", mode}}},
              {"monitoring", {{"quality", {{"absolute_progress", true}}}}}}}}}};
}

Json ws_doc(bool ack, std::uint64_t window = 1) {
  Json control = Json::object();
  if (ack) control["ack"] = {{"enabled", true}, {"window", window}};
  return {{"data", {{"url", "ws://127.0.0.1:1/ingest"}}},
          {"mark", "point"},
          {"encoding", {{"x", {{"field", "x"}, {"type", "quantitative"}}}, {"y", {{"field", "y"}, {"type", "quantitative"}}}}},
          {"provega", {{"progression", {{"chunking", {{"type", "data"}}}, {"control", control}}}}}};
}

SessionFactory factory_for(Json doc, std::size_t rows = 100) {
  return [doc, rows](const Json* override_doc) {
    auto spec = parse_spec(override_doc ? *override_doc : doc);
    auto desc = describe_source(spec.base_view);
    if (!desc.complete_input()) return std::make_unique<Session>(std::move(spec), Session::GeneratorInput{});
    return std::make_unique<Session>(std::move(spec), xy_rows(rows));
  };
}

// Server on an ephemeral port, io context on its own thread.
struct Harness {
  asio::io_context ioc;
  std::unique_ptr<Server> server;
  std::thread thread;

  explicit Harness(SessionFactory factory, ServerOptions options = {}) {
    options.port = 0;
    options.verbose = false;
    server = std::make_unique<Server>(ioc, options, std::move(factory));
    server->start();
    thread = std::thread([this] { ioc.run(); });
  }

  ~Harness() {
    asio::post(ioc, [this] {
      server->stop();
      ioc.stop();
    });
    thread.join();
  }

  unsigned short port() const { return server->port(); }

  template <class F>
  auto call(F f) {
    return server->live().call(std::move(f));
  }

  Status status() {
    return call([](Session& s, double) { return s.state().status; });
  }

  bool wait_status(Status want, std::chrono::milliseconds limit = 10s) {
    auto until = std::chrono::steady_clock::now() + limit;
    while (std::chrono::steady_clock::now() < until) {
      if (status() == want) return true;
      std::this_thread::sleep_for(10ms);
    }
    return false;
  }
};

bool is_changeset_step(const Json& j, std::int64_t step) {
  return j["type"] == "changeset" && j["step"] == step;
}

std::string http_get(unsigned short port, const std::string& target, int* status) {
  asio::io_context ioc;
  beast::tcp_stream stream(ioc);
  tcp::resolver resolver(ioc);
  stream.connect(resolver.resolve("127.0.0.1", std::to_string(port)));
  http::request<http::empty_body> req{http::verb::get, target, 11};
  req.set(http::field::host, "127.0.0.1");
  http::write(stream, req);
  beast::flat_buffer buffer;
  http::response<http::string_body> res;
  http::read(stream, buffer, res);
  *status = static_cast<int>(res.result_int());
  return res.body();
}

}  // namespace

TEST(Server, JoinReceivesHelloThenStatus) {
  Harness h(factory_for(data_doc("exploration")));
  Client c(h.port());
  auto hello = c.read();
  ASSERT_TRUE(hello);
  EXPECT_EQ((*hello)["type"], "hello");
  EXPECT_EQ((*hello)["columns"], Json::array({"x", "y"}));
  EXPECT_EQ((*hello)["total_rows"], 100);
  auto status = c.read();
  ASSERT_TRUE(status);
  EXPECT_EQ((*status)["type"], "status");
  EXPECT_EQ((*status)["status"], "paused");
}

TEST(Server, LateJoinerGetsCatchUpAtCurrentStep) {
  Harness h(factory_for(data_doc("exploration")));
  Client controller(h.port());
  ASSERT_TRUE(controller.read_type("status"));
  for (int i = 0; i <= 10; ++i) controller.send(ControlMsg{"step_forward", std::nullopt});
  ASSERT_TRUE(controller.read_until([](const Json& j) { return is_changeset_step(j, 10); }));

  Client late(h.port());
  auto hello = late.read();
  ASSERT_TRUE(hello);
  EXPECT_EQ((*hello)["type"], "hello");
  auto catch_up = late.read();
  ASSERT_TRUE(catch_up);
  auto m = std::get<ChangesetMsg>(parse_message(*catch_up));
  EXPECT_EQ(m.changeset.step, 10);
  EXPECT_EQ(m.changeset.inserts.size(), 55u);
  EXPECT_TRUE(m.changeset.updates.empty());
  EXPECT_TRUE(m.changeset.removes.empty());
  auto live = h.call([](Session& s, double) { return s.store().rows(); });
  ASSERT_EQ(live.size(), m.changeset.inserts.size());
  for (const auto& row : m.changeset.inserts) EXPECT_EQ(live.at(row.id), row);
  auto status = late.read();
  ASSERT_TRUE(status);
  EXPECT_EQ((*status)["type"], "status");
}

TEST(Server, ObserverControlIsRejected) {
  Harness h(factory_for(data_doc("exploration")));
  Client controller(h.port());
  ASSERT_TRUE(controller.read_type("status"));
  Client observer(h.port());
  ASSERT_TRUE(observer.read_type("status"));
  observer.send(ControlMsg{"step_forward", std::nullopt});
  auto reply = observer.read_type("status");
  ASSERT_TRUE(reply);
  EXPECT_EQ((*reply)["warning"], "not controller");
  EXPECT_EQ(h.call([](Session& s, double) { return s.state().step; }), -1);
  observer.send(SetMsg{"chunk_size", 3});
  reply = observer.read_type("status");
  ASSERT_TRUE(reply);
  EXPECT_EQ((*reply)["warning"], "not controller");
}

TEST(Server, ObserverPromotedAfterControllerLeaves) {
  Harness h(factory_for(data_doc("exploration")));
  auto controller = std::make_unique<Client>(h.port());
  ASSERT_TRUE(controller->read_type("status"));
  Client first(h.port());
  ASSERT_TRUE(first.read_type("status"));
  Client second(h.port());
  ASSERT_TRUE(second.read_type("status"));
  controller->close();
  controller.reset();
  std::this_thread::sleep_for(100ms);

  first.send(ControlMsg{"step_forward", std::nullopt});
  ASSERT_TRUE(first.read_until([](const Json& j) { return is_changeset_step(j, 0); }));
  second.send(ControlMsg{"step_forward", std::nullopt});
  auto reply = second.read_until([](const Json& j) { return j["type"] == "status" && j.contains("warning"); });
  ASSERT_TRUE(reply);
  EXPECT_EQ((*reply)["warning"], "not controller");
  EXPECT_EQ(h.call([](Session& s, double) { return s.state().step; }), 0);
}

TEST(Server, BadMessageGetsWarningAndConnectionSurvives) {
  Harness h(factory_for(data_doc("exploration")));
  Client c(h.port());
  ASSERT_TRUE(c.read_type("status"));
  c.send("{not json");
  auto reply = c.read_type("status");
  ASSERT_TRUE(reply);
  EXPECT_TRUE(reply->contains("warning"));
  c.send(R"({"type":"bogus"})");
  reply = c.read_type("status");
  ASSERT_TRUE(reply);
  EXPECT_NE((*reply)["warning"].get<std::string>().find("bogus"), std::string::npos);
  c.send(ControlMsg{"step_forward", std::nullopt});
  EXPECT_TRUE(c.read_until([](const Json& j) { return is_changeset_step(j, 0); }));
}

TEST(Server, ChangesetsArriveInStepOrder) {
  Harness h(factory_for(data_doc("monitoring", 5, 5)));
  Client c(h.port());
  std::int64_t last = -1;
  for (;;) {
    auto m = c.read();
    ASSERT_TRUE(m);
    if ((*m)["type"] == "changeset") {
      EXPECT_EQ((*m)["step"], last + 1);
      last = (*m)["step"];
    }
    if ((*m)["type"] == "status" && (*m)["status"] == "done") break;
  }
  EXPECT_EQ(last, 19);
}

TEST(Server, SnapshotRequestRepliesWithCurrentState) {
  Harness h(factory_for(data_doc("exploration")));
  Client c(h.port());
  ASSERT_TRUE(c.read_type("status"));
  c.send(ControlMsg{"step_forward", std::nullopt});
  c.send(ControlMsg{"step_forward", std::nullopt});
  ASSERT_TRUE(c.read_until([](const Json& j) { return is_changeset_step(j, 1); }));
  c.send(SnapshotRequestMsg{});
  auto snap = c.read_type("changeset");
  ASSERT_TRUE(snap);
  EXPECT_EQ((*snap)["step"], 1);
  EXPECT_EQ((*snap)["insert"].size(), 10u);
}

TEST(Server, StepBackwardAndSetAreApplied) {
  Harness h(factory_for(data_doc("exploration")));
  Client c(h.port());
  ASSERT_TRUE(c.read_type("status"));
  c.send(ControlMsg{"step_forward", std::nullopt});
  c.send(ControlMsg{"step_forward", std::nullopt});
  c.send(ControlMsg{"step_backward", std::nullopt});
  auto back = c.read_until([](const Json& j) { return j["type"] == "changeset" && j["direction"] == "backward"; });
  ASSERT_TRUE(back);
  EXPECT_EQ((*back)["remove"].size(), 5u);
  c.send(SetMsg{"chunk_size", 20});
  c.send(ControlMsg{"step_forward", std::nullopt});
  auto next = c.read_until([](const Json& j) { return is_changeset_step(j, 1) && j["direction"] == "forward"; });
  ASSERT_TRUE(next);
  EXPECT_EQ((*next)["insert"].size(), 20u);
}

TEST(Server, RestartReplaysHelloAndRunsAFreshSession) {
  Harness h(factory_for(data_doc("exploration")));
  Client c(h.port());
  ASSERT_TRUE(c.read_type("status"));
  c.send(ControlMsg{"step_forward", std::nullopt});
  ASSERT_TRUE(c.read_until([](const Json& j) { return is_changeset_step(j, 0); }));
  Json params = {{"spec", data_doc("exploration", 7)}};
  c.send(ControlMsg{"restart", params});
  auto hello = c.read_type("hello");
  ASSERT_TRUE(hello);
  EXPECT_EQ((*hello)["spec"]["provega"]["progression"]["chunking"]["reading"]["chunk_size"], 7);
  c.send(ControlMsg{"step_forward", std::nullopt});
  auto first = c.read_until([](const Json& j) { return is_changeset_step(j, 0); });
  ASSERT_TRUE(first);
  EXPECT_EQ((*first)["insert"].size(), 7u);
}

TEST(Server, RestartWithInvalidSpecIsRejected) {
  Harness h(factory_for(data_doc("exploration")));
  Client c(h.port());
  ASSERT_TRUE(c.read_type("status"));
  Json bad = data_doc("exploration");
  bad["provega"]["progression"]["chunking"]["reading"]["method"] = "sideways";
  c.send(ControlMsg{"restart", Json{{"spec", bad}}});
  auto reply = c.read_until([](const Json& j) { return j["type"] == "status" && j.contains("warning"); });
  ASSERT_TRUE(reply);
  EXPECT_NE((*reply)["warning"].get<std::string>().find("restart rejected"), std::string::npos);
}

TEST(Server, ServesStaticFilesFromUiDir) {
  auto dir = std::filesystem::temp_directory_path() / "provega_ui_test";
  std::filesystem::create_directories(dir / "assets");
  std::ofstream(dir / "index.html") << "<html>ui</html>";
  std::ofstream(dir / "assets" / "app.js") << "console.log(1)";
  ServerOptions options;
  options.ui_dir = dir;
  Harness h(factory_for(data_doc("exploration")), options);
  int status = 0;
  EXPECT_EQ(http_get(h.port(), "/", &status), "<html>ui</html>");
  EXPECT_EQ(status, 200);
  EXPECT_EQ(http_get(h.port(), "/assets/app.js", &status), "console.log(1)");
  EXPECT_EQ(status, 200);
  http_get(h.port(), "/missing.txt", &status);
  EXPECT_EQ(status, 404);
  http_get(h.port(), "/../etc/passwd", &status);
  EXPECT_EQ(status, 404);
  std::filesystem::remove_all(dir);
}

// ---- generator links ----------------------------------------------------------------

namespace {

struct GenRun {
  FakeGeneratorReport report;
  bool finished = false;
};

GenRun run_generator(const Dataset& data, FakeGeneratorOptions options, const std::string& url) {
  asio::io_context ioc;
  GenRun out;
  auto gen = std::make_shared<FakeGenerator>(ioc, data, options, [&](const FakeGeneratorReport& r) {
    out.report = r;
    out.finished = true;
  });
  gen->connect(url);
  ioc.run_for(60s);
  return out;
}

std::string ingest_url(const Harness& h) { return "ws://127.0.0.1:" + std::to_string(h.port()) + "/ingest"; }

}  // namespace

TEST(Generator, CompliantWindowOneKeepsOneBatchInFlight) {
  Harness h(factory_for(ws_doc(true, 1)));
  Client ui(h.port());
  FakeGeneratorOptions options;
  options.chunk_size = 3;
  options.ack_window = 1;
  auto run = run_generator(xy_rows(600), options, ingest_url(h));
  ASSERT_TRUE(run.finished);
  EXPECT_FALSE(run.report.error) << *run.report.error;
  EXPECT_EQ(run.report.sent, 200u);
  EXPECT_EQ(run.report.acked, 200u);
  EXPECT_EQ(run.report.bad_acks, 0u);
  EXPECT_LE(run.report.max_in_flight, 1u);
  EXPECT_LE(h.server->max_unacked(), 1u);
  ASSERT_TRUE(h.wait_status(Status::done));
  EXPECT_EQ(h.call([](Session& s, double) { return s.store().rows().size(); }), 600u);

  // The UI saw every batch committed before the generator moved on.
  std::set<std::uint64_t> seen;
  auto done = ui.read_until([&](const Json& j) {
    if (j["type"] == "changeset")
      for (const auto& r : j["insert"]) seen.insert(r["_id"].get<std::uint64_t>());
    return j["type"] == "status" && j["status"] == "done";
  });
  ASSERT_TRUE(done);
  EXPECT_EQ(seen.size(), 600u);
}

TEST(Generator, WiderWindowIsHonored) {
  Harness h(factory_for(ws_doc(true, 4)));
  FakeGeneratorOptions options;
  options.chunk_size = 5;
  options.ack_window = 4;
  auto run = run_generator(xy_rows(500), options, ingest_url(h));
  ASSERT_TRUE(run.finished);
  EXPECT_FALSE(run.report.error);
  EXPECT_LE(run.report.max_in_flight, 4u);
  EXPECT_LE(h.server->max_unacked(), 4u);
  ASSERT_TRUE(h.wait_status(Status::done));
}

TEST(Generator, FloodIsThrottledByBufferCap) {
  ServerOptions options;
  options.max_buffer_rows = 40;
  Harness h(factory_for(ws_doc(false)), options);
  FakeGeneratorOptions gen;
  gen.chunk_size = 10;
  gen.mode = GeneratorMode::flood;
  auto run = run_generator(xy_rows(2000), gen, ingest_url(h));
  ASSERT_TRUE(run.finished);
  EXPECT_FALSE(run.report.error) << *run.report.error;
  EXPECT_EQ(run.report.acked, 200u);
  // Flooding shows up on the generator side, never inside the engine.
  EXPECT_LE(h.server->max_unacked(), 4u);
  ASSERT_TRUE(h.wait_status(Status::done));
  auto rows = h.call([](Session& s, double) { return s.store().rows(); });
  ASSERT_EQ(rows.size(), 2000u);
  std::uint64_t expected = 0;
  for (const auto& [id, row] : rows) EXPECT_EQ(id, expected++);
}

TEST(Generator, DisconnectEndsSessionWithWarning) {
  Harness h(factory_for(ws_doc(true, 1)));
  FakeGeneratorOptions gen;
  gen.chunk_size = 10;
  gen.mode = GeneratorMode::disconnect;
  gen.disconnect_after = 2;
  auto run = run_generator(xy_rows(100), gen, ingest_url(h));
  ASSERT_TRUE(run.finished);
  ASSERT_TRUE(h.wait_status(Status::done));
  auto state = h.call([](Session& s, double) { return s.state(); });
  ASSERT_TRUE(state.warning);
  EXPECT_NE(state.warning->find("generator disconnected"), std::string::npos);
  EXPECT_EQ(h.call([](Session& s, double) { return s.store().rows().size(); }), 20u);
}

TEST(Generator, SchemaViolationDisconnects) {
  Harness h(factory_for(ws_doc(false)));
  Client gen(h.port(), "/ingest");
  gen.send(R"({"type":"chunk","batch":0,"rows":[{"x":1,"y":2}]})");
  gen.send(R"({"type":"chunk","batch":1,"rows":[{"x":1,"z":2}]})");
  ASSERT_TRUE(h.wait_status(Status::done));
  auto state = h.call([](Session& s, double) { return s.state(); });
  ASSERT_TRUE(state.warning);
  EXPECT_NE(state.warning->find("new column"), std::string::npos);
}

TEST(Generator, EndDrainsThenDone) {
  Harness h(factory_for(ws_doc(false)));
  Client gen(h.port(), "/ingest");
  gen.send(R"({"type":"chunk","batch":0,"rows":[{"x":1,"y":2},{"x":3,"y":4}]})");
  gen.send(R"({"type":"end"})");
  auto ack = gen.read();
  ASSERT_TRUE(ack);
  EXPECT_EQ(*ack, Json::parse(R"({"type":"ack","batch":0})"));
  ASSERT_TRUE(h.wait_status(Status::done));
  EXPECT_EQ(h.call([](Session& s, double) { return s.store().rows().size(); }), 2u);
}

TEST(Generator, OutboundBackendMode) {
  asio::io_context gen_ioc;
  GenRun run;
  FakeGeneratorOptions gen;
  gen.chunk_size = 25;
  gen.ack_window = 1;
  auto fake = std::make_shared<FakeGenerator>(gen_ioc, xy_rows(250), gen, [&](const FakeGeneratorReport& r) {
    run.report = r;
    run.finished = true;
  });
  auto port = fake->listen("127.0.0.1", 0);
  std::thread gen_thread([&] { gen_ioc.run_for(30s); });

  ServerOptions options;
  options.backend_url = "ws://127.0.0.1:" + std::to_string(port) + "/";
  Harness h(factory_for(ws_doc(true, 1)), options);
  ASSERT_TRUE(h.wait_status(Status::done, 20s));
  gen_thread.join();
  ASSERT_TRUE(run.finished);
  EXPECT_FALSE(run.report.error);
  EXPECT_EQ(run.report.acked, 10u);
  EXPECT_LE(run.report.max_in_flight, 1u);
  EXPECT_EQ(h.call([](Session& s, double) { return s.store().rows().size(); }), 250u);
}

TEST(Generator, UnreachableBackendEndsSession) {
  ServerOptions options;
  options.backend_url = "ws://127.0.0.1:1/";
  Harness h(factory_for(ws_doc(true, 1)), options);
  ASSERT_TRUE(h.wait_status(Status::done));
  auto state = h.call([](Session& s, double) { return s.state(); });
  ASSERT_TRUE(state.warning);
  EXPECT_NE(state.warning->find("cannot reach generator"), std::string::npos);
}
