#include <csignal>
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "provega/cli.hpp"
#include "provega/net/fake_generator.hpp"
#include "provega/net/server.hpp"

namespace {

using namespace provega;
namespace asio = boost::asio;

int serve_command(const std::filesystem::path& spec_path, const std::optional<std::filesystem::path>& data,
                  std::optional<std::string> backend, net::ServerOptions options) {
  cli::SpecFile file;
  try {
    file = cli::load_spec(spec_path);
  } catch (const Error& e) {
    std::cerr << "spec error: " << e.what() << "\n";
    return cli::exit_spec_error;
  }
  for (const auto& w : file.spec.warnings) std::cerr << "warning: " << w << "\n";
  options.backend_url = std::move(backend);

  auto base_dir = file.base_dir;
  net::SessionFactory factory = [file, base_dir, data](const Json* doc) {
    ProvegaSpec spec = doc ? parse_spec(*doc) : file.spec;
    return cli::make_session(std::move(spec), base_dir, data).session;
  };
  try {
    factory(nullptr);
  } catch (const ValidationError& e) {
    std::cerr << "spec error at " << e.path() << ": " << e.what() << "\n";
    return cli::exit_spec_error;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return cli::exit_data_error;
  }

  asio::io_context ioc;
  net::Server server(ioc, options, factory);
  try {
    server.start();
  } catch (const BindError& e) {
    std::cerr << e.what() << "\n";
    return cli::exit_run_error;
  }
  asio::signal_set signals(ioc, SIGINT, SIGTERM);
  signals.async_wait([&](const boost::system::error_code&, int) {
    server.log("shutting down");
    server.stop();
    ioc.stop();
  });
  ioc.run();
  return cli::exit_ok;
}

int fakegen_command(const std::filesystem::path& data, const std::optional<std::string>& connect,
                    std::optional<unsigned short> listen, const std::string& address, net::FakeGeneratorOptions options) {
  Dataset rows;
  try {
    rows = load_complete(file_source(data));
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return cli::exit_data_error;
  }
  asio::io_context ioc;
  int code = cli::exit_ok;
  auto gen = std::make_shared<net::FakeGenerator>(ioc, rows, options, [&](const net::FakeGeneratorReport& r) {
    Json j{{"batches", r.batches}, {"sent", r.sent},       {"acked", r.acked},
           {"max_in_flight", r.max_in_flight}, {"bad_acks", r.bad_acks}, {"ended", r.ended}};
    if (r.error) {
      j["error"] = *r.error;
      code = cli::exit_run_error;
    }
    std::cout << j.dump() << std::endl;
  });
  try {
    if (connect) {
      gen->connect(*connect);
    } else {
      auto port = gen->listen(address, listen.value_or(7979));
      std::clog << "[fakegen] listening on " << address << ":" << port << std::endl;
    }
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return cli::exit_run_error;
  }
  ioc.run();
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Progressive visualization engine"};
  app.require_subcommand(1);

  cli::RunArgs run;
  std::string spec_path, data_path, trace_path;
  auto* run_cmd = app.add_subcommand("run", "Run a spec headlessly and write a changeset trace");
  run_cmd->add_option("--spec", spec_path, "Spec document")->required();
  run_cmd->add_option("--data", data_path, "Data file overriding the spec's source (replayed by a simulated generator for WebSocket specs)");
  run_cmd->add_option("--trace", trace_path, "Trace output, one JSON line per changeset");
  run_cmd->add_option("--seed", run.seed, "Override the reading and processor seed");
  run_cmd->add_option("--max-steps", run.max_steps, "Stop after this many steps");
  run_cmd->add_option("--frequency", run.frequency_ms, "Override reading.frequency (ms)");
  run_cmd->add_option("--history", run.history, "History capacity (steps)");
  run_cmd->add_flag("--realtime", run.realtime, "Follow the wall clock instead of virtual time");
  run_cmd->add_option("--gen-chunk-size", run.gen_chunk_size, "Rows per simulated generator batch")->capture_default_str();
  run_cmd->add_option("--gen-delay", run.gen_delay_ms, "Delay between simulated generator batches (ms)")->capture_default_str();

  net::ServerOptions serve_options;
  std::string serve_spec, serve_data, backend, ui_dir;
  std::uint64_t max_buffer_rows = 0;
  auto* serve_cmd = app.add_subcommand("serve", "Serve a session over WebSocket with the UI bundle");
  serve_cmd->add_option("--spec", serve_spec, "Spec document")->required();
  serve_cmd->add_option("--data", serve_data, "Data file overriding the spec's source");
  serve_cmd->add_option("--backend", backend, "Connect out to a generator at ws://host:port/path");
  serve_cmd->add_option("--port", serve_options.port, "Listen port (PROVEGA_PORT overrides)")->capture_default_str();
  serve_cmd->add_option("--address", serve_options.address, "Listen address")->capture_default_str();
  serve_cmd->add_option("--ui-dir", ui_dir, "Directory of the built UI served over HTTP");
  serve_cmd->add_option("--max-buffer-rows", max_buffer_rows, "Cap on unacknowledged generator rows (0 = unbounded)");

  auto* gallery_cmd = app.add_subcommand("gallery", "Example spec bundles");
  gallery_cmd->require_subcommand(1);
  gallery_cmd->add_subcommand("list", "List bundles");
  std::string export_name, export_out;
  auto* export_cmd = gallery_cmd->add_subcommand("export", "Copy a bundle to a directory");
  export_cmd->add_option("name", export_name, "Bundle name")->required();
  export_cmd->add_option("--out", export_out, "Destination directory")->required();

  net::FakeGeneratorOptions gen_options;
  std::string gen_data, gen_connect, gen_mode = "compliant", gen_address = "127.0.0.1";
  unsigned short gen_listen = 0;
  auto* gen_cmd = app.add_subcommand("fakegen", "Scripted generator feeding rows over WebSocket");
  gen_cmd->add_option("--data", gen_data, "CSV or JSON rows to send")->required();
  auto* connect_opt = gen_cmd->add_option("--connect", gen_connect, "Engine ingest URL, e.g. ws://127.0.0.1:7878/ingest");
  auto* listen_opt = gen_cmd->add_option("--listen", gen_listen, "Wait for an engine started with --backend on this port");
  connect_opt->excludes(listen_opt);
  gen_cmd->add_option("--address", gen_address, "Listen address")->capture_default_str();
  gen_cmd->add_option("--chunk-size", gen_options.chunk_size, "Rows per batch")->capture_default_str();
  gen_cmd->add_option("--delay", gen_options.delay_ms, "Delay between batches (ms)")->capture_default_str();
  gen_cmd->add_option("--window", gen_options.ack_window, "Unacknowledged batches allowed in flight")->capture_default_str();
  gen_cmd->add_option("--mode", gen_mode, "compliant | flood | disconnect")->capture_default_str();
  gen_cmd->add_option("--disconnect-after", gen_options.disconnect_after, "Batches sent before dropping (disconnect mode)");

  CLI11_PARSE(app, argc, argv);

  if (run_cmd->parsed()) {
    run.spec = spec_path;
    if (!data_path.empty()) run.data = data_path;
    if (!trace_path.empty()) run.trace = trace_path;
    return cli::run_command(run, std::cout, std::cerr);
  }
  if (serve_cmd->parsed()) {
    if (const char* env = std::getenv("PROVEGA_PORT")) {
      try {
        serve_options.port = static_cast<unsigned short>(std::stoul(env));
      } catch (const std::exception&) {
        std::cerr << "PROVEGA_PORT is not a port number: " << env << "\n";
        return cli::exit_spec_error;
      }
    }
    if (!ui_dir.empty()) serve_options.ui_dir = ui_dir;
    if (max_buffer_rows > 0) serve_options.max_buffer_rows = max_buffer_rows;
    std::optional<std::filesystem::path> data;
    if (!serve_data.empty()) data = serve_data;
    std::optional<std::string> backend_url;
    if (!backend.empty()) backend_url = backend;
    return serve_command(serve_spec, data, backend_url, serve_options);
  }
  if (gallery_cmd->parsed()) {
    if (export_cmd->parsed()) {
      try {
        cli::export_bundle(export_name, export_out);
      } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return cli::exit_data_error;
      }
      std::cout << "exported " << export_name << " to " << export_out << "\n";
      return cli::exit_ok;
    }
    for (const auto& name : cli::list_bundles()) std::cout << name << "\n";
    return cli::exit_ok;
  }
  if (gen_cmd->parsed()) {
    auto mode = net::parse_generator_mode(gen_mode);
    if (!mode) {
      std::cerr << "unknown mode '" << gen_mode << "'\n";
      return cli::exit_spec_error;
    }
    gen_options.mode = *mode;
    if (gen_connect.empty() && !listen_opt->count()) {
      std::cerr << "fakegen needs --connect or --listen\n";
      return cli::exit_spec_error;
    }
    std::optional<std::string> connect;
    if (!gen_connect.empty()) connect = gen_connect;
    std::optional<unsigned short> listen;
    if (listen_opt->count()) listen = gen_listen;
    return fakegen_command(gen_data, connect, listen, gen_address, gen_options);
  }
  return 0;
}
