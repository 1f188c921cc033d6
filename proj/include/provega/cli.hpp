#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "provega/data_source.hpp"
#include "provega/protocol.hpp"
#include "provega/runner.hpp"
#include "provega/scheduler.hpp"
#include "provega/spec.hpp"

#ifndef PROVEGA_GALLERY_DIR
#define PROVEGA_GALLERY_DIR "gallery"
#endif

namespace provega::cli {

enum ExitCode : int { exit_ok = 0, exit_spec_error = 1, exit_data_error = 2, exit_run_error = 3 };

struct SpecFile {
  Json document;
  ProvegaSpec spec;
  std::filesystem::path base_dir;
};

inline SpecFile load_spec(const std::filesystem::path& path) {
  SpecFile out;
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ValidationError("", e.what());
  }
  try {
    out.document = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SyntaxError(path.string() + ": " + e.what());
  }
  out.spec = parse_spec(out.document);
  out.base_dir = path.parent_path();
  return out;
}

struct SessionSetup {
  std::unique_ptr<Session> session;
  // Rows a simulated generator replays for a WebSocket-sourced spec.
  std::optional<Dataset> generator_data;
};

// Builds the session for a spec, optionally reading rows from `data` instead
// of the document's own source. Data problems surface as IoError/FormatError/
// EmptyDatasetError; spec problems as ValidationError.
inline SessionSetup make_session(ProvegaSpec spec, const std::filesystem::path& base_dir,
                                 const std::optional<std::filesystem::path>& data, SessionOptions options = {}) {
  SessionSetup out;
  auto source = data ? file_source(*data) : describe_source(spec.base_view, base_dir);
  bool generator = !describe_source(spec.base_view, base_dir).complete_input();
  if (generator) {
    if (data) out.generator_data = load_complete(source);
    out.session = std::make_unique<Session>(std::move(spec), Session::GeneratorInput{}, options);
  } else {
    out.session = std::make_unique<Session>(std::move(spec), load_complete(source), options);
  }
  return out;
}

struct RunArgs {
  std::filesystem::path spec;
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> trace;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> max_steps;
  std::optional<std::uint64_t> frequency_ms;
  std::optional<std::uint64_t> history;
  bool realtime = false;
  std::uint64_t gen_chunk_size = 100;
  double gen_delay_ms = 0.0;
};

inline void apply_overrides(ProvegaSpec& spec, const RunArgs& args) {
  auto& reading = spec.progression.chunking.reading;
  if (args.seed) {
    if (reading) reading->seed = *args.seed;
    if (auto& proc = spec.progression.chunking.processor; proc && proc->parameters.contains("seed"))
      proc->parameters["seed"] = *args.seed;
  }
  if (args.frequency_ms && reading) reading->frequency_ms = *args.frequency_ms;
}

// Headless run; prints a one-line JSON summary on `out`, diagnostics on `err`.
inline int run_command(const RunArgs& args, std::ostream& out, std::ostream& err) {
  SpecFile file;
  try {
    file = load_spec(args.spec);
  } catch (const ValidationError& e) {
    err << "spec error at " << (e.path().empty() ? "<document>" : e.path()) << ": " << e.what() << "\n";
    return exit_spec_error;
  } catch (const Error& e) {
    err << "spec error: " << e.what() << "\n";
    return exit_spec_error;
  }
  for (const auto& w : file.spec.warnings) err << "warning: " << w << "\n";
  apply_overrides(file.spec, args);

  SessionOptions options;
  if (args.history) options.history_capacity = static_cast<std::size_t>(*args.history);
  SessionSetup setup;
  try {
    setup = make_session(file.spec, file.base_dir, args.data, options);
  } catch (const ValidationError& e) {
    err << "spec error at " << (e.path().empty() ? "<document>" : e.path()) << ": " << e.what() << "\n";
    return exit_spec_error;
  } catch (const Error& e) {
    err << "data error: " << e.what() << "\n";
    return exit_data_error;
  }
  if (setup.session->generator_driven() && !setup.generator_data) {
    err << "data error: the spec reads from a generator; pass --data to replay rows through a simulated one\n";
    return exit_data_error;
  }

  std::unique_ptr<TraceWriter> trace;
  try {
    if (args.trace) trace = std::make_unique<TraceWriter>(*args.trace);
  } catch (const Error& e) {
    err << "trace error: " << e.what() << "\n";
    return exit_data_error;
  }

  std::uint64_t hash = 0xcbf29ce484222325ULL;
  std::uint64_t lines = 0;
  RunOptions run_options;
  run_options.max_steps = args.max_steps;
  run_options.realtime = args.realtime;
  Runner runner(*setup.session, run_options, [&](const Event& ev, const Session& s) {
    const auto* cs = std::get_if<ChangesetEvent>(&ev);
    if (!cs) return;
    auto line = trace_line(*cs, s.store().rows().size());
    line += '\n';
    for (unsigned char c : line) {
      hash ^= c;
      hash *= 0x100000001b3ULL;
    }
    ++lines;
    if (trace) {
      line.pop_back();
      trace->write(line);
    }
  });
  std::optional<SimulatedGenerator> generator;
  if (setup.generator_data) {
    const auto& ctl = setup.session->spec().progression.control;
    generator.emplace(*setup.generator_data,
                      SimulatedGenerator::Options{args.gen_chunk_size, args.gen_delay_ms, ctl.ack_flow_control, ctl.ack_window});
    runner.attach(*generator);
  }

  RunSummary summary;
  try {
    summary = runner.run();
  } catch (const Error& e) {
    err << "run error: " << e.what() << "\n";
    return exit_run_error;
  }
  if (trace) trace->commit();

  Json j = Json::object();
  j["status"] = to_string(summary.status);
  j["final_step"] = summary.final_step;
  j["emissions"] = summary.emissions;
  j["trace_lines"] = lines;
  j["rows"] = summary.final_rows;
  j["absolute_progress"] = summary.final_absolute_progress ? Json(*summary.final_absolute_progress) : Json(nullptr);
  j["end_ms"] = summary.end_ms;
  j["trace_fnv1a64"] = hex64(hash);
  if (summary.warning) j["warning"] = *summary.warning;
  out << j.dump() << "\n";

  if (summary.status == Status::stopped && summary.warning) {
    err << "stopped: " << *summary.warning << "\n";
    return exit_run_error;
  }
  if (summary.status != Status::done && summary.status != Status::stopped) return exit_run_error;
  return exit_ok;
}

// ---- gallery -------------------------------------------------------------------

inline std::filesystem::path gallery_dir() {
  if (const char* env = std::getenv("PROVEGA_GALLERY")) return env;
  return PROVEGA_GALLERY_DIR;
}

inline std::vector<std::string> list_bundles(const std::filesystem::path& root = gallery_dir()) {
  std::vector<std::string> names;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(root, ec))
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "spec.json")) names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

// A bundle's expected.json: the run flags it needs and the summary they produce.
inline Json bundle_expectation(const std::string& name, const std::filesystem::path& root = gallery_dir()) {
  auto path = root / name / "expected.json";
  return Json::parse(read_file(path));
}

inline void export_bundle(const std::string& name, const std::filesystem::path& out,
                          const std::filesystem::path& root = gallery_dir()) {
  auto names = list_bundles(root);
  if (std::find(names.begin(), names.end(), name) == names.end()) throw IoError("no gallery bundle named '" + name + "'");
  std::filesystem::create_directories(out);
  std::filesystem::copy(root / name, out, std::filesystem::copy_options::recursive | std::filesystem::copy_options::overwrite_existing);
}

}  // namespace provega::cli
