#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "provega/value.hpp"

namespace provega {

enum class ChunkingType { data, process, mixed };
enum class ReadingMethod { ascending, descending, random };
enum class ControlMode { monitoring, exploration };

inline std::string_view to_string(ChunkingType t) {
  switch (t) {
    case ChunkingType::data: return "data";
    case ChunkingType::process: return "process";
    case ChunkingType::mixed: return "mixed";
  }
  return "data";
}

inline std::string_view to_string(ReadingMethod m) {
  switch (m) {
    case ReadingMethod::ascending: return "ascending";
    case ReadingMethod::descending: return "descending";
    case ReadingMethod::random: return "random";
  }
  return "ascending";
}

inline std::string_view to_string(ControlMode m) {
  return m == ControlMode::monitoring ? "monitoring" : "exploration";
}

struct ReadingConfig {
  ReadingMethod method = ReadingMethod::ascending;
  std::uint64_t chunk_size = 1;
  // Set when the document left chunk_size to the engine; resolved to
  // ceil(n / 100) once the row count is known.
  bool chunk_size_auto = false;
  std::uint64_t frequency_ms = 250;
  std::uint64_t seed = 0;

  bool operator==(const ReadingConfig&) const = default;
};

struct ProcessorConfig {
  std::string name;
  Json parameters = Json::object();  // normalized, defaults filled, `name` excluded

  bool operator==(const ProcessorConfig&) const = default;
};

struct ChunkingConfig {
  ChunkingType type = ChunkingType::data;
  std::optional<ReadingConfig> reading;
  std::optional<ProcessorConfig> processor;

  bool operator==(const ChunkingConfig&) const = default;
};

struct ControlConfig {
  bool pause_enabled = true;
  bool stop_enabled = true;
  bool step_enabled = true;
  ControlMode mode = ControlMode::monitoring;
  std::optional<std::uint64_t> min_rendering_frequency_ms;
  bool ack_flow_control = false;
  std::uint64_t ack_window = 1;

  bool operator==(const ControlConfig&) const = default;
};

struct QualityBinding {
  enum class Kind { off, builtin, field };

  Kind kind = Kind::off;
  std::string field;  // only for Kind::field

  static QualityBinding off() { return {}; }
  static QualityBinding builtin() { return {Kind::builtin, {}}; }
  static QualityBinding bound_to(std::string name) { return {Kind::field, std::move(name)}; }

  bool operator==(const QualityBinding&) const = default;
};

struct QualityBindings {
  QualityBinding absolute_progress;
  QualityBinding relative_progress;
  QualityBinding stability;
  QualityBinding certainty;

  bool operator==(const QualityBindings&) const = default;
};

struct HighlightConfig {
  bool enabled = false;
  std::uint64_t highlight_duration_ms = 600;

  bool operator==(const HighlightConfig&) const = default;
};

struct ChangeConfig {
  HighlightConfig mark;
  HighlightConfig area;

  bool operator==(const ChangeConfig&) const = default;
};

struct MonitoringConfig {
  bool aliveness = false;
  bool progress = false;
  bool etc = false;
  QualityBindings quality;
  ChangeConfig change;

  bool operator==(const MonitoringConfig&) const = default;
};

struct ProgressionConfig {
  ChunkingConfig chunking;
  ControlConfig control;
  MonitoringConfig monitoring;

  bool operator==(const ProgressionConfig&) const = default;
};

struct VisualizationConfig {
  bool visual_stability = true;

  bool operator==(const VisualizationConfig&) const = default;
};

struct ProvegaSpec {
  Json base_view = Json::object();  // host document minus `provega`, untouched
  ProgressionConfig progression;
  VisualizationConfig visualization;
  // Reserved blocks, kept verbatim and never consulted.
  std::optional<Json> interaction;
  std::optional<Json> guidance;
  // Non-fatal notes produced while normalizing (not part of equality).
  std::vector<std::string> warnings;

  bool operator==(const ProvegaSpec& o) const {
    return base_view == o.base_view && progression == o.progression &&
           visualization == o.visualization && interaction == o.interaction &&
           guidance == o.guidance;
  }
};

inline std::uint64_t auto_chunk_size(std::uint64_t row_count) {
  return row_count == 0 ? 1 : std::max<std::uint64_t>(1, (row_count + 99) / 100);
}

}  // namespace provega
