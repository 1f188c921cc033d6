#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "provega/error.hpp"
#include "provega/value.hpp"

namespace provega {

enum class FileFormat { csv, json };

struct InlineSource {
  Json values;  // array of objects, as written in `data.values`
  bool operator==(const InlineSource&) const = default;
};

struct FileSource {
  std::filesystem::path path;
  FileFormat format = FileFormat::csv;
  bool operator==(const FileSource&) const = default;
};

struct WebSocketSource {
  std::string url;
  bool operator==(const WebSocketSource&) const = default;
};

struct DataSourceDescriptor {
  std::variant<InlineSource, FileSource, WebSocketSource> kind;
  std::optional<std::uint64_t> declared_row_count;

  // False for generator-driven (WebSocket) inputs.
  bool complete_input() const { return !std::holds_alternative<WebSocketSource>(kind); }

  bool operator==(const DataSourceDescriptor&) const = default;
};

inline bool is_websocket_url(std::string_view url) {
  return url.starts_with("ws://") || url.starts_with("wss://");
}

inline FileFormat format_for(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".json" ? FileFormat::json : FileFormat::csv;
}

inline DataSourceDescriptor inline_source(Json values) {
  DataSourceDescriptor d{InlineSource{std::move(values)}, std::nullopt};
  if (std::get<InlineSource>(d.kind).values.is_array())
    d.declared_row_count = std::get<InlineSource>(d.kind).values.size();
  return d;
}

inline DataSourceDescriptor file_source(std::filesystem::path path) {
  auto fmt = format_for(path);
  return {FileSource{std::move(path), fmt}, std::nullopt};
}

inline DataSourceDescriptor websocket_source(std::string url) {
  return {WebSocketSource{std::move(url)}, std::nullopt};
}

// Reads the host document's `data` property. Relative file paths resolve
// against `base_dir` (the directory holding the spec file).
inline DataSourceDescriptor describe_source(const Json& base_view,
                                            const std::filesystem::path& base_dir = {}) {
  auto data = base_view.find("data");
  if (data == base_view.end() || !data->is_object())
    throw ValidationError("data", "host document has no data source");
  if (auto values = data->find("values"); values != data->end()) {
    if (!values->is_array()) throw ValidationError("data.values", "must be an array");
    return inline_source(*values);
  }
  auto url = data->find("url");
  if (url == data->end() || !url->is_string())
    throw ValidationError("data", "expected `values` or `url`");
  auto text = url->get<std::string>();
  if (is_websocket_url(text)) return websocket_source(text);
  std::filesystem::path path(text);
  if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
  auto desc = file_source(path);
  if (auto fmt = data->find("format"); fmt != data->end() && fmt->is_object()) {
    if (auto type = fmt->find("type"); type != fmt->end() && type->is_string()) {
      auto t = type->get<std::string>();
      if (t == "json") {
        std::get<FileSource>(desc.kind).format = FileFormat::json;
      } else if (t == "csv") {
        std::get<FileSource>(desc.kind).format = FileFormat::csv;
      } else {
        throw ValidationError("data.format.type", "unsupported format '" + t + "'");
      }
    }
  }
  return desc;
}

// Inverse of describe_source, used when a spec is synthesized for a source.
inline Json to_data_property(const DataSourceDescriptor& d) {
  Json out = Json::object();
  if (const auto* in = std::get_if<InlineSource>(&d.kind)) {
    out["values"] = in->values;
  } else if (const auto* f = std::get_if<FileSource>(&d.kind)) {
    out["url"] = f->path.string();
    out["format"] = {{"type", f->format == FileFormat::json ? "json" : "csv"}};
  } else {
    out["url"] = std::get<WebSocketSource>(d.kind).url;
  }
  return out;
}

}  // namespace provega
