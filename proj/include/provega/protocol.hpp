#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "provega/changeset.hpp"
#include "provega/error.hpp"
#include "provega/quality.hpp"
#include "provega/scheduler.hpp"
#include "provega/value.hpp"

namespace provega {

// ---- messages -------------------------------------------------------------------
// Every message is a flat JSON object discriminated by "type".

struct HelloMsg {
  Json spec;  // full normalized document
  std::vector<std::string> columns;
  std::optional<std::uint64_t> total_rows;
  bool operator==(const HelloMsg&) const = default;
};

struct ChangesetMsg {
  Changeset changeset;
  QualitySample quality;
  ChangeReport report;
  bool operator==(const ChangesetMsg&) const = default;
};

struct StatusMsg {
  Status status = Status::idle;
  bool alive = true;
  std::optional<std::string> warning;
  bool operator==(const StatusMsg&) const = default;
};

struct ControlMsg {
  std::string action;  // play | pause | stop | step_forward | step_backward | restart
  std::optional<Json> params;
  bool operator==(const ControlMsg&) const = default;
};

struct SetMsg {
  std::string key;
  Json value;
  bool operator==(const SetMsg&) const = default;
};

struct SnapshotRequestMsg {
  bool operator==(const SnapshotRequestMsg&) const = default;
};

struct ChunkMsg {
  std::uint64_t batch = 0;
  std::vector<Columns> rows;
  bool operator==(const ChunkMsg&) const = default;
};

struct EndMsg {
  bool operator==(const EndMsg&) const = default;
};

struct AckMsg {
  std::uint64_t batch = 0;
  bool operator==(const AckMsg&) const = default;
};

using Message = std::variant<HelloMsg, ChangesetMsg, StatusMsg, ControlMsg, SetMsg, SnapshotRequestMsg, ChunkMsg,
                             EndMsg, AckMsg>;

namespace detail {

inline Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline const Json& field(const Json& j, std::string_view type, std::string_view key) {
  auto it = j.find(std::string(key));
  if (it == j.end()) throw ProtocolError(std::string(type) + ": missing field '" + std::string(key) + "'");
  return *it;
}

inline std::uint64_t uint_field(const Json& j, std::string_view type, std::string_view key) {
  const Json& v = field(j, type, key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
  throw ProtocolError(std::string(type) + ": field '" + std::string(key) + "' must be a non-negative integer");
}

inline std::optional<double> opt_number(const Json& j, std::string_view key) {
  auto it = j.find(std::string(key));
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw ProtocolError("quality: field '" + std::string(key) + "' must be a number or null");
  return it->get<double>();
}

inline double number_field(const Json& j, std::string_view type, std::string_view key) {
  const Json& v = field(j, type, key);
  if (!v.is_number()) throw ProtocolError(std::string(type) + ": field '" + std::string(key) + "' must be a number");
  return v.get<double>();
}

inline std::string string_field(const Json& j, std::string_view type, std::string_view key) {
  const Json& v = field(j, type, key);
  if (!v.is_string()) throw ProtocolError(std::string(type) + ": field '" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

}  // namespace detail

inline Json to_json(const QualitySample& q) {
  Json j = Json::object();
  j["step"] = q.step;
  j["t_ms"] = q.t_ms;
  j["absolute_progress"] = detail::opt(q.absolute_progress);
  j["relative_progress"] = detail::opt(q.relative_progress);
  j["stability"] = detail::opt(q.stability);
  j["certainty"] = detail::opt(q.certainty);
  j["etc_ms"] = detail::opt(q.etc_ms);
  j["alive"] = q.alive;
  return j;
}

inline QualitySample quality_from_json(const Json& j) {
  if (!j.is_object()) throw ProtocolError("quality must be an object");
  QualitySample q;
  const Json& step = detail::field(j, "quality", "step");
  if (!step.is_number_integer()) throw ProtocolError("quality: field 'step' must be an integer");
  q.step = step.get<std::int64_t>();
  q.t_ms = detail::number_field(j, "quality", "t_ms");
  q.absolute_progress = detail::opt_number(j, "absolute_progress");
  q.relative_progress = detail::opt_number(j, "relative_progress");
  q.stability = detail::opt_number(j, "stability");
  q.certainty = detail::opt_number(j, "certainty");
  q.etc_ms = detail::opt_number(j, "etc_ms");
  const Json& alive = detail::field(j, "quality", "alive");
  if (!alive.is_boolean()) throw ProtocolError("quality: field 'alive' must be a boolean");
  q.alive = alive.get<bool>();
  return q;
}

inline Json to_json(const ChangeReport& r) {
  Json j = Json::object();
  j["changed_ids"] = r.changed_ids;
  if (r.changed_area) {
    j["changed_area"] = {{"x0", r.changed_area->x0}, {"x1", r.changed_area->x1},
                         {"y0", r.changed_area->y0}, {"y1", r.changed_area->y1}};
  } else {
    j["changed_area"] = nullptr;
  }
  j["highlight_duration"] = r.highlight_duration_ms;
  return j;
}

inline ChangeReport report_from_json(const Json& j) {
  if (!j.is_object()) throw ProtocolError("change_report must be an object");
  ChangeReport r;
  const Json& ids = detail::field(j, "change_report", "changed_ids");
  if (!ids.is_array()) throw ProtocolError("change_report: 'changed_ids' must be an array");
  for (const auto& id : ids) {
    if (!id.is_number_unsigned() && !(id.is_number_integer() && id.get<std::int64_t>() >= 0))
      throw ProtocolError("change_report: ids must be non-negative integers");
    r.changed_ids.push_back(id.get<RowId>());
  }
  if (auto it = j.find("changed_area"); it != j.end() && !it->is_null()) {
    r.changed_area = Area{detail::number_field(*it, "changed_area", "x0"), detail::number_field(*it, "changed_area", "x1"),
                          detail::number_field(*it, "changed_area", "y0"), detail::number_field(*it, "changed_area", "y1")};
  }
  r.highlight_duration_ms = detail::uint_field(j, "change_report", "highlight_duration");
  return r;
}

inline Json to_json(const Message& message) {
  return std::visit(
      [](const auto& m) -> Json {
        using T = std::decay_t<decltype(m)>;
        Json j = Json::object();
        if constexpr (std::is_same_v<T, HelloMsg>) {
          j["type"] = "hello";
          j["spec"] = m.spec;
          j["columns"] = m.columns;
          j["total_rows"] = m.total_rows ? Json(*m.total_rows) : Json(nullptr);
        } else if constexpr (std::is_same_v<T, ChangesetMsg>) {
          j["type"] = "changeset";
          j["step"] = m.changeset.step;
          j["direction"] = to_string(m.changeset.direction);
          j["t_ms"] = m.changeset.emitted_at_ms;
          Json ins = Json::array(), upd = Json::array();
          for (const auto& r : m.changeset.inserts) ins.push_back(to_json(r));
          for (const auto& r : m.changeset.updates) upd.push_back(to_json(r));
          j["insert"] = std::move(ins);
          j["update"] = std::move(upd);
          j["remove"] = m.changeset.removes;
          j["quality"] = to_json(m.quality);
          j["change_report"] = to_json(m.report);
        } else if constexpr (std::is_same_v<T, StatusMsg>) {
          j["type"] = "status";
          j["status"] = to_string(m.status);
          j["alive"] = m.alive;
          if (m.warning) j["warning"] = *m.warning;
        } else if constexpr (std::is_same_v<T, ControlMsg>) {
          j["type"] = "control";
          j["action"] = m.action;
          if (m.params) j["params"] = *m.params;
        } else if constexpr (std::is_same_v<T, SetMsg>) {
          j["type"] = "set";
          j["key"] = m.key;
          j["value"] = m.value;
        } else if constexpr (std::is_same_v<T, SnapshotRequestMsg>) {
          j["type"] = "snapshot_request";
        } else if constexpr (std::is_same_v<T, ChunkMsg>) {
          j["type"] = "chunk";
          j["batch"] = m.batch;
          Json rows = Json::array();
          for (const auto& r : m.rows) rows.push_back(to_json(r));
          j["rows"] = std::move(rows);
        } else if constexpr (std::is_same_v<T, EndMsg>) {
          j["type"] = "end";
        } else if constexpr (std::is_same_v<T, AckMsg>) {
          j["type"] = "ack";
          j["batch"] = m.batch;
        }
        return j;
      },
      message);
}

inline std::string serialize(const Message& message) { return to_json(message).dump(); }

inline std::optional<Status> parse_status(std::string_view s) {
  for (auto st : {Status::idle, Status::running, Status::paused, Status::done, Status::stopped})
    if (to_string(st) == s) return st;
  return std::nullopt;
}

// Throws ProtocolError for malformed or unknown messages.
inline Message parse_message(const Json& j) {
  if (!j.is_object()) throw ProtocolError("message must be a JSON object");
  auto t = j.find("type");
  if (t == j.end() || !t->is_string()) throw ProtocolError("message: missing field 'type'");
  const std::string type = t->get<std::string>();
  if (type == "hello") {
    HelloMsg m;
    m.spec = detail::field(j, type, "spec");
    const Json& cols = detail::field(j, type, "columns");
    if (!cols.is_array()) throw ProtocolError("hello: 'columns' must be an array");
    for (const auto& c : cols) {
      if (!c.is_string()) throw ProtocolError("hello: column names must be strings");
      m.columns.push_back(c.get<std::string>());
    }
    if (auto it = j.find("total_rows"); it != j.end() && !it->is_null()) m.total_rows = detail::uint_field(j, type, "total_rows");
    return m;
  }
  if (type == "changeset") {
    ChangesetMsg m;
    const Json& step = detail::field(j, type, "step");
    if (!step.is_number_integer()) throw ProtocolError("changeset: field 'step' must be an integer");
    m.changeset.step = step.get<std::int64_t>();
    auto dir = detail::string_field(j, type, "direction");
    if (dir != "forward" && dir != "backward") throw ProtocolError("changeset: bad direction '" + dir + "'");
    m.changeset.direction = dir == "forward" ? Direction::forward : Direction::backward;
    m.changeset.emitted_at_ms = detail::number_field(j, type, "t_ms");
    auto rows = [&](std::string_view key, std::vector<Row>& out) {
      const Json& a = detail::field(j, type, key);
      if (!a.is_array()) throw ProtocolError("changeset: '" + std::string(key) + "' must be an array");
      for (const auto& r : a) out.push_back(row_from_json(r, "changeset"));
    };
    rows("insert", m.changeset.inserts);
    rows("update", m.changeset.updates);
    const Json& rm = detail::field(j, type, "remove");
    if (!rm.is_array()) throw ProtocolError("changeset: 'remove' must be an array");
    for (const auto& id : rm) {
      if (!id.is_number_unsigned() && !(id.is_number_integer() && id.get<std::int64_t>() >= 0))
        throw ProtocolError("changeset: removed ids must be non-negative integers");
      m.changeset.removes.push_back(id.get<RowId>());
    }
    m.quality = quality_from_json(detail::field(j, type, "quality"));
    m.report = report_from_json(detail::field(j, type, "change_report"));
    return m;
  }
  if (type == "status") {
    StatusMsg m;
    auto s = parse_status(detail::string_field(j, type, "status"));
    if (!s) throw ProtocolError("status: unknown status");
    m.status = *s;
    const Json& alive = detail::field(j, type, "alive");
    if (!alive.is_boolean()) throw ProtocolError("status: 'alive' must be a boolean");
    m.alive = alive.get<bool>();
    if (auto it = j.find("warning"); it != j.end() && !it->is_null()) m.warning = detail::string_field(j, type, "warning");
    return m;
  }
  if (type == "control") {
    ControlMsg m;
    m.action = detail::string_field(j, type, "action");
    if (auto it = j.find("params"); it != j.end()) m.params = *it;
    return m;
  }
  if (type == "set") {
    SetMsg m;
    m.key = detail::string_field(j, type, "key");
    m.value = detail::field(j, type, "value");
    return m;
  }
  if (type == "snapshot_request") return SnapshotRequestMsg{};
  if (type == "chunk") {
    ChunkMsg m;
    const Json& rows = detail::field(j, type, "rows");
    m.batch = detail::uint_field(j, type, "batch");
    if (!rows.is_array()) throw ProtocolError("chunk: 'rows' must be an array");
    for (const auto& r : rows) m.rows.push_back(columns_from_json(r, "chunk"));
    return m;
  }
  if (type == "end") return EndMsg{};
  if (type == "ack") return AckMsg{detail::uint_field(j, type, "batch")};
  throw ProtocolError("unknown message type '" + type + "'");
}

inline Message parse_message(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ProtocolError(std::string("malformed JSON: ") + e.what());
  }
  return parse_message(j);
}

inline ChangesetMsg to_message(const ChangesetEvent& ev) { return {ev.changeset, ev.quality, ev.report}; }
inline StatusMsg to_message(const StatusEvent& ev) { return {ev.status, ev.alive, ev.warning}; }

inline HelloMsg hello_for(const Session& session) {
  return {to_document(session.spec()), session.header(), session.total_rows()};
}

// ---- trace --------------------------------------------------------------------------

// One JSON line per emitted changeset.
inline std::string trace_line(const ChangesetEvent& ev, std::size_t rows_after) {
  Json j = Json::object();
  j["step"] = ev.changeset.step;
  j["direction"] = to_string(ev.changeset.direction);
  j["t_ms"] = ev.changeset.emitted_at_ms;
  j["counts"] = {{"insert", ev.changeset.inserts.size()},
                 {"update", ev.changeset.updates.size()},
                 {"remove", ev.changeset.removes.size()},
                 {"rows", rows_after}};
  if (!ev.batches.empty()) j["batches"] = ev.batches;
  j["quality"] = to_json(ev.quality);
  j["change_report"] = to_json(ev.report);
  return j.dump();
}

// FNV-1a, 64 bit: the fingerprint used for trace goldens.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Writes next to the destination and renames on commit, so a failed run
// leaves no partial trace behind.
class TraceWriter {
 public:
  explicit TraceWriter(std::filesystem::path path) : path_(std::move(path)), tmp_(path_) {
    tmp_ += ".partial";
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw IoError("cannot open trace file " + tmp_.string());
  }

  TraceWriter(const TraceWriter&) = delete;
  TraceWriter& operator=(const TraceWriter&) = delete;

  ~TraceWriter() {
    if (!committed_) abort();
  }

  void write(const std::string& line) {
    out_ << line << '\n';
    out_.flush();
    if (!out_) throw IoError("write failed on " + tmp_.string());
    ++lines_;
  }

  void commit() {
    out_.close();
    std::filesystem::rename(tmp_, path_);
    committed_ = true;
  }

  void abort() {
    if (out_.is_open()) out_.close();
    std::error_code ec;
    std::filesystem::remove(tmp_, ec);
    committed_ = true;
  }

  std::size_t lines() const { return lines_; }

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::ofstream out_;
  std::size_t lines_ = 0;
  bool committed_ = false;
};

}  // namespace provega
