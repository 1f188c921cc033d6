#pragma once

#include <charconv>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "provega/error.hpp"
#include "provega/source.hpp"
#include "provega/value.hpp"

namespace provega {

struct Dataset {
  std::vector<std::string> header;
  std::vector<ColumnType> types;
  std::vector<Row> rows;
};

namespace csv {

// RFC 4180 records. Accepts LF or CRLF line ends and quoted fields spanning
// lines. Record numbers in errors are 1-based and count the header.
inline std::vector<std::vector<std::string>> parse_records(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  bool after_quote = false;
  std::size_t i = 0;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
    after_quote = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
  };

  while (i < text.size()) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          i += 2;
          continue;
        }
        quoted = false;
        after_quote = true;
      } else {
        field.push_back(c);
      }
      ++i;
      continue;
    }
    if (c == '"') {
      if (field_started || after_quote)
        throw FormatError(records.size() + 1, "stray quote inside an unquoted field");
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      end_record();
      ++i;
    } else if (c == '\n') {
      end_record();
    } else {
      if (after_quote) throw FormatError(records.size() + 1, "characters after closing quote");
      field.push_back(c);
      field_started = true;
    }
    ++i;
  }
  if (quoted) throw FormatError(records.size() + 1, "unterminated quoted field");
  if (field_started || after_quote || !record.empty()) end_record();
  return records;
}

inline bool parse_int(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  auto first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline bool parse_float(std::string_view s, double& out) {
  if (s.empty()) return false;
  // Plain decimal/scientific only; from_chars would also take "inf" and "nan".
  for (char c : s) {
    if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+' || c == 'e' || c == 'E'))
      return false;
  }
  auto first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// Narrowest type that every non-empty cell satisfies:
// integer -> float -> boolean -> string. All-empty columns are null.
inline ColumnType infer(const std::vector<std::string_view>& cells) {
  bool any = false, all_int = true, all_num = true, all_bool = true;
  for (auto cell : cells) {
    if (cell.empty()) continue;
    any = true;
    std::int64_t i;
    double d;
    if (all_int && !parse_int(cell, i)) all_int = false;
    if (all_num && !all_int && !parse_float(cell, d)) all_num = false;
    if (all_bool && cell != "true" && cell != "false") all_bool = false;
    if (!all_int && !all_num && !all_bool) break;
  }
  if (!any) return ColumnType::null;
  if (all_int) return ColumnType::integer;
  if (all_num) return ColumnType::floating;
  if (all_bool) return ColumnType::boolean;
  return ColumnType::string;
}

inline Value convert(std::string_view cell, ColumnType type) {
  if (cell.empty()) return Value{};
  switch (type) {
    case ColumnType::integer: {
      std::int64_t i = 0;
      parse_int(cell, i);
      return i;
    }
    case ColumnType::floating: {
      double d = 0;
      parse_float(cell, d);
      return d;
    }
    case ColumnType::boolean: return cell == "true";
    case ColumnType::string: return std::string(cell);
    case ColumnType::null: return Value{};
  }
  return Value{};
}

inline Dataset parse(std::string_view text) {
  auto records = parse_records(text);
  // A trailing blank line parses as one empty field; ignore blank records.
  std::erase_if(records, [](const auto& r) { return r.size() == 1 && r[0].empty(); });
  if (records.empty()) throw EmptyDatasetError("CSV has no header");
  Dataset ds;
  ds.header = records.front();
  for (std::size_t c = 0; c < ds.header.size(); ++c) {
    if (ds.header[c].empty()) throw FormatError(1, "empty column name at position " + std::to_string(c + 1));
    if (ds.header[c] == kIdKey) throw FormatError(1, "column name '_id' is reserved");
    for (std::size_t d = 0; d < c; ++d)
      if (ds.header[d] == ds.header[c]) throw FormatError(1, "duplicate column '" + ds.header[c] + "'");
  }
  if (records.size() == 1) throw EmptyDatasetError("CSV has a header but no rows");
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != ds.header.size()) {
      throw FormatError(r + 1, "expected " + std::to_string(ds.header.size()) + " fields, got " +
                                   std::to_string(records[r].size()));
    }
  }
  ds.types.resize(ds.header.size());
  std::vector<std::string_view> column;
  column.reserve(records.size() - 1);
  for (std::size_t c = 0; c < ds.header.size(); ++c) {
    column.clear();
    for (std::size_t r = 1; r < records.size(); ++r) column.emplace_back(records[r][c]);
    ds.types[c] = infer(column);
  }
  ds.rows.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    Row row{static_cast<RowId>(r - 1), {}};
    for (std::size_t c = 0; c < ds.header.size(); ++c) row.columns.set(ds.header[c], convert(records[r][c], ds.types[c]));
    ds.rows.push_back(std::move(row));
  }
  return ds;
}

}  // namespace csv

namespace detail {

// Integer columns holding any float are promoted to float throughout.
inline void unify_types(Dataset& ds) {
  ds.types.assign(ds.header.size(), ColumnType::null);
  for (std::size_t c = 0; c < ds.header.size(); ++c) {
    bool has_int = false, has_float = false;
    ColumnType seen = ColumnType::null;
    bool mixed = false;
    for (const auto& row : ds.rows) {
      const Value* v = row.columns.find(ds.header[c]);
      if (!v || is_null(*v)) continue;
      auto t = type_of(*v);
      has_int |= t == ColumnType::integer;
      has_float |= t == ColumnType::floating;
      if (seen == ColumnType::null) {
        seen = t;
      } else if (seen != t) {
        mixed = true;
      }
    }
    if (has_int && has_float) {
      for (auto& row : ds.rows) {
        const Value* v = row.columns.find(ds.header[c]);
        if (v && std::holds_alternative<std::int64_t>(*v))
          row.columns.set(ds.header[c], static_cast<double>(std::get<std::int64_t>(*v)));
      }
      seen = ColumnType::floating;
      mixed = false;
      for (const auto& row : ds.rows) {
        const Value* v = row.columns.find(ds.header[c]);
        if (v && !is_null(*v) && type_of(*v) != ColumnType::floating) mixed = true;
      }
    }
    ds.types[c] = mixed ? ColumnType::string : seen;
  }
}

}  // namespace detail

// Array of flat objects. Header lists keys in first-seen order; a row that
// omits a column holds null for it.
inline Dataset parse_json_records(const Json& array) {
  if (!array.is_array()) throw FormatError(0, "expected an array of objects");
  if (array.empty()) throw EmptyDatasetError("dataset has no rows");
  Dataset ds;
  std::vector<Columns> raw;
  raw.reserve(array.size());
  for (std::size_t i = 0; i < array.size(); ++i) {
    const auto& rec = array[i];
    if (!rec.is_object()) throw FormatError(i + 1, "record is not an object");
    Columns cols;
    for (const auto& [key, val] : rec.items()) {
      if (key == kIdKey) throw FormatError(i + 1, "column name '_id' is reserved");
      auto v = value_from_json(val);
      if (!v) throw FormatError(i + 1, "column '" + key + "' is not a scalar");
      if (std::find(ds.header.begin(), ds.header.end(), key) == ds.header.end()) ds.header.push_back(key);
      cols.set(key, std::move(*v));
    }
    raw.push_back(std::move(cols));
  }
  ds.rows.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    Row row{static_cast<RowId>(i), {}};
    for (const auto& name : ds.header) {
      const Value* v = raw[i].find(name);
      row.columns.set(name, v ? *v : Value{});
    }
    ds.rows.push_back(std::move(row));
  }
  detail::unify_types(ds);
  return ds;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

// Entire dataset at once; rows get ids 0..n-1 in source order.
inline Dataset load_complete(const DataSourceDescriptor& source) {
  if (const auto* in = std::get_if<InlineSource>(&source.kind)) return parse_json_records(in->values);
  if (const auto* f = std::get_if<FileSource>(&source.kind)) {
    auto text = read_file(f->path);
    if (f->format == FileFormat::csv) {
      if (text.empty()) throw EmptyDatasetError("empty file: " + f->path.string());
      return csv::parse(text);
    }
    Json doc;
    try {
      doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw FormatError(0, e.what());
    }
    return parse_json_records(doc);
  }
  throw IoError("a WebSocket source has no complete form; open it progressively");
}

// ---- progressive input --------------------------------------------------------

struct BatchEvent {
  std::uint64_t batch = 0;
  std::vector<Row> rows;
};
struct EndEvent {};
struct DisconnectEvent {
  std::string reason;
};
using StreamEvent = std::variant<BatchEvent, EndEvent, DisconnectEvent>;

// Single-producer/single-consumer queue between a generator connection and
// the scheduler. Row ids are assigned here, in arrival order. The first batch
// fixes the column set; a later batch introducing a new column is rejected.
class ChunkStream {
 public:
  // Producer side. Throws ProtocolError for schema violations (nothing queued).
  void push_batch(std::uint64_t batch, std::vector<Columns> rows) {
    std::vector<Row> out;
    out.reserve(rows.size());
    {
      std::lock_guard lock(mutex_);
      if (closed_) return;
      for (const auto& cols : rows) {
        for (const auto& [name, _] : cols) {
          if (name == kIdKey) throw ProtocolError("chunk: column name '_id' is reserved");
          if (header_fixed_ && std::find(header_.begin(), header_.end(), name) == header_.end())
            throw ProtocolError("chunk: batch " + std::to_string(batch) + " introduces new column '" + name + "'");
        }
      }
      if (!header_fixed_) {
        for (const auto& cols : rows)
          for (const auto& [name, _] : cols)
            if (std::find(header_.begin(), header_.end(), name) == header_.end()) header_.push_back(name);
        header_fixed_ = !rows.empty();
      }
      for (auto& cols : rows) out.push_back(Row{next_id_++, std::move(cols)});
      events_.emplace_back(BatchEvent{batch, std::move(out)});
    }
    cv_.notify_one();
  }

  void push_end() { push(EndEvent{}); }
  void push_disconnect(std::string reason) { push(DisconnectEvent{std::move(reason)}); }

  // Consumer side: blocks until an event is available.
  StreamEvent pop() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return !events_.empty(); });
    auto ev = std::move(events_.front());
    events_.pop_front();
    return ev;
  }

  std::optional<StreamEvent> try_pop() {
    std::lock_guard lock(mutex_);
    if (events_.empty()) return std::nullopt;
    auto ev = std::move(events_.front());
    events_.pop_front();
    return ev;
  }

  std::vector<std::string> header() const {
    std::lock_guard lock(mutex_);
    return header_;
  }

  std::size_t pending() const {
    std::lock_guard lock(mutex_);
    return events_.size();
  }

 private:
  void push(StreamEvent ev) {
    {
      std::lock_guard lock(mutex_);
      if (closed_) return;
      if (!std::holds_alternative<BatchEvent>(ev)) closed_ = true;
      events_.push_back(std::move(ev));
    }
    cv_.notify_one();
  }

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<StreamEvent> events_;
  std::vector<std::string> header_;
  bool header_fixed_ = false;
  bool closed_ = false;
  RowId next_id_ = 0;
};

}  // namespace provega
