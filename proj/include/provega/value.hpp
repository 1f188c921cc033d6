#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "provega/error.hpp"

namespace provega {

// Insertion-ordered JSON everywhere: host documents must round-trip untouched.
using Json = nlohmann::ordered_json;

using RowId = std::uint64_t;

// Ids above this bound never come from ingestion. Processors that synthesize
// rows (density bins) and the re-keying used when visual stability is off
// draw from these ranges.
inline constexpr RowId kReplacementIdBase = RowId{1} << 40;
inline constexpr RowId kProcessorIdBase = RowId{1} << 48;

// Name of the row-id member in serialized rows. Reserved in source data.
inline constexpr std::string_view kIdKey = "_id";

using Value = std::variant<std::monostate, bool, std::int64_t, double, std::string>;

enum class ColumnType { null, integer, floating, boolean, string };

inline std::string_view to_string(ColumnType t) {
  switch (t) {
    case ColumnType::null: return "null";
    case ColumnType::integer: return "integer";
    case ColumnType::floating: return "float";
    case ColumnType::boolean: return "boolean";
    case ColumnType::string: return "string";
  }
  return "null";
}

inline bool is_null(const Value& v) { return std::holds_alternative<std::monostate>(v); }

inline std::optional<double> as_number(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  return std::nullopt;
}

inline ColumnType type_of(const Value& v) {
  switch (v.index()) {
    case 1: return ColumnType::boolean;
    case 2: return ColumnType::integer;
    case 3: return ColumnType::floating;
    case 4: return ColumnType::string;
    default: return ColumnType::null;
  }
}

// Column name -> value, kept in first-seen order. Rows are narrow (a handful
// of columns), so linear lookup beats a map.
class Columns {
 public:
  using Entry = std::pair<std::string, Value>;

  Columns() = default;
  Columns(std::initializer_list<Entry> entries) : entries_(entries) {}

  const Value* find(std::string_view name) const {
    auto it = std::find_if(entries_.begin(), entries_.end(),
                           [&](const Entry& e) { return e.first == name; });
    return it == entries_.end() ? nullptr : &it->second;
  }

  void set(std::string_view name, Value value) {
    for (auto& e : entries_) {
      if (e.first == name) {
        e.second = std::move(value);
        return;
      }
    }
    entries_.emplace_back(std::string(name), std::move(value));
  }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  bool operator==(const Columns&) const = default;

 private:
  std::vector<Entry> entries_;
};

struct Row {
  RowId id = 0;
  Columns columns;

  bool operator==(const Row&) const = default;
};

// ---- JSON conversion ----------------------------------------------------------

inline Json to_json(const Value& v) {
  return std::visit(
      [](const auto& x) -> Json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return nullptr;
        } else {
          return x;
        }
      },
      v);
}

// Scalars only; nested arrays/objects are not row values.
inline std::optional<Value> value_from_json(const Json& j) {
  switch (j.type()) {
    case Json::value_t::null: return Value{};
    case Json::value_t::boolean: return Value{j.get<bool>()};
    case Json::value_t::number_integer: return Value{j.get<std::int64_t>()};
    case Json::value_t::number_unsigned: {
      auto u = j.get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(INT64_MAX)) return Value{static_cast<double>(u)};
      return Value{static_cast<std::int64_t>(u)};
    }
    case Json::value_t::number_float: return Value{j.get<double>()};
    case Json::value_t::string: return Value{j.get<std::string>()};
    default: return std::nullopt;
  }
}

inline Json to_json(const Columns& columns) {
  Json out = Json::object();
  for (const auto& [name, value] : columns) out[name] = to_json(value);
  return out;
}

// Serialized row: `_id` first, then the columns in order.
inline Json to_json(const Row& row) {
  Json out = Json::object();
  out[std::string(kIdKey)] = row.id;
  for (const auto& [name, value] : row.columns) out[name] = to_json(value);
  return out;
}

inline Columns columns_from_json(const Json& j, std::string_view what) {
  if (!j.is_object()) throw ProtocolError(std::string(what) + ": row must be an object");
  Columns cols;
  for (const auto& [key, val] : j.items()) {
    auto v = value_from_json(val);
    if (!v) throw ProtocolError(std::string(what) + ": column '" + key + "' is not a scalar");
    cols.set(key, std::move(*v));
  }
  return cols;
}

inline Row row_from_json(const Json& j, std::string_view what) {
  if (!j.is_object()) throw ProtocolError(std::string(what) + ": row must be an object");
  auto it = j.find(std::string(kIdKey));
  if (it == j.end() || !it->is_number_unsigned()) {
    if (it == j.end() || !it->is_number_integer() || it->get<std::int64_t>() < 0)
      throw ProtocolError(std::string(what) + ": missing field '_id'");
  }
  Row row;
  row.id = it->get<RowId>();
  for (const auto& [key, val] : j.items()) {
    if (key == kIdKey) continue;
    auto v = value_from_json(val);
    if (!v) throw ProtocolError(std::string(what) + ": column '" + key + "' is not a scalar");
    row.columns.set(key, std::move(*v));
  }
  return row;
}

}  // namespace provega
