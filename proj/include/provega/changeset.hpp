#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "provega/config.hpp"
#include "provega/error.hpp"
#include "provega/spec.hpp"
#include "provega/value.hpp"

namespace provega {

enum class Direction { forward, backward };

inline std::string_view to_string(Direction d) { return d == Direction::forward ? "forward" : "backward"; }

struct Changeset {
  std::int64_t step = 0;
  std::vector<Row> inserts;
  std::vector<Row> updates;  // full replacement rows, keyed by id
  std::vector<RowId> removes;
  double emitted_at_ms = 0.0;
  Direction direction = Direction::forward;

  bool empty() const { return inserts.empty() && updates.empty() && removes.empty(); }
  bool operator==(const Changeset&) const = default;
};

struct Area {
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  bool operator==(const Area&) const = default;
};

struct ChangeReport {
  std::vector<RowId> changed_ids;  // ascending
  std::optional<Area> changed_area;
  std::uint64_t highlight_duration_ms = 600;

  bool operator==(const ChangeReport&) const = default;
};

// A changed row as seen across one changeset: `before` is null for inserts.
struct ChangedRow {
  const Row* before = nullptr;
  const Row* after = nullptr;
};

// Minimal bounding box, in data coordinates, over the old and new positions
// of the changed rows. Returns nothing when a channel is missing or
// categorical, or when no changed row has a numeric position. A string value
// on an encoded channel sets `non_numeric`.
inline std::optional<Area> detect_area(const std::vector<ChangedRow>& rows, const Encodings& enc,
                                       bool* non_numeric = nullptr) {
  if (!enc.x_field || !enc.y_field || enc.categorical) {
    if (non_numeric && enc.categorical) *non_numeric = true;
    return std::nullopt;
  }
  std::optional<Area> box;
  bool bad = false;
  auto include = [&](const Row* row) {
    if (!row) return;
    const Value* vx = row->columns.find(*enc.x_field);
    const Value* vy = row->columns.find(*enc.y_field);
    if (!vx || !vy) return;
    if (std::holds_alternative<std::string>(*vx) || std::holds_alternative<std::string>(*vy) ||
        std::holds_alternative<bool>(*vx) || std::holds_alternative<bool>(*vy)) {
      bad = true;
      return;
    }
    auto x = as_number(*vx);
    auto y = as_number(*vy);
    if (!x || !y) return;
    if (!box) {
      box = Area{*x, *x, *y, *y};
    } else {
      box->x0 = std::min(box->x0, *x);
      box->x1 = std::max(box->x1, *x);
      box->y0 = std::min(box->y0, *y);
      box->y1 = std::max(box->y1, *y);
    }
  };
  for (const auto& r : rows) {
    include(r.before);
    include(r.after);
  }
  if (bad) {
    if (non_numeric) *non_numeric = true;
    return std::nullopt;
  }
  return box;
}

// The dataset as the client should currently see it, plus the bounded log of
// (forward, inverse) pairs that makes stepping back exact.
class ChangesetStore {
 public:
  static constexpr std::size_t kDefaultCapacity = 256;

  ChangesetStore(ChangeConfig change, Encodings encodings, std::size_t capacity = kDefaultCapacity)
      : change_(change), encodings_(std::move(encodings)), capacity_(std::max<std::size_t>(capacity, 1)) {}

  struct Applied {
    Changeset changeset;  // as applied, step assigned
    ChangeReport report;
  };

  // Applies a forward changeset as the next step. Throws ConflictError, leaving
  // the state untouched, if an insert collides or an update/remove misses.
  Applied apply(Changeset cs) {
    validate(cs);
    cs.step = step_ + 1;
    cs.direction = Direction::forward;
    Changeset inverse;
    inverse.step = step_;
    inverse.direction = Direction::backward;
    for (const auto& r : cs.inserts) inverse.removes.push_back(r.id);
    for (const auto& r : cs.updates) inverse.updates.push_back(rows_.at(r.id));
    for (auto id : cs.removes) inverse.inserts.push_back(rows_.at(id));

    ChangeReport report = report_for(cs);
    mutate(cs);
    ++step_;
    log_.push_back({cs, std::move(inverse)});
    if (log_.size() > capacity_) {
      log_.pop_front();
      ++evicted_;
    }
    return {std::move(cs), std::move(report)};
  }

  // Pops the newest step and applies its inverse.
  Applied invert_last() {
    if (log_.empty()) {
      if (step_ >= 0) throw HistoryEvictedError("step " + std::to_string(step_) + " is older than the history capacity");
      throw EmptyHistoryError("no step to invert");
    }
    Changeset inverse = std::move(log_.back().second);
    log_.pop_back();
    ChangeReport report = report_for(inverse);
    mutate(inverse);
    --step_;
    inverse.step = step_;
    return {std::move(inverse), std::move(report)};
  }

  // Change report for `cs` against the current state (before applying it).
  ChangeReport report_for(const Changeset& cs) {
    ChangeReport report;
    report.highlight_duration_ms =
        change_.mark.enabled ? change_.mark.highlight_duration_ms : change_.area.highlight_duration_ms;
    std::vector<ChangedRow> changed;
    changed.reserve(cs.inserts.size() + cs.updates.size());
    for (const auto& r : cs.inserts) {
      report.changed_ids.push_back(r.id);
      changed.push_back({nullptr, &r});
    }
    for (const auto& r : cs.updates) {
      report.changed_ids.push_back(r.id);
      auto it = rows_.find(r.id);
      changed.push_back({it == rows_.end() ? nullptr : &it->second, &r});
    }
    std::sort(report.changed_ids.begin(), report.changed_ids.end());
    if (change_.area.enabled && !report.changed_ids.empty()) {
      bool non_numeric = false;
      report.changed_area = detect_area(changed, encodings_, &non_numeric);
      if (non_numeric && !warned_non_numeric_) {
        warned_non_numeric_ = true;
        warnings_.push_back("area highlighting disabled: encoded x/y channels are not numeric");
      }
    }
    return report;
  }

  const std::map<RowId, Row>& rows() const { return rows_; }
  std::int64_t step() const { return step_; }
  std::size_t history_size() const { return log_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  const ChangeConfig& change_config() const { return change_; }
  const Encodings& encodings() const { return encodings_; }

  // Current rows in id order, for catch-up and snapshots.
  std::vector<Row> snapshot() const {
    std::vector<Row> out;
    out.reserve(rows_.size());
    for (const auto& [_, row] : rows_) out.push_back(row);
    return out;
  }

 private:
  void validate(const Changeset& cs) const {
    std::unordered_set<RowId> seen;
    seen.reserve(cs.inserts.size() + cs.updates.size() + cs.removes.size());
    auto once = [&](RowId id) {
      if (!seen.insert(id).second) throw ConflictError("id " + std::to_string(id) + " appears twice in one changeset");
    };
    for (const auto& r : cs.inserts) {
      once(r.id);
      if (rows_.contains(r.id)) throw ConflictError("insert of existing id " + std::to_string(r.id));
    }
    for (const auto& r : cs.updates) {
      once(r.id);
      if (!rows_.contains(r.id)) throw ConflictError("update of missing id " + std::to_string(r.id));
    }
    for (auto id : cs.removes) {
      once(id);
      if (!rows_.contains(id)) throw ConflictError("remove of missing id " + std::to_string(id));
    }
  }

  void mutate(const Changeset& cs) {
    for (auto id : cs.removes) rows_.erase(id);
    for (const auto& r : cs.updates) rows_[r.id] = r;
    for (const auto& r : cs.inserts) rows_.emplace(r.id, r);
  }

  ChangeConfig change_;
  Encodings encodings_;
  std::size_t capacity_;
  std::map<RowId, Row> rows_;
  std::deque<std::pair<Changeset, Changeset>> log_;
  std::int64_t step_ = -1;
  std::size_t evicted_ = 0;
  bool warned_non_numeric_ = false;
  std::vector<std::string> warnings_;
};

// ---- coalescing ---------------------------------------------------------------

// Folds consecutive forward changesets into one. Per id:
//   insert+update -> insert (final values)   update+update -> update (latest)
//   insert+remove -> nothing                 update+remove -> remove
//   remove+insert -> update
// `priors` collects, for ids whose first touch was an update or remove, the row
// as it was before the first merged changeset.
class ChangesetMerger {
 public:
  void add(const Changeset& cs, const std::map<RowId, Row>* state_before = nullptr) {
    for (auto id : cs.removes) touch_remove(id, state_before);
    for (const auto& r : cs.updates) touch_update(r, state_before);
    for (const auto& r : cs.inserts) touch_insert(r);
    step_ = cs.step;
    ++count_;
  }

  bool empty() const { return count_ == 0; }
  std::size_t merged_count() const { return count_; }

  Changeset result() const {
    Changeset out;
    out.step = step_;
    for (auto id : order_) {
      const auto& e = entries_.at(id);
      switch (e.op) {
        case Op::insert: out.inserts.push_back(e.row); break;
        case Op::update: out.updates.push_back(e.row); break;
        case Op::remove: out.removes.push_back(id); break;
        case Op::none: break;
      }
    }
    return out;
  }

  const std::map<RowId, Row>& priors() const { return priors_; }

 private:
  enum class Op { none, insert, update, remove };
  struct Entry {
    Op op = Op::none;
    Row row;
  };

  Entry& entry(RowId id) {
    auto [it, fresh] = entries_.try_emplace(id);
    if (fresh) order_.push_back(id);
    return it->second;
  }

  void remember(RowId id, const std::map<RowId, Row>* state) {
    if (!state || priors_.contains(id)) return;
    if (auto it = state->find(id); it != state->end()) priors_.emplace(id, it->second);
  }

  void touch_insert(const Row& r) {
    auto& e = entry(r.id);
    switch (e.op) {
      case Op::none: e = {Op::insert, r}; break;
      case Op::remove: e = {Op::update, r}; break;
      default: throw ConflictError("coalesce: insert of live id " + std::to_string(r.id));
    }
  }

  void touch_update(const Row& r, const std::map<RowId, Row>* state) {
    auto& e = entry(r.id);
    switch (e.op) {
      case Op::none:
        remember(r.id, state);
        e = {Op::update, r};
        break;
      case Op::insert: e.row = r; break;
      case Op::update: e.row = r; break;
      case Op::remove: throw ConflictError("coalesce: update of removed id " + std::to_string(r.id));
    }
  }

  void touch_remove(RowId id, const std::map<RowId, Row>* state) {
    auto& e = entry(id);
    switch (e.op) {
      case Op::none:
        remember(id, state);
        e = {Op::remove, {}};
        break;
      case Op::insert: e = {Op::none, {}}; break;
      case Op::update: e = {Op::remove, {}}; break;
      case Op::remove: throw ConflictError("coalesce: double remove of id " + std::to_string(id));
    }
  }

  std::unordered_map<RowId, Entry> entries_;
  std::vector<RowId> order_;
  std::map<RowId, Row> priors_;
  std::int64_t step_ = 0;
  std::size_t count_ = 0;
};

// Change report for a merged changeset, with old positions taken from the
// rows as they were before the first merged step.
inline ChangeReport merged_report(const Changeset& merged, const std::map<RowId, Row>& priors,
                                  const ChangeConfig& change, const Encodings& enc) {
  ChangeReport report;
  report.highlight_duration_ms = change.mark.enabled ? change.mark.highlight_duration_ms : change.area.highlight_duration_ms;
  std::vector<ChangedRow> changed;
  for (const auto& r : merged.inserts) {
    report.changed_ids.push_back(r.id);
    changed.push_back({nullptr, &r});
  }
  for (const auto& r : merged.updates) {
    report.changed_ids.push_back(r.id);
    auto it = priors.find(r.id);
    changed.push_back({it == priors.end() ? nullptr : &it->second, &r});
  }
  std::sort(report.changed_ids.begin(), report.changed_ids.end());
  if (change.area.enabled && !report.changed_ids.empty()) report.changed_area = detect_area(changed, enc);
  return report;
}

// Merges a sequence of changesets (no state needed: used for combining the
// parts of one step and for the coalesce operation on pending emissions).
inline Changeset coalesce(const std::vector<Changeset>& pending) {
  ChangesetMerger m;
  for (const auto& cs : pending) m.add(cs);
  return m.result();
}

}  // namespace provega
