#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "provega/changeset.hpp"
#include "provega/config.hpp"
#include "provega/processors.hpp"
#include "provega/value.hpp"

namespace provega {

struct QualitySample {
  std::int64_t step = -1;
  double t_ms = 0.0;
  std::optional<double> absolute_progress;
  std::optional<double> relative_progress;
  std::optional<double> stability;
  std::optional<double> certainty;
  std::optional<double> etc_ms;
  bool alive = true;

  bool operator==(const QualitySample&) const = default;
};

// Linear estimate of the time left: elapsed * (1 - p) / p.
inline std::optional<double> estimate_etc(double elapsed_ms, std::optional<double> progress) {
  if (!progress || *progress <= 0.0) return std::nullopt;
  if (*progress >= 1.0) return 0.0;
  return std::max(0.0, elapsed_ms * (1.0 - *progress) / *progress);
}

// Where the progression stands after a step, as the quality module sees it.
struct ProgressState {
  std::int64_t step = -1;
  double t_ms = 0.0;        // now, relative to session start
  double elapsed_ms = 0.0;  // since the progression started running
  ChunkingType kind = ChunkingType::data;
  std::uint64_t rows_emitted = 0;
  std::optional<std::uint64_t> total_rows;
  std::optional<std::uint64_t> total_steps;  // process chunking: declared max iterations
  bool done = false;
};

// Per-metric time series. Steps increase strictly within a segment; a step
// back appends a correction point that opens a new segment.
class QualitySeries {
 public:
  struct Point {
    std::int64_t step;
    double value;
    bool correction = false;
  };

  void append(const std::string& metric, std::int64_t step, double value, bool correction) {
    series_[metric].push_back({step, value, correction});
  }

  const std::vector<Point>& points(const std::string& metric) const {
    static const std::vector<Point> none;
    auto it = series_.find(metric);
    return it == series_.end() ? none : it->second;
  }

  const std::map<std::string, std::vector<Point>>& all() const { return series_; }

 private:
  std::map<std::string, std::vector<Point>> series_;
};

class QualityMonitor {
 public:
  QualityMonitor(QualityBindings bindings, std::optional<std::string> shift_metric = std::nullopt)
      : bindings_(std::move(bindings)), shift_metric_(std::move(shift_metric)) {}

  // Built-in absolute progress: rows emitted over total (data/mixed), or steps
  // over declared iterations (process). Exactly 1 once done.
  static std::optional<double> builtin_progress(const ProgressState& s) {
    if (s.done) return 1.0;
    if (s.kind == ChunkingType::process) {
      if (!s.total_steps || *s.total_steps == 0) return std::nullopt;
      return std::clamp(static_cast<double>(s.step + 1) / static_cast<double>(*s.total_steps), 0.0, 1.0);
    }
    if (!s.total_rows || *s.total_rows == 0) return std::nullopt;
    return std::clamp(static_cast<double>(s.rows_emitted) / static_cast<double>(*s.total_rows), 0.0, 1.0);
  }

  // Sample after a forward step. `changeset` is the step's delta (before
  // coalescing) and `metrics` the processor's report for the step, if any.
  QualitySample sample(const ProgressState& state, const Changeset& changeset, const Metrics& metrics) {
    std::size_t changed = changeset.inserts.size() + changeset.updates.size();
    max_changed_ = std::max(max_changed_, changed);
    QualitySample q = resolve(state, changeset, metrics, changed);
    record(q, false);
    return q;
  }

  // Sample after a step back. Relative progress and processor-derived
  // values are not recomputed for rewound state.
  QualitySample correction(const ProgressState& state) {
    QualitySample q;
    q.step = state.step;
    q.t_ms = state.t_ms;
    auto builtin = builtin_progress(state);
    if (bindings_.absolute_progress.kind == QualityBinding::Kind::builtin) q.absolute_progress = builtin;
    q.etc_ms = estimate_etc(state.elapsed_ms, q.absolute_progress ? q.absolute_progress : builtin);
    record(q, true);
    return q;
  }

  const QualitySeries& series() const { return series_; }
  const QualityBindings& bindings() const { return bindings_; }

  // Field bindings must name a column of the incoming rows.
  void check_bindings(const std::vector<std::string>& header) const {
    auto check = [&](const char* name, const QualityBinding& b) {
      if (b.kind != QualityBinding::Kind::field) return;
      if (std::find(header.begin(), header.end(), b.field) == header.end()) {
        throw BindingError(std::string("provega.progression.monitoring.quality.") + name,
                           "bound field '" + b.field + "' is not a data column");
      }
    };
    check("absolute_progress", bindings_.absolute_progress);
    check("relative_progress", bindings_.relative_progress);
    check("stability", bindings_.stability);
    check("certainty", bindings_.certainty);
  }

 private:
  static std::optional<double> field_value(const Changeset& cs, const std::string& field) {
    const Row* last = nullptr;
    if (!cs.inserts.empty()) {
      last = &cs.inserts.back();
    } else if (!cs.updates.empty()) {
      last = &cs.updates.back();
    }
    if (!last) return std::nullopt;
    const Value* v = last->columns.find(field);
    if (!v) return std::nullopt;
    auto n = as_number(*v);
    if (!n) return std::nullopt;
    return std::clamp(*n, 0.0, 1.0);
  }

  std::optional<double> builtin_stability(const Metrics& metrics) const {
    if (auto it = metrics.find("stability"); it != metrics.end()) return std::clamp(it->second, 0.0, 1.0);
    if (shift_metric_) {
      if (auto it = metrics.find(*shift_metric_); it != metrics.end()) return 1.0 / (1.0 + std::max(0.0, it->second));
    }
    return std::nullopt;
  }

  QualitySample resolve(const ProgressState& s, const Changeset& cs, const Metrics& metrics, std::size_t changed) {
    QualitySample q;
    q.step = s.step;
    q.t_ms = s.t_ms;
    q.alive = true;
    auto pick = [&](const QualityBinding& b, auto builtin) -> std::optional<double> {
      switch (b.kind) {
        case QualityBinding::Kind::off: return std::nullopt;
        case QualityBinding::Kind::builtin: return builtin();
        case QualityBinding::Kind::field: return field_value(cs, b.field);
      }
      return std::nullopt;
    };
    q.absolute_progress = pick(bindings_.absolute_progress, [&] { return builtin_progress(s); });
    q.relative_progress = pick(bindings_.relative_progress, [&]() -> std::optional<double> {
      if (max_changed_ == 0) return 1.0;
      return 1.0 - static_cast<double>(changed) / static_cast<double>(max_changed_);
    });
    q.stability = pick(bindings_.stability, [&] { return builtin_stability(metrics); });
    q.certainty = pick(bindings_.certainty, [&]() -> std::optional<double> {
      if (auto it = metrics.find("certainty"); it != metrics.end()) return std::clamp(it->second, 0.0, 1.0);
      return std::nullopt;
    });
    auto p = q.absolute_progress ? q.absolute_progress : builtin_progress(s);
    q.etc_ms = s.done ? std::optional<double>(0.0) : estimate_etc(s.elapsed_ms, p);
    return q;
  }

  void record(const QualitySample& q, bool correction) {
    auto put = [&](const char* name, const std::optional<double>& v) {
      if (v) series_.append(name, q.step, *v, correction);
    };
    put("absolute_progress", q.absolute_progress);
    put("relative_progress", q.relative_progress);
    put("stability", q.stability);
    put("certainty", q.certainty);
    put("etc_ms", q.etc_ms);
  }

  QualityBindings bindings_;
  std::optional<std::string> shift_metric_;
  std::size_t max_changed_ = 0;
  QualitySeries series_;
};

}  // namespace provega
