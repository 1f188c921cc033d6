#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "provega/changeset.hpp"
#include "provega/config.hpp"
#include "provega/data_source.hpp"
#include "provega/error.hpp"
#include "provega/prng.hpp"
#include "provega/processors.hpp"
#include "provega/quality.hpp"
#include "provega/spec.hpp"

namespace provega {

// ---- chunk plans ----------------------------------------------------------------

struct ChunkPlan {
  std::vector<std::vector<RowId>> chunks;
  ReadingMethod method = ReadingMethod::ascending;
  std::uint64_t chunk_size = 1;
  std::uint64_t seed = 0;

  bool operator==(const ChunkPlan&) const = default;
};

inline std::vector<std::vector<RowId>> split(std::span<const RowId> order, std::uint64_t size) {
  std::vector<std::vector<RowId>> chunks;
  for (std::size_t i = 0; i < order.size(); i += size) {
    auto end = std::min<std::size_t>(order.size(), i + size);
    chunks.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return chunks;
}

// Partition of 0..n-1 into ordered chunks of `chunk_size` (the last may be
// shorter). Random plans shuffle with the normative SplitMix64/Fisher-Yates.
inline ChunkPlan plan_chunks(std::uint64_t n, const ReadingConfig& reading) {
  if (n == 0) throw InvalidPlanError("cannot plan an empty dataset");
  if (reading.chunk_size == 0) throw InvalidPlanError("chunk_size must be >= 1");
  std::vector<RowId> order(n);
  for (std::uint64_t i = 0; i < n; ++i) order[i] = i;
  switch (reading.method) {
    case ReadingMethod::ascending: break;
    case ReadingMethod::descending: std::reverse(order.begin(), order.end()); break;
    case ReadingMethod::random: {
      SplitMix64 rng(reading.seed);
      shuffle(std::span<RowId>(order), rng);
      break;
    }
  }
  return {split(order, reading.chunk_size), reading.method, reading.chunk_size, reading.seed};
}

// Re-splits the chunks from `consumed` on with a new size, preserving order.
inline void replan_remaining(ChunkPlan& plan, std::size_t consumed, std::uint64_t chunk_size) {
  if (chunk_size == 0) throw InvalidPlanError("chunk_size must be >= 1");
  std::vector<RowId> rest;
  for (std::size_t c = consumed; c < plan.chunks.size(); ++c)
    rest.insert(rest.end(), plan.chunks[c].begin(), plan.chunks[c].end());
  plan.chunks.resize(std::min(consumed, plan.chunks.size()));
  auto tail = split(rest, chunk_size);
  plan.chunks.insert(plan.chunks.end(), std::make_move_iterator(tail.begin()), std::make_move_iterator(tail.end()));
  plan.chunk_size = chunk_size;
}

// ---- session state ----------------------------------------------------------------

enum class Status { idle, running, paused, done, stopped };
enum class Action { play, pause, stop, step_forward, step_backward };

inline std::string_view to_string(Status s) {
  switch (s) {
    case Status::idle: return "idle";
    case Status::running: return "running";
    case Status::paused: return "paused";
    case Status::done: return "done";
    case Status::stopped: return "stopped";
  }
  return "idle";
}

inline std::string_view to_string(Action a) {
  switch (a) {
    case Action::play: return "play";
    case Action::pause: return "pause";
    case Action::stop: return "stop";
    case Action::step_forward: return "step_forward";
    case Action::step_backward: return "step_backward";
  }
  return "play";
}

inline std::optional<Action> parse_action(std::string_view s) {
  for (auto a : {Action::play, Action::pause, Action::stop, Action::step_forward, Action::step_backward})
    if (to_string(a) == s) return a;
  return std::nullopt;
}

// Welford running mean/variance.
struct RunningStats {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }
  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
};

struct SessionState {
  Status status = Status::idle;
  std::int64_t step = -1;  // -1: nothing emitted yet
  std::optional<std::uint64_t> total_steps;
  std::uint64_t rows_emitted = 0;
  double started_at_ms = 0.0;
  std::optional<double> last_emit_at_ms;
  RunningStats emit_intervals;
  ControlMode mode = ControlMode::monitoring;
  std::uint64_t iterations = 0;
  std::optional<std::string> warning;
};

// ---- outbound events ------------------------------------------------------------

struct ChangesetEvent {
  Changeset changeset;
  ChangeReport report;
  QualitySample quality;
  std::vector<std::uint64_t> batches;  // generator batches committed in this emission
};

struct StatusEvent {
  Status status = Status::idle;
  bool alive = true;
  std::optional<std::string> warning;
};

struct AckEvent {
  std::uint64_t batch = 0;
};

using Event = std::variant<ChangesetEvent, StatusEvent, AckEvent>;

struct SessionOptions {
  std::size_t history_capacity = ChangesetStore::kDefaultCapacity;
  // Gap, in multiples of the expected interval, after which a running session
  // is reported as not alive.
  double aliveness_factor = 5.0;
};

// ---- the session ------------------------------------------------------------------

// One progression. Deterministic and clock-agnostic: every call carries the
// current time (ms since the session epoch) and results land in an outbox that
// the driver drains. Not thread-safe; drivers serialize calls.
class Session {
 public:
  struct GeneratorInput {};

  // Engine-chunked session over a complete dataset.
  Session(ProvegaSpec spec, Dataset data, SessionOptions options = {})
      : spec_(std::move(spec)), options_(options), data_(std::move(data)),
        store_(spec_.progression.monitoring.change, encodings_of(spec_.base_view), options.history_capacity),
        quality_(spec_.progression.monitoring.quality) {
    if (!spec_.progression.chunking.reading) throw ValidationError("provega.progression.chunking.reading", "required for complete input");
    if (data_->rows.empty()) throw EmptyDatasetError("dataset has no rows");
    auto& reading = *spec_.progression.chunking.reading;
    if (reading.chunk_size_auto) {
      reading.chunk_size = auto_chunk_size(data_->rows.size());
      reading.chunk_size_auto = false;
    }
    plan_ = plan_chunks(data_->rows.size(), reading);
    header_ = data_->header;
    quality_.check_bindings(header_);
    init_common();
    if (processor_ && kind() == ChunkingType::process) processor_->ingest(data_->rows);
  }

  // Generator-driven session: batches arrive through push_batch.
  Session(ProvegaSpec spec, GeneratorInput, SessionOptions options = {})
      : spec_(std::move(spec)), options_(options),
        store_(spec_.progression.monitoring.change, encodings_of(spec_.base_view), options.history_capacity),
        quality_(spec_.progression.monitoring.quality) {
    spec_.progression.chunking.reading.reset();
    init_common();
  }

  Session(Session&&) = default;
  Session& operator=(Session&&) = default;

  // ---- lifecycle --------------------------------------------------------------

  void start(double now) {
    if (state_.status != Status::idle) throw IllegalTransitionError("session already started");
    now_ = now;
    state_.started_at_ms = now;
    last_activity_ = now;
    if (state_.mode == ControlMode::monitoring) {
      state_.status = Status::running;
      arm(now);
    } else {
      state_.status = Status::paused;
    }
    emit_status();
  }

  // Performs whatever is due at `now`: a timer tick, committing buffered
  // generator batches, flushing a coalesced emission.
  void advance(double now) {
    now_ = std::max(now_, now);
    if (state_.status == Status::running) {
      if (generator_driven()) {
        while (state_.status == Status::running && !buffer_.empty()) {
          forward_step();
          try_flush(false);
        }
        check_generator_done();
      } else if (deadline_ && now_ >= *deadline_) {
        double tick_at = *deadline_;
        forward_step();
        if (state_.status == Status::running) {
          double next = tick_at + frequency();
          deadline_ = next <= now_ ? now_ + frequency() : next;
        }
      }
    }
    try_flush(false);
    announce_terminal();
  }

  // Earliest time at which advance() has something to do.
  std::optional<double> next_wakeup() const {
    std::optional<double> t;
    auto consider = [&](double v) { t = t ? std::min(*t, v) : v; };
    if (state_.status == Status::running) {
      if (generator_driven()) {
        if (!buffer_.empty()) consider(now_);
      } else if (deadline_) {
        consider(*deadline_);
      }
    }
    if (!pending_.merger.empty()) consider(flush_due_at());
    if (terminal() && !announced_terminal_ && pending_.merger.empty()) consider(now_);
    return t;
  }

  void control(Action action, double now) {
    now_ = std::max(now_, now);
    const auto& ctl = spec_.progression.control;
    switch (action) {
      case Action::play:
        if (state_.status == Status::idle) {
          start(now_);
          if (state_.status == Status::paused) {
            state_.status = Status::running;
            arm(now_);
            emit_status();
          }
          return;
        }
        if (state_.status != Status::paused) illegal(action);
        state_.status = Status::running;
        arm(now_);
        emit_status();
        advance(now_);
        return;
      case Action::pause:
        if (!ctl.pause_enabled) throw IllegalTransitionError("pause is disabled");
        if (state_.status != Status::running) illegal(action);
        state_.status = Status::paused;
        deadline_.reset();
        emit_status();
        return;
      case Action::stop:
        if (!ctl.stop_enabled) throw IllegalTransitionError("stop is disabled");
        if (state_.status != Status::running && state_.status != Status::paused) illegal(action);
        try_flush(true);
        state_.status = Status::stopped;
        deadline_.reset();
        announce_terminal();
        return;
      case Action::step_forward:
        if (!ctl.step_enabled) throw IllegalTransitionError("stepping is disabled");
        if (!(state_.status == Status::paused || (terminal() && state_.mode == ControlMode::exploration))) illegal(action);
        if (!can_advance()) throw IllegalTransitionError("step_forward: nothing left to step");
        try_flush(true);
        forward_step();
        try_flush(true);
        if (generator_driven()) check_generator_done();
        announce_terminal();
        return;
      case Action::step_backward:
        if (!ctl.step_enabled) throw IllegalTransitionError("stepping is disabled");
        if (!(state_.status == Status::paused || (terminal() && state_.mode == ControlMode::exploration))) illegal(action);
        if (state_.step < 0) throw IllegalTransitionError("step_backward at the empty start");
        try_flush(true);
        backward_step();
        return;
    }
  }

  // Re-parameterization; takes effect from the next tick. chunk_size only
  // re-partitions ids that have not been emitted.
  void set_parameter(std::string_view key, std::optional<std::uint64_t> value, double now) {
    now_ = std::max(now_, now);
    if (state_.status == Status::stopped) throw IllegalTransitionError("session is stopped");
    const std::string base = "provega.progression.";
    if (key == "min_rendering_frequency") {
      if (value && *value < 1) throw ValidationError(base + "control.min_rendering_frequency", "must be >= 1");
      spec_.progression.control.min_rendering_frequency_ms = value;
      return;
    }
    if (key != "frequency" && key != "chunk_size")
      throw ValidationError(std::string(key), "unknown parameter (frequency, chunk_size, min_rendering_frequency)");
    const std::string path = base + "chunking.reading." + std::string(key);
    if (!value) throw ValidationError(path, "value required");
    if (*value < 1) throw ValidationError(path, "must be >= 1");
    if (!spec_.progression.chunking.reading) throw ValidationError(path, "not available: the generator owns chunking");
    auto& reading = *spec_.progression.chunking.reading;
    if (key == "frequency") {
      reading.frequency_ms = *value;
      if (state_.status == Status::running) arm(now_);
    } else {
      reading.chunk_size = *value;
      replan_remaining(plan_, cursor_, *value);
      if (kind() != ChunkingType::process) state_.total_steps = plan_.chunks.size();
    }
  }

  // ---- generator input ----------------------------------------------------------

  void push_batch(BatchEvent batch, double now) {
    now_ = std::max(now_, now);
    if (terminal() || end_received_) return;
    if (header_.empty()) {
      for (const auto& row : batch.rows)
        for (const auto& [name, _] : row.columns)
          if (std::find(header_.begin(), header_.end(), name) == header_.end()) header_.push_back(name);
      try {
        quality_.check_bindings(header_);
      } catch (const BindingError& e) {
        fail(e.what());
        return;
      }
    }
    buffered_rows_ += batch.rows.size();
    buffer_.push_back(std::move(batch));
  }

  void push_end(double now) {
    now_ = std::max(now_, now);
    end_received_ = true;
    check_generator_done();
  }

  void push_disconnect(const std::string& reason, double now) {
    now_ = std::max(now_, now);
    if (terminal()) return;
    end_received_ = true;
    state_.warning = "generator disconnected: " + reason;
    check_generator_done();
  }

  // ---- observation --------------------------------------------------------------

  std::vector<Event> take_events() { return std::exchange(outbox_, {}); }

  const SessionState& state() const { return state_; }
  const ProvegaSpec& spec() const { return spec_; }
  const ChangesetStore& store() const { return store_; }
  const ChunkPlan& plan() const { return plan_; }
  const QualityMonitor& quality() const { return quality_; }
  const Processor* processor() const { return processor_.get(); }
  const std::vector<std::string>& header() const { return header_; }
  std::optional<std::uint64_t> total_rows() const {
    if (data_) return data_->rows.size();
    return std::nullopt;
  }
  bool generator_driven() const { return !data_.has_value(); }
  std::size_t buffered_batches() const { return buffer_.size(); }
  std::size_t buffered_rows() const { return buffered_rows_; }
  double now() const { return now_; }
  ChunkingType kind() const { return spec_.progression.chunking.type; }
  bool terminal() const { return state_.status == Status::done || state_.status == Status::stopped; }

  // Expected gap between emissions, used for aliveness.
  double expected_interval() const {
    if (const auto& m = spec_.progression.control.min_rendering_frequency_ms) return static_cast<double>(*m);
    if (spec_.progression.chunking.reading) return frequency();
    return 1000.0;
  }

  bool alive(double now) const {
    if (state_.status != Status::running) return state_.status == Status::paused;
    return now - last_activity_ <= options_.aliveness_factor * expected_interval();
  }

  // Quality sample of the latest emission (for catch-up messages).
  const QualitySample& last_quality() const { return last_quality_; }

  // Queues a status event when aliveness changed since the last report.
  bool poll_aliveness(double now) {
    bool a = alive(now);
    if (a == last_alive_) return false;
    emit_status(now);
    return true;
  }

  // Synthetic catch-up: the current dataset as inserts at the current step.
  Changeset catch_up() const {
    Changeset cs;
    cs.step = state_.step;
    cs.inserts = store_.snapshot();
    cs.emitted_at_ms = now_;
    return cs;
  }

 private:
  struct Memo {
    std::size_t cursor = 0;
    std::unique_ptr<Processor> processor;
    std::uint64_t rows_emitted = 0;
    std::uint64_t iterations = 0;
    std::uint64_t iterations_after_data = 0;
    bool converged = false;
    std::optional<BatchEvent> batch;
    RowId next_replacement_id = kReplacementIdBase;
    std::vector<std::pair<RowId, std::optional<RowId>>> live_before;
  };

  struct Pending {
    ChangesetMerger merger;
    std::optional<ChangeReport> single_report;
    QualitySample quality;
    std::vector<std::uint64_t> batches;
  };

  void init_common() {
    state_.mode = spec_.progression.control.mode;
    const auto& chunking = spec_.progression.chunking;
    if (chunking.type != ChunkingType::data && !chunking.processor)
      throw MissingProcessorError("provega.progression.chunking.processor", "required");
    if (chunking.processor) {
      ProcessorContext ctx;
      ctx.mode = chunking.type;
      if (data_) ctx.full_data = data_->rows;
      processor_ = make_processor(*chunking.processor, ctx);
      quality_ = QualityMonitor(spec_.progression.monitoring.quality, processor_->descriptor().shift_metric);
    }
    if (!generator_driven()) {
      if (chunking.type == ChunkingType::process) {
        if (processor_ && processor_->max_iterations()) state_.total_steps = *processor_->max_iterations();
      } else if (chunking.type == ChunkingType::data) {
        state_.total_steps = plan_.chunks.size();
      }
    }
  }

  double frequency() const { return static_cast<double>(spec_.progression.chunking.reading->frequency_ms); }

  void arm(double now) {
    if (!generator_driven()) deadline_ = now + frequency();
  }

  [[noreturn]] void illegal(Action a) const {
    throw IllegalTransitionError(std::string(to_string(a)) + " not allowed while " + std::string(to_string(state_.status)));
  }

  std::uint64_t max_iterations() const {
    if (processor_ && processor_->max_iterations()) return *processor_->max_iterations();
    return 1;
  }

  bool data_exhausted() const { return cursor_ >= plan_.chunks.size(); }

  bool can_advance() const {
    if (generator_driven()) return !buffer_.empty();
    switch (kind()) {
      case ChunkingType::data: return !data_exhausted();
      case ChunkingType::process: return !finished_processing();
      case ChunkingType::mixed: return !data_exhausted() || !finished_processing();
    }
    return false;
  }

  bool finished_processing() const {
    if (!processor_) return true;
    if (kind() == ChunkingType::process) return state_.step >= 0 && (converged_ || iterations_ >= max_iterations());
    return data_exhausted() && (converged_ || iterations_after_data_ >= max_iterations());
  }

  bool reached_end() const { return !generator_driven() && !can_advance(); }

  void forward_step() {
    Memo memo;
    memo.cursor = cursor_;
    memo.processor = processor_ ? processor_->clone() : nullptr;
    memo.rows_emitted = state_.rows_emitted;
    memo.iterations = iterations_;
    memo.iterations_after_data = iterations_after_data_;
    memo.converged = converged_;
    memo.next_replacement_id = next_replacement_id_;

    std::vector<Changeset> parts;
    Metrics metrics;
    std::uint64_t ingested = 0;
    std::vector<std::uint64_t> batches;
    try {
      Changeset data_part;
      if (generator_driven()) {
        BatchEvent batch = std::move(buffer_.front());
        buffer_.pop_front();
        buffered_rows_ -= batch.rows.size();
        data_part.inserts = batch.rows;
        if (processor_) processor_->ingest(batch.rows);
        ingested = batch.rows.size();
        batches.push_back(batch.batch);
        memo.batch = std::move(batch);
      } else if (kind() == ChunkingType::process) {
        if (state_.step < 0) {
          data_part.inserts = data_->rows;
          ingested = data_->rows.size();
        }
      } else if (!data_exhausted()) {
        const auto& ids = plan_.chunks[cursor_];
        data_part.inserts.reserve(ids.size());
        for (auto id : ids) data_part.inserts.push_back(data_->rows[id]);
        if (processor_) processor_->ingest(data_part.inserts);
        ingested = ids.size();
        ++cursor_;
      } else {
        ++iterations_after_data_;
      }
      parts.push_back(std::move(data_part));

      if (processor_) {
        IterationResult it = processor_->iterate();
        ++iterations_;
        converged_ = it.converged;
        Changeset proc_part;
        proc_part.inserts = std::move(it.inserts);
        proc_part.updates = std::move(it.updates);
        proc_part.removes = std::move(it.removes);
        parts.push_back(std::move(proc_part));
        metrics = std::move(it.metrics);
      }
    } catch (const Error& e) {
      restore(memo);
      if (memo.batch) push_front_batch(std::move(*memo.batch));
      fail(std::string("processor failed: ") + e.what());
      return;
    }

    Changeset step = coalesce(parts);
    if (!spec_.visualization.visual_stability) rekey(step, memo);
    step.step = store_.step() + 1;
    step.emitted_at_ms = now_;

    ChangesetStore::Applied applied;
    std::map<RowId, Row> const* before = &store_.rows();
    pending_.merger.add(step, before);
    try {
      applied = store_.apply(std::move(step));
    } catch (const ConflictError& e) {
      restore(memo);
      fail(std::string("changeset rejected: ") + e.what());
      return;
    }
    pending_.single_report = pending_.merger.merged_count() == 1 ? std::optional(applied.report) : std::nullopt;
    pending_.batches.insert(pending_.batches.end(), batches.begin(), batches.end());

    state_.rows_emitted += ingested;
    state_.step = store_.step();
    state_.iterations = iterations_;
    memos_.push_back(std::move(memo));
    if (memos_.size() > store_.capacity()) memos_.pop_front();

    bool done = reached_end();
    if (done && (state_.status == Status::running || state_.status == Status::paused)) {
      state_.status = Status::done;
      deadline_.reset();
    }
    pending_.quality = quality_.sample(progress_state(done), applied.changeset, metrics);
  }

  void backward_step() {
    auto applied = store_.invert_last();
    Memo memo = std::move(memos_.back());
    memos_.pop_back();
    std::optional<BatchEvent> batch = std::move(memo.batch);
    restore(memo);
    if (batch) push_front_batch(std::move(*batch));
    state_.step = store_.step();
    applied.changeset.emitted_at_ms = now_;
    ChangesetEvent ev;
    ev.quality = quality_.correction(progress_state(false));
    last_quality_ = ev.quality;
    ev.changeset = std::move(applied.changeset);
    ev.report = std::move(applied.report);
    record_emission();
    outbox_.emplace_back(std::move(ev));
  }

  void restore(Memo& memo) {
    cursor_ = memo.cursor;
    if (memo.processor) processor_ = std::move(memo.processor);
    state_.rows_emitted = memo.rows_emitted;
    iterations_ = memo.iterations;
    state_.iterations = iterations_;
    iterations_after_data_ = memo.iterations_after_data;
    converged_ = memo.converged;
    next_replacement_id_ = memo.next_replacement_id;
    for (auto it = memo.live_before.rbegin(); it != memo.live_before.rend(); ++it) {
      if (it->second) {
        live_[it->first] = *it->second;
      } else {
        live_.erase(it->first);
      }
    }
  }

  void push_front_batch(BatchEvent batch) {
    buffered_rows_ += batch.rows.size();
    buffer_.push_front(std::move(batch));
  }

  // Visual stability off: a changed row is replaced (remove + insert under a
  // fresh id) instead of updated in place.
  void rekey(Changeset& cs, Memo& memo) {
    auto live_id = [&](RowId entity) {
      auto it = live_.find(entity);
      return it == live_.end() ? entity : it->second;
    };
    for (auto& id : cs.removes) id = live_id(id);
    std::vector<Row> kept;
    for (auto& row : cs.updates) {
      RowId current = live_id(row.id);
      if (!store_.rows().contains(current)) {
        row.id = current;
        kept.push_back(std::move(row));
        continue;
      }
      auto prev = live_.find(row.id);
      memo.live_before.emplace_back(row.id, prev == live_.end() ? std::nullopt : std::optional(prev->second));
      RowId fresh = next_replacement_id_++;
      live_[row.id] = fresh;
      cs.removes.push_back(current);
      row.id = fresh;
      cs.inserts.push_back(std::move(row));
    }
    cs.updates = std::move(kept);
  }

  ProgressState progress_state(bool done) const {
    ProgressState s;
    s.step = state_.step;
    s.t_ms = now_;
    s.elapsed_ms = now_ - state_.started_at_ms;
    s.kind = kind();
    s.rows_emitted = state_.rows_emitted;
    s.total_rows = total_rows();
    if (kind() == ChunkingType::process && processor_) s.total_steps = processor_->max_iterations();
    s.done = done;
    return s;
  }

  double flush_due_at() const {
    const auto& m = spec_.progression.control.min_rendering_frequency_ms;
    if (!m) return now_;
    return std::max(now_, last_emit_or_start() + static_cast<double>(*m));
  }

  void try_flush(bool force) {
    if (pending_.merger.empty()) return;
    if (!force) {
      const auto& m = spec_.progression.control.min_rendering_frequency_ms;
      if (m && now_ < last_emit_or_start() + static_cast<double>(*m)) return;
    }
    ChangesetEvent ev;
    ev.changeset = pending_.merger.result();
    ev.changeset.direction = Direction::forward;
    ev.changeset.emitted_at_ms = now_;
    ev.report = pending_.single_report ? *pending_.single_report
                                       : merged_report(ev.changeset, pending_.merger.priors(),
                                                       spec_.progression.monitoring.change, store_.encodings());
    ev.quality = pending_.quality;
    last_quality_ = ev.quality;
    ev.batches = pending_.batches;
    std::vector<std::uint64_t> acks = std::move(pending_.batches);
    pending_ = Pending{};
    record_emission();
    outbox_.emplace_back(std::move(ev));
    for (auto b : acks) outbox_.emplace_back(AckEvent{b});
  }

  // The rendering interval also separates the session start from the first emission.
  double last_emit_or_start() const { return state_.last_emit_at_ms.value_or(state_.started_at_ms); }

  void record_emission() {
    if (state_.last_emit_at_ms) state_.emit_intervals.add(now_ - *state_.last_emit_at_ms);
    state_.last_emit_at_ms = now_;
    last_activity_ = now_;
  }

  void check_generator_done() {
    if (!generator_driven() || !end_received_ || !buffer_.empty()) return;
    if (state_.status == Status::running || state_.status == Status::paused) {
      state_.status = Status::done;
      // The last sample already went out; make the terminal sample explicit.
      if (!pending_.merger.empty()) pending_.quality.etc_ms = 0.0;
    }
    announce_terminal();
  }

  void fail(const std::string& message) {
    state_.warning = message;
    if (state_.status != Status::done) state_.status = Status::stopped;
    deadline_.reset();
    try_flush(true);
    announce_terminal();
  }

  void announce_terminal() {
    if (!terminal() || announced_terminal_ || !pending_.merger.empty()) return;
    announced_terminal_ = true;
    emit_status();
  }

  void emit_status() { emit_status(now_); }

  void emit_status(double now) {
    last_alive_ = alive(now);
    outbox_.emplace_back(StatusEvent{state_.status, last_alive_, state_.warning});
  }

  ProvegaSpec spec_;
  SessionOptions options_;
  std::optional<Dataset> data_;
  std::vector<std::string> header_;
  ChunkPlan plan_;
  std::size_t cursor_ = 0;
  ChangesetStore store_;
  std::unique_ptr<Processor> processor_;
  QualityMonitor quality_;
  SessionState state_;
  std::deque<Memo> memos_;
  Pending pending_;
  std::vector<Event> outbox_;
  std::optional<double> deadline_;
  double now_ = 0.0;
  double last_activity_ = 0.0;
  std::uint64_t iterations_ = 0;
  std::uint64_t iterations_after_data_ = 0;
  bool converged_ = false;
  bool announced_terminal_ = false;
  bool last_alive_ = true;
  QualitySample last_quality_;
  std::deque<BatchEvent> buffer_;
  std::size_t buffered_rows_ = 0;
  bool end_received_ = false;
  std::unordered_map<RowId, RowId> live_;
  RowId next_replacement_id_ = kReplacementIdBase;
};

}  // namespace provega
