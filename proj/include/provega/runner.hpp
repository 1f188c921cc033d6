#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "provega/data_source.hpp"
#include "provega/protocol.hpp"
#include "provega/scheduler.hpp"

namespace provega {

// In-process stand-in for an external generator: sends a dataset as numbered
// chunk batches, `delay_ms` apart, honoring the ACK window when asked to.
class SimulatedGenerator {
 public:
  struct Options {
    std::uint64_t chunk_size = 1;
    double delay_ms = 0.0;
    bool ack_flow_control = false;
    std::uint64_t ack_window = 1;
  };

  SimulatedGenerator(const Dataset& data, Options options) : options_(options) {
    if (options_.chunk_size == 0) options_.chunk_size = 1;
    for (std::size_t i = 0; i < data.rows.size(); i += options_.chunk_size) {
      std::vector<Columns> batch;
      for (std::size_t j = i; j < std::min(data.rows.size(), i + options_.chunk_size); ++j) batch.push_back(data.rows[j].columns);
      batches_.push_back(std::move(batch));
    }
  }

  // When the next message can go out, or nothing while blocked/finished.
  std::optional<double> next_send() const {
    if (finished_) return std::nullopt;
    if (next_ < batches_.size() && blocked()) return std::nullopt;
    return ready_at_;
  }

  Message send(double now) {
    if (next_ >= batches_.size()) {
      finished_ = true;
      return EndMsg{};
    }
    ChunkMsg m{next_, batches_[next_]};
    ++next_;
    ++in_flight_;
    max_in_flight_ = std::max(max_in_flight_, in_flight_);
    ready_at_ = now + options_.delay_ms;
    return m;
  }

  void ack(std::uint64_t batch) {
    if (batch >= next_) throw ProtocolError("ack for unsent batch " + std::to_string(batch));
    if (in_flight_ > 0) --in_flight_;
  }

  std::uint64_t in_flight() const { return in_flight_; }
  std::uint64_t max_in_flight() const { return max_in_flight_; }
  std::size_t batch_count() const { return batches_.size(); }

 private:
  bool blocked() const { return options_.ack_flow_control && in_flight_ >= options_.ack_window; }

  Options options_;
  std::vector<std::vector<Columns>> batches_;
  std::uint64_t next_ = 0;
  std::uint64_t in_flight_ = 0;
  std::uint64_t max_in_flight_ = 0;
  double ready_at_ = 0.0;
  bool finished_ = false;
};

struct RunOptions {
  std::optional<std::uint64_t> max_steps;
  bool realtime = false;
  // Virtual-time safety net against sessions that never finish.
  double horizon_ms = 24.0 * 3600.0 * 1000.0;
};

struct RunSummary {
  Status status = Status::idle;
  std::optional<std::string> warning;
  std::uint64_t emissions = 0;
  std::int64_t final_step = -1;
  std::size_t final_rows = 0;
  std::optional<double> final_absolute_progress;
  double end_ms = 0.0;
  std::uint64_t max_in_flight = 0;
  RunningStats intervals;
};

// Drives a session to completion, either in virtual time (instant, exact) or
// against the wall clock. Exploration sessions are stepped at their reading
// frequency. `sink` sees every event after the session produced it.
class Runner {
 public:
  using Sink = std::function<void(const Event&, const Session&)>;

  Runner(Session& session, RunOptions options, Sink sink = {}) : session_(session), options_(options), sink_(std::move(sink)) {}

  void attach(SimulatedGenerator& generator) { generator_ = &generator; }

  RunSummary run() {
    auto epoch = std::chrono::steady_clock::now();
    auto clock = [&](double target) {
      if (!options_.realtime) return target;
      auto deadline = epoch + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                  std::chrono::duration<double, std::milli>(target));
      std::this_thread::sleep_until(deadline);
      return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - epoch).count();
    };

    session_.start(0.0);
    drain();
    const bool exploring = session_.state().mode == ControlMode::exploration;
    double step_interval = session_.spec().progression.chunking.reading
                               ? static_cast<double>(session_.spec().progression.chunking.reading->frequency_ms)
                               : 0.0;
    double next_explore = step_interval;

    while (!session_.terminal() || session_.next_wakeup()) {
      std::optional<double> t = session_.next_wakeup();
      auto take = [&](std::optional<double> v) {
        if (v) t = t ? std::min(*t, *v) : *v;
      };
      std::optional<double> gen_t = generator_ ? generator_->next_send() : std::nullopt;
      take(gen_t);
      if (exploring && !session_.terminal()) take(next_explore);
      if (!t) break;  // nothing can make progress
      if (*t > options_.horizon_ms) {
        summary_.warning = "virtual time horizon exceeded";
        break;
      }
      double now = clock(std::max(*t, session_.now()));

      if (gen_t && *gen_t <= *t) feed(generator_->send(now), now);
      if (exploring && !session_.terminal() && next_explore <= *t) {
        try {
          session_.control(Action::step_forward, now);
        } catch (const IllegalTransitionError&) {
        }
        next_explore = now + step_interval;
      }
      session_.advance(now);
      drain();
      if (options_.max_steps && session_.state().step + 1 >= static_cast<std::int64_t>(*options_.max_steps) &&
          !session_.terminal()) {
        session_.control(Action::stop, now);
        drain();
      }
    }

    const auto& st = session_.state();
    summary_.status = st.status;
    if (st.warning) summary_.warning = st.warning;
    summary_.final_step = st.step;
    summary_.final_rows = session_.store().rows().size();
    summary_.end_ms = session_.now();
    summary_.intervals = st.emit_intervals;
    if (generator_) summary_.max_in_flight = generator_->max_in_flight();
    return summary_;
  }

 private:
  void feed(const Message& m, double now) {
    if (const auto* chunk = std::get_if<ChunkMsg>(&m)) {
      try {
        stream_.push_batch(chunk->batch, chunk->rows);
      } catch (const ProtocolError& e) {
        session_.push_disconnect(e.what(), now);
        return;
      }
      while (auto ev = stream_.try_pop())
        if (auto* b = std::get_if<BatchEvent>(&*ev)) session_.push_batch(std::move(*b), now);
    } else if (std::holds_alternative<EndMsg>(m)) {
      session_.push_end(now);
    }
  }

  void drain() {
    for (auto& ev : session_.take_events()) {
      if (const auto* cs = std::get_if<ChangesetEvent>(&ev)) {
        ++summary_.emissions;
        if (cs->quality.absolute_progress) summary_.final_absolute_progress = cs->quality.absolute_progress;
      }
      if (sink_) sink_(ev, session_);
      if (const auto* ack = std::get_if<AckEvent>(&ev); ack && generator_) generator_->ack(ack->batch);
    }
  }

  Session& session_;
  RunOptions options_;
  Sink sink_;
  SimulatedGenerator* generator_ = nullptr;
  ChunkStream stream_;
  RunSummary summary_;
};

}  // namespace provega
