#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <thread>

#include "provega/scheduler.hpp"

namespace provega {

// Runs a Session against the wall clock on its own thread. Everything that
// touches the session goes through post(), so commands, ticks and event
// delivery are totally ordered. The listener runs on the driver thread.
class LiveSession {
 public:
  using Listener = std::function<void(const Event&, const Session&)>;
  using Command = std::function<void(Session&, double now)>;

  // How often aliveness is re-evaluated while nothing else is due.
  static constexpr double kPollMs = 200.0;

  LiveSession(std::unique_ptr<Session> session, Listener listener)
      : session_(std::move(session)), listener_(std::move(listener)), epoch_(std::chrono::steady_clock::now()) {}

  LiveSession(const LiveSession&) = delete;
  LiveSession& operator=(const LiveSession&) = delete;

  ~LiveSession() { shutdown(); }

  void run() {
    thread_ = std::thread([this] { loop(); });
  }

  void post(Command command) {
    {
      std::lock_guard lock(mutex_);
      commands_.push_back(std::move(command));
    }
    cv_.notify_one();
  }

  // Runs `f` on the driver thread and waits for its result.
  template <class F>
  auto call(F f) -> decltype(f(std::declval<Session&>(), 0.0)) {
    using R = decltype(f(std::declval<Session&>(), 0.0));
    auto promise = std::make_shared<std::promise<R>>();
    auto future = promise->get_future();
    post([promise, f = std::move(f)](Session& s, double now) mutable {
      try {
        if constexpr (std::is_void_v<R>) {
          f(s, now);
          promise->set_value();
        } else {
          promise->set_value(f(s, now));
        }
      } catch (...) {
        promise->set_exception(std::current_exception());
      }
    });
    return future.get();
  }

  // Swaps in a fresh session (restart); it starts immediately.
  void replace(std::unique_ptr<Session> next) {
    auto holder = std::make_shared<std::unique_ptr<Session>>(std::move(next));
    post([this, holder](Session&, double now) {
      session_ = std::move(*holder);
      session_->start(now);
    });
  }

  void shutdown() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
    }
    cv_.notify_one();
    if (thread_.joinable()) thread_.join();
  }

  double now() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - epoch_).count();
  }

 private:
  void loop() {
    session_->start(now());
    deliver();
    for (;;) {
      std::deque<Command> batch;
      {
        std::unique_lock lock(mutex_);
        double wake = now() + kPollMs;
        if (auto t = session_->next_wakeup()) wake = std::min(wake, *t);
        auto deadline = epoch_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                     std::chrono::duration<double, std::milli>(wake));
        cv_.wait_until(lock, deadline, [&] { return stopping_ || !commands_.empty(); });
        if (stopping_) return;
        batch.swap(commands_);
      }
      for (auto& command : batch) {
        command(*session_, now());
        deliver();
      }
      double t = now();
      session_->advance(t);
      session_->poll_aliveness(t);
      deliver();
    }
  }

  void deliver() {
    for (const auto& ev : session_->take_events())
      if (listener_) listener_(ev, *session_);
  }

  std::unique_ptr<Session> session_;
  Listener listener_;
  std::chrono::steady_clock::time_point epoch_;
  std::thread thread_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Command> commands_;
  bool stopping_ = false;
};

}  // namespace provega
