#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

namespace sense {

// One worker thread running callbacks at steady-clock deadlines, in deadline
// order. Pending callbacks are dropped on destruction.
class TimerQueue {
 public:
  using Clock = std::chrono::steady_clock;

  TimerQueue();
  ~TimerQueue();
  TimerQueue(const TimerQueue&) = delete;
  TimerQueue& operator=(const TimerQueue&) = delete;

  void at(Clock::time_point when, std::function<void()> fn);
  void after(std::chrono::duration<double, std::milli> delay, std::function<void()> fn) {
    at(Clock::now() + std::chrono::duration_cast<Clock::duration>(delay), std::move(fn));
  }
  // Re-arms itself every `period` until shutdown.
  void every(std::chrono::milliseconds period, std::function<void()> fn);

  void stop();

 private:
  void run();
  void repeat(std::chrono::milliseconds period, std::shared_ptr<std::function<void()>> fn);

  std::mutex mu_;
  std::condition_variable cv_;
  std::multimap<Clock::time_point, std::function<void()>> tasks_;
  bool stopping_ = false;
  std::thread worker_;
};

}  // namespace sense
