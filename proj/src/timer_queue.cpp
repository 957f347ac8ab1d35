#include "sense/timer_queue.hpp"

#include <memory>

namespace sense {

TimerQueue::TimerQueue() : worker_([this] { run(); }) {}

TimerQueue::~TimerQueue() { stop(); }

void TimerQueue::stop() {
  {
    std::lock_guard lk(mu_);
    if (stopping_ && !worker_.joinable()) return;
    stopping_ = true;
    tasks_.clear();
  }
  cv_.notify_all();
  if (worker_.joinable() && worker_.get_id() != std::this_thread::get_id()) worker_.join();
}

void TimerQueue::at(Clock::time_point when, std::function<void()> fn) {
  {
    std::lock_guard lk(mu_);
    if (stopping_) return;
    tasks_.emplace(when, std::move(fn));
  }
  cv_.notify_all();
}

void TimerQueue::every(std::chrono::milliseconds period, std::function<void()> fn) {
  repeat(period, std::make_shared<std::function<void()>>(std::move(fn)));
}

void TimerQueue::repeat(std::chrono::milliseconds period, std::shared_ptr<std::function<void()>> fn) {
  after(period, [this, period, fn] {
    (*fn)();
    repeat(period, fn);
  });
}

void TimerQueue::run() {
  std::unique_lock lk(mu_);
  while (!stopping_) {
    if (tasks_.empty()) {
      cv_.wait(lk);
      continue;
    }
    auto next = tasks_.begin()->first;
    if (Clock::now() < next) {
      cv_.wait_until(lk, next);
      continue;
    }
    auto fn = std::move(tasks_.begin()->second);
    tasks_.erase(tasks_.begin());
    lk.unlock();
    fn();
    lk.lock();
  }
}

}  // namespace sense
