#include "bulktx/lanes.h"

#include "bulktx/errors.h"
#include "bulktx/storage.h"

namespace bulktx {
namespace {

thread_local std::size_t t_lane = 0;

inline void cpu_relax() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_ia32_pause();
#endif
}

}  // namespace

LanePool::LanePool(std::size_t lanes) : lanes_(lanes == 0 ? 1 : lanes) {
  workers_.reserve(lanes_ - 1);
  for (std::size_t lane = 1; lane < lanes_; ++lane) workers_.push_back(std::make_unique<Worker>());
  for (std::size_t lane = 1; lane < lanes_; ++lane) {
    workers_[lane - 1]->thread = std::thread([this, lane] { worker_loop(lane); });
  }
}

LanePool::~LanePool() {
  stop_.store(true, std::memory_order_release);
  for (auto& w : workers_) w->start.release();
  for (auto& w : workers_) w->thread.join();
}

std::size_t LanePool::current_lane() { return t_lane; }

void LanePool::worker_loop(std::size_t lane) {
  t_lane = lane;
  while (true) {
    workers_[lane - 1]->start.acquire();
    if (stop_.load(std::memory_order_acquire)) return;
    std::exception_ptr err;
    try {
      (*job_)(lane);
    } catch (...) {
      err = std::current_exception();
    }
    finish_lane(err);
  }
}

void LanePool::finish_lane(std::exception_ptr err) {
  if (err) {
    std::lock_guard lock(err_mu_);
    if (!first_error_) first_error_ = err;
  }
  if (pending_.fetch_sub(1, std::memory_order_acq_rel) == 1) pending_.notify_all();
}

void LanePool::run(std::size_t active, const std::function<void(std::size_t)>& fn) {
  if (active == 0) return;
  if (active > lanes_) active = lanes_;
  first_error_ = nullptr;
  if (active == 1) {
    fn(0);
    return;
  }
  job_ = &fn;
  pending_.store(active, std::memory_order_release);
  for (std::size_t lane = 1; lane < active; ++lane) workers_[lane - 1]->start.release();
  std::exception_ptr err;
  try {
    fn(0);
  } catch (...) {
    err = std::current_exception();
  }
  finish_lane(err);
  for (std::size_t v = pending_.load(std::memory_order_acquire); v != 0; v = pending_.load(std::memory_order_acquire)) {
    pending_.wait(v, std::memory_order_acquire);
  }
  job_ = nullptr;
  if (first_error_) std::rethrow_exception(first_error_);
}

// ---------------------------------------------------------------- Watchdog

Watchdog::Watchdog() : thread_([this] { loop(); }) {}

Watchdog::~Watchdog() {
  {
    std::lock_guard lock(mu_);
    quit_ = true;
  }
  cv_.notify_all();
  thread_.join();
}

void Watchdog::arm(std::chrono::milliseconds budget, std::function<void()> on_fire) {
  {
    std::lock_guard lock(mu_);
    armed_ = true;
    fired_ = false;
    ++generation_;
    deadline_ = std::chrono::steady_clock::now() + budget;
    on_fire_ = std::move(on_fire);
  }
  cv_.notify_all();
}

bool Watchdog::disarm() {
  std::lock_guard lock(mu_);
  armed_ = false;
  ++generation_;
  on_fire_ = nullptr;
  return fired_;
}

void Watchdog::loop() {
  std::unique_lock lock(mu_);
  while (!quit_) {
    if (!armed_) {
      cv_.wait(lock);
      continue;
    }
    const auto gen = generation_;
    if (cv_.wait_until(lock, deadline_, [&] { return quit_ || generation_ != gen; })) continue;
    fired_ = true;
    armed_ = false;
    if (on_fire_) on_fire_();
  }
}

// ------------------------------------------------------------------ waits

void wait_for_value(std::atomic<std::uint32_t>& counter, std::uint32_t key) {
  for (int i = 0; i < 64; ++i) {
    const std::uint32_t v = counter.load(std::memory_order_acquire);
    if (v == key) return;
    if (v & LockTable::kPoison) throw WatchdogTimeout("lock wait abandoned by watchdog");
    cpu_relax();
  }
  for (int i = 0; i < 4; ++i) {
    const std::uint32_t v = counter.load(std::memory_order_acquire);
    if (v == key) return;
    if (v & LockTable::kPoison) throw WatchdogTimeout("lock wait abandoned by watchdog");
    std::this_thread::yield();
  }
  while (true) {
    const std::uint32_t v = counter.load(std::memory_order_acquire);
    if (v == key) return;
    if (v & LockTable::kPoison) throw WatchdogTimeout("lock wait abandoned by watchdog");
    counter.wait(v, std::memory_order_acquire);
  }
}

}  // namespace bulktx
