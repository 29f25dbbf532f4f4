#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <semaphore>
#include <thread>
#include <vector>

namespace bulktx {

/// Fixed pool of worker lanes. Lane 0 is the calling thread; lanes
/// 1..M-1 are parked threads woken per bulk. run() is the bulk barrier: it
/// returns once every active lane has finished.
class LanePool {
 public:
  explicit LanePool(std::size_t lanes);
  ~LanePool();
  LanePool(const LanePool&) = delete;
  LanePool& operator=(const LanePool&) = delete;

  std::size_t size() const { return lanes_; }

  // Runs fn(lane) for lane in [0, active). Rethrows the first exception
  // after all lanes are done.
  void run(std::size_t active, const std::function<void(std::size_t)>& fn);

  // Lane index of the calling thread (0 outside a pool).
  static std::size_t current_lane();

 private:
  struct Worker {
    std::binary_semaphore start{0};
    std::thread thread;
  };
  void worker_loop(std::size_t lane);
  void finish_lane(std::exception_ptr err);

  std::size_t lanes_;
  std::vector<std::unique_ptr<Worker>> workers_;  // index lane - 1
  const std::function<void(std::size_t)>* job_ = nullptr;
  std::atomic<std::size_t> pending_{0};
  std::atomic<bool> stop_{false};
  std::mutex err_mu_;
  std::exception_ptr first_error_;
};

/// One background thread that fires a callback if a deadline passes before
/// the armed section ends.
class Watchdog {
 public:
  Watchdog();
  ~Watchdog();

  void arm(std::chrono::milliseconds budget, std::function<void()> on_fire);
  // Returns true if the callback fired during the armed section.
  bool disarm();

 private:
  void loop();

  std::mutex mu_;
  std::condition_variable cv_;
  bool armed_ = false;
  bool fired_ = false;
  bool quit_ = false;
  std::uint64_t generation_ = 0;
  std::chrono::steady_clock::time_point deadline_;
  std::function<void()> on_fire_;
  std::thread thread_;
};

// Waits until counter == key. Spins briefly, yields, then blocks on the
// atomic. Throws WatchdogTimeout when the counter carries the poison bit.
void wait_for_value(std::atomic<std::uint32_t>& counter, std::uint32_t key);

}  // namespace bulktx
