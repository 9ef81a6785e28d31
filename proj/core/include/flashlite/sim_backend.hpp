#pragma once

#include <atomic>
#include <deque>
#include <thread>

#include "flashlite/backend.hpp"
#include "flashlite/plugin.hpp"

namespace flashlite {
namespace sim {

struct TransferStats {
  uint64_t transfers = 0;
  uint64_t bytes = 0;
  uint64_t pages = 0;
  double simulated_us = 0.0;  // latency/bandwidth model
  uint64_t wall_ns = 0;       // real copy time, for overhead subtraction
};

/// A simulated accelerator with private, non-coherent memory. Host bytes
/// and device images never alias; all data crosses through explicit
/// copy_in/copy_out transfers that the stats record. Actions execute
/// in order on one device thread; distinct devices run concurrently.
class SimDevice : public Backend {
 public:
  explicit SimDevice(std::string id);
  ~SimDevice() override;

  const std::string& id() const override { return id_; }
  BackendCaps capabilities() const override { return BackendCaps{3, false}; }

  void register_kernel(const std::string& label, const std::string& locator) override;
  StatusHandle execute(Action a) override;
  Status wait(const StatusHandle& h) override;

  TransferStats stats() const;
  void reset_stats();
  uint64_t executed_actions() const { return executed_.load(); }

 private:
  struct Job;

  void device_loop();
  void run_action(Job& job);
  std::shared_ptr<DeviceImage> upload(FlashBuffer& buffer, const Options& opts);
  std::vector<std::byte> copy_in_region(const std::byte* src, size_t len, const Options& opts);
  void record_transfer(size_t len, const Options& opts);
  void check_arena(size_t extra, const Options& opts);

  std::string id_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::shared_ptr<Job>> queue_;
  std::thread worker_;
  bool stopping_ = false;

  std::mutex kernels_mu_;
  std::map<std::string, std::pair<std::string, ResolvedKernel>> kernels_;

  mutable std::mutex stats_mu_;
  TransferStats stats_;
  std::atomic<uint64_t> executed_{0};

  // Whole-buffer images by buffer identity; the private device arena.
  std::mutex arena_mu_;
  std::map<const FlashBuffer*, std::shared_ptr<DeviceImage>> arena_;
  size_t arena_used_ = 0;
};

/// Registers SIM_ACCEL:0..n-1, extending the default pair when n > 2.
void ensure_devices(size_t n);

std::shared_ptr<SimDevice> device(size_t index);

}  // namespace sim
}  // namespace flashlite
