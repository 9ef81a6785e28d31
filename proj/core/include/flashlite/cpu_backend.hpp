#pragma once

#include <atomic>
#include <deque>
#include <memory>
#include <thread>

#include "flashlite/backend.hpp"
#include "flashlite/plugin.hpp"

namespace flashlite {

/// Thread-pool device runtime. Kernels come from shared-library plugins or
/// the in-process registry; work items are pulled from the action's index
/// table through an atomic or non-atomic cursor, phase by phase.
class CpuBackend : public Backend {
 public:
  CpuBackend();
  ~CpuBackend() override;

  const std::string& id() const override { return id_; }
  BackendCaps capabilities() const override { return BackendCaps{SIZE_MAX, true}; }

  void register_kernel(const std::string& label, const std::string& locator) override;
  StatusHandle execute(Action a) override;
  Status wait(const StatusHandle& h) override;

  /// Actions fully executed so far (test instrumentation).
  uint64_t executed_actions() const { return executed_.load(); }

  static std::shared_ptr<CpuBackend> shared();

 private:
  struct ActionRun;

  void worker_loop();
  void ensure_workers_locked(size_t want);
  void run_rows(const std::shared_ptr<ActionRun>& run);
  void finish_run_locked(ActionRun& run);

  std::string id_ = "ALL_CPU";

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::shared_ptr<ActionRun>> runs_;
  std::vector<std::thread> workers_;
  bool stopping_ = false;

  std::mutex kernels_mu_;
  std::map<std::string, std::pair<std::string, ResolvedKernel>> kernels_;  // label -> locator, fn

  std::atomic<uint64_t> executed_{0};
};

}  // namespace flashlite
