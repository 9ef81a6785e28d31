#pragma once

#include <cstddef>
#include <cstdint>
#include <mutex>
#include <utility>
#include <vector>

namespace flashlite::testing {

/// Registers every in-process test kernel with the internal registry.
/// Idempotent; call once per test binary.
void register_test_kernels();

/// Order log appended to by the recording kernels, guarded by a lock.
struct RecordLog {
  std::mutex mu;
  std::vector<std::pair<int64_t, uint64_t>> entries;  // (value, arrival sequence)
  std::vector<int64_t> observed_globals;              // cooperative kernels' ind lookups

  void clear() {
    std::lock_guard lock(mu);
    entries.clear();
    observed_globals.clear();
  }
};

RecordLog& record_log();

/// Per-row invocation counters used by the cursor-mode tests.
std::vector<uint64_t>& row_counters();
void reset_row_counters(size_t rows);

}  // namespace flashlite::testing
