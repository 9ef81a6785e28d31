#pragma once

#include <cstdint>
#include <cstring>

// Kernel-side interface. Kernels are ordinary functions invoked once per
// work item through a fixed-width trampoline:
//
//   - every parameter is one machine word (uint64_t);
//   - pointer arguments pass through unchanged;
//   - by-value scalars arrive bit-copied into the word's low bytes (decode
//     floats with word_to_f32 / word_to_f64);
//   - at most ten declared arguments;
//   - cooperative kernels (sort_by / group_by / part_by) receive one extra
//     trailing argument: a size_t** two-level table ind[dim][slot] holding
//     the global indices of every slot in the launch slice.

namespace flashlite {

using KernelWord = uint64_t;
inline constexpr size_t kMaxKernelArgs = 10;

/// Global (subspace-corrected) coordinate of the current work item in the
/// given 1-based dimension. Valid only inside a kernel invocation.
int64_t get_index(int dim);

/// Row position of the current work item within the executing action's
/// table slice — the CPU stand-in for a device-native thread index, used to
/// address sub-buffers and the cooperative index table.
size_t get_slot();

/// Number of dimensions of the current launch.
size_t get_dims();

inline float word_to_f32(KernelWord w) {
  float v;
  std::memcpy(&v, &w, sizeof(v));
  return v;
}

inline double word_to_f64(KernelWord w) {
  double v;
  std::memcpy(&v, &w, sizeof(v));
  return v;
}

inline KernelWord f32_to_word(float v) {
  KernelWord w = 0;
  std::memcpy(&w, &v, sizeof(v));
  return w;
}

inline KernelWord f64_to_word(double v) {
  KernelWord w = 0;
  std::memcpy(&w, &v, sizeof(v));
  return w;
}

namespace detail {

struct WorkerContext {
  const int64_t* row = nullptr;  // global coordinates of the current item
  size_t dims = 0;
  size_t slot = 0;
};

/// Thread-local context slot populated by device runtimes around each
/// kernel invocation.
WorkerContext*& current_context();

class ScopedWorkerContext {
 public:
  explicit ScopedWorkerContext(WorkerContext* ctx) : prev_(current_context()) {
    current_context() = ctx;
  }
  ~ScopedWorkerContext() { current_context() = prev_; }

 private:
  WorkerContext* prev_;
};

}  // namespace detail

}  // namespace flashlite
