#include "test_kernels.hpp"

#include <flashlite/kernel_api.hpp>
#include <flashlite/plugin.hpp>

#include <atomic>
#include <cmath>
#include <stdexcept>

namespace flashlite::testing {

RecordLog& record_log() {
  static RecordLog log;
  return log;
}

std::vector<uint64_t>& row_counters() {
  static std::vector<uint64_t> counters;
  return counters;
}

void reset_row_counters(size_t rows) {
  row_counters().assign(rows, 0);
}

namespace {

std::atomic<uint64_t> g_arrival{0};

void blank() {}

void copy_f32(const float* src, float* dst) {
  int64_t x = get_index(1);
  dst[x] = src[x];
}

void copy_f64(const double* src, double* dst) {
  int64_t x = get_index(1);
  dst[x] = src[x];
}

void scale_f32(KernelWord factor_bits, float* data) {
  int64_t x = get_index(1);
  data[x] *= word_to_f32(static_cast<uint64_t>(factor_bits));
}

void elmatmult_generic(float* a, float* b, float* c) {
  int64_t x = get_index(1);
  c[x] = a[x] * b[x];
}

// Table-2 style cooperating multiply: local slots address the (sub)buffers,
// the trailing index table supplies the global coordinate.
void elmatmult_partby(float* a, float* b, float* c, size_t** ind) {
  size_t slot = get_slot();
  size_t x = ind[0][slot];
  c[slot] = a[slot] * b[slot] + static_cast<float>(x);
  RecordLog& log = record_log();
  std::lock_guard lock(log.mu);
  log.observed_globals.push_back(static_cast<int64_t>(x));
}

void record_z_order(float*) {
  RecordLog& log = record_log();
  int64_t z = get_index(3);
  uint64_t seq = g_arrival.fetch_add(1);
  std::lock_guard lock(log.mu);
  log.entries.emplace_back(z, seq);
}

void record_dim1(float*) {
  RecordLog& log = record_log();
  int64_t x = get_index(1);
  uint64_t seq = g_arrival.fetch_add(1);
  std::lock_guard lock(log.mu);
  log.entries.emplace_back(x, seq);
}

void count_rows(uint64_t stride_y, uint64_t stride_z) {
  auto& counters = row_counters();
  size_t dims = get_dims();
  uint64_t linear = static_cast<uint64_t>(get_index(1));
  if (dims > 1) linear = linear * stride_y + static_cast<uint64_t>(get_index(2));
  if (dims > 2) linear = linear * stride_z + static_cast<uint64_t>(get_index(3));
  std::atomic_ref<uint64_t>(counters.at(linear)).fetch_add(1);
}

// Idempotent: repeated invocations of the same row write the same bytes.
void square_f32(const float* a, float* c) {
  int64_t x = get_index(1);
  c[x] = a[x] * a[x];
}

void sum10(float* a1, float* a2, float* a3, float* a4, float* a5, float* a6, float* a7, float* a8,
           float* a9, float* out) {
  int64_t x = get_index(1);
  out[x] = a1[x] + 2 * a2[x] + 3 * a3[x] + 4 * a4[x] + 5 * a5[x] + 6 * a6[x] + 7 * a7[x] +
           8 * a8[x] + 9 * a9[x];
}

void panic_kernel(float*) { throw std::runtime_error("deliberate failure"); }

void stamp_v1(float* out) { out[get_index(1)] = 1.0f; }
void stamp_v2(float* out) { out[get_index(1)] = 2.0f; }

}  // namespace

void register_test_kernels() {
  static bool done = [] {
    register_internal_kernel("blank", blank);
    register_internal_kernel("copy_f32", copy_f32);
    register_internal_kernel("copy_f64", copy_f64);
    register_internal_kernel("scale_f32", scale_f32);
    register_internal_kernel("elmatmult_generic", elmatmult_generic);
    register_internal_kernel("elmatmult_partby", elmatmult_partby);
    register_internal_kernel("record_z_order", record_z_order);
    register_internal_kernel("record_dim1", record_dim1);
    register_internal_kernel("count_rows", count_rows);
    register_internal_kernel("square_f32", square_f32);
    register_internal_kernel("sum10", sum10);
    register_internal_kernel("panic_kernel", panic_kernel);
    register_internal_kernel("stamp_v1", stamp_v1);
    register_internal_kernel("stamp_v2", stamp_v2);
    return true;
  }();
  (void)done;
}

}  // namespace flashlite::testing
