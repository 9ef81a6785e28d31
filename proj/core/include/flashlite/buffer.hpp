#pragma once

#include <cstddef>
#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "flashlite/errors.hpp"
#include "flashlite/index_space.hpp"
#include "flashlite/types.hpp"

namespace flashlite {

inline constexpr size_t kPageBytes = 4096;

/// Device-side copy of a buffer's bytes, owned by the device arena and
/// shared with the buffer's residency cache.
struct DeviceImage {
  std::vector<std::byte> bytes;
  uint64_t version = 0;          // bumped on every device-side write
  uint64_t content_version = 0;  // buffer content the image currently holds
};

/// Contiguous slice of a parent buffer. For non-coherent devices the slice
/// is a detached byte copy that merges back lazily.
struct SubBufferView {
  const void* parent = nullptr;
  Range bounds{0, 0};  // inclusive element range
  std::vector<std::byte> detached;
};

/// Owning or borrowed typed byte buffer with a device-residency cache and
/// page-granular host synchronization. Reads pull only the touched page;
/// writes force full synchronization first.
class FlashBuffer {
 public:
  enum class Ownership : uint8_t { Owning, Borrowed };

  using TransferHook = std::function<void(size_t bytes, size_t pages)>;

  static std::shared_ptr<FlashBuffer> create(ScalarType tag, size_t count);
  static std::shared_ptr<FlashBuffer> wrap_external(ScalarType tag, void* storage, size_t count);

  ScalarType element_tag() const { return tag_; }
  size_t size() const;
  size_t byte_size() const { return size() * elem_size_; }
  Ownership ownership() const { return ownership_; }

  /// Host-visible read of one element, synchronizing its page if needed.
  template <typename T>
  T at(size_t i) const {
    T out{};
    read_element(i, &out, sizeof(T));
    return out;
  }

  template <typename T>
  void set(size_t i, T v) {
    write_element(i, &v, sizeof(T));
  }

  /// Removes a contiguous element range and shrinks the buffer. Forces a
  /// full host sync first.
  void erase(size_t first, size_t count);

  /// Full host materialization: applies pending sub-buffer merges and pulls
  /// every device-dirty page.
  void sync_to_host();

  /// Host bytes for a kernel about to read. Materializes everything first.
  const void* host_data_for_read();

  /// Host bytes for a kernel about to write; invalidates device images.
  void* host_data_for_write();

  /// Bumps the content version after an in-place host-side write (used by
  /// coherent backends that wrote through host_data_for_write earlier).
  void note_host_write();

  /// Monotonic counter advanced on every logical content change (host
  /// writes, device writes, merge registration). Device images compare
  /// against it to decide whether a re-upload is needed.
  uint64_t content_version() const;

  // --- residency cache, driven by non-coherent backends ---

  std::shared_ptr<DeviceImage> residency_lookup(const std::string& backend_id) const;
  void set_residency(const std::string& backend_id, std::shared_ptr<DeviceImage> image,
                     TransferHook on_transfer);
  /// Marks the given element range as authoritative on `backend_id` after a
  /// device-side write: advances the content version and stamps the
  /// registered image with it.
  void mark_device_dirty(const std::string& backend_id, Range elem_range);
  void drop_residency(const std::string& backend_id);

  /// Queues a sub-buffer write-back; applied on the next host access.
  void register_pending_merge(SubBufferView view);

  bool has_dirty_pages() const;
  bool has_pending_merges() const;

  /// Pages pulled from device images over this buffer's lifetime.
  uint64_t pages_pulled() const { return pages_pulled_; }

  FlashBuffer(const FlashBuffer&) = delete;
  FlashBuffer& operator=(const FlashBuffer&) = delete;

 private:
  FlashBuffer(ScalarType tag, size_t count, Ownership ownership, void* external);

  void read_element(size_t i, void* out, size_t n) const;
  void write_element(size_t i, const void* in, size_t n);
  std::byte* host_ptr() const;
  void materialize_locked() const;
  void pull_page_locked(size_t page) const;
  void apply_merges_locked() const;
  void invalidate_images_locked();

  ScalarType tag_;
  size_t elem_size_;
  size_t count_;
  Ownership ownership_;
  mutable std::vector<std::byte> storage_;  // Owning only
  std::byte* external_ = nullptr;           // Borrowed only

  struct Residency {
    std::shared_ptr<DeviceImage> image;
    TransferHook on_transfer;
  };

  mutable std::mutex mu_;
  mutable std::map<std::string, Residency> residency_;
  mutable std::set<size_t> dirty_pages_;
  mutable std::string auth_backend_;
  mutable std::vector<SubBufferView> pending_merges_;
  mutable uint64_t pages_pulled_ = 0;
  uint64_t content_version_ = 1;
};

std::vector<SubBufferView> make_sub_buffers(FlashBuffer& b, const std::vector<PartitionPlan>& plans,
                                            size_t arg_index, bool detach);

void merge_sub_buffers(FlashBuffer& b, std::vector<SubBufferView> views);

/// Typed convenience wrapper applications hold by value.
template <typename T>
class flash_memory {
 public:
  explicit flash_memory(size_t count) : buf_(FlashBuffer::create(tag_of(), count)) {}
  flash_memory(T* storage, size_t count)
      : buf_(FlashBuffer::wrap_external(tag_of(), storage, count)) {}

  size_t size() const { return buf_->size(); }
  T at(size_t i) const { return buf_->template at<T>(i); }
  T operator[](size_t i) const { return buf_->template at<T>(i); }
  void set(size_t i, T v) { buf_->set(i, v); }
  void erase(size_t first, size_t count) { buf_->erase(first, count); }

  /// Synchronizes and returns the host contents as a vector copy.
  std::vector<T> data() const {
    const T* p = static_cast<const T*>(buf_->host_data_for_read());
    return std::vector<T>(p, p + buf_->size());
  }

  std::shared_ptr<FlashBuffer> handle() const { return buf_; }
  FlashBuffer& buffer() { return *buf_; }
  const FlashBuffer& buffer() const { return *buf_; }

  static constexpr ScalarType tag_of() {
    if constexpr (std::is_same_v<T, float>) return ScalarType::F32;
    else if constexpr (std::is_same_v<T, double>) return ScalarType::F64;
    else if constexpr (std::is_same_v<T, int32_t>) return ScalarType::I32;
    else if constexpr (std::is_same_v<T, int64_t>) return ScalarType::I64;
    else if constexpr (std::is_same_v<T, uint64_t>) return ScalarType::U64;
    else if constexpr (std::is_same_v<T, uint8_t>) return ScalarType::U8;
    else static_assert(sizeof(T) == 0, "unsupported flash_memory element type");
  }

 private:
  std::shared_ptr<FlashBuffer> buf_;
};

}  // namespace flashlite
