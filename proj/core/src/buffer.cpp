#include "flashlite/buffer.hpp"

#include <algorithm>

namespace flashlite {

FlashBuffer::FlashBuffer(ScalarType tag, size_t count, Ownership ownership, void* external)
    : tag_(tag),
      elem_size_(scalar_size(tag)),
      count_(count),
      ownership_(ownership),
      external_(static_cast<std::byte*>(external)) {
  if (ownership_ == Ownership::Owning) {
    try {
      storage_.assign(count_ * elem_size_, std::byte{0});
    } catch (const std::bad_alloc&) {
      raise(errc::allocation_failure,
            "cannot allocate " + std::to_string(count_ * elem_size_) + " bytes");
    }
  }
}

std::shared_ptr<FlashBuffer> FlashBuffer::create(ScalarType tag, size_t count) {
  return std::shared_ptr<FlashBuffer>(new FlashBuffer(tag, count, Ownership::Owning, nullptr));
}

std::shared_ptr<FlashBuffer> FlashBuffer::wrap_external(ScalarType tag, void* storage,
                                                        size_t count) {
  if (count > 0 && storage == nullptr)
    raise(errc::allocation_failure, "external storage is null");
  return std::shared_ptr<FlashBuffer>(new FlashBuffer(tag, count, Ownership::Borrowed, storage));
}

size_t FlashBuffer::size() const {
  std::lock_guard lock(mu_);
  return count_;
}

std::byte* FlashBuffer::host_ptr() const {
  return ownership_ == Ownership::Owning ? const_cast<std::byte*>(storage_.data()) : external_;
}

uint64_t FlashBuffer::content_version() const {
  std::lock_guard lock(mu_);
  return content_version_;
}

bool FlashBuffer::has_dirty_pages() const {
  std::lock_guard lock(mu_);
  return !dirty_pages_.empty();
}

bool FlashBuffer::has_pending_merges() const {
  std::lock_guard lock(mu_);
  return !pending_merges_.empty();
}

void FlashBuffer::pull_page_locked(size_t page) const {
  auto it = residency_.find(auth_backend_);
  if (it == residency_.end() || !it->second.image) {
    dirty_pages_.erase(page);
    return;
  }
  const DeviceImage& img = *it->second.image;
  size_t begin = page * kPageBytes;
  if (begin >= img.bytes.size()) {
    dirty_pages_.erase(page);
    return;
  }
  size_t len = std::min(kPageBytes, img.bytes.size() - begin);
  len = std::min(len, count_ * elem_size_ - std::min(begin, count_ * elem_size_));
  if (len > 0) std::memcpy(host_ptr() + begin, img.bytes.data() + begin, len);
  dirty_pages_.erase(page);
  ++pages_pulled_;
  if (it->second.on_transfer) it->second.on_transfer(len, 1);
}

void FlashBuffer::apply_merges_locked() const {
  if (pending_merges_.empty()) return;
  std::vector<Range> applied;
  std::byte* base = host_ptr();
  for (const SubBufferView& v : pending_merges_) {
    auto [lo, hi] = v.bounds;
    size_t off = static_cast<size_t>(lo) * elem_size_;
    size_t len = static_cast<size_t>(hi - lo + 1) * elem_size_;
    // Overlaps with already-applied views must carry identical bytes.
    for (const Range& u : applied) {
      int64_t olo = std::max(lo, u.first), ohi = std::min(hi, u.second);
      if (olo > ohi) continue;
      size_t host_off = static_cast<size_t>(olo) * elem_size_;
      size_t view_off = static_cast<size_t>(olo - lo) * elem_size_;
      size_t olen = static_cast<size_t>(ohi - olo + 1) * elem_size_;
      if (std::memcmp(base + host_off, v.detached.data() + view_off, olen) != 0)
        raise(errc::overlap_conflict, "overlapping sub-buffer merges carry different bytes");
    }
    std::memcpy(base + off, v.detached.data(), std::min(len, v.detached.size()));
    applied.push_back(v.bounds);
  }
  pending_merges_.clear();
}

void FlashBuffer::materialize_locked() const {
  while (!dirty_pages_.empty()) pull_page_locked(*dirty_pages_.begin());
  apply_merges_locked();
}

void FlashBuffer::read_element(size_t i, void* out, size_t n) const {
  std::lock_guard lock(mu_);
  if (i >= count_) raise(errc::out_of_bounds, "index " + std::to_string(i) + " >= size " +
                                                  std::to_string(count_));
  apply_merges_locked();
  size_t byte_lo = i * elem_size_;
  size_t byte_hi = byte_lo + elem_size_ - 1;
  for (size_t p = byte_lo / kPageBytes; p <= byte_hi / kPageBytes; ++p)
    if (dirty_pages_.count(p)) pull_page_locked(p);
  std::memcpy(out, host_ptr() + byte_lo, n);
}

void FlashBuffer::write_element(size_t i, const void* in, size_t n) {
  std::lock_guard lock(mu_);
  if (i >= count_) raise(errc::out_of_bounds, "index " + std::to_string(i) + " >= size " +
                                                  std::to_string(count_));
  // Host writes take full authority: sync everything, then mutate.
  materialize_locked();
  std::memcpy(host_ptr() + i * elem_size_, in, n);
  ++content_version_;
}

void FlashBuffer::erase(size_t first, size_t count) {
  std::lock_guard lock(mu_);
  if (first + count > count_) raise(errc::out_of_bounds, "erase range exceeds buffer");
  materialize_locked();
  std::byte* base = host_ptr();
  size_t tail = (count_ - first - count) * elem_size_;
  if (tail > 0) std::memmove(base + first * elem_size_, base + (first + count) * elem_size_, tail);
  count_ -= count;
  if (ownership_ == Ownership::Owning) storage_.resize(count_ * elem_size_);
  ++content_version_;
  invalidate_images_locked();
}

void FlashBuffer::sync_to_host() {
  std::lock_guard lock(mu_);
  materialize_locked();
}

const void* FlashBuffer::host_data_for_read() {
  std::lock_guard lock(mu_);
  materialize_locked();
  return host_ptr();
}

void* FlashBuffer::host_data_for_write() {
  std::lock_guard lock(mu_);
  materialize_locked();
  return host_ptr();
}

void FlashBuffer::note_host_write() {
  std::lock_guard lock(mu_);
  ++content_version_;
}

void FlashBuffer::invalidate_images_locked() {
  dirty_pages_.clear();
  auth_backend_.clear();
}

std::shared_ptr<DeviceImage> FlashBuffer::residency_lookup(const std::string& backend_id) const {
  std::lock_guard lock(mu_);
  auto it = residency_.find(backend_id);
  return it == residency_.end() ? nullptr : it->second.image;
}

void FlashBuffer::set_residency(const std::string& backend_id, std::shared_ptr<DeviceImage> image,
                                TransferHook on_transfer) {
  std::lock_guard lock(mu_);
  residency_[backend_id] = Residency{std::move(image), std::move(on_transfer)};
}

void FlashBuffer::mark_device_dirty(const std::string& backend_id, Range elem_range) {
  std::lock_guard lock(mu_);
  apply_merges_locked();
  auto it = residency_.find(backend_id);
  if (it == residency_.end() || !it->second.image)
    raise(errc::backend_failure, "mark_device_dirty without a registered image");
  ++content_version_;
  it->second.image->content_version = content_version_;
  auth_backend_ = backend_id;
  size_t byte_lo = static_cast<size_t>(elem_range.first) * elem_size_;
  size_t byte_hi = (static_cast<size_t>(elem_range.second) + 1) * elem_size_;
  if (byte_hi == byte_lo) return;
  for (size_t p = byte_lo / kPageBytes; p <= (byte_hi - 1) / kPageBytes; ++p)
    dirty_pages_.insert(p);
}

void FlashBuffer::drop_residency(const std::string& backend_id) {
  std::lock_guard lock(mu_);
  if (auth_backend_ == backend_id) {
    while (!dirty_pages_.empty()) pull_page_locked(*dirty_pages_.begin());
    auth_backend_.clear();
  }
  residency_.erase(backend_id);
}

void FlashBuffer::register_pending_merge(SubBufferView view) {
  std::lock_guard lock(mu_);
  // A merge supersedes any older device authority over its range; pull
  // first so layering stays single-level.
  while (!dirty_pages_.empty()) pull_page_locked(*dirty_pages_.begin());
  pending_merges_.push_back(std::move(view));
  ++content_version_;
}

std::vector<SubBufferView> make_sub_buffers(FlashBuffer& b, const std::vector<PartitionPlan>& plans,
                                            size_t arg_index, bool detach) {
  std::vector<SubBufferView> out;
  out.reserve(plans.size());
  size_t elem_size = scalar_size(b.element_tag());
  const std::byte* base = static_cast<const std::byte*>(b.host_data_for_read());
  for (const PartitionPlan& plan : plans) {
    if (arg_index >= plan.arg_bounds.size())
      raise(errc::partition_out_of_bounds, "plan has no bounds for argument");
    auto [lo, hi] = plan.arg_bounds[arg_index];
    if (lo < 0 || hi >= static_cast<int64_t>(b.size()) || lo > hi)
      raise(errc::partition_out_of_bounds,
            "bounds (" + std::to_string(lo) + "," + std::to_string(hi) + ") outside buffer of " +
                std::to_string(b.size()) + " elements");
    SubBufferView v;
    v.parent = &b;
    v.bounds = {lo, hi};
    if (detach) {
      size_t off = static_cast<size_t>(lo) * elem_size;
      size_t len = static_cast<size_t>(hi - lo + 1) * elem_size;
      v.detached.assign(base + off, base + off + len);
    }
    out.push_back(std::move(v));
  }
  return out;
}

void merge_sub_buffers(FlashBuffer& b, std::vector<SubBufferView> views) {
  for (SubBufferView& v : views) {
    if (v.parent != &b) raise(errc::overlap_conflict, "view does not originate from this buffer");
    b.register_pending_merge(std::move(v));
  }
}

}  // namespace flashlite
