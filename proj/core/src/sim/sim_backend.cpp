#include "flashlite/sim_backend.hpp"

#include <chrono>
#include <cstring>

#include "flashlite/errors.hpp"

namespace flashlite {
namespace sim {

namespace {
constexpr size_t kDefaultArenaBytes = 512ull << 20;

uint64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}
}  // namespace

struct SimDevice::Job {
  Action action;
  StatusHandle handle = StatusHandle::make();
};

SimDevice::SimDevice(std::string id) : id_(std::move(id)) {
  worker_ = std::thread([this] { device_loop(); });
}

SimDevice::~SimDevice() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

void SimDevice::register_kernel(const std::string& label, const std::string& locator) {
  ResolvedKernel kernel;
  try {
    kernel = resolve_implementation(label, locator, 0);
  } catch (const flash_error& e) {
    if (e.code() == errc::arity_exceeded) throw;
    raise(errc::unresolvable_implementation,
          "kernel '" + label + "' via '" + locator + "': " + e.what());
  }
  std::lock_guard lock(kernels_mu_);
  kernels_[label] = {locator, kernel};
}

StatusHandle SimDevice::execute(Action a) {
  if (a.table.dims > capabilities().max_dims)
    raise(errc::dims_unsupported, id_ + " supports at most 3 dimensions; launch has " +
                                      std::to_string(a.table.dims));
  {
    std::lock_guard lock(kernels_mu_);
    if (kernels_.find(a.desc.label) == kernels_.end())
      raise(errc::unknown_kernel, "kernel '" + a.desc.label + "' not registered with " + id_);
  }
  if (a.args.size() > kMaxKernelArgs)
    raise(errc::arity_exceeded, "action carries " + std::to_string(a.args.size()) +
                                    " arguments; the limit is " + std::to_string(kMaxKernelArgs));

  auto job = std::make_shared<Job>();
  job->action = std::move(a);
  StatusHandle handle = job->handle;
  {
    std::lock_guard lock(mu_);
    queue_.push_back(std::move(job));
  }
  cv_.notify_all();
  return handle;
}

Status SimDevice::wait(const StatusHandle& h) { return h.wait_terminal(); }

TransferStats SimDevice::stats() const {
  std::lock_guard lock(stats_mu_);
  return stats_;
}

void SimDevice::reset_stats() {
  std::lock_guard lock(stats_mu_);
  stats_ = TransferStats{};
}

void SimDevice::record_transfer(size_t len, const Options& opts) {
  std::lock_guard lock(stats_mu_);
  ++stats_.transfers;
  stats_.bytes += len;
  stats_.pages += (len + kPageBytes - 1) / kPageBytes;
  double us = opts.get_double("sim.latency_us", 0.0);
  double bw = opts.get_double("sim.bandwidth_bytes_per_us", 0.0);
  if (bw > 0.0) us += static_cast<double>(len) / bw;
  stats_.simulated_us += us;
}

void SimDevice::check_arena(size_t extra, const Options& opts) {
  size_t capacity = static_cast<size_t>(
      opts.get_int("sim.arena_bytes", static_cast<int64_t>(kDefaultArenaBytes)));
  if (arena_used_ + extra > capacity)
    raise(errc::arena_exhausted, id_ + " arena exceeds " + std::to_string(capacity) + " bytes");
}

std::vector<std::byte> SimDevice::copy_in_region(const std::byte* src, size_t len,
                                                 const Options& opts) {
  uint64_t t0 = now_ns();
  std::vector<std::byte> out(src, src + len);
  uint64_t t1 = now_ns();
  record_transfer(len, opts);
  {
    std::lock_guard lock(stats_mu_);
    stats_.wall_ns += t1 - t0;
  }
  return out;
}

std::shared_ptr<DeviceImage> SimDevice::upload(FlashBuffer& buffer, const Options& opts) {
  std::lock_guard lock(arena_mu_);
  auto it = arena_.find(&buffer);
  std::shared_ptr<DeviceImage> img = it == arena_.end() ? nullptr : it->second;

  if (img && img->content_version == buffer.content_version() &&
      img->bytes.size() == buffer.byte_size())
    return img;  // image already holds the current content

  size_t want = buffer.byte_size();
  size_t have = img ? img->bytes.size() : 0;
  if (want > have) check_arena(want - have, opts);

  const std::byte* host = static_cast<const std::byte*>(buffer.host_data_for_read());
  uint64_t t0 = now_ns();
  if (!img) {
    img = std::make_shared<DeviceImage>();
    arena_[&buffer] = img;
  }
  img->bytes.assign(host, host + want);
  uint64_t t1 = now_ns();
  arena_used_ += want > have ? want - have : 0;
  img->content_version = buffer.content_version();
  record_transfer(want, opts);
  {
    std::lock_guard lock(stats_mu_);
    stats_.wall_ns += t1 - t0;
  }

  buffer.set_residency(id_, img, [this, opts](size_t bytes, size_t pages) {
    std::lock_guard lock(stats_mu_);
    ++stats_.transfers;
    stats_.bytes += bytes;
    stats_.pages += pages;
    double us = opts.get_double("sim.latency_us", 0.0);
    double bw = opts.get_double("sim.bandwidth_bytes_per_us", 0.0);
    if (bw > 0.0) us += static_cast<double>(bytes) / bw;
    stats_.simulated_us += us;
  });
  return img;
}

void SimDevice::run_action(Job& job) {
  Action& act = job.action;
  ResolvedKernel kernel;
  {
    std::lock_guard lock(kernels_mu_);
    kernel = kernels_.at(act.desc.label).second;
  }

  std::vector<KernelWord> words;
  std::vector<std::vector<std::byte>> slices;       // detached regions, device-private
  slices.reserve(act.args.size());
  struct Writeback {
    size_t slice_index;
    std::byte* host_dst;             // raw arrays: eager copy-out target
    std::shared_ptr<FlashBuffer> buffer;  // flash buffers: lazy merge target
    Range bounds;
  };
  std::vector<Writeback> writebacks;
  struct DirtyMark {
    std::shared_ptr<FlashBuffer> buffer;
    std::shared_ptr<DeviceImage> image;
    Range bounds;
  };
  std::vector<DirtyMark> dirty_marks;
  size_t transient_bytes = 0;

  for (const ActionArg& arg : act.args) {
    if (!arg.is_array()) {
      words.push_back(arg.scalar_bits);
      continue;
    }
    size_t esz = scalar_size(arg.tag.base);
    int64_t lo = std::max<int64_t>(arg.bounds.first, 0);
    size_t cnt = arg.bound_count();

    if (arg.buffer && !act.subaction) {
      // Whole-buffer path: the device image is the working copy and stays
      // authoritative after a write until the host pulls it back.
      auto img = upload(*arg.buffer, act.options);
      words.push_back(static_cast<KernelWord>(
          reinterpret_cast<uintptr_t>(img->bytes.data() + static_cast<size_t>(lo) * esz)));
      if (arg.access != AccessMode::ReadOnly)
        dirty_marks.push_back({arg.buffer, img, {0, static_cast<int64_t>(arg.count) - 1}});
      continue;
    }

    // Detached slice: sub-buffer of a flash buffer, or any raw array.
    const std::byte* src;
    if (arg.buffer) {
      src = static_cast<const std::byte*>(arg.buffer->host_data_for_read());
    } else {
      src = static_cast<const std::byte*>(arg.host_ptr);
    }
    size_t len = cnt * esz;
    check_arena(len, act.options);
    transient_bytes += len;
    arena_used_ += len;
    slices.push_back(copy_in_region(src + static_cast<size_t>(lo) * esz, len, act.options));
    words.push_back(
        static_cast<KernelWord>(reinterpret_cast<uintptr_t>(slices.back().data())));
    if (arg.access != AccessMode::ReadOnly) {
      Writeback wb;
      wb.slice_index = slices.size() - 1;
      wb.host_dst = arg.buffer ? nullptr
                               : static_cast<std::byte*>(arg.host_ptr) +
                                     static_cast<size_t>(lo) * esz;
      wb.buffer = arg.buffer;
      wb.bounds = arg.bounds;
      writebacks.push_back(std::move(wb));
    }
  }

  std::vector<std::vector<size_t>> ind_storage;
  std::vector<size_t*> ind_ptrs;
  if (act.cooperative) {
    size_t total = act.table.rows();
    ind_storage.resize(act.table.dims);
    ind_ptrs.resize(act.table.dims);
    for (size_t d = 0; d < act.table.dims; ++d) {
      ind_storage[d].resize(total);
      for (size_t r = 0; r < total; ++r)
        ind_storage[d][r] = static_cast<size_t>(act.table.flat[r * act.table.dims + d]);
      ind_ptrs[d] = ind_storage[d].data();
    }
    words.push_back(static_cast<KernelWord>(reinterpret_cast<uintptr_t>(ind_ptrs.data())));
  }

  detail::WorkerContext ctx;
  ctx.dims = act.table.dims;
  bool failed = false;
  std::string reason;
  for (size_t r = 0; r < act.table.rows() && !failed; ++r) {
    ctx.row = act.table.flat.data() + r * act.table.dims;
    ctx.slot = r;
    detail::ScopedWorkerContext scoped(&ctx);
    try {
      invoke_kernel(kernel.fn, words.data(), words.size());
    } catch (const std::exception& e) {
      failed = true;
      reason = "KernelPanic(row " + std::to_string(r) + "): " + e.what();
    } catch (...) {
      failed = true;
      reason = "KernelPanic(row " + std::to_string(r) + "): unknown exception";
    }
  }

  if (!failed) {
    for (DirtyMark& mark : dirty_marks) {
      ++mark.image->version;
      mark.buffer->mark_device_dirty(id_, mark.bounds);
    }
    for (Writeback& wb : writebacks) {
      std::vector<std::byte>& bytes = slices[wb.slice_index];
      record_transfer(bytes.size(), act.options);
      if (wb.buffer) {
        SubBufferView view;
        view.parent = wb.buffer.get();
        view.bounds = wb.bounds;
        view.detached = bytes;  // staged; merged into the parent lazily
        wb.buffer->register_pending_merge(std::move(view));
      } else {
        uint64_t t0 = now_ns();
        std::memcpy(wb.host_dst, bytes.data(), bytes.size());
        uint64_t t1 = now_ns();
        std::lock_guard lock(stats_mu_);
        stats_.wall_ns += t1 - t0;
      }
    }
  }

  {
    std::lock_guard lock(arena_mu_);
    arena_used_ -= transient_bytes;
  }

  executed_.fetch_add(1);
  if (failed)
    job.handle.fulfill(ActionState::Failed, reason);
  else
    job.handle.fulfill(ActionState::Complete);
}

void SimDevice::device_loop() {
  std::unique_lock lock(mu_);
  while (true) {
    if (stopping_) return;
    if (queue_.empty()) {
      cv_.wait(lock);
      continue;
    }
    std::shared_ptr<Job> job = queue_.front();
    queue_.pop_front();
    lock.unlock();
    try {
      run_action(*job);
    } catch (const std::exception& e) {
      job->handle.fulfill(ActionState::Failed, e.what());
    }
    lock.lock();
  }
}

void ensure_devices(size_t n) {
  Registrar& reg = Registrar::instance();
  for (size_t i = 0; i < n; ++i) {
    std::string id = "SIM_ACCEL:" + std::to_string(i);
    if (reg.contains(id)) continue;
    reg.register_backend(
        id, [id] { return std::make_shared<SimDevice>(id); }, DeviceClass::Accelerator);
  }
}

std::shared_ptr<SimDevice> device(size_t index) {
  auto backend = Registrar::instance().lookup("SIM_ACCEL:" + std::to_string(index));
  return std::dynamic_pointer_cast<SimDevice>(backend);
}

}  // namespace sim
}  // namespace flashlite
