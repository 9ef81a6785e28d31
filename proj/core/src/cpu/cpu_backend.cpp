#include "flashlite/cpu_backend.hpp"

#include <algorithm>

#include "flashlite/errors.hpp"

namespace flashlite {

namespace {
constexpr size_t kMaxPoolThreads = 64;

size_t default_pool_width() {
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}
}  // namespace

/// One queued action. Workers attach (bounded by `cap`), claim rows from
/// the current phase through the cursor, and the last detaching worker
/// advances the phase.
struct CpuBackend::ActionRun {
  Action action;
  StatusHandle handle = StatusHandle::make();
  ResolvedKernel kernel;
  std::vector<KernelWord> words;
  size_t invoke_words = 0;
  std::vector<std::vector<size_t>> ind_storage;
  std::vector<size_t*> ind_ptrs;
  bool atomic_mode = true;
  size_t cap = 1;
  std::vector<size_t> phase_bounds;
  size_t phase = 0;            // pool-mutex guarded
  std::atomic<size_t> cursor{0};
  size_t attached = 0;         // pool-mutex guarded
  bool done = false;           // pool-mutex guarded
  std::atomic<bool> failed{false};
  std::mutex fail_mu;
  std::string fail_reason;
};

CpuBackend::CpuBackend() = default;

CpuBackend::~CpuBackend() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  for (std::thread& t : workers_)
    if (t.joinable()) t.join();
}

std::shared_ptr<CpuBackend> CpuBackend::shared() {
  static std::shared_ptr<CpuBackend> backend = std::make_shared<CpuBackend>();
  return backend;
}

void CpuBackend::register_kernel(const std::string& label, const std::string& locator) {
  ResolvedKernel kernel;
  try {
    // Arity is re-checked per action; registration caches the entry point.
    kernel = resolve_implementation(label, locator, 0);
  } catch (const flash_error& e) {
    if (e.code() == errc::arity_exceeded) throw;
    raise(errc::unresolvable_implementation,
          "kernel '" + label + "' via '" + locator + "': " + e.what());
  }
  std::lock_guard lock(kernels_mu_);
  kernels_[label] = {locator, kernel};  // later registrations override
}

StatusHandle CpuBackend::execute(Action a) {
  ResolvedKernel kernel;
  {
    std::lock_guard lock(kernels_mu_);
    auto it = kernels_.find(a.desc.label);
    if (it == kernels_.end())
      raise(errc::unknown_kernel, "kernel '" + a.desc.label + "' not registered with " + id_);
    kernel = it->second.second;
  }
  if (a.args.size() > kMaxKernelArgs)
    raise(errc::arity_exceeded, "action carries " + std::to_string(a.args.size()) +
                                    " arguments; the limit is " + std::to_string(kMaxKernelArgs));

  auto run = std::make_shared<ActionRun>();
  run->kernel = kernel;
  run->action = std::move(a);
  Action& act = run->action;

  run->cap = std::clamp<size_t>(
      static_cast<size_t>(act.options.get_int("pool_width",
                                              static_cast<int64_t>(default_pool_width()))),
      1, kMaxPoolThreads);
  run->atomic_mode = act.options.get_bool("atomic_index", true);

  // Phase bounds come from the unpadded table; padding extends the last
  // phase so every non-atomic fetch stays in bounds.
  size_t rows = act.table.rows();
  run->phase_bounds.push_back(0);
  for (size_t b : act.table.barriers) run->phase_bounds.push_back(b);
  if (!run->atomic_mode && rows % run->cap != 0)
    pad_table(act.table, run->cap - rows % run->cap);
  run->phase_bounds.push_back(act.table.rows());

  // Argument slots are fixed for the whole action.
  for (const ActionArg& arg : act.args) {
    if (!arg.is_array()) {
      run->words.push_back(arg.scalar_bits);
      continue;
    }
    std::byte* base;
    if (arg.buffer) {
      base = static_cast<std::byte*>(arg.access == AccessMode::ReadOnly
                                         ? const_cast<void*>(arg.buffer->host_data_for_read())
                                         : arg.buffer->host_data_for_write());
    } else {
      base = static_cast<std::byte*>(arg.host_ptr);
    }
    base += static_cast<size_t>(std::max<int64_t>(arg.bounds.first, 0)) *
            scalar_size(arg.tag.base);
    run->words.push_back(static_cast<KernelWord>(reinterpret_cast<uintptr_t>(base)));
  }

  if (act.cooperative) {
    size_t total = act.table.rows();
    run->ind_storage.resize(act.table.dims);
    run->ind_ptrs.resize(act.table.dims);
    for (size_t d = 0; d < act.table.dims; ++d) {
      run->ind_storage[d].resize(total);
      for (size_t r = 0; r < total; ++r)
        run->ind_storage[d][r] = static_cast<size_t>(act.table.flat[r * act.table.dims + d]);
      run->ind_ptrs[d] = run->ind_storage[d].data();
    }
    run->words.push_back(
        static_cast<KernelWord>(reinterpret_cast<uintptr_t>(run->ind_ptrs.data())));
  }
  run->invoke_words = run->words.size();

  StatusHandle handle = run->handle;
  {
    std::lock_guard lock(mu_);
    runs_.push_back(run);
    ensure_workers_locked(run->cap);
  }
  cv_.notify_all();
  return handle;
}

Status CpuBackend::wait(const StatusHandle& h) { return h.wait_terminal(); }

void CpuBackend::ensure_workers_locked(size_t want) {
  want = std::min(want, kMaxPoolThreads);
  while (workers_.size() < want) workers_.emplace_back([this] { worker_loop(); });
}

void CpuBackend::run_rows(const std::shared_ptr<ActionRun>& run) {
  const size_t end = run->phase_bounds[run->phase + 1];
  const Action& act = run->action;
  detail::WorkerContext ctx;
  ctx.dims = act.table.dims;

  while (!run->failed.load(std::memory_order_relaxed)) {
    size_t s;
    if (run->atomic_mode) {
      s = run->cursor.fetch_add(1, std::memory_order_acq_rel);
      if (s >= end) break;
    } else {
      // Deliberately racy claim: rows may repeat, never skip, never leave
      // [begin,end). Padding rows absorb the overshoot.
      s = run->cursor.load(std::memory_order_relaxed);
      if (s >= end) break;
      run->cursor.store(s + 1, std::memory_order_relaxed);
    }

    ctx.row = act.table.flat.data() + s * act.table.dims;
    ctx.slot = s;
    detail::ScopedWorkerContext scoped(&ctx);
    try {
      invoke_kernel(run->kernel.fn, run->words.data(), run->invoke_words);
    } catch (const std::exception& e) {
      std::lock_guard lock(run->fail_mu);
      run->fail_reason = "KernelPanic(row " + std::to_string(s) + "): " + e.what();
      run->failed.store(true);
    } catch (...) {
      std::lock_guard lock(run->fail_mu);
      run->fail_reason = "KernelPanic(row " + std::to_string(s) + "): unknown exception";
      run->failed.store(true);
    }
  }
}

void CpuBackend::finish_run_locked(ActionRun& run) {
  run.done = true;
  for (auto it = runs_.begin(); it != runs_.end(); ++it) {
    if (it->get() == &run) {
      runs_.erase(it);
      break;
    }
  }
  executed_.fetch_add(1);

  if (run.failed.load()) {
    std::string reason;
    {
      std::lock_guard lock(run.fail_mu);
      reason = run.fail_reason;
    }
    run.handle.fulfill(ActionState::Failed, reason);
    return;
  }
  // Host bytes changed under kernel writes: stale device images must not
  // be reused.
  for (const ActionArg& arg : run.action.args)
    if (arg.buffer && arg.access != AccessMode::ReadOnly) arg.buffer->note_host_write();
  run.handle.fulfill(ActionState::Complete);
}

void CpuBackend::worker_loop() {
  std::unique_lock lock(mu_);
  while (true) {
    if (stopping_) return;

    std::shared_ptr<ActionRun> pick;
    bool reaped = false;
    for (const auto& r : runs_) {
      if (r->done) continue;
      if (r->failed.load(std::memory_order_relaxed)) {
        if (r->attached == 0) {
          finish_run_locked(*r);  // invalidates iterators
          reaped = true;
          break;
        }
        continue;
      }
      if (r->attached >= r->cap) continue;
      if (r->cursor.load(std::memory_order_relaxed) >= r->phase_bounds[r->phase + 1]) continue;
      pick = r;
      break;
    }
    if (reaped) {
      cv_.notify_all();
      continue;
    }
    if (!pick) {
      cv_.wait(lock);
      continue;
    }

    ++pick->attached;
    lock.unlock();
    run_rows(pick);
    lock.lock();
    --pick->attached;

    if (pick->attached == 0 && !pick->done) {
      if (pick->failed.load()) {
        finish_run_locked(*pick);
        cv_.notify_all();
        continue;
      }
      size_t end = pick->phase_bounds[pick->phase + 1];
      if (pick->cursor.load() >= end) {
        if (pick->phase + 1 == pick->phase_bounds.size() - 1) {
          finish_run_locked(*pick);
        } else {
          ++pick->phase;  // all phase-k rows are done; open phase k+1
          pick->cursor.store(pick->phase_bounds[pick->phase]);
        }
        cv_.notify_all();
      }
    }
  }
}

}  // namespace flashlite
