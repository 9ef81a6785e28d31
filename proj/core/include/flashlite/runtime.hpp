#pragma once

#include <cstring>
#include <memory>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "flashlite/backend.hpp"
#include "flashlite/buffer.hpp"
#include "flashlite/index_space.hpp"
#include "flashlite/kernel_desc.hpp"

namespace flashlite {

/// A call-site argument after type erasure: the observed tag, an access
/// class, and a payload reference. The submission never owns external heap
/// allocations.
struct TypeErasedArg {
  ArgTypeTag observed;
  AccessMode access = AccessMode::ReadWrite;
  uint64_t scalar_bits = 0;
  void* host_ptr = nullptr;
  std::shared_ptr<FlashBuffer> buffer;
  std::optional<uint64_t> count;      // introspected or set through sizes()
  bool introspected = false;          // true when count came from the container
  const void* identity = nullptr;     // buffer identity for hazard detection
};

enum class SubmissionState : uint8_t { Staged, Deferred, Dispatched, Complete, Failed };

struct SubmissionReport {
  std::string label;
  std::vector<std::string> backends;  // one entry per dispatched action
  uint64_t dispatch_ns = 0;           // steady-clock, first action dispatch
  uint64_t complete_ns = 0;           // steady-clock, last action completion observed
  SubmissionState state = SubmissionState::Staged;
};

struct ExecReport {
  double wall_seconds = 0.0;
  std::vector<SubmissionReport> submissions;

  /// Sum of per-submission dispatch-to-complete times, in seconds.
  double kernel_seconds() const {
    double s = 0.0;
    for (const auto& r : submissions)
      s += static_cast<double>(r.complete_ns - r.dispatch_ns) * 1e-9;
    return s;
  }
};

namespace detail {

struct SubmissionRec;
struct HandleState;

std::shared_ptr<HandleState> make_handle(const std::string& key,
                                         const std::vector<KernelDescriptor>& prereg);
void handle_options(HandleState& h, const Options& kv);
void handle_register(HandleState& h, const KernelDescriptor& d);
std::vector<std::string> handle_backend_ids(const HandleState& h);

std::shared_ptr<SubmissionRec> make_submission(HandleState& h, const KernelDescriptor& d,
                                               std::vector<TypeErasedArg> args);
std::shared_ptr<SubmissionRec> make_submission(HandleState& h, const std::string& label,
                                               std::vector<TypeErasedArg> args);
void submission_options(SubmissionRec& s, const Options& kv);
void submission_sizes(SubmissionRec& s, const std::vector<uint64_t>& counts);
SubmissionState submission_state(const SubmissionRec& s);

void defer_submission(HandleState& h, const std::shared_ptr<SubmissionRec>& s,
                      std::vector<DimSpec> launch);
ExecReport exec_submission(HandleState& h, const std::shared_ptr<SubmissionRec>& s,
                           std::vector<DimSpec> launch);

// --- call-site argument capture -----------------------------------------

template <typename T>
constexpr ScalarType scalar_tag_of() {
  using U = std::remove_cv_t<T>;
  if constexpr (std::is_same_v<U, float>) return ScalarType::F32;
  else if constexpr (std::is_same_v<U, double>) return ScalarType::F64;
  else if constexpr (std::is_same_v<U, uint8_t>) return ScalarType::U8;
  else if constexpr (std::is_integral_v<U> && std::is_signed_v<U> && sizeof(U) == 4)
    return ScalarType::I32;
  else if constexpr (std::is_integral_v<U> && std::is_signed_v<U> && sizeof(U) == 8)
    return ScalarType::I64;
  else if constexpr (std::is_integral_v<U> && std::is_unsigned_v<U> && sizeof(U) == 8)
    return ScalarType::U64;
  else
    static_assert(sizeof(U) == 0, "unsupported kernel argument scalar type");
}

template <typename T>
TypeErasedArg capture_scalar(T v) {
  TypeErasedArg a;
  a.observed = {scalar_tag_of<T>(), Indirection::Value};
  std::memcpy(&a.scalar_bits, &v, sizeof(v));
  return a;
}

template <typename T>
  requires std::is_arithmetic_v<T>
TypeErasedArg capture_arg(T v) {
  return capture_scalar(v);
}

template <typename T>
  requires std::is_arithmetic_v<T>
TypeErasedArg capture_arg(T* p) {
  TypeErasedArg a;
  a.observed = {scalar_tag_of<T>(), Indirection::HostArray};
  a.host_ptr = const_cast<std::remove_const_t<T>*>(p);
  a.identity = p;
  return a;
}

template <typename T>
TypeErasedArg capture_arg(std::vector<T>& v) {
  TypeErasedArg a;
  a.observed = {scalar_tag_of<T>(), Indirection::HostArray};
  a.host_ptr = v.data();
  a.count = v.size();
  a.introspected = true;
  a.identity = v.data();
  return a;
}

inline TypeErasedArg capture_arg(const std::shared_ptr<FlashBuffer>& b) {
  TypeErasedArg a;
  a.observed = {b->element_tag(), Indirection::FlashBufferRef};
  a.buffer = b;
  a.count = b->size();
  a.introspected = true;
  a.identity = b.get();
  return a;
}

template <typename T>
TypeErasedArg capture_arg(flash_memory<T>& m) {
  return capture_arg(m.handle());
}

template <typename T>
TypeErasedArg capture_arg(const flash_memory<T>& m) {
  return capture_arg(m.handle());
}

}  // namespace detail

class RuntimeObj;

/// Staged kernel launch. Chain with options/sizes, then defer (lazy, keeps
/// building the pipeline) or exec (runs the whole chain, blocking).
class SubmitObj {
 public:
  SubmitObj& options(const Options& kv) {
    detail::submission_options(*rec_, kv);
    return *this;
  }

  template <typename... Counts>
  SubmitObj& sizes(Counts... counts) {
    detail::submission_sizes(*rec_, {static_cast<uint64_t>(counts)...});
    return *this;
  }

  template <typename... Dims>
  RuntimeObj defer(Dims&&... dims);

  template <typename... Dims>
  ExecReport exec(Dims&&... dims);

  SubmissionState state() const { return detail::submission_state(*rec_); }

 private:
  friend class RuntimeObj;
  SubmitObj(std::shared_ptr<detail::HandleState> h, std::shared_ptr<detail::SubmissionRec> rec)
      : handle_(std::move(h)), rec_(std::move(rec)) {}

  std::shared_ptr<detail::HandleState> handle_;
  std::shared_ptr<detail::SubmissionRec> rec_;
};

/// Application handle to the frontend runtime: backend selection, kernel
/// registration, option mixins, and submission building. Copyable; copies
/// share the same pipeline state.
class RuntimeObj {
 public:
  RuntimeObj& options(const Options& kv) {
    detail::handle_options(*state_, kv);
    return *this;
  }

  template <typename... Args>
  SubmitObj submit(const KernelDescriptor& d, Args&&... args) {
    std::vector<TypeErasedArg> captured{detail::capture_arg(std::forward<Args>(args))...};
    return SubmitObj(state_, detail::make_submission(*state_, d, std::move(captured)));
  }

  template <typename... Args>
  SubmitObj submit(const std::string& label, Args&&... args) {
    std::vector<TypeErasedArg> captured{detail::capture_arg(std::forward<Args>(args))...};
    return SubmitObj(state_, detail::make_submission(*state_, label, std::move(captured)));
  }

  /// Registers (or re-registers) a kernel with every selected backend.
  void register_kernel(const KernelDescriptor& d) { detail::handle_register(*state_, d); }

  std::vector<std::string> backend_ids() const { return detail::handle_backend_ids(*state_); }

 private:
  friend RuntimeObj get_runtime(const std::string&, const std::vector<KernelDescriptor>&);
  friend class SubmitObj;
  explicit RuntimeObj(std::shared_ptr<detail::HandleState> s) : state_(std::move(s)) {}

  std::shared_ptr<detail::HandleState> state_;
};

/// Binds a handle to the backends matching `key` and eagerly resolves the
/// preregistered kernels (plugins loaded, symbols cached).
RuntimeObj get_runtime(const std::string& key, const std::vector<KernelDescriptor>& prereg = {});

template <typename... Dims>
RuntimeObj SubmitObj::defer(Dims&&... dims) {
  detail::defer_submission(*handle_, rec_, std::vector<DimSpec>{DimSpec(dims)...});
  return RuntimeObj(handle_);
}

template <typename... Dims>
ExecReport SubmitObj::exec(Dims&&... dims) {
  return detail::exec_submission(*handle_, rec_, std::vector<DimSpec>{DimSpec(dims)...});
}

}  // namespace flashlite
