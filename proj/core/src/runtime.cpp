#include "flashlite/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <mutex>
#include <set>

#include "flashlite/errors.hpp"
#include "flashlite/plugin.hpp"

namespace flashlite {
namespace detail {

namespace {

uint64_t steady_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct RegisteredKernel {
  KernelDescriptor desc;
  std::string locator;
};

/// Process-wide frontend state: the kernel registry, the per-backend
/// registration memo, and the round-robin counter. All handles share it.
struct Frontend {
  static Frontend& instance() {
    static Frontend f;
    return f;
  }

  std::mutex mu;
  std::map<std::string, RegisteredKernel> kernels;
  std::set<std::pair<std::string, std::string>> backend_seen;  // (backend id, label)
  std::atomic<uint64_t> rr_counter{0};
};

std::string locator_for(const KernelDescriptor& d) {
  if (d.kind == KernelKind::InternalBinary) return kInternalLocator;
  if (!d.implementation_hint || d.implementation_hint->empty())
    raise(errc::kernel_resolution_failure,
          "kernel '" + d.label + "' is ExternalBinary but has no implementation hint");
  return *d.implementation_hint;
}

}  // namespace

struct SubmissionRec {
  RuntimeKernelDesc desc;
  std::optional<std::string> impl_hint;
  std::vector<TypeErasedArg> args;
  std::vector<DimSpec> launch;
  Options options;
  std::mutex mu;
  SubmissionState state = SubmissionState::Staged;
};

struct HandleState {
  std::vector<std::shared_ptr<Backend>> backends;
  Options options;
  std::mutex mu;
  std::vector<std::shared_ptr<SubmissionRec>> pipeline;  // deferred, not yet executed
};

std::shared_ptr<HandleState> make_handle(const std::string& key,
                                         const std::vector<KernelDescriptor>& prereg) {
  auto h = std::make_shared<HandleState>();
  h->backends = Registrar::instance().resolve(key);
  for (const KernelDescriptor& d : prereg) handle_register(*h, d);
  return h;
}

void handle_options(HandleState& h, const Options& kv) {
  std::lock_guard lock(h.mu);
  h.options.merge(kv);
}

void handle_register(HandleState& h, const KernelDescriptor& d) {
  std::string locator = locator_for(d);
  Frontend& fr = Frontend::instance();
  // Eager resolution: plugins load and symbols get cached now, so failures
  // surface at registration rather than mid-pipeline.
  for (const auto& backend : h.backends) {
    try {
      backend->register_kernel(d.label, locator);
    } catch (const flash_error& e) {
      raise(errc::kernel_resolution_failure,
            "kernel '" + d.label + "' failed to resolve on " + backend->id() + ": " + e.what());
    }
    std::lock_guard lock(fr.mu);
    fr.backend_seen.insert({backend->id(), d.label});
  }
  std::lock_guard lock(fr.mu);
  fr.kernels[d.label] = RegisteredKernel{d, locator};
}

std::vector<std::string> handle_backend_ids(const HandleState& h) {
  std::vector<std::string> out;
  out.reserve(h.backends.size());
  for (const auto& b : h.backends) out.push_back(b->id());
  return out;
}

namespace {

void assign_access(SubmissionRec& rec) {
  const size_t arity = rec.desc.input_arity;
  const size_t declared = rec.desc.arg_types.size();
  for (size_t i = 0; i < rec.args.size(); ++i) {
    if (i < arity)
      rec.args[i].access = AccessMode::ReadOnly;
    else if (i < declared)
      rec.args[i].access = AccessMode::ReadWrite;
    else
      rec.args[i].access = AccessMode::WriteOnly;  // call-site appended output
  }
}

}  // namespace

std::shared_ptr<SubmissionRec> make_submission(HandleState& h, const KernelDescriptor& d,
                                               std::vector<TypeErasedArg> args) {
  if (args.size() < d.input_arity)
    raise(errc::invalid_descriptor, "submission passes fewer arguments than the input arity");

  Frontend& fr = Frontend::instance();
  {
    std::lock_guard lock(fr.mu);
    if (!fr.kernels.count(d.label) && !d.implementation_hint)
      raise(errc::unknown_kernel, "kernel '" + d.label + "' is not registered and carries no hint");
  }

  auto rec = std::make_shared<SubmissionRec>();
  rec->desc = to_runtime_descriptor(d);
  rec->impl_hint = d.implementation_hint;
  rec->args = std::move(args);
  assign_access(*rec);
  return rec;
}

std::shared_ptr<SubmissionRec> make_submission(HandleState& h, const std::string& label,
                                               std::vector<TypeErasedArg> args) {
  KernelDescriptor d;
  {
    Frontend& fr = Frontend::instance();
    std::lock_guard lock(fr.mu);
    auto it = fr.kernels.find(label);
    if (it == fr.kernels.end())
      raise(errc::unknown_kernel, "kernel '" + label + "' is not registered");
    d = it->second.desc;
  }
  return make_submission(h, d, std::move(args));
}

void submission_options(SubmissionRec& s, const Options& kv) {
  std::lock_guard lock(s.mu);
  s.options.merge(kv);
}

void submission_sizes(SubmissionRec& s, const std::vector<uint64_t>& counts) {
  std::lock_guard lock(s.mu);
  size_t next = 0;
  for (TypeErasedArg& arg : s.args) {
    if (next >= counts.size()) break;
    if (arg.observed.indirection == Indirection::Value) continue;
    if (arg.introspected) continue;  // containers and flash buffers self-size
    arg.count = counts[next++];
  }
  if (next < counts.size())
    raise(errc::size_mismatch, std::to_string(counts.size() - next) +
                                   " size(s) left over: no unsized array argument to apply them to");
}

SubmissionState submission_state(const SubmissionRec& s) { return s.state; }

// --- deferred type checking ----------------------------------------------

namespace {

/// How a call-site payload becomes the slot an implementation expects.
struct BindStep {
  enum class Kind : uint8_t {
    Direct,
    WidenScalar,    // Value -> wider Value
    WidenArray,     // array -> converted temp array of the wider base
    ValueToArray,   // scalar -> one-element temp array
    ArrayToValue,   // one-element array -> scalar slot
  };
  Kind kind = Kind::Direct;
  ScalarType target_base = ScalarType::F32;
};

bool base_widenable(ScalarType from, ScalarType to) {
  return (from == ScalarType::F32 && to == ScalarType::F64) ||
         (from == ScalarType::I32 && to == ScalarType::I64);
}

bool array_like(Indirection i) { return i != Indirection::Value; }

/// Reconciles one observed argument against a target tag. Exact and
/// array-kind-compatible bindings always pass; base widening and
/// value/array conversions require Fuzzy.
std::optional<BindStep> reconcile(ArgTypeTag target, ArgTypeTag observed, bool fuzzy) {
  BindStep step;
  step.target_base = target.base;

  if (target.base == observed.base) {
    if (target.indirection == observed.indirection ||
        (array_like(target.indirection) && array_like(observed.indirection))) {
      step.kind = BindStep::Kind::Direct;
      return step;
    }
    if (!fuzzy) return std::nullopt;
    step.kind = array_like(target.indirection) ? BindStep::Kind::ValueToArray
                                               : BindStep::Kind::ArrayToValue;
    return step;
  }

  if (!fuzzy || !base_widenable(observed.base, target.base)) return std::nullopt;
  if (target.indirection == observed.indirection ||
      (array_like(target.indirection) && array_like(observed.indirection))) {
    step.kind = array_like(target.indirection) ? BindStep::Kind::WidenArray
                                               : BindStep::Kind::WidenScalar;
    return step;
  }
  if (!array_like(observed.indirection) && array_like(target.indirection)) {
    step.kind = BindStep::Kind::ValueToArray;  // widen and materialize
    return step;
  }
  return std::nullopt;
}

std::vector<BindStep> type_check(SubmissionRec& rec, const std::vector<ArgTypeTag>& target_types) {
  bool fuzzy = rec.desc.attributes.searchable &&
               *rec.desc.attributes.searchable == SearchMode::Fuzzy;

  if (rec.args.size() < target_types.size())
    raise(errc::type_mismatch,
          "argument " + std::to_string(rec.args.size()) + ": expected " +
              tag_name(target_types[rec.args.size()]) + ", observed nothing (missing argument)");

  std::vector<BindStep> plan(rec.args.size());
  for (size_t i = 0; i < rec.args.size(); ++i) {
    if (i >= target_types.size()) {
      plan[i].kind = BindStep::Kind::Direct;  // call-site appended, observed as declared
      plan[i].target_base = rec.args[i].observed.base;
      continue;
    }
    auto step = reconcile(target_types[i], rec.args[i].observed, fuzzy);
    if (!step)
      raise(errc::type_mismatch, "argument " + std::to_string(i) + ": expected " +
                                     tag_name(target_types[i]) + ", observed " +
                                     tag_name(rec.args[i].observed));
    plan[i] = *step;
  }
  return plan;
}

// --- dependency detection --------------------------------------------------

bool writes(AccessMode a) { return a != AccessMode::ReadOnly; }

}  // namespace

std::vector<std::pair<size_t, size_t>> detect_dependencies(
    const std::vector<std::shared_ptr<SubmissionRec>>& pipeline) {
  std::vector<std::pair<size_t, size_t>> edges;
  for (size_t j = 1; j < pipeline.size(); ++j) {
    for (size_t i = 0; i < j; ++i) {
      bool edge = false;
      for (const TypeErasedArg& a : pipeline[i]->args) {
        if (!a.identity) continue;
        for (const TypeErasedArg& b : pipeline[j]->args) {
          if (a.identity != b.identity) continue;
          if (writes(a.access) || writes(b.access)) {  // RAW, WAR, WAW all order
            edge = true;
            break;
          }
        }
        if (edge) break;
      }
      if (edge) edges.emplace_back(i, j);
    }
  }
  return edges;
}

// --- dispatch ---------------------------------------------------------------

namespace {

uint64_t convert_scalar_bits(uint64_t bits, ScalarType from, ScalarType to) {
  if (from == to) return bits;
  if (from == ScalarType::F32 && to == ScalarType::F64) {
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    return f64_to_word(static_cast<double>(f));
  }
  if (from == ScalarType::I32 && to == ScalarType::I64) {
    int32_t v;
    std::memcpy(&v, &bits, sizeof(v));
    uint64_t out;
    int64_t wide = v;
    std::memcpy(&out, &wide, sizeof(out));
    return out;
  }
  raise(errc::type_mismatch, "unsupported scalar conversion");
}

void widen_elements(const void* src, ScalarType from, void* dst, ScalarType to, size_t n) {
  if (from == ScalarType::F32 && to == ScalarType::F64) {
    const float* s = static_cast<const float*>(src);
    double* d = static_cast<double*>(dst);
    for (size_t i = 0; i < n; ++i) d[i] = static_cast<double>(s[i]);
    return;
  }
  if (from == ScalarType::I32 && to == ScalarType::I64) {
    const int32_t* s = static_cast<const int32_t*>(src);
    int64_t* d = static_cast<int64_t*>(dst);
    for (size_t i = 0; i < n; ++i) d[i] = s[i];
    return;
  }
  raise(errc::type_mismatch, "unsupported element widening");
}

void narrow_elements(const void* src, ScalarType from, void* dst, ScalarType to, size_t n) {
  if (from == ScalarType::F64 && to == ScalarType::F32) {
    const double* s = static_cast<const double*>(src);
    float* d = static_cast<float*>(dst);
    for (size_t i = 0; i < n; ++i) d[i] = static_cast<float>(s[i]);
    return;
  }
  if (from == ScalarType::I64 && to == ScalarType::I32) {
    const int64_t* s = static_cast<const int64_t*>(src);
    int32_t* d = static_cast<int32_t*>(dst);
    for (size_t i = 0; i < n; ++i) d[i] = static_cast<int32_t>(s[i]);
    return;
  }
  raise(errc::type_mismatch, "unsupported element narrowing");
}

/// A widened temp array that must be narrowed back after completion.
struct CoercionTemp {
  std::vector<std::byte> bytes;
  TypeErasedArg* origin = nullptr;
  ScalarType wide_base;
  size_t count = 0;
  bool write_back = false;
};

struct DispatchedSubmission {
  std::shared_ptr<SubmissionRec> rec;
  std::vector<std::pair<std::shared_ptr<Backend>, StatusHandle>> actions;
  std::vector<std::shared_ptr<CoercionTemp>> temps;
  SubmissionReport report;
  bool dispatched = false;
  bool waited = false;
};

void ensure_backend_registration(const std::shared_ptr<Backend>& backend, const std::string& label,
                                 const std::string& locator) {
  Frontend& fr = Frontend::instance();
  {
    std::lock_guard lock(fr.mu);
    if (fr.backend_seen.count({backend->id(), label})) return;
  }
  backend->register_kernel(label, locator);
  std::lock_guard lock(fr.mu);
  fr.backend_seen.insert({backend->id(), label});
}

/// Resolves which implementation (label + locator + target arg types) a
/// submission dispatches to, consulting the searchable registry when the
/// direct label registration does not fit.
struct ResolvedDispatch {
  std::string label;
  std::string locator;
  std::vector<ArgTypeTag> target_types;
};

ResolvedDispatch resolve_dispatch(const SubmissionRec& rec) {
  Frontend& fr = Frontend::instance();
  std::lock_guard lock(fr.mu);

  auto it = fr.kernels.find(rec.desc.label);
  if (it != fr.kernels.end() && it->second.desc.arg_types == rec.desc.arg_types)
    return {rec.desc.label, it->second.locator, rec.desc.arg_types};

  if (rec.desc.attributes.searchable) {
    std::vector<ImplRecord> registry;
    std::vector<const RegisteredKernel*> owners;
    for (const auto& [label, reg] : fr.kernels) {
      registry.push_back(ImplRecord{label, reg.desc.arg_types, reg.locator});
      owners.push_back(&reg);
    }
    auto matches = match_implementations(rec.desc, registry);
    if (matches.empty())
      raise(errc::no_match, "no " +
                                std::string(*rec.desc.attributes.searchable == SearchMode::Exact
                                                ? "exact"
                                                : "fuzzy") +
                                " implementation matches kernel '" + rec.desc.label + "'");
    const ImplRecord& found = registry[matches.front().registry_index];
    return {found.label, found.locator, found.arg_types};
  }

  if (rec.impl_hint)
    return {rec.desc.label, *rec.impl_hint, rec.desc.arg_types};
  if (it != fr.kernels.end())  // same label, different tags, not searchable
    return {rec.desc.label, it->second.locator, rec.desc.arg_types};
  raise(errc::unknown_kernel, "kernel '" + rec.desc.label + "' has no implementation");
}

ActionArg bind_arg(const TypeErasedArg& src, const BindStep& step,
                   std::vector<std::shared_ptr<CoercionTemp>>& temps) {
  ActionArg out;
  out.access = src.access;
  out.scalar_bits = src.scalar_bits;
  out.host_ptr = src.host_ptr;
  out.buffer = src.buffer;
  out.count = src.count.value_or(0);
  out.tag = src.observed;

  switch (step.kind) {
    case BindStep::Kind::Direct:
      break;
    case BindStep::Kind::WidenScalar:
      out.scalar_bits = convert_scalar_bits(src.scalar_bits, src.observed.base, step.target_base);
      out.tag.base = step.target_base;
      break;
    case BindStep::Kind::WidenArray: {
      auto temp = std::make_shared<CoercionTemp>();
      temp->wide_base = step.target_base;
      temp->count = src.count.value_or(0);
      temp->origin = const_cast<TypeErasedArg*>(&src);
      temp->write_back = src.access != AccessMode::ReadOnly;
      temp->bytes.resize(temp->count * scalar_size(step.target_base));
      const void* source = src.buffer ? src.buffer->host_data_for_read() : src.host_ptr;
      widen_elements(source, src.observed.base, temp->bytes.data(), step.target_base, temp->count);
      temps.push_back(temp);
      out.buffer = nullptr;
      out.host_ptr = temp->bytes.data();
      out.tag = {step.target_base, Indirection::HostArray};
      break;
    }
    case BindStep::Kind::ValueToArray: {
      auto temp = std::make_shared<CoercionTemp>();
      temp->wide_base = step.target_base;
      temp->count = 1;
      temp->write_back = false;  // by-value scalars have no writeback target
      temp->bytes.resize(scalar_size(step.target_base));
      uint64_t bits = convert_scalar_bits(src.scalar_bits, src.observed.base, step.target_base);
      std::memcpy(temp->bytes.data(), &bits, scalar_size(step.target_base));
      temps.push_back(temp);
      out.buffer = nullptr;
      out.host_ptr = temp->bytes.data();
      out.count = 1;
      out.tag = {step.target_base, Indirection::HostArray};
      break;
    }
    case BindStep::Kind::ArrayToValue: {
      if (src.count.value_or(0) != 1)
        raise(errc::type_mismatch, "only a single-element array coerces to a value argument");
      const void* source = src.buffer ? src.buffer->host_data_for_read() : src.host_ptr;
      uint64_t bits = 0;
      std::memcpy(&bits, source, scalar_size(src.observed.base));
      out.scalar_bits = convert_scalar_bits(bits, src.observed.base, step.target_base);
      out.buffer = nullptr;
      out.host_ptr = nullptr;
      out.tag = {step.target_base, Indirection::Value};
      break;
    }
  }

  if (out.is_array()) {
    if (out.count == 0 && !src.count.has_value())
      raise(errc::size_mismatch, "array argument has no size; call sizes() or pass a container");
    out.bounds = {0, static_cast<int64_t>(out.count) - 1};
  }
  return out;
}

void narrow_back(const std::vector<std::shared_ptr<CoercionTemp>>& temps) {
  for (const auto& temp : temps) {
    if (!temp->write_back || !temp->origin) continue;
    TypeErasedArg& origin = *temp->origin;
    ScalarType narrow = origin.observed.base;
    if (origin.buffer) {
      void* dst = origin.buffer->host_data_for_write();
      narrow_elements(temp->bytes.data(), temp->wide_base, dst, narrow, temp->count);
      origin.buffer->note_host_write();
    } else {
      narrow_elements(temp->bytes.data(), temp->wide_base, origin.host_ptr, narrow, temp->count);
    }
  }
}

}  // namespace

void defer_submission(HandleState& h, const std::shared_ptr<SubmissionRec>& s,
                      std::vector<DimSpec> launch) {
  if (launch.empty()) raise(errc::empty_index_space, "defer requires at least one dimension");
  for (const DimSpec& d : launch)
    if (d.length() == 0) raise(errc::empty_index_space, "a launch dimension expands to nothing");

  {
    ResolvedDispatch rd = resolve_dispatch(*s);
    type_check(*s, rd.target_types);  // deferred type checking happens here, never at submit
  }

  std::lock_guard lock(s->mu);
  s->launch = std::move(launch);
  s->state = SubmissionState::Deferred;
  std::lock_guard hlock(h.mu);
  h.pipeline.push_back(s);
}

ExecReport exec_submission(HandleState& h, const std::shared_ptr<SubmissionRec>& s,
                           std::vector<DimSpec> launch) {
  if (launch.empty()) raise(errc::empty_index_space, "exec requires at least one dimension");
  {
    std::lock_guard lock(s->mu);
    s->launch = std::move(launch);
  }

  // Take ownership of the open pipeline plus this submission.
  std::vector<std::shared_ptr<SubmissionRec>> pipeline;
  Options handle_opts;
  std::vector<std::shared_ptr<Backend>> backends;
  {
    std::lock_guard lock(h.mu);
    pipeline = std::move(h.pipeline);
    h.pipeline.clear();
    handle_opts = h.options;
    backends = h.backends;
  }
  if (std::find(pipeline.begin(), pipeline.end(), s) == pipeline.end()) pipeline.push_back(s);

  uint64_t t0 = steady_ns();
  Frontend& fr = Frontend::instance();

  // Resolve implementations and type-check every member before anything
  // dispatches.
  struct Prepared {
    ResolvedDispatch dispatch;
    std::vector<BindStep> plan;
  };
  std::vector<Prepared> prepared(pipeline.size());
  for (size_t i = 0; i < pipeline.size(); ++i) {
    prepared[i].dispatch = resolve_dispatch(*pipeline[i]);
    prepared[i].plan = type_check(*pipeline[i], prepared[i].dispatch.target_types);
  }

  auto edges = detect_dependencies(pipeline);

  std::vector<DispatchedSubmission> dispatched(pipeline.size());
  std::optional<std::string> failure;

  auto wait_submission = [&](DispatchedSubmission& d) {
    if (!d.dispatched || d.waited) return;
    d.waited = true;
    for (auto& [backend, handle] : d.actions) {
      Status st = backend->wait(handle);
      d.report.complete_ns = std::max(d.report.complete_ns, steady_ns());
      if (st.state == ActionState::Failed) {
        d.report.state = SubmissionState::Failed;
        std::lock_guard lock(d.rec->mu);
        d.rec->state = SubmissionState::Failed;
        if (!failure)
          failure = "kernel '" + d.rec->desc.label + "' on " + backend->id() + ": " + st.reason;
      }
    }
    if (d.report.state != SubmissionState::Failed) {
      d.report.state = SubmissionState::Complete;
      narrow_back(d.temps);
      std::lock_guard lock(d.rec->mu);
      d.rec->state = SubmissionState::Complete;
    }
  };

  try {
    for (size_t i = 0; i < pipeline.size(); ++i) {
      SubmissionRec& rec = *pipeline[i];
      DispatchedSubmission& mine = dispatched[i];
      mine.rec = pipeline[i];
      mine.report.label = rec.desc.label;

      // Dependencies: producers must complete before this dispatch; all
      // other submissions overlap freely.
      for (auto [from, to] : edges) {
        if (to != i) continue;
        wait_submission(dispatched[from]);
      }
      if (failure) {
        mine.report.state = SubmissionState::Failed;
        std::lock_guard lock(rec.mu);
        rec.state = SubmissionState::Failed;
        continue;  // producer failed; do not dispatch dependents
      }

      Options merged = handle_opts;
      merged.merge(rec.options);

      // Build the launch table and apply synchronization attributes.
      IndexTable table = build_index_table(rec.launch);
      const AttributeSet& attrs = rec.desc.attributes;
      if (!attrs.sort_by.empty()) table = apply_sort_by(table, attrs.sort_by);
      if (attrs.group_by) table = apply_group_by(table, *attrs.group_by);

      // Bind arguments.
      std::vector<ActionArg> bound;
      bound.reserve(rec.args.size());
      for (size_t a = 0; a < rec.args.size(); ++a)
        bound.push_back(bind_arg(rec.args[a], prepared[i].plan[a], mine.temps));

      RuntimeKernelDesc dispatch_desc = rec.desc;
      dispatch_desc.label = prepared[i].dispatch.label;
      dispatch_desc.override_options = rec.options;

      bool cooperative = attrs.any_cooperative();

      // Partition if requested.
      std::vector<Action> actions;
      if (attrs.part_by) {
        if (!mine.temps.empty())
          raise(errc::backend_failure,
                "part_by cannot be combined with argument coercion in this version");
        uint32_t n_parts = static_cast<uint32_t>(
            merged.get_int("partitions", static_cast<int64_t>(backends.size())));
        std::vector<uint64_t> arg_sizes;
        for (const ActionArg& arg : bound)
          if (arg.is_array()) arg_sizes.push_back(arg.count);
        auto [parted, plans] = apply_part_by(table, attrs.part_by->fn, n_parts, arg_sizes);
        for (const PartitionPlan& plan : plans) {
          Action act;
          act.desc = dispatch_desc;
          act.table = slice_table(parted, plan.row_begin, plan.row_end);
          act.subaction = plans.size() > 1;
          act.cooperative = cooperative;
          act.options = merged;
          act.submission_seq = i;
          act.partition_id = plan.id;
          act.args = bound;
          size_t array_seen = 0;
          for (ActionArg& arg : act.args) {
            if (!arg.is_array()) continue;
            arg.bounds = plan.arg_bounds.at(array_seen++);
          }
          actions.push_back(std::move(act));
        }
      } else {
        Action act;
        act.desc = dispatch_desc;
        act.table = std::move(table);
        act.cooperative = cooperative;
        act.options = merged;
        act.submission_seq = i;
        act.args = bound;
        actions.push_back(std::move(act));
      }

      // Round-robin assignment; `device` pins a submission to one backend.
      std::string pinned = merged.get_string("device", "");
      std::string sched = merged.get_string("scheduling", "round_robin");
      if (sched != "round_robin")
        raise(errc::backend_failure, "scheduling strategy '" + sched + "' is not supported");

      mine.report.dispatch_ns = steady_ns();
      for (Action& act : actions) {
        std::shared_ptr<Backend> target;
        if (!pinned.empty()) {
          for (const auto& b : backends)
            if (b->id() == pinned) target = b;
          if (!target)
            raise(errc::unknown_runtime_key, "device '" + pinned + "' is not a selected backend");
        } else {
          uint64_t slot = fr.rr_counter.fetch_add(1);
          target = backends[slot % backends.size()];
        }
        if (act.table.dims > target->capabilities().max_dims)
          raise(errc::dims_unsupported, "backend " + target->id() + " supports at most " +
                                            std::to_string(target->capabilities().max_dims) +
                                            " dimensions; launch has " +
                                            std::to_string(act.table.dims));
        ensure_backend_registration(target, act.desc.label, prepared[i].dispatch.locator);
        StatusHandle handle = target->execute(std::move(act));
        mine.actions.emplace_back(target, handle);
        mine.report.backends.push_back(target->id());
      }
      mine.dispatched = true;
      {
        std::lock_guard lock(rec.mu);
        rec.state = SubmissionState::Dispatched;
      }
    }
  } catch (...) {
    // A synchronous dispatch error: drain what already went out, then
    // rethrow so exec stays blocking.
    for (auto& d : dispatched) wait_submission(d);
    throw;
  }

  for (auto& d : dispatched) wait_submission(d);

  if (failure) raise(errc::backend_failure, *failure);

  ExecReport report;
  report.wall_seconds = static_cast<double>(steady_ns() - t0) * 1e-9;
  for (auto& d : dispatched) report.submissions.push_back(std::move(d.report));
  return report;
}

}  // namespace detail

RuntimeObj get_runtime(const std::string& key, const std::vector<KernelDescriptor>& prereg) {
  return RuntimeObj(detail::make_handle(key, prereg));
}

}  // namespace flashlite
