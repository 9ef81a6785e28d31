#include "flashlite/kernel_desc.hpp"

#include <algorithm>

#include "flashlite/errors.hpp"

namespace flashlite {

KernelDescriptor make_descriptor(std::string label, KernelKind kind, size_t input_arity,
                                 std::vector<ArgTypeTag> arg_types, AttributeSet attributes,
                                 std::optional<std::string> impl_hint) {
  if (label.empty()) raise(errc::invalid_descriptor, "kernel label must be non-empty");
  if (input_arity > arg_types.size())
    raise(errc::invalid_descriptor, "input arity " + std::to_string(input_arity) +
                                        " exceeds argument count " +
                                        std::to_string(arg_types.size()));

  if (!attributes.sort_by.empty()) {
    std::vector<int> dims = attributes.sort_by;
    std::sort(dims.begin(), dims.end());
    if (dims.front() < 1)
      raise(errc::invalid_descriptor, "sort_by dimensions are 1-based");
    if (std::adjacent_find(dims.begin(), dims.end()) != dims.end())
      raise(errc::invalid_descriptor, "sort_by dimensions must be distinct");
  }
  if (attributes.group_by && attributes.group_by->dim < 1)
    raise(errc::invalid_descriptor, "group_by dimension is 1-based");

  KernelDescriptor d;
  d.label = std::move(label);
  d.kind = kind;
  d.input_arity = input_arity;
  d.arg_types = std::move(arg_types);
  d.attributes = std::move(attributes);
  d.implementation_hint = std::move(impl_hint);
  return d;
}

RuntimeKernelDesc to_runtime_descriptor(const KernelDescriptor& d) {
  RuntimeKernelDesc rd;
  rd.label = d.label;
  rd.kind = d.kind;
  rd.input_arity = d.input_arity;
  rd.arg_types = d.arg_types;
  rd.attributes = d.attributes;
  return rd;
}

namespace {

bool widenable(ScalarType declared, ScalarType impl) {
  // Narrow-to-wide only, within the same family; signedness never crosses.
  if (declared == ScalarType::F32 && impl == ScalarType::F64) return true;
  if (declared == ScalarType::I32 && impl == ScalarType::I64) return true;
  return false;
}

bool array_like(Indirection i) { return i != Indirection::Value; }

}  // namespace

bool fuzzy_coercible(ArgTypeTag declared, ArgTypeTag impl, ArgCoercion& out) {
  out = ArgCoercion{};
  out.from = declared.indirection;
  out.to = impl.indirection;

  if (declared.base != impl.base) {
    if (!widenable(declared.base, impl.base)) return false;
    out.widen = true;
  }

  if (declared.indirection == impl.indirection) return true;

  // HostArray <-> DeviceArray <-> FlashBufferRef are interchangeable;
  // Value coerces to and from a single-element array.
  if (array_like(declared.indirection) && array_like(impl.indirection)) return true;
  if (declared.indirection == Indirection::Value || impl.indirection == Indirection::Value)
    return true;
  return false;
}

std::vector<ImplMatch> match_implementations(const RuntimeKernelDesc& d,
                                             const std::vector<ImplRecord>& registry) {
  if (!d.attributes.searchable)
    raise(errc::invalid_descriptor, "match_implementations requires a searchable descriptor");

  std::vector<ImplMatch> out;
  bool fuzzy = *d.attributes.searchable == SearchMode::Fuzzy;

  for (size_t i = 0; i < registry.size(); ++i) {
    const ImplRecord& rec = registry[i];
    if (rec.label != d.label) continue;
    if (rec.arg_types.size() != d.arg_types.size()) continue;

    ImplMatch m;
    m.registry_index = i;
    m.plan.resize(d.arg_types.size());

    bool ok = true;
    for (size_t a = 0; a < d.arg_types.size() && ok; ++a) {
      if (d.arg_types[a] == rec.arg_types[a]) {
        m.plan[a].from = m.plan[a].to = d.arg_types[a].indirection;
      } else if (fuzzy) {
        ok = fuzzy_coercible(d.arg_types[a], rec.arg_types[a], m.plan[a]);
      } else {
        ok = false;
      }
    }
    if (ok) out.push_back(std::move(m));
  }
  return out;
}

}  // namespace flashlite
