#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flashlite/index_space.hpp"
#include "flashlite/types.hpp"

namespace flashlite {

/// Implementation matching mode for searchable kernels.
enum class SearchMode : uint8_t { Exact, Fuzzy };

/// A partition function plus the name it was registered under, when any.
/// The name is what survives serialization and descriptor comparison.
struct PartitionSpec {
  std::string name;
  PartitionFn fn;
};

/// Optional sort_by / group_by / part_by / searchable metadata. At most one
/// of each; dimension indices are 1-based (1=X, 2=Y, 3=Z).
struct AttributeSet {
  std::vector<int> sort_by;  // empty = unset
  std::optional<GroupBySpec> group_by;
  std::optional<PartitionSpec> part_by;
  std::optional<SearchMode> searchable;

  bool any_cooperative() const { return !sort_by.empty() || group_by || part_by; }
  bool empty() const { return sort_by.empty() && !group_by && !part_by && !searchable; }
};

/// Hardware-agnostic declaration of a kernel: label, argument types, and
/// attributes, used for virtual dispatch. Immutable once built.
struct KernelDescriptor {
  std::string label;
  KernelKind kind = KernelKind::InternalBinary;
  size_t input_arity = 0;  // leading read-only arguments
  std::vector<ArgTypeTag> arg_types;
  AttributeSet attributes;
  std::optional<std::string> implementation_hint;
};

/// The structured non-templated form the frontend dispatches on. Identical
/// payload to KernelDescriptor minus the implementation hint, plus call-site
/// option overrides.
struct RuntimeKernelDesc {
  std::string label;
  KernelKind kind = KernelKind::InternalBinary;
  size_t input_arity = 0;
  std::vector<ArgTypeTag> arg_types;
  AttributeSet attributes;
  Options override_options;
};

KernelDescriptor make_descriptor(std::string label, KernelKind kind, size_t input_arity,
                                 std::vector<ArgTypeTag> arg_types, AttributeSet attributes = {},
                                 std::optional<std::string> impl_hint = std::nullopt);

RuntimeKernelDesc to_runtime_descriptor(const KernelDescriptor& d);

/// Per-argument adjustment needed to run a fuzzily matched implementation.
struct ArgCoercion {
  bool widen = false;  // F32->F64 or I32->I64 element conversion
  Indirection from = Indirection::Value;
  Indirection to = Indirection::Value;

  bool is_identity() const { return !widen && from == to; }
};

/// One registered implementation visible to match_implementations.
struct ImplRecord {
  std::string label;
  std::vector<ArgTypeTag> arg_types;
  std::string locator;  // plugin path or internal registry key
};

struct ImplMatch {
  size_t registry_index = 0;
  std::vector<ArgCoercion> plan;  // one entry per argument
};

/// Finds implementations for a searchable descriptor. Exact requires
/// identical labels and tags; Fuzzy additionally admits narrow-to-wide
/// scalar widening and indirection coercions, recording the plan.
std::vector<ImplMatch> match_implementations(const RuntimeKernelDesc& d,
                                             const std::vector<ImplRecord>& registry);

/// True when `impl` can stand in for a declared tag under Fuzzy rules,
/// filling in the coercion steps.
bool fuzzy_coercible(ArgTypeTag declared, ArgTypeTag impl, ArgCoercion& out);

}  // namespace flashlite
