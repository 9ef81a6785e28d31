#include "flashlite/types.hpp"

#include "flashlite/errors.hpp"

namespace flashlite {

size_t scalar_size(ScalarType t) {
  switch (t) {
    case ScalarType::F32: return 4;
    case ScalarType::F64: return 8;
    case ScalarType::I32: return 4;
    case ScalarType::I64: return 8;
    case ScalarType::U64: return 8;
    case ScalarType::U8: return 1;
  }
  return 0;
}

std::string_view scalar_name(ScalarType t) {
  switch (t) {
    case ScalarType::F32: return "f32";
    case ScalarType::F64: return "f64";
    case ScalarType::I32: return "i32";
    case ScalarType::I64: return "i64";
    case ScalarType::U64: return "u64";
    case ScalarType::U8: return "u8";
  }
  return "?";
}

std::string_view indirection_name(Indirection i) {
  switch (i) {
    case Indirection::Value: return "value";
    case Indirection::HostArray: return "host-array";
    case Indirection::DeviceArray: return "device-array";
    case Indirection::FlashBufferRef: return "flash-buffer";
  }
  return "?";
}

std::string tag_name(ArgTypeTag tag) {
  return std::string(scalar_name(tag.base)) + " " + std::string(indirection_name(tag.indirection));
}

std::string_view errc_name(errc code) {
  switch (code) {
    case errc::invalid_descriptor: return "InvalidDescriptor";
    case errc::no_match: return "NoMatch";
    case errc::invalid_dim_spec: return "InvalidDimSpec";
    case errc::empty_index_space: return "EmptyIndexSpace";
    case errc::bad_dimension: return "BadDimension";
    case errc::partition_out_of_bounds: return "PartitionOutOfBounds";
    case errc::non_rectangular: return "NonRectangular";
    case errc::allocation_failure: return "AllocationFailure";
    case errc::out_of_bounds: return "OutOfBounds";
    case errc::overlap_conflict: return "OverlapConflict";
    case errc::unknown_runtime_key: return "UnknownRuntimeKey";
    case errc::kernel_resolution_failure: return "KernelResolutionFailure";
    case errc::unknown_kernel: return "UnknownKernel";
    case errc::size_mismatch: return "SizeMismatch";
    case errc::type_mismatch: return "TypeMismatch";
    case errc::backend_failure: return "BackendFailure";
    case errc::duplicate_backend: return "DuplicateBackend";
    case errc::unresolvable_implementation: return "UnresolvableImplementation";
    case errc::load_failure: return "LoadFailure";
    case errc::symbol_not_found: return "SymbolNotFound";
    case errc::arity_exceeded: return "ArityExceeded";
    case errc::kernel_panic: return "KernelPanic";
    case errc::not_in_kernel: return "NotInKernel";
    case errc::dims_unsupported: return "DimsUnsupported";
    case errc::arena_exhausted: return "ArenaExhausted";
    case errc::io_error: return "IoError";
  }
  return "UnknownError";
}

bool Options::get_bool(const std::string& key, bool fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  if (auto* b = std::get_if<bool>(&it->second)) return *b;
  if (auto* i = std::get_if<int64_t>(&it->second)) return *i != 0;
  return fallback;
}

int64_t Options::get_int(const std::string& key, int64_t fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  if (auto* i = std::get_if<int64_t>(&it->second)) return *i;
  if (auto* b = std::get_if<bool>(&it->second)) return *b ? 1 : 0;
  if (auto* d = std::get_if<double>(&it->second)) return static_cast<int64_t>(*d);
  return fallback;
}

double Options::get_double(const std::string& key, double fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  if (auto* d = std::get_if<double>(&it->second)) return *d;
  if (auto* i = std::get_if<int64_t>(&it->second)) return static_cast<double>(*i);
  return fallback;
}

std::string Options::get_string(const std::string& key, const std::string& fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  if (auto* s = std::get_if<std::string>(&it->second)) return *s;
  return fallback;
}

}  // namespace flashlite
