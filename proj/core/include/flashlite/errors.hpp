#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace flashlite {

/// Every failure the runtime can report. Tests match on the code, not the
/// message text.
enum class errc {
  invalid_descriptor,
  no_match,
  invalid_dim_spec,
  empty_index_space,
  bad_dimension,
  partition_out_of_bounds,
  non_rectangular,
  allocation_failure,
  out_of_bounds,
  overlap_conflict,
  unknown_runtime_key,
  kernel_resolution_failure,
  unknown_kernel,
  size_mismatch,
  type_mismatch,
  backend_failure,
  duplicate_backend,
  unresolvable_implementation,
  load_failure,
  symbol_not_found,
  arity_exceeded,
  kernel_panic,
  not_in_kernel,
  dims_unsupported,
  arena_exhausted,
  io_error,
};

std::string_view errc_name(errc code);

class flash_error : public std::runtime_error {
 public:
  flash_error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& what) {
  throw flash_error(code, what);
}

}  // namespace flashlite
