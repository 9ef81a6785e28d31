#include "flashlite/errors.hpp"
#include "flashlite/kernel_api.hpp"

namespace flashlite {

namespace detail {

WorkerContext*& current_context() {
  thread_local WorkerContext* ctx = nullptr;
  return ctx;
}

}  // namespace detail

int64_t get_index(int dim) {
  detail::WorkerContext* ctx = detail::current_context();
  if (!ctx) raise(errc::not_in_kernel, "get_index called outside a kernel invocation");
  if (dim < 1 || static_cast<size_t>(dim) > ctx->dims)
    raise(errc::bad_dimension, "dimension " + std::to_string(dim) + " outside the " +
                                   std::to_string(ctx->dims) + "-dimensional launch");
  return ctx->row[dim - 1];
}

size_t get_slot() {
  detail::WorkerContext* ctx = detail::current_context();
  if (!ctx) raise(errc::not_in_kernel, "get_slot called outside a kernel invocation");
  return ctx->slot;
}

size_t get_dims() {
  detail::WorkerContext* ctx = detail::current_context();
  if (!ctx) raise(errc::not_in_kernel, "get_dims called outside a kernel invocation");
  return ctx->dims;
}

}  // namespace flashlite
