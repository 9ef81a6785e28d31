#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "flashlite/kernel_api.hpp"

namespace flashlite {

/// A resolved kernel entry point plus the declared argument count it was
/// resolved for (the cooperative index-table argument is not included).
struct ResolvedKernel {
  void* fn = nullptr;
  size_t arity = 0;
};

/// Calls `fn` with `n` machine-word arguments through the fixed-width
/// trampoline family. n covers declared args plus, for cooperative kernels,
/// the trailing index-table pointer.
void invoke_kernel(void* fn, const KernelWord* words, size_t n);

/// One loaded shared library. Stays loaded for the process lifetime once
/// any kernel from it has been cached.
class KernelPlugin {
 public:
  explicit KernelPlugin(std::string path);
  ~KernelPlugin();

  KernelPlugin(const KernelPlugin&) = delete;
  KernelPlugin& operator=(const KernelPlugin&) = delete;

  const std::string& path() const { return path_; }

  /// Resolution order: exact unmangled label, then a demangled scan of the
  /// library's dynamic symbols (free functions inside namespaces), then the
  /// optional `flash_manifest` label -> decorated-name table.
  ResolvedKernel resolve(const std::string& label, size_t arity);

 private:
  void* find_symbol(const std::string& label);
  void load_manifest();
  void scan_exported_symbols();

  std::string path_;
  void* handle_ = nullptr;
  std::mutex mu_;
  std::map<std::string, void*> cache_;
  std::map<std::string, std::string> manifest_;        // label -> decorated name
  std::vector<std::pair<std::string, std::string>> exported_;  // demangled -> raw
  bool scanned_ = false;
  bool manifest_loaded_ = false;
};

/// Per-path plugin cache; loading the same path twice reuses the handle.
class PluginLoader {
 public:
  static PluginLoader& instance();

  std::shared_ptr<KernelPlugin> load(const std::string& path);

  /// Number of dlopen calls actually performed (cache misses).
  uint64_t loads_performed() const;

 private:
  PluginLoader() = default;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<KernelPlugin>> plugins_;
  uint64_t loads_ = 0;
};

inline constexpr const char* kInternalLocator = "internal";

/// In-process kernel registry backing KernelKind::InternalBinary. Later
/// registrations under the same label override earlier ones.
void register_internal_kernel(const std::string& label, void* fn);

template <typename... A>
void register_internal_kernel(const std::string& label, void (*fn)(A...)) {
  static_assert(sizeof...(A) <= kMaxKernelArgs + 1, "kernel exceeds the argument limit");
  register_internal_kernel(label, reinterpret_cast<void*>(fn));
}

void* lookup_internal_kernel(const std::string& label);

/// Resolves `label` through a locator: kInternalLocator consults the
/// in-process registry, anything else is treated as a plugin path.
ResolvedKernel resolve_implementation(const std::string& label, const std::string& locator,
                                      size_t arity);

}  // namespace flashlite
