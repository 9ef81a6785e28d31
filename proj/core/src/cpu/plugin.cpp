#include "flashlite/plugin.hpp"

#include <dlfcn.h>

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <utility>

#include "flashlite/errors.hpp"

#if defined(__linux__)
#include <cxxabi.h>
#include <elf.h>
#endif

namespace flashlite {

namespace {

using W = KernelWord;

template <size_t>
using slot_t = W;

template <size_t... I>
void call_n(void* fn, const W* w, std::index_sequence<I...>) {
  using Fn = void (*)(slot_t<I>...);
  reinterpret_cast<Fn>(fn)(w[I]...);
}

}  // namespace

void invoke_kernel(void* fn, const KernelWord* w, size_t n) {
  switch (n) {
    case 0: call_n(fn, w, std::make_index_sequence<0>{}); break;
    case 1: call_n(fn, w, std::make_index_sequence<1>{}); break;
    case 2: call_n(fn, w, std::make_index_sequence<2>{}); break;
    case 3: call_n(fn, w, std::make_index_sequence<3>{}); break;
    case 4: call_n(fn, w, std::make_index_sequence<4>{}); break;
    case 5: call_n(fn, w, std::make_index_sequence<5>{}); break;
    case 6: call_n(fn, w, std::make_index_sequence<6>{}); break;
    case 7: call_n(fn, w, std::make_index_sequence<7>{}); break;
    case 8: call_n(fn, w, std::make_index_sequence<8>{}); break;
    case 9: call_n(fn, w, std::make_index_sequence<9>{}); break;
    case 10: call_n(fn, w, std::make_index_sequence<10>{}); break;
    case 11: call_n(fn, w, std::make_index_sequence<11>{}); break;
    default:
      raise(errc::arity_exceeded, "trampoline supports at most " +
                                      std::to_string(kMaxKernelArgs) + " arguments");
  }
}

KernelPlugin::KernelPlugin(std::string path) : path_(std::move(path)) {
  handle_ = dlopen(path_.c_str(), RTLD_NOW | RTLD_LOCAL);
  if (!handle_) {
    const char* err = dlerror();
    raise(errc::load_failure, "dlopen('" + path_ + "'): " + (err ? err : "unknown error"));
  }
}

KernelPlugin::~KernelPlugin() {
  // Libraries stay loaded: cached kernel pointers must outlive this object.
}

void KernelPlugin::load_manifest() {
  if (manifest_loaded_) return;
  manifest_loaded_ = true;
  using ManifestFn = const char* (*)();
  auto fn = reinterpret_cast<ManifestFn>(dlsym(handle_, "flash_manifest"));
  if (!fn) return;
  std::istringstream in(fn());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string label, decorated;
    if (ls >> label >> decorated) manifest_[label] = decorated;
  }
}

void KernelPlugin::scan_exported_symbols() {
  if (scanned_) return;
  scanned_ = true;
#if defined(__linux__)
  std::ifstream in(path_, std::ios::binary);
  if (!in) return;
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(Elf64_Ehdr)) return;

  const auto* eh = reinterpret_cast<const Elf64_Ehdr*>(bytes.data());
  if (std::memcmp(eh->e_ident, ELFMAG, SELFMAG) != 0) return;
  if (eh->e_ident[EI_CLASS] != ELFCLASS64) return;

  const auto* sh = reinterpret_cast<const Elf64_Shdr*>(bytes.data() + eh->e_shoff);
  for (size_t s = 0; s < eh->e_shnum; ++s) {
    if (sh[s].sh_type != SHT_DYNSYM) continue;
    const auto* syms = reinterpret_cast<const Elf64_Sym*>(bytes.data() + sh[s].sh_offset);
    size_t count = sh[s].sh_size / sizeof(Elf64_Sym);
    const char* strtab = bytes.data() + sh[sh[s].sh_link].sh_offset;
    for (size_t i = 0; i < count; ++i) {
      if (ELF64_ST_TYPE(syms[i].st_info) != STT_FUNC) continue;
      if (syms[i].st_shndx == SHN_UNDEF) continue;
      const char* raw = strtab + syms[i].st_name;
      if (!*raw) continue;
      int status = 0;
      char* dem = abi::__cxa_demangle(raw, nullptr, nullptr, &status);
      if (status == 0 && dem) {
        std::string qualified(dem);
        // Keep the fully qualified name, parameters stripped.
        if (auto paren = qualified.find('('); paren != std::string::npos)
          qualified.resize(paren);
        exported_.emplace_back(qualified, raw);
      }
      free(dem);
    }
  }
#endif
}

void* KernelPlugin::find_symbol(const std::string& label) {
  // 1. Exact unmangled export.
  if (void* fn = dlsym(handle_, label.c_str())) return fn;

  // 2. Demangled scan: `label` or any `ns::...::label` free function.
  scan_exported_symbols();
  for (const auto& [qualified, raw] : exported_) {
    if (qualified == label || qualified.ends_with("::" + label))
      if (void* fn = dlsym(handle_, raw.c_str())) return fn;
  }

  // 3. Decorated-name table from the plugin's manifest.
  load_manifest();
  if (auto it = manifest_.find(label); it != manifest_.end())
    if (void* fn = dlsym(handle_, it->second.c_str())) return fn;

  return nullptr;
}

ResolvedKernel KernelPlugin::resolve(const std::string& label, size_t arity) {
  if (arity > kMaxKernelArgs)
    raise(errc::arity_exceeded, "kernel '" + label + "' declares " + std::to_string(arity) +
                                    " arguments; the limit is " + std::to_string(kMaxKernelArgs));
  std::lock_guard lock(mu_);
  auto it = cache_.find(label);
  void* fn = it != cache_.end() ? it->second : find_symbol(label);
  if (!fn)
    raise(errc::symbol_not_found, "no symbol for kernel '" + label + "' in " + path_);
  cache_[label] = fn;
  return ResolvedKernel{fn, arity};
}

PluginLoader& PluginLoader::instance() {
  static PluginLoader loader;
  return loader;
}

std::shared_ptr<KernelPlugin> PluginLoader::load(const std::string& path) {
  std::lock_guard lock(mu_);
  auto it = plugins_.find(path);
  if (it != plugins_.end()) return it->second;
  auto plugin = std::make_shared<KernelPlugin>(path);
  ++loads_;
  plugins_[path] = plugin;
  return plugin;
}

uint64_t PluginLoader::loads_performed() const {
  std::lock_guard lock(mu_);
  return loads_;
}

namespace {

std::mutex g_internal_mu;
std::map<std::string, void*>& internal_registry() {
  static std::map<std::string, void*> reg;
  return reg;
}

}  // namespace

void register_internal_kernel(const std::string& label, void* fn) {
  std::lock_guard lock(g_internal_mu);
  internal_registry()[label] = fn;
}

void* lookup_internal_kernel(const std::string& label) {
  std::lock_guard lock(g_internal_mu);
  auto& reg = internal_registry();
  auto it = reg.find(label);
  return it == reg.end() ? nullptr : it->second;
}

ResolvedKernel resolve_implementation(const std::string& label, const std::string& locator,
                                      size_t arity) {
  if (arity > kMaxKernelArgs)
    raise(errc::arity_exceeded, "kernel '" + label + "' declares " + std::to_string(arity) +
                                    " arguments; the limit is " + std::to_string(kMaxKernelArgs));
  if (locator.empty() || locator == kInternalLocator) {
    void* fn = lookup_internal_kernel(label);
    if (!fn)
      raise(errc::symbol_not_found, "kernel '" + label + "' not in the in-process registry");
    return ResolvedKernel{fn, arity};
  }
  return PluginLoader::instance().load(locator)->resolve(label, arity);
}

}  // namespace flashlite
