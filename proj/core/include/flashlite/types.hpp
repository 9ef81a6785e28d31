#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>

namespace flashlite {

/// Element scalar type of a kernel argument.
enum class ScalarType : uint8_t { F32, F64, I32, I64, U64, U8 };

/// How an argument reaches the kernel.
enum class Indirection : uint8_t { Value, HostArray, DeviceArray, FlashBufferRef };

struct ArgTypeTag {
  ScalarType base = ScalarType::F32;
  Indirection indirection = Indirection::Value;

  bool operator==(const ArgTypeTag&) const = default;

  bool is_array_like() const { return indirection != Indirection::Value; }
};

size_t scalar_size(ScalarType t);
std::string_view scalar_name(ScalarType t);
std::string_view indirection_name(Indirection i);
std::string tag_name(ArgTypeTag tag);

/// Access class assigned to a call-site argument.
enum class AccessMode : uint8_t { ReadOnly, ReadWrite, WriteOnly };

/// Where a kernel implementation comes from: a separately loaded plugin file
/// (ExternalBinary) or the in-process registry populated at startup
/// (InternalBinary).
enum class KernelKind : uint8_t { ExternalBinary, InternalBinary };

/// Key-value metadata attached to runtime handles and submissions. Later
/// writes win on merge; unknown keys are stored untouched so future backends
/// can pick them up.
using OptionValue = std::variant<bool, int64_t, double, std::string>;

class Options {
 public:
  Options() = default;
  Options(std::initializer_list<std::pair<const std::string, OptionValue>> init) : kv_(init) {}

  void merge(const Options& later) {
    for (const auto& [k, v] : later.kv_) kv_[k] = v;
  }

  void set(const std::string& key, OptionValue v) { kv_[key] = std::move(v); }

  bool contains(const std::string& key) const { return kv_.count(key) != 0; }

  bool get_bool(const std::string& key, bool fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;

  size_t size() const { return kv_.size(); }
  auto begin() const { return kv_.begin(); }
  auto end() const { return kv_.end(); }

 private:
  std::map<std::string, OptionValue> kv_;
};

}  // namespace flashlite
