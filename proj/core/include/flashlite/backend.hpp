#pragma once

#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "flashlite/buffer.hpp"
#include "flashlite/index_space.hpp"
#include "flashlite/kernel_desc.hpp"
#include "flashlite/types.hpp"

namespace flashlite {

enum class ActionState : uint8_t { Pending, Complete, Failed };

struct Status {
  ActionState state = ActionState::Pending;
  std::string reason;
};

/// Opaque completion token. Terminal states stick: once Complete or Failed,
/// every later wait observes the same answer.
class StatusHandle {
 public:
  StatusHandle() = default;

  static StatusHandle make();

  bool valid() const { return block_ != nullptr; }
  void fulfill(ActionState s, std::string reason = {}) const;
  Status wait_terminal() const;
  Status peek() const;

  /// Stable identity of the underlying completion block.
  const void* token() const { return block_.get(); }

 private:
  struct Block {
    std::mutex m;
    std::condition_variable cv;
    Status status;
  };
  std::shared_ptr<Block> block_;
};

/// One type-erased kernel argument as a backend receives it: a bit-copied
/// scalar or an array region with global element bounds.
struct ActionArg {
  ArgTypeTag tag;
  AccessMode access = AccessMode::ReadWrite;
  uint64_t scalar_bits = 0;                  // Value payload
  void* host_ptr = nullptr;                  // raw/container array base
  std::shared_ptr<FlashBuffer> buffer;       // FlashBuffer payload
  uint64_t count = 0;                        // element count of the full argument
  Range bounds{0, -1};                       // inclusive element range this action touches

  bool is_array() const { return tag.indirection != Indirection::Value; }
  uint64_t bound_count() const {
    return bounds.second < bounds.first ? 0 : static_cast<uint64_t>(bounds.second - bounds.first + 1);
  }
};

/// The unit a backend executes: a dispatch descriptor, sized type-erased
/// arguments, and an index table (whole launch or one partition slice).
struct Action {
  RuntimeKernelDesc desc;
  std::vector<ActionArg> args;
  IndexTable table;
  bool subaction = false;
  bool cooperative = false;  // set whenever sort_by/group_by/part_by present
  Options options;           // handle options overlaid with submission options
  uint64_t submission_seq = 0;
  uint32_t partition_id = 0;
};

struct BackendCaps {
  size_t max_dims = SIZE_MAX;
  bool coherent_memory = true;
};

/// The close-ended contract every device runtime implements. The frontend
/// compiles against nothing else.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual const std::string& id() const = 0;
  virtual BackendCaps capabilities() const = 0;

  /// Binds a kernel label to an implementation locator. Re-registering a
  /// label overrides the previous binding for later executes.
  virtual void register_kernel(const std::string& label, const std::string& locator) = 0;

  /// Non-blocking: queues the action and returns immediately.
  virtual StatusHandle execute(Action a) = 0;

  /// Blocks until the action reaches a terminal state. Idempotent.
  virtual Status wait(const StatusHandle& h) = 0;
};

enum class DeviceClass : uint8_t { Cpu, Accelerator, Other };

using BackendFactory = std::function<std::shared_ptr<Backend>()>;

/// Process-wide table of available device runtimes. Backends self-register
/// a factory under a unique id; the frontend resolves runtime keys against
/// it without knowing any backend type.
class Registrar {
 public:
  static Registrar& instance();

  void register_backend(const std::string& id, BackendFactory factory,
                        DeviceClass cls = DeviceClass::Other);

  /// Constructs (once) and returns the backend registered under `id`.
  std::shared_ptr<Backend> lookup(const std::string& id);

  bool contains(const std::string& id) const;

  /// Resolves a runtime key to an ordered backend list:
  ///   ALL        -> every cpu/accelerator backend, registration order
  ///   ALL_CPU    -> cpu-class backends
  ///   ALL_ACCEL  -> accelerator-class backends
  ///   SIM_ACCEL  -> ids with the SIM_ACCEL prefix
  ///   <id>       -> exact registered id
  std::vector<std::shared_ptr<Backend>> resolve(const std::string& key);

  std::vector<std::string> registered_ids() const;

 private:
  Registrar() = default;

  struct Entry {
    std::string id;
    BackendFactory factory;
    DeviceClass cls;
    std::shared_ptr<Backend> instance;
  };

  mutable std::mutex mu_;
  std::vector<Entry> entries_;  // registration order
};

/// Registers the built-in device runtimes (CPU, then the simulated
/// accelerators) exactly once, in that order.
void register_builtin_backends();

}  // namespace flashlite
