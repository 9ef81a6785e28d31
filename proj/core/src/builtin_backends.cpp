#include <mutex>

#include "flashlite/backend.hpp"
#include "flashlite/cpu_backend.hpp"
#include "flashlite/sim_backend.hpp"

namespace flashlite {

void register_builtin_backends() {
  static std::once_flag once;
  std::call_once(once, [] {
    Registrar::instance().register_backend(
        "ALL_CPU", [] { return CpuBackend::shared(); }, DeviceClass::Cpu);
    sim::ensure_devices(2);
  });
}

}  // namespace flashlite
