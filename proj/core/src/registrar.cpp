#include <algorithm>
#include <mutex>

#include "flashlite/backend.hpp"
#include "flashlite/errors.hpp"

namespace flashlite {

StatusHandle StatusHandle::make() {
  StatusHandle h;
  h.block_ = std::make_shared<Block>();
  return h;
}

void StatusHandle::fulfill(ActionState s, std::string reason) const {
  std::lock_guard lock(block_->m);
  if (block_->status.state != ActionState::Pending) return;  // terminal states stick
  block_->status.state = s;
  block_->status.reason = std::move(reason);
  block_->cv.notify_all();
}

Status StatusHandle::wait_terminal() const {
  std::unique_lock lock(block_->m);
  block_->cv.wait(lock, [&] { return block_->status.state != ActionState::Pending; });
  return block_->status;
}

Status StatusHandle::peek() const {
  std::lock_guard lock(block_->m);
  return block_->status;
}

Registrar& Registrar::instance() {
  static Registrar r;
  return r;
}

void Registrar::register_backend(const std::string& id, BackendFactory factory, DeviceClass cls) {
  std::lock_guard lock(mu_);
  for (const Entry& e : entries_)
    if (e.id == id) raise(errc::duplicate_backend, "backend '" + id + "' already registered");
  entries_.push_back(Entry{id, std::move(factory), cls, nullptr});
}

std::shared_ptr<Backend> Registrar::lookup(const std::string& id) {
  std::lock_guard lock(mu_);
  for (Entry& e : entries_) {
    if (e.id != id) continue;
    if (!e.instance) e.instance = e.factory();
    return e.instance;
  }
  raise(errc::unknown_runtime_key, "no backend registered under '" + id + "'");
}

bool Registrar::contains(const std::string& id) const {
  std::lock_guard lock(mu_);
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Entry& e) { return e.id == id; });
}

std::vector<std::shared_ptr<Backend>> Registrar::resolve(const std::string& key) {
  register_builtin_backends();

  std::vector<std::string> ids;
  {
    std::lock_guard lock(mu_);
    auto take = [&](auto pred) {
      for (const Entry& e : entries_)
        if (pred(e)) ids.push_back(e.id);
    };
    if (key == "ALL") {
      take([](const Entry& e) { return e.cls != DeviceClass::Other; });
    } else if (key == "ALL_CPU") {
      take([](const Entry& e) { return e.cls == DeviceClass::Cpu; });
    } else if (key == "ALL_ACCEL") {
      take([](const Entry& e) { return e.cls == DeviceClass::Accelerator; });
    } else if (key == "SIM_ACCEL") {
      take([](const Entry& e) { return e.id.rfind("SIM_ACCEL", 0) == 0; });
    } else {
      take([&](const Entry& e) { return e.id == key; });
      if (ids.empty())
        raise(errc::unknown_runtime_key, "unsupported runtime key '" + key + "'");
    }
  }
  if (ids.empty()) raise(errc::unknown_runtime_key, "no backends match key '" + key + "'");

  std::vector<std::shared_ptr<Backend>> out;
  out.reserve(ids.size());
  for (const std::string& id : ids) out.push_back(lookup(id));
  return out;
}

std::vector<std::string> Registrar::registered_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const Entry& e : entries_) out.push_back(e.id);
  return out;
}

}  // namespace flashlite
