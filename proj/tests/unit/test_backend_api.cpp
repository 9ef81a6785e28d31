#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <flashlite/backend.hpp>
#include <flashlite/errors.hpp>

#include "probe_backend.hpp"

#include <thread>

using namespace flashlite;
using namespace flashlite::testing;

namespace {

/// Minimal backend proving the contract is closed: defined entirely in this
/// separately linked test binary, registered with zero core changes.
class NullBackend : public Backend {
 public:
  explicit NullBackend(std::string id) : id_(std::move(id)) {}
  const std::string& id() const override { return id_; }
  BackendCaps capabilities() const override { return {2, true}; }
  void register_kernel(const std::string&, const std::string&) override {}
  StatusHandle execute(Action) override {
    StatusHandle h = StatusHandle::make();
    h.fulfill(ActionState::Complete);
    return h;
  }
  Status wait(const StatusHandle& h) override { return h.wait_terminal(); }

 private:
  std::string id_;
};

}  // namespace

TEST_CASE("registrar rejects duplicates and resolves ids") {
  Registrar& reg = Registrar::instance();
  reg.register_backend("NULL_A", [] { return std::make_shared<NullBackend>("NULL_A"); });
  try {
    reg.register_backend("NULL_A", [] { return std::make_shared<NullBackend>("NULL_A"); });
    FAIL("expected DuplicateBackend");
  } catch (const flash_error& e) {
    CHECK(e.code() == errc::duplicate_backend);
  }

  auto b = reg.lookup("NULL_A");
  REQUIRE(b);
  CHECK(b->id() == "NULL_A");
  CHECK(b.get() == reg.lookup("NULL_A").get());  // constructed once, cached
}

TEST_CASE("runtime keys select backends in registration order") {
  Registrar& reg = Registrar::instance();

  auto cpu = reg.resolve("ALL_CPU");
  REQUIRE(cpu.size() == 1);
  CHECK(cpu[0]->id() == "ALL_CPU");
  CHECK(cpu[0]->capabilities().coherent_memory);

  auto sims = reg.resolve("SIM_ACCEL");
  REQUIRE(sims.size() == 2);
  CHECK(sims[0]->id() == "SIM_ACCEL:0");
  CHECK(sims[1]->id() == "SIM_ACCEL:1");
  CHECK_FALSE(sims[0]->capabilities().coherent_memory);

  auto accel = reg.resolve("ALL_ACCEL");
  REQUIRE(accel.size() == 2);

  auto all = reg.resolve("ALL");
  REQUIRE(all.size() == 3);
  CHECK(all[0]->id() == "ALL_CPU");
  CHECK(all[1]->id() == "SIM_ACCEL:0");
  CHECK(all[2]->id() == "SIM_ACCEL:1");

  // Device-class Other backends stay out of ALL but resolve by exact id.
  reg.register_backend("NULL_B", [] { return std::make_shared<NullBackend>("NULL_B"); });
  CHECK(reg.resolve("ALL").size() == 3);
  CHECK(reg.resolve("NULL_B").size() == 1);

  try {
    reg.resolve("NVIDIA_GPU");
    FAIL("expected UnknownRuntimeKey");
  } catch (const flash_error& e) {
    CHECK(e.code() == errc::unknown_runtime_key);
  }
}

TEST_CASE("status handles are idempotent after the terminal state") {
  StatusHandle h = StatusHandle::make();
  CHECK(h.peek().state == ActionState::Pending);

  std::thread t([h] { h.fulfill(ActionState::Complete, "done"); });
  Status s1 = h.wait_terminal();
  Status s2 = h.wait_terminal();
  t.join();
  CHECK(s1.state == ActionState::Complete);
  CHECK(s2.state == ActionState::Complete);

  // Terminal states stick: a later Failed is ignored.
  h.fulfill(ActionState::Failed, "too late");
  CHECK(h.wait_terminal().state == ActionState::Complete);
}

TEST_CASE("probe backend completes on wait and logs order") {
  auto probe = ProbeBackend::install();
  probe->clear();

  Action a;
  a.desc.label = "anything";
  a.submission_seq = 7;
  StatusHandle h = probe->execute(std::move(a));
  CHECK(probe->execute_count() == 1);
  CHECK(h.peek().state == ActionState::Pending);

  Status s = probe->wait(h);
  CHECK(s.state == ActionState::Complete);
  auto events = probe->events();
  REQUIRE(events.size() == 2);
  CHECK(events[0].kind == ProbeBackend::Event::Kind::Dispatch);
  CHECK(events[1].kind == ProbeBackend::Event::Kind::Complete);
  CHECK(events[0].submission_seq == 7);
}
