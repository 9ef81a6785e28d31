#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <flashlite/errors.hpp>
#include <flashlite/kernel_desc.hpp>

#include <random>

using namespace flashlite;

namespace {

ArgTypeTag tag(ScalarType b, Indirection i) { return ArgTypeTag{b, i}; }

KernelDescriptor table2_descriptor() {
  // sort_by<3> elementwise multiply, two read-only inputs and one output.
  AttributeSet attrs;
  attrs.sort_by = {3};
  return make_descriptor("elmatmult_generic", KernelKind::InternalBinary, 2,
                         {tag(ScalarType::F32, Indirection::HostArray),
                          tag(ScalarType::F32, Indirection::HostArray),
                          tag(ScalarType::F32, Indirection::HostArray)},
                         attrs);
}

}  // namespace

TEST_CASE("make_descriptor validates and preserves fields") {
  KernelDescriptor d = table2_descriptor();
  CHECK(d.label == "elmatmult_generic");
  CHECK(d.input_arity == 2);
  CHECK(d.arg_types.size() == 3);
  CHECK(d.attributes.sort_by == std::vector<int>{3});

  // Zero-argument blank kernel is valid.
  KernelDescriptor blank = make_descriptor("k", KernelKind::InternalBinary, 0, {});
  CHECK(blank.arg_types.empty());

  // Arity exceeding the argument count is rejected.
  CHECK_THROWS_WITH_AS(
      make_descriptor("k", KernelKind::InternalBinary, 3, {tag(ScalarType::F32, Indirection::Value)}),
      doctest::Contains("arity"), flash_error);

  CHECK_THROWS_AS(make_descriptor("", KernelKind::InternalBinary, 0, {}), flash_error);

  AttributeSet dup;
  dup.sort_by = {2, 2};
  CHECK_THROWS_AS(make_descriptor("k", KernelKind::InternalBinary, 0, {}, dup), flash_error);

  AttributeSet zero_dim;
  zero_dim.sort_by = {0};
  CHECK_THROWS_AS(make_descriptor("k", KernelKind::InternalBinary, 0, {}, zero_dim), flash_error);
}

TEST_CASE("to_runtime_descriptor keeps every field except the hint") {
  KernelDescriptor d = table2_descriptor();
  d.implementation_hint = "some/plugin.so";
  RuntimeKernelDesc rd = to_runtime_descriptor(d);
  CHECK(rd.label == d.label);
  CHECK(rd.kind == d.kind);
  CHECK(rd.input_arity == d.input_arity);
  CHECK(rd.arg_types == d.arg_types);
  CHECK(rd.attributes.sort_by == d.attributes.sort_by);

  KernelDescriptor empty = make_descriptor("k", KernelKind::InternalBinary, 0, {});
  RuntimeKernelDesc rde = to_runtime_descriptor(empty);
  CHECK(rde.attributes.empty());
}

TEST_CASE("erasure round-trip over random descriptors") {
  std::mt19937_64 rng(0x5eed);
  const ScalarType bases[] = {ScalarType::F32, ScalarType::F64, ScalarType::I32,
                              ScalarType::I64, ScalarType::U64, ScalarType::U8};
  const Indirection inds[] = {Indirection::Value, Indirection::HostArray,
                              Indirection::DeviceArray, Indirection::FlashBufferRef};

  for (int trial = 0; trial < 100; ++trial) {
    size_t n_args = rng() % 6;
    std::vector<ArgTypeTag> args;
    for (size_t i = 0; i < n_args; ++i)
      args.push_back(tag(bases[rng() % 6], inds[rng() % 4]));

    AttributeSet attrs;
    if (rng() % 2) attrs.sort_by = {static_cast<int>(1 + rng() % 3)};
    if (rng() % 2) attrs.group_by = GroupBySpec{static_cast<int>(1 + rng() % 3), std::nullopt};
    if (rng() % 2) attrs.searchable = rng() % 2 ? SearchMode::Exact : SearchMode::Fuzzy;

    size_t arity = n_args == 0 ? 0 : rng() % (n_args + 1);
    KernelDescriptor d =
        make_descriptor("k" + std::to_string(trial), KernelKind::ExternalBinary, arity, args,
                        attrs, "plugin.so");
    RuntimeKernelDesc rd = to_runtime_descriptor(d);

    CHECK(rd.label == d.label);
    CHECK(rd.kind == d.kind);
    CHECK(rd.input_arity == d.input_arity);
    CHECK(rd.arg_types == d.arg_types);
    CHECK(rd.attributes.sort_by == d.attributes.sort_by);
    CHECK(rd.attributes.group_by == d.attributes.group_by);
    CHECK(rd.attributes.searchable == d.attributes.searchable);
  }
}

TEST_CASE("match_implementations exact mode") {
  AttributeSet searchable;
  searchable.searchable = SearchMode::Exact;
  KernelDescriptor d = make_descriptor("copy", KernelKind::InternalBinary, 1,
                                       {tag(ScalarType::F32, Indirection::HostArray),
                                        tag(ScalarType::F32, Indirection::HostArray)},
                                       searchable);
  RuntimeKernelDesc rd = to_runtime_descriptor(d);

  std::vector<ImplRecord> registry{
      {"copy",
       {tag(ScalarType::F32, Indirection::HostArray), tag(ScalarType::F32, Indirection::HostArray)},
       "internal"},
      {"copy",
       {tag(ScalarType::F64, Indirection::HostArray), tag(ScalarType::F64, Indirection::HostArray)},
       "internal"},
      {"other", {}, "internal"},
  };

  auto matches = match_implementations(rd, registry);
  REQUIRE(matches.size() == 1);
  CHECK(matches[0].registry_index == 0);
  for (const auto& c : matches[0].plan) CHECK(c.is_identity());

  // One differing tag: no exact match.
  registry[0].arg_types[1] = tag(ScalarType::F64, Indirection::HostArray);
  registry[1].arg_types = registry[0].arg_types;
  CHECK(match_implementations(rd, registry).empty());
}

TEST_CASE("match_implementations fuzzy widening and indirection coercions") {
  AttributeSet searchable;
  searchable.searchable = SearchMode::Fuzzy;
  KernelDescriptor d = make_descriptor(
      "copy", KernelKind::InternalBinary, 1,
      {tag(ScalarType::F32, Indirection::HostArray), tag(ScalarType::F32, Indirection::HostArray)},
      searchable);
  RuntimeKernelDesc rd = to_runtime_descriptor(d);

  std::vector<ImplRecord> registry{
      {"copy",
       {tag(ScalarType::F64, Indirection::DeviceArray),
        tag(ScalarType::F64, Indirection::DeviceArray)},
       "internal"},
  };
  auto matches = match_implementations(rd, registry);
  REQUIRE(matches.size() == 1);
  CHECK(matches[0].plan[0].widen);
  CHECK(matches[0].plan[0].from == Indirection::HostArray);
  CHECK(matches[0].plan[0].to == Indirection::DeviceArray);

  // Narrowing is rejected: F64 descriptor never matches an F32 impl.
  KernelDescriptor wide = make_descriptor(
      "copy", KernelKind::InternalBinary, 1,
      {tag(ScalarType::F64, Indirection::HostArray), tag(ScalarType::F64, Indirection::HostArray)},
      searchable);
  registry[0].arg_types = {tag(ScalarType::F32, Indirection::HostArray),
                           tag(ScalarType::F32, Indirection::HostArray)};
  CHECK(match_implementations(to_runtime_descriptor(wide), registry).empty());

  // Mixed signed/unsigned integer bases never match.
  KernelDescriptor signed_desc =
      make_descriptor("copy", KernelKind::InternalBinary, 1,
                      {tag(ScalarType::I32, Indirection::HostArray),
                       tag(ScalarType::I32, Indirection::HostArray)},
                      searchable);
  registry[0].arg_types = {tag(ScalarType::U64, Indirection::HostArray),
                           tag(ScalarType::U64, Indirection::HostArray)};
  CHECK(match_implementations(to_runtime_descriptor(signed_desc), registry).empty());
}

TEST_CASE("fuzzy result set contains the exact result set") {
  std::mt19937_64 rng(0xfade);
  const ScalarType bases[] = {ScalarType::F32, ScalarType::F64, ScalarType::I32,
                              ScalarType::I64, ScalarType::U64, ScalarType::U8};
  const Indirection inds[] = {Indirection::Value, Indirection::HostArray,
                              Indirection::DeviceArray, Indirection::FlashBufferRef};

  auto random_tags = [&](size_t n) {
    std::vector<ArgTypeTag> tags;
    for (size_t i = 0; i < n; ++i) tags.push_back(tag(bases[rng() % 6], inds[rng() % 4]));
    return tags;
  };

  for (int trial = 0; trial < 200; ++trial) {
    size_t n_args = 1 + rng() % 3;
    std::vector<ImplRecord> registry;
    for (int r = 0; r < 6; ++r)
      registry.push_back({"k", random_tags(n_args), "internal"});

    AttributeSet exact_attrs, fuzzy_attrs;
    exact_attrs.searchable = SearchMode::Exact;
    fuzzy_attrs.searchable = SearchMode::Fuzzy;
    auto tags = random_tags(n_args);
    auto exact_desc = to_runtime_descriptor(
        make_descriptor("k", KernelKind::InternalBinary, 0, tags, exact_attrs));
    auto fuzzy_desc = to_runtime_descriptor(
        make_descriptor("k", KernelKind::InternalBinary, 0, tags, fuzzy_attrs));

    auto exact = match_implementations(exact_desc, registry);
    auto fuzzy = match_implementations(fuzzy_desc, registry);

    for (const auto& e : exact) {
      bool found = false;
      for (const auto& f : fuzzy) found |= f.registry_index == e.registry_index;
      CHECK(found);
    }
  }
}
