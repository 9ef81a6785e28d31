#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <flashlite/errors.hpp>
#include <flashlite/index_space.hpp>

#include "oracles.hpp"

#include <random>

using namespace flashlite;
using namespace flashlite::testing;

TEST_CASE("cartesian product, row-major, last dimension fastest") {
  IndexTable t = build_index_table({DimSpec(2u), DimSpec(2u)});
  CHECK(table_rows(t) == std::vector<std::vector<int64_t>>{{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  CHECK(t.barriers.empty());
  CHECK(t.partition_ids.empty());

  IndexTable t2 = build_index_table({DimSpec(4u), DimSpec(1u), DimSpec(2u)});
  auto expected = enumerate_rows({expand_extent(4), expand_extent(1), expand_extent(2)});
  CHECK(table_rows(t2) == expected);
  CHECK(t2.rows() == 8);
}

TEST_CASE("count_by expands arithmetic sequences") {
  IndexTable t = build_index_table({DimSpec(CountBy{0, 2, 3})});
  CHECK(table_rows(t) == std::vector<std::vector<int64_t>>{{0}, {2}, {4}});

  IndexTable neg = build_index_table({DimSpec(CountBy{5, -3, 3})});
  CHECK(table_rows(neg) == std::vector<std::vector<int64_t>>{{5}, {2}, {-1}});

  CHECK_THROWS_AS(build_index_table({DimSpec(CountBy{0, 0, 3})}), flash_error);
  CHECK_THROWS_AS(build_index_table({DimSpec(CountBy{0, 1, 0})}), flash_error);
}

TEST_CASE("empty index spaces are rejected") {
  CHECK_THROWS_AS(build_index_table({}), flash_error);
  try {
    build_index_table({DimSpec(3u), DimSpec(0u)});
    FAIL("expected EmptyIndexSpace");
  } catch (const flash_error& e) {
    CHECK(e.code() == errc::empty_index_space);
  }
}

TEST_CASE("row conservation over random specs") {
  std::mt19937_64 rng(0xabcd);
  for (int trial = 0; trial < 200; ++trial) {
    size_t n_dims = 1 + rng() % 4;
    std::vector<DimSpec> specs;
    uint64_t expect = 1;
    for (size_t d = 0; d < n_dims; ++d) {
      if (rng() % 3 == 0) {
        CountBy cb{static_cast<int64_t>(rng() % 7) - 3,
                   (rng() % 2 ? 1 : -1) * static_cast<int64_t>(1 + rng() % 3), 1 + rng() % 5};
        expect *= cb.count;
        specs.push_back(DimSpec(cb));
      } else {
        uint64_t val = 1 + rng() % 6;
        expect *= val;
        specs.push_back(DimSpec(val));
      }
    }
    CHECK(build_index_table(specs).rows() == expect);
  }
}

TEST_CASE("sort_by Z groups phases and inserts transition barriers") {
  IndexTable t = build_index_table({DimSpec(2u), DimSpec(2u), DimSpec(2u)});
  IndexTable sorted = apply_sort_by(t, {3});

  // All Z=0 rows first, one barrier, then Z=1 rows.
  REQUIRE(sorted.rows() == 8);
  REQUIRE(sorted.barriers == std::vector<size_t>{4});
  for (size_t r = 0; r < 4; ++r) CHECK(sorted.row(r)[2] == 0);
  for (size_t r = 4; r < 8; ++r) CHECK(sorted.row(r)[2] == 1);

  // Stable: within each Z phase, original X-major order is preserved.
  auto oracle = [&] {
    auto rows = table_rows(t);
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a[2] < b[2]; });
    return rows;
  }();
  CHECK(table_rows(sorted) == oracle);
}

TEST_CASE("sort_by edge cases") {
  IndexTable single = build_index_table({DimSpec(1u)});
  IndexTable s = apply_sort_by(single, {1});
  CHECK(s.rows() == 1);
  CHECK(s.barriers.empty());

  // Every consecutive pair transitions: barrier after each row.
  IndexTable three = apply_sort_by(build_index_table({DimSpec(3u)}), {1});
  CHECK(three.barriers == std::vector<size_t>{1, 2});

  CHECK_THROWS_AS(apply_sort_by(single, {2}), flash_error);
  CHECK_THROWS_AS(apply_sort_by(single, {0}), flash_error);
}

TEST_CASE("sort_by is a permutation") {
  std::mt19937_64 rng(0x1234);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<DimSpec> specs;
    size_t n_dims = 1 + rng() % 3;
    for (size_t d = 0; d < n_dims; ++d) specs.push_back(DimSpec(1 + rng() % 4));
    IndexTable t = build_index_table(specs);
    std::vector<int> dims{static_cast<int>(1 + rng() % n_dims)};
    IndexTable sorted = apply_sort_by(t, dims);
    CHECK(same_row_multiset(table_rows(t), table_rows(sorted)));

    // Between consecutive barriers the leading sort dimension is constant.
    size_t lead = dims[0] - 1;
    std::vector<size_t> bounds{0};
    for (size_t b : sorted.barriers) bounds.push_back(b);
    bounds.push_back(sorted.rows());
    for (size_t p = 0; p + 1 < bounds.size(); ++p)
      for (size_t r = bounds[p]; r < bounds[p + 1]; ++r)
        CHECK(sorted.row(r)[lead] == sorted.row(bounds[p])[lead]);
  }
}

TEST_CASE("group_by overrides sort_by barriers") {
  IndexTable t = build_index_table({DimSpec(2u), DimSpec(2u), DimSpec(2u)});
  IndexTable sorted = apply_sort_by(t, {3});
  IndexTable grouped = apply_group_by(sorted, GroupBySpec{2, std::nullopt});

  // Oracle: recompute from scratch — stable sort by Y over the Z-sorted
  // rows, barriers at Y transitions only.
  auto rows = table_rows(sorted);
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a[1] < b[1]; });
  CHECK(table_rows(grouped) == rows);

  std::vector<size_t> expected_barriers;
  for (size_t r = 1; r < rows.size(); ++r)
    if (rows[r][1] != rows[r - 1][1]) expected_barriers.push_back(r);
  CHECK(grouped.barriers == expected_barriers);

  // No Z-transition barriers survive unless they coincide with Y ones.
  for (size_t b : grouped.barriers) CHECK(rows[b][1] != rows[b - 1][1]);
}

TEST_CASE("group_by with explicit transition values") {
  // Empty value list: zero barriers.
  IndexTable t = build_index_table({DimSpec(4u)});
  IndexTable g = apply_group_by(t, GroupBySpec{1, std::vector<int64_t>{}});
  CHECK(g.barriers.empty());

  // Single value: one barrier entering Y=1.
  IndexTable t22 = build_index_table({DimSpec(2u), DimSpec(2u)});
  IndexTable g22 = apply_group_by(t22, GroupBySpec{2, std::vector<int64_t>{1}});
  REQUIRE(g22.barriers.size() == 1);
  size_t b = g22.barriers[0];
  CHECK(g22.row(b)[1] == 1);
  CHECK(g22.row(b - 1)[1] == 0);

  CHECK_THROWS_AS(apply_group_by(t22, GroupBySpec{5, std::nullopt}), flash_error);
}

TEST_CASE("part_by splits rows and evaluates bounds") {
  IndexTable t = build_index_table({DimSpec(8u)});
  PartitionFn identity = named_partition_fn("identity_1d", 1);

  auto [parted, plans] = apply_part_by(t, identity, 2, {8});
  REQUIRE(plans.size() == 2);
  CHECK(plans[0].row_begin == 0);
  CHECK(plans[0].row_end == 4);
  CHECK(plans[1].row_begin == 4);
  CHECK(plans[1].row_end == 8);
  CHECK(plans[0].arg_bounds == std::vector<Range>{{0, 3}});
  CHECK(plans[1].arg_bounds == std::vector<Range>{{4, 7}});
  CHECK(parted.partition_ids == std::vector<uint32_t>{0, 0, 0, 0, 1, 1, 1, 1});

  // Single partition covers the whole table.
  auto [whole, one] = apply_part_by(t, identity, 1, {8});
  REQUIRE(one.size() == 1);
  CHECK(one[0].row_begin == 0);
  CHECK(one[0].row_end == 8);
  CHECK(one[0].arg_bounds == std::vector<Range>{{0, 7}});

  // Bounds beyond the argument size are rejected.
  PartitionFn oob = [](const std::vector<Range>&) { return std::vector<Range>{{0, 1000}}; };
  CHECK_THROWS_AS(apply_part_by(t, oob, 2, {8}), flash_error);

  PartitionFn inverted = [](const std::vector<Range>&) { return std::vector<Range>{{5, 2}}; };
  try {
    apply_part_by(t, inverted, 2, {8});
    FAIL("expected NonRectangular");
  } catch (const flash_error& e) {
    CHECK(e.code() == errc::non_rectangular);
  }
}

TEST_CASE("partition completeness and global-index preservation") {
  std::mt19937_64 rng(0x9876);
  for (int trial = 0; trial < 50; ++trial) {
    size_t n = 1 + rng() % 24;
    IndexTable t = build_index_table({DimSpec(n)});
    uint32_t parts = 1 + rng() % 5;
    auto [parted, plans] = apply_part_by(t, named_partition_fn("identity_1d", 1), parts, {n});

    // Concatenated plan row ranges cover the table exactly, disjoint and
    // in order, with original global values.
    size_t covered = 0;
    for (const auto& plan : plans) {
      CHECK(plan.row_begin == covered);
      covered = plan.row_end;
      for (size_t r = plan.row_begin; r < plan.row_end; ++r)
        CHECK(parted.row(r)[0] == t.row(r)[0]);
    }
    CHECK(covered == t.rows());
  }
}

TEST_CASE("table slicing keeps interior barriers") {
  IndexTable t = build_index_table({DimSpec(8u)});
  t.barriers = {2, 4, 6};
  IndexTable s = slice_table(t, 2, 6);
  CHECK(s.rows() == 4);
  CHECK(s.barriers == std::vector<size_t>{2});
  CHECK(s.row(0)[0] == 2);
  CHECK(s.row(3)[0] == 5);
}

TEST_CASE("padding duplicates the final row") {
  IndexTable t = build_index_table({DimSpec(3u)});
  pad_table(t, 2);
  CHECK(t.rows() == 5);
  CHECK(t.padding_rows == 2);
  CHECK(t.row(3)[0] == 2);
  CHECK(t.row(4)[0] == 2);
}

TEST_CASE("debug dump marks barriers between rows") {
  IndexTable t = build_index_table({DimSpec(2u), DimSpec(2u)});
  IndexTable sorted = apply_sort_by(t, {2});
  CHECK(dump_table(sorted) == "0 0\n1 0\n|\n0 1\n1 1\n");
}
