#pragma once

#include <flashlite/index_space.hpp>

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace flashlite::testing {

/// Brute-force index enumeration: nested loops over explicit value lists,
/// last dimension innermost. Independent of build_index_table.
inline std::vector<std::vector<int64_t>> enumerate_rows(
    const std::vector<std::vector<int64_t>>& dim_values) {
  std::vector<std::vector<int64_t>> rows;
  std::vector<size_t> idx(dim_values.size(), 0);
  size_t total = 1;
  for (const auto& v : dim_values) total *= v.size();
  for (size_t r = 0; r < total; ++r) {
    std::vector<int64_t> row(dim_values.size());
    for (size_t d = 0; d < dim_values.size(); ++d) row[d] = dim_values[d][idx[d]];
    rows.push_back(std::move(row));
    for (size_t d = dim_values.size(); d-- > 0;) {
      if (++idx[d] < dim_values[d].size()) break;
      idx[d] = 0;
    }
  }
  return rows;
}

inline std::vector<int64_t> expand_extent(uint64_t val) {
  std::vector<int64_t> out(val);
  for (uint64_t i = 0; i < val; ++i) out[i] = static_cast<int64_t>(i);
  return out;
}

inline std::vector<int64_t> expand_count_by(int64_t start, int64_t step, uint64_t count) {
  std::vector<int64_t> out(count);
  for (uint64_t i = 0; i < count; ++i) out[i] = start + static_cast<int64_t>(i) * step;
  return out;
}

inline std::vector<std::vector<int64_t>> table_rows(const IndexTable& t) {
  std::vector<std::vector<int64_t>> rows;
  rows.reserve(t.rows());
  for (size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row(r);
    rows.emplace_back(row.begin(), row.end());
  }
  return rows;
}

inline bool same_row_multiset(std::vector<std::vector<int64_t>> a,
                              std::vector<std::vector<int64_t>> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

}  // namespace flashlite::testing
