#pragma once

#include <cstdint>
#include <functional>
#include <type_traits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace flashlite {

/// Arithmetic index sequence for one launch dimension: start, start+step, ...
struct CountBy {
  int64_t start = 0;
  int64_t step = 1;
  uint64_t count = 0;
};

/// One launch dimension: a plain extent `val` expands to 0..val-1, a CountBy
/// expands to its arithmetic sequence.
class DimSpec {
 public:
  template <typename T>
    requires std::is_integral_v<T>
  DimSpec(T extent) {  // NOLINT: implicit by design
    if constexpr (std::is_signed_v<T>)
      if (extent < 0) throw_negative_extent();
    extent_ = static_cast<uint64_t>(extent);
  }

  DimSpec(CountBy seq);  // NOLINT

  uint64_t length() const;
  int64_t value_at(uint64_t i) const;
  bool is_count_by() const { return seq_.has_value(); }

 private:
  [[noreturn]] static void throw_negative_extent();

  uint64_t extent_ = 0;
  std::optional<CountBy> seq_;
};

/// Inclusive (min,max) pair over work-item coordinates or buffer elements.
using Range = std::pair<int64_t, int64_t>;

/// Maps per-dimension work-item ranges to per-argument buffer element ranges.
using PartitionFn = std::function<std::vector<Range>(const std::vector<Range>&)>;

/// Barrier dimension plus optional transition values. Without values, every
/// value change of `dim` becomes a barrier; with values, only transitions
/// into a listed value do.
struct GroupBySpec {
  int dim = 1;  // 1-based, 1=X 2=Y 3=Z
  std::optional<std::vector<int64_t>> values;

  bool operator==(const GroupBySpec&) const = default;
};

/// Ordered enumeration of all work items for one launch, with barrier
/// markers (phase boundaries) and optional partition assignments.
struct IndexTable {
  size_t dims = 0;
  std::vector<int64_t> flat;            // rows * dims, row-major
  std::vector<size_t> barriers;         // strictly increasing, each in (0, rows)
  std::vector<uint32_t> partition_ids;  // empty unless partitioned
  size_t padding_rows = 0;              // duplicated trailing rows (non-atomic mode)

  size_t rows() const { return dims == 0 ? 0 : flat.size() / dims; }

  std::span<const int64_t> row(size_t i) const {
    return std::span<const int64_t>(flat.data() + i * dims, dims);
  }

  std::span<int64_t> row(size_t i) {
    return std::span<int64_t>(flat.data() + i * dims, dims);
  }
};

/// One partition's share of a launch: a contiguous row block, the block's
/// per-dimension ranges, and the buffer bounds the partition function
/// produced for each array-like argument. Rows keep their global values so
/// cooperating kernels see indices as if the launch had never been split.
struct PartitionPlan {
  uint32_t id = 0;
  size_t row_begin = 0;
  size_t row_end = 0;  // exclusive
  std::vector<Range> dim_ranges;
  std::vector<Range> arg_bounds;  // one per array-like argument, inclusive
};

IndexTable build_index_table(const std::vector<DimSpec>& specs);

IndexTable apply_sort_by(const IndexTable& t, const std::vector<int>& dims);

IndexTable apply_group_by(const IndexTable& t, const GroupBySpec& g);

/// Splits `t` into n_parts contiguous row blocks (earlier blocks take the
/// remainder), evaluates `f` per block, and validates the returned bounds
/// against `arg_sizes`. Blocks that would be empty are dropped.
std::pair<IndexTable, std::vector<PartitionPlan>> apply_part_by(
    const IndexTable& t, const PartitionFn& f, uint32_t n_parts,
    const std::vector<uint64_t>& arg_sizes);

/// Copies rows [begin,end) keeping barriers that fall inside the slice.
IndexTable slice_table(const IndexTable& t, size_t begin, size_t end);

/// Appends `count` duplicates of the final row (non-atomic cursor padding).
void pad_table(IndexTable& t, size_t count);

/// Debug text dump: one row per line, a lone `|` line marking each barrier.
std::string dump_table(const IndexTable& t);

/// Builtin named partition functions usable from declarative kernel configs.
/// `identity_1d` maps the first dimension's work range to the same element
/// range for every argument.
PartitionFn named_partition_fn(const std::string& name, size_t arg_count);

}  // namespace flashlite
