#include "flashlite/index_space.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "flashlite/errors.hpp"

namespace flashlite {

void DimSpec::throw_negative_extent() {
  raise(errc::invalid_dim_spec, "negative extent");
}

DimSpec::DimSpec(CountBy seq) : seq_(seq) {
  if (seq.step == 0) raise(errc::invalid_dim_spec, "count_by step must be nonzero");
  if (seq.count == 0) raise(errc::invalid_dim_spec, "count_by count must be positive");
}

uint64_t DimSpec::length() const { return seq_ ? seq_->count : extent_; }

int64_t DimSpec::value_at(uint64_t i) const {
  if (seq_) return seq_->start + static_cast<int64_t>(i) * seq_->step;
  return static_cast<int64_t>(i);
}

IndexTable build_index_table(const std::vector<DimSpec>& specs) {
  if (specs.empty()) raise(errc::empty_index_space, "no launch dimensions");

  uint64_t total = 1;
  for (size_t d = 0; d < specs.size(); ++d) {
    uint64_t len = specs[d].length();
    if (len == 0)
      raise(errc::empty_index_space, "dimension " + std::to_string(d + 1) + " expands to zero values");
    total *= len;
  }

  IndexTable t;
  t.dims = specs.size();
  t.flat.resize(total * t.dims);

  // Row-major: the last dimension varies fastest.
  std::vector<uint64_t> idx(specs.size(), 0);
  for (uint64_t r = 0; r < total; ++r) {
    for (size_t d = 0; d < specs.size(); ++d) t.flat[r * t.dims + d] = specs[d].value_at(idx[d]);
    for (size_t d = specs.size(); d-- > 0;) {
      if (++idx[d] < specs[d].length()) break;
      idx[d] = 0;
    }
  }
  return t;
}

namespace {

void check_dims(const IndexTable& t, const std::vector<int>& dims) {
  for (int d : dims) {
    if (d < 1 || static_cast<size_t>(d) > t.dims)
      raise(errc::bad_dimension, "dimension " + std::to_string(d) + " outside table with " +
                                     std::to_string(t.dims) + " dims");
  }
}

IndexTable stable_sorted_by(const IndexTable& t, const std::vector<int>& dims) {
  size_t n = t.rows();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    for (int d : dims) {
      int64_t va = t.flat[a * t.dims + (d - 1)];
      int64_t vb = t.flat[b * t.dims + (d - 1)];
      if (va != vb) return va < vb;
    }
    return false;
  });

  IndexTable out;
  out.dims = t.dims;
  out.flat.resize(t.flat.size());
  for (size_t r = 0; r < n; ++r)
    std::copy_n(t.flat.begin() + order[r] * t.dims, t.dims, out.flat.begin() + r * t.dims);
  return out;
}

}  // namespace

IndexTable apply_sort_by(const IndexTable& t, const std::vector<int>& dims) {
  if (dims.empty()) raise(errc::bad_dimension, "sort_by requires at least one dimension");
  check_dims(t, dims);

  IndexTable out = stable_sorted_by(t, dims);

  // Implicit barriers on value transitions of the leading sort dimension.
  size_t lead = static_cast<size_t>(dims.front()) - 1;
  for (size_t r = 1; r < out.rows(); ++r) {
    if (out.flat[r * out.dims + lead] != out.flat[(r - 1) * out.dims + lead])
      out.barriers.push_back(r);
  }
  return out;
}

IndexTable apply_group_by(const IndexTable& t, const GroupBySpec& g) {
  check_dims(t, {g.dim});

  // group_by overrides: prior barriers are discarded before re-sorting.
  IndexTable out = stable_sorted_by(t, {g.dim});

  size_t lead = static_cast<size_t>(g.dim) - 1;
  for (size_t r = 1; r < out.rows(); ++r) {
    int64_t prev = out.flat[(r - 1) * out.dims + lead];
    int64_t cur = out.flat[r * out.dims + lead];
    if (prev == cur) continue;
    if (!g.values) {
      out.barriers.push_back(r);
    } else if (std::find(g.values->begin(), g.values->end(), cur) != g.values->end()) {
      out.barriers.push_back(r);  // barrier on entering a listed value
    }
  }
  return out;
}

std::pair<IndexTable, std::vector<PartitionPlan>> apply_part_by(
    const IndexTable& t, const PartitionFn& f, uint32_t n_parts,
    const std::vector<uint64_t>& arg_sizes) {
  if (n_parts == 0) raise(errc::invalid_dim_spec, "n_parts must be positive");
  size_t n = t.rows();
  if (n == 0) raise(errc::empty_index_space, "cannot partition an empty table");

  uint32_t parts = std::min<uint32_t>(n_parts, static_cast<uint32_t>(n));
  size_t base = n / parts, extra = n % parts;

  IndexTable out = t;
  out.partition_ids.assign(n, 0);

  std::vector<PartitionPlan> plans;
  plans.reserve(parts);
  size_t begin = 0;
  for (uint32_t p = 0; p < parts; ++p) {
    size_t len = base + (p < extra ? 1 : 0);
    size_t end = begin + len;

    PartitionPlan plan;
    plan.id = p;
    plan.row_begin = begin;
    plan.row_end = end;
    plan.dim_ranges.resize(t.dims);
    for (size_t d = 0; d < t.dims; ++d) {
      int64_t lo = out.flat[begin * t.dims + d], hi = lo;
      for (size_t r = begin + 1; r < end; ++r) {
        int64_t v = out.flat[r * t.dims + d];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      plan.dim_ranges[d] = {lo, hi};
    }

    plan.arg_bounds = f(plan.dim_ranges);
    for (size_t a = 0; a < plan.arg_bounds.size(); ++a) {
      auto [lo, hi] = plan.arg_bounds[a];
      if (lo > hi)
        raise(errc::non_rectangular, "inverted bounds for argument " + std::to_string(a));
      if (a < arg_sizes.size()) {
        if (lo < 0 || hi >= static_cast<int64_t>(arg_sizes[a]))
          raise(errc::partition_out_of_bounds,
                "bounds (" + std::to_string(lo) + "," + std::to_string(hi) + ") exceed argument " +
                    std::to_string(a) + " of size " + std::to_string(arg_sizes[a]));
      }
    }

    for (size_t r = begin; r < end; ++r) out.partition_ids[r] = p;
    plans.push_back(std::move(plan));
    begin = end;
  }
  return {std::move(out), std::move(plans)};
}

IndexTable slice_table(const IndexTable& t, size_t begin, size_t end) {
  IndexTable out;
  out.dims = t.dims;
  out.flat.assign(t.flat.begin() + begin * t.dims, t.flat.begin() + end * t.dims);
  for (size_t b : t.barriers)
    if (b > begin && b < end) out.barriers.push_back(b - begin);
  return out;
}

void pad_table(IndexTable& t, size_t count) {
  if (count == 0 || t.rows() == 0) return;
  size_t last = t.rows() - 1;
  std::vector<int64_t> row(t.flat.begin() + last * t.dims, t.flat.begin() + (last + 1) * t.dims);
  for (size_t i = 0; i < count; ++i) t.flat.insert(t.flat.end(), row.begin(), row.end());
  t.padding_rows += count;
}

std::string dump_table(const IndexTable& t) {
  std::ostringstream os;
  size_t next_barrier = 0;
  for (size_t r = 0; r < t.rows(); ++r) {
    if (next_barrier < t.barriers.size() && t.barriers[next_barrier] == r) {
      os << "|\n";
      ++next_barrier;
    }
    for (size_t d = 0; d < t.dims; ++d) {
      if (d) os << ' ';
      os << t.flat[r * t.dims + d];
    }
    os << '\n';
  }
  return os.str();
}

PartitionFn named_partition_fn(const std::string& name, size_t arg_count) {
  if (name == "identity_1d") {
    return [arg_count](const std::vector<Range>& dims) {
      return std::vector<Range>(arg_count, dims.at(0));
    };
  }
  raise(errc::invalid_descriptor, "unknown builtin partition fn '" + name + "'");
}

}  // namespace flashlite
