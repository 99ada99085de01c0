#ifndef DSPAR_PARTITION_HPP
#define DSPAR_PARTITION_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dspar/index_space.hpp"

namespace dspar {

/// A mapping from colors to possibly-overlapping subsets of an index space.
/// Colors are dense integers 0..num_colors()-1 and may map to empty subsets.
/// Subsets are materialized as sorted, deduplicated linear indices.
/// Disjointness is computed from the subsets at construction, never assumed.
class Partition {
 public:
  Partition() = default;
  Partition(IndexSpace parent, std::vector<std::vector<int64_t>> subsets);

  const IndexSpace& parent() const { return parent_; }
  int64_t num_colors() const { return static_cast<int64_t>(subsets_.size()); }
  const std::vector<int64_t>& subset(int64_t color) const { return subsets_[color]; }
  const std::vector<std::vector<int64_t>>& subsets() const { return subsets_; }
  bool disjoint() const { return disjoint_; }

  bool contains(int64_t color, int64_t index) const;

  /// Colors assigned to `index`, in ascending color order.
  std::vector<int64_t> colors_of(int64_t index) const;

  /// Single color covering the whole space, repeated for `colors` colors
  /// means replication; with `colors` == 1 it is the trivial partition.
  static Partition replicated(IndexSpace parent, int64_t colors);

  std::string to_string() const;

  friend bool operator==(const Partition& a, const Partition& b) {
    return a.parent_ == b.parent_ && a.subsets_ == b.subsets_;
  }

 private:
  IndexSpace parent_;
  std::vector<std::vector<int64_t>> subsets_;
  bool disjoint_ = true;
};

}  // namespace dspar

#endif
