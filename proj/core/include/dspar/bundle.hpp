#ifndef DSPAR_BUNDLE_HPP
#define DSPAR_BUNDLE_HPP

#include <optional>
#include <string>
#include <vector>

#include "dspar/partition.hpp"
#include "dspar/tensor.hpp"

namespace dspar {

/// Partitions of one level's storage. Dense levels carry a partition of dom;
/// compressed levels carry partitions of pos and crd.
struct LevelPartition {
  LevelKind kind = LevelKind::Dense;
  std::optional<Partition> dom;
  std::optional<Partition> pos;
  std::optional<Partition> crd;
};

/// A partition of a tensor's full coordinate tree: per-level storage
/// partitions plus the induced partition of the values region. Closure:
/// leaf iteration from any color's sub-regions stays inside that color's
/// sub-regions on every level.
struct TensorPartitionBundle {
  std::string tensor;
  std::vector<LevelPartition> levels;
  Partition vals;
  bool replicated = false;

  int64_t num_colors() const { return vals.num_colors(); }
};

}  // namespace dspar

#endif
