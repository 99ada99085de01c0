#ifndef DSPAR_LEVEL_PARTITION_HPP
#define DSPAR_LEVEL_PARTITION_HPP

#include <map>
#include <utility>

#include "dspar/bundle.hpp"
#include "dspar/partition.hpp"
#include "dspar/tensor.hpp"

namespace dspar {

/// Builder for initial level partitions. The universe family buckets the
/// level's coordinates by per-color coordinate ranges (entries must tile the
/// coordinate universe); the non-zero family assigns per-color ranges of
/// stored positions (entries must tile [0, nnz)). Each returns the pair
/// (partition for partitioning parent levels, partition for partitioning
/// child levels). For dense levels positions and coordinates coincide and
/// both families behave identically.
///
/// Multi-mode dense levels are partitioned along one of their modes
/// (`submode`); the other modes are covered as full slabs.
class LevelPartitioner {
 public:
  LevelPartitioner(const SparseTensor& tensor, int level, int submode = 0);

  void init_universe_partition();
  void create_universe_partition_entry(int64_t color, CoordRange coord_bounds);
  std::pair<Partition, Partition> finalize_universe_partition();

  void init_nonzero_partition();
  void create_nonzero_partition_entry(int64_t color, CoordRange position_bounds);
  std::pair<Partition, Partition> finalize_nonzero_partition();

  /// Projection variant of the universe family used to seed a tensor from
  /// another tensor's coordinate ownership: entries may overlap and need
  /// not cover the universe.
  void init_projected_partition();
  void create_projected_partition_entry(int64_t color, CoordRange coord_bounds);
  std::pair<Partition, Partition> finalize_projected_partition();

  /// Storage partitions of the level, valid after finalize.
  const LevelPartition& storage_partition() const;

 private:
  enum class Mode { None, Universe, NonZero, Projected };

  std::pair<Partition, Partition> finalize(Mode mode);
  void add_entry(Mode mode, int64_t color, CoordRange bounds);

  const SparseTensor& tensor_;
  int level_;
  int submode_;
  Mode mode_ = Mode::None;
  bool finalized_ = false;
  std::map<int64_t, CoordRange> entries_;
  LevelPartition storage_;
};

/// Derived partitioning of one level from a partition of its parent's or
/// child's stored positions. `storage` records the level's region
/// partitions; `next` is the partition to continue the walk with (child
/// positions going down, parent positions going up).
struct DerivedLevelPartition {
  LevelPartition storage;
  Partition next;
};

DerivedLevelPartition partition_from_parent(const SparseTensor& tensor, int level,
                                            const Partition& parent_positions);
DerivedLevelPartition partition_from_child(const SparseTensor& tensor, int level,
                                           const Partition& own_positions);

/// Derives the full coordinate-tree partition of `tensor` from an initial
/// level partition: levels above via partition_from_child, levels below via
/// partition_from_parent, and the values partition positionally from the
/// leaf level.
TensorPartitionBundle partition_coordinate_tree(const SparseTensor& tensor,
                                                const std::string& name, int level,
                                                const LevelPartition& initial,
                                                const Partition& up, const Partition& down);

/// Bundle whose every color owns the whole tensor.
TensorPartitionBundle replicated_bundle(const SparseTensor& tensor,
                                        const std::string& name, int64_t colors);

}  // namespace dspar

#endif
