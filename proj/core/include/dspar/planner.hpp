#ifndef DSPAR_PLANNER_HPP
#define DSPAR_PLANNER_HPP

#include <map>
#include <string>

#include "dspar/format_lang.hpp"
#include "dspar/plan.hpp"
#include "dspar/schedule.hpp"
#include "dspar/tensor.hpp"

namespace dspar {

using TensorSet = std::map<std::string, SparseTensor>;

/// Whether a scheduled variable iterates coordinate values (the universe)
/// or stored coordinate positions of one tensor.
struct IterationClass {
  bool position = false;
  std::string tensor;  // set when position
};

IterationClass classify_iteration(const ScheduledStatement& sched, const std::string& var);

/// Per-color coordinate bounds of `source`'s outermost storage mode under a
/// partition of its top level's positions: the seed for partitioning the
/// other tensors a position-split statement accesses.
std::vector<CoordRange> project_to_universe(const Partition& top_positions,
                                            const SparseTensor& source);

/// Evenly divides [0, n) into `pieces` ranges: truncating block size n /
/// pieces with the final piece absorbing the remainder (clamped to n).
std::vector<CoordRange> divide_bounds(int64_t n, int64_t pieces);

/// Fixed-size chunks of `factor`; the tail chunk is clipped to n.
std::vector<CoordRange> split_bounds(int64_t n, int64_t factor);

/// Builds the partitioning/execution plan for a validated schedule: for each
/// distributed variable, creates initial level partitions (universe or
/// non-zero by its iteration class), derives full coordinate-tree bundles,
/// and emits the distributed loop; undistributed variables become the leaf.
Plan plan(const ScheduledStatement& sched, const TensorSet& tensors);

/// Lowers a tensor distribution statement to a scheduled identity statement
/// (fuse for fusion groups, divide or position-space divide per matched
/// name, then distribute) and plans it. The resulting plan's bundles for
/// `tdn.tensor` are its resident distribution.
Plan lower_tdn(const TdnStatement& tdn, const FormatSpec& format,
               const std::vector<int64_t>& dims, const MachineGrid& machine,
               const SparseTensor& tensor);

}  // namespace dspar

#endif
