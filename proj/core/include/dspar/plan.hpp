#ifndef DSPAR_PLAN_HPP
#define DSPAR_PLAN_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dspar/bundle.hpp"
#include "dspar/machine.hpp"
#include "dspar/schedule.hpp"
#include "dspar/tin.hpp"

namespace dspar {

/// Where a partition step's per-color bounds came from.
struct BoundsSource {
  enum class Kind { UniverseDivide, NonZeroDivide, Projected, Replicated };
  Kind kind = Kind::UniverseDivide;
  std::string var;            // distributed variable the bounds belong to
  int64_t pieces = 0;
  int64_t universe = 0;       // dimension extent (universe) or level nnz
  std::string from_tensor;    // Projected: tensor whose ownership seeded this
  std::vector<CoordRange> bounds;  // per color
};

/// One tensor's partitioning work ahead of a distributed loop: the initial
/// level partition plus the derived coordinate tree, executed eagerly with
/// the resulting bundle recorded in the plan.
struct PartitionStep {
  enum class Fn { Universe, NonZero, Projected, Replicate };
  std::string tensor;
  int level = 0;
  int submode = 0;
  Fn fn = Fn::Universe;
  BoundsSource bounds;
  int bundle = -1;  // index into Plan::bundles
};

struct CommunicateStep {
  std::string tensor;
  std::string at_var;  // empty when hoisted to the root
};

/// A distributed loop over one machine grid dimension. Its body is the next
/// loop in Plan::loops (or the leaf).
struct PlanLoop {
  std::string var;          // distributed variable (io, fo)
  std::string source_var;   // the variable it divides (i, f)
  std::string inner_var;    // the residual inner variable (ii, fi)
  std::string machine_dim;
  int64_t pieces = 0;
  bool position_space = false;
  std::string split_tensor;  // position case: whose non-zeros are strip-mined
  int split_level = 0;
  std::vector<PartitionStep> partitions;
  std::vector<CommunicateStep> communicates;
  std::vector<CoordRange> color_bounds;  // per color: coordinates (value) or positions
  std::map<std::string, int> bundle_of;  // tensor -> bundle index
};

/// One variable of the residual (leaf) loop nest.
struct LeafVar {
  enum class Domain {
    Full,           // iterate/co-iterate the whole coordinate range
    WorkerRange,    // coordinates restricted to the worker's color bounds
    PositionRange,  // stored positions of the split tensor's level
  };
  std::string name;  // TIN root variable; the fused variable for positions
  Domain domain = Domain::Full;
  int64_t extent = 0;       // Full
  int loop = -1;            // WorkerRange/PositionRange: owning PlanLoop
  std::string tensor;       // PositionRange
  int level = 0;            // PositionRange
  std::vector<std::string> bound_roots;  // PositionRange: variables set by the path
};

struct LeafKernel {
  std::vector<LeafVar> vars;
  bool reduction = false;
};

struct ReduceCombine {
  std::string output;
  char op = '+';
};

/// An executable partitioning/execution plan: partition steps and
/// communication attached to a nest of distributed loops around a leaf
/// kernel, with every derived bundle materialized.
struct Plan {
  TinStatement stmt;
  MachineGrid machine;
  std::map<std::string, FormatSpec> formats;
  std::map<std::string, std::vector<int64_t>> dims;
  std::vector<TensorPartitionBundle> bundles;
  std::vector<PlanLoop> loops;
  std::vector<CommunicateStep> root_communicates;  // hoisted above every loop
  LeafKernel leaf;
  std::optional<ReduceCombine> combine;
  std::vector<Directive> parallelize_notes;

  const TensorPartitionBundle& bundle(int index) const { return bundles[index]; }
};

/// Deterministic pseudo-code listing of a plan with its four block kinds:
/// initial partitions, coordinate tree derivation, distributed loop, leaf.
std::string render_plan(const Plan& plan);

}  // namespace dspar

#endif
