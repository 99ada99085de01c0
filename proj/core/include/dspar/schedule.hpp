#ifndef DSPAR_SCHEDULE_HPP
#define DSPAR_SCHEDULE_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dspar/machine.hpp"
#include "dspar/tensor.hpp"
#include "dspar/tin.hpp"

namespace dspar {

/// One scheduling directive. The position-space variants of divide and
/// split name the tensor whose stored non-zeros are strip-mined.
struct Directive {
  enum class Kind { Divide, Split, Fuse, Reorder, Distribute, Communicate, Parallelize };

  Kind kind;
  std::string var;                    // target variable
  std::string outer, inner;           // divide/split results
  std::string fused_a, fused_b, fused;  // fuse inputs and result
  std::optional<std::string> position_tensor;  // divide/split position variant
  std::string grid_dim;               // divide factor / distribute target
  int64_t split_factor = 0;           // split inner extent
  std::vector<std::string> order;     // reorder permutation
  std::vector<std::string> tensors;   // communicate targets
  std::string at_var;                 // communicate loop
  std::string unit;                   // parallelize annotation

  std::string to_string() const;
};

struct Schedule {
  std::vector<Directive> directives;

  /// Semicolon-separated directives:
  ///   divide(i, io, ii, M.x)         divide(f, fo, fi, B.pos, M.x)
  ///   split(i, io, ii, 4)            split(f, fo, fi, B.pos, 4)
  ///   fuse(i, j, f)                  reorder(io, ii, j)
  ///   distribute(io, M.x)            communicate({a, B, c}, io)
  ///   parallelize(ii, threads)
  static Schedule parse(const std::string& text);
  std::string to_string() const;
};

/// Node of the index-variable derivation graph.
struct IndexVarInfo {
  enum class Kind { Root, DivideOuter, DivideInner, SplitOuter, SplitInner, Fused };
  Kind kind = Kind::Root;
  std::vector<std::string> parents;  // derivation inputs
  std::string partner;               // the matching outer/inner variable
  std::string grid_dim;              // divide pieces source
  int64_t split_factor = 0;
  bool position_space = false;       // strip-mines stored non-zeros
  std::string position_tensor;
};

/// A loop of the scheduled statement in final order.
struct LoopVar {
  std::string name;
  bool distributed = false;
  std::string machine_dim;
};

/// A validated schedule applied to a statement: the derivation graph, the
/// final loop order, and the communicate/parallelize placements.
struct ScheduledStatement {
  TinStatement stmt;
  MachineGrid machine;
  std::map<std::string, FormatSpec> formats;
  std::map<std::string, std::vector<int64_t>> dims;  // per tensor
  std::map<std::string, IndexVarInfo> var_graph;
  std::vector<LoopVar> loops;
  std::vector<Directive> communicates;  // one per tensor, validated
  std::vector<Directive> parallelizes;

  const IndexVarInfo& var(const std::string& name) const;

  /// Root TIN variables a variable derives from, in storage order for
  /// fused chains; a single element for divide/split chains and roots.
  std::vector<std::string> roots_of(const std::string& name) const;

  /// True when any root of `name` is a sum-reduction variable.
  bool derives_from_reduction(const std::string& name) const;

  /// Extent of a root TIN variable, validated consistent across accesses.
  int64_t var_extent(const std::string& root_var) const;

  /// Tensors (with the level/mode they are indexed at) accessed by any
  /// root of `name`: the classification input for the planner.
  struct AccessedLevel {
    std::string tensor;
    int level;
    int submode;
  };
  std::vector<AccessedLevel> accessed_levels(const std::string& name) const;

  int64_t distributed_loop_count() const;
};

/// Applies and checks a schedule: builds the derivation graph, the final
/// loop order (distributed variables must form an outer prefix), verifies
/// position splits, co-iteration order, and communicate targets. Tensors
/// absent from every communicate directive are fetched at the outermost
/// distributed loop (or held at the root when nothing is distributed).
ScheduledStatement validate_schedule(const TinStatement& stmt, const Schedule& schedule,
                                     const std::map<std::string, FormatSpec>& formats,
                                     const std::map<std::string, std::vector<int64_t>>& dims,
                                     const MachineGrid& machine);

}  // namespace dspar

#endif
