#ifndef DSPAR_SIM_HPP
#define DSPAR_SIM_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dspar/plan.hpp"
#include "dspar/planner.hpp"
#include "dspar/tensor.hpp"

namespace dspar {

enum class ExecMode { Sequential, Parallel, Instrumented };

ExecMode parse_exec_mode(const std::string& text);  // seq | par | instrumented

/// Transfer accounting units.
inline constexpr int64_t kScalarBytes = 8;
inline constexpr int64_t kCoordBytes = 8;
inline constexpr int64_t kRangeBytes = 16;

struct Stats {
  struct PerWorker {
    std::map<std::string, int64_t> bytes_by_tensor;
    int64_t work = 0;
  };
  int64_t workers = 0;
  std::vector<PerWorker> per_worker;
  double imbalance = 1.0;  // max work / mean work; 1 when no work at all
  int64_t combines = 0;    // extra contributions summed during reduction

  std::string to_json() const;
};

/// Sorted owned indices per region of one tensor: the bookkeeping unit for
/// snapshots, communication accounting, and residency.
struct RegionIndexSets {
  struct LevelSets {
    std::vector<int64_t> dom;  // dense levels
    std::vector<int64_t> pos;  // compressed levels
    std::vector<int64_t> crd;
  };
  std::vector<LevelSets> levels;
  std::vector<int64_t> vals;
};

RegionIndexSets full_sets(const SparseTensor& tensor);
RegionIndexSets bundle_color_sets(const TensorPartitionBundle& bundle, int64_t color);
RegionIndexSets intersect_sets(const RegionIndexSets& a, const RegionIndexSets& b);
int64_t transfer_bytes(const SparseTensor& tensor, const RegionIndexSets& needed,
                       const RegionIndexSets& resident);

std::vector<int64_t> intersect_sorted(const std::vector<int64_t>& a,
                                      const std::vector<int64_t>& b);

/// K-way union of sorted coordinate lists with per-source presence.
struct MergePoint {
  int64_t coord;
  std::vector<int> sources;
};
std::vector<MergePoint> union_merge(const std::vector<std::vector<int64_t>>& lists);

/// Where each tensor's sub-regions live before compute: per worker owned
/// sets, derived from data-placement plans.
struct Residency {
  std::map<std::string, std::vector<RegionIndexSets>> tensors;
};

Residency residency_from_placements(const std::map<std::string, Plan>& placements,
                                    const MachineGrid& machine, const TensorSet& tensors);

/// The input whose leading levels provably give the output's pattern, when
/// the statement is a single multiplicative term with exactly one sparse
/// access led by the output's variables in matching storage order.
std::optional<std::string> pattern_reuse_source(const TinStatement& stmt,
                                                const std::map<std::string, FormatSpec>& formats);

/// Structural stand-in for the output used during planning: the reuse
/// source's copied structure when pattern reuse applies, empty otherwise.
SparseTensor make_output_stub(const TinStatement& stmt,
                              const std::map<std::string, FormatSpec>& formats,
                              const std::map<std::string, std::vector<int64_t>>& dims,
                              const TensorSet& inputs);

/// Builds the output tensor from the combined dense accumulator. Pattern
/// reuse copies the source's metadata and writes values only; otherwise a
/// symbolic counting phase sizes pos/crd exactly and a fill phase writes
/// without resizing.
SparseTensor assemble_output(const TinStatement& stmt,
                             const std::map<std::string, FormatSpec>& formats,
                             const std::map<std::string, std::vector<int64_t>>& dims,
                             const TensorSet& inputs, const std::vector<double>& values,
                             const std::vector<char>& touched);

/// Deterministic merge of per-worker partial outputs in ascending worker
/// order. `allow_overlap` mirrors the plan's ReduceCombine: without it, two
/// workers contributing to one index is an internal error.
struct WorkerPartial {
  std::vector<double> values;
  std::vector<char> touched;
};
struct CombineResult {
  std::vector<double> values;
  std::vector<char> touched;
  int64_t combines = 0;
};
CombineResult reduce_combine(const std::vector<WorkerPartial>& partials, bool allow_overlap);

struct ExecResult {
  SparseTensor output;
  Stats stats;
};

/// Runs a plan on the simulated worker grid: materializes per-worker
/// snapshots at communicate steps (charging the ledger against residency),
/// co-iterates the leaf kernel per worker, combines partial outputs
/// deterministically, and assembles the output tensor.
ExecResult execute(const Plan& plan, const TensorSet& tensors, const MachineGrid& machine,
                   const Residency& residency, ExecMode mode);

}  // namespace dspar

#endif
