#ifndef DSPAR_TENSOR_HPP
#define DSPAR_TENSOR_HPP

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "dspar/region.hpp"

namespace dspar {

enum class LevelKind { Dense, Compressed };

/// Per-tensor storage description: one level kind per stored dimension plus
/// the storage permutation. mode_order[k] names the logical mode stored at
/// position k, so CSC of a matrix is kinds {Dense, Compressed} with
/// mode_order {1, 0}.
struct FormatSpec {
  std::vector<LevelKind> kinds;
  std::vector<int> mode_order;

  int order() const { return static_cast<int>(kinds.size()); }
  static FormatSpec dense(int order);
  void validate() const;

  friend bool operator==(const FormatSpec&, const FormatSpec&) = default;
};

/// One or more consecutive dense modes collapsed into a single level backed
/// by a multi-dimensional coordinate space.
struct DenseLevel {
  IndexSpace dom;
};

/// Compressed level: pos holds one inclusive position range per parent-level
/// position, crd the sorted non-zero coordinates those ranges point at.
struct CompressedLevel {
  Region pos;
  Region crd;
};

using LevelStorage = std::variant<DenseLevel, CompressedLevel>;

struct TensorEntry {
  std::vector<int64_t> coords;  // logical mode order
  double value = 0.0;
};

/// A sparse tensor stored as an ordered list of levels over a values region:
/// the coordinate-tree encoding. Path counts multiply through dense levels
/// and follow crd through compressed ones; vals has one entry per root-to-
/// leaf path.
class SparseTensor {
 public:
  SparseTensor() = default;

  /// Packs a coordinate list into the requested format. Duplicate
  /// coordinates are summed; entries keep explicit zeros.
  static SparseTensor pack(std::vector<int64_t> dims, FormatSpec format,
                           std::vector<TensorEntry> entries);

  /// Assembles a tensor from already-built levels (used by output assembly).
  static SparseTensor from_parts(std::vector<int64_t> dims, FormatSpec format,
                                 std::vector<LevelStorage> levels,
                                 std::vector<double> vals);

  const std::vector<int64_t>& dims() const { return dims_; }
  int order() const { return static_cast<int>(dims_.size()); }
  const FormatSpec& format() const { return format_; }

  int num_levels() const { return static_cast<int>(levels_.size()); }
  const LevelStorage& level(int l) const { return levels_[l]; }
  LevelKind level_kind(int l) const;

  /// Storage positions (indices into mode_order) covered by level l.
  const std::vector<int>& level_storage_dims(int l) const { return level_dims_[l]; }

  /// Stored coordinate paths ending at level l.
  int64_t level_positions(int l) const { return positions_[l]; }
  int64_t parent_positions(int l) const { return l == 0 ? 1 : positions_[l - 1]; }

  /// Point count of a dense level's coordinate space (its fan-out).
  int64_t level_fanout(int l) const;

  /// Level and mode-within-level storing the given logical mode.
  std::pair<int, int> level_of_mode(int logical_mode) const;

  const Region& vals() const { return vals_; }
  Region& vals() { return vals_; }
  int64_t leaf_count() const { return vals_.size(); }

  /// All stored paths as (logical coordinates, value), in storage-traversal
  /// order. Includes explicit zeros stored by dense levels.
  std::vector<TensorEntry> leaves() const;

  /// Logical coordinates of the path ending at `position` of level l.
  /// Coordinates of modes below level l are not filled in.
  std::vector<int64_t> path_coords(int l, int64_t position) const;

  /// Checks the structural invariants (sorted crd, non-overlapping pos
  /// covering [0, nnz), vals length). Throws ValidationError on failure.
  void validate() const;

 private:
  std::vector<int64_t> dims_;
  FormatSpec format_;
  std::vector<LevelStorage> levels_;
  std::vector<std::vector<int>> level_dims_;
  std::vector<int64_t> positions_;
  Region vals_;

  void init_geometry();
};

/// Splits a format into levels: maximal runs of dense modes collapse.
std::vector<std::vector<int>> level_grouping(const FormatSpec& format);

/// Level and mode-within-level a logical mode lands in under `format`.
std::pair<int, int> format_level_of_mode(const FormatSpec& format, int logical_mode);

}  // namespace dspar

#endif
