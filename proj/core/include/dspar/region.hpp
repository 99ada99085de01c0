#ifndef DSPAR_REGION_HPP
#define DSPAR_REGION_HPP

#include <cstdint>
#include <vector>

#include "dspar/index_space.hpp"

namespace dspar {

enum class ValueKind { Scalar, Coordinate, Range };

/// A multi-dimensional array of values with exactly one value per index of
/// its space. The value kind is fixed at construction: 64-bit scalars,
/// integer coordinates, or coordinate ranges. A range-valued region names
/// positions of one destination region, recorded here by that destination's
/// extent so containment can be checked.
class Region {
 public:
  Region() : kind_(ValueKind::Scalar) {}

  static Region scalars(IndexSpace space, std::vector<double> values);
  static Region coordinates(IndexSpace space, std::vector<int64_t> values);
  static Region ranges(IndexSpace space, std::vector<CoordRange> values,
                       int64_t dest_extent);

  const IndexSpace& space() const { return space_; }
  int64_t size() const { return space_.total(); }
  ValueKind kind() const { return kind_; }

  double scalar_at(int64_t i) const { return scalars_[i]; }
  int64_t coord_at(int64_t i) const { return coords_[i]; }
  const CoordRange& range_at(int64_t i) const { return ranges_[i]; }

  const std::vector<double>& scalar_values() const { return scalars_; }
  const std::vector<int64_t>& coord_values() const { return coords_; }
  const std::vector<CoordRange>& range_values() const { return ranges_; }

  std::vector<double>& scalar_values() { return scalars_; }
  std::vector<int64_t>& coord_values() { return coords_; }
  std::vector<CoordRange>& range_values() { return ranges_; }

  /// Extent of the region this range-valued region points into.
  int64_t range_dest_extent() const { return range_dest_extent_; }

 private:
  IndexSpace space_;
  ValueKind kind_;
  std::vector<double> scalars_;
  std::vector<int64_t> coords_;
  std::vector<CoordRange> ranges_;
  int64_t range_dest_extent_ = -1;
};

}  // namespace dspar

#endif
