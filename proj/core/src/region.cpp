#include "dspar/region.hpp"

#include <stdexcept>

namespace dspar {

namespace {
void check_size(const IndexSpace& space, size_t n, const char* what) {
  if (static_cast<int64_t>(n) != space.total())
    throw std::invalid_argument(std::string("Region: ") + what +
                                " value count does not match index space");
}
}  // namespace

Region Region::scalars(IndexSpace space, std::vector<double> values) {
  check_size(space, values.size(), "scalar");
  Region r;
  r.space_ = std::move(space);
  r.kind_ = ValueKind::Scalar;
  r.scalars_ = std::move(values);
  return r;
}

Region Region::coordinates(IndexSpace space, std::vector<int64_t> values) {
  check_size(space, values.size(), "coordinate");
  Region r;
  r.space_ = std::move(space);
  r.kind_ = ValueKind::Coordinate;
  r.coords_ = std::move(values);
  return r;
}

Region Region::ranges(IndexSpace space, std::vector<CoordRange> values,
                      int64_t dest_extent) {
  check_size(space, values.size(), "range");
  for (const CoordRange& c : values) {
    if (!c.empty() && (c.lo < 0 || c.hi >= dest_extent))
      throw std::invalid_argument("Region: range outside destination region");
  }
  Region r;
  r.space_ = std::move(space);
  r.kind_ = ValueKind::Range;
  r.ranges_ = std::move(values);
  r.range_dest_extent_ = dest_extent;
  return r;
}

}  // namespace dspar
