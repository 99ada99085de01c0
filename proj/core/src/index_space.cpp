#include "dspar/index_space.hpp"

#include <stdexcept>

namespace dspar {

std::string to_string(const CoordRange& r) {
  return "[" + std::to_string(r.lo) + ", " + std::to_string(r.hi) + "]";
}

IndexSpace::IndexSpace(std::vector<int64_t> extents) : extents_(std::move(extents)) {
  total_ = 1;
  for (int64_t e : extents_) {
    if (e < 0) throw std::invalid_argument("IndexSpace: negative extent");
    total_ *= e;
  }
}

int64_t IndexSpace::linearize(const std::vector<int64_t>& point) const {
  if (point.size() != extents_.size())
    throw std::invalid_argument("IndexSpace::linearize: rank mismatch");
  int64_t linear = 0;
  for (size_t d = 0; d < extents_.size(); d++) {
    if (point[d] < 0 || point[d] >= extents_[d])
      throw std::out_of_range("IndexSpace::linearize: point outside space");
    linear = linear * extents_[d] + point[d];
  }
  return linear;
}

std::vector<int64_t> IndexSpace::delinearize(int64_t linear) const {
  if (linear < 0 || linear >= total_)
    throw std::out_of_range("IndexSpace::delinearize: index outside space");
  std::vector<int64_t> point(extents_.size());
  for (size_t d = extents_.size(); d-- > 0;) {
    point[d] = linear % extents_[d];
    linear /= extents_[d];
  }
  return point;
}

}  // namespace dspar
