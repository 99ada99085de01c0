#ifndef DSPAR_INDEX_SPACE_HPP
#define DSPAR_INDEX_SPACE_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace dspar {

/// An inclusive range [lo, hi] of coordinate positions. The range is empty
/// iff lo > hi; the canonical empty form is (k, k-1).
struct CoordRange {
  int64_t lo = 0;
  int64_t hi = -1;

  bool empty() const { return lo > hi; }
  int64_t size() const { return empty() ? 0 : hi - lo + 1; }
  bool contains(int64_t i) const { return lo <= i && i <= hi; }
  bool intersects(const CoordRange& o) const {
    return !empty() && !o.empty() && lo <= o.hi && o.lo <= hi;
  }
  friend bool operator==(const CoordRange&, const CoordRange&) = default;
};

std::string to_string(const CoordRange& r);

/// A rectangular domain of multi-dimensional indices. Points are addressed
/// by row-major linear index in [0, total()).
class IndexSpace {
 public:
  IndexSpace() = default;
  explicit IndexSpace(std::vector<int64_t> extents);

  const std::vector<int64_t>& extents() const { return extents_; }
  int rank() const { return static_cast<int>(extents_.size()); }

  /// Number of points; the product of the extents (1 for a rank-0 space).
  int64_t total() const { return total_; }
  bool empty() const { return total_ == 0; }

  int64_t linearize(const std::vector<int64_t>& point) const;
  std::vector<int64_t> delinearize(int64_t linear) const;

  friend bool operator==(const IndexSpace&, const IndexSpace&) = default;

 private:
  std::vector<int64_t> extents_;
  int64_t total_ = 1;
};

}  // namespace dspar

#endif
