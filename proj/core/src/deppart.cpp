#include "dspar/deppart.hpp"

#include <stdexcept>

namespace dspar {

namespace {
void require_ranges(const Region& source, const char* op) {
  if (source.kind() != ValueKind::Range)
    throw std::invalid_argument(std::string(op) +
                                ": source region must hold coordinate ranges");
}
}  // namespace

Partition image(const Region& source, const Partition& src_part,
                const IndexSpace& dest) {
  require_ranges(source, "image");
  if (source.range_dest_extent() != dest.total())
    throw std::invalid_argument("image: source ranges do not reference dest");
  if (!(src_part.parent() == source.space()))
    throw std::invalid_argument("image: partition is not over the source's space");

  std::vector<std::vector<int64_t>> subsets(static_cast<size_t>(src_part.num_colors()));
  for (int64_t c = 0; c < src_part.num_colors(); c++) {
    for (int64_t i : src_part.subset(c)) {
      const CoordRange& r = source.range_at(i);
      for (int64_t d = r.lo; d <= r.hi; d++) subsets[c].push_back(d);
    }
  }
  return Partition(dest, std::move(subsets));
}

Partition preimage(const Region& source, const Partition& dest_part,
                   const IndexSpace& dest) {
  require_ranges(source, "preimage");
  if (source.range_dest_extent() != dest.total())
    throw std::invalid_argument("preimage: source ranges do not reference dest");
  if (!(dest_part.parent() == dest))
    throw std::invalid_argument("preimage: partition is not over dest");

  std::vector<std::vector<int64_t>> subsets(static_cast<size_t>(dest_part.num_colors()));
  for (int64_t c = 0; c < dest_part.num_colors(); c++) {
    const auto& colored = dest_part.subset(c);
    for (int64_t i = 0; i < source.size(); i++) {
      const CoordRange& r = source.range_at(i);
      if (r.empty()) continue;
      // colored is sorted; any element within [r.lo, r.hi] marks i.
      auto it = std::lower_bound(colored.begin(), colored.end(), r.lo);
      if (it != colored.end() && *it <= r.hi) subsets[c].push_back(i);
    }
  }
  return Partition(source.space(), std::move(subsets));
}

Partition partition_by_bounds(const IndexSpace& space,
                              const std::map<int64_t, std::vector<CoordRange>>& coloring) {
  int64_t num_colors = 0;
  for (const auto& [color, bounds] : coloring) {
    if (color < 0) throw std::invalid_argument("partition_by_bounds: negative color");
    num_colors = std::max(num_colors, color + 1);
  }
  std::vector<std::vector<int64_t>> subsets(static_cast<size_t>(num_colors));
  for (const auto& [color, bounds] : coloring) {
    if (static_cast<int>(bounds.size()) != space.rank())
      throw std::invalid_argument("partition_by_bounds: bounds rank mismatch");
    bool empty = false;
    for (int d = 0; d < space.rank(); d++) {
      const CoordRange& r = bounds[d];
      if (r.empty()) {
        empty = true;
        continue;
      }
      if (r.lo < 0 || r.hi >= space.extents()[d])
        throw std::invalid_argument("partition_by_bounds: bound outside space");
    }
    if (empty) continue;
    // Enumerate the box row-major.
    std::vector<int64_t> point(space.rank());
    for (int d = 0; d < space.rank(); d++) point[d] = bounds[d].lo;
    while (true) {
      subsets[color].push_back(space.linearize(point));
      int d = space.rank() - 1;
      for (; d >= 0; d--) {
        if (++point[d] <= bounds[d].hi) break;
        point[d] = bounds[d].lo;
      }
      if (d < 0) break;
    }
  }
  return Partition(space, std::move(subsets));
}

Partition copy_partition(const Partition& part, const IndexSpace& target) {
  if (part.parent().total() != target.total())
    throw std::invalid_argument("copy_partition: extent mismatch");
  return Partition(target, part.subsets());
}

Partition copy_partition(const Partition& part, const Region& target) {
  return copy_partition(part, target.space());
}

}  // namespace dspar
