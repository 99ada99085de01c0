#ifndef DSPAR_DEPPART_HPP
#define DSPAR_DEPPART_HPP

#include <map>
#include <vector>

#include "dspar/partition.hpp"
#include "dspar/region.hpp"

namespace dspar {

/// Dependent partitioning operators over range-valued regions.
///
/// image(S, P, D) colors all destinations of pointers with the color of
/// their source: for every color c and every i in P[c], S[i] is contained
/// in the result's subset for c, and nothing else is colored.
Partition image(const Region& source, const Partition& src_part,
                const IndexSpace& dest);

/// preimage(S, P, D) colors all sources of pointers with the colors of
/// their destinations: i' receives color c whenever S[i'] intersects
/// dest_part[c]. An index may receive multiple colors.
Partition preimage(const Region& source, const Partition& dest_part,
                   const IndexSpace& dest);

/// Partitions `space` by per-color bounding boxes, one CoordRange per
/// dimension of the space. Empty ranges give empty subsets; out-of-space
/// bounds are an error.
Partition partition_by_bounds(const IndexSpace& space,
                              const std::map<int64_t, std::vector<CoordRange>>& coloring);

/// Reinterprets a partition over `target`'s space. The partitioned space and
/// the target's space must have the same number of points.
Partition copy_partition(const Partition& part, const Region& target);
Partition copy_partition(const Partition& part, const IndexSpace& target);

}  // namespace dspar

#endif
