#ifndef DSPAR_MACHINE_HPP
#define DSPAR_MACHINE_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace dspar {

/// An n-dimensional grid of workers. Dimensions are named; unnamed grid
/// specs get the conventional names x, y, z, w in order.
class MachineGrid {
 public:
  MachineGrid() = default;
  MachineGrid(std::vector<std::string> names, std::vector<int64_t> extents);

  /// Accepts "4", "2,3", or "x=2,y=3".
  static MachineGrid parse(const std::string& text);

  int rank() const { return static_cast<int>(extents_.size()); }
  int64_t total_workers() const;
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<int64_t>& extents() const { return extents_; }

  int dim_index(const std::string& name) const;  // -1 when absent
  int64_t extent(const std::string& name) const;

  /// Row-major worker numbering.
  int64_t worker_id(const std::vector<int64_t>& coords) const;
  std::vector<int64_t> worker_coords(int64_t id) const;

  std::string to_string() const;

 private:
  std::vector<std::string> names_;
  std::vector<int64_t> extents_;
};

}  // namespace dspar

#endif
