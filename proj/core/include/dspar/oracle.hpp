#ifndef DSPAR_ORACLE_HPP
#define DSPAR_ORACLE_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dspar/tensor.hpp"
#include "dspar/tin.hpp"

namespace dspar {

/// Row-major dense array, the oracle's working representation.
struct DenseTensor {
  std::vector<int64_t> extents;
  std::vector<double> values;

  int64_t total() const;
  double at(const std::vector<int64_t>& coords) const;
  double& at(const std::vector<int64_t>& coords);

  static DenseTensor zeros(std::vector<int64_t> extents);
};

DenseTensor densify(const SparseTensor& tensor);

/// Drops exact zeros and packs the rest; oracle-side only.
SparseTensor sparsify(const DenseTensor& dense, const FormatSpec& format);

/// Structural pattern expected of the statement's output: a coordinate is
/// present when any term has all its accesses stored there. Computed from
/// the sparse inputs alone, with no value-based pruning.
std::vector<char> oracle_pattern(const TinStatement& stmt,
                                 const std::map<std::string, SparseTensor>& inputs,
                                 const std::vector<int64_t>& out_dims);

/// Literal nested loops over every index variable's full range; no
/// sparsity is exploited anywhere. Trip counts beyond `trip_limit` throw.
DenseTensor dense_eval(const TinStatement& stmt,
                       const std::map<std::string, DenseTensor>& inputs,
                       const std::map<std::string, std::vector<int64_t>>& dims,
                       int64_t trip_limit = 100000000);

}  // namespace dspar

#endif
