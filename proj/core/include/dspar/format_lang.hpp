#ifndef DSPAR_FORMAT_LANG_HPP
#define DSPAR_FORMAT_LANG_HPP

#include <string>
#include <vector>

#include "dspar/machine.hpp"
#include "dspar/tensor.hpp"

namespace dspar {

/// Parses a per-level format string: one of [ds] per stored dimension,
/// optionally followed by ':' and a comma-separated storage permutation.
/// "ds" is CSR for a matrix; "ds:1,0" is CSC.
FormatSpec parse_format(const std::string& text);
std::string format_to_string(const FormatSpec& format);

/// A tensor distribution statement: names for the tensor's dimensions,
/// optional fusion groups collapsing consecutive dimensions into a fresh
/// name, and the machine-side name list. Machine names are matched
/// positionally against grid dimensions; a listed name equal to a tensor
/// (or fused) dimension name partitions that dimension by the grid
/// dimension, `~` marking a non-zero partition. Unmatched names replicate
/// across their grid dimension.
struct TdnStatement {
  struct FusionGroup {
    std::vector<std::string> parts;
    std::string fused;
    friend bool operator==(const FusionGroup&, const FusionGroup&) = default;
  };
  struct MachineDim {
    std::string name;
    bool nonzero = false;
    friend bool operator==(const MachineDim&, const MachineDim&) = default;
  };

  std::string tensor;
  std::vector<std::string> dim_names;
  std::vector<FusionGroup> fusions;
  std::vector<MachineDim> machine_dims;

  std::string to_string() const;
  friend bool operator==(const TdnStatement&, const TdnStatement&) = default;
};

/// Parses `T(x,y) fuse(x,y->f) onto M(~f)`.
TdnStatement parse_tdn(const std::string& text);

/// One machine-matched dimension resolved against a tensor's format: the
/// storage modes the name covers and the grid dimension that partitions it.
struct TdnMatch {
  std::string name;
  bool nonzero = false;
  int grid_dim = -1;
  std::vector<int> storage_modes;  // consecutive, ascending
};

/// Validates a TDN statement against a tensor's format and the machine
/// grid, resolving fusion groups and name matches.
std::vector<TdnMatch> validate_tdn(const TdnStatement& tdn, const FormatSpec& format,
                                   const MachineGrid& grid);

/// Default placement when no statement is given: blocked universe
/// distribution of the first logical mode onto the first grid dimension.
TdnStatement default_tdn(const std::string& tensor, int order);

}  // namespace dspar

#endif
