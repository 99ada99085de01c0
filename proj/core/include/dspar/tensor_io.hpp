#ifndef DSPAR_TENSOR_IO_HPP
#define DSPAR_TENSOR_IO_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dspar/tensor.hpp"

namespace dspar {

/// Loads a FROSTT .tns coordinate file (whitespace separated, k 1-indexed
/// coordinates then a value per line) or a MatrixMarket coordinate file
/// (chosen by a leading %%MatrixMarket banner). Duplicates are summed.
/// When `dims` is absent, dimensions are inferred from the largest
/// coordinate per mode (MatrixMarket files carry their own size line, which
/// must agree with `dims` when both are given).
SparseTensor load_tensor(const std::string& path, const FormatSpec& format,
                         std::optional<std::vector<int64_t>> dims = std::nullopt);

SparseTensor read_tensor(std::istream& in, const std::string& name,
                         const FormatSpec& format,
                         std::optional<std::vector<int64_t>> dims = std::nullopt);

/// Writes all stored leaves (including explicit zeros stored by dense
/// levels) as 1-indexed .tns lines in lexicographic coordinate order.
void store_tensor(const SparseTensor& tensor, const std::string& path);
void write_tensor(const SparseTensor& tensor, std::ostream& out);

}  // namespace dspar

#endif
