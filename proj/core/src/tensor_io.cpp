#include "dspar/tensor_io.hpp"

#include <algorithm>
#include <cctype>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dspar/errors.hpp"

namespace dspar {

namespace {

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

TensorEntry parse_entry(const std::string& line, int order, int line_no,
                        const std::string& name) {
  std::istringstream fields(line);
  TensorEntry e;
  e.coords.resize(order);
  for (int k = 0; k < order; k++) {
    int64_t c;
    if (!(fields >> c))
      throw ParseError(name + ": malformed line " + std::to_string(line_no));
    e.coords[k] = c - 1;  // 1-indexed on disk
  }
  if (!(fields >> e.value))
    throw ParseError(name + ": malformed line " + std::to_string(line_no));
  std::string rest;
  if (fields >> rest)
    throw ParseError(name + ": trailing fields on line " + std::to_string(line_no));
  return e;
}

SparseTensor pack_checked(std::vector<int64_t> dims, const FormatSpec& format,
                          std::vector<TensorEntry> entries, const std::string& name) {
  for (const auto& e : entries) {
    for (size_t k = 0; k < dims.size(); k++) {
      if (e.coords[k] < 0 || e.coords[k] >= dims[k])
        throw ParseError(name + ": coordinate out of declared bounds");
    }
  }
  return SparseTensor::pack(std::move(dims), format, std::move(entries));
}

SparseTensor read_matrix_market(std::istream& in, const std::string& name,
                                const FormatSpec& format,
                                std::optional<std::vector<int64_t>> dims) {
  std::string banner;
  std::getline(in, banner);
  std::istringstream header(banner);
  std::string tag, object, fmt, field, symmetry;
  header >> tag >> object >> fmt >> field >> symmetry;
  if (object != "matrix" || fmt != "coordinate" || field != "real" ||
      symmetry != "general")
    throw ParseError(name + ": unsupported MatrixMarket header '" + banner + "'");

  std::string line;
  int line_no = 1;
  // Skip comments to the size line.
  while (std::getline(in, line)) {
    line_no++;
    if (!line.empty() && line[0] == '%') continue;
    if (blank(line)) continue;
    break;
  }
  std::istringstream sizes(line);
  int64_t rows, cols, nnz;
  if (!(sizes >> rows >> cols >> nnz))
    throw ParseError(name + ": malformed MatrixMarket size line");
  if (dims) {
    if (dims->size() != 2 || (*dims)[0] != rows || (*dims)[1] != cols)
      throw ParseError(name + ": declared dims disagree with MatrixMarket header");
  }

  std::vector<TensorEntry> entries;
  entries.reserve(static_cast<size_t>(nnz));
  while (std::getline(in, line)) {
    line_no++;
    if (blank(line) || line[0] == '%') continue;
    entries.push_back(parse_entry(line, 2, line_no, name));
  }
  if (static_cast<int64_t>(entries.size()) != nnz)
    throw ParseError(name + ": entry count does not match header");
  return pack_checked({rows, cols}, format, std::move(entries), name);
}

SparseTensor read_tns(std::istream& in, const std::string& name,
                      const FormatSpec& format,
                      std::optional<std::vector<int64_t>> dims) {
  int order = format.order();
  std::vector<TensorEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    line_no++;
    if (blank(line) || line[0] == '#' || line[0] == '%') continue;
    entries.push_back(parse_entry(line, order, line_no, name));
  }
  std::vector<int64_t> sizes;
  if (dims) {
    sizes = *dims;
    if (static_cast<int>(sizes.size()) != order)
      throw ParseError(name + ": declared dims do not match format order");
  } else {
    sizes.assign(order, 0);
    for (const auto& e : entries) {
      for (int k = 0; k < order; k++) sizes[k] = std::max(sizes[k], e.coords[k] + 1);
    }
  }
  return pack_checked(std::move(sizes), format, std::move(entries), name);
}

}  // namespace

SparseTensor read_tensor(std::istream& in, const std::string& name,
                         const FormatSpec& format,
                         std::optional<std::vector<int64_t>> dims) {
  if (in.peek() == '%') {
    // Either a MatrixMarket banner or a comment; the banner is mandatory
    // for MatrixMarket, so sniff it.
    std::streampos at = in.tellg();
    std::string first;
    std::getline(in, first);
    in.seekg(at);
    if (first.rfind("%%MatrixMarket", 0) == 0)
      return read_matrix_market(in, name, format, std::move(dims));
  }
  return read_tns(in, name, format, std::move(dims));
}

SparseTensor load_tensor(const std::string& path, const FormatSpec& format,
                         std::optional<std::vector<int64_t>> dims) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open tensor file '" + path + "'");
  return read_tensor(in, path, format, std::move(dims));
}

void write_tensor(const SparseTensor& tensor, std::ostream& out) {
  auto entries = tensor.leaves();
  std::sort(entries.begin(), entries.end(),
            [](const TensorEntry& a, const TensorEntry& b) { return a.coords < b.coords; });
  char buf[64];
  for (const auto& e : entries) {
    for (int64_t c : e.coords) out << (c + 1) << ' ';
    std::snprintf(buf, sizeof buf, "%.17g", e.value);
    out << buf << '\n';
  }
}

void store_tensor(const SparseTensor& tensor, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open output file '" + path + "'");
  write_tensor(tensor, out);
  if (!out) throw ParseError("failed writing '" + path + "'");
}

}  // namespace dspar
