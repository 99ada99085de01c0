#include "dspar/machine.hpp"

#include <sstream>

#include "dspar/errors.hpp"

namespace dspar {

namespace {
const char* kDefaultNames[] = {"x", "y", "z", "w"};
}

MachineGrid::MachineGrid(std::vector<std::string> names, std::vector<int64_t> extents)
    : names_(std::move(names)), extents_(std::move(extents)) {
  if (names_.size() != extents_.size())
    throw ValidationError("machine grid: name/extent count mismatch");
  for (int64_t e : extents_) {
    if (e < 1) throw ValidationError("machine grid: extents must be >= 1");
  }
  for (size_t i = 0; i < names_.size(); i++) {
    for (size_t j = i + 1; j < names_.size(); j++) {
      if (names_[i] == names_[j])
        throw ValidationError("machine grid: duplicate dimension name '" + names_[i] + "'");
    }
  }
}

MachineGrid MachineGrid::parse(const std::string& text) {
  std::vector<std::string> names;
  std::vector<int64_t> extents;
  std::istringstream in(text);
  std::string field;
  int anon = 0;
  while (std::getline(in, field, ',')) {
    auto eq = field.find('=');
    std::string name;
    std::string extent_text;
    if (eq == std::string::npos) {
      if (anon >= 4) throw ParseError("machine grid: too many unnamed dimensions");
      name = kDefaultNames[anon];
      extent_text = field;
    } else {
      name = field.substr(0, eq);
      extent_text = field.substr(eq + 1);
    }
    // Trim whitespace.
    auto trim = [](std::string s) {
      size_t b = s.find_first_not_of(" \t");
      size_t e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    name = trim(name);
    extent_text = trim(extent_text);
    try {
      size_t used = 0;
      int64_t extent = std::stoll(extent_text, &used);
      if (used != extent_text.size()) throw std::invalid_argument("");
      names.push_back(name);
      extents.push_back(extent);
    } catch (const std::exception&) {
      throw ParseError("machine grid: bad extent '" + extent_text + "'");
    }
    anon++;
  }
  if (names.empty()) throw ParseError("machine grid: empty spec");
  return MachineGrid(std::move(names), std::move(extents));
}

int64_t MachineGrid::total_workers() const {
  int64_t total = 1;
  for (int64_t e : extents_) total *= e;
  return total;
}

int MachineGrid::dim_index(const std::string& name) const {
  for (size_t i = 0; i < names_.size(); i++) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  return -1;
}

int64_t MachineGrid::extent(const std::string& name) const {
  int i = dim_index(name);
  if (i < 0) throw ValidationError("unknown machine dimension '" + name + "'");
  return extents_[i];
}

int64_t MachineGrid::worker_id(const std::vector<int64_t>& coords) const {
  int64_t id = 0;
  for (size_t d = 0; d < extents_.size(); d++) id = id * extents_[d] + coords[d];
  return id;
}

std::vector<int64_t> MachineGrid::worker_coords(int64_t id) const {
  std::vector<int64_t> coords(extents_.size());
  for (size_t d = extents_.size(); d-- > 0;) {
    coords[d] = id % extents_[d];
    id /= extents_[d];
  }
  return coords;
}

std::string MachineGrid::to_string() const {
  std::ostringstream out;
  out << "M(";
  for (size_t d = 0; d < names_.size(); d++) {
    if (d) out << ", ";
    out << names_[d] << " = " << extents_[d];
  }
  out << ")";
  return out.str();
}

}  // namespace dspar
