#include "dspar/partition.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dspar {

Partition::Partition(IndexSpace parent, std::vector<std::vector<int64_t>> subsets)
    : parent_(std::move(parent)), subsets_(std::move(subsets)) {
  std::vector<bool> seen(static_cast<size_t>(parent_.total()), false);
  disjoint_ = true;
  for (auto& subset : subsets_) {
    std::sort(subset.begin(), subset.end());
    subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
    for (int64_t i : subset) {
      if (i < 0 || i >= parent_.total())
        throw std::invalid_argument("Partition: subset index outside parent space");
      if (seen[static_cast<size_t>(i)]) disjoint_ = false;
      seen[static_cast<size_t>(i)] = true;
    }
  }
}

bool Partition::contains(int64_t color, int64_t index) const {
  const auto& s = subsets_[color];
  return std::binary_search(s.begin(), s.end(), index);
}

std::vector<int64_t> Partition::colors_of(int64_t index) const {
  std::vector<int64_t> out;
  for (int64_t c = 0; c < num_colors(); c++) {
    if (contains(c, index)) out.push_back(c);
  }
  return out;
}

Partition Partition::replicated(IndexSpace parent, int64_t colors) {
  std::vector<int64_t> all(static_cast<size_t>(parent.total()));
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::vector<int64_t>> subsets(static_cast<size_t>(colors), all);
  return Partition(std::move(parent), std::move(subsets));
}

std::string Partition::to_string() const {
  std::ostringstream out;
  for (int64_t c = 0; c < num_colors(); c++) {
    out << c << ": {";
    for (size_t k = 0; k < subsets_[c].size(); k++) {
      if (k) out << ", ";
      out << subsets_[c][k];
    }
    out << "}";
    if (c + 1 < num_colors()) out << " ";
  }
  return out.str();
}

}  // namespace dspar
