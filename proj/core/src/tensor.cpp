#include "dspar/tensor.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "dspar/errors.hpp"

namespace dspar {

FormatSpec FormatSpec::dense(int order) {
  FormatSpec f;
  f.kinds.assign(order, LevelKind::Dense);
  f.mode_order.resize(order);
  std::iota(f.mode_order.begin(), f.mode_order.end(), 0);
  return f;
}

void FormatSpec::validate() const {
  if (mode_order.size() != kinds.size())
    throw ValidationError("format: mode order length does not match level count");
  std::vector<bool> seen(kinds.size(), false);
  for (int m : mode_order) {
    if (m < 0 || m >= order() || seen[m])
      throw ValidationError("format: mode order is not a permutation");
    seen[m] = true;
  }
}

std::vector<std::vector<int>> level_grouping(const FormatSpec& format) {
  std::vector<std::vector<int>> groups;
  for (int k = 0; k < format.order(); k++) {
    if (format.kinds[k] == LevelKind::Dense && !groups.empty() &&
        format.kinds[groups.back().back()] == LevelKind::Dense) {
      groups.back().push_back(k);
    } else {
      groups.push_back({k});
    }
  }
  return groups;
}

std::pair<int, int> format_level_of_mode(const FormatSpec& format, int logical_mode) {
  int storage_pos = -1;
  for (int k = 0; k < format.order(); k++) {
    if (format.mode_order[k] == logical_mode) storage_pos = k;
  }
  if (storage_pos < 0) throw ValidationError("format has no such mode");
  auto groups = level_grouping(format);
  for (int l = 0; l < static_cast<int>(groups.size()); l++) {
    for (size_t j = 0; j < groups[l].size(); j++) {
      if (groups[l][j] == storage_pos) return {l, static_cast<int>(j)};
    }
  }
  throw ValidationError("format has no such mode");
}

LevelKind SparseTensor::level_kind(int l) const {
  return std::holds_alternative<DenseLevel>(levels_[l]) ? LevelKind::Dense
                                                        : LevelKind::Compressed;
}

int64_t SparseTensor::level_fanout(int l) const {
  return std::get<DenseLevel>(levels_[l]).dom.total();
}

std::pair<int, int> SparseTensor::level_of_mode(int logical_mode) const {
  int storage_pos = -1;
  for (int k = 0; k < format_.order(); k++) {
    if (format_.mode_order[k] == logical_mode) storage_pos = k;
  }
  if (storage_pos < 0) throw ValidationError("tensor has no such mode");
  for (int l = 0; l < num_levels(); l++) {
    for (size_t j = 0; j < level_dims_[l].size(); j++) {
      if (level_dims_[l][j] == storage_pos) return {l, static_cast<int>(j)};
    }
  }
  throw ValidationError("tensor has no such mode");
}

void SparseTensor::init_geometry() {
  positions_.clear();
  int64_t count = 1;
  for (const auto& level : levels_) {
    if (const auto* d = std::get_if<DenseLevel>(&level)) {
      count *= d->dom.total();
    } else {
      count = std::get<CompressedLevel>(level).crd.size();
    }
    positions_.push_back(count);
  }
}

SparseTensor SparseTensor::pack(std::vector<int64_t> dims, FormatSpec format,
                                std::vector<TensorEntry> entries) {
  format.validate();
  if (format.order() != static_cast<int>(dims.size()))
    throw ValidationError("pack: format order does not match dimension count");

  // Deduplicate (summing values) and sort by storage-order coordinates.
  std::map<std::vector<int64_t>, double> dedup;
  for (const auto& e : entries) {
    if (e.coords.size() != dims.size())
      throw ValidationError("pack: entry rank does not match tensor order");
    std::vector<int64_t> key(dims.size());
    for (size_t k = 0; k < dims.size(); k++) {
      int64_t c = e.coords[format.mode_order[k]];
      if (c < 0 || c >= dims[format.mode_order[k]])
        throw ValidationError("pack: coordinate out of bounds");
      key[k] = c;
    }
    dedup[key] += e.value;
  }

  SparseTensor t;
  t.dims_ = dims;
  t.format_ = format;
  t.level_dims_ = level_grouping(format);

  std::vector<std::vector<int64_t>> keys;
  std::vector<double> values;
  keys.reserve(dedup.size());
  for (auto& [k, v] : dedup) {
    keys.push_back(k);
    values.push_back(v);
  }

  // Walk levels top-down, tracking each entry's position within the level.
  std::vector<int64_t> entry_pos(keys.size(), 0);
  int64_t parent_count = 1;
  int storage_base = 0;
  for (const auto& group : t.level_dims_) {
    bool dense = format.kinds[group[0]] == LevelKind::Dense;
    if (dense) {
      std::vector<int64_t> extents;
      for (int k : group) extents.push_back(dims[format.mode_order[k]]);
      IndexSpace dom(extents);
      for (size_t e = 0; e < keys.size(); e++) {
        std::vector<int64_t> local(group.size());
        for (size_t j = 0; j < group.size(); j++) local[j] = keys[e][storage_base + j];
        entry_pos[e] = entry_pos[e] * dom.total() + dom.linearize(local);
      }
      parent_count *= dom.total();
      t.levels_.push_back(DenseLevel{std::move(dom)});
    } else {
      int64_t dim_size = dims[format.mode_order[group[0]]];
      std::vector<CoordRange> pos(static_cast<size_t>(parent_count));
      std::vector<int64_t> crd;
      int64_t cursor = 0;
      size_t e = 0;
      for (int64_t p = 0; p < parent_count; p++) {
        int64_t start = cursor;
        while (e < keys.size() && entry_pos[e] == p) {
          int64_t coord = keys[e][storage_base];
          if (crd.size() > static_cast<size_t>(start) && crd.back() == coord) {
            entry_pos[e] = cursor - 1;
          } else {
            crd.push_back(coord);
            entry_pos[e] = cursor++;
          }
          e++;
        }
        pos[p] = {start, cursor - 1};
      }
      parent_count = static_cast<int64_t>(crd.size());
      int64_t nnz = parent_count;
      int64_t pos_count = static_cast<int64_t>(pos.size());
      t.levels_.push_back(
          CompressedLevel{Region::ranges(IndexSpace({pos_count}), std::move(pos), nnz),
                          Region::coordinates(IndexSpace({nnz}), std::move(crd))});
      (void)dim_size;
    }
    storage_base += static_cast<int>(group.size());
  }

  std::vector<double> vals(static_cast<size_t>(parent_count), 0.0);
  for (size_t e = 0; e < keys.size(); e++) vals[entry_pos[e]] = values[e];
  t.vals_ = Region::scalars(IndexSpace({parent_count}), std::move(vals));
  t.init_geometry();
  t.validate();
  return t;
}

SparseTensor SparseTensor::from_parts(std::vector<int64_t> dims, FormatSpec format,
                                      std::vector<LevelStorage> levels,
                                      std::vector<double> vals) {
  format.validate();
  SparseTensor t;
  t.dims_ = std::move(dims);
  t.format_ = std::move(format);
  t.levels_ = std::move(levels);
  t.level_dims_ = level_grouping(t.format_);
  t.init_geometry();
  t.vals_ = Region::scalars(IndexSpace({t.positions_.back()}), std::move(vals));
  t.validate();
  return t;
}

std::vector<TensorEntry> SparseTensor::leaves() const {
  std::vector<TensorEntry> out;
  out.reserve(static_cast<size_t>(leaf_count()));
  for (int64_t p = 0; p < leaf_count(); p++) {
    out.push_back({path_coords(num_levels() - 1, p), vals_.scalar_at(p)});
  }
  return out;
}

std::vector<int64_t> SparseTensor::path_coords(int lvl, int64_t position) const {
  std::vector<int64_t> coords(dims_.size(), -1);
  int64_t pos = position;
  for (int l = lvl; l >= 0; l--) {
    if (const auto* d = std::get_if<DenseLevel>(&levels_[l])) {
      int64_t local = pos % d->dom.total();
      pos /= d->dom.total();
      auto point = d->dom.delinearize(local);
      for (size_t j = 0; j < point.size(); j++)
        coords[format_.mode_order[level_dims_[l][j]]] = point[j];
    } else {
      const auto& c = std::get<CompressedLevel>(levels_[l]);
      coords[format_.mode_order[level_dims_[l][0]]] = c.crd.coord_at(pos);
      // Parent position: the pos entry whose range contains `pos`.
      const auto& ranges = c.pos.range_values();
      int64_t lo = 0, hi = c.pos.size() - 1, parent = -1;
      while (lo <= hi) {
        int64_t mid = (lo + hi) / 2;
        const CoordRange& r = ranges[mid];
        if (!r.empty() && r.contains(pos)) {
          parent = mid;
          break;
        }
        // Empty ranges sit between their neighbours; compare against lo.
        if (pos < r.lo) hi = mid - 1; else lo = mid + 1;
      }
      if (parent < 0) throw ValidationError("corrupt pos structure");
      pos = parent;
    }
  }
  return coords;
}

void SparseTensor::validate() const {
  if (static_cast<int>(level_dims_.size()) != num_levels())
    throw ValidationError("tensor: level grouping mismatch");
  int64_t parent_count = 1;
  for (int l = 0; l < num_levels(); l++) {
    if (const auto* d = std::get_if<DenseLevel>(&levels_[l])) {
      for (size_t j = 0; j < level_dims_[l].size(); j++) {
        int64_t expect = dims_[format_.mode_order[level_dims_[l][j]]];
        if (d->dom.extents()[j] != expect)
          throw ValidationError("tensor: dense dom extent does not match dimension");
      }
      parent_count *= d->dom.total();
    } else {
      const auto& c = std::get<CompressedLevel>(levels_[l]);
      if (c.pos.size() != parent_count)
        throw ValidationError("tensor: pos must have one entry per parent position");
      int64_t dim_size = dims_[format_.mode_order[level_dims_[l][0]]];
      int64_t cursor = 0;
      for (int64_t p = 0; p < c.pos.size(); p++) {
        const CoordRange& r = c.pos.range_at(p);
        if (r.empty()) {
          if (r.lo != cursor || r.hi != cursor - 1)
            throw ValidationError("tensor: empty pos range must be canonical (k, k-1)");
          continue;
        }
        if (r.lo != cursor)
          throw ValidationError("tensor: pos ranges must tile [0, nnz)");
        int64_t prev = -1;
        for (int64_t q = r.lo; q <= r.hi; q++) {
          int64_t coord = c.crd.coord_at(q);
          if (coord <= prev)
            throw ValidationError("tensor: crd must be strictly increasing per range");
          if (coord < 0 || coord >= dim_size)
            throw ValidationError("tensor: crd value out of dimension bounds");
          prev = coord;
        }
        cursor = r.hi + 1;
      }
      if (cursor != c.crd.size())
        throw ValidationError("tensor: pos ranges must cover exactly [0, nnz)");
      parent_count = c.crd.size();
    }
  }
  if (vals_.size() != parent_count)
    throw ValidationError("tensor: vals length does not match leaf count");
}

}  // namespace dspar
