#include "dspar/level_partition.hpp"

#include <algorithm>
#include <stdexcept>

#include "dspar/deppart.hpp"
#include "dspar/errors.hpp"

namespace dspar {

namespace {

IndexSpace position_space(const SparseTensor& t, int l) {
  return IndexSpace({t.level_positions(l)});
}

int64_t dense_submode_extent(const SparseTensor& t, int l, int submode) {
  return std::get<DenseLevel>(t.level(l)).dom.extents()[submode];
}

/// Positions of a dense level are parent paths crossed with dom points;
/// expand colors positions from a parent-position partition.
Partition expand_dense(const SparseTensor& t, int l, const Partition& parent) {
  int64_t fanout = t.level_fanout(l);
  std::vector<std::vector<int64_t>> subsets(parent.num_colors());
  for (int64_t c = 0; c < parent.num_colors(); c++) {
    for (int64_t p : parent.subset(c)) {
      for (int64_t s = 0; s < fanout; s++) subsets[c].push_back(p * fanout + s);
    }
  }
  return Partition(position_space(t, l), std::move(subsets));
}

/// Parent position p takes every color of its children (p*S .. p*S+S-1).
Partition contract_dense(const SparseTensor& t, int l, const Partition& positions) {
  int64_t fanout = t.level_fanout(l);
  IndexSpace parent_space({t.parent_positions(l)});
  std::vector<std::vector<int64_t>> subsets(positions.num_colors());
  for (int64_t c = 0; c < positions.num_colors(); c++) {
    for (int64_t q : positions.subset(c)) subsets[c].push_back(q / fanout);
  }
  return Partition(parent_space, std::move(subsets));
}

/// Dom point s takes the colors of every position (p, s).
Partition project_dense_dom(const SparseTensor& t, int l, const Partition& positions) {
  const IndexSpace& dom = std::get<DenseLevel>(t.level(l)).dom;
  int64_t fanout = dom.total();
  std::vector<std::vector<int64_t>> subsets(positions.num_colors());
  for (int64_t c = 0; c < positions.num_colors(); c++) {
    for (int64_t q : positions.subset(c)) subsets[c].push_back(q % fanout);
  }
  return Partition(dom, std::move(subsets));
}

void check_tiling(const std::map<int64_t, CoordRange>& entries, int64_t universe,
                  const char* what) {
  std::vector<CoordRange> bounds;
  for (const auto& [color, r] : entries) {
    if (!r.empty()) bounds.push_back(r);
  }
  std::sort(bounds.begin(), bounds.end(),
            [](const CoordRange& a, const CoordRange& b) { return a.lo < b.lo; });
  int64_t cursor = 0;
  for (const CoordRange& r : bounds) {
    if (r.lo != cursor)
      throw ValidationError(std::string(what) + " partition entries must tile; gap or overlap at " +
                            std::to_string(cursor));
    cursor = r.hi + 1;
  }
  if (cursor != universe)
    throw ValidationError(std::string(what) + " partition entries must tile the full range [0, " +
                          std::to_string(universe) + ")");
}

}  // namespace

LevelPartitioner::LevelPartitioner(const SparseTensor& tensor, int level, int submode)
    : tensor_(tensor), level_(level), submode_(submode) {
  if (level < 0 || level >= tensor.num_levels())
    throw std::invalid_argument("LevelPartitioner: no such level");
  if (tensor.level_kind(level) == LevelKind::Compressed && submode != 0)
    throw std::invalid_argument("LevelPartitioner: compressed levels have one mode");
}

void LevelPartitioner::init_universe_partition() {
  if (mode_ != Mode::None) throw std::logic_error("level partitioner already initialized");
  mode_ = Mode::Universe;
}

void LevelPartitioner::init_nonzero_partition() {
  if (mode_ != Mode::None) throw std::logic_error("level partitioner already initialized");
  mode_ = Mode::NonZero;
}

void LevelPartitioner::init_projected_partition() {
  if (mode_ != Mode::None) throw std::logic_error("level partitioner already initialized");
  mode_ = Mode::Projected;
}

void LevelPartitioner::add_entry(Mode mode, int64_t color, CoordRange bounds) {
  if (mode_ != mode) throw std::logic_error("level partitioner entry does not match init");
  if (finalized_) throw std::logic_error("level partition entry after finalize");
  if (color < 0) throw std::invalid_argument("negative partition color");
  if (entries_.count(color)) throw std::invalid_argument("duplicate partition color");
  entries_[color] = bounds;
}

void LevelPartitioner::create_universe_partition_entry(int64_t color, CoordRange b) {
  add_entry(Mode::Universe, color, b);
}
void LevelPartitioner::create_nonzero_partition_entry(int64_t color, CoordRange b) {
  add_entry(Mode::NonZero, color, b);
}
void LevelPartitioner::create_projected_partition_entry(int64_t color, CoordRange b) {
  add_entry(Mode::Projected, color, b);
}

std::pair<Partition, Partition> LevelPartitioner::finalize_universe_partition() {
  return finalize(Mode::Universe);
}
std::pair<Partition, Partition> LevelPartitioner::finalize_nonzero_partition() {
  return finalize(Mode::NonZero);
}
std::pair<Partition, Partition> LevelPartitioner::finalize_projected_partition() {
  return finalize(Mode::Projected);
}

const LevelPartition& LevelPartitioner::storage_partition() const {
  if (!finalized_) throw std::logic_error("level partitioner not finalized");
  return storage_;
}

std::pair<Partition, Partition> LevelPartitioner::finalize(Mode mode) {
  if (mode_ != mode) throw std::logic_error("level partitioner finalize does not match init");
  if (finalized_) throw std::logic_error("level partitioner finalized twice");
  finalized_ = true;

  int64_t num_colors = 0;
  for (const auto& [c, r] : entries_) num_colors = std::max(num_colors, c + 1);

  if (tensor_.level_kind(level_) == LevelKind::Dense) {
    const IndexSpace& dom = std::get<DenseLevel>(tensor_.level(level_)).dom;
    int64_t extent = dom.extents()[submode_];
    // Positions and coordinates coincide on dense levels; the non-zero
    // family therefore shares the universe behavior.
    if (mode != Mode::Projected) check_tiling(entries_, extent, "universe");
    for (const auto& [c, r] : entries_) {
      if (!r.empty() && (r.lo < 0 || r.hi >= extent))
        throw ValidationError("partition entry bounds outside the level universe");
    }
    std::map<int64_t, std::vector<CoordRange>> boxes;
    for (const auto& [c, r] : entries_) {
      std::vector<CoordRange> box;
      for (int d = 0; d < dom.rank(); d++) {
        box.push_back(d == submode_ ? r : CoordRange{0, dom.extents()[d] - 1});
      }
      boxes[c] = std::move(box);
    }
    // Ensure trailing colors with no entry still exist.
    if (num_colors > 0 && !boxes.count(num_colors - 1))
      boxes[num_colors - 1] = std::vector<CoordRange>(dom.rank(), CoordRange{0, -1});
    Partition dom_part = partition_by_bounds(dom, boxes);
    storage_.kind = LevelKind::Dense;
    storage_.dom = dom_part;
    // Positions take their dom point's color, repeated per parent path.
    Partition positions = [&] {
      int64_t parents = tensor_.parent_positions(level_);
      if (parents == 1) return copy_partition(dom_part, position_space(tensor_, level_));
      int64_t fanout = dom.total();
      std::vector<std::vector<int64_t>> subsets(dom_part.num_colors());
      for (int64_t c = 0; c < dom_part.num_colors(); c++) {
        for (int64_t p = 0; p < parents; p++) {
          for (int64_t s : dom_part.subset(c)) subsets[c].push_back(p * fanout + s);
        }
      }
      return Partition(position_space(tensor_, level_), std::move(subsets));
    }();
    Partition up = level_ == 0 ? positions : contract_dense(tensor_, level_, positions);
    return {up, positions};
  }

  const auto& lvl = std::get<CompressedLevel>(tensor_.level(level_));
  int64_t nnz = lvl.crd.size();
  std::vector<std::vector<int64_t>> crd_subsets(static_cast<size_t>(num_colors));
  if (mode == Mode::NonZero) {
    check_tiling(entries_, nnz, "non-zero");
    for (const auto& [c, r] : entries_) {
      if (!r.empty() && (r.lo < 0 || r.hi >= nnz))
        throw ValidationError("non-zero partition bounds outside [0, nnz)");
      for (int64_t q = r.lo; q <= r.hi; q++) crd_subsets[c].push_back(q);
    }
  } else {
    int64_t extent = tensor_.dims()[tensor_.format().mode_order
                                        [tensor_.level_storage_dims(level_)[0]]];
    if (mode == Mode::Universe) check_tiling(entries_, extent, "universe");
    for (const auto& [c, r] : entries_) {
      if (!r.empty() && (r.lo < 0 || r.hi >= extent))
        throw ValidationError("partition entry bounds outside the level universe");
      // Bucket stored coordinates into the color's coordinate range.
      for (int64_t q = 0; q < nnz; q++) {
        if (r.contains(lvl.crd.coord_at(q))) crd_subsets[c].push_back(q);
      }
    }
  }
  Partition crd_part(lvl.crd.space(), std::move(crd_subsets));
  Partition pos_part = preimage(lvl.pos, crd_part, lvl.crd.space());
  storage_.kind = LevelKind::Compressed;
  storage_.pos = pos_part;
  storage_.crd = crd_part;
  return {pos_part, crd_part};
}

DerivedLevelPartition partition_from_parent(const SparseTensor& tensor, int level,
                                            const Partition& parent_positions) {
  DerivedLevelPartition out;
  if (tensor.level_kind(level) == LevelKind::Dense) {
    Partition positions = expand_dense(tensor, level, parent_positions);
    out.storage.kind = LevelKind::Dense;
    out.storage.dom = project_dense_dom(tensor, level, positions);
    out.next = std::move(positions);
    return out;
  }
  const auto& lvl = std::get<CompressedLevel>(tensor.level(level));
  Partition pos_part = copy_partition(parent_positions, lvl.pos);
  Partition crd_part = image(lvl.pos, pos_part, lvl.crd.space());
  out.storage.kind = LevelKind::Compressed;
  out.storage.pos = pos_part;
  out.storage.crd = crd_part;
  out.next = std::move(crd_part);
  return out;
}

DerivedLevelPartition partition_from_child(const SparseTensor& tensor, int level,
                                           const Partition& own_positions) {
  DerivedLevelPartition out;
  if (tensor.level_kind(level) == LevelKind::Dense) {
    out.storage.kind = LevelKind::Dense;
    out.storage.dom = project_dense_dom(tensor, level, own_positions);
    out.next = contract_dense(tensor, level, own_positions);
    return out;
  }
  const auto& lvl = std::get<CompressedLevel>(tensor.level(level));
  Partition crd_part = copy_partition(own_positions, lvl.crd);
  Partition pos_part = preimage(lvl.pos, crd_part, lvl.crd.space());
  out.storage.kind = LevelKind::Compressed;
  out.storage.pos = pos_part;
  out.storage.crd = crd_part;
  out.next = std::move(pos_part);
  return out;
}

TensorPartitionBundle partition_coordinate_tree(const SparseTensor& tensor,
                                                const std::string& name, int level,
                                                const LevelPartition& initial,
                                                const Partition& up, const Partition& down) {
  TensorPartitionBundle bundle;
  bundle.tensor = name;
  bundle.levels.resize(tensor.num_levels());
  bundle.levels[level] = initial;

  Partition cur = up;
  for (int l = level - 1; l >= 0; l--) {
    DerivedLevelPartition d = partition_from_child(tensor, l, cur);
    bundle.levels[l] = d.storage;
    cur = std::move(d.next);
  }
  cur = down;
  for (int l = level + 1; l < tensor.num_levels(); l++) {
    DerivedLevelPartition d = partition_from_parent(tensor, l, cur);
    bundle.levels[l] = d.storage;
    cur = std::move(d.next);
  }
  bundle.vals = copy_partition(cur, tensor.vals());
  return bundle;
}

TensorPartitionBundle replicated_bundle(const SparseTensor& tensor,
                                        const std::string& name, int64_t colors) {
  TensorPartitionBundle bundle;
  bundle.tensor = name;
  bundle.replicated = true;
  for (int l = 0; l < tensor.num_levels(); l++) {
    LevelPartition lp;
    if (tensor.level_kind(l) == LevelKind::Dense) {
      lp.kind = LevelKind::Dense;
      lp.dom = Partition::replicated(std::get<DenseLevel>(tensor.level(l)).dom, colors);
    } else {
      const auto& lvl = std::get<CompressedLevel>(tensor.level(l));
      lp.kind = LevelKind::Compressed;
      lp.pos = Partition::replicated(lvl.pos.space(), colors);
      lp.crd = Partition::replicated(lvl.crd.space(), colors);
    }
    bundle.levels.push_back(std::move(lp));
  }
  bundle.vals = Partition::replicated(tensor.vals().space(), colors);
  return bundle;
}

}  // namespace dspar
