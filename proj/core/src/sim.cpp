#include "dspar/sim.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "dspar/errors.hpp"

namespace dspar {

ExecMode parse_exec_mode(const std::string& text) {
  if (text == "seq") return ExecMode::Sequential;
  if (text == "par") return ExecMode::Parallel;
  if (text == "instrumented") return ExecMode::Instrumented;
  throw ValidationError("unknown execution mode '" + text + "' (seq | par | instrumented)");
}

std::string Stats::to_json() const {
  nlohmann::ordered_json j;
  j["workers"] = workers;
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& pw : per_worker) {
    nlohmann::ordered_json w;
    nlohmann::ordered_json bytes = nlohmann::ordered_json::object();
    for (const auto& [tensor, b] : pw.bytes_by_tensor) bytes[tensor] = b;
    w["bytes_by_tensor"] = bytes;
    w["work"] = pw.work;
    arr.push_back(w);
  }
  j["per_worker"] = arr;
  j["imbalance"] = imbalance;
  j["combines"] = combines;
  return j.dump(2);
}

std::vector<int64_t> intersect_sorted(const std::vector<int64_t>& a,
                                      const std::vector<int64_t>& b) {
  std::vector<int64_t> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<MergePoint> union_merge(const std::vector<std::vector<int64_t>>& lists) {
  std::vector<MergePoint> out;
  std::vector<size_t> at(lists.size(), 0);
  while (true) {
    int64_t next = INT64_MAX;
    for (size_t s = 0; s < lists.size(); s++) {
      if (at[s] < lists[s].size()) next = std::min(next, lists[s][at[s]]);
    }
    if (next == INT64_MAX) break;
    MergePoint mp;
    mp.coord = next;
    for (size_t s = 0; s < lists.size(); s++) {
      if (at[s] < lists[s].size() && lists[s][at[s]] == next) {
        mp.sources.push_back(static_cast<int>(s));
        at[s]++;
      }
    }
    out.push_back(std::move(mp));
  }
  return out;
}

namespace {

std::vector<int64_t> iota_set(int64_t n) {
  std::vector<int64_t> out(static_cast<size_t>(n));
  std::iota(out.begin(), out.end(), 0);
  return out;
}

int64_t missing_count(const std::vector<int64_t>& needed, const std::vector<int64_t>& have) {
  int64_t missing = 0;
  size_t h = 0;
  for (int64_t i : needed) {
    while (h < have.size() && have[h] < i) h++;
    if (h == have.size() || have[h] != i) missing++;
  }
  return missing;
}

}  // namespace

RegionIndexSets full_sets(const SparseTensor& tensor) {
  RegionIndexSets out;
  for (int l = 0; l < tensor.num_levels(); l++) {
    RegionIndexSets::LevelSets ls;
    if (tensor.level_kind(l) == LevelKind::Dense) {
      ls.dom = iota_set(std::get<DenseLevel>(tensor.level(l)).dom.total());
    } else {
      const auto& lvl = std::get<CompressedLevel>(tensor.level(l));
      ls.pos = iota_set(lvl.pos.size());
      ls.crd = iota_set(lvl.crd.size());
    }
    out.levels.push_back(std::move(ls));
  }
  out.vals = iota_set(tensor.leaf_count());
  return out;
}

RegionIndexSets bundle_color_sets(const TensorPartitionBundle& bundle, int64_t color) {
  RegionIndexSets out;
  for (const auto& lp : bundle.levels) {
    RegionIndexSets::LevelSets ls;
    if (lp.kind == LevelKind::Dense) {
      ls.dom = lp.dom->subset(color);
    } else {
      ls.pos = lp.pos->subset(color);
      ls.crd = lp.crd->subset(color);
    }
    out.levels.push_back(std::move(ls));
  }
  out.vals = bundle.vals.subset(color);
  return out;
}

RegionIndexSets intersect_sets(const RegionIndexSets& a, const RegionIndexSets& b) {
  RegionIndexSets out;
  for (size_t l = 0; l < a.levels.size(); l++) {
    RegionIndexSets::LevelSets ls;
    ls.dom = intersect_sorted(a.levels[l].dom, b.levels[l].dom);
    ls.pos = intersect_sorted(a.levels[l].pos, b.levels[l].pos);
    ls.crd = intersect_sorted(a.levels[l].crd, b.levels[l].crd);
    out.levels.push_back(std::move(ls));
  }
  out.vals = intersect_sorted(a.vals, b.vals);
  return out;
}

int64_t transfer_bytes(const SparseTensor& tensor, const RegionIndexSets& needed,
                       const RegionIndexSets& resident) {
  (void)tensor;
  int64_t bytes = 0;
  for (size_t l = 0; l < needed.levels.size(); l++) {
    const auto& n = needed.levels[l];
    const auto& r = resident.levels[l];
    bytes += missing_count(n.pos, r.pos) * kRangeBytes;
    bytes += missing_count(n.crd, r.crd) * kCoordBytes;
    // dom carries no stored data.
  }
  bytes += missing_count(needed.vals, resident.vals) * kScalarBytes;
  return bytes;
}

// ---------------------------------------------------------------------------
// Worker-local snapshots.

namespace {

/// A copied snapshot of the sub-regions one worker may touch. Lookups off
/// the snapshot raise ClosureViolation: data the worker does not hold.
class WorkerView {
 public:
  WorkerView() = default;
  WorkerView(std::string name, const SparseTensor& t, const RegionIndexSets& needed)
      : name_(std::move(name)), tensor_(&t) {
    levels_.resize(needed.levels.size());
    for (int l = 0; l < t.num_levels(); l++) {
      auto& snap = levels_[l];
      if (t.level_kind(l) == LevelKind::Dense) {
        snap.dom = needed.levels[l].dom;
        continue;
      }
      const auto& lvl = std::get<CompressedLevel>(t.level(l));
      snap.pos_idx = needed.levels[l].pos;
      snap.pos_val.reserve(snap.pos_idx.size());
      for (int64_t p : snap.pos_idx) snap.pos_val.push_back(lvl.pos.range_at(p));
      snap.crd_idx = needed.levels[l].crd;
      snap.crd_val.reserve(snap.crd_idx.size());
      for (int64_t q : snap.crd_idx) snap.crd_val.push_back(lvl.crd.coord_at(q));
    }
    vals_idx_ = needed.vals;
    vals_.reserve(vals_idx_.size());
    for (int64_t p : vals_idx_) vals_.push_back(t.vals().scalar_at(p));
  }

  const SparseTensor& tensor() const { return *tensor_; }

  CoordRange pos_at(int level, int64_t p) const {
    const auto& snap = levels_[level];
    auto it = std::lower_bound(snap.pos_idx.begin(), snap.pos_idx.end(), p);
    if (it == snap.pos_idx.end() || *it != p)
      throw ClosureViolation(name_, "pos[" + std::to_string(level) + "]", p, color_);
    return snap.pos_val[it - snap.pos_idx.begin()];
  }

  int64_t crd_at(int level, int64_t q) const {
    const auto& snap = levels_[level];
    auto it = std::lower_bound(snap.crd_idx.begin(), snap.crd_idx.end(), q);
    if (it == snap.crd_idx.end() || *it != q)
      throw ClosureViolation(name_, "crd[" + std::to_string(level) + "]", q, color_);
    return snap.crd_val[it - snap.crd_idx.begin()];
  }

  double val_at(int64_t p) const {
    auto it = std::lower_bound(vals_idx_.begin(), vals_idx_.end(), p);
    if (it == vals_idx_.end() || *it != p)
      throw ClosureViolation(name_, "vals", p, color_);
    return vals_[it - vals_idx_.begin()];
  }

  void check_dom(int level, int64_t offset) const {
    const auto& dom = levels_[level].dom;
    if (!std::binary_search(dom.begin(), dom.end(), offset))
      throw ClosureViolation(name_, "dom[" + std::to_string(level) + "]", offset, color_);
  }

  /// Owned pos entry whose range contains crd position q.
  int64_t parent_of(int level, int64_t q) const {
    const auto& snap = levels_[level];
    // Ranges are sorted and non-overlapping; find the first owned entry
    // whose range ends at or after q.
    int64_t lo = 0, hi = static_cast<int64_t>(snap.pos_idx.size()) - 1;
    while (lo <= hi) {
      int64_t mid = (lo + hi) / 2;
      const CoordRange& r = snap.pos_val[mid];
      if (!r.empty() && r.contains(q)) return snap.pos_idx[mid];
      if (q < r.lo)
        hi = mid - 1;
      else
        lo = mid + 1;
    }
    throw ClosureViolation(name_, "pos[" + std::to_string(level) + "]", q, color_);
  }

  void set_color(int64_t c) { color_ = c; }

 private:
  struct LevelSnap {
    std::vector<int64_t> dom;
    std::vector<int64_t> pos_idx;
    std::vector<CoordRange> pos_val;
    std::vector<int64_t> crd_idx;
    std::vector<int64_t> crd_val;
  };
  std::string name_;
  const SparseTensor* tensor_ = nullptr;
  std::vector<LevelSnap> levels_;
  std::vector<int64_t> vals_idx_;
  std::vector<double> vals_;
  int64_t color_ = -1;
};

// ---------------------------------------------------------------------------
// Leaf execution: co-iteration of the residual loop nest.

struct CompiledAccess {
  const WorkerView* view = nullptr;
  const SparseTensor* tensor = nullptr;
  // Per level: the env slots of the variables indexing it, in level order.
  std::vector<std::vector<int>> level_slots;
};

struct LeafRun {
  const Plan* plan = nullptr;
  std::map<std::string, WorkerView>* views = nullptr;
  std::vector<int64_t> loop_colors;
  bool instrumented = false;

  std::vector<std::string> slot_names;
  std::vector<int64_t> env;
  std::vector<std::vector<CompiledAccess>> terms;
  std::vector<int> out_slots;
  IndexSpace out_space;
  std::vector<std::pair<int, CoordRange>> out_guards;  // instrumented writes

  std::vector<double> values;
  std::vector<char> touched;
  int64_t work = 0;

  int slot(const std::string& var) const {
    for (size_t s = 0; s < slot_names.size(); s++) {
      if (slot_names[s] == var) return static_cast<int>(s);
    }
    throw ValidationError("leaf: unknown variable '" + var + "'");
  }

  /// Walks an access's levels with bound variables until `stop_level`;
  /// returns the position entering that level, or nothing when a compressed
  /// lookup misses (structural zero).
  std::optional<int64_t> walk_to(const CompiledAccess& a, int stop_level) const {
    int64_t position = 0;
    for (int l = 0; l < stop_level; l++) {
      if (a.tensor->level_kind(l) == LevelKind::Dense) {
        const IndexSpace& dom = std::get<DenseLevel>(a.tensor->level(l)).dom;
        std::vector<int64_t> point;
        point.reserve(a.level_slots[l].size());
        for (int s : a.level_slots[l]) point.push_back(env[s]);
        int64_t local = dom.linearize(point);
        if (instrumented) a.view->check_dom(l, local);
        position = position * dom.total() + local;
      } else {
        CoordRange r = a.view->pos_at(l, position);
        auto q = locate_coord(a, l, r, env[a.level_slots[l][0]]);
        if (!q) return std::nullopt;
        position = *q;
      }
    }
    return position;
  }

  /// Binary search for a coordinate within a crd segment.
  std::optional<int64_t> locate_coord(const CompiledAccess& a, int level, CoordRange r,
                                      int64_t coord) const {
    int64_t lo = r.lo, hi = r.hi;
    while (lo <= hi) {
      int64_t mid = (lo + hi) / 2;
      int64_t c = a.view->crd_at(level, mid);
      if (c == coord) return mid;
      if (c < coord)
        lo = mid + 1;
      else
        hi = mid - 1;
    }
    return std::nullopt;
  }

  std::optional<int64_t> locate_leaf(const CompiledAccess& a) const {
    return walk_to(a, a.tensor->num_levels());
  }

  void accumulate(const std::vector<int>& active) {
    for (int t : active) {
      double value = 1.0;
      bool present = true;
      for (const auto& a : terms[t]) {
        auto p = locate_leaf(a);
        if (!p) {
          present = false;
          break;
        }
        value *= a.view->val_at(*p);
      }
      if (!present) continue;
      std::vector<int64_t> point;
      point.reserve(out_slots.size());
      for (int s : out_slots) point.push_back(env[s]);
      int64_t idx = out_space.linearize(point);
      if (instrumented) {
        for (const auto& [slot, range] : out_guards) {
          if (!range.contains(env[slot]))
            throw ClosureViolation(plan->stmt.lhs.tensor, "write bounds", env[slot],
                                   loop_colors.empty() ? -1 : loop_colors[0]);
        }
      }
      values[idx] += value;
      touched[idx] = 1;
      work++;
    }
  }

  void run() { eval(0, all_terms()); }

  std::vector<int> all_terms() const {
    std::vector<int> out(terms.size());
    std::iota(out.begin(), out.end(), 0);
    return out;
  }

  void eval(size_t var_idx, const std::vector<int>& active) {
    if (active.empty()) return;
    if (var_idx == plan->leaf.vars.size()) {
      accumulate(active);
      return;
    }
    const LeafVar& lv = plan->leaf.vars[var_idx];
    switch (lv.domain) {
      case LeafVar::Domain::Full:
        iterate_coords(var_idx, slot(lv.name), {0, lv.extent - 1}, active);
        break;
      case LeafVar::Domain::WorkerRange: {
        const PlanLoop& loop = plan->loops[lv.loop];
        iterate_coords(var_idx, slot(lv.name), loop.color_bounds[loop_colors[lv.loop]],
                       active);
        break;
      }
      case LeafVar::Domain::PositionRange:
        iterate_positions(var_idx, lv, active);
        break;
    }
  }

  /// Coordinate-value iteration: each active term intersects its compressed
  /// iterators at this variable; the loop runs over the union across terms.
  void iterate_coords(size_t var_idx, int var_slot, CoordRange range,
                      const std::vector<int>& active) {
    if (range.empty()) return;
    // Candidate coordinates per term: intersection of compressed iterators.
    std::vector<std::optional<std::vector<int64_t>>> candidates(active.size());
    bool any_unconstrained = false;
    for (size_t k = 0; k < active.size(); k++) {
      int t = active[k];
      std::optional<std::vector<int64_t>> cand;  // nullopt = unconstrained
      bool dead = false;
      for (const auto& a : terms[t]) {
        int level = -1;
        for (int l = 0; l < a.tensor->num_levels() && level < 0; l++) {
          if (a.tensor->level_kind(l) != LevelKind::Compressed) continue;
          if (a.level_slots[l][0] == var_slot) level = l;
        }
        if (level < 0) continue;
        auto parent = walk_to(a, level);
        std::vector<int64_t> coords;
        if (parent) {
          CoordRange r = a.view->pos_at(level, *parent);
          coords.reserve(static_cast<size_t>(r.size()));
          for (int64_t q = r.lo; q <= r.hi; q++) {
            int64_t c = a.view->crd_at(level, q);
            if (range.contains(c)) coords.push_back(c);
          }
        }
        if (!parent || coords.empty()) {
          dead = true;
          break;
        }
        cand = cand ? intersect_sorted(*cand, coords) : std::move(coords);
        if (cand->empty()) {
          dead = true;
          break;
        }
      }
      if (dead) {
        candidates[k] = std::vector<int64_t>{};
      } else {
        candidates[k] = std::move(cand);
        if (!candidates[k]) any_unconstrained = true;
      }
    }

    auto visit = [&](int64_t coord) {
      std::vector<int> sub;
      for (size_t k = 0; k < active.size(); k++) {
        if (!candidates[k] ||
            std::binary_search(candidates[k]->begin(), candidates[k]->end(), coord))
          sub.push_back(active[k]);
      }
      if (sub.empty()) return;
      env[var_slot] = coord;
      eval(var_idx + 1, sub);
      env[var_slot] = -1;
    };

    if (any_unconstrained) {
      for (int64_t coord = range.lo; coord <= range.hi; coord++) visit(coord);
    } else {
      std::vector<std::vector<int64_t>> lists;
      for (auto& c : candidates) lists.push_back(std::move(*c));
      for (const auto& mp : union_merge(lists)) visit(mp.coord);
    }
  }

  /// Coordinate-position iteration over the split tensor's stored
  /// positions; the path up the tree binds the covered variables.
  void iterate_positions(size_t var_idx, const LeafVar& lv, const std::vector<int>& active) {
    const PlanLoop& loop = plan->loops[lv.loop];
    CoordRange range = loop.color_bounds[loop_colors[lv.loop]];
    const WorkerView& view = views->at(lv.tensor);
    const SparseTensor& t = view.tensor();

    std::vector<int> bound_slots;
    for (const auto& r : lv.bound_roots) bound_slots.push_back(slot(r));

    for (int64_t q = range.lo; q <= range.hi; q++) {
      // Walk from the split level to the root, binding coordinates.
      int64_t position = q;
      for (int l = lv.level; l >= 0; l--) {
        if (t.level_kind(l) == LevelKind::Dense) {
          const IndexSpace& dom = std::get<DenseLevel>(t.level(l)).dom;
          int64_t local = position % dom.total();
          if (instrumented) view.check_dom(l, local);
          auto point = dom.delinearize(local);
          int base = 0;
          for (int m = 0; m < l; m++)
            base += static_cast<int>(t.level_storage_dims(m).size());
          for (size_t j = 0; j < point.size(); j++)
            env[bound_slots[base + j]] = point[j];
          position /= dom.total();
        } else {
          int base = 0;
          for (int m = 0; m < l; m++)
            base += static_cast<int>(t.level_storage_dims(m).size());
          env[bound_slots[base]] = view.crd_at(l, position);
          if (l > 0) position = view.parent_of(l, position);
        }
      }
      eval(var_idx + 1, active);
      for (int s : bound_slots) env[s] = -1;
    }
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// Residency.

namespace {

/// Per-worker needed sets of `tensor` after intersecting its bundles at all
/// loops up to and including `upto` (-1 means only root state).
RegionIndexSets worker_needed_sets(const Plan& plan, const MachineGrid& machine,
                                   const SparseTensor& tensor, const std::string& name,
                                   const std::vector<int64_t>& loop_colors, int upto) {
  RegionIndexSets needed = full_sets(tensor);
  for (int k = 0; k <= upto && k < static_cast<int>(plan.loops.size()); k++) {
    auto it = plan.loops[k].bundle_of.find(name);
    if (it == plan.loops[k].bundle_of.end()) continue;
    needed = intersect_sets(
        needed, bundle_color_sets(plan.bundles[it->second], loop_colors[k]));
  }
  (void)machine;
  return needed;
}

std::vector<std::vector<int64_t>> loop_tuples(const Plan& plan) {
  std::vector<std::vector<int64_t>> tuples{{}};
  for (const auto& loop : plan.loops) {
    std::vector<std::vector<int64_t>> next;
    for (const auto& t : tuples) {
      for (int64_t c = 0; c < loop.pieces; c++) {
        auto e = t;
        e.push_back(c);
        next.push_back(std::move(e));
      }
    }
    tuples = std::move(next);
  }
  return tuples;
}

int64_t tuple_worker(const Plan& plan, const MachineGrid& machine,
                     const std::vector<int64_t>& colors) {
  std::vector<int64_t> coords(machine.rank(), 0);
  for (size_t k = 0; k < plan.loops.size(); k++) {
    int d = machine.dim_index(plan.loops[k].machine_dim);
    coords[d] = colors[k];
  }
  return machine.worker_id(coords);
}

}  // namespace

Residency residency_from_placements(const std::map<std::string, Plan>& placements,
                                    const MachineGrid& machine, const TensorSet& tensors) {
  Residency out;
  for (const auto& [name, placement] : placements) {
    const SparseTensor& tensor = tensors.at(name);
    std::vector<RegionIndexSets> per_worker(machine.total_workers());
    // A worker holds the block of its coordinates along the placement's
    // distributed dimensions; unmatched grid dimensions replicate.
    for (int64_t w = 0; w < machine.total_workers(); w++) {
      auto coords = machine.worker_coords(w);
      std::vector<int64_t> colors;
      for (const auto& loop : placement.loops)
        colors.push_back(coords[machine.dim_index(loop.machine_dim)]);
      per_worker[w] = worker_needed_sets(placement, machine, tensor, name, colors,
                                         static_cast<int>(placement.loops.size()) - 1);
    }
    out.tensors[name] = std::move(per_worker);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output assembly.

std::optional<std::string> pattern_reuse_source(
    const TinStatement& stmt, const std::map<std::string, FormatSpec>& formats) {
  if (stmt.terms.size() != 1) return std::nullopt;
  const FormatSpec& of = formats.at(stmt.lhs.tensor);
  bool out_sparse = std::any_of(of.kinds.begin(), of.kinds.end(),
                                [](LevelKind k) { return k == LevelKind::Compressed; });
  if (!out_sparse) return std::nullopt;

  const Access* sparse = nullptr;
  for (const auto& a : stmt.terms[0]) {
    const FormatSpec& f = formats.at(a.tensor);
    bool has_compressed = std::any_of(f.kinds.begin(), f.kinds.end(), [](LevelKind k) {
      return k == LevelKind::Compressed;
    });
    if (!has_compressed) continue;
    if (sparse) return std::nullopt;  // two sparse inputs: pattern unknown
    sparse = &a;
  }
  if (!sparse) return std::nullopt;

  const FormatSpec& sf = formats.at(sparse->tensor);
  size_t k = stmt.lhs.vars.size();
  if (sf.order() < static_cast<int>(k)) return std::nullopt;
  for (size_t s = 0; s < k; s++) {
    int mode = sf.mode_order[s];
    if (mode >= static_cast<int>(k)) return std::nullopt;
    if (of.mode_order[s] != mode) return std::nullopt;
    if (of.kinds[s] != sf.kinds[s]) return std::nullopt;
    if (sparse->vars[mode] != stmt.lhs.vars[mode]) return std::nullopt;
  }
  // A dense run crossing the cut would make the leading levels inseparable.
  if (static_cast<int>(k) < sf.order() && sf.kinds[k] == LevelKind::Dense &&
      sf.kinds[k - 1] == LevelKind::Dense)
    return std::nullopt;
  return sparse->tensor;
}

namespace {

/// Copies the reuse source's leading levels as the output's structure.
SparseTensor structure_from_source(const TinStatement& stmt, const FormatSpec& of,
                                   const std::vector<int64_t>& out_dims,
                                   const SparseTensor& source) {
  size_t k = stmt.lhs.vars.size();
  std::vector<LevelStorage> levels;
  size_t covered = 0;
  for (int l = 0; l < source.num_levels() && covered < k; l++) {
    levels.push_back(source.level(l));
    covered += source.level_storage_dims(l).size();
  }
  if (covered != k)
    throw ValidationError("pattern reuse: level boundary does not align");
  int64_t leaves = 1;
  for (const auto& level : levels) {
    if (const auto* d = std::get_if<DenseLevel>(&level))
      leaves *= d->dom.total();
    else
      leaves = std::get<CompressedLevel>(level).crd.size();
  }
  return SparseTensor::from_parts(out_dims, of, std::move(levels),
                                  std::vector<double>(static_cast<size_t>(leaves), 0.0));
}

}  // namespace

SparseTensor make_output_stub(const TinStatement& stmt,
                              const std::map<std::string, FormatSpec>& formats,
                              const std::map<std::string, std::vector<int64_t>>& dims,
                              const TensorSet& inputs) {
  const auto& out_dims = dims.at(stmt.lhs.tensor);
  const FormatSpec& of = formats.at(stmt.lhs.tensor);
  if (auto src = pattern_reuse_source(stmt, formats))
    return structure_from_source(stmt, of, out_dims, inputs.at(*src));
  return SparseTensor::pack(out_dims, of, {});
}

SparseTensor assemble_output(const TinStatement& stmt,
                             const std::map<std::string, FormatSpec>& formats,
                             const std::map<std::string, std::vector<int64_t>>& dims,
                             const TensorSet& inputs, const std::vector<double>& values,
                             const std::vector<char>& touched) {
  const auto& out_dims = dims.at(stmt.lhs.tensor);
  const FormatSpec& of = formats.at(stmt.lhs.tensor);
  IndexSpace logical(out_dims);

  if (auto src = pattern_reuse_source(stmt, formats)) {
    SparseTensor out = structure_from_source(stmt, of, out_dims, inputs.at(*src));
    for (int64_t p = 0; p < out.leaf_count(); p++) {
      auto coords = out.path_coords(out.num_levels() - 1, p);
      out.vals().scalar_values()[p] = values[logical.linearize(coords)];
    }
    return out;
  }

  bool all_dense = std::all_of(of.kinds.begin(), of.kinds.end(),
                               [](LevelKind k) { return k == LevelKind::Dense; });
  if (all_dense) {
    SparseTensor out = SparseTensor::pack(out_dims, of, {});
    for (int64_t p = 0; p < out.leaf_count(); p++) {
      auto coords = out.path_coords(out.num_levels() - 1, p);
      out.vals().scalar_values()[p] = values[logical.linearize(coords)];
    }
    return out;
  }

  // Two-phase assembly: a symbolic counting pass sizes pos and crd exactly,
  // then the fill pass writes without resizing.
  std::vector<std::vector<int64_t>> keys;  // storage-order coordinates
  std::vector<int64_t> flat;
  for (int64_t idx = 0; idx < logical.total(); idx++) {
    if (!touched[idx]) continue;
    auto coords = logical.delinearize(idx);
    std::vector<int64_t> key(coords.size());
    for (size_t s = 0; s < key.size(); s++) key[s] = coords[of.mode_order[s]];
    keys.push_back(std::move(key));
    flat.push_back(idx);
  }
  std::vector<size_t> order(keys.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return keys[a] < keys[b]; });

  auto groups = level_grouping(of);
  int num_levels = static_cast<int>(groups.size());

  // Phase 1: per-level sizes.
  std::vector<int64_t> level_count(num_levels, 0);
  {
    std::vector<int64_t> entry_pos(order.size(), 0);
    int64_t parent_count = 1;
    int storage_base = 0;
    for (int l = 0; l < num_levels; l++) {
      if (of.kinds[groups[l][0]] == LevelKind::Dense) {
        std::vector<int64_t> extents;
        for (int k : groups[l]) extents.push_back(out_dims[of.mode_order[k]]);
        IndexSpace dom(extents);
        for (size_t e = 0; e < order.size(); e++) {
          std::vector<int64_t> local;
          for (size_t j = 0; j < groups[l].size(); j++)
            local.push_back(keys[order[e]][storage_base + j]);
          entry_pos[e] = entry_pos[e] * dom.total() + dom.linearize(local);
        }
        parent_count *= dom.total();
        level_count[l] = parent_count;
      } else {
        int64_t count = 0;
        int64_t prev_parent = -1, prev_coord = -1;
        for (size_t e = 0; e < order.size(); e++) {
          int64_t coord = keys[order[e]][storage_base];
          if (entry_pos[e] != prev_parent || coord != prev_coord) {
            prev_parent = entry_pos[e];
            prev_coord = coord;
            count++;
          }
          entry_pos[e] = count - 1;
        }
        parent_count = count;
        level_count[l] = count;
      }
      storage_base += static_cast<int>(groups[l].size());
    }
  }

  // Phase 2: fill exactly-sized buffers.
  std::vector<LevelStorage> levels;
  std::vector<int64_t> entry_pos(order.size(), 0);
  int64_t parent_count = 1;
  int storage_base = 0;
  for (int l = 0; l < num_levels; l++) {
    if (of.kinds[groups[l][0]] == LevelKind::Dense) {
      std::vector<int64_t> extents;
      for (int k : groups[l]) extents.push_back(out_dims[of.mode_order[k]]);
      IndexSpace dom(extents);
      for (size_t e = 0; e < order.size(); e++) {
        std::vector<int64_t> local;
        for (size_t j = 0; j < groups[l].size(); j++)
          local.push_back(keys[order[e]][storage_base + j]);
        entry_pos[e] = entry_pos[e] * dom.total() + dom.linearize(local);
      }
      parent_count *= dom.total();
      levels.push_back(DenseLevel{std::move(dom)});
    } else {
      int64_t nnz = level_count[l];
      std::vector<CoordRange> pos(static_cast<size_t>(parent_count));
      std::vector<int64_t> crd(static_cast<size_t>(nnz));
      int64_t cursor = 0;
      size_t e = 0;
      for (int64_t p = 0; p < parent_count; p++) {
        int64_t start = cursor;
        while (e < order.size() && entry_pos[e] == p) {
          int64_t coord = keys[order[e]][storage_base];
          if (cursor > start && crd[cursor - 1] == coord) {
            entry_pos[e] = cursor - 1;
          } else {
            if (cursor >= nnz)
              throw std::logic_error("two-phase assembly: fill past the counted size");
            crd[cursor] = coord;
            entry_pos[e] = cursor;
            cursor++;
          }
          e++;
        }
        pos[p] = {start, cursor - 1};
      }
      if (cursor != nnz)
        throw std::logic_error("two-phase assembly: fill does not match the counted size");
      parent_count = nnz;
      int64_t pos_count = static_cast<int64_t>(pos.size());
      levels.push_back(
          CompressedLevel{Region::ranges(IndexSpace({pos_count}), std::move(pos), nnz),
                          Region::coordinates(IndexSpace({nnz}), std::move(crd))});
    }
    storage_base += static_cast<int>(groups[l].size());
  }

  std::vector<double> vals(static_cast<size_t>(parent_count), 0.0);
  for (size_t e = 0; e < order.size(); e++) vals[entry_pos[e]] = values[flat[order[e]]];
  return SparseTensor::from_parts(out_dims, of, std::move(levels), std::move(vals));
}

CombineResult reduce_combine(const std::vector<WorkerPartial>& partials, bool allow_overlap) {
  CombineResult out;
  if (partials.empty()) return out;
  size_t n = partials[0].values.size();
  out.values.assign(n, 0.0);
  out.touched.assign(n, 0);
  for (const auto& p : partials) {
    for (size_t i = 0; i < n; i++) {
      if (!p.touched[i]) continue;
      if (out.touched[i]) {
        if (!allow_overlap)
          throw std::logic_error(
              "overlapping partial outputs without a reduce-combine step");
        out.combines++;
      }
      out.values[i] += p.values[i];
      out.touched[i] = 1;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Execution.

ExecResult execute(const Plan& plan, const TensorSet& tensors, const MachineGrid& machine,
                   const Residency& residency, ExecMode mode) {
  int64_t total_workers = machine.total_workers();
  Stats stats;
  stats.workers = total_workers;
  stats.per_worker.resize(static_cast<size_t>(total_workers));
  auto tensor_names = plan.stmt.tensor_names();
  for (auto& pw : stats.per_worker) {
    for (const auto& t : tensor_names) pw.bytes_by_tensor[t] = 0;
  }

  const std::vector<int64_t>& out_dims = plan.dims.at(plan.stmt.lhs.tensor);
  IndexSpace out_space(out_dims);

  // Env slots: all root TIN variables.
  std::vector<std::string> slot_names = plan.stmt.vars;

  auto tuples = loop_tuples(plan);
  struct Task {
    std::vector<int64_t> colors;
    int64_t wid;
  };
  std::vector<Task> tasks;
  for (auto& colors : tuples) {
    Task t;
    t.wid = tuple_worker(plan, machine, colors);
    t.colors = std::move(colors);
    tasks.push_back(std::move(t));
  }
  std::sort(tasks.begin(), tasks.end(), [](const Task& a, const Task& b) {
    return a.wid < b.wid;
  });

  struct TaskResult {
    WorkerPartial partial;
    std::map<std::string, int64_t> bytes;
    int64_t work = 0;
  };
  std::vector<TaskResult> results(tasks.size());

  // Communicate site per tensor: the loop index, or -1 for the root.
  std::map<std::string, int> comm_site;
  for (const auto& c : plan.root_communicates) comm_site[c.tensor] = -1;
  for (size_t k = 0; k < plan.loops.size(); k++) {
    for (const auto& c : plan.loops[k].communicates)
      comm_site[c.tensor] = static_cast<int>(k);
  }

  auto run_task = [&](size_t index) {
    const Task& task = tasks[index];
    TaskResult& result = results[index];

    std::map<std::string, WorkerView> views;
    for (const auto& name : tensor_names) {
      const SparseTensor& tensor = tensors.at(name);
      auto site = comm_site.find(name);
      RegionIndexSets needed =
          site == comm_site.end() || site->second < 0
              ? full_sets(tensor)
              : worker_needed_sets(plan, machine, tensor, name, task.colors, site->second);
      int64_t bytes;
      auto rit = residency.tensors.find(name);
      if (rit == residency.tensors.end()) {
        bytes = 0;  // no declared placement: treated as already resident
      } else {
        bytes = transfer_bytes(tensor, needed, rit->second[task.wid]);
      }
      result.bytes[name] = bytes;
      WorkerView view(name, tensor, needed);
      view.set_color(task.colors.empty() ? 0 : task.colors[0]);
      views.emplace(name, std::move(view));
    }

    LeafRun leaf;
    leaf.plan = &plan;
    leaf.views = &views;
    leaf.loop_colors = task.colors;
    leaf.instrumented = mode == ExecMode::Instrumented;
    leaf.slot_names = slot_names;
    leaf.env.assign(slot_names.size(), -1);
    leaf.out_space = out_space;
    for (const auto& v : plan.stmt.lhs.vars) leaf.out_slots.push_back(leaf.slot(v));

    // Compile accesses.
    auto compile = [&](const Access& a) {
      CompiledAccess ca;
      ca.view = &views.at(a.tensor);
      ca.tensor = &ca.view->tensor();
      const SparseTensor& t = *ca.tensor;
      for (int l = 0; l < t.num_levels(); l++) {
        std::vector<int> slots;
        for (int storage_dim : t.level_storage_dims(l)) {
          int mode = t.format().mode_order[storage_dim];
          slots.push_back(leaf.slot(a.vars[mode]));
        }
        ca.level_slots.push_back(std::move(slots));
      }
      return ca;
    };
    for (const auto& term : plan.stmt.terms) {
      std::vector<CompiledAccess> cterm;
      for (const auto& a : term) cterm.push_back(compile(a));
      leaf.terms.push_back(std::move(cterm));
    }

    // Output write guards from the output's partition bounds.
    if (leaf.instrumented) {
      const std::string& out_name = plan.stmt.lhs.tensor;
      for (size_t k = 0; k < plan.loops.size(); k++) {
        for (const auto& step : plan.loops[k].partitions) {
          if (step.tensor != out_name) continue;
          std::string guard_var;
          if (step.bounds.kind == BoundsSource::Kind::UniverseDivide) {
            guard_var = plan.loops[k].source_var;  // the divided root variable
          } else if (step.bounds.kind == BoundsSource::Kind::Projected) {
            // Projected bounds constrain the split tensor's top variable.
            const SparseTensor& st = tensors.at(plan.loops[k].split_tensor);
            for (const auto& a : plan.stmt.rhs_accesses()) {
              if (a.tensor == plan.loops[k].split_tensor && guard_var.empty())
                guard_var = a.vars[st.format().mode_order[0]];
            }
          } else {
            continue;  // replicated: unconstrained
          }
          bool is_out_var = std::find(plan.stmt.lhs.vars.begin(), plan.stmt.lhs.vars.end(),
                                      guard_var) != plan.stmt.lhs.vars.end();
          if (!is_out_var) continue;
          leaf.out_guards.push_back(
              {leaf.slot(guard_var), step.bounds.bounds[task.colors[k]]});
        }
      }
    }

    leaf.values.assign(static_cast<size_t>(out_space.total()), 0.0);
    leaf.touched.assign(static_cast<size_t>(out_space.total()), 0);
    leaf.run();

    result.partial.values = std::move(leaf.values);
    result.partial.touched = std::move(leaf.touched);
    result.work = leaf.work;
  };

  if (mode == ExecMode::Parallel) {
    std::atomic<size_t> next{0};
    unsigned n = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                                 static_cast<unsigned>(tasks.size())));
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(n);
    for (unsigned i = 0; i < n; i++) {
      pool.emplace_back([&, i] {
        try {
          while (true) {
            size_t k = next.fetch_add(1);
            if (k >= tasks.size()) break;
            run_task(k);
          }
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  } else {
    for (size_t k = 0; k < tasks.size(); k++) run_task(k);
  }

  std::vector<WorkerPartial> partials;
  partials.reserve(tasks.size());
  for (size_t k = 0; k < tasks.size(); k++) {
    stats.per_worker[tasks[k].wid].work = results[k].work;
    for (const auto& [t, b] : results[k].bytes)
      stats.per_worker[tasks[k].wid].bytes_by_tensor[t] = b;
    partials.push_back(std::move(results[k].partial));
  }

  CombineResult combined = reduce_combine(partials, plan.combine.has_value());
  stats.combines = combined.combines;

  int64_t total_work = 0, max_work = 0;
  for (const auto& pw : stats.per_worker) {
    total_work += pw.work;
    max_work = std::max(max_work, pw.work);
  }
  stats.imbalance = total_work == 0
                        ? 1.0
                        : static_cast<double>(max_work) * static_cast<double>(total_workers) /
                              static_cast<double>(total_work);

  SparseTensor output = assemble_output(plan.stmt, plan.formats, plan.dims, tensors,
                                        combined.values, combined.touched);
  return {std::move(output), std::move(stats)};
}

}  // namespace dspar
