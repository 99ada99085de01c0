#include "dspar/planner.hpp"

#include <algorithm>

#include "dspar/errors.hpp"
#include "dspar/level_partition.hpp"

namespace dspar {

std::vector<CoordRange> divide_bounds(int64_t n, int64_t pieces) {
  std::vector<CoordRange> out;
  out.reserve(static_cast<size_t>(pieces));
  int64_t block = pieces > 0 ? n / pieces : 0;
  for (int64_t c = 0; c < pieces; c++) {
    int64_t lo = c * block;
    int64_t hi = c + 1 == pieces ? n - 1 : lo + block - 1;  // last piece absorbs the rest
    out.push_back({lo, hi});
  }
  return out;
}

std::vector<CoordRange> split_bounds(int64_t n, int64_t factor) {
  std::vector<CoordRange> out;
  for (int64_t lo = 0; lo < n; lo += factor) {
    out.push_back({lo, std::min(lo + factor, n) - 1});
  }
  return out;
}

IterationClass classify_iteration(const ScheduledStatement& sched, const std::string& var) {
  const IndexVarInfo& info = sched.var(var);
  if (info.position_space) return {true, info.position_tensor};
  if (info.kind == IndexVarInfo::Kind::Root || info.kind == IndexVarInfo::Kind::Fused)
    return {false, {}};
  return classify_iteration(sched, info.parents[0]);
}

namespace {

int64_t top_coordinate(const SparseTensor& source, int64_t position) {
  if (source.level_kind(0) == LevelKind::Dense) {
    const IndexSpace& dom = std::get<DenseLevel>(source.level(0)).dom;
    return dom.delinearize(position)[0];
  }
  return std::get<CompressedLevel>(source.level(0)).crd.coord_at(position);
}

}  // namespace

std::vector<CoordRange> project_to_universe(const Partition& top_positions,
                                            const SparseTensor& source) {
  std::vector<CoordRange> out;
  for (int64_t c = 0; c < top_positions.num_colors(); c++) {
    const auto& owned = top_positions.subset(c);
    if (owned.empty()) {
      out.push_back({0, -1});
      continue;
    }
    int64_t lo = top_coordinate(source, owned.front());
    int64_t hi = lo;
    for (int64_t p : owned) {
      int64_t coord = top_coordinate(source, p);
      lo = std::min(lo, coord);
      hi = std::max(hi, coord);
    }
    out.push_back({lo, hi});
  }
  return out;
}

namespace {

/// Partition of a tensor's top-level positions, what projection reads.
const Partition& top_positions_of(const SparseTensor& t, const TensorPartitionBundle& b) {
  if (t.level_kind(0) == LevelKind::Dense) return *b.levels[0].dom;
  return *b.levels[0].crd;
}

std::vector<CoordRange> bounds_for_loop(const ScheduledStatement& sched,
                                        const IndexVarInfo& info, const std::string& var,
                                        int64_t universe, int64_t pieces) {
  switch (info.kind) {
    case IndexVarInfo::Kind::DivideOuter: {
      if (sched.machine.extent(info.grid_dim) != pieces)
        throw ValidationError("variable '" + var +
                              "' divided by one machine dimension but distributed onto another");
      return divide_bounds(universe, pieces);
    }
    case IndexVarInfo::Kind::SplitOuter: {
      auto chunks = split_bounds(universe, info.split_factor);
      if (static_cast<int64_t>(chunks.size()) > pieces)
        throw ValidationError("split of '" + var +
                              "' produces more pieces than the machine dimension has workers");
      while (static_cast<int64_t>(chunks.size()) < pieces)
        chunks.push_back({universe, universe - 1});
      return chunks;
    }
    case IndexVarInfo::Kind::Root: {
      if (universe > pieces)
        throw ValidationError("distributing '" + var +
                              "' directly needs a machine dimension of at least its extent");
      std::vector<CoordRange> out;
      for (int64_t c = 0; c < pieces; c++) {
        if (c < universe)
          out.push_back({c, c});
        else
          out.push_back({universe, universe - 1});
      }
      return out;
    }
    default:
      throw ValidationError("variable '" + var + "' cannot be distributed directly");
  }
}

struct TensorLevel {
  std::string tensor;
  int level = 0;
  int submode = 0;
};

/// The (level, submode) each tensor is accessed at by the roots of `var`.
std::vector<TensorLevel> partitioned_levels(const ScheduledStatement& sched,
                                            const std::string& var) {
  std::vector<TensorLevel> out;
  for (const auto& al : sched.accessed_levels(var)) {
    bool seen = false;
    for (const auto& e : out) {
      if (e.tensor != al.tensor) continue;
      seen = true;
      if (e.level != al.level || e.submode != al.submode)
        throw ValidationError("variable indexes tensor '" + al.tensor +
                              "' at two different levels");
    }
    if (!seen) out.push_back({al.tensor, al.level, al.submode});
  }
  return out;
}

}  // namespace

Plan plan(const ScheduledStatement& sched, const TensorSet& tensors) {
  Plan out;
  out.stmt = sched.stmt;
  out.machine = sched.machine;
  out.formats = sched.formats;
  out.dims = sched.dims;
  out.parallelize_notes = sched.parallelizes;

  for (const auto& name : sched.stmt.tensor_names()) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ValidationError("no tensor data for '" + name + "'");
    if (it->second.dims() != sched.dims.at(name))
      throw ValidationError("tensor '" + name + "' does not match its declared dimensions");
  }

  // Step listing order: rhs tensors by appearance, output last.
  std::vector<std::string> step_order;
  for (const auto& a : sched.stmt.rhs_accesses()) {
    if (std::find(step_order.begin(), step_order.end(), a.tensor) == step_order.end())
      step_order.push_back(a.tensor);
  }
  step_order.push_back(sched.stmt.lhs.tensor);

  const std::string& output = sched.stmt.lhs.tensor;
  bool combine = false;

  for (size_t loop_index = 0; loop_index < sched.loops.size(); loop_index++) {
    const auto& loop = sched.loops[loop_index];
    if (!loop.distributed) break;
    const IndexVarInfo& info = sched.var(loop.name);
    IterationClass cls = classify_iteration(sched, loop.name);
    int64_t pieces = sched.machine.extent(loop.machine_dim);

    PlanLoop pl;
    pl.var = loop.name;
    pl.machine_dim = loop.machine_dim;
    pl.pieces = pieces;
    pl.source_var = info.kind == IndexVarInfo::Kind::Root ? loop.name : info.parents[0];
    pl.inner_var = info.partner;

    auto add_step = [&](PartitionStep step, TensorPartitionBundle bundle) {
      step.bundle = static_cast<int>(out.bundles.size());
      out.bundles.push_back(std::move(bundle));
      pl.bundle_of[step.tensor] = step.bundle;
      pl.partitions.push_back(std::move(step));
    };

    if (!cls.position) {
      auto roots = sched.roots_of(loop.name);
      if (roots.size() != 1)
        throw ValidationError("coordinate-value distribution needs a single root variable");
      const std::string& root = roots[0];
      int64_t n = sched.var_extent(root);
      pl.color_bounds = bounds_for_loop(sched, info, loop.name, n, pieces);

      auto levels = partitioned_levels(sched, loop.name);
      for (const auto& name : step_order) {
        auto it = std::find_if(levels.begin(), levels.end(),
                               [&](const TensorLevel& tl) { return tl.tensor == name; });
        if (it == levels.end()) continue;
        const SparseTensor& t = tensors.at(name);
        LevelPartitioner lp(t, it->level, it->submode);
        lp.init_universe_partition();
        for (int64_t c = 0; c < pieces; c++)
          lp.create_universe_partition_entry(c, pl.color_bounds[c]);
        auto [up, down] = lp.finalize_universe_partition();
        TensorPartitionBundle bundle =
            partition_coordinate_tree(t, name, it->level, lp.storage_partition(), up, down);

        PartitionStep step;
        step.tensor = name;
        step.level = it->level;
        step.submode = it->submode;
        step.fn = PartitionStep::Fn::Universe;
        step.bounds = {BoundsSource::Kind::UniverseDivide, loop.name, pieces, n, "",
                       pl.color_bounds};
        add_step(std::move(step), std::move(bundle));
      }
    } else {
      pl.position_space = true;
      pl.split_tensor = cls.tensor;
      const SparseTensor& split = tensors.at(cls.tensor);
      auto roots = sched.roots_of(loop.name);
      const FormatSpec& sf = sched.formats.at(cls.tensor);
      auto [level, submode] = format_level_of_mode(sf, sf.mode_order[roots.size() - 1]);
      pl.split_level = level;
      int64_t nnz = split.level_positions(level);
      pl.color_bounds = bounds_for_loop(sched, info, loop.name, nnz, pieces);

      LevelPartitioner lp(split, level, submode);
      lp.init_nonzero_partition();
      for (int64_t c = 0; c < pieces; c++)
        lp.create_nonzero_partition_entry(c, pl.color_bounds[c]);
      auto [up, down] = lp.finalize_nonzero_partition();
      TensorPartitionBundle split_bundle =
          partition_coordinate_tree(split, cls.tensor, level, lp.storage_partition(), up, down);
      const Partition& top = top_positions_of(split, split_bundle);
      auto projected = project_to_universe(top, split);

      PartitionStep split_step;
      split_step.tensor = cls.tensor;
      split_step.level = level;
      split_step.submode = submode;
      split_step.fn = PartitionStep::Fn::NonZero;
      split_step.bounds = {BoundsSource::Kind::NonZeroDivide, loop.name, pieces, nnz, "",
                           pl.color_bounds};
      add_step(std::move(split_step), std::move(split_bundle));

      // Seed every other tensor from the split tensor's top-level
      // ownership; tensors not sharing its outer variable are replicated.
      const auto rhs = sched.stmt.rhs_accesses();
      const Access* split_access = nullptr;
      for (const auto& a : rhs) {
        if (a.tensor == cls.tensor && !split_access) split_access = &a;
      }
      const std::string top_var = split_access->vars[sf.mode_order[0]];
      for (const auto& name : step_order) {
        if (name == cls.tensor) continue;
        const SparseTensor& t = tensors.at(name);
        const Access* access = name == output ? &sched.stmt.lhs : nullptr;
        for (const auto& a : rhs) {
          if (a.tensor == name && !access) access = &a;
        }
        int mode = -1;
        for (size_t m = 0; m < access->vars.size(); m++) {
          if (access->vars[m] == top_var) mode = static_cast<int>(m);
        }
        if (mode < 0) {
          PartitionStep step;
          step.tensor = name;
          step.fn = PartitionStep::Fn::Replicate;
          step.bounds.kind = BoundsSource::Kind::Replicated;
          step.bounds.pieces = pieces;
          add_step(std::move(step), replicated_bundle(t, name, pieces));
          continue;
        }
        auto [olevel, osub] = format_level_of_mode(sched.formats.at(name), mode);
        LevelPartitioner olp(t, olevel, osub);
        olp.init_projected_partition();
        for (int64_t c = 0; c < pieces; c++)
          olp.create_projected_partition_entry(c, projected[c]);
        auto [oup, odown] = olp.finalize_projected_partition();
        TensorPartitionBundle bundle =
            partition_coordinate_tree(t, name, olevel, olp.storage_partition(), oup, odown);
        PartitionStep step;
        step.tensor = name;
        step.level = olevel;
        step.submode = osub;
        step.fn = PartitionStep::Fn::Projected;
        step.bounds = {BoundsSource::Kind::Projected, loop.name, pieces,
                       sched.var_extent(top_var), cls.tensor, projected};
        add_step(std::move(step), std::move(bundle));
      }
    }

    // Bundles for tensors communicated here but not partitioned above.
    for (const auto& d : sched.communicates) {
      if (d.at_var != loop.name) continue;
      const std::string& name = d.tensors[0];
      if (pl.bundle_of.count(name)) continue;
      PartitionStep step;
      step.tensor = name;
      step.fn = PartitionStep::Fn::Replicate;
      step.bounds.kind = BoundsSource::Kind::Replicated;
      step.bounds.pieces = pieces;
      add_step(std::move(step), replicated_bundle(tensors.at(name), name, pieces));
    }

    for (const auto& d : sched.communicates) {
      if (d.at_var == loop.name) pl.communicates.push_back({d.tensors[0], d.at_var});
    }

    if (sched.derives_from_reduction(loop.name)) combine = true;
    if (pl.bundle_of.count(output) && !out.bundles[pl.bundle_of.at(output)].vals.disjoint())
      combine = true;

    out.loops.push_back(std::move(pl));
  }

  // Residual loop nest.
  for (size_t k = 0; k < sched.loops.size(); k++) {
    const auto& loop = sched.loops[k];
    const IndexVarInfo& info = sched.var(loop.name);
    if (loop.distributed) {
      LeafVar lv;
      lv.loop = static_cast<int>(k);
      if (out.loops[k].position_space) {
        lv.name = out.loops[k].source_var;
        lv.domain = LeafVar::Domain::PositionRange;
        lv.tensor = out.loops[k].split_tensor;
        lv.level = out.loops[k].split_level;
        lv.bound_roots = sched.roots_of(loop.name);
      } else {
        lv.name = sched.roots_of(loop.name)[0];
        lv.domain = LeafVar::Domain::WorkerRange;
      }
      out.leaf.vars.push_back(std::move(lv));
      continue;
    }
    // Inner halves of divided variables ride along with their root's range.
    if (info.kind == IndexVarInfo::Kind::DivideInner ||
        info.kind == IndexVarInfo::Kind::SplitInner)
      continue;
    LeafVar lv;
    lv.name = loop.name;
    lv.domain = LeafVar::Domain::Full;
    lv.extent = sched.var_extent(loop.name);
    out.leaf.vars.push_back(std::move(lv));
  }
  out.leaf.reduction = !sched.stmt.reduction_vars.empty();

  for (const auto& d : sched.communicates) {
    if (d.at_var.empty()) out.root_communicates.push_back({d.tensors[0], ""});
  }

  if (combine) out.combine = ReduceCombine{output, '+'};
  return out;
}

Plan lower_tdn(const TdnStatement& tdn, const FormatSpec& format,
               const std::vector<int64_t>& dims, const MachineGrid& machine,
               const SparseTensor& tensor) {
  auto matches = validate_tdn(tdn, format, machine);

  TinStatement stmt;
  std::string placed = "_" + tdn.tensor;
  stmt.lhs = Access{placed, tdn.dim_names};
  stmt.terms = {{Access{tdn.tensor, tdn.dim_names}}};
  stmt.vars = tdn.dim_names;

  std::map<std::string, FormatSpec> formats{{placed, format}, {tdn.tensor, format}};
  std::map<std::string, std::vector<int64_t>> dim_map{{placed, dims}, {tdn.tensor, dims}};

  Schedule sched;
  std::vector<std::string> order;
  for (int k = 0; k < format.order(); k++) order.push_back(tdn.dim_names[format.mode_order[k]]);
  if (order != tdn.dim_names) {
    Directive d{};
    d.kind = Directive::Kind::Reorder;
    d.order = order;
    sched.directives.push_back(d);
  }

  for (const auto& group : tdn.fusions) {
    std::string cur = group.parts[0];
    for (size_t i = 1; i < group.parts.size(); i++) {
      std::string next =
          i + 1 == group.parts.size() ? group.fused : group.fused + "__" + std::to_string(i);
      Directive d{};
      d.kind = Directive::Kind::Fuse;
      d.fused_a = cur;
      d.fused_b = group.parts[i];
      d.fused = next;
      sched.directives.push_back(d);
      auto at = std::find(order.begin(), order.end(), cur);
      *at = next;
      order.erase(std::find(order.begin(), order.end(), group.parts[i]));
      cur = next;
    }
  }

  std::vector<std::string> outers;
  for (const auto& match : matches) {
    Directive d{};
    d.kind = Directive::Kind::Divide;
    d.var = match.name;
    d.outer = match.name + "_o";
    d.inner = match.name + "_i";
    d.grid_dim = machine.names()[match.grid_dim];
    if (match.nonzero) d.position_tensor = tdn.tensor;
    sched.directives.push_back(d);
    auto at = std::find(order.begin(), order.end(), match.name);
    *at = d.outer;
    order.insert(at + 1, d.inner);

    Directive dist{};
    dist.kind = Directive::Kind::Distribute;
    dist.var = d.outer;
    dist.grid_dim = d.grid_dim;
    sched.directives.push_back(dist);
    outers.push_back(d.outer);
  }

  // Hoist the distributed outers above everything else.
  std::vector<std::string> final_order = outers;
  for (const auto& v : order) {
    if (std::find(outers.begin(), outers.end(), v) == outers.end()) final_order.push_back(v);
  }
  if (final_order != order) {
    Directive d{};
    d.kind = Directive::Kind::Reorder;
    d.order = final_order;
    sched.directives.push_back(d);
  }

  TensorSet tensors{{tdn.tensor, tensor}, {placed, tensor}};
  return plan(validate_schedule(stmt, sched, formats, dim_map, machine), tensors);
}

}  // namespace dspar
