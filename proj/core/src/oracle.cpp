#include "dspar/oracle.hpp"

#include <set>
#include <stdexcept>

#include "dspar/errors.hpp"

namespace dspar {

int64_t DenseTensor::total() const {
  int64_t n = 1;
  for (int64_t e : extents) n *= e;
  return n;
}

namespace {
int64_t linear_index(const std::vector<int64_t>& extents, const std::vector<int64_t>& coords) {
  int64_t idx = 0;
  for (size_t d = 0; d < extents.size(); d++) idx = idx * extents[d] + coords[d];
  return idx;
}
}  // namespace

double DenseTensor::at(const std::vector<int64_t>& coords) const {
  return values[linear_index(extents, coords)];
}

double& DenseTensor::at(const std::vector<int64_t>& coords) {
  return values[linear_index(extents, coords)];
}

DenseTensor DenseTensor::zeros(std::vector<int64_t> extents) {
  DenseTensor t;
  t.extents = std::move(extents);
  t.values.assign(static_cast<size_t>(t.total()), 0.0);
  return t;
}

DenseTensor densify(const SparseTensor& tensor) {
  DenseTensor out = DenseTensor::zeros(tensor.dims());
  for (const auto& leaf : tensor.leaves()) out.at(leaf.coords) += leaf.value;
  return out;
}

SparseTensor sparsify(const DenseTensor& dense, const FormatSpec& format) {
  std::vector<TensorEntry> entries;
  std::vector<int64_t> coords(dense.extents.size(), 0);
  for (int64_t idx = 0; idx < dense.total(); idx++) {
    if (dense.values[idx] != 0.0) entries.push_back({coords, dense.values[idx]});
    for (size_t d = dense.extents.size(); d-- > 0;) {
      if (++coords[d] < dense.extents[d]) break;
      coords[d] = 0;
    }
  }
  return SparseTensor::pack(dense.extents, format, std::move(entries));
}

namespace {

struct VarSpace {
  std::vector<std::string> vars;
  std::vector<int64_t> extents;

  static VarSpace build(const TinStatement& stmt,
                        const std::map<std::string, std::vector<int64_t>>& dims) {
    VarSpace vs;
    vs.vars = stmt.vars;
    for (const auto& v : vs.vars) {
      int64_t extent = -1;
      auto visit = [&](const Access& a) {
        for (size_t m = 0; m < a.vars.size(); m++) {
          if (a.vars[m] == v) extent = dims.at(a.tensor)[m];
        }
      };
      visit(stmt.lhs);
      for (const auto& a : stmt.rhs_accesses()) visit(a);
      if (extent < 0) throw ValidationError("oracle: variable '" + v + "' indexes nothing");
      vs.extents.push_back(extent);
    }
    return vs;
  }

  int64_t trips() const {
    int64_t n = 1;
    for (int64_t e : extents) n *= e;
    return n;
  }
};

std::vector<int64_t> access_coords(const Access& a, const std::vector<std::string>& vars,
                                   const std::vector<int64_t>& point) {
  std::vector<int64_t> coords(a.vars.size());
  for (size_t m = 0; m < a.vars.size(); m++) {
    for (size_t s = 0; s < vars.size(); s++) {
      if (vars[s] == a.vars[m]) coords[m] = point[s];
    }
  }
  return coords;
}

bool advance(std::vector<int64_t>& point, const std::vector<int64_t>& extents) {
  for (size_t d = point.size(); d-- > 0;) {
    if (++point[d] < extents[d]) return true;
    point[d] = 0;
  }
  return false;
}

}  // namespace

DenseTensor dense_eval(const TinStatement& stmt,
                       const std::map<std::string, DenseTensor>& inputs,
                       const std::map<std::string, std::vector<int64_t>>& dims,
                       int64_t trip_limit) {
  VarSpace vs = VarSpace::build(stmt, dims);
  if (vs.trips() > trip_limit)
    throw ValidationError("oracle: dense trip count exceeds the configured cap");

  DenseTensor out = DenseTensor::zeros(dims.at(stmt.lhs.tensor));
  if (out.total() == 0 || vs.trips() == 0) return out;

  std::vector<int64_t> point(vs.vars.size(), 0);
  do {
    for (const auto& term : stmt.terms) {
      double value = 1.0;
      for (const auto& a : term) value *= inputs.at(a.tensor).at(access_coords(a, vs.vars, point));
      out.at(access_coords(stmt.lhs, vs.vars, point)) += value;
    }
  } while (advance(point, vs.extents));
  return out;
}

std::vector<char> oracle_pattern(const TinStatement& stmt,
                                 const std::map<std::string, SparseTensor>& inputs,
                                 const std::vector<int64_t>& out_dims) {
  // Stored-coordinate sets for sparse-formatted inputs; dense-formatted
  // tensors are everywhere-present.
  std::map<std::string, std::set<std::vector<int64_t>>> stored;
  std::map<std::string, bool> is_dense;
  for (const auto& [name, t] : inputs) {
    bool dense = true;
    for (LevelKind k : t.format().kinds) dense = dense && k == LevelKind::Dense;
    is_dense[name] = dense;
    if (!dense) {
      auto& s = stored[name];
      for (const auto& leaf : t.leaves()) s.insert(leaf.coords);
    }
  }

  std::map<std::string, std::vector<int64_t>> dims;
  for (const auto& [name, t] : inputs) dims[name] = t.dims();
  dims[stmt.lhs.tensor] = out_dims;
  VarSpace vs = VarSpace::build(stmt, dims);

  IndexSpace out_space(out_dims);
  std::vector<char> pattern(static_cast<size_t>(out_space.total()), 0);
  if (out_space.total() == 0 || vs.trips() == 0) return pattern;

  std::vector<int64_t> point(vs.vars.size(), 0);
  do {
    for (const auto& term : stmt.terms) {
      bool present = true;
      for (const auto& a : term) {
        if (is_dense.at(a.tensor)) continue;
        if (!stored.at(a.tensor).count(access_coords(a, vs.vars, point))) {
          present = false;
          break;
        }
      }
      if (present)
        pattern[out_space.linearize(access_coords(stmt.lhs, vs.vars, point))] = 1;
    }
  } while (advance(point, vs.extents));
  return pattern;
}

}  // namespace dspar
