#include "dspar/schedule.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "dspar/errors.hpp"

namespace dspar {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  size_t e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

/// Splits "head(a, b, {c, d}, e)" into head and top-level arguments.
std::pair<std::string, std::vector<std::string>> split_call(const std::string& text) {
  auto open = text.find('(');
  if (open == std::string::npos || text.back() != ')')
    throw ParseError("schedule: malformed directive '" + text + "'");
  std::string head = trim(text.substr(0, open));
  std::string body = text.substr(open + 1, text.size() - open - 2);
  std::vector<std::string> args;
  int depth = 0;
  std::string cur;
  for (char c : body) {
    if (c == '{') depth++;
    if (c == '}') depth--;
    if (c == ',' && depth == 0) {
      args.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) args.push_back(trim(cur));
  if (depth != 0) throw ParseError("schedule: unbalanced braces in '" + text + "'");
  return {head, args};
}

bool is_integer(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isdigit(c); });
}

std::string machine_dim_of(const std::string& arg) {
  // Accepts "M.x" or bare "x".
  auto dot = arg.find('.');
  return dot == std::string::npos ? arg : arg.substr(dot + 1);
}

}  // namespace

Schedule Schedule::parse(const std::string& text) {
  Schedule sched;
  std::istringstream in(text);
  std::string piece;
  while (std::getline(in, piece, ';')) {
    piece = trim(piece);
    if (piece.empty()) continue;
    auto [head, args] = split_call(piece);
    Directive d{};
    if (head == "divide" || head == "split") {
      d.kind = head == "divide" ? Directive::Kind::Divide : Directive::Kind::Split;
      if (args.size() != 4 && args.size() != 5)
        throw ParseError("schedule: " + head + " takes 4 or 5 arguments in '" + piece + "'");
      d.var = args[0];
      d.outer = args[1];
      d.inner = args[2];
      size_t factor_arg = args.size() - 1;
      if (args.size() == 5) {
        std::string t = args[3];
        auto dot = t.find('.');
        if (dot != std::string::npos) {
          if (t.substr(dot + 1) != "pos")
            throw ParseError("schedule: position variant names the tensor as T.pos");
          t = t.substr(0, dot);
        }
        d.position_tensor = t;
      }
      if (d.kind == Directive::Kind::Divide) {
        d.grid_dim = machine_dim_of(args[factor_arg]);
      } else {
        if (!is_integer(args[factor_arg]))
          throw ParseError("schedule: split factor must be an integer in '" + piece + "'");
        d.split_factor = std::stoll(args[factor_arg]);
        if (d.split_factor < 1)
          throw ParseError("schedule: split factor must be >= 1 in '" + piece + "'");
      }
    } else if (head == "fuse") {
      if (args.size() != 3)
        throw ParseError("schedule: fuse takes fuse(a, b, f) in '" + piece + "'");
      d.kind = Directive::Kind::Fuse;
      d.fused_a = args[0];
      d.fused_b = args[1];
      d.fused = args[2];
    } else if (head == "reorder") {
      d.kind = Directive::Kind::Reorder;
      d.order = args;
      if (args.empty()) throw ParseError("schedule: empty reorder");
    } else if (head == "distribute") {
      if (args.size() != 2)
        throw ParseError("schedule: distribute takes distribute(var, M.dim) in '" + piece + "'");
      d.kind = Directive::Kind::Distribute;
      d.var = args[0];
      d.grid_dim = machine_dim_of(args[1]);
    } else if (head == "communicate") {
      if (args.size() != 2 || args[0].size() < 2 || args[0].front() != '{' ||
          args[0].back() != '}')
        throw ParseError("schedule: communicate takes communicate({tensors}, var) in '" +
                         piece + "'");
      d.kind = Directive::Kind::Communicate;
      std::istringstream list(args[0].substr(1, args[0].size() - 2));
      std::string t;
      while (std::getline(list, t, ',')) {
        t = trim(t);
        if (!t.empty()) d.tensors.push_back(t);
      }
      if (d.tensors.empty())
        throw ParseError("schedule: communicate needs at least one tensor in '" + piece + "'");
      d.at_var = args[1];
    } else if (head == "parallelize") {
      if (args.size() != 2)
        throw ParseError("schedule: parallelize takes parallelize(var, unit) in '" + piece +
                         "'");
      d.kind = Directive::Kind::Parallelize;
      d.var = args[0];
      d.unit = args[1];
    } else {
      throw ParseError("schedule: unknown directive '" + head + "'");
    }
    sched.directives.push_back(std::move(d));
  }
  return sched;
}

std::string Directive::to_string() const {
  std::ostringstream out;
  switch (kind) {
    case Kind::Divide:
    case Kind::Split:
      out << (kind == Kind::Divide ? "divide(" : "split(") << var << ", " << outer << ", "
          << inner;
      if (position_tensor) out << ", " << *position_tensor << ".pos";
      if (kind == Kind::Divide)
        out << ", M." << grid_dim << ")";
      else
        out << ", " << split_factor << ")";
      break;
    case Kind::Fuse:
      out << "fuse(" << fused_a << ", " << fused_b << ", " << fused << ")";
      break;
    case Kind::Reorder: {
      out << "reorder(";
      for (size_t i = 0; i < order.size(); i++) {
        if (i) out << ", ";
        out << order[i];
      }
      out << ")";
      break;
    }
    case Kind::Distribute:
      out << "distribute(" << var << ", M." << grid_dim << ")";
      break;
    case Kind::Communicate: {
      out << "communicate({";
      for (size_t i = 0; i < tensors.size(); i++) {
        if (i) out << ", ";
        out << tensors[i];
      }
      out << "}, " << at_var << ")";
      break;
    }
    case Kind::Parallelize:
      out << "parallelize(" << var << ", " << unit << ")";
      break;
  }
  return out.str();
}

std::string Schedule::to_string() const {
  std::string out;
  for (size_t i = 0; i < directives.size(); i++) {
    if (i) out += "; ";
    out += directives[i].to_string();
  }
  return out;
}

const IndexVarInfo& ScheduledStatement::var(const std::string& name) const {
  auto it = var_graph.find(name);
  if (it == var_graph.end()) throw ValidationError("unknown index variable '" + name + "'");
  return it->second;
}

std::vector<std::string> ScheduledStatement::roots_of(const std::string& name) const {
  const IndexVarInfo& info = var(name);
  switch (info.kind) {
    case IndexVarInfo::Kind::Root:
      return {name};
    case IndexVarInfo::Kind::Fused: {
      std::vector<std::string> out = roots_of(info.parents[0]);
      auto rhs = roots_of(info.parents[1]);
      out.insert(out.end(), rhs.begin(), rhs.end());
      return out;
    }
    default:
      return roots_of(info.parents[0]);
  }
}

bool ScheduledStatement::derives_from_reduction(const std::string& name) const {
  for (const auto& r : roots_of(name)) {
    if (stmt.is_reduction(r)) return true;
  }
  return false;
}

int64_t ScheduledStatement::var_extent(const std::string& root_var) const {
  int64_t extent = -1;
  auto visit = [&](const Access& a) {
    for (size_t m = 0; m < a.vars.size(); m++) {
      if (a.vars[m] != root_var) continue;
      int64_t d = dims.at(a.tensor)[m];
      if (extent == -1) extent = d;
      if (extent != d)
        throw ValidationError("dimension mismatch for variable '" + root_var + "'");
    }
  };
  visit(stmt.lhs);
  for (const auto& a : stmt.rhs_accesses()) visit(a);
  if (extent == -1)
    throw ValidationError("variable '" + root_var + "' indexes no tensor");
  return extent;
}

std::vector<ScheduledStatement::AccessedLevel> ScheduledStatement::accessed_levels(
    const std::string& name) const {
  std::vector<AccessedLevel> out;
  auto add = [&](const Access& a, const std::string& root) {
    for (size_t m = 0; m < a.vars.size(); m++) {
      if (a.vars[m] != root) continue;
      auto [level, submode] = format_level_of_mode(formats.at(a.tensor), static_cast<int>(m));
      bool dup = false;
      for (const auto& e : out)
        dup = dup || (e.tensor == a.tensor && e.level == level && e.submode == submode);
      if (!dup) out.push_back({a.tensor, level, submode});
    }
  };
  for (const auto& root : roots_of(name)) {
    add(stmt.lhs, root);
    for (const auto& a : stmt.rhs_accesses()) add(a, root);
  }
  return out;
}

int64_t ScheduledStatement::distributed_loop_count() const {
  int64_t n = 0;
  for (const auto& l : loops) n += l.distributed ? 1 : 0;
  return n;
}

ScheduledStatement validate_schedule(const TinStatement& stmt, const Schedule& schedule,
                                     const std::map<std::string, FormatSpec>& formats,
                                     const std::map<std::string, std::vector<int64_t>>& dims,
                                     const MachineGrid& machine) {
  ScheduledStatement out;
  out.stmt = stmt;
  out.machine = machine;
  out.formats = formats;
  out.dims = dims;

  for (const auto& name : stmt.tensor_names()) {
    if (!formats.count(name))
      throw ValidationError("no format for tensor '" + name + "'");
    if (!dims.count(name))
      throw ValidationError("no dimensions for tensor '" + name + "'");
    if (formats.at(name).order() != stmt.tensor_order(name))
      throw ValidationError("format order does not match access arity for '" + name + "'");
  }
  // Every variable must have a consistent extent.
  for (const auto& v : stmt.vars) out.var_extent(v);

  for (const auto& v : stmt.vars) out.var_graph[v] = IndexVarInfo{};

  std::vector<std::string> order = stmt.vars;
  auto position_of = [&](const std::string& v) {
    auto it = std::find(order.begin(), order.end(), v);
    if (it == order.end())
      throw ValidationError("schedule references variable '" + v +
                            "' which is not in the loop order");
    return it;
  };
  auto require_fresh = [&](const std::string& v) {
    if (out.var_graph.count(v))
      throw ValidationError("cyclic derivation: variable '" + v + "' already exists");
  };

  std::map<std::string, std::string> distributed;  // var -> machine dim
  std::vector<Directive> communicates, parallelizes;

  for (const auto& d : schedule.directives) {
    switch (d.kind) {
      case Directive::Kind::Fuse: {
        auto a = position_of(d.fused_a);
        auto b = position_of(d.fused_b);
        if (b != a + 1)
          throw ValidationError("fuse: '" + d.fused_a + "' and '" + d.fused_b +
                                "' must be adjacent loops (outer first)");
        require_fresh(d.fused);
        IndexVarInfo info;
        info.kind = IndexVarInfo::Kind::Fused;
        info.parents = {d.fused_a, d.fused_b};
        out.var_graph[d.fused] = info;
        *a = d.fused;
        order.erase(b);
        break;
      }
      case Directive::Kind::Divide:
      case Directive::Kind::Split: {
        auto at = position_of(d.var);
        require_fresh(d.outer);
        require_fresh(d.inner);
        bool divide = d.kind == Directive::Kind::Divide;
        if (divide) machine.extent(d.grid_dim);  // validates the dimension
        if (d.position_tensor) {
          const std::string& t = *d.position_tensor;
          if (!formats.count(t))
            throw ValidationError("position split over unknown tensor '" + t + "'");
          if (stmt.terms.size() > 1)
            throw ValidationError(
                "position split is incompatible with union iteration over multiple terms");
          // The strip-mined variable must cover a storage prefix of t.
          int found = 0;
          for (const auto& a : stmt.rhs_accesses()) {
            if (a.tensor == t) found++;
          }
          if (found != 1)
            throw ValidationError("position split needs exactly one access of '" + t + "'");
          Access access;
          for (const auto& a : stmt.rhs_accesses()) {
            if (a.tensor == t) access = a;
          }
          auto roots = out.roots_of(d.var);
          const auto& f = formats.at(t);
          if (roots.size() > access.vars.size())
            throw ValidationError("position split variable covers more modes than '" + t +
                                  "' has");
          for (size_t k = 0; k < roots.size(); k++) {
            if (access.vars[f.mode_order[k]] != roots[k])
              throw ValidationError("position split variable must cover a storage prefix of '" +
                                    t + "'");
          }
          if (f.kinds[roots.size() - 1] != LevelKind::Compressed)
            throw ValidationError("position split of '" + t +
                                  "' needs a compressed innermost level");
        }
        IndexVarInfo outer;
        outer.kind = divide ? IndexVarInfo::Kind::DivideOuter : IndexVarInfo::Kind::SplitOuter;
        outer.parents = {d.var};
        outer.partner = d.inner;
        outer.grid_dim = d.grid_dim;
        outer.split_factor = d.split_factor;
        outer.position_space = d.position_tensor.has_value();
        if (d.position_tensor) outer.position_tensor = *d.position_tensor;
        IndexVarInfo inner = outer;
        inner.kind = divide ? IndexVarInfo::Kind::DivideInner : IndexVarInfo::Kind::SplitInner;
        inner.partner = d.outer;
        out.var_graph[d.outer] = outer;
        out.var_graph[d.inner] = inner;
        *at = d.outer;
        order.insert(at + 1, d.inner);
        break;
      }
      case Directive::Kind::Reorder: {
        std::vector<std::string> sorted_a = order, sorted_b = d.order;
        std::sort(sorted_a.begin(), sorted_a.end());
        std::sort(sorted_b.begin(), sorted_b.end());
        if (sorted_a != sorted_b)
          throw ValidationError("reorder must be a permutation of the current loop order");
        order = d.order;
        break;
      }
      case Directive::Kind::Distribute: {
        position_of(d.var);
        machine.extent(d.grid_dim);
        if (distributed.count(d.var))
          throw ValidationError("variable '" + d.var + "' distributed twice");
        for (const auto& [v, g] : distributed) {
          if (g == d.grid_dim)
            throw ValidationError("machine dimension '" + d.grid_dim +
                                  "' already has a distributed variable");
        }
        distributed[d.var] = d.grid_dim;
        break;
      }
      case Directive::Kind::Communicate:
        communicates.push_back(d);
        break;
      case Directive::Kind::Parallelize:
        parallelizes.push_back(d);
        break;
    }
  }

  for (const auto& v : order) {
    LoopVar loop;
    loop.name = v;
    auto it = distributed.find(v);
    if (it != distributed.end()) {
      loop.distributed = true;
      loop.machine_dim = it->second;
    }
    out.loops.push_back(loop);
  }
  for (const auto& [v, g] : distributed) {
    if (std::find(order.begin(), order.end(), v) == order.end())
      throw ValidationError("distributed variable '" + v + "' is not a loop");
  }

  // Distributed loops form the outer prefix.
  bool seen_inner = false;
  for (const auto& loop : out.loops) {
    if (loop.distributed && seen_inner)
      throw ValidationError("distributed variable '" + loop.name +
                            "' must be an outer loop above all undistributed loops");
    if (!loop.distributed) seen_inner = true;
  }

  // Derived outer halves and fused variables cannot linger as leaf loops.
  int64_t position_distributed = 0;
  for (const auto& loop : out.loops) {
    const IndexVarInfo& info = out.var(loop.name);
    bool outer_kind = info.kind == IndexVarInfo::Kind::DivideOuter ||
                      info.kind == IndexVarInfo::Kind::SplitOuter;
    if (outer_kind && !loop.distributed)
      throw ValidationError("derived outer variable '" + loop.name +
                            "' must be distributed");
    if (info.kind == IndexVarInfo::Kind::Fused)
      throw ValidationError("fused variable '" + loop.name +
                            "' must be consumed by a position-space split");
    if (loop.distributed && info.position_space) position_distributed++;
  }
  if (position_distributed > 1)
    throw ValidationError("at most one position-space variable may be distributed");
  if (static_cast<int64_t>(distributed.size()) > machine.rank())
    throw ValidationError("more distributed variables than machine grid dimensions");

  // Compressed levels can only be iterated below their storage ancestors:
  // check the effective root order against every access.
  std::vector<std::string> effective;
  for (const auto& loop : out.loops) {
    for (const auto& r : out.roots_of(loop.name)) {
      if (std::find(effective.begin(), effective.end(), r) == effective.end())
        effective.push_back(r);
    }
  }
  auto effective_pos = [&](const std::string& v) {
    return std::find(effective.begin(), effective.end(), v) - effective.begin();
  };
  auto check_access = [&](const Access& a) {
    const FormatSpec& f = out.formats.at(a.tensor);
    for (int k = 1; k < f.order(); k++) {
      if (f.kinds[k] != LevelKind::Compressed) continue;
      const std::string& above = a.vars[f.mode_order[k - 1]];
      const std::string& here = a.vars[f.mode_order[k]];
      if (effective_pos(above) > effective_pos(here))
        throw ValidationError("loop order iterates compressed variable '" + here +
                              "' of '" + a.tensor + "' before its parent '" + above + "'");
    }
  };
  check_access(stmt.lhs);
  for (const auto& a : stmt.rhs_accesses()) check_access(a);

  // Communicate placement: each tensor fetched exactly once, at a
  // distributed loop (or at the root when nothing is distributed).
  std::map<std::string, bool> covered;
  auto tensor_names = stmt.tensor_names();
  for (const auto& d : communicates) {
    std::string at = d.at_var;
    if (distributed.empty()) {
      at = "";  // hoisted to the root
    } else if (!distributed.count(at)) {
      throw ValidationError("communicate target '" + at +
                            "' is not distributed; communication happens at distributed "
                            "loops or outside them all");
    }
    for (const auto& t : d.tensors) {
      if (std::find(tensor_names.begin(), tensor_names.end(), t) == tensor_names.end())
        throw ValidationError("communicate names unknown tensor '" + t + "'");
      if (covered.count(t))
        throw ValidationError("tensor '" + t + "' communicated twice");
      covered[t] = true;
      Directive one = d;
      one.tensors = {t};
      one.at_var = at;
      out.communicates.push_back(one);
    }
  }
  std::string outermost_distributed;
  for (const auto& loop : out.loops) {
    if (loop.distributed) {
      outermost_distributed = loop.name;
      break;
    }
  }
  for (const auto& t : tensor_names) {
    if (covered.count(t)) continue;
    Directive d{};
    d.kind = Directive::Kind::Communicate;
    d.tensors = {t};
    d.at_var = outermost_distributed;  // empty means the root
    out.communicates.push_back(d);
  }

  for (const auto& d : parallelizes) {
    bool leaf = false;
    for (const auto& loop : out.loops)
      leaf = leaf || (loop.name == d.var && !loop.distributed);
    if (!leaf)
      throw ValidationError("parallelize target '" + d.var + "' is not a leaf loop");
    out.parallelizes.push_back(d);
  }
  return out;
}

}  // namespace dspar
