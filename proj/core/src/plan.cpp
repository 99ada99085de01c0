#include "dspar/plan.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "dspar/errors.hpp"

namespace dspar {

namespace {

struct Renderer {
  const Plan& plan;
  std::ostringstream out;
  int indent = 0;

  explicit Renderer(const Plan& p) : plan(p) {}

  void line(const std::string& s) {
    for (int i = 0; i < indent; i++) out << "  ";
    out << s << "\n";
  }

  std::string level_name(const std::string& tensor, int level) {
    return tensor + std::to_string(level + 1);
  }

  std::string dim_expr(const PlanLoop& loop) {
    // Symbolic extent of the divided range, Fig-style: T[l].dim or T[l].nnz.
    for (const auto& step : loop.partitions) {
      if (step.fn == PartitionStep::Fn::NonZero)
        return step.tensor + "[" + std::to_string(step.level) + "].nnz";
      if (step.fn == PartitionStep::Fn::Universe)
        return step.tensor + "[" + std::to_string(step.level) + "].dim";
    }
    return std::to_string(loop.color_bounds.empty() ? 0 : loop.color_bounds.size());
  }

  void render_initial(const PlanLoop& loop, const PartitionStep& step,
                      std::map<std::string, std::string>& down_name,
                      std::map<std::string, std::string>& up_name) {
    const std::string& t = step.tensor;
    bool nonzero = step.fn == PartitionStep::Fn::NonZero;
    const TensorPartitionBundle& bundle = plan.bundles[step.bundle];
    bool compressed = bundle.levels[step.level].kind == LevelKind::Compressed;

    std::string coloring = t + "Coloring";
    line("Coloring " + coloring + " = {};");
    line("for (int " + loop.var + " = 0; " + loop.var + " < " + std::to_string(loop.pieces) +
         "; " + loop.var + "++) {");
    indent++;
    std::string lo = loop.source_var + "Lo", hi = loop.source_var + "Hi";
    std::string extent = nonzero ? t + "[" + std::to_string(step.level) + "].nnz"
                                 : t + "[" + std::to_string(step.level) + "].dim";
    line("int " + lo + " = " + loop.var + " * (" + extent + " / " +
         std::to_string(loop.pieces) + ");");
    line("int " + hi + " = (" + loop.var + " + 1) * (" + extent + " / " +
         std::to_string(loop.pieces) + ");  // the last piece is clamped to " + extent);
    line(coloring + "[" + loop.var + "] = {" + lo + ", " + hi + " - 1};");
    indent--;
    line("}");

    std::string lvl = level_name(t, step.level);
    if (!compressed) {
      std::string part = lvl + "Part";
      line("auto " + part + " = partitionByBounds(" + t + "[" + std::to_string(step.level) +
           "].dom, " + coloring + ");");
      down_name[t] = part;
      up_name[t] = part;
    } else {
      std::string crd = lvl + "CrdPart", pos = lvl + "PosPart";
      std::string how = nonzero ? "partitionByBounds" : "bucketCoords";
      line("auto " + crd + " = " + how + "(" + t + "[" + std::to_string(step.level) +
           "].crd, " + coloring + ");");
      line("auto " + pos + " = preimage(" + crd + ", " + t + "[" +
           std::to_string(step.level) + "].pos);");
      down_name[t] = crd;
      up_name[t] = pos;
    }
  }

  void render_projected(const PlanLoop& loop, const PartitionStep& step,
                        std::map<std::string, std::string>& down_name,
                        std::map<std::string, std::string>& up_name) {
    const std::string& t = step.tensor;
    const TensorPartitionBundle& bundle = plan.bundles[step.bundle];
    bool compressed = bundle.levels[step.level].kind == LevelKind::Compressed;
    std::string from = step.bounds.from_tensor;
    std::string coloring = t + "Coloring";
    line("Coloring " + coloring + " = boundsOf(" + up_name[from] + ");  // min/max per color");
    std::string lvl = level_name(t, step.level);
    if (!compressed) {
      std::string part = lvl + "Part";
      line("auto " + part + " = partitionByBounds(" + t + "[" + std::to_string(step.level) +
           "].dom, " + coloring + ");");
      down_name[t] = part;
      up_name[t] = part;
    } else {
      std::string crd = lvl + "CrdPart", pos = lvl + "PosPart";
      line("auto " + crd + " = bucketCoords(" + t + "[" + std::to_string(step.level) +
           "].crd, " + coloring + ");");
      line("auto " + pos + " = preimage(" + crd + ", " + t + "[" +
           std::to_string(step.level) + "].pos);");
      down_name[t] = crd;
      up_name[t] = pos;
    }
  }

  void render_tree(const PartitionStep& step, std::map<std::string, std::string>& down_name,
                   std::map<std::string, std::string>& up_name) {
    const std::string& t = step.tensor;
    const TensorPartitionBundle& bundle = plan.bundles[step.bundle];
    int levels = static_cast<int>(bundle.levels.size());
    // Levels above the initial one.
    std::string up = up_name[t];
    for (int l = step.level - 1; l >= 0; l--) {
      std::string lvl = level_name(t, l);
      if (bundle.levels[l].kind == LevelKind::Dense) {
        std::string part = lvl + "Part";
        line("auto " + part + " = copy(" + up + ", " + t + "[" + std::to_string(l) +
             "].dom);");
        up = part;
      } else {
        std::string crd = lvl + "CrdPart", pos = lvl + "PosPart";
        line("auto " + crd + " = copy(" + up + ", " + t + "[" + std::to_string(l) + "].crd);");
        line("auto " + pos + " = preimage(" + crd + ", " + t + "[" + std::to_string(l) +
             "].pos);");
        up = pos;
      }
    }
    // Levels below.
    std::string down = down_name[t];
    for (int l = step.level + 1; l < levels; l++) {
      std::string lvl = level_name(t, l);
      if (bundle.levels[l].kind == LevelKind::Dense) {
        std::string part = lvl + "Part";
        line("auto " + part + " = copy(" + down + ", " + t + "[" + std::to_string(l) +
             "].dom);");
        down = part;
      } else {
        std::string pos = lvl + "PosPart", crd = lvl + "CrdPart";
        line("auto " + pos + " = copy(" + down + ", " + t + "[" + std::to_string(l) +
             "].pos);");
        line("auto " + crd + " = image(" + pos + ", " + t + "[" + std::to_string(l) +
             "].pos);");
        down = crd;
      }
    }
    line("auto " + t + "ValsPart = copy(" + down + ", " + t + ".vals);");
    up_name[t] = up;
    down_name[t] = down;
  }

  // -------------------------------------------------------------------
  // Leaf rendering.

  void render_leaf() {
    int base_indent = indent;
    // Per-access traversal state, keyed by term/access position.
    struct State {
      const Access* a;
      const FormatSpec* f;
      std::vector<std::vector<int>> groups;
      size_t level = 0;
      std::string pos = "";
      std::string leaf_expr;
    };
    std::vector<State> states;
    for (const auto& term : plan.stmt.terms) {
      for (const auto& a : term) {
        State s;
        s.a = &a;
        s.f = &plan.formats.at(a.tensor);
        s.groups = level_grouping(*s.f);
        states.push_back(s);
      }
    }
    State out_state;
    out_state.a = &plan.stmt.lhs;
    out_state.f = &plan.formats.at(plan.stmt.lhs.tensor);
    out_state.groups = level_grouping(*out_state.f);

    // Variables a dense group still waits on before it can linearize.
    auto group_vars = [&](const State& s, size_t level) {
      std::vector<std::string> vars;
      for (int storage : s.groups[level]) vars.push_back(s.a->vars[s.f->mode_order[storage]]);
      return vars;
    };
    std::map<std::string, bool> bound;

    auto advance_state = [&](State& s) {
      // Consume every level whose variables are all bound.
      while (s.level < s.groups.size()) {
        auto vars = group_vars(s, s.level);
        bool ready = std::all_of(vars.begin(), vars.end(),
                                 [&](const std::string& v) { return bound.count(v) && bound[v]; });
        if (!ready) break;
        bool dense = s.f->kinds[s.groups[s.level][0]] == LevelKind::Dense;
        std::string lvl = s.a->tensor + "[" + std::to_string(s.level) + "]";
        if (dense) {
          std::string expr;
          for (size_t j = 0; j < vars.size(); j++) {
            expr = expr.empty() ? vars[j] : "(" + expr + ") * " + lvl + ".dim" +
                                                std::to_string(j) + " + " + vars[j];
          }
          s.pos = s.pos.empty() ? expr : "(" + s.pos + ") * " + lvl + ".size + " + expr;
        } else {
          // Was rendered by its driving loop (posvar) or located.
          if (s.leaf_expr.empty()) {
            // locate: position found by search
            std::string pv = vars[0] + s.a->tensor;
            line("int " + pv + " = locate(" + lvl + ", " + (s.pos.empty() ? "0" : s.pos) +
                 ", " + vars[0] + ");");
            s.pos = pv;
          } else {
            s.pos = s.leaf_expr;
            s.leaf_expr.clear();
          }
        }
        s.level++;
      }
    };

    // Count how many leaf vars use each access as iteration driver.
    for (const auto& lv : plan.leaf.vars) {
      if (lv.domain == LeafVar::Domain::PositionRange) {
        // Position loop over the split tensor.
        std::string pv = lv.name + "B";
        const PlanLoop& loop = plan.loops[lv.loop];
        std::string coloring = lv.tensor + "Coloring";
        line("for (int " + pv + " = " + coloring + "[" + loop.var + "].lo; " + pv + " <= " +
             coloring + "[" + loop.var + "].hi; " + pv + "++) {");
        indent++;
        // Walk the split tensor's path upward, binding covered variables.
        const FormatSpec& f = plan.formats.at(lv.tensor);
        auto groups = level_grouping(f);
        const Access* split_access = nullptr;
        for (const auto& term : plan.stmt.terms) {
          for (const auto& a : term) {
            if (a.tensor == lv.tensor && !split_access) split_access = &a;
          }
        }
        std::string pos = pv;
        for (int l = lv.level; l >= 0; l--) {
          bool dense = f.kinds[groups[l][0]] == LevelKind::Dense;
          std::string lvl = lv.tensor + "[" + std::to_string(l) + "]";
          if (dense) {
            for (int j = static_cast<int>(groups[l].size()) - 1; j >= 0; j--) {
              const std::string& v = split_access->vars[f.mode_order[groups[l][j]]];
              line("int " + v + " = " + (l == 0 && groups[l].size() == 1
                                             ? pos
                                             : "coordOf(" + lvl + ", " + pos + ", " +
                                                   std::to_string(j) + ")") +
                   ";");
              bound[v] = true;
            }
            if (l > 0) {
              line("int p" + std::to_string(l - 1) + " = " + pos + " / " + lvl + ".size;");
              pos = "p" + std::to_string(l - 1);
            }
          } else {
            const std::string& v = split_access->vars[f.mode_order[groups[l][0]]];
            line("int " + v + " = " + lvl + ".crd[" + pos + "];");
            bound[v] = true;
            if (l > 0) {
              line("int p" + std::to_string(l - 1) + " = owner(" + lvl + ".pos, " + pos + ");");
              pos = "p" + std::to_string(l - 1);
            }
          }
        }
        // The split tensor's traversal is complete down to its split level.
        for (auto& s : states) {
          if (s.a->tensor == lv.tensor) {
            s.level = static_cast<size_t>(lv.level) + 1;
            s.pos = pv;
          }
        }
        for (auto& s : states) advance_state(s);
        continue;
      }

      if (lv.domain == LeafVar::Domain::WorkerRange) {
        const PlanLoop& loop = plan.loops[lv.loop];
        std::string n = dim_expr(loop);
        if (loop.inner_var.empty()) {
          line("int " + lv.name + " = " + loop.var + ";");
        } else {
          line("for (int " + loop.inner_var + " = 0; " + loop.inner_var + " < " + n + " / " +
               std::to_string(loop.pieces) + "; " + loop.inner_var + "++) {");
          indent++;
          line("int " + lv.name + " = " + loop.var + " * (" + n + " / " +
               std::to_string(loop.pieces) + ") + " + loop.inner_var + ";");
        }
        bound[lv.name] = true;
        for (auto& s : states) advance_state(s);
        continue;
      }

      // Full domain: pick iteration drivers among compressed levels at this
      // variable whose ancestors are already consumed.
      std::vector<State*> drivers;
      for (auto& s : states) {
        if (s.level >= s.groups.size()) continue;
        bool compressed = s.f->kinds[s.groups[s.level][0]] == LevelKind::Compressed;
        if (!compressed) continue;
        if (s.a->vars[s.f->mode_order[s.groups[s.level][0]]] != lv.name) continue;
        drivers.push_back(&s);
      }
      if (drivers.empty()) {
        line("for (int " + lv.name + " = 0; " + lv.name + " < " +
             std::to_string(lv.extent) + "; " + lv.name + "++) {");
        indent++;
      } else if (drivers.size() == 1 && plan.stmt.terms.size() == 1) {
        State& s = *drivers[0];
        std::string lvl = s.a->tensor + "[" + std::to_string(s.level) + "]";
        std::string pv = lv.name + s.a->tensor;
        std::string parent = s.pos.empty() ? "0" : s.pos;
        line("for (int " + pv + " = " + lvl + ".pos[" + parent + "].lo; " + pv + " <= " + lvl +
             ".pos[" + parent + "].hi; " + pv + "++) {");
        indent++;
        line("int " + lv.name + " = " + lvl + ".crd[" + pv + "];");
        s.leaf_expr = pv;
      } else {
        std::string lists;
        for (auto* s : drivers) {
          if (!lists.empty()) lists += ", ";
          lists += s->a->tensor + "[" + std::to_string(s->level) + "].crd";
        }
        std::string merged = plan.stmt.terms.size() > 1 ? "union" : "merge";
        line("for (int " + lv.name + " : " + merged + "(" + lists + ")) {");
        indent++;
      }
      bound[lv.name] = true;
      for (auto& s : states) advance_state(s);
    }

    // Value statement.
    for (const auto& v : plan.stmt.lhs.vars) {
      if (!bound.count(v)) bound[v] = true;  // defensive; validation prevents this
    }
    {
      State& s = out_state;
      advance_state(s);
    }
    std::string lhs_expr = out_state.pos.empty() ? "0" : out_state.pos;
    std::string op = plan.leaf.reduction || plan.combine ? " += " : " = ";
    std::ostringstream rhs;
    size_t state_at = 0;
    for (size_t t = 0; t < plan.stmt.terms.size(); t++) {
      if (t) rhs << " + ";
      for (size_t a = 0; a < plan.stmt.terms[t].size(); a++) {
        if (a) rhs << " * ";
        State& s = states[state_at++];
        rhs << s.a->tensor << ".vals[" << (s.pos.empty() ? "0" : s.pos) << "]";
      }
    }
    line(plan.stmt.lhs.tensor + ".vals[" + lhs_expr + "]" + op + rhs.str() + ";");

    // Close the loops the leaf opened.
    while (indent > base_indent) {
      indent--;
      line("}");
    }
  }

  std::string run() {
    if (plan.stmt.terms.empty()) return "";
    line("// plan: " + plan.stmt.to_string());
    line("// machine: " + plan.machine.to_string());

    std::map<std::string, std::string> down_name, up_name;
    for (const auto& loop : plan.loops) {
      bool nonzero = loop.position_space;
      line("// (1) initial " + std::string(nonzero ? "non-zero" : "universe") +
           " partition at " + loop.var);
      std::vector<const PartitionStep*> initial, projected, replicated;
      for (const auto& step : loop.partitions) {
        if (step.fn == PartitionStep::Fn::Universe || step.fn == PartitionStep::Fn::NonZero)
          initial.push_back(&step);
        else if (step.fn == PartitionStep::Fn::Projected)
          projected.push_back(&step);
        else
          replicated.push_back(&step);
      }
      for (const auto* step : initial) render_initial(loop, *step, down_name, up_name);
      line("// (2) coordinate tree derivation");
      for (const auto* step : initial) render_tree(*step, down_name, up_name);
      for (const auto* step : projected) {
        render_projected(loop, *step, down_name, up_name);
        render_tree(*step, down_name, up_name);
      }
      for (const auto* step : replicated)
        line("// " + step->tensor + " replicated across M." + loop.machine_dim);
    }

    for (const auto& c : plan.root_communicates)
      line("// communicate " + c.tensor + " at the root");

    for (const auto& loop : plan.loops) {
      line("// (3) distributed loop");
      line("distributed for (" + loop.var + " : M." + loop.machine_dim + ") {");
      indent++;
      std::string comm;
      for (const auto& c : loop.communicates) {
        if (!comm.empty()) comm += ", ";
        comm += c.tensor;
      }
      if (!comm.empty()) line("communicate(" + comm + ");");
    }

    line("// (4) leaf");
    render_leaf();

    while (indent > 0) {
      indent--;
      line("}");
    }
    return out.str();
  }
};

}  // namespace

std::string render_plan(const Plan& plan) { return Renderer(plan).run(); }

}  // namespace dspar
