#include "dspar/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "dspar/errors.hpp"
#include "dspar/format_lang.hpp"
#include "dspar/oracle.hpp"
#include "dspar/plan.hpp"
#include "dspar/planner.hpp"
#include "dspar/schedule.hpp"
#include "dspar/sim.hpp"
#include "dspar/tensor_io.hpp"
#include "dspar/tin.hpp"

namespace dspar {

namespace {

struct RunConfig {
  std::string expr;
  std::vector<std::string> formats;  // T=ds[:order]
  std::vector<std::string> tdns;     // full statements, optionally T= prefixed
  std::string schedule;
  std::string grid = "1";
  std::vector<std::string> inputs;  // T=path
  std::vector<std::string> dims;    // T=3,3
  std::string output;
  std::string stats;
  std::string mode = "seq";
};

std::pair<std::string, std::string> split_kv(const std::string& text, const char* what) {
  auto eq = text.find('=');
  if (eq == std::string::npos)
    throw ValidationError(std::string(what) + " takes NAME=VALUE, got '" + text + "'");
  return {text.substr(0, eq), text.substr(eq + 1)};
}

std::vector<int64_t> parse_dims_list(const std::string& text) {
  std::vector<int64_t> dims;
  std::istringstream in(text);
  std::string field;
  while (std::getline(in, field, ',')) {
    try {
      dims.push_back(std::stoll(field));
    } catch (const std::exception&) {
      throw ValidationError("bad dimension '" + field + "'");
    }
  }
  return dims;
}

struct Pipeline {
  TinStatement stmt;
  MachineGrid machine;
  std::map<std::string, FormatSpec> formats;
  std::map<std::string, std::vector<int64_t>> dims;
  std::map<std::string, TdnStatement> tdns;
  TensorSet tensors;  // inputs plus the output stub
  ScheduledStatement sched;
  Plan compute;
  std::map<std::string, Plan> placements;
  Residency residency;
};

Pipeline build_pipeline(const RunConfig& config, bool need_plan) {
  Pipeline p;
  p.stmt = parse_tin(config.expr);
  p.machine = MachineGrid::parse(config.grid);

  for (const auto& kv : config.formats) {
    auto [name, value] = split_kv(kv, "--format");
    p.formats[name] = parse_format(value);
  }
  std::map<std::string, std::vector<int64_t>> declared_dims;
  for (const auto& kv : config.dims) {
    auto [name, value] = split_kv(kv, "--dims");
    declared_dims[name] = parse_dims_list(value);
  }

  for (const auto& name : p.stmt.tensor_names()) {
    if (!p.formats.count(name)) throw ValidationError("no format for tensor '" + name + "'");
  }

  // Load inputs.
  std::map<std::string, std::string> paths;
  for (const auto& kv : config.inputs) {
    auto [name, value] = split_kv(kv, "--input");
    paths[name] = value;
  }
  for (const auto& name : p.stmt.tensor_names()) {
    if (name == p.stmt.lhs.tensor) continue;
    auto it = paths.find(name);
    if (it == paths.end()) throw ValidationError("no input file for tensor '" + name + "'");
    std::optional<std::vector<int64_t>> want;
    if (declared_dims.count(name)) want = declared_dims[name];
    SparseTensor t = load_tensor(it->second, p.formats.at(name), want);
    p.dims[name] = t.dims();
    p.tensors.emplace(name, std::move(t));
  }

  // Output dimensions follow its variables' extents.
  {
    std::vector<int64_t> out_dims;
    for (const auto& v : p.stmt.lhs.vars) {
      int64_t extent = -1;
      for (const auto& a : p.stmt.rhs_accesses()) {
        for (size_t m = 0; m < a.vars.size(); m++) {
          if (a.vars[m] == v) extent = p.dims.at(a.tensor)[m];
        }
      }
      out_dims.push_back(extent);
    }
    if (declared_dims.count(p.stmt.lhs.tensor)) out_dims = declared_dims[p.stmt.lhs.tensor];
    p.dims[p.stmt.lhs.tensor] = out_dims;
  }
  p.tensors.emplace(p.stmt.lhs.tensor,
                    make_output_stub(p.stmt, p.formats, p.dims, p.tensors));

  // Distribution statements (defaults: blocked first mode).
  for (const auto& text : config.tdns) {
    std::string body = text;
    auto eq = body.find('=');
    auto paren = body.find('(');
    if (eq != std::string::npos && paren != std::string::npos && eq < paren)
      body = body.substr(eq + 1);
    TdnStatement tdn = parse_tdn(body);
    p.tdns[tdn.tensor] = tdn;
  }
  for (const auto& name : p.stmt.tensor_names()) {
    if (!p.tdns.count(name))
      p.tdns[name] = default_tdn(name, p.formats.at(name).order());
  }

  if (!need_plan) return p;

  Schedule schedule;
  if (!config.schedule.empty()) {
    schedule = Schedule::parse(config.schedule);
  } else if (!p.stmt.lhs.vars.empty()) {
    // Default: block the first output variable onto the first grid dim.
    const std::string& v = p.stmt.lhs.vars[0];
    const std::string& d = p.machine.names()[0];
    schedule = Schedule::parse("divide(" + v + ", " + v + "_o, " + v + "_i, M." + d +
                               "); distribute(" + v + "_o, M." + d + ")");
  }
  p.sched = validate_schedule(p.stmt, schedule, p.formats, p.dims, p.machine);
  p.compute = plan(p.sched, p.tensors);

  for (const auto& [name, tdn] : p.tdns) {
    p.placements.emplace(name, lower_tdn(tdn, p.formats.at(name), p.dims.at(name), p.machine,
                                         p.tensors.at(name)));
  }
  p.residency = residency_from_placements(p.placements, p.machine, p.tensors);
  return p;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int cmd_run(const RunConfig& config, std::ostream& out) {
  Pipeline p = build_pipeline(config, true);
  ExecResult result =
      execute(p.compute, p.tensors, p.machine, p.residency, parse_exec_mode(config.mode));
  if (!config.output.empty()) store_tensor(result.output, config.output);
  if (!config.stats.empty()) {
    std::ofstream f(config.stats);
    if (!f) throw ValidationError("cannot open stats file '" + config.stats + "'");
    f << result.stats.to_json() << "\n";
  }
  int64_t nnz = 0;
  for (const auto& leaf : result.output.leaves()) {
    (void)leaf;
    nnz++;
  }
  out << "output " << p.stmt.lhs.tensor << ": " << nnz << " stored entries\n";
  out << "workers " << result.stats.workers << ", imbalance "
      << format_double(result.stats.imbalance) << ", combines " << result.stats.combines
      << "\n";
  int64_t total_bytes = 0;
  for (const auto& pw : result.stats.per_worker) {
    for (const auto& [t, b] : pw.bytes_by_tensor) total_bytes += b;
  }
  out << "transferred bytes " << total_bytes << "\n";
  return 0;
}

int cmd_plan(const RunConfig& config, std::ostream& out) {
  Pipeline p = build_pipeline(config, true);
  out << render_plan(p.compute);
  return 0;
}

int cmd_partition(const RunConfig& config, std::ostream& out) {
  Pipeline p = build_pipeline(config, true);
  for (const auto& loop : p.compute.loops) {
    out << "loop " << loop.var << " (M." << loop.machine_dim << ")\n";
    for (const auto& step : loop.partitions) {
      out << "  tensor " << step.tensor;
      switch (step.fn) {
        case PartitionStep::Fn::Universe:
          out << " [universe at level " << step.level << "]";
          break;
        case PartitionStep::Fn::NonZero:
          out << " [non-zero at level " << step.level << "]";
          break;
        case PartitionStep::Fn::Projected:
          out << " [projected from " << step.bounds.from_tensor << "]";
          break;
        case PartitionStep::Fn::Replicate:
          out << " [replicated]";
          break;
      }
      out << "\n";
      const TensorPartitionBundle& bundle = p.compute.bundles[step.bundle];
      for (size_t l = 0; l < bundle.levels.size(); l++) {
        const LevelPartition& lp = bundle.levels[l];
        if (lp.kind == LevelKind::Dense) {
          out << "    level " << l << " dom: " << lp.dom->to_string() << "\n";
        } else {
          out << "    level " << l << " pos: " << lp.pos->to_string() << "\n";
          out << "    level " << l << " crd: " << lp.crd->to_string() << "\n";
        }
      }
      out << "    vals: " << bundle.vals.to_string() << "\n";
    }
  }
  return 0;
}

int cmd_oracle(const RunConfig& config, std::ostream& out) {
  Pipeline p = build_pipeline(config, false);
  std::map<std::string, DenseTensor> dense;
  for (const auto& [name, t] : p.tensors) {
    if (name == p.stmt.lhs.tensor) continue;
    dense[name] = densify(t);
  }
  DenseTensor result = dense_eval(p.stmt, dense, p.dims);
  SparseTensor packed = sparsify(result, p.formats.at(p.stmt.lhs.tensor));
  if (!config.output.empty()) store_tensor(packed, config.output);
  int64_t nnz = 0;
  for (double v : result.values) nnz += v != 0.0 ? 1 : 0;
  out << "oracle " << p.stmt.lhs.tensor << ": " << nnz << " non-zero values\n";
  return 0;
}

}  // namespace

int cli_main(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"sparse tensor algebra compiler and simulated distributed runtime"};
  app.require_subcommand(1);

  RunConfig config;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--expr", config.expr, "tensor index notation statement")->required();
    cmd->add_option("--format", config.formats, "per-tensor format, e.g. B=ds or B=ds:1,0");
    cmd->add_option("--tdn", config.tdns, "tensor distribution statement");
    cmd->add_option("--schedule", config.schedule, "semicolon-separated directives");
    cmd->add_option("--grid", config.grid, "machine grid, e.g. 4 or x=2,y=2");
    cmd->add_option("--input", config.inputs, "tensor input file, T=path");
    cmd->add_option("--dims", config.dims, "declared dimensions, T=3,3");
    cmd->add_option("--output", config.output, "output tensor path (.tns)");
    cmd->add_option("--stats", config.stats, "stats JSON path");
    cmd->add_option("--mode", config.mode, "seq | par | instrumented");
  };

  CLI::App* run = app.add_subcommand("run", "plan and execute on the simulated grid");
  add_common(run);
  CLI::App* planc = app.add_subcommand("plan", "print the partitioning/execution plan");
  add_common(planc);
  CLI::App* part = app.add_subcommand("partition", "print per-color partitions per tensor");
  add_common(part);
  CLI::App* oracle = app.add_subcommand("oracle", "run the dense brute-force evaluator");
  add_common(oracle);

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (run->parsed()) return cmd_run(config, out);
    if (planc->parsed()) return cmd_plan(config, out);
    if (part->parsed()) return cmd_partition(config, out);
    if (oracle->parsed()) return cmd_oracle(config, out);
    err << "error: no subcommand\n";
    return 2;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ClosureViolation& e) {
    err << "closure error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace dspar
