#include <doctest.h>

#include <fstream>

#include "dspar/errors.hpp"
#include "dspar/planner.hpp"
#include "dspar/sim.hpp"
#include "support/test_util.hpp"

using namespace dspar;
using test::Rng;

namespace {

struct SpmvSetup {
  TinStatement stmt = parse_tin("a(i) = B(i, j) * c(j)");
  std::map<std::string, FormatSpec> formats{
      {"a", parse_format("d")}, {"B", parse_format("ds")}, {"c", parse_format("d")}};
  MachineGrid machine;
  TensorSet tensors;
  std::map<std::string, std::vector<int64_t>> dims;

  explicit SpmvSetup(SparseTensor b, int64_t pieces)
      : machine(MachineGrid::parse(std::to_string(pieces))) {
    int64_t n = b.dims()[0], m = b.dims()[1];
    dims = {{"a", {n}}, {"B", {n, m}}, {"c", {m}}};
    std::vector<TensorEntry> ones;
    for (int64_t j = 0; j < m; j++) ones.push_back({{j}, 1.0});
    tensors.emplace("B", std::move(b));
    tensors.emplace("c", SparseTensor::pack({m}, parse_format("d"), ones));
    tensors.emplace("a", make_output_stub(stmt, formats, dims, tensors));
  }

  Plan row_plan() {
    Schedule sched = Schedule::parse(
        "divide(i, io, ii, M.x); distribute(io, M.x); communicate({a, B, c}, io)");
    return plan(validate_schedule(stmt, sched, formats, dims, machine), tensors);
  }

  Plan nonzero_plan() {
    Schedule sched = Schedule::parse(
        "fuse(i, j, f); divide(f, fo, fi, B.pos, M.x); distribute(fo, M.x); "
        "communicate({a, B, c}, fo)");
    return plan(validate_schedule(stmt, sched, formats, dims, machine), tensors);
  }
};

std::string golden_path(const std::string& name) {
  return std::string(DSPAR_TEST_GOLDEN_DIR) + "/" + name;
}

void check_golden(const std::string& name, const std::string& text) {
  std::ifstream in(golden_path(name));
  if (!in || std::getenv("DSPAR_UPDATE_GOLDEN")) {
    std::ofstream out(golden_path(name));
    out << text;
    REQUIRE_MESSAGE(in, ("golden file created, rerun: " + name).c_str());
    return;
  }
  std::string want((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK_MESSAGE(want == text, ("golden mismatch for " + name + ":\n" + text).c_str());
}

}  // namespace

TEST_CASE("divide_bounds follows the truncating rule with the last piece absorbing") {
  CHECK(divide_bounds(7, 2) == std::vector<CoordRange>{{0, 2}, {3, 6}});
  CHECK(divide_bounds(4, 2) == std::vector<CoordRange>{{0, 1}, {2, 3}});
  CHECK(divide_bounds(3, 2) == std::vector<CoordRange>{{0, 0}, {1, 2}});
  CHECK(divide_bounds(3, 7)[0].empty());
  CHECK(divide_bounds(3, 7)[6] == CoordRange{0, 2});
  CHECK(divide_bounds(0, 2) == std::vector<CoordRange>{CoordRange{0, -1}, CoordRange{0, -1}});
}

TEST_CASE("classification: row spmv io is coordinate-value, fused fo is position") {
  SpmvSetup s(test::csr_example(), 2);
  {
    Schedule sched = Schedule::parse("divide(i, io, ii, M.x); distribute(io, M.x)");
    auto ss = validate_schedule(s.stmt, sched, s.formats, s.dims, s.machine);
    auto cls = classify_iteration(ss, "io");
    CHECK(!cls.position);
    // Undistributed j stays a leaf variable; its classification defaults to
    // coordinate-value and is never consulted.
    CHECK(!classify_iteration(ss, "j").position);
  }
  {
    Schedule sched =
        Schedule::parse("fuse(i, j, f); divide(f, fo, fi, B.pos, M.x); distribute(fo, M.x)");
    auto ss = validate_schedule(s.stmt, sched, s.formats, s.dims, s.machine);
    auto cls = classify_iteration(ss, "fo");
    CHECK(cls.position);
    CHECK(cls.tensor == "B");
    CHECK(classify_iteration(ss, "fi").position);
  }
}

TEST_CASE("row-based spmv plan mirrors the four generated blocks") {
  SpmvSetup s(test::csr_example(), 2);
  Plan p = s.row_plan();

  REQUIRE(p.loops.size() == 1);
  const PlanLoop& loop = p.loops[0];
  CHECK(loop.var == "io");
  CHECK(loop.machine_dim == "x");
  CHECK(loop.color_bounds == std::vector<CoordRange>{{0, 0}, {1, 2}});

  // Partition steps: B and a universe-partitioned, c replicated.
  REQUIRE(loop.partitions.size() == 3);
  CHECK(loop.partitions[0].tensor == "B");
  CHECK(loop.partitions[0].fn == PartitionStep::Fn::Universe);
  CHECK(loop.partitions[0].level == 0);
  CHECK(loop.partitions[1].tensor == "a");
  CHECK(loop.partitions[1].fn == PartitionStep::Fn::Universe);
  CHECK(loop.partitions[2].tensor == "c");
  CHECK(loop.partitions[2].fn == PartitionStep::Fn::Replicate);

  // Block (2): the derived tree. pos copies the row partition, crd follows
  // by image, vals positionally.
  const TensorPartitionBundle& b = p.bundles[loop.bundle_of.at("B")];
  CHECK(b.levels[1].pos->subsets() == std::vector<std::vector<int64_t>>{{0}, {1, 2}});
  CHECK(b.levels[1].crd->subsets() == std::vector<std::vector<int64_t>>{{0, 1}, {2, 3}});
  CHECK(b.vals.subsets() == b.levels[1].crd->subsets());

  // Leaf: i constrained to the worker range, then j.
  REQUIRE(p.leaf.vars.size() == 2);
  CHECK(p.leaf.vars[0].name == "i");
  CHECK(p.leaf.vars[0].domain == LeafVar::Domain::WorkerRange);
  CHECK(p.leaf.vars[1].name == "j");
  CHECK(p.leaf.vars[1].domain == LeafVar::Domain::Full);

  // Disjoint output rows: no reduction step.
  CHECK(!p.combine);
}

TEST_CASE("one piece degenerates to single-color partitions") {
  SpmvSetup s(test::csr_example(), 1);
  Plan p = s.row_plan();
  REQUIRE(p.loops.size() == 1);
  CHECK(p.loops[0].pieces == 1);
  const TensorPartitionBundle& b = p.bundles[p.loops[0].bundle_of.at("B")];
  CHECK(b.vals.num_colors() == 1);
  CHECK(b.vals.subset(0).size() == 4);
  CHECK(!p.combine);
}

TEST_CASE("non-zero spmv plan: straddled row, projected output, reduce step") {
  SpmvSetup s(test::straddle_example(), 2);
  Plan p = s.nonzero_plan();

  REQUIRE(p.loops.size() == 1);
  const PlanLoop& loop = p.loops[0];
  CHECK(loop.position_space);
  CHECK(loop.split_tensor == "B");
  CHECK(loop.split_level == 1);

  const TensorPartitionBundle& b = p.bundles[loop.bundle_of.at("B")];
  CHECK(b.levels[1].crd->subset(0).size() == 2);
  CHECK(b.levels[1].crd->subset(1).size() == 2);
  // Row 0 straddles the cut: its pos entry carries both colors.
  CHECK(b.levels[1].pos->subset(0) == std::vector<int64_t>{0});
  CHECK(b.levels[1].pos->subset(1) == std::vector<int64_t>{0, 1});

  // The output is seeded through B's row ownership: overlapping bounds.
  const TensorPartitionBundle& a = p.bundles[loop.bundle_of.at("a")];
  CHECK(a.vals.subset(0) == std::vector<int64_t>{0});
  CHECK(a.vals.subset(1) == std::vector<int64_t>{0, 1});
  CHECK(!a.vals.disjoint());
  REQUIRE(p.combine);
  CHECK(p.combine->output == "a");
  CHECK(p.combine->op == '+');

  // c shares only the inner variable: replicated.
  CHECK(p.bundles[loop.bundle_of.at("c")].replicated);

  // Leaf iterates stored positions, binding i and j from the path.
  REQUIRE(p.leaf.vars.size() == 1);
  CHECK(p.leaf.vars[0].domain == LeafVar::Domain::PositionRange);
  CHECK(p.leaf.vars[0].bound_roots == std::vector<std::string>{"i", "j"});
}

TEST_CASE("project_to_universe takes per-color min/max of owned top coordinates") {
  SparseTensor b = test::straddle_example();
  Partition top(IndexSpace({2}), {{0}, {0, 1}});
  auto bounds = project_to_universe(top, b);
  CHECK(bounds == std::vector<CoordRange>{{0, 0}, {0, 1}});

  Partition with_empty(IndexSpace({2}), {{}, {1}});
  auto be = project_to_universe(with_empty, b);
  CHECK(be[0].empty());
  CHECK(be[1] == CoordRange{1, 1});
}

TEST_CASE("batched two-dimensional distribution partitions both modes") {
  TinStatement stmt = parse_tin("A(i, j) = B(i, k) * C(k, j)");
  std::map<std::string, FormatSpec> formats{
      {"A", parse_format("dd")}, {"B", parse_format("ds")}, {"C", parse_format("dd")}};
  MachineGrid machine = MachineGrid::parse("x=2,y=2");
  Rng rng(5);
  TensorSet tensors;
  tensors.emplace("B", test::random_tensor(rng, {4, 5}, parse_format("ds"), 0.4, true));
  tensors.emplace("C", test::random_tensor(rng, {5, 6}, parse_format("dd"), 1.0, true));
  std::map<std::string, std::vector<int64_t>> dims{
      {"A", {4, 6}}, {"B", {4, 5}}, {"C", {5, 6}}};
  tensors.emplace("A", make_output_stub(stmt, formats, dims, tensors));

  Schedule sched = Schedule::parse(
      "divide(i, io, ii, M.x); divide(j, jo, ji, M.y); reorder(io, jo, ii, ji, k); "
      "distribute(io, M.x); distribute(jo, M.y); communicate({B}, io); "
      "communicate({A, C}, jo)");
  Plan p = plan(validate_schedule(stmt, sched, formats, dims, machine), tensors);

  REQUIRE(p.loops.size() == 2);
  CHECK(p.loops[0].machine_dim == "x");
  CHECK(p.loops[1].machine_dim == "y");
  // A partitioned at both loops: rows at io, column slabs at jo.
  CHECK(p.loops[0].bundle_of.count("A"));
  CHECK(p.loops[1].bundle_of.count("A"));
  const TensorPartitionBundle& a_cols = p.bundles[p.loops[1].bundle_of.at("A")];
  // Column slab for color 0: j in {0,1,2} of a 4x6 output.
  std::vector<int64_t> expect;
  for (int64_t i = 0; i < 4; i++)
    for (int64_t j = 0; j < 3; j++) expect.push_back(i * 6 + j);
  CHECK(a_cols.vals.subset(0) == expect);
  CHECK(!p.combine);
}

TEST_CASE("planner rejects invalid distributions") {
  SpmvSetup s(test::csr_example(), 2);
  // Distributing a variable over a machine dimension it was not divided by.
  Schedule sched = Schedule::parse("divide(i, io, ii, M.x); distribute(io, M.y)");
  MachineGrid grid2 = MachineGrid::parse("x=2,y=2");
  auto ss = validate_schedule(s.stmt, sched, s.formats, s.dims, grid2);
  CHECK_THROWS_AS(plan(ss, s.tensors), ValidationError);
  // More distributed variables than grid dimensions.
  Schedule two = Schedule::parse(
      "divide(i, io, ii, M.x); split(j, jo, ji, 2); distribute(io, M.x); "
      "reorder(io, jo, ii, ji); distribute(jo, M.x)");
  CHECK_THROWS_AS(validate_schedule(s.stmt, two, s.formats, s.dims, s.machine),
                  ValidationError);
}

TEST_CASE("lower_tdn: row-wise placement of the csr example") {
  SparseTensor b = test::csr_example();
  MachineGrid machine = MachineGrid::parse("2");
  Plan p = lower_tdn(parse_tdn("B(x, y) onto M(x)"), parse_format("ds"), {3, 3}, machine, b);
  REQUIRE(p.loops.size() == 1);
  const TensorPartitionBundle& bundle = p.bundles[p.loops[0].bundle_of.at("B")];
  // Truncating division of 3 rows into 2 pieces: {0} and {1, 2}.
  CHECK(bundle.levels[0].dom->subsets() == std::vector<std::vector<int64_t>>{{0}, {1, 2}});
  CHECK(bundle.vals.subset(0).size() == 2);
  CHECK(bundle.vals.subset(1).size() == 2);
}

TEST_CASE("lower_tdn: fused non-zero placement splits values evenly") {
  SparseTensor b = test::csr_example();
  MachineGrid machine = MachineGrid::parse("2");
  Plan p = lower_tdn(parse_tdn("B(x, y) fuse(x, y -> f) onto M(~f)"), parse_format("ds"),
                     {3, 3}, machine, b);
  REQUIRE(p.loops.size() == 1);
  CHECK(p.loops[0].position_space);
  const TensorPartitionBundle& bundle = p.bundles[p.loops[0].bundle_of.at("B")];
  CHECK(bundle.vals.subset(0).size() == 2);
  CHECK(bundle.vals.subset(1).size() == 2);
}

TEST_CASE("lower_tdn: one piece keeps the whole tensor on one color") {
  SparseTensor b = test::csr_example();
  MachineGrid machine = MachineGrid::parse("1");
  Plan p = lower_tdn(parse_tdn("B(x, y) onto M(x)"), parse_format("ds"), {3, 3}, machine, b);
  const TensorPartitionBundle& bundle = p.bundles[p.loops[0].bundle_of.at("B")];
  CHECK(bundle.vals.num_colors() == 1);
  CHECK(bundle.vals.subset(0).size() == 4);
}

TEST_CASE("lower_tdn: replication when no name matches") {
  SparseTensor c = SparseTensor::pack({3}, parse_format("d"), {{{0}, 1.0}});
  MachineGrid machine = MachineGrid::parse("2");
  Plan p = lower_tdn(parse_tdn("c(x) onto M(y)"), parse_format("d"), {3}, machine, c);
  CHECK(p.loops.empty());
  // Residency derived from this placement replicates everywhere.
  TensorSet ts;
  ts.emplace("c", c);
  std::map<std::string, Plan> placements;
  placements.emplace("c", p);
  Residency r = residency_from_placements(placements, machine, ts);
  CHECK(r.tensors.at("c")[0].vals.size() == 3);
  CHECK(r.tensors.at("c")[1].vals.size() == 3);
}

TEST_CASE("render: empty plan gives an empty listing") { CHECK(render_plan(Plan{}) == ""); }

TEST_CASE("render: leaf-only plan prints only the leaf block") {
  SpmvSetup s(test::csr_example(), 1);
  Plan p =
      plan(validate_schedule(s.stmt, Schedule{}, s.formats, s.dims, s.machine), s.tensors);
  std::string text = render_plan(p);
  CHECK(text.find("// (4) leaf") != std::string::npos);
  CHECK(text.find("// (1)") == std::string::npos);
  CHECK(text.find("distributed for") == std::string::npos);
}

TEST_CASE("render golden: row-based spmv") {
  SpmvSetup s(test::csr_example(), 2);
  check_golden("plan_spmv_row.txt", render_plan(s.row_plan()));
}

TEST_CASE("render golden: one-piece row spmv") {
  SpmvSetup s(test::csr_example(), 1);
  check_golden("plan_spmv_row_p1.txt", render_plan(s.row_plan()));
}

TEST_CASE("render golden: non-zero spmv") {
  SpmvSetup s(test::straddle_example(), 2);
  check_golden("plan_spmv_nonzero.txt", render_plan(s.nonzero_plan()));
}
