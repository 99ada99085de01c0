#include <doctest.h>

#include "dspar/errors.hpp"
#include "dspar/format_lang.hpp"
#include "dspar/machine.hpp"
#include "dspar/schedule.hpp"
#include "dspar/tin.hpp"

using namespace dspar;

namespace {

std::map<std::string, FormatSpec> spmv_formats() {
  return {{"a", parse_format("d")}, {"B", parse_format("ds")}, {"c", parse_format("d")}};
}

std::map<std::string, std::vector<int64_t>> spmv_dims(int64_t n = 3, int64_t m = 3) {
  return {{"a", {n}}, {"B", {n, m}}, {"c", {m}}};
}

}  // namespace

TEST_CASE("parse_tin recognizes the kernel forms") {
  TinStatement ttv = parse_tin("A(i,j) = B(i,j,k) * c(k)");
  CHECK(ttv.lhs.tensor == "A");
  CHECK(ttv.lhs.vars == std::vector<std::string>{"i", "j"});
  CHECK(ttv.reduction_vars == std::vector<std::string>{"k"});

  TinStatement spmv = parse_tin("a(i) = B(i, j) * c(j)");
  CHECK(spmv.reduction_vars == std::vector<std::string>{"j"});
  CHECK(spmv.vars == std::vector<std::string>{"i", "j"});

  TinStatement add = parse_tin("A(i,j) = B(i,j) + C(i,j) + D(i,j)");
  CHECK(add.terms.size() == 3);
  CHECK(add.reduction_vars.empty());

  // The paper's middle-dot spelling of multiplication.
  TinStatement dot = parse_tin("a(i) = B(i, j) \xc2\xb7 c(j)");
  CHECK(dot == spmv);
}

TEST_CASE("parse_tin errors") {
  CHECK_THROWS_AS(parse_tin("a(i) = B(i, j) ? c(j)"), ParseError);
  CHECK_THROWS_AS(parse_tin("a(i) = b(j)"), ValidationError);        // lhs var not on rhs
  CHECK_THROWS_AS(parse_tin("a(i) = B(i) * B(i, j)"), ValidationError);  // arity mismatch
  CHECK_THROWS_AS(parse_tin("a(i) = a(i)"), ValidationError);        // output read
  CHECK_THROWS_AS(parse_tin("a(i) = B(i, i)"), ValidationError);     // repeated variable
}

TEST_CASE("tin round-trips through print and parse") {
  for (const char* text :
       {"a(i) = B(i, j) * c(j)", "A(i, j) = B(i, k) * C(k, j)",
        "A(i, j) = B(i, j) + C(i, j) + D(i, j)", "A(i, j) = B(i, j) * C(i, k) * D(k, j)",
        "A(i, l) = B(i, j, k) * C(j, l) * D(k, l)"}) {
    TinStatement stmt = parse_tin(text);
    CHECK(parse_tin(stmt.to_string()) == stmt);
  }
}

TEST_CASE("parse_format variants") {
  FormatSpec csr = parse_format("ds");
  CHECK(csr.kinds == std::vector<LevelKind>{LevelKind::Dense, LevelKind::Compressed});
  CHECK(csr.mode_order == std::vector<int>{0, 1});

  FormatSpec csc = parse_format("ds:1,0");
  CHECK(csc.mode_order == std::vector<int>{1, 0});
  CHECK(parse_format(format_to_string(csc)) == csc);

  CHECK_THROWS_AS(parse_format("dx"), ParseError);
  CHECK_THROWS_AS(parse_format("ds:0,0"), ParseError);
  CHECK_THROWS_AS(parse_format(""), ParseError);
}

TEST_CASE("machine grid parsing") {
  MachineGrid one = MachineGrid::parse("4");
  CHECK(one.rank() == 1);
  CHECK(one.names() == std::vector<std::string>{"x"});
  CHECK(one.total_workers() == 4);

  MachineGrid two = MachineGrid::parse("x=2,y=3");
  CHECK(two.extent("y") == 3);
  CHECK(two.worker_id({1, 2}) == 5);
  CHECK(two.worker_coords(5) == std::vector<int64_t>{1, 2});

  CHECK_THROWS_AS(MachineGrid::parse("x=0"), ValidationError);
  CHECK_THROWS_AS(MachineGrid::parse(""), ParseError);
}

TEST_CASE("tdn parsing and round-trip") {
  TdnStatement row = parse_tdn("T(x, y) onto M(x)");
  CHECK(row.tensor == "T");
  CHECK(row.dim_names == std::vector<std::string>{"x", "y"});
  REQUIRE(row.machine_dims.size() == 1);
  CHECK(row.machine_dims[0].name == "x");
  CHECK(!row.machine_dims[0].nonzero);

  TdnStatement fused = parse_tdn("T(x, y) fuse(x, y -> f) onto M(~f)");
  REQUIRE(fused.fusions.size() == 1);
  CHECK(fused.fusions[0].parts == std::vector<std::string>{"x", "y"});
  CHECK(fused.fusions[0].fused == "f");
  CHECK(fused.machine_dims[0].nonzero);
  CHECK(parse_tdn(fused.to_string()) == fused);

  CHECK_THROWS_AS(parse_tdn("T(x, y) onto"), ParseError);
  CHECK_THROWS_AS(parse_tdn("T(x) fuse(x -> f) onto M(f)"), ParseError);
}

TEST_CASE("tdn validation") {
  MachineGrid grid = MachineGrid::parse("2");

  // Universe on any mode; row-wise distribution of a CSR matrix.
  auto row = validate_tdn(parse_tdn("T(x, y) onto M(x)"), parse_format("ds"), grid);
  REQUIRE(row.size() == 1);
  CHECK(row[0].storage_modes == std::vector<int>{0});
  CHECK(!row[0].nonzero);

  // Fused non-zero split of a matrix.
  auto fused =
      validate_tdn(parse_tdn("T(x, y) fuse(x, y -> f) onto M(~f)"), parse_format("ds"), grid);
  REQUIRE(fused.size() == 1);
  CHECK(fused[0].nonzero);
  CHECK(fused[0].storage_modes == std::vector<int>{0, 1});

  // Non-zero slices of a 3-tensor: tilde on the first compressed mode.
  auto slices = validate_tdn(parse_tdn("T(x, y, z) onto M(~x)"), parse_format("sss"), grid);
  REQUIRE(slices.size() == 1);
  CHECK(slices[0].nonzero);

  // Unmatched machine name replicates; nothing to partition.
  CHECK(validate_tdn(parse_tdn("c(x) onto M(y)"), parse_format("d"), grid).empty());

  // Tilde needs a compressed innermost mode.
  CHECK_THROWS_AS(validate_tdn(parse_tdn("T(x, y) onto M(~x)"), parse_format("ds"), grid),
                  ValidationError);
  // Fused names only distribute with a tilde.
  CHECK_THROWS_AS(
      validate_tdn(parse_tdn("T(x, y) fuse(x, y -> f) onto M(f)"), parse_format("ds"), grid),
      ValidationError);
  // Fusion must follow storage order.
  CHECK_THROWS_AS(
      validate_tdn(parse_tdn("T(x, y) fuse(y, x -> f) onto M(~f)"), parse_format("ds"), grid),
      ValidationError);
  // Duplicate dimension names.
  CHECK_THROWS_AS(validate_tdn(parse_tdn("T(x, x) onto M(x)"), parse_format("ds"), grid),
                  ValidationError);
  // Unknown machine dimensions relative to the grid rank.
  CHECK_THROWS_AS(validate_tdn(parse_tdn("T(x, y) onto M(x, y, z)"), parse_format("ds"),
                               MachineGrid::parse("2,2")),
                  ValidationError);
}

TEST_CASE("schedule parse and round-trip") {
  Schedule s = Schedule::parse(
      "divide(i, io, ii, M.x); distribute(io, M.x); communicate({a, B, c}, io); "
      "parallelize(ii, threads)");
  REQUIRE(s.directives.size() == 4);
  CHECK(s.directives[0].kind == Directive::Kind::Divide);
  CHECK(s.directives[0].grid_dim == "x");
  CHECK(s.directives[2].tensors == std::vector<std::string>{"a", "B", "c"});
  CHECK(Schedule::parse(s.to_string()).to_string() == s.to_string());

  Schedule pos = Schedule::parse("fuse(i, j, f); divide(f, fo, fi, B.pos, M.x)");
  CHECK(pos.directives[1].position_tensor == "B");

  CHECK_THROWS_AS(Schedule::parse("frobnicate(i)"), ParseError);
  CHECK_THROWS_AS(Schedule::parse("divide(i, io)"), ParseError);
}

TEST_CASE("validate_schedule: row-based spmv") {
  TinStatement stmt = parse_tin("a(i) = B(i, j) * c(j)");
  Schedule sched = Schedule::parse(
      "divide(i, io, ii, M.x); distribute(io, M.x); communicate({a, B, c}, io); "
      "parallelize(ii, threads)");
  auto ss = validate_schedule(stmt, sched, spmv_formats(), spmv_dims(), MachineGrid::parse("2"));
  REQUIRE(ss.loops.size() == 3);
  CHECK(ss.loops[0].name == "io");
  CHECK(ss.loops[0].distributed);
  CHECK(ss.loops[1].name == "ii");
  CHECK(ss.loops[2].name == "j");
  CHECK(ss.roots_of("io") == std::vector<std::string>{"i"});
  CHECK(!ss.derives_from_reduction("io"));
  CHECK(ss.communicates.size() == 3);
}

TEST_CASE("validate_schedule: fused non-zero spmv") {
  TinStatement stmt = parse_tin("a(i) = B(i, j) * c(j)");
  Schedule sched = Schedule::parse(
      "fuse(i, j, f); divide(f, fo, fi, B.pos, M.x); distribute(fo, M.x); "
      "communicate({a, B, c}, fo)");
  auto ss = validate_schedule(stmt, sched, spmv_formats(), spmv_dims(), MachineGrid::parse("2"));
  REQUIRE(ss.loops.size() == 2);
  CHECK(ss.loops[0].name == "fo");
  CHECK(ss.loops[1].name == "fi");
  CHECK(ss.var("fo").position_space);
  CHECK(ss.var("fo").position_tensor == "B");
  CHECK(ss.roots_of("fo") == std::vector<std::string>{"i", "j"});
  CHECK(ss.derives_from_reduction("fo"));
}

TEST_CASE("reorder twice is the identity") {
  TinStatement stmt = parse_tin("a(i) = B(i, j) * c(j)");
  Schedule sched = Schedule::parse("reorder(j, i); reorder(i, j)");
  auto ss = validate_schedule(stmt, sched, spmv_formats(), spmv_dims(), MachineGrid::parse("1"));
  CHECK(ss.loops[0].name == "i");
  CHECK(ss.loops[1].name == "j");
}

TEST_CASE("schedule validation errors") {
  TinStatement stmt = parse_tin("a(i) = B(i, j) * c(j)");
  auto formats = spmv_formats();
  auto dims = spmv_dims();
  MachineGrid grid = MachineGrid::parse("2");

  // Reusing an existing variable closes a cycle in the derivation graph.
  CHECK_THROWS_AS(
      validate_schedule(stmt, Schedule::parse("fuse(i, j, i)"), formats, dims, grid),
      ValidationError);
  // Fusing non-adjacent loops.
  CHECK_THROWS_AS(
      validate_schedule(parse_tin("A(i, j) = B(i, j, k) * c(k)"),
                        Schedule::parse("fuse(i, k, f)"),
                        {{"A", parse_format("ds")},
                         {"B", parse_format("dss")},
                         {"c", parse_format("d")}},
                        {{"A", {2, 3}}, {"B", {2, 3, 4}}, {"c", {4}}}, grid),
      ValidationError);
  // Position split over a tensor the variable does not cover.
  CHECK_THROWS_AS(
      validate_schedule(stmt, Schedule::parse("fuse(i, j, f); divide(f, fo, fi, c.pos, M.x)"),
                        formats, dims, grid),
      ValidationError);
  // Union iteration cannot take a position split.
  CHECK_THROWS_AS(
      validate_schedule(
          parse_tin("A(i, j) = B(i, j) + C(i, j) + D(i, j)"),
          Schedule::parse("fuse(i, j, f); divide(f, fo, fi, B.pos, M.x); distribute(fo, M.x)"),
          {{"A", parse_format("ds")},
           {"B", parse_format("ds")},
           {"C", parse_format("ds")},
           {"D", parse_format("ds")}},
          {{"A", {3, 3}}, {"B", {3, 3}}, {"C", {3, 3}}, {"D", {3, 3}}}, grid),
      ValidationError);
  // Distributed loops must stay outermost.
  CHECK_THROWS_AS(
      validate_schedule(stmt,
                        Schedule::parse("divide(j, jo, ji, M.x); distribute(jo, M.x)"),
                        formats, dims, grid),
      ValidationError);
  // Missing formats surface as validation errors.
  CHECK_THROWS_AS(validate_schedule(stmt, Schedule{}, {{"a", parse_format("d")}}, dims, grid),
                  ValidationError);
  // Compressed variables cannot be hoisted above their storage parents.
  CHECK_THROWS_AS(
      validate_schedule(stmt, Schedule::parse("reorder(j, i)"), formats, dims, grid),
      ValidationError);
  // Communicate at an undistributed loop while others are distributed.
  CHECK_THROWS_AS(
      validate_schedule(stmt,
                        Schedule::parse("divide(i, io, ii, M.x); distribute(io, M.x); "
                                        "communicate({B}, ii)"),
                        formats, dims, grid),
      ValidationError);
}

TEST_CASE("classification inputs name the accessed levels") {
  TinStatement stmt = parse_tin("a(i) = B(i, j) * c(j)");
  auto ss = validate_schedule(stmt, Schedule{}, spmv_formats(), spmv_dims(),
                              MachineGrid::parse("1"));
  auto levels = ss.accessed_levels("j");
  REQUIRE(levels.size() == 2);
  CHECK(levels[0].tensor == "B");
  CHECK(levels[0].level == 1);
  CHECK(levels[1].tensor == "c");
  CHECK(levels[1].level == 0);
}
