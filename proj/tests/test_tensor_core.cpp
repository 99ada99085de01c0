#include <doctest.h>

#include <sstream>

#include "dspar/deppart.hpp"
#include "dspar/errors.hpp"
#include "dspar/tensor_io.hpp"
#include "support/test_util.hpp"

using namespace dspar;
using test::Rng;

namespace {

Region range_region(std::vector<CoordRange> ranges, int64_t dest_extent) {
  IndexSpace space({static_cast<int64_t>(ranges.size())});
  return Region::ranges(space, std::move(ranges), dest_extent);
}

Partition make_partition(int64_t extent, std::vector<std::vector<int64_t>> subsets) {
  return Partition(IndexSpace({extent}), std::move(subsets));
}

// Brute-force folds over the formal definitions, kept independent of the
// library's implementations.
Partition image_bruteforce(const Region& source, const Partition& p, const IndexSpace& dest) {
  std::vector<std::vector<int64_t>> subsets(p.num_colors());
  for (int64_t c = 0; c < p.num_colors(); c++) {
    for (int64_t i = 0; i < source.size(); i++) {
      if (!p.contains(c, i)) continue;
      const CoordRange& r = source.range_at(i);
      for (int64_t d = 0; d < dest.total(); d++) {
        if (r.contains(d)) subsets[c].push_back(d);
      }
    }
  }
  return Partition(dest, std::move(subsets));
}

Partition preimage_bruteforce(const Region& source, const Partition& p,
                              const IndexSpace& dest) {
  std::vector<std::vector<int64_t>> subsets(p.num_colors());
  for (int64_t c = 0; c < p.num_colors(); c++) {
    for (int64_t i = 0; i < dest.total(); i++) {
      if (!p.contains(c, i)) continue;
      for (int64_t s = 0; s < source.size(); s++) {
        if (source.range_at(s).contains(i)) subsets[c].push_back(s);
      }
    }
  }
  return Partition(source.space(), std::move(subsets));
}

}  // namespace

TEST_CASE("index space basics") {
  IndexSpace s({2, 3});
  CHECK(s.total() == 6);
  CHECK(s.linearize({1, 2}) == 5);
  CHECK(s.delinearize(4) == std::vector<int64_t>{1, 1});
  CHECK(IndexSpace({0, 4}).total() == 0);
  CHECK(IndexSpace(std::vector<int64_t>{}).total() == 1);
}

TEST_CASE("coord range emptiness") {
  CHECK(CoordRange{3, 2}.empty());
  CHECK(!CoordRange{2, 2}.empty());
  CHECK(CoordRange{0, 4}.size() == 5);
}

TEST_CASE("partition validates and computes disjointness") {
  auto p = make_partition(5, {{0, 1}, {2, 3, 4}});
  CHECK(p.disjoint());
  auto q = make_partition(5, {{0, 1, 2}, {2, 3}});
  CHECK(!q.disjoint());
  CHECK(q.colors_of(2) == std::vector<int64_t>{0, 1});
  CHECK_THROWS_AS(make_partition(3, {{7}}), std::invalid_argument);
  // Colors may map to empty subsets.
  auto r = make_partition(2, {{}, {0, 1}});
  CHECK(r.subset(0).empty());
}

TEST_CASE("image applies the definition") {
  Region source = range_region({{0, 1}, {2, 2}, {3, 4}}, 5);
  Partition p = make_partition(3, {{0}, {1, 2}});
  Partition result = image(source, p, IndexSpace({5}));
  CHECK(result.subset(0) == std::vector<int64_t>{0, 1});
  CHECK(result.subset(1) == std::vector<int64_t>{2, 3, 4});
  CHECK(result.disjoint());

  // One color covering all of the source: the union of all ranges.
  Partition whole = make_partition(3, {{0, 1, 2}});
  Partition all = image(source, whole, IndexSpace({5}));
  CHECK(all.subset(0) == std::vector<int64_t>{0, 1, 2, 3, 4});
}

TEST_CASE("preimage applies the definition") {
  Region source = range_region({{0, 2}, {3, 3}}, 4);
  Partition dest_part = make_partition(4, {{0, 1}, {2, 3}});
  Partition result = preimage(source, dest_part, IndexSpace({4}));
  CHECK(result.subset(0) == std::vector<int64_t>{0});
  CHECK(result.subset(1) == std::vector<int64_t>{0, 1});
  CHECK(!result.disjoint());  // index 0 takes both colors

  // One color over the whole destination colors every non-empty source.
  Region with_empty = range_region({{0, 1}, {2, 1}, {2, 3}}, 4);
  Partition whole = make_partition(4, {{0, 1, 2, 3}});
  Partition all = preimage(with_empty, whole, IndexSpace({4}));
  CHECK(all.subset(0) == std::vector<int64_t>{0, 2});
}

TEST_CASE("image requires a range-valued source") {
  Region scalars = Region::scalars(IndexSpace({2}), {1.0, 2.0});
  CHECK_THROWS_AS(image(scalars, make_partition(2, {{0, 1}}), IndexSpace({2})),
                  std::invalid_argument);
}

TEST_CASE("image and preimage match the brute-force fold") {
  Rng rng(20260810);
  for (int trial = 0; trial < 200; trial++) {
    int64_t src_n = rng.next_int(1, 32);
    int64_t dest_n = rng.next_int(1, 40);
    std::vector<CoordRange> ranges;
    for (int64_t i = 0; i < src_n; i++) {
      int64_t lo = rng.next_int(0, dest_n - 1);
      int64_t hi = rng.next_int(lo - 1, dest_n - 1);
      ranges.push_back({lo, hi});
    }
    Region source = range_region(ranges, dest_n);

    int64_t colors = rng.next_int(1, 6);
    std::vector<std::vector<int64_t>> src_subsets(colors), dest_subsets(colors);
    for (int64_t i = 0; i < src_n; i++) {
      if (rng.next_int(0, 3) == 0) continue;  // leave some indices uncolored
      src_subsets[rng.next_int(0, colors - 1)].push_back(i);
    }
    for (int64_t i = 0; i < dest_n; i++) {
      if (rng.next_int(0, 3) == 0) continue;
      dest_subsets[rng.next_int(0, colors - 1)].push_back(i);
    }
    Partition src_part(IndexSpace({src_n}), src_subsets);
    Partition dest_part(IndexSpace({dest_n}), dest_subsets);

    CHECK(image(source, src_part, IndexSpace({dest_n})) ==
          image_bruteforce(source, src_part, IndexSpace({dest_n})));
    CHECK(preimage(source, dest_part, IndexSpace({dest_n})) ==
          preimage_bruteforce(source, dest_part, IndexSpace({dest_n})));
  }
}

TEST_CASE("preimage of image keeps colors of non-empty sources") {
  Rng rng(7);
  for (int trial = 0; trial < 100; trial++) {
    int64_t src_n = rng.next_int(1, 24);
    int64_t dest_n = rng.next_int(1, 32);
    std::vector<CoordRange> ranges;
    for (int64_t i = 0; i < src_n; i++) {
      int64_t lo = rng.next_int(0, dest_n - 1);
      int64_t hi = rng.next_int(lo - 1, dest_n - 1);
      ranges.push_back({lo, hi});
    }
    Region source = range_region(ranges, dest_n);
    int64_t colors = rng.next_int(1, 5);
    std::vector<std::vector<int64_t>> subsets(colors);
    for (int64_t i = 0; i < src_n; i++) subsets[rng.next_int(0, colors - 1)].push_back(i);
    Partition p(IndexSpace({src_n}), subsets);

    Partition img = image(source, p, IndexSpace({dest_n}));
    Partition back = preimage(source, img, IndexSpace({dest_n}));
    for (int64_t c = 0; c < colors; c++) {
      for (int64_t i : p.subset(c)) {
        if (source.range_at(i).empty()) continue;
        CHECK(back.contains(c, i));
      }
    }
  }
}

TEST_CASE("partition_by_bounds") {
  auto two = partition_by_bounds(IndexSpace({6}), {{0, {{0, 2}}}, {1, {{3, 5}}}});
  CHECK(two.subset(0) == std::vector<int64_t>{0, 1, 2});
  CHECK(two.subset(1) == std::vector<int64_t>{3, 4, 5});
  CHECK(two.disjoint());

  // Bounds produced by a ceiling-style division of extent 5 into 2.
  auto ceil_style = partition_by_bounds(IndexSpace({5}), {{0, {{0, 2}}}, {1, {{3, 4}}}});
  CHECK(ceil_style.subset(0) == std::vector<int64_t>{0, 1, 2});
  CHECK(ceil_style.subset(1) == std::vector<int64_t>{3, 4});

  auto none = partition_by_bounds(IndexSpace({4}), {});
  CHECK(none.num_colors() == 0);

  CHECK_THROWS_AS(partition_by_bounds(IndexSpace({4}), {{0, {{0, 9}}}}),
                  std::invalid_argument);

  // Boxes over a rank-2 space.
  auto box = partition_by_bounds(IndexSpace({2, 3}), {{0, {{0, 1}, {1, 2}}}});
  CHECK(box.subset(0) == std::vector<int64_t>{1, 2, 4, 5});
}

TEST_CASE("copy_partition reinterprets and keeps cardinalities") {
  Partition p = make_partition(4, {{0, 3}, {1}});
  Region target = Region::coordinates(IndexSpace({4}), {5, 6, 7, 8});
  Partition q = copy_partition(p, target);
  CHECK(q.subsets() == p.subsets());
  for (int64_t c = 0; c < p.num_colors(); c++)
    CHECK(q.subset(c).size() == p.subset(c).size());
  CHECK_THROWS_AS(copy_partition(p, IndexSpace({5})), std::invalid_argument);
}

TEST_CASE("csr example packs to the expected level structure") {
  SparseTensor t = test::csr_example();
  REQUIRE(t.num_levels() == 2);
  const auto& lvl = std::get<CompressedLevel>(t.level(1));
  CHECK(lvl.pos.range_values() ==
        std::vector<CoordRange>{{0, 1}, {2, 2}, {3, 3}});
  CHECK(lvl.crd.coord_values() == std::vector<int64_t>{0, 1, 1, 2});
  CHECK(t.vals().scalar_values() == std::vector<double>{2, 3, 4, 5});
}

TEST_CASE("csc ordering stores columns first") {
  SparseTensor t = SparseTensor::pack(
      {3, 3}, parse_format("ds:1,0"),
      {{{0, 0}, 2.0}, {{0, 1}, 3.0}, {{1, 1}, 4.0}, {{2, 2}, 5.0}});
  const auto& lvl = std::get<CompressedLevel>(t.level(1));
  CHECK(lvl.pos.range_values() ==
        std::vector<CoordRange>{{0, 0}, {1, 2}, {3, 3}});
  CHECK(lvl.crd.coord_values() == std::vector<int64_t>{0, 0, 1, 2});
  CHECK(t.vals().scalar_values() == std::vector<double>{2, 3, 4, 5});
}

TEST_CASE("duplicate coordinates are summed") {
  SparseTensor t = SparseTensor::pack({2}, parse_format("s"),
                                      {{{1}, 1.5}, {{1}, 2.5}, {{0}, 1.0}});
  CHECK(t.vals().scalar_values() == std::vector<double>{1.0, 4.0});
}

TEST_CASE("empty tensor with declared dims") {
  std::istringstream in("");
  SparseTensor t = read_tensor(in, "empty", parse_format("ds"), {{3, 3}});
  CHECK(t.leaf_count() == 0);
  const auto& lvl = std::get<CompressedLevel>(t.level(1));
  for (const auto& r : lvl.pos.range_values()) CHECK(r.empty());
}

TEST_CASE("tns load matches the hand-packed csr example") {
  std::istringstream in("1 1 2\n1 2 3\n2 2 4\n3 3 5\n");
  SparseTensor t = read_tensor(in, "csr", parse_format("ds"), {{3, 3}});
  const auto& lvl = std::get<CompressedLevel>(t.level(1));
  CHECK(lvl.pos.range_values() == std::vector<CoordRange>{{0, 1}, {2, 2}, {3, 3}});
  CHECK(lvl.crd.coord_values() == std::vector<int64_t>{0, 1, 1, 2});
  CHECK(t.vals().scalar_values() == std::vector<double>{2, 3, 4, 5});
}

TEST_CASE("tns loader errors") {
  std::istringstream bad("1 nope 3\n");
  CHECK_THROWS_AS(read_tensor(bad, "t", parse_format("ds"), {{3, 3}}), ParseError);
  std::istringstream out_of_bounds("4 1 1\n");
  CHECK_THROWS_AS(read_tensor(out_of_bounds, "t", parse_format("ds"), {{3, 3}}), ParseError);
  std::istringstream extra("1 1 1 1\n");
  CHECK_THROWS_AS(read_tensor(extra, "t", parse_format("s"), {{3}}), ParseError);
}

TEST_CASE("matrix market coordinate real general") {
  std::istringstream in(
      "%%MatrixMarket matrix coordinate real general\n"
      "% comment line\n"
      "3 3 4\n"
      "1 1 2\n1 2 3\n2 2 4\n3 3 5\n");
  SparseTensor t = read_tensor(in, "mm", parse_format("ds"));
  CHECK(t.dims() == std::vector<int64_t>{3, 3});
  CHECK(t.vals().scalar_values() == std::vector<double>{2, 3, 4, 5});

  std::istringstream unsupported("%%MatrixMarket matrix coordinate complex general\n1 1 1\n");
  CHECK_THROWS_AS(read_tensor(unsupported, "mm", parse_format("ds")), ParseError);
}

TEST_CASE("store writes lexicographic 1-indexed triples") {
  std::ostringstream out;
  write_tensor(test::csr_example(), out);
  CHECK(out.str() == "1 1 2\n1 2 3\n2 2 4\n3 3 5\n");
}

TEST_CASE("dense levels store explicit zeros") {
  SparseTensor t = SparseTensor::pack({2, 2}, parse_format("dd"), {{{0, 1}, 7.0}});
  std::ostringstream out;
  write_tensor(t, out);
  CHECK(out.str() == "1 1 0\n1 2 7\n2 1 0\n2 2 0\n");
}

TEST_CASE("random round-trip preserves the coordinate/value multiset") {
  Rng rng(99);
  for (int trial = 0; trial < 30; trial++) {
    std::vector<int64_t> dims{rng.next_int(1, 9), rng.next_int(1, 9), rng.next_int(1, 5)};
    FormatSpec f = parse_format(trial % 2 ? "dss" : "sds");
    SparseTensor t = test::random_tensor(rng, dims, f, 0.2, true);
    std::ostringstream out;
    write_tensor(t, out);
    std::istringstream in(out.str());
    SparseTensor back = read_tensor(in, "rt", f, {dims});
    auto key = [](const TensorEntry& e) { return std::make_pair(e.coords, e.value); };
    std::vector<std::pair<std::vector<int64_t>, double>> ka, kb;
    for (const auto& e : t.leaves()) ka.push_back(key(e));
    for (const auto& e : back.leaves()) kb.push_back(key(e));
    std::sort(ka.begin(), ka.end());
    std::sort(kb.begin(), kb.end());
    CHECK(ka == kb);
  }
}

TEST_CASE("path coordinates reconstruct stored paths") {
  SparseTensor t = test::csr_example();
  CHECK(t.path_coords(1, 0) == std::vector<int64_t>{0, 0});
  CHECK(t.path_coords(1, 3) == std::vector<int64_t>{2, 2});
  CHECK(t.path_coords(0, 1) == std::vector<int64_t>{1, -1});
}
