#include <doctest.h>

#include "dspar/errors.hpp"
#include "dspar/level_partition.hpp"
#include "dspar/planner.hpp"
#include "support/test_util.hpp"

using namespace dspar;
using test::Rng;

namespace {

SparseTensor dense_vector6() {
  return SparseTensor::pack({6}, parse_format("d"), {{{0}, 1.0}});
}

}  // namespace

TEST_CASE("dense universe partition colors dom directly") {
  SparseTensor t = dense_vector6();
  LevelPartitioner lp(t, 0);
  lp.init_universe_partition();
  lp.create_universe_partition_entry(0, {0, 2});
  lp.create_universe_partition_entry(1, {3, 5});
  auto [up, down] = lp.finalize_universe_partition();
  CHECK(up.subset(0) == std::vector<int64_t>{0, 1, 2});
  CHECK(up.subset(1) == std::vector<int64_t>{3, 4, 5});
  CHECK(up == down);
}

TEST_CASE("compressed universe partition buckets coordinates, pos by preimage") {
  SparseTensor t = test::csr_example();  // crd = [0,1,1,2]
  LevelPartitioner lp(t, 1);
  lp.init_universe_partition();
  lp.create_universe_partition_entry(0, {0, 1});
  lp.create_universe_partition_entry(1, {2, 2});
  auto [pos, crd] = lp.finalize_universe_partition();
  CHECK(crd.subset(0) == std::vector<int64_t>{0, 1, 2});
  CHECK(crd.subset(1) == std::vector<int64_t>{3});
  CHECK(pos.subset(0) == std::vector<int64_t>{0, 1});
  CHECK(pos.subset(1) == std::vector<int64_t>{2});
}

TEST_CASE("single entry covering the universe gives one color") {
  SparseTensor t = test::csr_example();
  LevelPartitioner lp(t, 1);
  lp.init_universe_partition();
  lp.create_universe_partition_entry(0, {0, 2});
  auto [pos, crd] = lp.finalize_universe_partition();
  CHECK(crd.num_colors() == 1);
  CHECK(crd.subset(0).size() == 4);
  CHECK(pos.subset(0).size() == 3);
}

TEST_CASE("non-zero partition splits positions regardless of coordinates") {
  SparseTensor t = test::csr_example();
  LevelPartitioner lp(t, 1);
  lp.init_nonzero_partition();
  lp.create_nonzero_partition_entry(0, {0, 1});
  lp.create_nonzero_partition_entry(1, {2, 3});
  auto [pos, crd] = lp.finalize_nonzero_partition();
  CHECK(crd.subset(0).size() == 2);
  CHECK(crd.subset(1).size() == 2);
  // Row 0 owns positions 0..1 entirely; rows 1 and 2 fall to color 1.
  CHECK(pos.subset(0) == std::vector<int64_t>{0});
  CHECK(pos.subset(1) == std::vector<int64_t>{1, 2});
}

TEST_CASE("non-zero split straddling a row multi-colors its pos entry") {
  SparseTensor t = test::straddle_example();  // pos = [(0,2), (3,3)]
  LevelPartitioner lp(t, 1);
  lp.init_nonzero_partition();
  lp.create_nonzero_partition_entry(0, {0, 1});
  lp.create_nonzero_partition_entry(1, {2, 3});
  auto [pos, crd] = lp.finalize_nonzero_partition();
  CHECK(pos.subset(0) == std::vector<int64_t>{0});
  CHECK(pos.subset(1) == std::vector<int64_t>{0, 1});
  CHECK(!pos.disjoint());
}

TEST_CASE("division rule: nnz 7 into 2 pieces gives (3, 4)") {
  SparseTensor t = SparseTensor::pack(
      {7}, parse_format("s"),
      {{{0}, 1}, {{1}, 1}, {{2}, 1}, {{3}, 1}, {{4}, 1}, {{5}, 1}, {{6}, 1}});
  auto bounds = divide_bounds(7, 2);
  LevelPartitioner lp(t, 0);
  lp.init_nonzero_partition();
  for (int64_t c = 0; c < 2; c++) lp.create_nonzero_partition_entry(c, bounds[c]);
  auto [pos, crd] = lp.finalize_nonzero_partition();
  CHECK(crd.subset(0).size() == 3);
  CHECK(crd.subset(1).size() == 4);
}

TEST_CASE("partition_from_parent mirrors copy then image") {
  SparseTensor t = test::csr_example();
  Partition rows(IndexSpace({3}), {{0, 1}, {2}});
  auto derived = partition_from_parent(t, 1, rows);
  CHECK(derived.storage.pos->subsets() == rows.subsets());
  CHECK(derived.storage.crd->subset(0) == std::vector<int64_t>{0, 1, 2});
  CHECK(derived.storage.crd->subset(1) == std::vector<int64_t>{3});
  CHECK(derived.next == *derived.storage.crd);

  // Single-color parent stays single-color below.
  auto whole = partition_from_parent(t, 1, Partition(IndexSpace({3}), {{0, 1, 2}}));
  CHECK(whole.storage.crd->subset(0).size() == 4);

  // An empty color yields an empty crd piece.
  auto with_empty = partition_from_parent(t, 1, Partition(IndexSpace({3}), {{}, {0, 1, 2}}));
  CHECK(with_empty.storage.crd->subset(0).empty());
}

TEST_CASE("partition_from_child recovers pos by preimage") {
  SparseTensor t = test::csr_example();
  Partition crd(IndexSpace({4}), {{0, 1}, {2, 3}});
  auto derived = partition_from_child(t, 1, crd);
  CHECK(derived.next.subset(0) == std::vector<int64_t>{0});
  CHECK(derived.next.subset(1) == std::vector<int64_t>{1, 2});

  // Splitting inside row 0 colors its pos entry twice.
  Partition inside(IndexSpace({4}), {{0}, {1, 2, 3}});
  auto overlapping = partition_from_child(t, 1, inside);
  CHECK(overlapping.next.subset(0) == std::vector<int64_t>{0});
  CHECK(overlapping.next.subset(1) == std::vector<int64_t>{0, 1, 2});
  CHECK(!overlapping.next.disjoint());

  Partition one(IndexSpace({4}), {{0, 1, 2, 3}});
  CHECK(partition_from_child(t, 1, one).next.subset(0).size() == 3);
}

TEST_CASE("builder state machine") {
  SparseTensor t = test::csr_example();
  LevelPartitioner lp(t, 1);
  lp.init_universe_partition();
  lp.create_universe_partition_entry(0, {0, 2});
  lp.finalize_universe_partition();
  CHECK_THROWS_AS(lp.create_universe_partition_entry(1, {0, 0}), std::logic_error);
  CHECK_THROWS_AS(lp.finalize_universe_partition(), std::logic_error);

  LevelPartitioner overlap(t, 1);
  overlap.init_universe_partition();
  overlap.create_universe_partition_entry(0, {0, 1});
  overlap.create_universe_partition_entry(1, {1, 2});
  CHECK_THROWS_AS(overlap.finalize_universe_partition(), ValidationError);

  LevelPartitioner gap(t, 1);
  gap.init_nonzero_partition();
  gap.create_nonzero_partition_entry(0, {0, 1});
  CHECK_THROWS_AS(gap.finalize_nonzero_partition(), ValidationError);
}

TEST_CASE("tree derivation assigns vals positionally") {
  SparseTensor t = test::csr_example();
  LevelPartitioner lp(t, 0);
  lp.init_universe_partition();
  auto bounds = divide_bounds(3, 2);
  for (int64_t c = 0; c < 2; c++) lp.create_universe_partition_entry(c, bounds[c]);
  auto [up, down] = lp.finalize_universe_partition();
  auto bundle = partition_coordinate_tree(t, "B", 0, lp.storage_partition(), up, down);
  CHECK(bundle.levels[1].crd->subsets() == bundle.vals.subsets());
  // Rows {0} and {1,2} own leaves {0,1} and {2,3}.
  CHECK(bundle.vals.subset(0) == std::vector<int64_t>{0, 1});
  CHECK(bundle.vals.subset(1) == std::vector<int64_t>{2, 3});
}

TEST_CASE("round trip: parent then child keeps colors of non-empty rows") {
  Rng rng(41);
  for (int trial = 0; trial < 50; trial++) {
    std::vector<int64_t> dims{rng.next_int(1, 8), rng.next_int(1, 8)};
    SparseTensor t = test::random_tensor(rng, dims, parse_format("ds"), 0.4, true);
    int64_t colors = rng.next_int(1, 4);
    std::vector<std::vector<int64_t>> subsets(colors);
    for (int64_t r = 0; r < dims[0]; r++) subsets[rng.next_int(0, colors - 1)].push_back(r);
    Partition rows(IndexSpace({dims[0]}), subsets);

    auto down = partition_from_parent(t, 1, rows);
    auto back = partition_from_child(t, 1, down.next);
    const auto& lvl = std::get<CompressedLevel>(t.level(1));
    for (int64_t c = 0; c < colors; c++) {
      for (int64_t r : rows.subset(c)) {
        if (lvl.pos.range_at(r).empty()) continue;
        CHECK(back.next.contains(c, r));
      }
    }
  }
}

TEST_CASE("all-dense tensors: universe and non-zero partitioning coincide") {
  SparseTensor t = SparseTensor::pack({6}, parse_format("d"), {{{1}, 2.0}});
  auto bounds = divide_bounds(6, 3);

  LevelPartitioner u(t, 0);
  u.init_universe_partition();
  for (int64_t c = 0; c < 3; c++) u.create_universe_partition_entry(c, bounds[c]);
  auto [uu, ud] = u.finalize_universe_partition();

  LevelPartitioner z(t, 0);
  z.init_nonzero_partition();
  for (int64_t c = 0; c < 3; c++) z.create_nonzero_partition_entry(c, bounds[c]);
  auto [zu, zd] = z.finalize_nonzero_partition();

  CHECK(uu == zu);
  CHECK(ud == zd);
}

TEST_CASE("multi-mode dense level partitions along one mode as slabs") {
  SparseTensor t = SparseTensor::pack({2, 3}, parse_format("dd"), {{{0, 0}, 1.0}});
  LevelPartitioner lp(t, 0, 1);  // partition along the second mode
  lp.init_universe_partition();
  lp.create_universe_partition_entry(0, {0, 1});
  lp.create_universe_partition_entry(1, {2, 2});
  auto [up, down] = lp.finalize_universe_partition();
  CHECK(lp.storage_partition().dom->subset(0) == std::vector<int64_t>{0, 1, 3, 4});
  CHECK(lp.storage_partition().dom->subset(1) == std::vector<int64_t>{2, 5});
  CHECK(up == down);
}
