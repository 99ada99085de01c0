#ifndef DSPAR_TESTS_SUPPORT_TEST_UTIL_HPP
#define DSPAR_TESTS_SUPPORT_TEST_UTIL_HPP

#include <cstdint>
#include <random>
#include <vector>

#include "dspar/format_lang.hpp"
#include "dspar/tensor.hpp"

namespace dspar::test {

/// The running CSR example: a 3x3 matrix with entries (0,0)=2, (0,1)=3,
/// (1,1)=4, (2,2)=5. Packed dense-then-compressed this gives
/// pos = [(0,1), (2,2), (3,3)], crd = [0, 1, 1, 2], vals = [2, 3, 4, 5].
inline SparseTensor csr_example() {
  return SparseTensor::pack({3, 3}, parse_format("ds"),
                            {{{0, 0}, 2.0}, {{0, 1}, 3.0}, {{1, 1}, 4.0}, {{2, 2}, 5.0}});
}

/// A 2x4 CSR matrix whose first row holds three of the four non-zeros:
/// pos = [(0,2), (3,3)], crd = [0, 1, 2, 3]. Splitting its non-zeros in two
/// puts positions {0,1} and {2,3} on different colors, straddling row 0.
inline SparseTensor straddle_example() {
  return SparseTensor::pack({2, 4}, parse_format("ds"),
                            {{{0, 0}, 1.0}, {{0, 1}, 2.0}, {{0, 2}, 3.0}, {{1, 3}, 4.0}});
}

/// Deterministic RNG with platform-stable helpers (no std distributions).
struct Rng {
  std::mt19937_64 eng;

  explicit Rng(uint64_t seed) : eng(seed) {}

  int64_t next_int(int64_t lo, int64_t hi) {  // inclusive
    return lo + static_cast<int64_t>(eng() % static_cast<uint64_t>(hi - lo + 1));
  }

  double next_real() {  // [-1, 1)
    return static_cast<double>(eng() >> 11) * (2.0 / 9007199254740992.0) - 1.0;
  }

  double next_small_int() { return static_cast<double>(next_int(-3, 3)); }
};

/// Random sparse tensor with the given dims; roughly `density` of the total
/// coordinates stored, values integer-valued when `integers`.
inline SparseTensor random_tensor(Rng& rng, std::vector<int64_t> dims, FormatSpec format,
                                  double density, bool integers) {
  int64_t total = 1;
  for (int64_t d : dims) total *= d;
  int64_t want = static_cast<int64_t>(static_cast<double>(total) * density);
  std::vector<TensorEntry> entries;
  for (int64_t k = 0; k < want; k++) {
    TensorEntry e;
    for (int64_t d : dims) e.coords.push_back(rng.next_int(0, d - 1));
    e.value = integers ? rng.next_small_int() : rng.next_real();
    entries.push_back(std::move(e));
  }
  return SparseTensor::pack(std::move(dims), std::move(format), std::move(entries));
}

}  // namespace dspar::test

#endif
