#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "hpoerm/random.hpp"

using namespace hpoerm;

TEST_CASE("splitmix64 reference outputs") {
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
  CHECK(splitmix64(1) == 0x910a2dec89025cc1ULL);
}

TEST_CASE("engine sequence is the standard one") {
  // The standard fixes the 10000th output of a default-seeded mt19937_64.
  Rng rng(5489u);
  std::uint64_t x = 0;
  for (int i = 0; i < 10000; ++i) x = rng.next_u64();
  CHECK(x == 9981545732273789042ULL);
}

TEST_CASE("derived seeds are distinct and order sensitive") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 30; ++a) {
    for (std::uint64_t b = 0; b < 30; ++b) seen.insert(derive_seed(7, {a, b}));
  }
  CHECK(seen.size() == 900);
  CHECK(derive_seed(7, {1, 2}) != derive_seed(7, {2, 1}));
  CHECK(derive_seed(7, {}) != derive_seed(8, {}));
  CHECK(derive_seed(7, {0}) != derive_seed(7, {}));
  CHECK(derive_seed(7, {3, 4}) == derive_seed(7, {3, 4}));
}

TEST_CASE("uniform01 stays in [0,1) with the right mean") {
  Rng rng(1);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("normal moments") {
  Rng rng(2);
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s1 += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  CHECK(std::abs(s1 / n) < 0.01);
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(s4 / n == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("below is uniform over its range") {
  Rng rng(3);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto k = rng.below(7);
    REQUIRE(k < 7);
    ++counts[k];
  }
  // chi-square with 6 degrees of freedom; 22.5 is the 0.999 quantile
  double chi2 = 0.0;
  for (const int c : counts) chi2 += (c - 10000.0) * (c - 10000.0) / 10000.0;
  CHECK(chi2 < 22.5);
  CHECK(rng.below(1) == 0);
}

TEST_CASE("permutations are permutations and reproducible") {
  Rng a(9), b(9);
  auto p = random_permutation(1000, a);
  auto q = random_permutation(1000, b);
  CHECK(p == q);
  auto sorted = p;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) REQUIRE(sorted[i] == i);
  CHECK(p != sorted);

  // each position takes each value about equally often
  std::vector<int> first(5, 0);
  Rng c(10);
  for (int i = 0; i < 50000; ++i) ++first[random_permutation(5, c)[0]];
  for (const int f : first) CHECK(std::abs(f - 10000) < 500);

  CHECK(random_permutation(0, c).empty());
}
