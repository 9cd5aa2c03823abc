#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "vbt/util.hpp"

namespace vbt {
namespace {

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
}

TEST(Rng, BelowStaysInRange) {
  Rng r(3);
  for (std::uint64_t bound : {1ull, 2ull, 7ull, 1000ull}) {
    for (int i = 0; i < 1000; ++i) EXPECT_LT(r.below(bound), bound);
  }
  EXPECT_EQ(r.below(0), 0u);
}

TEST(Rng, BelowIsRoughlyUniform) {
  Rng r(11);
  std::vector<int> hist(6, 0);
  const int draws = 60000;
  for (int i = 0; i < draws; ++i) ++hist[r.below(6)];
  // binomial sd for p=1/6, n=60000 is ~91
  for (int h : hist) EXPECT_NEAR(h, draws / 6, 5 * 91);
}

TEST(Rng, ShuffleKeepsElements) {
  Rng r(5);
  std::vector<int> v{1, 2, 3, 4, 5, 6, 7};
  r.shuffle(v);
  std::vector<int> s = v;
  std::sort(s.begin(), s.end());
  EXPECT_EQ(s, (std::vector<int>{1, 2, 3, 4, 5, 6, 7}));
}

TEST(Combinatorics, Binomial) {
  EXPECT_DOUBLE_EQ(binomial(4, 1), 4);
  EXPECT_DOUBLE_EQ(binomial(5, 2), 10);
  EXPECT_DOUBLE_EQ(binomial(21, 1), 21);
  EXPECT_DOUBLE_EQ(binomial(3, 4), 0);
  EXPECT_DOUBLE_EQ(factorial(5), 120);
}

TEST(Combinatorics, CombinationsAreLexicographicAndComplete) {
  const auto c = combinations(4, 2);
  ASSERT_EQ(c.size(), 6u);
  EXPECT_EQ(c.front(), (std::vector<int>{0, 1}));
  EXPECT_EQ(c.back(), (std::vector<int>{2, 3}));
  EXPECT_TRUE(std::is_sorted(c.begin(), c.end()));
  EXPECT_EQ(combinations(3, 0).size(), 1u);
  EXPECT_TRUE(combinations(2, 3).empty());
}

TEST(Combinatorics, OrderIndexIsABijection) {
  std::vector<int> p{1, 2, 3, 4};
  std::set<std::size_t> seen;
  do {
    const auto idx = order_index(p);
    EXPECT_LT(idx, 24u);
    seen.insert(idx);
  } while (std::next_permutation(p.begin(), p.end()));
  EXPECT_EQ(seen.size(), 24u);
  // only relative order matters
  EXPECT_EQ(order_index(std::vector<int>{10, 30, 20}), order_index(std::vector<int>{1, 3, 2}));
}

TEST(Hashing, DigestDependsOnOrder) {
  Hasher a, b;
  a.add(1).add(2);
  b.add(2).add(1);
  EXPECT_NE(a.digest(), b.digest());
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
}

}  // namespace
}  // namespace vbt
