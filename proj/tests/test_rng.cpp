#include <set>

#include <gtest/gtest.h>

#include "twincher/rng.hpp"

namespace twincher {
namespace {

TEST(CounterRng, MatchesSplitMix64ReferenceSequence) {
  // Reference outputs of SplitMix64 seeded with 0.
  CounterRng rng(0);
  EXPECT_EQ(rng.next_u64(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(rng.next_u64(), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(rng.next_u64(), 0x06C45D188009454FULL);
}

TEST(CounterRng, DeriveKeyIsDeterministicAndSeparatesStreams) {
  EXPECT_EQ(derive_key(1, 2, 3), derive_key(1, 2, 3));
  std::set<std::uint64_t> keys;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    for (std::uint64_t tag = 0; tag < 4; ++tag) {
      for (std::uint64_t index = 0; index < 4; ++index) keys.insert(derive_key(seed, tag, index));
    }
  }
  EXPECT_EQ(keys.size(), 64u);
}

TEST(CounterRng, SplitDoesNotAdvanceParent) {
  CounterRng rng = CounterRng::from(5, tags::kExplore);
  const auto child = rng.split(7);
  EXPECT_EQ(rng.counter(), 0u);
  EXPECT_EQ(child.key(), derive_key(rng.key(), 7, 0));
}

TEST(CounterRng, RangesAndMoments) {
  CounterRng rng(42);
  double sum = 0.0, sum_sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double open = rng.uniform_open(-1.0, 1.0);
    ASSERT_GT(open, -1.0);
    ASSERT_LT(open, 1.0);
    ASSERT_LT(rng.below(7), 7u);
    const double z = rng.normal();
    sum += z;
    sum_sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sum_sq / n, 1.0, 0.02);
}

}  // namespace
}  // namespace twincher
