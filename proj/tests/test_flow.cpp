#include <gtest/gtest.h>

#include <vector>

#include "rainbow/flow.hpp"
#include "rainbow/random.hpp"

using namespace rainbow;

TEST(Ipd, DifferencesTimestamps) {
  EXPECT_EQ(ipd(Flow("f", {0.0, 1.0, 3.0})), (IpdVector{1.0, 2.0}));
  EXPECT_EQ(ipd(Flow("f", {5.0, 5.0})), (IpdVector{0.0}));
  const auto v = ipd(Flow("f", {0.0, 0.010, 0.025, 0.025}));
  ASSERT_EQ(v.size(), 3u);
  EXPECT_DOUBLE_EQ(v[0], 0.010);
  EXPECT_DOUBLE_EQ(v[1], 0.015);
  EXPECT_EQ(v[2], 0.0);
}

TEST(Flow, RejectsShortOrDecreasing) {
  EXPECT_THROW(Flow("f", {}), InvalidArgument);
  EXPECT_THROW(Flow("f", {1.0}), InvalidArgument);
  EXPECT_THROW(Flow("f", {1.0, 0.5}), InvalidArgument);
  EXPECT_NO_THROW(Flow("f", {1.0, 1.0}));
}

TEST(Reconstruct, InvertsIpd) {
  EXPECT_EQ(reconstruct(0.0, IpdVector{1.0, 2.0}).packets(), (std::vector<double>{0.0, 1.0, 3.0}));
  EXPECT_EQ(reconstruct(0.0, IpdVector{0.0, 0.0}).packets(), (std::vector<double>{0.0, 0.0, 0.0}));
  EXPECT_THROW(reconstruct(10.0, IpdVector{}), InvalidArgument);
  EXPECT_THROW(reconstruct(0.0, IpdVector{1.0, -0.5}), InvalidArgument);
}

TEST(Reconstruct, RoundTripIsBitExactOnRandomFlows) {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(300);
    std::vector<double> t{rng.uniform(0.0, 1e5)};
    for (std::size_t i = 1; i < n; ++i) t.push_back(t.back() + (rng.bit() ? rng.exponential(10.0) : 0.0));
    const Flow f("f", t);
    const IpdVector v = ipd(f);
    ASSERT_EQ(v.size(), f.size() - 1);
    const Flow g = reconstruct(f.start(), v);
    EXPECT_EQ(g.packets(), f.packets()) << "trial " << trial;
    EXPECT_EQ(ipd(g), v);
  }
}

TEST(TruncatePair, TakesCommonPrefix) {
  const auto [a, b] = truncate_pair(IpdVector{1, 2, 3}, IpdVector{4, 5});
  EXPECT_EQ(a, (IpdVector{1, 2}));
  EXPECT_EQ(b, (IpdVector{4, 5}));
  const auto [c, d] = truncate_pair(IpdVector{1}, IpdVector{1});
  EXPECT_EQ(c, (IpdVector{1}));
  EXPECT_EQ(d, (IpdVector{1}));
  EXPECT_THROW(truncate_pair(IpdVector{}, IpdVector{1}), InvalidArgument);
}
