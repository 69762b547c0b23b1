#include <gtest/gtest.h>

#include "bonus/estimators.hpp"

using namespace bonus;

TEST(FdpBh, Examples) {
  EXPECT_NEAR(fdp_bh(10, 20, 5, 1), 4.0 / 21.0, 1e-15);
  EXPECT_NEAR(fdp_bh(10, 20, 0, 3), 10.0 / 21.0 * 4.0, 1e-15);
  EXPECT_NEAR(fdp_bh(5000, 5000, 220, 10), 5000.0 / 5001.0 * 11.0 / 220.0, 1e-15);
  EXPECT_NEAR(fdp_bh(5000, 5000, 220, 10), 0.049990, 1e-6);
}

TEST(FdpStorey, Examples) {
  EXPECT_EQ(fdp_storey(5, 0, 10, 2), kInfinity);
  EXPECT_NEAR(fdp_storey(9, 20, 100, 4), 0.025, 1e-15);
  EXPECT_NEAR(fdp_storey(0, 10, 1, 0), 0.1, 1e-15);
}

TEST(EstimateFdp, DispatchesOnKind) {
  const RegionCounts region{100, 4}, correction{9, 20};
  EXPECT_NEAR(estimate_fdp(StoreyKind{}, 500, 500, region, correction).value, 0.025, 1e-15);
  EXPECT_NEAR(estimate_fdp(BhKind{}, 10, 20, {5, 1}, {}).value, 4.0 / 21.0, 1e-15);
  const auto e = estimate_fdp(StoreyKind{}, 1, 1, region, {3, 0});
  EXPECT_EQ(e.value, kInfinity);
  EXPECT_EQ(e.region, region);
}

TEST(ShouldStop, Examples) {
  EXPECT_TRUE(should_stop(kInfinity, 0.1, 0));
  EXPECT_TRUE(should_stop(0.100, 0.1, 5));
  EXPECT_FALSE(should_stop(0.11, 0.1, 5));
  EXPECT_FALSE(should_stop(kInfinity, 0.1, 5));
}

TEST(FdpEstimators, MonotoneOnGrid) {
  for (std::size_t nr = 0; nr < 30; ++nr)
    for (std::size_t tr = 0; tr < 30; ++tr) {
      EXPECT_GE(fdp_bh(30, 40, nr, tr), fdp_bh(30, 40, nr + 1, tr));
      EXPECT_LE(fdp_bh(30, 40, nr, tr), fdp_bh(30, 40, nr, tr + 1));
      EXPECT_GE(fdp_storey(3, 7, nr, tr), fdp_storey(3, 7, nr + 1, tr));
      EXPECT_LE(fdp_storey(3, 7, nr, tr), fdp_storey(3, 7, nr, tr + 1));
    }
}

TEST(Hypergeom, WorkedExamples) {
  const auto e = hypergeom_expectations(2, 2, 2);
  EXPECT_NEAR(e.ratio, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(e.product, 5.0 / 6.0, 1e-15);
  const auto f = hypergeom_expectations(1, 1, 1);
  EXPECT_NEAR(f.ratio, 0.5, 1e-15);
  EXPECT_NEAR(f.product, 0.5, 1e-15);
  for (int b = 0; b < 5; ++b)
    for (int k = 0; k <= b; ++k) {
      const auto z = hypergeom_expectations(0, b, k);
      EXPECT_EQ(z.ratio, 0.0);
      EXPECT_EQ(z.product, 0.0);
    }
}

// Reference values from exact rational enumeration.
TEST(Hypergeom, MatchesRationalOracle) {
  struct Case {
    int a, b, k;
    double ratio, product;
  };
  const Case cases[] = {
      {5, 7, 4, 0.6237373737373737, 0.98989898989899},
      {12, 12, 9, 0.9230380939561179, 0.999831740476511},
      {3, 0, 2, 2.0, 0.0},
      {10, 3, 13, 2.5, 0.0},
      {40, 30, 20, 1.2903220312831936, 0.9999991484889501},
      {30, 26, 28, 1.111111111111107, 0.9999999999999432},
  };
  for (const auto& c : cases) {
    const auto e = hypergeom_expectations(c.a, c.b, c.k);
    EXPECT_NEAR(e.ratio, c.ratio, 1e-12) << c.a << "," << c.b << "," << c.k;
    EXPECT_NEAR(e.product, c.product, 1e-12) << c.a << "," << c.b << "," << c.k;
  }
}

TEST(Hypergeom, BoundsHoldExhaustively) {
  for (int a = 0; a <= 12; ++a)
    for (int b = 0; b <= 12; ++b)
      for (int k = 0; k <= a + b; ++k) {
        const auto e = hypergeom_expectations(a, b, k);
        ASSERT_LE(e.ratio, a / (1.0 + b) + 1e-12) << a << "," << b << "," << k;
        ASSERT_LE(e.product, 1.0 + 1e-12) << a << "," << b << "," << k;
      }
}

TEST(Hypergeom, FullDrawIsTight) {
  for (int a = 1; a <= 12; ++a)
    for (int b = 0; b <= 12; ++b) EXPECT_NEAR(hypergeom_expectations(a, b, a + b).ratio, a / (1.0 + b), 1e-12);
}

TEST(Hypergeom, InvalidParameters) {
  EXPECT_THROW(hypergeom_expectations(-1, 2, 1), Error);
  EXPECT_THROW(hypergeom_expectations(2, 2, 5), Error);
  EXPECT_THROW(hypergeom_expectations(2, 2, -1), Error);
}
