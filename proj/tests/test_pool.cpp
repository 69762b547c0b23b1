#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>

#include "bonus/dists.hpp"
#include "bonus/pool.hpp"

using namespace bonus;

namespace {

Data column(std::initializer_list<double> v) {
  Data d(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) d(i++, 0) = x;
  return d;
}

// Learners only ever see this type; none of these members may exist.
template <class V>
concept ExposesLabels = requires(const V& v) { v.is_real(0); } || requires(const V& v) { v.labels(); } ||
                        requires(const V& v) { v.hidden_labels(); } || requires(const V& v) { v.origin(0); };

static_assert(!ExposesLabels<MaskView>);
static_assert(!std::is_constructible_v<MaskView>);

}  // namespace

TEST(PoolAndMask, TwoElementPermutationIsFair) {
  int real_first = 0;
  const int trials = 4000;
  for (int s = 0; s < trials; ++s) {
    Rng rng = make_rng(static_cast<std::uint64_t>(s));
    const PooledSet p = pool_and_mask(column({1.0}), column({2.0}), rng);
    real_first += p.z()(0, 0) == 1.0;
  }
  // 1/2 within 4 standard errors.
  EXPECT_NEAR(real_first / static_cast<double>(trials), 0.5, 4 * 0.5 / std::sqrt(trials));
}

TEST(PoolAndMask, UniformOverPermutations) {
  std::map<std::vector<int>, int> counts;
  const int trials = 10000;
  for (int s = 0; s < trials; ++s) {
    Rng rng = make_rng(1000 + static_cast<std::uint64_t>(s));
    const PooledSet p = pool_and_mask(column({0, 1, 2}), column({3, 4, 5}), rng);
    std::vector<int> perm;
    for (int j = 0; j < 6; ++j) perm.push_back(static_cast<int>(p.z()(j, 0)));
    counts[perm]++;
  }
  const double expected = trials / 720.0;
  double chi2 = 0.0;
  for (const auto& [perm, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  chi2 += (720.0 - static_cast<double>(counts.size())) * expected;  // unseen permutations
  EXPECT_GT(chi2_upper_tail(chi2, 719.0), 0.001);
}

TEST(PoolAndMask, LabelsTrackOrigin) {
  Rng rng = make_rng(5);
  PooledSet p = pool_and_mask(column({10, 11, 12}), column({20, 21}), rng);
  EXPECT_EQ(p.n(), 3u);
  EXPECT_EQ(p.n_tilde(), 2u);
  std::vector<std::size_t> all(5);
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (const auto& r : p.reveal(all)) EXPECT_EQ(r.is_real, p.z()(static_cast<Eigen::Index>(r.index), 0) < 15);
  EXPECT_EQ(p.real_rows(all), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(PoolAndMask, Errors) {
  Rng rng = make_rng(1);
  EXPECT_THROW(pool_and_mask(column({1}), Data(0, 1), rng), Error);
  EXPECT_THROW(pool_and_mask(column({1}), Data::Zero(2, 3), rng), Error);
}

TEST(Reveal, EmptyLeavesStateUnchanged) {
  Rng rng = make_rng(1);
  PooledSet p = pool_and_mask(column({1, 2}), column({3, 4}), rng);
  EXPECT_TRUE(p.reveal({}).empty());
  EXPECT_EQ(p.masked_count(), 4u);
  EXPECT_EQ(p.masked_counts(), (RegionCounts{2, 2}));
}

TEST(Reveal, AllPartitionsIntoRealAndSynthetic) {
  Rng rng = make_rng(2);
  PooledSet p = pool_and_mask(Data::Random(7, 2), Data::Random(5, 2), rng);
  std::vector<std::size_t> all(12);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto labels = p.reveal(all);
  EXPECT_EQ(std::count_if(labels.begin(), labels.end(), [](const Revealed& r) { return r.is_real; }), 7);
  EXPECT_EQ(p.masked_counts(), (RegionCounts{0, 0}));
}

TEST(Reveal, SingleSynthetic) {
  PooledSet p = PooledSet::from_parts(column({1, 2, 3}), {true, false, true}, {0, 0, 1});
  const std::vector<std::size_t> one{1};
  EXPECT_EQ(p.reveal(one), (std::vector<Revealed>{{1, false}}));
}

TEST(Reveal, Errors) {
  PooledSet p = PooledSet::from_parts(column({1, 2, 3}), {true, false, true}, {0, 0, 1});
  const std::vector<std::size_t> one{1}, bad{3}, dup{0, 0};
  p.reveal(one);
  EXPECT_THROW(p.reveal(one), Error);
  EXPECT_THROW(p.reveal(bad), Error);
  EXPECT_THROW(p.reveal(dup), Error);
  EXPECT_TRUE(p.is_masked(0));  // failed calls leave state untouched
}

TEST(RegionCounts, Examples) {
  PooledSet p = PooledSet::from_parts(column({1, 2, 3, 4}), {true, false, true, false}, {0, 0, 1, 1});
  const std::vector<std::size_t> all{0, 1, 2, 3};
  EXPECT_EQ(p.region_counts(all), (RegionCounts{2, 2}));

  const std::vector<std::size_t> excluded{0, 1}, region{2, 3};
  p.reveal(excluded);
  EXPECT_EQ(p.region_counts(region), (RegionCounts{1, 1}));
  EXPECT_EQ(p.masked_counts(), (RegionCounts{1, 1}));

  const std::vector<std::size_t> partial{2};
  EXPECT_THROW(p.region_counts(partial), Error);  // index 3 is outside and still masked

  p.reveal(region);
  EXPECT_EQ(p.region_counts({}), (RegionCounts{0, 0}));
}

TEST(RegionCounts, ConservationUnderRandomReveals) {
  Rng rng = make_rng(77);
  for (int rep = 0; rep < 50; ++rep) {
    PooledSet p = pool_and_mask(Data::Random(20, 1), Data::Random(15, 1), rng);
    std::vector<std::size_t> order(35);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t real_out = 0, syn_out = 0, pos = 0;
    while (pos < order.size()) {
      const std::size_t take = std::min<std::size_t>(1 + rng() % 4, order.size() - pos);
      for (const auto& r : p.reveal(std::span<const std::size_t>(order.data() + pos, take))) (r.is_real ? real_out : syn_out)++;
      pos += take;
      std::vector<std::size_t> region(order.begin() + static_cast<std::ptrdiff_t>(pos), order.end());
      const RegionCounts c = p.region_counts(region);
      ASSERT_EQ(c.real + real_out, 20u);
      ASSERT_EQ(c.synthetic + syn_out, 15u);
      ASSERT_EQ(c, p.masked_counts());
    }
  }
}

TEST(MaskView, ShowsOnlyRevealedLabels) {
  PooledSet p = PooledSet::from_parts(column({1, 2, 3, 4}), {true, false, true, false}, {0, 0, 1, 1});
  const MaskView before = p.view();
  const std::vector<std::size_t> two{2};
  p.reveal(two);
  const MaskView after = p.view();
  EXPECT_TRUE(before.revealed().empty());
  EXPECT_TRUE(before.is_masked(2));  // snapshots do not change afterwards
  ASSERT_EQ(after.revealed().size(), 1u);
  EXPECT_EQ(after.revealed()[0], (Revealed{2, true}));
  EXPECT_FALSE(after.is_masked(2));
  EXPECT_EQ(after.n(), 2u);
  EXPECT_EQ(after.n_tilde(), 2u);
  EXPECT_EQ(after.size(), 4u);
}
