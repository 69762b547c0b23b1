#include <gtest/gtest.h>

#include "bonus/double_bonus.hpp"
#include "test_util.hpp"

using namespace bonus;

namespace {

BonusConfig config(double alpha, std::size_t n_tilde, FdpKind kind = BhKind{}) {
  BonusConfig c;
  c.alpha = alpha;
  c.n_tilde = n_tilde;
  c.kind = kind;
  return c;
}

Statistic coordinate_square(int j) {
  return Statistic("x" + std::to_string(j) + "^2", [j](std::span<const double> x) { return x[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)]; });
}

// Nulls N(0, I_4); half the alternatives inflate coordinate 0, the other half coordinate 1.
Data two_cluster(std::size_t n, std::size_t n1, double sd, Rng& rng) {
  Data x = sample_null(GaussianIdentity{4}, n, rng);
  for (std::size_t i = 0; i < n1; ++i) x(static_cast<Eigen::Index>(i), i % 2 == 0 ? 0 : 1) *= sd;
  return x;
}

}  // namespace

TEST(ScreenCandidates, SingleLearnerIsSelected) {
  Rng rng = make_rng(50);
  const Data z = sample_null(GaussianIdentity{3}, 100, rng);
  const auto s = screen_candidates(z, {std::make_shared<const AgnosticLearner>(GaussianIdentity{3})},
                                   GaussianIdentity{3}, config(0.1, 100), 200, rng);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_TRUE(s[0].selected);
  EXPECT_EQ(s[0].learner, "agnostic");
}

TEST(ScreenCandidates, GlobalNullTiesGoToListOrder) {
  Rng rng = make_rng(51);
  const NullModel model = GaussianIdentity{5};
  const Data z = sample_null(model, 600, rng);
  const std::vector<LearnerPtr> menu{std::make_shared<const LowRankLearner>(1), std::make_shared<const LowRankLearner>(2),
                                     std::make_shared<const AgnosticLearner>(model)};
  const auto s = screen_candidates(z, menu, model, config(0.01, 600), 1200, rng);
  for (const auto& c : s) EXPECT_EQ(c.rejections, 0u) << c.learner;
  EXPECT_TRUE(s[0].selected);
  EXPECT_FALSE(s[1].selected);
  EXPECT_FALSE(s[2].selected);
}

TEST(ScreenCandidates, OracleDominatesAgnostic) {
  Rng rng = make_rng(52);
  int wins = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const Scenario sc = make_gaussian_lowrank_scenario(10, 400, 40, 1, 8.0, rng);
    const std::vector<LearnerPtr> menu{std::make_shared<const AgnosticLearner>(sc.null_model),
                                       std::make_shared<const FixedLearner>(make_oracle_statistic(sc.null_model, sc.alt), "oracle")};
    const auto s = screen_candidates(sc.observations, menu, sc.null_model, config(0.1, 400), 800, rng);
    wins += s[1].rejections >= s[0].rejections;
  }
  EXPECT_GE(wins, 45);
}

TEST(ScreenCandidates, Errors) {
  Rng rng = make_rng(1);
  const Data z = Data::Zero(5, 2);
  EXPECT_THROW(screen_candidates(z, {}, GaussianIdentity{2}, config(0.1, 5), 10, rng), Error);
  EXPECT_THROW(screen_candidates(z, {std::make_shared<const AgnosticLearner>(GaussianIdentity{2})}, GaussianIdentity{2},
                                 config(0.1, 5), 0, rng),
               Error);
}

TEST(RunDoubleBonus, SingleLearnerMenuMatchesRunBonus) {
  Rng gen = make_rng(53);
  for (int rep = 0; rep < 5; ++rep) {
    const Scenario sc = make_gaussian_lowrank_scenario(6, 500, 60, 1, 6.0, gen);
    const auto learner = std::make_shared<const LowRankLearner>(1);
    const BonusConfig c = config(0.1, 500, rep % 2 ? FdpKind{StoreyKind{}} : FdpKind{BhKind{}});
    Rng a = make_rng(100 + rep), b = make_rng(100 + rep);
    const DoubleBonusResult d = run_double_bonus(sc.observations, {learner}, sc.null_model, c, {}, a);
    const RunResult r = run_bonus(sc.observations, *learner, sc.null_model, c, b);
    EXPECT_EQ(d.run.rejected, r.rejected);
    EXPECT_EQ(d.run.t_hat, r.t_hat);
    EXPECT_EQ(d.selected, "pca1");
  }
}

TEST(RunDoubleBonus, Deterministic) {
  Rng gen = make_rng(54);
  const Scenario sc = make_gaussian_lowrank_scenario(8, 400, 40, 3, 6.0, gen);
  std::vector<LearnerPtr> menu;
  for (int k : {1, 3, 5}) menu.push_back(std::make_shared<const LowRankLearner>(k));
  DoubleOptions opt;
  opt.ensemble = true;
  opt.reference_size = 2000;
  Rng a = make_rng(9), b = make_rng(9);
  const auto r1 = run_double_bonus(sc.observations, menu, sc.null_model, config(0.1, 400), opt, a);
  const auto r2 = run_double_bonus(sc.observations, menu, sc.null_model, config(0.1, 400), opt, b);
  EXPECT_EQ(r1.selected, r2.selected);
  EXPECT_EQ(r1.run.rejected, r2.run.rejected);
  ASSERT_EQ(r1.screening.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r1.screening[i].rejections, r2.screening[i].rejections);
  const auto selected = std::count_if(r1.screening.begin(), r1.screening.end(), [](const CandidateScore& c) { return c.selected; });
  if (r1.ensemble_adopted)
    EXPECT_GE(selected, 2);
  else
    EXPECT_EQ(selected, 1);
}

TEST(RunDoubleBonus, Errors) {
  Rng rng = make_rng(1);
  const Data x = Data::Zero(5, 2);
  DoubleOptions opt;
  EXPECT_THROW(run_double_bonus(x, {}, GaussianIdentity{2}, config(0.1, 5), opt, rng), Error);
  opt.ensemble_factor = 1.5;
  EXPECT_THROW(run_double_bonus(x, {std::make_shared<const AgnosticLearner>(GaussianIdentity{2})}, GaussianIdentity{2},
                                config(0.1, 5), opt, rng),
               Error);
}

TEST(EnsembleMinP, DuplicatedStatisticReproducesItsPvalue) {
  Rng rng = make_rng(55);
  const Data null = sample_null(GaussianIdentity{3}, 1000, rng);
  const Statistic s = coordinate_square(0);
  const Statistic e = ensemble_min_p({s, s}, null);
  const EmpiricalNull ref(s, null);
  const Data x = sample_null(GaussianIdentity{3}, 200, rng);
  std::vector<double> base, ens;
  for (std::size_t i = 0; i < 200; ++i) {
    EXPECT_EQ(e(row(x, i)), -ref.pvalue(s(row(x, i))));
    base.push_back(s(row(x, i)));
    ens.push_back(e(row(x, i)));
  }
  // Same ordering up to ties of the empirical p-value.
  const auto order = test::argsort(base);
  for (std::size_t i = 1; i < order.size(); ++i) EXPECT_LE(ens[order[i - 1]], ens[order[i]]);
}

TEST(EnsembleMinP, ConstantMemberDefersToTheOther) {
  Rng rng = make_rng(56);
  const Data null = sample_null(GaussianIdentity{2}, 500, rng);
  const Statistic constant("const", [](std::span<const double>) { return 0.0; });
  const Statistic s = coordinate_square(1);
  const Statistic e = ensemble_min_p({constant, s}, null);
  const EmpiricalNull ref(s, null);
  const Data x = sample_null(GaussianIdentity{2}, 100, rng);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(e(row(x, i)), -ref.pvalue(s(row(x, i))));
}

TEST(EnsembleMinP, PointwiseBelowEveryMember) {
  Rng rng = make_rng(57);
  const Data null = sample_null(GaussianIdentity{4}, 800, rng);
  const Statistic a = coordinate_square(0), b = coordinate_square(1);
  const Statistic e = ensemble_min_p({a, b}, null);
  EXPECT_EQ(e.name(), "minp(x0^2,x1^2)");
  const Data x = two_cluster(300, 100, 3.0, rng);
  const EmpiricalNull ra(a, null), rb(b, null);
  for (std::size_t i = 0; i < 300; ++i) {
    const double p = -e(row(x, i));
    EXPECT_LE(p, ra.pvalue(a(row(x, i))));
    EXPECT_LE(p, rb.pvalue(b(row(x, i))));
  }
}

TEST(EnsembleMinP, NeedsTwoStatistics) {
  const Data null = Data::Zero(3, 1);
  EXPECT_THROW(ensemble_min_p({}, null), Error);
  EXPECT_THROW(ensemble_min_p({coordinate_square(0)}, null), Error);
}

TEST(EnsembleMinP, CombinesDisjointDetectors) {
  Rng rng = make_rng(58);
  int good = 0;
  const int reps = 20;
  for (int rep = 0; rep < reps; ++rep) {
    const Data z = two_cluster(1000, 200, 4.0, rng);
    const PooledSet screening = make_screening_pool(z, sample_null(GaussianIdentity{4}, 2000, rng), rng);
    const FixedLearner la(coordinate_square(0), "x0"), lb(coordinate_square(1), "x1");
    BonusConfig c = config(0.1, 1000);
    const std::size_t sa = detail::screen_one(screening, la, c), sb = detail::screen_one(screening, lb, c);
    auto null = std::make_shared<const Data>(sample_null(GaussianIdentity{4}, 5000, rng));
    const EnsembleLearner ens({std::make_shared<const FixedLearner>(la), std::make_shared<const FixedLearner>(lb)}, null);
    const std::size_t se = detail::screen_one(screening, ens, c);
    good += static_cast<double>(se) >= 0.9 * static_cast<double>(std::max(sa, sb));
  }
  EXPECT_GE(good, 16);
}
