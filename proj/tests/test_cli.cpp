#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bonus/config.hpp"
#include "bonus/dists.hpp"
#include "bonus/zscores.hpp"

using namespace bonus;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

double max_offdiag_corr(const Data& x) {
  const Eigen::MatrixXd c = (x.transpose() * x) / static_cast<double>(x.rows());
  double worst = 0.0;
  for (Eigen::Index i = 0; i < c.rows(); ++i)
    for (Eigen::Index j = 0; j < i; ++j) worst = std::max(worst, std::abs(c(i, j) / std::sqrt(c(i, i) * c(j, j))));
  return worst;
}

Data correlated_pair(std::size_t n, double rho, Rng& rng) {
  Data x = sample_null(GaussianIdentity{3}, n, rng);
  x.col(1) = rho * x.col(0) + std::sqrt(1 - rho * rho) * x.col(1);
  return x;
}

}  // namespace

TEST(ParseConfig, MinimalFileFillsDefaults) {
  const Config c = parse_config("[experiment]\nexperiment = intro\nseed = 7\n");
  EXPECT_EQ(c.experiment, "intro");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.scale, 0.2);
  EXPECT_EQ(c.reps, 50u);
  EXPECT_EQ(c.alphas, std::vector<double>{0.1});
  EXPECT_EQ(c.kind, "bh");
  EXPECT_FALSE(c.n_tilde.has_value());
  EXPECT_EQ(c.refit_every, 0u);
  EXPECT_EQ(c.ensemble_factor, 0.8);
  EXPECT_EQ(c.winsor_c, 3.0);
}

TEST(ParseConfig, FullFile) {
  const Config c = parse_config(
      "# sweep\n[experiment]\nexperiment = gaussian\nseed = 3\nalpha = 0.05, 0.1\nscale = 0.4\n"
      "[procedure]\nkind = storey\nq = 0.25\nranks = 1,3,5\nn_tilde = 500\nbatch = auto\nensemble = true\n"
      "[output]\ndir = out  # trailing comment\n[whiten]\nwinsor_c = 2.5\n");
  EXPECT_EQ(c.alphas, (std::vector<double>{0.05, 0.1}));
  EXPECT_TRUE(std::holds_alternative<StoreyKind>(c.fdp_kind()));
  EXPECT_EQ(std::get<StoreyKind>(c.fdp_kind()).q, 0.25);
  EXPECT_EQ(c.ranks, (std::vector<int>{1, 3, 5}));
  EXPECT_EQ(c.n_tilde, 500u);
  EXPECT_FALSE(c.batch.has_value());
  EXPECT_TRUE(c.ensemble);
  EXPECT_EQ(c.out_dir, "out");
  EXPECT_EQ(c.winsor_c, 2.5);
}

TEST(ParseConfig, AlphaOutOfRange) {
  const std::string msg = error_of([] { parse_config("[experiment]\nexperiment = intro\nseed = 1\nalpha = 1.5\n"); });
  EXPECT_NE(msg.find("line 4"), std::string::npos) << msg;
  EXPECT_NE(msg.find("'alpha'"), std::string::npos) << msg;
  EXPECT_NE(msg.find("(0,1)"), std::string::npos) << msg;
}

TEST(ParseConfig, Errors) {
  EXPECT_NE(error_of([] { parse_config("[experiment]\nexperiment = intro\nseed = 1\nbogus = 2\n"); }).find("line 4: 'bogus'"),
            std::string::npos);
  EXPECT_NE(error_of([] { parse_config("[experiment]\nexperiment = intro\n"); }).find("seed"), std::string::npos);
  EXPECT_NE(error_of([] { parse_config("[experiment]\nseed = 1\n"); }).find("experiment"), std::string::npos);
  EXPECT_NE(error_of([] { parse_config("seed = 1\n"); }).find("line 1"), std::string::npos);
  EXPECT_NE(error_of([] { parse_config("[nope]\n"); }).find("unknown section"), std::string::npos);
  EXPECT_NE(error_of([] { parse_config("[experiment]\nexperiment = x\nseed = abc\n"); }).find("line 3"), std::string::npos);
  EXPECT_NE(error_of([] { parse_config("[experiment]\nexperiment = x\nseed = 1\n[procedure]\nkind = both\n"); }).find("one of"),
            std::string::npos);
}

TEST(ParseConfig, AutoNtildeResolves) {
  const Config c = parse_config("[experiment]\nexperiment = intro\nseed = 1\n[procedure]\nn_tilde = auto\nsparse = true\n");
  EXPECT_EQ(resolve_n_tilde(c, 1000, 0.05), 20000u);
  const Config dense = parse_config("[experiment]\nexperiment = intro\nseed = 1\n[procedure]\nsparse = false\n");
  EXPECT_EQ(resolve_n_tilde(dense, 1000, 0.05), 1000u);
  EXPECT_EQ(resolve_n_tilde_plus(c, 1000, 20000), 42000u);
  EXPECT_EQ(resolve_batch(c, 21000), 42u);
}

TEST(Ingest, TwoByTwoFixture) {
  const ZScoreMatrix z = ingest_zscores(std::string(BONUS_TEST_DATA_DIR) + "/two_by_two.csv");
  ASSERT_EQ(z.rows(), 2u);
  ASSERT_EQ(z.dim(), 2);
  EXPECT_EQ(z.names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(z.values(0, 0), 1.0);
  EXPECT_EQ(z.values(0, 1), 2.0);
  EXPECT_EQ(z.values(1, 0), 3.0);
  EXPECT_EQ(z.values(1, 1), 4.0);
}

TEST(Ingest, RaggedRowCitesLine) {
  const std::string msg = error_of([] { ingest_zscores(std::string(BONUS_TEST_DATA_DIR) + "/ragged.csv"); });
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("ragged"), std::string::npos) << msg;
}

TEST(Ingest, Errors) {
  std::istringstream bad("a,b\n1,x\n");
  EXPECT_NE(error_of([&] { parse_zscores(bad); }).find("line 2"), std::string::npos);
  std::istringstream inf("a\ninf\n");
  EXPECT_THROW(parse_zscores(inf), Error);
  std::istringstream empty("");
  EXPECT_THROW(parse_zscores(empty), Error);
  EXPECT_NE(error_of([] { ingest_zscores("/nonexistent/z.csv"); }).find("not found"), std::string::npos);
}

TEST(Ingest, LargeSevenColumnFile) {
  Rng rng = make_rng(60);
  const Data x = sample_null(GaussianIdentity{7}, 100000, rng);
  const auto path = (std::filesystem::temp_directory_path() / "bonus_z7.csv").string();
  {
    std::ofstream f(path);
    f << "bmi,whr,hdl,ldl,tg,glucose,insulin\n";
    f.precision(17);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < 7; ++j) f << x(i, j) << (j == 6 ? '\n' : ',');
  }
  const ZScoreMatrix z = ingest_zscores(path);
  std::filesystem::remove(path);
  EXPECT_EQ(z.rows(), 100000u);
  EXPECT_EQ(z.dim(), 7);
  EXPECT_EQ(z.values, x);
}

TEST(Whiten, IdentityInputStaysUncorrelated) {
  Rng rng = make_rng(61);
  const ZScoreMatrix z{sample_null(GaussianIdentity{4}, 100000, rng), {}};
  EXPECT_LT(max_offdiag_corr(whiten(z).values), 0.02);
}

TEST(Whiten, RemovesNullCorrelation) {
  Rng rng = make_rng(62);
  const ZScoreMatrix z{correlated_pair(100000, 0.26, rng), {}};
  ASSERT_GT(max_offdiag_corr(z.values), 0.2);
  EXPECT_LT(max_offdiag_corr(whiten(z).values), 0.05);
}

TEST(Whiten, SingleColumnIsRescaling) {
  Rng rng = make_rng(63);
  Data x = sample_null(GaussianIdentity{1}, 100000, rng);
  const Data w = whiten(ZScoreMatrix{x, {"z"}}).values;
  const double ratio = w(0, 0) / x(0, 0);
  EXPECT_GT(ratio, 0.0);
  for (Eigen::Index i = 0; i < x.rows(); i += 997) EXPECT_NEAR(w(i, 0), ratio * x(i, 0), 1e-12);
  EXPECT_NEAR(w.squaredNorm() / static_cast<double>(w.rows()), 1.0, 0.02);
}

TEST(Whiten, IdempotentOnWhitenedNullData) {
  Rng rng = make_rng(64);
  const ZScoreMatrix once = whiten(ZScoreMatrix{correlated_pair(100000, 0.26, rng), {}});
  const ZScoreMatrix twice = whiten(once);
  const auto cov = [](const Data& x) { return Eigen::MatrixXd((x.transpose() * x) / static_cast<double>(x.rows())); };
  EXPECT_LT((cov(twice.values) - cov(once.values)).cwiseAbs().maxCoeff(), 0.02);
}

TEST(Whiten, Errors) {
  EXPECT_THROW(whiten(ZScoreMatrix{Data::Ones(3, 3), {}}), Error);  // rows < d + 1
  EXPECT_THROW(whiten(ZScoreMatrix{Data::Ones(10, 2), {}}), Error);  // rank deficient
  EXPECT_THROW(whiten(ZScoreMatrix{Data::Identity(10, 2), {}}, 0.0), Error);
}
