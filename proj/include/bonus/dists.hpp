#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <variant>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "bonus/core.hpp"
#include "bonus/statistic.hpp"

namespace bonus {

// ---------------------------------------------------------------------------
// Null models and alternative parameters
// ---------------------------------------------------------------------------

struct GaussianIdentity {
  int d = 1;
};

struct Multinomial {
  int trials = 1;
  std::vector<double> theta0;
};

using NullModel = std::variant<GaussianIdentity, Multinomial>;

/// Covariance excess M of the alternative: X ~ N(0, I + M).
struct LowRankCov {
  Eigen::MatrixXd M;
  int rank = 0;
};

struct MultinomialTheta {
  std::vector<double> theta1;
};

using AltParams = std::variant<LowRankCov, MultinomialTheta>;

struct Scenario {
  Data observations;
  std::vector<bool> truth;  // true = alternative
  NullModel null_model;
  AltParams alt;
  std::size_t n1 = 0;

  std::size_t n() const { return static_cast<std::size_t>(observations.rows()); }
};

inline int dimension(const NullModel& model) {
  return std::visit(
      [](const auto& m) -> int {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, GaussianIdentity>)
          return m.d;
        else
          return static_cast<int>(m.theta0.size());
      },
      model);
}

inline void validate_probabilities(const std::vector<double>& theta, const std::string& what) {
  require(!theta.empty(), what + ": empty probability vector");
  double sum = 0.0;
  for (double p : theta) {
    require(std::isfinite(p) && p > 0.0, what + ": entries must be > 0");
    sum += p;
  }
  require(std::abs(sum - 1.0) <= 1e-12, what + ": entries must sum to 1");
}

inline void validate(const NullModel& model) {
  if (const auto* g = std::get_if<GaussianIdentity>(&model)) {
    require(g->d >= 1, "GaussianIdentity: d must be >= 1");
  } else {
    const auto& m = std::get<Multinomial>(model);
    require(m.trials >= 1, "Multinomial: N must be >= 1");
    validate_probabilities(m.theta0, "Multinomial theta0");
  }
}

inline Multinomial uniform_multinomial(int d, int trials) {
  return Multinomial{trials, std::vector<double>(static_cast<std::size_t>(d), 1.0 / d)};
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

namespace detail {

inline void fill_multinomial(std::span<double> out, int trials, const std::vector<double>& theta, Rng& rng) {
  int remaining = trials;
  double mass = 1.0;
  for (std::size_t j = 0; j + 1 < theta.size(); ++j) {
    if (remaining == 0) {
      out[j] = 0.0;
      continue;
    }
    const double p = std::clamp(theta[j] / mass, 0.0, 1.0);
    std::binomial_distribution<int> draw(remaining, p);
    const int k = draw(rng);
    out[j] = k;
    remaining -= k;
    mass -= theta[j];
  }
  out[theta.size() - 1] = remaining;
}

inline void fill_normal(std::span<double> out, Rng& rng) {
  std::normal_distribution<double> g;
  for (double& v : out) v = g(rng);
}

}  // namespace detail

/// `count` i.i.d. draws from the null model, one per row.
inline Data sample_null(const NullModel& model, std::size_t count, Rng& rng) {
  validate(model);
  const int d = dimension(model);
  Data out(static_cast<Eigen::Index>(count), d);
  for (std::size_t i = 0; i < count; ++i) {
    std::span<double> r(out.data() + i * static_cast<std::size_t>(d), static_cast<std::size_t>(d));
    if (std::holds_alternative<GaussianIdentity>(model)) {
      detail::fill_normal(r, rng);
    } else {
      const auto& m = std::get<Multinomial>(model);
      detail::fill_multinomial(r, m.trials, m.theta0, rng);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Oracle statistics
// ---------------------------------------------------------------------------

/// Eigen-factored form of I - (M + I)^{-1}: weights m/(1+m) on the nonzero eigenvectors of M.
struct QuadraticForm {
  Eigen::MatrixXd basis;    // d x r
  Eigen::VectorXd weights;  // r

  double operator()(std::span<const double> x) const {
    if (weights.size() == 0) return 0.0;
    const Eigen::VectorXd proj = basis.transpose() * as_vector(x);
    return proj.cwiseAbs2().dot(weights);
  }
};

inline QuadraticForm shrinkage_form(const Eigen::MatrixXd& M, double floor = 1e-12) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (M + M.transpose()));
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    if (eig.eigenvalues()(i) > floor) keep.push_back(i);
  QuadraticForm q;
  q.basis.resize(M.rows(), static_cast<Eigen::Index>(keep.size()));
  q.weights.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const double m = eig.eigenvalues()(keep[c]);
    q.basis.col(static_cast<Eigen::Index>(c)) = eig.eigenvectors().col(keep[c]);
    q.weights(static_cast<Eigen::Index>(c)) = m / (1.0 + m);
  }
  return q;
}

inline double chi2_upper_tail(double t, double df) {
  if (!(t > 0.0)) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), t));
}

/// Bayes-optimal score for the given alternative. Gaussian: x'(I - (M+I)^{-1})x;
/// multinomial: sum_j x_j log(theta1_j / theta0_j).
inline Statistic make_oracle_statistic(const NullModel& model, const AltParams& alt) {
  validate(model);
  const int d = dimension(model);
  if (std::holds_alternative<GaussianIdentity>(model)) {
    const auto* cov = std::get_if<LowRankCov>(&alt);
    require(cov != nullptr, "oracle_statistic: Gaussian null needs LowRankCov parameters");
    require(cov->M.rows() == d && cov->M.cols() == d, "oracle_statistic: dimension mismatch");
    auto form = shrinkage_form(cov->M);
    Statistic stat("oracle", [form](std::span<const double> x) { return form(x); },
                   {{"rank", static_cast<double>(form.weights.size())}});
    // Equal nonzero eigenvalues make the null law a scaled chi-square.
    if (form.weights.size() == 0) {
      stat.with_null_tail([](double t) { return t <= 0.0 ? 1.0 : 0.0; });
    } else if (form.weights.maxCoeff() - form.weights.minCoeff() <= 1e-9 * form.weights.maxCoeff()) {
      const double w = form.weights(0);
      const double df = static_cast<double>(form.weights.size());
      stat.with_null_tail([w, df](double t) { return chi2_upper_tail(t / w, df); });
    }
    return stat;
  }
  const auto& m = std::get<Multinomial>(model);
  const auto* th = std::get_if<MultinomialTheta>(&alt);
  require(th != nullptr, "oracle_statistic: multinomial null needs MultinomialTheta parameters");
  require(th->theta1.size() == m.theta0.size(), "oracle_statistic: dimension mismatch");
  Eigen::VectorXd logratio(d);
  for (int j = 0; j < d; ++j) logratio(j) = std::log(th->theta1[j] / m.theta0[j]);
  return Statistic("oracle", [logratio](std::span<const double> x) { return as_vector(x).dot(logratio); });
}

inline double oracle_statistic(const NullModel& model, const AltParams& alt, std::span<const double> x) {
  require(static_cast<int>(x.size()) == dimension(model), "oracle_statistic: dimension mismatch");
  return make_oracle_statistic(model, alt)(x);
}

// ---------------------------------------------------------------------------
// Scenario builders
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<bool> shuffled_truth(std::size_t n, std::size_t n1, Rng& rng) {
  std::vector<bool> truth(n, false);
  std::fill(truth.begin(), truth.begin() + static_cast<std::ptrdiff_t>(n1), true);
  std::shuffle(truth.begin(), truth.end(), rng);
  return truth;
}

}  // namespace detail

/// Random orthonormal d x k frame (QR of a Gaussian matrix).
inline Eigen::MatrixXd random_orthonormal(int d, int k, Rng& rng) {
  Eigen::MatrixXd g(d, k);
  std::normal_distribution<double> normal;
  for (int c = 0; c < k; ++c)
    for (int r = 0; r < d; ++r) g(r, c) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(d, k);
}

/// n observations, n1 of them alternatives drawn N(0, I + M) with M = strength * U U'.
inline Scenario make_gaussian_lowrank_scenario(int d, std::size_t n, std::size_t n1, int rank, double strength,
                                               Rng& rng) {
  require(d >= 1, "gaussian scenario: d must be >= 1");
  require(n1 <= n, "gaussian scenario: n1 must be <= n");
  require(rank >= 1 && rank <= d, "gaussian scenario: rank must be in [1, d]");
  require(std::isfinite(strength) && strength > 0.0, "gaussian scenario: strength must be > 0");

  const Eigen::MatrixXd frame = random_orthonormal(d, rank, rng);
  Eigen::MatrixXd M = strength * frame * frame.transpose();
  M = 0.5 * (M + M.transpose()).eval();

  Scenario s;
  s.null_model = GaussianIdentity{d};
  s.alt = LowRankCov{M, rank};
  s.n1 = n1;
  s.truth = detail::shuffled_truth(n, n1, rng);
  s.observations.resize(static_cast<Eigen::Index>(n), d);

  std::normal_distribution<double> normal;
  const double scale = std::sqrt(strength);
  Eigen::VectorXd latent(rank);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = s.observations.row(static_cast<Eigen::Index>(i));
    for (int j = 0; j < d; ++j) r(j) = normal(rng);
    if (s.truth[i]) {
      for (int c = 0; c < rank; ++c) latent(c) = scale * normal(rng);
      r += (frame * latent).transpose();
    }
  }
  return s;
}

/// Balanced Rademacher signs: d/2 of each, randomly placed.
inline std::vector<double> balanced_signs(int d, Rng& rng) {
  std::vector<double> r(static_cast<std::size_t>(d), 1.0);
  std::fill(r.begin() + d / 2, r.end(), -1.0);
  std::shuffle(r.begin(), r.end(), rng);
  return r;
}

/// Uniform null; alternatives use theta1_j = (1 + delta * r_j) / d with balanced signs r.
inline Scenario make_multinomial_scenario(int d, int trials, std::size_t n, std::size_t n1, double delta, Rng& rng) {
  require(d >= 2 && d % 2 == 0, "multinomial scenario: d must be even");
  require(trials >= 1, "multinomial scenario: N must be >= 1");
  require(n1 <= n, "multinomial scenario: n1 must be <= n");
  require(std::isfinite(delta) && delta >= 0.0 && delta < 1.0, "multinomial scenario: delta must be in [0, 1)");

  Multinomial null = uniform_multinomial(d, trials);
  const auto signs = balanced_signs(d, rng);
  std::vector<double> theta1(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) theta1[j] = (1.0 + delta * signs[j]) / d;

  Scenario s;
  s.null_model = null;
  s.alt = MultinomialTheta{theta1};
  s.n1 = n1;
  s.truth = detail::shuffled_truth(n, n1, rng);
  s.observations.resize(static_cast<Eigen::Index>(n), d);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> r(s.observations.data() + i * static_cast<std::size_t>(d), static_cast<std::size_t>(d));
    detail::fill_multinomial(r, trials, s.truth[i] ? theta1 : null.theta0, rng);
  }
  return s;
}

}  // namespace bonus
