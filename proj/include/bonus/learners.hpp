#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "bonus/core.hpp"
#include "bonus/dists.hpp"
#include "bonus/pool.hpp"
#include "bonus/statistic.hpp"

namespace bonus {

/// An updating rule for the test statistic. Learners only ever receive a MaskView.
class Learner {
 public:
  virtual ~Learner() = default;
  virtual std::string name() const = 0;
  virtual Statistic fit(const MaskView& view) const = 0;
  /// Called by the engine every `refit_every` peel steps; default keeps the current fit.
  virtual Statistic refit(const MaskView& view, const Statistic& current) const {
    (void)view;
    return current;
  }
};

using LearnerPtr = std::shared_ptr<const Learner>;

// ---------------------------------------------------------------------------
// Agnostic statistics
// ---------------------------------------------------------------------------

/// Gaussian: ||x||^2 (GLRT). Multinomial: Pearson chi-square against theta0.
inline Statistic fit_agnostic(const NullModel& model) {
  validate(model);
  if (const auto* g = std::get_if<GaussianIdentity>(&model)) {
    const double df = g->d;
    Statistic stat("agnostic", [](std::span<const double> x) { return as_vector(x).squaredNorm(); });
    stat.with_null_tail([df](double t) { return chi2_upper_tail(t, df); });
    return stat;
  }
  const auto& m = std::get<Multinomial>(model);
  Eigen::VectorXd expected(static_cast<Eigen::Index>(m.theta0.size()));
  for (std::size_t j = 0; j < m.theta0.size(); ++j) expected(static_cast<Eigen::Index>(j)) = m.trials * m.theta0[j];
  return Statistic("agnostic", [expected](std::span<const double> x) {
    return ((as_vector(x) - expected).cwiseAbs2().array() / expected.array()).sum();
  });
}

// ---------------------------------------------------------------------------
// Low-rank Gaussian (PCA) learner
// ---------------------------------------------------------------------------

enum class LowRankMethod { Eigen, EM };

/// Uncentered second moment Z'Z / m; the null and alternative means are both zero.
inline Eigen::MatrixXd second_moment(const Data& z) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(z.cols(), z.cols());
  s.selfadjointView<Eigen::Lower>().rankUpdate(z.transpose());
  s = s.selfadjointView<Eigen::Lower>();
  return s / static_cast<double>(std::max<Eigen::Index>(1, z.rows()));
}

struct EigenPairs {
  Eigen::VectorXd values;  // descending
  Eigen::MatrixXd vectors;
};

inline EigenPairs top_eigenpairs(const Eigen::MatrixXd& s, int k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  const Eigen::Index d = s.rows();
  EigenPairs out{Eigen::VectorXd(k), Eigen::MatrixXd(d, k)};
  for (int c = 0; c < k; ++c) {
    out.values(c) = eig.eigenvalues()(d - 1 - c);
    out.vectors.col(c) = eig.eigenvectors().col(d - 1 - c);
  }
  return out;
}

namespace detail {

// Top-k invariant subspace by the zero-noise EM-PCA fixed point
// W <- S W (W'SW)^{-1} (W'W), then Rayleigh-Ritz inside the subspace.
inline EigenPairs em_pca(const Eigen::MatrixXd& s, int k, int max_iters, double tol) {
  const int d = static_cast<int>(s.rows());
  Rng rng(0x5eedULL);
  Eigen::MatrixXd w = random_orthonormal(d, k, rng);
  Eigen::MatrixXd proj_old = w * w.transpose();
  for (int it = 0; it < max_iters; ++it) {
    const Eigen::MatrixXd sw = s * w;
    const Eigen::MatrixXd wsw = w.transpose() * sw;
    w = sw * wsw.ldlt().solve(w.transpose() * w);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(w);
    w = qr.householderQ() * Eigen::MatrixXd::Identity(d, k);
    const Eigen::MatrixXd proj = w * w.transpose();
    const double change = (proj - proj_old).norm();
    proj_old = proj;
    if (change < tol) break;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(w.transpose() * s * w);
  EigenPairs out{Eigen::VectorXd(k), Eigen::MatrixXd(d, k)};
  for (int c = 0; c < k; ++c) {
    out.values(c) = ritz.eigenvalues()(k - 1 - c);
    out.vectors.col(c) = w * ritz.eigenvectors().col(k - 1 - c);
  }
  return out;
}

}  // namespace detail

/// Statistic x'(I - S_k^{-1})x with S_k = I + sum_i max(l_i - 1, 0) u_i u_i' built from the
/// top-k eigenpairs of a second-moment matrix.
inline Statistic lowrank_from_moment(const Eigen::MatrixXd& s, int k, LowRankMethod method = LowRankMethod::Eigen,
                                     int em_iters = 500, double tol = 1e-10) {
  const int d = static_cast<int>(s.rows());
  require(k >= 1 && k <= d, "fit_lowrank_gaussian: k must be in [1, d]");
  const EigenPairs top = method == LowRankMethod::Eigen ? top_eigenpairs(s, k) : detail::em_pca(s, k, em_iters, tol);
  QuadraticForm form;
  form.basis = top.vectors;
  form.weights.resize(k);
  for (int c = 0; c < k; ++c) {
    const double excess = std::max(top.values(c) - 1.0, 0.0);
    form.weights(c) = excess / (1.0 + excess);
  }
  const std::string name = "pca" + std::to_string(k) + (method == LowRankMethod::EM ? "-em" : "");
  return Statistic(name, [form](std::span<const double> x) { return form(x); }, {{"k", static_cast<double>(k)}});
}

inline Statistic fit_lowrank_gaussian(const Data& z, int k, LowRankMethod method = LowRankMethod::Eigen,
                                      int em_iters = 500, double tol = 1e-10) {
  require(k >= 1 && k <= z.cols(), "fit_lowrank_gaussian: k must be in [1, d]");
  require(z.rows() >= z.cols() + 1, "fit_lowrank_gaussian: need at least d + 1 observations");
  return lowrank_from_moment(second_moment(z), k, method, em_iters, tol);
}

inline Statistic fit_lowrank_gaussian(const MaskView& view, int k, LowRankMethod method = LowRankMethod::Eigen,
                                      int em_iters = 500, double tol = 1e-10) {
  return fit_lowrank_gaussian(view.z(), k, method, em_iters, tol);
}

// ---------------------------------------------------------------------------
// Multinomial deconvolution learner
// ---------------------------------------------------------------------------

/// theta_alt = clip((mean(x/N) - c theta0) / (1 - c)), floored at 1e-8 and renormalized;
/// T(x) = sum_j x_j log(theta_alt_j / theta0_j).
inline Statistic fit_multinomial_deconv(const Data& z, const Multinomial& model, double c) {
  validate(NullModel{model});
  require(c >= 0.0 && c < 1.0, "fit_multinomial_deconv: c must be in [0, 1)");
  require(z.rows() >= 1, "fit_multinomial_deconv: empty view");
  const Eigen::Index d = static_cast<Eigen::Index>(model.theta0.size());
  require(z.cols() == d, "fit_multinomial_deconv: dimension mismatch");

  const Eigen::VectorXd mean = z.colwise().mean().transpose() / static_cast<double>(model.trials);
  Eigen::VectorXd theta(d);
  for (Eigen::Index j = 0; j < d; ++j)
    theta(j) = std::max((mean(j) - c * model.theta0[static_cast<std::size_t>(j)]) / (1.0 - c), 1e-8);
  theta /= theta.sum();

  Eigen::VectorXd logratio(d);
  for (Eigen::Index j = 0; j < d; ++j) logratio(j) = std::log(theta(j) / model.theta0[static_cast<std::size_t>(j)]);
  Statistic::Params params;
  for (Eigen::Index j = 0; j < d; ++j) params.emplace_back("theta" + std::to_string(j), theta(j));
  return Statistic("multinomial-deconv", [logratio](std::span<const double> x) { return as_vector(x).dot(logratio); },
                   std::move(params));
}

inline Statistic fit_multinomial_deconv(const MaskView& view, const Multinomial& model,
                                        std::optional<double> c = std::nullopt) {
  const double mix = c.value_or(static_cast<double>(view.n_tilde()) / static_cast<double>(view.size()));
  return fit_multinomial_deconv(view.z(), model, mix);
}

// ---------------------------------------------------------------------------
// Two-group Gaussian mixture MLE: (1 - lambda) N(0, I) + lambda N(0, I + Psi), rank(Psi) <= k
// ---------------------------------------------------------------------------

struct TwoGroupOptions {
  int em_iters = 200;
  double tol = 1e-6;        // absolute log-likelihood change
  double eigen_cap = 50.0;  // upper bound on the eigenvalues of Psi
  int restarts = 8;         // extra starts seeded from extreme observations
  int screen_iters = 15;    // EM steps given to every start before keeping the best
};

struct TwoGroupFit {
  double lambda = 0.1;
  Eigen::MatrixXd psi;  // d x d
  double loglik = 0.0;
  int iterations = 0;
  std::vector<double> loglik_path;

  QuadraticForm form() const { return shrinkage_form(psi); }
  /// x'(I - (Psi + I)^{-1})x
  Statistic statistic(int k) const {
    auto q = form();
    return Statistic("mle" + std::to_string(k), [q](std::span<const double> x) { return q(x); },
                     {{"k", static_cast<double>(k)}, {"lambda", lambda}});
  }
};


namespace detail {

struct MixtureState {
  double lambda = 0.1;
  Eigen::MatrixXd basis;   // d x k, orthonormal
  Eigen::VectorXd spikes;  // k eigenvalues of Psi, in [0, cap]
};

// Per-point log N(0, I + Psi)(x) - log N(0, I)(x) from the projections of every row.
inline Eigen::VectorXd log_ratio(const Data& z, const MixtureState& s) {
  const Eigen::ArrayXd w = s.spikes.array() / (1.0 + s.spikes.array());
  const double offset = -0.5 * s.spikes.array().log1p().sum();
  const Eigen::MatrixXd proj = z * s.basis;
  return (offset + 0.5 * (proj.array().square().rowwise() * w.transpose()).rowwise().sum()).matrix();
}

inline double log_null_density_sum(const Data& z) {
  constexpr double kLog2Pi = 1.8378770664093453;
  return -0.5 * z.squaredNorm() - 0.5 * static_cast<double>(z.rows() * z.cols()) * kLog2Pi;
}

struct EStep {
  Eigen::VectorXd resp;
  double loglik = 0.0;
};

inline EStep e_step(const Data& z, const MixtureState& s, double null_part) {
  const Eigen::VectorXd llr = log_ratio(z, s);
  const double log_alt = std::log(s.lambda);
  const double log_null = std::log1p(-s.lambda);
  EStep out{Eigen::VectorXd(z.rows()), null_part};
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double a = log_alt + llr(i);
    const double hi = std::max(a, log_null);
    const double lse = hi + std::log1p(std::exp(std::min(a, log_null) - hi));
    out.resp(i) = std::exp(a - lse);
    out.loglik += lse;
  }
  require(std::isfinite(out.loglik), "fit_twogroup_mle: non-finite log-likelihood");
  return out;
}

// Exact maximizer of the expected complete-data log-likelihood over rank <= k, spikes <= cap.
inline MixtureState m_step(const Data& z, const Eigen::VectorXd& resp, int k, double cap) {
  MixtureState s;
  const double total = resp.sum();
  s.lambda = std::clamp(total / static_cast<double>(z.rows()), 1e-6, 1.0 - 1e-6);
  const int d = static_cast<int>(z.cols());
  if (!(total > 1e-300)) {
    s.basis = Eigen::MatrixXd::Identity(d, k);
    s.spikes = Eigen::VectorXd::Zero(k);
    return s;
  }
  const Data weighted = resp.cwiseSqrt().asDiagonal() * z;
  const EigenPairs top = top_eigenpairs(second_moment(weighted) * (static_cast<double>(z.rows()) / total), k);
  s.basis = top.vectors;
  s.spikes = (top.values.array() - 1.0).max(0.0).min(cap).matrix();
  return s;
}

struct Chain {
  MixtureState state;
  double loglik = 0.0;
  std::vector<double> path;
  int iterations = 0;
  bool converged = false;
};

inline void advance(const Data& z, Chain& chain, int k, double cap, double null_part, int steps, double tol) {
  for (int it = 0; it < steps && !chain.converged; ++it) {
    const EStep e = e_step(z, chain.state, null_part);
    chain.state = m_step(z, e.resp, k, cap);
    const double ll = e_step(z, chain.state, null_part).loglik;
    ++chain.iterations;
    chain.path.push_back(ll);
    if (std::abs(ll - chain.loglik) < tol) chain.converged = true;
    chain.loglik = ll;
  }
}

}  // namespace detail

/// EM for the two-group mixture. The primary start is lambda = 0.1 with Psi from the clipped
/// method-of-moments solution; `restarts` further starts are seeded from the largest-norm points
/// (a hard assignment of the points aligned with each seed direction). Every start gets
/// `screen_iters` EM steps, then the best one runs to convergence.
inline TwoGroupFit fit_twogroup_mle(const Data& z, int k, const TwoGroupOptions& opt = {}) {
  const int d = static_cast<int>(z.cols());
  require(k >= 1 && k <= d, "fit_twogroup_mle: k must be in [1, d]");
  require(z.rows() >= d + 1, "fit_twogroup_mle: need at least d + 1 observations");
  require(opt.eigen_cap > 0.0, "fit_twogroup_mle: eigen_cap must be > 0");
  require(opt.em_iters >= 0 && opt.restarts >= 0, "fit_twogroup_mle: iteration counts must be >= 0");
  require(z.allFinite(), "fit_twogroup_mle: non-finite observation");

  const double null_part = detail::log_null_density_sum(z);
  std::vector<detail::Chain> chains;

  {
    detail::MixtureState init;
    init.lambda = 0.1;
    const EigenPairs top = top_eigenpairs(second_moment(z), k);
    init.basis = top.vectors;
    init.spikes = ((top.values.array() - 1.0) / init.lambda).max(0.0).min(opt.eigen_cap).matrix();
    detail::Chain c{init, detail::e_step(z, init, null_part).loglik, {}, 0, false};
    c.path.push_back(c.loglik);
    chains.push_back(std::move(c));
  }

  if (opt.em_iters > 0 && opt.restarts > 0) {
    const Eigen::VectorXd norms = z.rowwise().squaredNorm();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(z.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(opt.restarts), order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(),
                      [&](Eigen::Index a, Eigen::Index b) { return norms(a) > norms(b) || (norms(a) == norms(b) && a < b); });
    constexpr double kAligned = 6.63;  // upper 1% point of chi-square(1)
    for (std::size_t s = 0; s < count; ++s) {
      const Eigen::VectorXd dir = z.row(order[s]).transpose() / std::sqrt(norms(order[s]));
      const Eigen::VectorXd resp = ((z * dir).array().square() >= kAligned).cast<double>().matrix();
      const detail::MixtureState init = detail::m_step(z, resp, k, opt.eigen_cap);
      detail::Chain c{init, detail::e_step(z, init, null_part).loglik, {}, 0, false};
      c.path.push_back(c.loglik);
      chains.push_back(std::move(c));
    }
  }

  const int screen = std::min(opt.screen_iters, opt.em_iters);
  if (chains.size() > 1)
    for (auto& c : chains) detail::advance(z, c, k, opt.eigen_cap, null_part, screen, opt.tol);
  auto best = std::max_element(chains.begin(), chains.end(),
                               [](const detail::Chain& a, const detail::Chain& b) { return a.loglik < b.loglik; });
  detail::Chain& chain = *best;
  detail::advance(z, chain, k, opt.eigen_cap, null_part, opt.em_iters - chain.iterations, opt.tol);

  TwoGroupFit fit;
  fit.lambda = chain.state.lambda;
  fit.psi = chain.state.basis * chain.state.spikes.asDiagonal() * chain.state.basis.transpose();
  fit.psi = (0.5 * (fit.psi + fit.psi.transpose())).eval();
  fit.loglik = chain.loglik;
  fit.iterations = chain.iterations;
  fit.loglik_path = std::move(chain.path);
  return fit;
}

inline TwoGroupFit fit_twogroup_mle(const MaskView& view, int k, const TwoGroupOptions& opt = {}) {
  return fit_twogroup_mle(view.z(), k, opt);
}

// ---------------------------------------------------------------------------
// Empirical p-values
// ---------------------------------------------------------------------------

/// Sorted null scores of one statistic; p(t) = (1 + #{null >= t}) / (m + 1).
class EmpiricalNull {
 public:
  EmpiricalNull(const Statistic& stat, const Data& null_samples) : sorted_(stat.scores(null_samples)) {
    require(!sorted_.empty(), "empirical_pvalue: empty null sample");
    std::sort(sorted_.begin(), sorted_.end());
  }

  double pvalue(double t) const {
    const auto at_least = static_cast<double>(sorted_.end() - std::lower_bound(sorted_.begin(), sorted_.end(), t));
    return (1.0 + at_least) / (static_cast<double>(sorted_.size()) + 1.0);
  }

  std::size_t size() const { return sorted_.size(); }

 private:
  std::vector<double> sorted_;
};

inline double empirical_pvalue(const Statistic& stat, std::span<const double> x, const Data& null_samples) {
  require(null_samples.rows() >= 1, "empirical_pvalue: empty null sample");
  const double t = stat(x);
  std::size_t at_least = 0;
  for (std::size_t j = 0; j < static_cast<std::size_t>(null_samples.rows()); ++j)
    if (stat(row(null_samples, j)) >= t) ++at_least;
  return (1.0 + static_cast<double>(at_least)) / (static_cast<double>(null_samples.rows()) + 1.0);
}

/// p-values of every row of `x`: exact null tail when the statistic carries one, otherwise
/// empirical against `null_samples`.
inline std::vector<double> pvalues(const Statistic& stat, const Data& x, const Data* null_samples) {
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  if (stat.null_tail()) {
    const auto& tail = *stat.null_tail();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = tail(stat(row(x, i)));
    return out;
  }
  require(null_samples != nullptr, "pvalues: statistic has no closed-form null; a null sample is required");
  const EmpiricalNull ref(stat, *null_samples);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ref.pvalue(stat(row(x, i)));
  return out;
}

// ---------------------------------------------------------------------------
// Learners
// ---------------------------------------------------------------------------

class AgnosticLearner final : public Learner {
 public:
  explicit AgnosticLearner(NullModel model) : model_(std::move(model)) {}
  std::string name() const override { return "agnostic"; }
  Statistic fit(const MaskView&) const override { return fit_agnostic(model_); }

 private:
  NullModel model_;
};

/// A statistic fixed in advance (e.g. the oracle); ignores the data.
class FixedLearner final : public Learner {
 public:
  FixedLearner(Statistic stat, std::string name) : stat_(std::move(stat)), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  Statistic fit(const MaskView&) const override { return stat_; }

 private:
  Statistic stat_;
  std::string name_;
};

class LowRankLearner final : public Learner {
 public:
  explicit LowRankLearner(int k, LowRankMethod method = LowRankMethod::Eigen) : k_(k), method_(method) {}
  std::string name() const override {
    return "pca" + std::to_string(k_) + (method_ == LowRankMethod::EM ? "-em" : "");
  }
  Statistic fit(const MaskView& view) const override { return fit_lowrank_gaussian(view, k_, method_); }

 private:
  int k_;
  LowRankMethod method_;
};

class TwoGroupLearner final : public Learner {
 public:
  explicit TwoGroupLearner(int k, TwoGroupOptions options = {}) : k_(k), options_(options) {}
  std::string name() const override { return "mle" + std::to_string(k_); }
  Statistic fit(const MaskView& view) const override { return fit_twogroup_mle(view, k_, options_).statistic(k_); }

 private:
  int k_;
  TwoGroupOptions options_;
};

class MultinomialLearner final : public Learner {
 public:
  explicit MultinomialLearner(Multinomial model, std::optional<double> c = std::nullopt)
      : model_(std::move(model)), c_(c) {}
  std::string name() const override { return "multinomial-deconv"; }
  Statistic fit(const MaskView& view) const override { return fit_multinomial_deconv(view, model_, c_); }

 private:
  Multinomial model_;
  std::optional<double> c_;
};

/// Deliberately overfits: scores by the full-rank excess second moment x'(S - I)x of the pooled
/// view, and on refit adds x'(S_real - S_synthetic)x built from every label revealed so far.
class OverfitLearner final : public Learner {
 public:
  std::string name() const override { return "overfit"; }

  Statistic fit(const MaskView& view) const override {
    const Eigen::MatrixXd excess = second_moment(view.z()) - Eigen::MatrixXd::Identity(view.dim(), view.dim());
    return quadratic(excess);
  }

  Statistic refit(const MaskView& view, const Statistic&) const override {
    const int d = view.dim();
    Eigen::MatrixXd real = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd syn = Eigen::MatrixXd::Zero(d, d);
    std::size_t n_real = 0;
    std::size_t n_syn = 0;
    for (const Revealed& r : view.revealed()) {
      const Eigen::VectorXd x = view.z().row(static_cast<Eigen::Index>(r.index)).transpose();
      if (r.is_real) {
        real.noalias() += x * x.transpose();
        ++n_real;
      } else {
        syn.noalias() += x * x.transpose();
        ++n_syn;
      }
    }
    Eigen::MatrixXd excess = second_moment(view.z()) - Eigen::MatrixXd::Identity(d, d);
    if (n_real > 0 && n_syn > 0) excess += real / static_cast<double>(n_real) - syn / static_cast<double>(n_syn);
    return quadratic(excess);
  }

 private:
  static Statistic quadratic(Eigen::MatrixXd a) {
    a = (0.5 * (a + a.transpose())).eval();
    return Statistic("overfit", [a](std::span<const double> x) {
      const auto v = as_vector(x);
      return v.dot(a * v);
    });
  }
};

/// g o (base learner) for a strictly increasing g.
class MonotoneLearner final : public Learner {
 public:
  MonotoneLearner(LearnerPtr base, std::function<double(double)> g, std::string label)
      : base_(std::move(base)), g_(std::move(g)), label_(std::move(label)) {}
  std::string name() const override { return base_->name() + "|" + label_; }
  Statistic fit(const MaskView& view) const override { return transformed(base_->fit(view), g_, label_); }
  Statistic refit(const MaskView& view, const Statistic& current) const override {
    (void)current;
    return transformed(base_->refit(view, base_->fit(view)), g_, label_);
  }

 private:
  LearnerPtr base_;
  std::function<double(double)> g_;
  std::string label_;
};

}  // namespace bonus
