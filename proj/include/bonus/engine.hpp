#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "bonus/core.hpp"
#include "bonus/dists.hpp"
#include "bonus/estimators.hpp"
#include "bonus/learners.hpp"
#include "bonus/pool.hpp"

namespace bonus {

struct BonusConfig {
  double alpha = 0.1;
  FdpKind kind = BhKind{};
  std::size_t n_tilde = 0;  // synthetic draws for run_bonus
  std::size_t batch = 0;    // points peeled per step; 0 = max(1, n_plus / 500)
  std::size_t refit_every = 0;
  std::uint64_t seed = 0;

  void validate() const {
    require(alpha > 0.0 && alpha < 1.0, "alpha must be in (0, 1)");
    if (const auto* st = std::get_if<StoreyKind>(&kind))
      require(st->q > 0.0 && st->q < 1.0, "storey correction quantile q must be in (0, 1)");
  }

  std::size_t batch_for(std::size_t n_plus) const {
    return batch > 0 ? batch : std::max<std::size_t>(1, n_plus / 500);
  }
};

struct RunResult {
  std::vector<std::size_t> rejected;  // rows of the real input, ascending
  std::size_t t_hat = 0;              // number of FDP evaluations, the last one stopped the run
  std::vector<FdpEstimate> fdp_path;
  std::vector<RegionCounts> counts_path;
  std::string statistic;
  Statistic::Params statistic_params;
  std::vector<std::size_t> region;      // pooled indices still masked at the stop, ascending
  std::vector<std::size_t> peel_order;  // pooled indices in the order they were unmasked
};

namespace detail {

inline void sort_by_score(std::vector<std::size_t>& idx, const std::vector<double>& score) {
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return score[a] < score[b] || (score[a] == score[b] && a < b);
  });
}

}  // namespace detail

/// Shrink the rejection region over an existing pool until the FDP estimate reaches alpha.
/// The region is always the set of still-masked points; each step unmasks the `batch`
/// masked points with the smallest current score (ties by pooled index).
inline RunResult run_on_pool(PooledSet& pool, const Learner& learner, const BonusConfig& config) {
  config.validate();
  const std::size_t total = pool.size();
  const std::size_t batch = config.batch_for(total);

  Statistic stat = learner.fit(pool.view());
  std::vector<double> score = stat.scores(pool.z());
  std::vector<std::size_t> order;
  order.reserve(total);
  for (std::size_t j = 0; j < total; ++j)
    if (pool.is_masked(j)) order.push_back(j);
  detail::sort_by_score(order, score);

  RunResult out;
  std::size_t next = 0;  // order[next..] is the current region
  RegionCounts correction;
  if (const auto* st = std::get_if<StoreyKind>(&config.kind)) {
    const auto m = static_cast<std::size_t>(std::floor(st->q * static_cast<double>(order.size())));
    std::span<const std::size_t> a(order.data(), m);
    for (const Revealed& r : pool.reveal(a)) (r.is_real ? correction.real : correction.synthetic)++;
    out.peel_order.insert(out.peel_order.end(), a.begin(), a.end());
    next = m;
  }

  std::size_t steps_since_refit = 0;
  for (;;) {
    const RegionCounts counts = pool.masked_counts();
    const FdpEstimate est = estimate_fdp(config.kind, pool.n(), pool.n_tilde(), counts, correction);
    out.fdp_path.push_back(est);
    out.counts_path.push_back(counts);
    if (should_stop(est.value, config.alpha, counts.real)) break;

    const std::size_t take = std::min(batch, order.size() - next);
    std::span<const std::size_t> peel(order.data() + next, take);
    pool.reveal(peel);
    out.peel_order.insert(out.peel_order.end(), peel.begin(), peel.end());
    next += take;

    if (config.refit_every > 0 && ++steps_since_refit == config.refit_every && next < order.size()) {
      steps_since_refit = 0;
      stat = learner.refit(pool.view(), stat);
      for (std::size_t i = next; i < order.size(); ++i) score[order[i]] = stat(row(pool.z(), order[i]));
      std::vector<std::size_t> rest(order.begin() + static_cast<std::ptrdiff_t>(next), order.end());
      detail::sort_by_score(rest, score);
      std::copy(rest.begin(), rest.end(), order.begin() + static_cast<std::ptrdiff_t>(next));
    }
  }

  out.t_hat = out.fdp_path.size();
  out.region.assign(order.begin() + static_cast<std::ptrdiff_t>(next), order.end());
  std::sort(out.region.begin(), out.region.end());
  out.rejected = pool.real_rows(out.region);
  out.statistic = stat.name();
  out.statistic_params = stat.params();
  return out;
}

/// BONuS with caller-supplied synthetic nulls.
inline RunResult run_bonus_with_synthetic(const Data& x, const Data& synthetic, const Learner& learner,
                                          const BonusConfig& config, Rng& rng) {
  config.validate();
  require(x.rows() >= 1, "run_bonus: no real observations");
  PooledSet pool = pool_and_mask(x, synthetic, rng);
  return run_on_pool(pool, learner, config);
}

/// Draws config.n_tilde synthetic nulls from `model`, pools, masks and runs.
inline RunResult run_bonus(const Data& x, const Learner& learner, const NullModel& model, const BonusConfig& config,
                           Rng& rng) {
  config.validate();
  require(x.rows() >= 1, "run_bonus: no real observations");
  require(config.n_tilde >= 1, "run_bonus: n_tilde must be >= 1");
  require(x.cols() == dimension(model), "run_bonus: dimension mismatch");
  const Data synthetic = sample_null(model, config.n_tilde, rng);
  return run_bonus_with_synthetic(x, synthetic, learner, config, rng);
}

// ---------------------------------------------------------------------------
// p-value baselines
// ---------------------------------------------------------------------------

/// Step-up rule: reject the k* smallest p-values, k* = max{k : p_(k) <= k alpha / n}.
inline std::vector<std::size_t> run_bh(std::span<const double> p, double alpha) {
  const std::size_t n = p.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::size_t k_star = 0;
  for (std::size_t k = n; k >= 1; --k) {
    if (p[idx[k - 1]] <= static_cast<double>(k) * alpha / static_cast<double>(n)) {
      k_star = k;
      break;
    }
  }
  std::vector<std::size_t> out(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k_star));
  std::sort(out.begin(), out.end());
  return out;
}

/// BH at level alpha / pi0 with pi0 = (1 + #{p > lambda}) / (n (1 - lambda)).
inline std::vector<std::size_t> run_storey_bh(std::span<const double> p, double alpha, double lambda = 0.5) {
  require(lambda > 0.0 && lambda < 1.0, "run_storey_bh: lambda must be in (0, 1)");
  if (p.empty()) return {};
  const auto above = static_cast<double>(std::count_if(p.begin(), p.end(), [&](double v) { return v > lambda; }));
  const double pi0 = (1.0 + above) / (static_cast<double>(p.size()) * (1.0 - lambda));
  return run_bh(p, alpha / pi0);
}

/// Synthetic sample size: n / alpha when alternatives are sparse, n otherwise.
inline std::size_t choose_ntilde(std::size_t n, double alpha, bool sparse) {
  require(n >= 1, "choose_ntilde: n must be >= 1");
  require(alpha > 0.0 && alpha < 1.0, "choose_ntilde: alpha must be in (0, 1)");
  return sparse ? static_cast<std::size_t>(std::llround(static_cast<double>(n) / alpha)) : n;
}

}  // namespace bonus
