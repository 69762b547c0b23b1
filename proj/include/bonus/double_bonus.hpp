#pragma once

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "bonus/engine.hpp"

namespace bonus {

struct CandidateScore {
  std::string learner;
  std::size_t rejections = 0;
  bool selected = false;
};

struct DoubleOptions {
  std::size_t n_tilde_plus = 0;  // second-layer nulls; 0 = 2 (n + n_tilde)
  bool ensemble = false;
  double ensemble_factor = 0.8;        // candidates within this fraction of the best score join the ensemble
  std::size_t reference_size = 20000;  // null draws behind the ensemble's empirical p-values
};

struct DoubleBonusResult {
  RunResult run;
  std::vector<CandidateScore> screening;
  std::string selected;
  bool ensemble_adopted = false;
  std::size_t ensemble_rejections = 0;
};

/// S(x) = -min_i p_i(x), p_i the empirical p-value of statistic i against `null_samples`.
inline Statistic ensemble_min_p(const std::vector<Statistic>& stats, const Data& null_samples) {
  require(stats.size() >= 2, "ensemble_min_p: at least two statistics are required");
  auto refs = std::make_shared<std::vector<EmpiricalNull>>();
  refs->reserve(stats.size());
  std::string name = "minp(";
  for (std::size_t i = 0; i < stats.size(); ++i) {
    refs->emplace_back(stats[i], null_samples);
    name += (i ? "," : "") + stats[i].name();
  }
  name += ")";
  return Statistic(name, [stats, refs](std::span<const double> x) {
    double best = 1.0;
    for (std::size_t i = 0; i < stats.size(); ++i) best = std::min(best, (*refs)[i].pvalue(stats[i](x)));
    return -best;
  });
}

/// Fits every member on the view and combines them by minimum empirical p-value.
class EnsembleLearner final : public Learner {
 public:
  EnsembleLearner(std::vector<LearnerPtr> members, std::shared_ptr<const Data> null_samples)
      : members_(std::move(members)), null_(std::move(null_samples)) {}

  std::string name() const override {
    std::string s = "ensemble(";
    for (std::size_t i = 0; i < members_.size(); ++i) s += (i ? "," : "") + members_[i]->name();
    return s + ")";
  }

  Statistic fit(const MaskView& view) const override {
    std::vector<Statistic> stats;
    for (const auto& m : members_) stats.push_back(m->fit(view));
    return ensemble_min_p(stats, *null_);
  }

 private:
  std::vector<LearnerPtr> members_;
  std::shared_ptr<const Data> null_;
};

namespace detail {

inline std::size_t screen_one(const PooledSet& screening_pool, const Learner& learner, const BonusConfig& config) {
  PooledSet copy = screening_pool;
  return run_on_pool(copy, learner, config).rejected.size();
}

}  // namespace detail

/// Screening pool: Z (the pooled data, labels never consulted) as "real" against `synthetic`.
inline PooledSet make_screening_pool(const Data& z, const Data& synthetic, Rng& rng) {
  return pool_and_mask(z, synthetic, rng);
}

/// Rejections each learner obtains when the base procedure treats Z as real and n_tilde_plus fresh nulls
/// as synthetic. The most rejections wins; ties go to the earlier learner.
inline std::vector<CandidateScore> screen_candidates(const Data& z, const std::vector<LearnerPtr>& learners,
                                                     const NullModel& model, const BonusConfig& config,
                                                     std::size_t n_tilde_plus, Rng& rng) {
  require(!learners.empty(), "screen_candidates: empty learner menu");
  require(n_tilde_plus >= 1, "screen_candidates: n_tilde_plus must be >= 1");
  const PooledSet screening = make_screening_pool(z, sample_null(model, n_tilde_plus, rng), rng);
  std::vector<CandidateScore> out;
  for (const auto& l : learners) out.push_back({l->name(), detail::screen_one(screening, *l, config), false});
  auto best = std::max_element(out.begin(), out.end(),
                               [](const CandidateScore& a, const CandidateScore& b) { return a.rejections < b.rejections; });
  best->selected = true;
  return out;
}

inline DoubleBonusResult run_double_bonus_with_synthetic(const Data& x, const Data& synthetic,
                                                         const std::vector<LearnerPtr>& learners,
                                                         const NullModel& model, const BonusConfig& config,
                                                         const DoubleOptions& opt, Rng& rng) {
  config.validate();
  require(!learners.empty(), "run_double_bonus: empty learner menu");
  require(x.rows() >= 1, "run_double_bonus: no real observations");
  require(opt.ensemble_factor > 0.0 && opt.ensemble_factor <= 1.0, "run_double_bonus: ensemble_factor must be in (0, 1]");
  PooledSet pool = pool_and_mask(x, synthetic, rng);
  const std::size_t n_plus = pool.size();
  const std::size_t n_tilde_plus = opt.n_tilde_plus > 0 ? opt.n_tilde_plus : 2 * n_plus;

  // Screening sees the pooled vectors only; the hidden labels stay inside `pool`.
  const PooledSet screening = make_screening_pool(pool.z(), sample_null(model, n_tilde_plus, rng), rng);
  DoubleBonusResult out;
  std::size_t best = 0;
  for (std::size_t i = 0; i < learners.size(); ++i) {
    out.screening.push_back({learners[i]->name(), detail::screen_one(screening, *learners[i], config), false});
    if (out.screening[i].rejections > out.screening[best].rejections) best = i;
  }
  out.screening[best].selected = true;
  LearnerPtr winner = learners[best];

  if (opt.ensemble && learners.size() >= 2) {
    const double bar = opt.ensemble_factor * static_cast<double>(out.screening[best].rejections);
    std::vector<LearnerPtr> members;
    for (std::size_t i = 0; i < learners.size(); ++i)
      if (static_cast<double>(out.screening[i].rejections) >= bar) members.push_back(learners[i]);
    if (members.size() >= 2) {
      auto reference = std::make_shared<const Data>(sample_null(model, opt.reference_size, rng));
      auto ens = std::make_shared<const EnsembleLearner>(members, reference);
      out.ensemble_rejections = detail::screen_one(screening, *ens, config);
      if (out.ensemble_rejections > out.screening[best].rejections) {
        out.ensemble_adopted = true;
        out.screening[best].selected = false;
        for (auto& c : out.screening)
          for (const auto& m : members)
            if (c.learner == m->name()) c.selected = true;
        winner = ens;
      }
    }
  }

  out.selected = winner->name();
  out.run = run_on_pool(pool, *winner, config);
  return out;
}

/// Double BONuS: screen the learner menu on a second layer of nulls, then run the base procedure on
/// the original pool with the winner.
inline DoubleBonusResult run_double_bonus(const Data& x, const std::vector<LearnerPtr>& learners,
                                          const NullModel& model, const BonusConfig& config,
                                          const DoubleOptions& opt, Rng& rng) {
  config.validate();
  require(config.n_tilde >= 1, "run_double_bonus: n_tilde must be >= 1");
  require(x.rows() >= 1, "run_double_bonus: no real observations");
  require(x.cols() == dimension(model), "run_double_bonus: dimension mismatch");
  const Data synthetic = sample_null(model, config.n_tilde, rng);
  return run_double_bonus_with_synthetic(x, synthetic, learners, model, config, opt, rng);
}

}  // namespace bonus
