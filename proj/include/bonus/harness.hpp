#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bonus/double_bonus.hpp"
#include "bonus/engine.hpp"

namespace bonus {

// ---------------------------------------------------------------------------
// Experiment description
// ---------------------------------------------------------------------------

/// Everything a procedure may use in one replication. `truth` stays in the harness.
struct Trial {
  const Scenario* scenario = nullptr;
  const Data* synthetic = nullptr;  // shared synthetic nulls for this alpha
  std::uint64_t seed = 0;           // procedure stream; identical across alphas
};

struct Outcome {
  std::vector<std::size_t> rejected;
  std::string detail;
};

using Runner = std::function<Outcome(const Trial&, double alpha)>;

/// `make` is called once per replication so runners can memoize work across the alpha grid.
struct Procedure {
  std::string name;
  std::function<Runner()> make;
};

struct Setting {
  std::string label;  // appended to procedure names when an experiment has several settings
  std::function<Scenario(Rng&)> build;
  std::function<std::size_t(std::size_t n, double alpha)> n_tilde;
};

struct ExperimentSpec {
  std::string name;
  std::vector<Setting> settings;
  std::vector<Procedure> procedures;
  std::vector<double> alphas;
  std::size_t replications = 1;
  std::uint64_t base_seed = 0;

  void validate() const {
    require(replications >= 1, "replications must be >= 1");
    require(!settings.empty(), "experiment needs at least one setting");
    require(!procedures.empty(), "experiment needs at least one procedure");
    require(!alphas.empty(), "alpha grid is empty");
    for (double a : alphas) require(a > 0.0 && a < 1.0, "alpha must be in (0, 1)");
  }
};

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct MetricsRow {
  std::string procedure;
  double alpha = 0.0;
  std::size_t replication = 0;
  double fdp = 0.0;
  double power = 0.0;
  std::size_t rejections = 0;
  double runtime_ms = 0.0;
  std::string detail;
  std::string error;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

struct Aggregate {
  std::string procedure;
  double alpha = 0.0;
  std::size_t count = 0;
  double fdp_mean = 0.0;
  double fdp_se = 0.0;
  double power_mean = 0.0;
  double power_se = 0.0;
  double rejections_mean = 0.0;
};

struct MetricsTable {
  std::vector<MetricsRow> rows;

  /// Mean and standard error per (procedure, alpha), in first-appearance order; failed rows are skipped.
  std::vector<Aggregate> aggregates() const {
    std::vector<Aggregate> out;
    std::map<std::pair<std::string, double>, std::vector<const MetricsRow*>> groups;
    for (const auto& r : rows) {
      if (!r.error.empty()) continue;
      auto key = std::make_pair(r.procedure, r.alpha);
      if (!groups.contains(key)) out.push_back({r.procedure, r.alpha});
      groups[key].push_back(&r);
    }
    for (auto& a : out) {
      const auto& g = groups[{a.procedure, a.alpha}];
      a.count = g.size();
      const auto stats = [&](auto field) {
        double mean = 0.0;
        for (const auto* r : g) mean += field(*r);
        mean /= static_cast<double>(g.size());
        double ss = 0.0;
        for (const auto* r : g) ss += (field(*r) - mean) * (field(*r) - mean);
        const double se = g.size() > 1 ? std::sqrt(ss / static_cast<double>(g.size() - 1) / static_cast<double>(g.size())) : 0.0;
        return std::make_pair(mean, se);
      };
      std::tie(a.fdp_mean, a.fdp_se) = stats([](const MetricsRow& r) { return r.fdp; });
      std::tie(a.power_mean, a.power_se) = stats([](const MetricsRow& r) { return r.power; });
      a.rejections_mean = stats([](const MetricsRow& r) { return static_cast<double>(r.rejections); }).first;
    }
    return out;
  }

  std::optional<Aggregate> aggregate(const std::string& procedure, double alpha) const {
    for (const auto& a : aggregates())
      if (a.procedure == procedure && a.alpha == alpha) return a;
    return std::nullopt;
  }
};

/// FDP = |R ∩ nulls| / max(1, |R|), power = |R ∩ alternatives| / max(1, n1).
inline std::pair<double, double> fdp_and_power(const std::vector<std::size_t>& rejected, const std::vector<bool>& truth) {
  std::size_t hits = 0;
  for (std::size_t i : rejected) hits += truth.at(i) ? 1 : 0;
  const auto n1 = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), true));
  const double fdp = rejected.empty() ? 0.0 : static_cast<double>(rejected.size() - hits) / static_cast<double>(rejected.size());
  const double power = n1 == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n1);
  return {fdp, power};
}

// ---------------------------------------------------------------------------
// Replication driver
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr std::uint64_t kScenarioStream = 0;
inline constexpr std::uint64_t kSyntheticStream = 1;
inline constexpr std::uint64_t kProcedureStream = 2;

inline std::uint64_t stream_tag(std::size_t setting, std::uint64_t stream) {
  return (static_cast<std::uint64_t>(setting) << 32) | stream;
}

inline std::vector<MetricsRow> run_replication(const ExperimentSpec& spec, std::size_t r, bool timing) {
  std::vector<MetricsRow> rows;
  for (std::size_t s = 0; s < spec.settings.size(); ++s) {
    const Setting& setting = spec.settings[s];
    Rng scen_rng = make_rng(derive_seed(spec.base_seed, r, stream_tag(s, kScenarioStream)));
    const Scenario scenario = setting.build(scen_rng);

    // One nested synthetic stream per replication: every procedure and alpha uses a prefix of it.
    std::vector<std::size_t> n_tilde;
    for (double a : spec.alphas) n_tilde.push_back(setting.n_tilde ? setting.n_tilde(scenario.n(), a) : scenario.n());
    Rng syn_rng = make_rng(derive_seed(spec.base_seed, r, stream_tag(s, kSyntheticStream)));
    const Data synthetic_all = sample_null(scenario.null_model, *std::max_element(n_tilde.begin(), n_tilde.end()), syn_rng);

    const std::string suffix = spec.settings.size() > 1 ? "[" + setting.label + "]" : "";
    for (std::size_t p = 0; p < spec.procedures.size(); ++p) {
      const Runner runner = spec.procedures[p].make();
      for (std::size_t a = 0; a < spec.alphas.size(); ++a) {
        const Data synthetic = synthetic_all.topRows(static_cast<Eigen::Index>(n_tilde[a]));
        Trial trial{&scenario, &synthetic, derive_seed(spec.base_seed, r, stream_tag(s, kProcedureStream + p))};
        MetricsRow row;
        row.procedure = spec.procedures[p].name + suffix;
        row.alpha = spec.alphas[a];
        row.replication = r;
        const auto start = std::chrono::steady_clock::now();
        try {
          Outcome o = runner(trial, spec.alphas[a]);
          std::tie(row.fdp, row.power) = fdp_and_power(o.rejected, scenario.truth);
          row.rejections = o.rejected.size();
          row.detail = std::move(o.detail);
        } catch (const std::exception& e) {
          row.error = e.what();
        }
        if (timing)
          row.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

}  // namespace detail

/// Runs every replication (in parallel over `threads`) and merges rows in replication order.
/// Runtimes are recorded only when `timing` is set, so untimed tables are reproducible bit for bit.
inline MetricsTable replicate(const ExperimentSpec& spec, unsigned threads = 1, bool timing = false) {
  spec.validate();
  std::vector<std::vector<MetricsRow>> per_rep(spec.replications);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t r; (r = next.fetch_add(1)) < spec.replications;) per_rep[r] = detail::run_replication(spec, r, timing);
  };
  const unsigned count = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(spec.replications)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < count; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  MetricsTable table;
  for (auto& rows : per_rep)
    for (auto& row : rows) table.rows.push_back(std::move(row));
  return table;
}

// ---------------------------------------------------------------------------
// Procedure builders
// ---------------------------------------------------------------------------

/// Memoizes fits made before anything is unmasked, keyed by the pooled data itself.
class CachedLearner final : public Learner {
 public:
  explicit CachedLearner(LearnerPtr base) : base_(std::move(base)) {}
  std::string name() const override { return base_->name(); }

  Statistic fit(const MaskView& view) const override {
    if (!view.revealed().empty()) return base_->fit(view);
    const Key key{fingerprint(view.z()), view.n(), view.n_tilde()};
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    Statistic s = base_->fit(view);
    std::lock_guard lock(mu_);
    cache_.emplace(key, s);
    return s;
  }

  Statistic refit(const MaskView& view, const Statistic& current) const override { return base_->refit(view, current); }

 private:
  using Key = std::tuple<std::uint64_t, std::size_t, std::size_t>;

  static std::uint64_t fingerprint(const Data& z) {
    std::uint64_t h = mix64(static_cast<std::uint64_t>(z.rows()) * 0x100000001b3ULL + static_cast<std::uint64_t>(z.cols()));
    const auto* bytes = reinterpret_cast<const unsigned char*>(z.data());
    const std::size_t len = static_cast<std::size_t>(z.size()) * sizeof(double);
    for (std::size_t i = 0; i < len; ++i) h = (h ^ bytes[i]) * 0x100000001b3ULL;
    return h;
  }

  LearnerPtr base_;
  mutable std::mutex mu_;
  mutable std::map<Key, Statistic> cache_;
};

using StatisticFactory = std::function<Statistic(const Scenario&)>;
using LearnerFactory = std::function<LearnerPtr(const Scenario&)>;
using MenuFactory = std::function<std::vector<LearnerPtr>(const Scenario&)>;

inline Statistic agnostic_of(const Scenario& s) { return fit_agnostic(s.null_model); }
inline Statistic oracle_of(const Scenario& s) { return make_oracle_statistic(s.null_model, s.alt); }

/// BH (or Storey-BH) on p-values of a fixed statistic: exact null tail when known, otherwise
/// empirical against `reference_size` fresh null draws.
inline Procedure bh_procedure(std::string name, StatisticFactory stat, bool storey = false,
                              std::size_t reference_size = 20000) {
  auto make = [stat, storey, reference_size]() -> Runner {
    auto cache = std::make_shared<std::vector<double>>();
    return [stat, storey, reference_size, cache](const Trial& t, double alpha) {
      if (cache->empty()) {
        const Statistic s = stat(*t.scenario);
        Data reference;
        if (!s.null_tail()) {
          Rng rng = make_rng(t.seed);
          reference = sample_null(t.scenario->null_model, reference_size, rng);
        }
        *cache = pvalues(s, t.scenario->observations, &reference);
      }
      return Outcome{storey ? run_storey_bh(*cache, alpha) : run_bh(*cache, alpha), {}};
    };
  };
  return {std::move(name), make};
}

inline Procedure bonus_procedure(std::string name, LearnerFactory learner, FdpKind kind = BhKind{},
                                 std::size_t batch = 0, std::size_t refit_every = 0) {
  auto make = [learner, kind, batch, refit_every]() -> Runner {
    auto cached = std::make_shared<std::shared_ptr<const CachedLearner>>();
    return [=](const Trial& t, double alpha) {
      if (!*cached) *cached = std::make_shared<const CachedLearner>(learner(*t.scenario));
      BonusConfig cfg;
      cfg.alpha = alpha;
      cfg.kind = kind;
      cfg.n_tilde = static_cast<std::size_t>(t.synthetic->rows());
      cfg.batch = batch;
      cfg.refit_every = refit_every;
      Rng rng = make_rng(t.seed);
      RunResult r = run_bonus_with_synthetic(t.scenario->observations, *t.synthetic, **cached, cfg, rng);
      return Outcome{std::move(r.rejected), r.statistic};
    };
  };
  return {std::move(name), make};
}

inline Procedure double_procedure(std::string name, MenuFactory menu, FdpKind kind = BhKind{}, DoubleOptions opt = {},
                                  std::size_t batch = 0) {
  auto make = [menu, kind, opt, batch]() -> Runner {
    auto learners = std::make_shared<std::vector<LearnerPtr>>();
    return [=](const Trial& t, double alpha) {
      if (learners->empty())
        for (auto& l : menu(*t.scenario)) learners->push_back(std::make_shared<const CachedLearner>(l));
      BonusConfig cfg;
      cfg.alpha = alpha;
      cfg.kind = kind;
      cfg.n_tilde = static_cast<std::size_t>(t.synthetic->rows());
      cfg.batch = batch;
      Rng rng = make_rng(t.seed);
      DoubleBonusResult r = run_double_bonus_with_synthetic(t.scenario->observations, *t.synthetic, *learners,
                                                            t.scenario->null_model, cfg, opt, rng);
      return Outcome{std::move(r.run.rejected), r.selected};
    };
  };
  return {std::move(name), make};
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

inline std::size_t scaled(double base, double scale) {
  require(scale > 0.0 && std::isfinite(scale), "scale must be > 0");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(base * scale)));
}

inline Setting gaussian_setting(std::string label, int d, std::size_t n, std::size_t n1, int rank, double strength,
                                std::function<std::size_t(std::size_t, double)> n_tilde) {
  return {std::move(label),
          [=](Rng& rng) { return make_gaussian_lowrank_scenario(d, n, n1, rank, strength, rng); },
          std::move(n_tilde)};
}

inline LearnerPtr twogroup_learner(int k) { return std::make_shared<const TwoGroupLearner>(k); }

/// Rank-1 prior in d = 10 with n = 10000 scale hypotheses, 5% alternatives. GLRT and oracle
/// statistics with BH on exact p-values, against BH-BONuS with the rank-1 two-group MLE,
/// n_tilde = n / alpha and batch 1.
inline ExperimentSpec experiment_intro(double scale = 0.2) {
  const std::size_t n = scaled(10000, scale);
  const std::size_t n1 = scaled(500, scale);
  ExperimentSpec spec;
  spec.name = "intro";
  spec.settings.push_back(gaussian_setting("d=10", 10, n, n1, 1, 4.0, [](std::size_t m, double a) {
    return choose_ntilde(m, a, true);
  }));
  spec.procedures.push_back(bh_procedure("glrt-bh", agnostic_of));
  spec.procedures.push_back(bh_procedure("oracle-bh", oracle_of));
  // One point per step: discoveries number in the tens against n + n_tilde in the tens of thousands.
  spec.procedures.push_back(bonus_procedure("bonus-mle1", [](const Scenario&) { return twogroup_learner(1); }, BhKind{}, 1));
  spec.alphas = {0.05, 0.1, 0.2};
  spec.replications = 50;
  return spec;
}

inline std::vector<int> default_rank_sweep() { return {1, 3, 5, 7, 9, 12}; }

/// d = 50, rank-5 covariance excess, n = 5000 scale, 10% alternatives, n_tilde = n. Storey
/// correction everywhere: Storey-BH on exact p-values for the agnostic and oracle statistics,
/// Storey Double BONuS over the PCA rank sweep.
inline ExperimentSpec experiment_gaussian_lowrank(double scale = 0.4, double strength = 8.0,
                                                  std::vector<int> ranks = default_rank_sweep()) {
  const std::size_t n = scaled(5000, scale);
  const std::size_t n1 = scaled(500, scale);
  ExperimentSpec spec;
  spec.name = "gaussian";
  spec.settings.push_back(gaussian_setting("d=50", 50, n, n1, 5, strength, [](std::size_t m, double) { return m; }));
  spec.procedures.push_back(bh_procedure("agnostic-storey-bh", agnostic_of, true));
  spec.procedures.push_back(bh_procedure("oracle-storey-bh", oracle_of, true));
  spec.procedures.push_back(double_procedure(
      "double-bonus",
      [ranks](const Scenario&) {
        std::vector<LearnerPtr> menu;
        for (int k : ranks) menu.push_back(std::make_shared<const LowRankLearner>(k));
        return menu;
      },
      StoreyKind{}));
  spec.alphas = {0.01, 0.05, 0.1, 0.2};
  spec.replications = 20;
  return spec;
}

/// Multinomial counts with N = 2000 trials over d cells, n = 3000 scale, 10% alternatives,
/// perturbation `delta`, n_tilde = n. BH-BONuS with the deconvolution learner against BH on
/// empirical p-values of the chi-square and oracle likelihood-ratio statistics.
inline ExperimentSpec experiment_multinomial(double scale = 1.0, double delta = 0.1,
                                             std::vector<int> dims = {6, 12, 18, 24, 30}) {
  const std::size_t n = scaled(3000, scale);
  const std::size_t n1 = scaled(300, scale);
  ExperimentSpec spec;
  spec.name = "multinomial";
  for (int d : dims)
    spec.settings.push_back({"d=" + std::to_string(d),
                             [=](Rng& rng) { return make_multinomial_scenario(d, 2000, n, n1, delta, rng); },
                             [](std::size_t m, double) { return m; }});
  spec.procedures.push_back(bh_procedure("chisq-bh", agnostic_of));
  spec.procedures.push_back(bh_procedure("oracle-lr-bh", oracle_of));
  spec.procedures.push_back(bonus_procedure("bonus", [](const Scenario& s) -> LearnerPtr {
    return std::make_shared<const MultinomialLearner>(std::get<Multinomial>(s.null_model));
  }));
  spec.alphas = {0.1};
  spec.replications = 20;
  return spec;
}

/// Global null (no alternatives) in the intro geometry: BH- and Storey-BONuS with the rank-1
/// two-group MLE and n_tilde = n.
inline ExperimentSpec experiment_calibration(std::size_t n = 2000) {
  ExperimentSpec spec;
  spec.name = "calibrate";
  spec.settings.push_back(gaussian_setting("null", 10, n, 0, 1, 4.0, [](std::size_t m, double) { return m; }));
  auto learner = [](const Scenario&) { return twogroup_learner(1); };
  spec.procedures.push_back(bonus_procedure("bh-bonus", learner, BhKind{}));
  spec.procedures.push_back(bonus_procedure("storey-bonus", learner, StoreyKind{}));
  spec.alphas = {0.1};
  spec.replications = 500;
  return spec;
}

inline ExperimentSpec experiment_by_name(const std::string& name, double scale) {
  if (name == "intro") return experiment_intro(scale);
  if (name == "gaussian") return experiment_gaussian_lowrank(scale);
  if (name == "multinomial") return experiment_multinomial(scale);
  if (name == "calibrate") return experiment_calibration(scaled(2000, scale / 0.2));
  throw Error("unknown experiment '" + name + "' (expected intro, gaussian, multinomial or calibrate)");
}

// ---------------------------------------------------------------------------
// Hypergeometric sweep
// ---------------------------------------------------------------------------

struct LemmaCase {
  std::int64_t a = 0, b = 0, k = 0;
  double ratio = 0.0, ratio_bound = 0.0, product = 0.0;
};

struct LemmaReport {
  std::size_t cases = 0;
  std::vector<LemmaCase> violations;
  std::vector<LemmaCase> tight;  // E[V/(1+U)] equal to a/(1+b) within tolerance, a >= 1
  double max_ratio_excess = -kInfinity;    // max over cases of E1 - a/(1+b)
  double max_product_excess = -kInfinity;  // max over cases of E2 - 1
};

inline LemmaReport lemma_sweep(std::int64_t a_max, std::int64_t b_max, double tol = 1e-12) {
  require(a_max >= 0 && b_max >= 0, "lemma_sweep: bounds must be >= 0");
  LemmaReport rep;
  for (std::int64_t a = 0; a <= a_max; ++a)
    for (std::int64_t b = 0; b <= b_max; ++b)
      for (std::int64_t k = 0; k <= a + b; ++k) {
        const auto e = hypergeom_expectations(a, b, k);
        const LemmaCase c{a, b, k, e.ratio, static_cast<double>(a) / (1.0 + static_cast<double>(b)), e.product};
        ++rep.cases;
        rep.max_ratio_excess = std::max(rep.max_ratio_excess, c.ratio - c.ratio_bound);
        rep.max_product_excess = std::max(rep.max_product_excess, c.product - 1.0);
        if (c.ratio > c.ratio_bound + tol || c.product > 1.0 + tol) rep.violations.push_back(c);
        if (a >= 1 && std::abs(c.ratio - c.ratio_bound) <= tol) rep.tight.push_back(c);
      }
  return rep;
}

// ---------------------------------------------------------------------------
// CSV and SVG output
// ---------------------------------------------------------------------------

inline constexpr const char* kCsvHeader = "procedure,alpha,replication,fdp,power,rejections,runtime_ms";

namespace detail {

inline std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string fixed(double v, int precision) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, precision);
  return std::string(buf, res.ptr);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

template <class T>
T parse_number(const std::string& s, const std::string& what) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size(), "cannot parse " + what + " '" + s + "'");
  return v;
}

}  // namespace detail

/// Rows that completed (no error), in table order.
inline std::string to_csv(const MetricsTable& table) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : table.rows) {
    if (!r.error.empty()) continue;
    out += detail::csv_field(r.procedure) + "," + detail::shortest(r.alpha) + "," + std::to_string(r.replication) + "," +
           detail::shortest(r.fdp) + "," + detail::shortest(r.power) + "," + std::to_string(r.rejections) + "," +
           detail::shortest(r.runtime_ms) + "\n";
  }
  return out;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), "cannot open '" + path + "' for writing");
  f << content;
  require(static_cast<bool>(f), "failed writing '" + path + "'");
}

inline void emit_csv(const MetricsTable& table, const std::string& path) { write_file(path, to_csv(table)); }

inline MetricsTable parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == kCsvHeader, "metrics CSV: missing or wrong header");
  MetricsTable t;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    require(f.size() == 7, "metrics CSV line " + std::to_string(lineno) + ": expected 7 fields");
    MetricsRow r;
    r.procedure = f[0];
    r.alpha = detail::parse_number<double>(f[1], "alpha");
    r.replication = detail::parse_number<std::size_t>(f[2], "replication");
    r.fdp = detail::parse_number<double>(f[3], "fdp");
    r.power = detail::parse_number<double>(f[4], "power");
    r.rejections = detail::parse_number<std::size_t>(f[5], "rejections");
    r.runtime_ms = detail::parse_number<double>(f[6], "runtime_ms");
    t.rows.push_back(std::move(r));
  }
  return t;
}

inline MetricsTable read_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(static_cast<bool>(f), "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_csv(ss.str());
}

/// Two panels, mean FDP and mean power against alpha, one line per procedure with a +-2 SE band.
inline std::string to_svg(const MetricsTable& table, const std::string& title = "") {
  const auto aggs = table.aggregates();
  std::vector<std::string> procs;
  double a_lo = kInfinity, a_hi = -kInfinity;
  for (const auto& a : aggs) {
    if (std::find(procs.begin(), procs.end(), a.procedure) == procs.end()) procs.push_back(a.procedure);
    a_lo = std::min(a_lo, a.alpha);
    a_hi = std::max(a_hi, a.alpha);
  }
  if (aggs.empty()) a_lo = 0.0, a_hi = 1.0;
  if (a_hi - a_lo < 1e-12) a_lo -= 0.05, a_hi += 0.05;

  constexpr double W = 360, H = 260, M = 45, legend = 24;
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
  const auto px = [&](int panel, double a) { return panel * W + M + (a - a_lo) / (a_hi - a_lo) * (W - 2 * M); };
  const auto py = [&](double v) { return legend + H - M - std::clamp(v, 0.0, 1.0) * (H - 2 * M); };
  const auto num = [](double v) { return detail::fixed(v, 2); };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(2 * W) + "\" height=\"" +
                  num(H + legend + 14.0 * static_cast<double>(procs.size())) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  if (!title.empty()) s += "<text x=\"" + num(W) + "\" y=\"14\" text-anchor=\"middle\">" + title + "</text>\n";
  const char* labels[] = {"FDP", "power"};
  for (int panel = 0; panel < 2; ++panel) {
    s += "<rect x=\"" + num(px(panel, a_lo)) + "\" y=\"" + num(py(1.0)) + "\" width=\"" + num(W - 2 * M) + "\" height=\"" +
         num(H - 2 * M) + "\" fill=\"none\" stroke=\"#444\"/>\n";
    s += "<text x=\"" + num(panel * W + W / 2) + "\" y=\"" + num(legend + H - 8) + "\" text-anchor=\"middle\">alpha (" +
         labels[panel] + ")</text>\n";
    for (double tick : {0.0, 0.5, 1.0})
      s += "<text x=\"" + num(px(panel, a_lo) - 4) + "\" y=\"" + num(py(tick) + 4) + "\" text-anchor=\"end\">" +
           detail::fixed(tick, 1) + "</text>\n";
    for (double tick : {a_lo, a_hi})
      s += "<text x=\"" + num(px(panel, tick)) + "\" y=\"" + num(py(0.0) + 14) + "\" text-anchor=\"middle\">" +
           detail::fixed(tick, 3) + "</text>\n";
  }
  s += "<line x1=\"" + num(px(0, a_lo)) + "\" y1=\"" + num(py(a_lo)) + "\" x2=\"" + num(px(0, a_hi)) + "\" y2=\"" +
       num(py(a_hi)) + "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";

  for (std::size_t p = 0; p < procs.size(); ++p) {
    std::vector<Aggregate> pts;
    for (const auto& a : aggs)
      if (a.procedure == procs[p]) pts.push_back(a);
    std::sort(pts.begin(), pts.end(), [](const Aggregate& x, const Aggregate& y) { return x.alpha < y.alpha; });
    const std::string color = colors[p % 8];
    for (int panel = 0; panel < 2; ++panel) {
      const auto mean = [&](const Aggregate& a) { return panel == 0 ? a.fdp_mean : a.power_mean; };
      const auto se = [&](const Aggregate& a) { return panel == 0 ? a.fdp_se : a.power_se; };
      std::string band, line;
      for (const auto& a : pts) band += num(px(panel, a.alpha)) + "," + num(py(mean(a) + 2 * se(a))) + " ";
      for (auto it = pts.rbegin(); it != pts.rend(); ++it)
        band += num(px(panel, it->alpha)) + "," + num(py(mean(*it) - 2 * se(*it))) + " ";
      for (const auto& a : pts) line += num(px(panel, a.alpha)) + "," + num(py(mean(a))) + " ";
      s += "<polygon points=\"" + band + "\" fill=\"" + color + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
      s += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
      for (const auto& a : pts)
        s += "<circle cx=\"" + num(px(panel, a.alpha)) + "\" cy=\"" + num(py(mean(a))) + "\" r=\"2\" fill=\"" + color + "\"/>\n";
    }
    s += "<text x=\"" + num(M) + "\" y=\"" + num(legend + H + 14.0 * static_cast<double>(p)) + "\" fill=\"" + color + "\">" +
         procs[p] + "</text>\n";
  }
  return s + "</svg>\n";
}

inline void emit_plot(const MetricsTable& table, const std::string& path, const std::string& title = "") {
  write_file(path, to_svg(table, title));
}

}  // namespace bonus
