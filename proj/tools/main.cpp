#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "bonus/bonus.hpp"

namespace {

using namespace bonus;

struct Flags {
  std::string config_path;
  std::vector<double> alphas;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::optional<double> scale;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
  bool timing = false;
};

Config load(const Flags& f, const std::string& experiment) {
  Config c;
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    require(static_cast<bool>(in), "cannot open config '" + f.config_path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    c = parse_config(ss.str());
  }
  if (!experiment.empty()) c.experiment = experiment;
  if (!f.alphas.empty()) c.alphas = f.alphas;
  if (f.seed) c.seed = *f.seed;
  if (f.reps) c.reps = *f.reps;
  if (f.scale) c.scale = *f.scale;
  if (f.out) c.out_dir = *f.out;
  if (f.threads) c.threads = *f.threads;
  if (f.timing) c.timing = true;
  for (double a : c.alphas) require(a > 0.0 && a < 1.0, "alpha must be in (0,1)");
  return c;
}

void print_aggregates(const MetricsTable& t) {
  std::printf("%-28s %7s %5s %9s %9s %9s %9s %9s\n", "procedure", "alpha", "reps", "fdp", "fdp_se", "power", "power_se",
              "rejected");
  for (const auto& a : t.aggregates())
    std::printf("%-28s %7.3f %5zu %9.4f %9.4f %9.4f %9.4f %9.1f\n", a.procedure.c_str(), a.alpha, a.count, a.fdp_mean,
                a.fdp_se, a.power_mean, a.power_se, a.rejections_mean);
  for (const auto& r : t.rows)
    if (!r.error.empty())
      std::fprintf(stderr, "replication %zu, %s, alpha %g failed: %s\n", r.replication, r.procedure.c_str(), r.alpha,
                   r.error.c_str());
}

void write_outputs(const MetricsTable& t, const Config& c, const std::string& stem) {
  std::filesystem::create_directories(c.out_dir);
  const auto base = (std::filesystem::path(c.out_dir) / stem).string();
  emit_csv(t, base + ".csv");
  emit_plot(t, base + ".svg", stem);
  std::printf("wrote %s.csv and %s.svg\n", base.c_str(), base.c_str());
}

int simulate(const Config& c) {
  ExperimentSpec spec = experiment_by_name(c.experiment, c.scale);
  spec.base_seed = c.seed;
  spec.replications = c.reps;
  spec.alphas = c.alphas;
  const MetricsTable t = replicate(spec, c.threads, c.timing);
  print_aggregates(t);
  write_outputs(t, c, spec.name);
  return 0;
}

LearnerPtr make_learner(const Config& c, int d, int k) {
  require(k >= 1 && k <= d, "k must be in [1, d]");
  if (c.learner == "agnostic") return std::make_shared<const AgnosticLearner>(GaussianIdentity{d});
  if (c.learner == "pca") return std::make_shared<const LowRankLearner>(k);
  if (c.learner == "overfit") return std::make_shared<const OverfitLearner>();
  return std::make_shared<const TwoGroupLearner>(k);
}

void report_rejections(const Config& c, const std::vector<std::size_t>& rejected, double alpha) {
  std::printf("alpha %g: %zu rejections\n", alpha, rejected.size());
  if (c.out_dir != ".") {
    std::filesystem::create_directories(c.out_dir);
    std::ostringstream name;
    name << "rejected_alpha" << alpha << ".txt";
    const auto path = (std::filesystem::path(c.out_dir) / name.str()).string();
    std::string body = "row\n";
    for (std::size_t i : rejected) body += std::to_string(i) + "\n";
    write_file(path, body);
    std::printf("wrote %s\n", path.c_str());
  }
}

int run_data(const Config& c, const std::string& path, bool double_layer) {
  const ZScoreMatrix raw = ingest_zscores(path);
  std::printf("read %zu rows, d = %d\n", raw.rows(), raw.dim());
  const ZScoreMatrix z = whiten(raw, c.winsor_c);
  const NullModel model = GaussianIdentity{z.dim()};
  for (double alpha : c.alphas) {
    BonusConfig cfg;
    cfg.alpha = alpha;
    cfg.kind = c.fdp_kind();
    cfg.n_tilde = resolve_n_tilde(c, z.rows(), alpha);
    cfg.batch = resolve_batch(c, z.rows() + cfg.n_tilde);
    cfg.refit_every = c.refit_every;
    cfg.seed = c.seed;
    Rng rng = make_rng(c.seed);
    if (!double_layer) {
      const LearnerPtr learner = make_learner(c, z.dim(), c.k);
      const RunResult r = run_bonus(z.values, *learner, model, cfg, rng);
      std::printf("learner %s, n_tilde %zu, stopped after %zu steps\n", r.statistic.c_str(), cfg.n_tilde, r.t_hat);
      report_rejections(c, r.rejected, alpha);
    } else {
      std::vector<LearnerPtr> menu{std::make_shared<const AgnosticLearner>(model)};
      // agnostic plus the configured learner family at each rank
      if (c.learner == "pca" || c.learner == "mle")
        for (int k : c.ranks)
          if (k <= z.dim()) menu.push_back(make_learner(c, z.dim(), k));
      DoubleOptions opt;
      opt.n_tilde_plus = resolve_n_tilde_plus(c, z.rows(), cfg.n_tilde);
      opt.ensemble = c.ensemble;
      opt.ensemble_factor = c.ensemble_factor;
      const DoubleBonusResult r = run_double_bonus(z.values, menu, model, cfg, opt, rng);
      for (const auto& s : r.screening)
        std::printf("  screen %-24s %6zu%s\n", s.learner.c_str(), s.rejections, s.selected ? "  *" : "");
      std::printf("selected %s%s\n", r.selected.c_str(), r.ensemble_adopted ? " (ensemble)" : "");
      report_rejections(c, r.run.rejected, alpha);
    }
  }
  return 0;
}

int lemma_check(int a_max, int b_max) {
  const LemmaReport rep = lemma_sweep(a_max, b_max);
  std::printf("checked %zu cases (a <= %d, b <= %d)\n", rep.cases, a_max, b_max);
  std::printf("max E[V/(1+U)] - a/(1+b): %.3e\n", rep.max_ratio_excess);
  std::printf("max E[product] - 1:       %.3e\n", rep.max_product_excess);
  std::printf("tight cases: %zu", rep.tight.size());
  for (std::size_t i = 0; i < rep.tight.size() && i < 8; ++i)
    std::printf("%s(a=%lld,b=%lld,k=%lld)", i ? " " : " ", static_cast<long long>(rep.tight[i].a),
                static_cast<long long>(rep.tight[i].b), static_cast<long long>(rep.tight[i].k));
  std::printf("%s\n", rep.tight.size() > 8 ? " ..." : "");
  std::printf("violations: %zu\n", rep.violations.size());
  return rep.violations.empty() ? 0 : 1;
}

int calibrate(const Config& c, bool reps_given) {
  ExperimentSpec spec = experiment_calibration();
  spec.base_seed = c.seed;
  if (reps_given) spec.replications = c.reps;
  spec.alphas = c.alphas;
  const MetricsTable t = replicate(spec, c.threads, c.timing);
  print_aggregates(t);
  bool ok = true;
  for (const auto& a : t.aggregates()) {
    const bool pass = a.fdp_mean <= a.alpha + 2.0 * a.fdp_se;
    std::printf("%s alpha %g: mean FDP %.4f <= %.4f + 2 SE (%.4f): %s\n", a.procedure.c_str(), a.alpha, a.fdp_mean,
                a.alpha, a.fdp_se, pass ? "ok" : "EXCEEDED");
    ok = ok && pass;
  }
  if (c.out_dir != ".") write_outputs(t, c, spec.name);
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BONuS and Double BONuS multiple testing with synthetic nulls"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  std::uint64_t seed = 0;
  std::size_t reps = 0;
  double scale = 0.0;
  std::string out;
  unsigned threads = 1;
  app.add_option("--config", f.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--alpha", f.alphas, "target FDR level(s)")->delimiter(',');
  auto* seed_opt = app.add_option("--seed", seed, "base seed");
  auto* reps_opt = app.add_option("--reps", reps, "replications")->check(CLI::PositiveNumber);
  auto* scale_opt = app.add_option("--scale", scale, "experiment size relative to the reference sizes")
                        ->check(CLI::PositiveNumber);
  auto* out_opt = app.add_option("--out", out, "output directory");
  auto* threads_opt = app.add_option("--threads", threads, "worker threads for replications")->check(CLI::PositiveNumber);
  app.add_flag("--timing", f.timing, "record wall-clock runtime per procedure call");

  std::string experiment, data_path;
  auto* sim = app.add_subcommand("simulate", "run a replicated experiment (intro, gaussian, multinomial, calibrate)");
  sim->add_option("experiment", experiment)->required();
  auto* run = app.add_subcommand("run", "whiten a z-score CSV and run BONuS");
  run->add_option("data", data_path)->required();
  auto* dbl = app.add_subcommand("double", "whiten a z-score CSV and run Double BONuS");
  dbl->add_option("data", data_path)->required();
  int a_max = 12, b_max = 12;
  auto* lemma = app.add_subcommand("lemma-check", "exhaustive hypergeometric check");
  lemma->add_option("--a-max", a_max)->check(CLI::NonNegativeNumber);
  lemma->add_option("--b-max", b_max)->check(CLI::NonNegativeNumber);
  auto* cal = app.add_subcommand("calibrate", "global-null FDR calibration");

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) f.seed = seed;
  if (*reps_opt) f.reps = reps;
  if (*scale_opt) f.scale = scale;
  if (*out_opt) f.out = out;
  if (*threads_opt) f.threads = threads;

  try {
    if (*lemma) return lemma_check(a_max, b_max);
    if (*sim) return simulate(load(f, experiment));
    if (*run) return run_data(load(f, "run"), data_path, false);
    if (*dbl) return run_data(load(f, "double"), data_path, true);
    if (*cal) {
      Config c = load(f, "calibrate");
      return calibrate(c, f.reps.has_value() || !f.config_path.empty());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
