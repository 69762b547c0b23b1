#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bonus/core.hpp"
#include "bonus/engine.hpp"

namespace bonus {

/// Settings for the command-line driver. `std::nullopt` sizes mean "auto".
struct Config {
  // [experiment]
  std::string experiment;
  double scale = 0.2;
  std::size_t reps = 50;
  std::uint64_t seed = 0;
  std::vector<double> alphas{0.1};
  unsigned threads = 1;
  // [procedure]
  std::string kind = "bh";  // bh | storey
  double q = 0.3;
  std::string learner = "mle";  // agnostic | pca | mle | overfit
  int k = 1;
  std::vector<int> ranks{1, 2, 3};
  std::optional<std::size_t> n_tilde;
  bool sparse = true;
  std::optional<std::size_t> n_tilde_plus;
  std::optional<std::size_t> batch;
  std::size_t refit_every = 0;
  bool ensemble = false;
  double ensemble_factor = 0.8;
  // [output]
  std::string out_dir = ".";
  bool timing = false;
  // [whiten]
  double winsor_c = 3.0;

  FdpKind fdp_kind() const {
    if (kind == "storey") return StoreyKind{q};
    return BhKind{};
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct ConfigLine {
  std::size_t line = 0;
  std::string key;
  std::string value;

  [[noreturn]] void fail(const std::string& what) const {
    throw Error("config line " + std::to_string(line) + ": '" + key + "' " + what);
  }

  double real() const {
    double v = 0.0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size() || !std::isfinite(v))
      fail("expects a number, got '" + value + "'");
    return v;
  }

  std::uint64_t integer() const {
    std::uint64_t v = 0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size())
      fail("expects a non-negative integer, got '" + value + "'");
    return v;
  }

  std::optional<std::size_t> integer_or_auto() const {
    if (value == "auto") return std::nullopt;
    return static_cast<std::size_t>(integer());
  }

  bool boolean() const {
    if (value == "true" || value == "yes" || value == "1") return true;
    if (value == "false" || value == "no" || value == "0") return false;
    fail("expects true or false, got '" + value + "'");
  }

  template <class F>
  auto list(F parse_one) const {
    std::vector<decltype(parse_one(*this))> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_one(ConfigLine{line, key, trim(item)}));
    if (out.empty()) fail("expects a non-empty list");
    return out;
  }

  std::string choice(std::initializer_list<const char*> allowed) const {
    for (const char* a : allowed)
      if (value == a) return value;
    std::string all;
    for (const char* a : allowed) all += (all.empty() ? "" : ", ") + std::string(a);
    fail("must be one of " + all + ", got '" + value + "'");
  }
};

}  // namespace detail

/// Parses `key = value` lines grouped under `[experiment]`, `[procedure]`, `[output]` and
/// `[whiten]` headers. `#` starts a comment. `experiment` and `seed` are required.
inline Config parse_config(const std::string& text) {
  static const std::map<std::string, std::vector<std::string>> sections = {
      {"experiment", {"experiment", "scale", "reps", "seed", "alpha", "threads"}},
      {"procedure",
       {"kind", "q", "learner", "k", "ranks", "n_tilde", "sparse", "n_tilde_plus", "batch", "refit_every", "ensemble",
        "ensemble_factor"}},
      {"output", {"dir", "timing"}},
      {"whiten", {"winsor_c"}},
  };

  Config c;
  std::string section;
  bool have_experiment = false, have_seed = false;
  std::istringstream in(text);
  std::string raw;
  for (std::size_t lineno = 1; std::getline(in, raw); ++lineno) {
    std::string s = detail::trim(raw.substr(0, raw.find('#')));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw Error("config line " + std::to_string(lineno) + ": malformed section header");
      section = detail::trim(s.substr(1, s.size() - 2));
      if (!sections.contains(section))
        throw Error("config line " + std::to_string(lineno) + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const detail::ConfigLine l{lineno, detail::trim(s.substr(0, eq)), detail::trim(s.substr(eq + 1))};
    if (section.empty()) throw Error("config line " + std::to_string(lineno) + ": '" + l.key + "' appears before any [section]");
    const auto& keys = sections.at(section);
    if (std::find(keys.begin(), keys.end(), l.key) == keys.end()) l.fail("is not a known key in [" + section + "]");
    if (l.value.empty()) l.fail("has no value");

    const std::string& k = l.key;
    if (k == "experiment") {
      c.experiment = l.value;
      have_experiment = true;
    } else if (k == "scale") {
      c.scale = l.real();
      if (!(c.scale > 0.0)) l.fail("must be > 0");
    } else if (k == "reps") {
      c.reps = l.integer();
      if (c.reps < 1) l.fail("must be >= 1");
    } else if (k == "seed") {
      c.seed = l.integer();
      have_seed = true;
    } else if (k == "alpha") {
      c.alphas = l.list([](const detail::ConfigLine& x) {
        const double a = x.real();
        if (!(a > 0.0 && a < 1.0)) x.fail("must be in (0,1), got " + x.value);
        return a;
      });
    } else if (k == "threads") {
      c.threads = static_cast<unsigned>(std::max<std::uint64_t>(1, l.integer()));
    } else if (k == "kind") {
      c.kind = l.choice({"bh", "storey"});
    } else if (k == "q") {
      c.q = l.real();
      if (!(c.q > 0.0 && c.q < 1.0)) l.fail("must be in (0,1)");
    } else if (k == "learner") {
      c.learner = l.choice({"agnostic", "pca", "mle", "overfit"});
    } else if (k == "k") {
      c.k = static_cast<int>(l.integer());
      if (c.k < 1) l.fail("must be >= 1");
    } else if (k == "ranks") {
      c.ranks = l.list([](const detail::ConfigLine& x) {
        const auto r = static_cast<int>(x.integer());
        if (r < 1) x.fail("entries must be >= 1");
        return r;
      });
    } else if (k == "n_tilde") {
      c.n_tilde = l.integer_or_auto();
      if (c.n_tilde && *c.n_tilde < 1) l.fail("must be >= 1 or auto");
    } else if (k == "sparse") {
      c.sparse = l.boolean();
    } else if (k == "n_tilde_plus") {
      c.n_tilde_plus = l.integer_or_auto();
      if (c.n_tilde_plus && *c.n_tilde_plus < 1) l.fail("must be >= 1 or auto");
    } else if (k == "batch") {
      c.batch = l.integer_or_auto();
      if (c.batch && *c.batch < 1) l.fail("must be >= 1 or auto");
    } else if (k == "refit_every") {
      c.refit_every = l.integer();
    } else if (k == "ensemble") {
      c.ensemble = l.boolean();
    } else if (k == "ensemble_factor") {
      c.ensemble_factor = l.real();
      if (!(c.ensemble_factor > 0.0 && c.ensemble_factor <= 1.0)) l.fail("must be in (0,1]");
    } else if (k == "dir") {
      c.out_dir = l.value;
    } else if (k == "timing") {
      c.timing = l.boolean();
    } else if (k == "winsor_c") {
      c.winsor_c = l.real();
      if (!(c.winsor_c > 0.0)) l.fail("must be > 0");
    }
  }
  if (!have_experiment) throw Error("config: missing required key 'experiment' in [experiment]");
  if (!have_seed) throw Error("config: missing required key 'seed' in [experiment]");
  return c;
}

/// n_tilde after resolving "auto" through choose_ntilde.
inline std::size_t resolve_n_tilde(const Config& c, std::size_t n, double alpha) {
  return c.n_tilde ? *c.n_tilde : choose_ntilde(n, alpha, c.sparse);
}

/// n_tilde_plus after resolving "auto" to 2 (n + n_tilde).
inline std::size_t resolve_n_tilde_plus(const Config& c, std::size_t n, std::size_t n_tilde) {
  return c.n_tilde_plus ? *c.n_tilde_plus : 2 * (n + n_tilde);
}

inline std::size_t resolve_batch(const Config& c, std::size_t n_plus) {
  return c.batch ? *c.batch : std::max<std::size_t>(1, n_plus / 500);
}

}  // namespace bonus
