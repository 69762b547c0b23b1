#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bonus/core.hpp"

namespace bonus {

/// A fitted scoring function; larger scores are more alternative-like.
///
/// Copies share the underlying closure, so a fitted statistic is cheap to pass
/// around and safe to evaluate from several threads.
class Statistic {
 public:
  using Fn = std::function<double(std::span<const double>)>;
  using Tail = std::function<double(double)>;
  using Params = std::vector<std::pair<std::string, double>>;

  Statistic() = default;
  Statistic(std::string name, Fn fn, Params params = {})
      : name_(std::move(name)), fn_(std::make_shared<const Fn>(std::move(fn))), params_(std::move(params)) {}

  double operator()(std::span<const double> x) const { return (*fn_)(x); }

  std::vector<double> scores(const Data& z) const {
    std::vector<double> out(static_cast<std::size_t>(z.rows()));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*fn_)(row(z, i));
    return out;
  }

  const std::string& name() const { return name_; }
  const Params& params() const { return params_; }
  bool valid() const { return static_cast<bool>(fn_); }

  /// Known null survival function t -> P_0(T >= t), when one is available in closed form.
  const std::optional<Tail>& null_tail() const { return tail_; }
  Statistic& with_null_tail(Tail tail) {
    tail_ = std::move(tail);
    return *this;
  }

 private:
  std::string name_;
  std::shared_ptr<const Fn> fn_;
  Params params_;
  std::optional<Tail> tail_;
};

/// g o stat for a strictly increasing g; induces the same ordering as `stat`.
inline Statistic transformed(const Statistic& stat, std::function<double(double)> g, const std::string& label) {
  Statistic out(stat.name() + "|" + label, [stat, g = std::move(g)](std::span<const double> x) { return g(stat(x)); },
                stat.params());
  return out;
}

}  // namespace bonus
