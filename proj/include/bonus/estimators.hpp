#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <variant>

#include "bonus/core.hpp"
#include "bonus/pool.hpp"

namespace bonus {

struct BhKind {};

/// Storey variant: the correction set is the bottom `q` fraction of pooled scores.
struct StoreyKind {
  double q = 0.3;
};

using FdpKind = std::variant<BhKind, StoreyKind>;

inline bool is_storey(const FdpKind& kind) { return std::holds_alternative<StoreyKind>(kind); }

struct FdpEstimate {
  double value = 0.0;  // may be +inf
  RegionCounts region;
  RegionCounts correction;  // zero for BH
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// (n / (ñ + 1)) * (Ñ(R) + 1) / max(1, N(R))
inline double fdp_bh(std::size_t n, std::size_t n_tilde, std::size_t real_in_region, std::size_t synthetic_in_region) {
  const double scale = static_cast<double>(n) / (static_cast<double>(n_tilde) + 1.0);
  return scale * (static_cast<double>(synthetic_in_region) + 1.0) /
         static_cast<double>(std::max<std::size_t>(1, real_in_region));
}

/// ((N(A) + 1) / Ñ(A)) * (Ñ(R) + 1) / max(1, N(R)); +inf when Ñ(A) = 0.
inline double fdp_storey(std::size_t real_in_correction, std::size_t synthetic_in_correction,
                         std::size_t real_in_region, std::size_t synthetic_in_region) {
  if (synthetic_in_correction == 0) return kInfinity;
  const double null_ratio =
      (static_cast<double>(real_in_correction) + 1.0) / static_cast<double>(synthetic_in_correction);
  return null_ratio * (static_cast<double>(synthetic_in_region) + 1.0) /
         static_cast<double>(std::max<std::size_t>(1, real_in_region));
}

inline bool should_stop(double fdp, double alpha, std::size_t real_in_region) {
  return real_in_region == 0 || fdp <= alpha;
}

inline FdpEstimate estimate_fdp(const FdpKind& kind, std::size_t n, std::size_t n_tilde, RegionCounts region,
                                RegionCounts correction) {
  FdpEstimate e{0.0, region, correction};
  if (is_storey(kind))
    e.value = fdp_storey(correction.real, correction.synthetic, region.real, region.synthetic);
  else
    e.value = fdp_bh(n, n_tilde, region.real, region.synthetic);
  return e;
}

// ---------------------------------------------------------------------------
// Hypergeometric identities behind the optional-stopping argument
// ---------------------------------------------------------------------------

struct HypergeomExpectations {
  double ratio = 0.0;    // E[V / (1 + U)]
  double product = 0.0;  // E[V / (1 + U) * (b - U) / (1 + a - V)]
};

namespace detail {

inline double log_choose(std::int64_t n, std::int64_t k) {
  return std::lgamma(static_cast<double>(n + 1)) - std::lgamma(static_cast<double>(k + 1)) -
         std::lgamma(static_cast<double>(n - k + 1));
}

// Exact for n <= 56: every intermediate product stays below 2^64.
inline double choose_exact(std::int64_t n, std::int64_t k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  std::uint64_t c = 1;
  for (std::int64_t i = 1; i <= k; ++i) c = c * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return static_cast<double>(c);
}

}  // namespace detail

/// Exact expectations for V ~ Hypergeom(population a + b, a successes, k draws), U = k - V,
/// by enumerating the pmf.
inline HypergeomExpectations hypergeom_expectations(std::int64_t a, std::int64_t b, std::int64_t k) {
  require(a >= 0 && b >= 0, "hypergeom_expectations: a and b must be >= 0");
  require(k >= 0 && k <= a + b, "hypergeom_expectations: k must be in [0, a + b]");
  const bool exact = a + b <= 56;
  const double denom = exact ? detail::choose_exact(a + b, k) : 0.0;
  const double log_denom = exact ? 0.0 : detail::log_choose(a + b, k);

  HypergeomExpectations out;
  const std::int64_t lo = std::max<std::int64_t>(0, k - b);
  const std::int64_t hi = std::min(a, k);
  for (std::int64_t v = lo; v <= hi; ++v) {
    const std::int64_t u = k - v;
    const double pmf = exact ? detail::choose_exact(a, v) * detail::choose_exact(b, u) / denom
                             : std::exp(detail::log_choose(a, v) + detail::log_choose(b, u) - log_denom);
    const double ratio = static_cast<double>(v) / (1.0 + static_cast<double>(u));
    out.ratio += pmf * ratio;
    out.product += pmf * ratio * static_cast<double>(b - u) / (1.0 + static_cast<double>(a - v));
  }
  return out;
}

}  // namespace bonus
