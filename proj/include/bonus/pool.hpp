#pragma once

#include <algorithm>
#include <memory>
#include <numeric>
#include <vector>

#include "bonus/core.hpp"

namespace bonus {

struct Revealed {
  std::size_t index = 0;
  bool is_real = false;

  friend bool operator==(const Revealed&, const Revealed&) = default;
};

struct RegionCounts {
  std::size_t real = 0;       // N(R)
  std::size_t synthetic = 0;  // Ñ(R)

  friend bool operator==(const RegionCounts&, const RegionCounts&) = default;
};

class PooledSet;

/// What a learner is allowed to see: every pooled vector, plus the labels of
/// indices that have already been unmasked. There is no accessor for masked
/// labels; they are not stored here at all.
class MaskView {
 public:
  const Data& z() const { return *z_; }
  std::size_t size() const { return static_cast<std::size_t>(z_->rows()); }
  std::size_t n() const { return n_; }
  std::size_t n_tilde() const { return n_tilde_; }
  int dim() const { return static_cast<int>(z_->cols()); }

  const std::vector<Revealed>& revealed() const { return revealed_; }
  bool is_masked(std::size_t j) const { return masked_[j]; }

 private:
  friend class PooledSet;
  MaskView(std::shared_ptr<const Data> z, std::size_t n, std::size_t n_tilde, std::vector<Revealed> revealed,
           std::vector<bool> masked)
      : z_(std::move(z)), n_(n), n_tilde_(n_tilde), revealed_(std::move(revealed)), masked_(std::move(masked)) {}

  std::shared_ptr<const Data> z_;
  std::size_t n_ = 0;
  std::size_t n_tilde_ = 0;
  std::vector<Revealed> revealed_;
  std::vector<bool> masked_;
};

/// Permuted union of real and synthetic observations with hidden origin labels.
/// Owned by the engine; labels leave this object only through reveal().
class PooledSet {
 public:
  /// `is_real[j]` labels pooled row j; `origin[j]` is its row in the real (or synthetic) input.
  static PooledSet from_parts(Data z, std::vector<bool> is_real, std::vector<std::size_t> origin) {
    require(static_cast<std::size_t>(z.rows()) == is_real.size() && is_real.size() == origin.size(),
            "PooledSet: inconsistent sizes");
    PooledSet p;
    p.n_ = static_cast<std::size_t>(std::count(is_real.begin(), is_real.end(), true));
    p.n_tilde_ = is_real.size() - p.n_;
    p.z_ = std::make_shared<const Data>(std::move(z));
    p.is_real_ = std::move(is_real);
    p.origin_ = std::move(origin);
    p.masked_.assign(p.is_real_.size(), true);
    return p;
  }

  const Data& z() const { return *z_; }
  std::shared_ptr<const Data> shared_z() const { return z_; }
  std::size_t size() const { return is_real_.size(); }
  std::size_t n() const { return n_; }
  std::size_t n_tilde() const { return n_tilde_; }
  std::size_t masked_count() const { return size() - revealed_.size(); }
  bool is_masked(std::size_t j) const { return masked_.at(j); }
  const std::vector<Revealed>& revealed() const { return revealed_; }

  MaskView view() const { return MaskView(z_, n_, n_tilde_, revealed_, masked_); }

  /// Unmask `indices` and return their labels. Every index must be in range and still masked.
  std::vector<Revealed> reveal(std::span<const std::size_t> indices) {
    for (std::size_t j : indices) {
      require(j < size(), "reveal: index out of range");
      require(masked_[j], "reveal: index already unmasked");
    }
    std::vector<std::size_t> sorted(indices.begin(), indices.end());
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), "reveal: duplicate index");
    std::vector<Revealed> out;
    out.reserve(indices.size());
    for (std::size_t j : indices) {
      masked_[j] = false;
      out.push_back({j, is_real_[j]});
      revealed_.push_back(out.back());
      (is_real_[j] ? revealed_real_ : revealed_synthetic_)++;
    }
    return out;
  }

  /// Counts inside the current masked set, from revealed labels only.
  RegionCounts masked_counts() const { return {n_ - revealed_real_, n_tilde_ - revealed_synthetic_}; }

  /// N(R), Ñ(R) for a region whose complement is fully unmasked:
  /// N(R) = n - #(revealed real outside R), likewise for synthetic.
  RegionCounts region_counts(std::span<const std::size_t> region) const {
    std::vector<bool> inside(size(), false);
    for (std::size_t j : region) {
      require(j < size(), "region_counts: index out of range");
      inside[j] = true;
    }
    std::size_t real_out = 0;
    std::size_t syn_out = 0;
    for (std::size_t j = 0; j < size(); ++j) {
      if (inside[j]) continue;
      require(!masked_[j], "region_counts: index outside the region is still masked");
      (is_real_[j] ? real_out : syn_out)++;
    }
    return {n_ - real_out, n_tilde_ - syn_out};
  }

  /// Final unmasking after the stopping time: real-input rows of the pooled indices in `region`.
  std::vector<std::size_t> real_rows(std::span<const std::size_t> region) const {
    std::vector<std::size_t> out;
    for (std::size_t j : region)
      if (is_real_.at(j)) out.push_back(origin_[j]);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  PooledSet() = default;

  std::shared_ptr<const Data> z_;
  std::vector<bool> is_real_;
  std::vector<std::size_t> origin_;
  std::vector<bool> masked_;
  std::vector<Revealed> revealed_;
  std::size_t n_ = 0;
  std::size_t n_tilde_ = 0;
  std::size_t revealed_real_ = 0;
  std::size_t revealed_synthetic_ = 0;
};

/// Uniformly permuted concatenation of `real` and `synthetic`.
inline PooledSet pool_and_mask(const Data& real, const Data& synthetic, Rng& rng) {
  require(synthetic.rows() >= 1, "pool_and_mask: at least one synthetic observation is required");
  require(real.rows() == 0 || real.cols() == synthetic.cols(), "pool_and_mask: dimension mismatch");
  const std::size_t n = static_cast<std::size_t>(real.rows());
  const std::size_t total = n + static_cast<std::size_t>(synthetic.rows());

  std::vector<std::size_t> perm(total);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);

  Data z(static_cast<Eigen::Index>(total), synthetic.cols());
  std::vector<bool> is_real(total);
  std::vector<std::size_t> origin(total);
  for (std::size_t j = 0; j < total; ++j) {
    const std::size_t src = perm[j];
    is_real[j] = src < n;
    origin[j] = is_real[j] ? src : src - n;
    z.row(static_cast<Eigen::Index>(j)) = is_real[j] ? real.row(static_cast<Eigen::Index>(src))
                                                      : synthetic.row(static_cast<Eigen::Index>(src - n));
  }
  return PooledSet::from_parts(std::move(z), std::move(is_real), std::move(origin));
}

}  // namespace bonus
