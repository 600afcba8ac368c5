#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "onlinegamma2/errors.hpp"
#include "onlinegamma2/factorization.hpp"
#include "onlinegamma2/linalg.hpp"
#include "onlinegamma2/rng.hpp"
#include "onlinegamma2/transforms.hpp"

namespace onlinegamma2 {

// Default walk scale 30 ln(4 N T).
inline double walk_scale(std::size_t coords, std::size_t horizon) {
  return 30.0 * std::log(4.0 * static_cast<double>(std::max<std::size_t>(coords, 1)) *
                         static_cast<double>(std::max<std::size_t>(horizon, 1)));
}

// Random signing that keeps the running signed sum w balanced: +1 with probability
// 1/2 - <w,v>/(2c). Coordinates are right-row ids; missing ones are zero.
class SelfBalancingWalk {
 public:
  SelfBalancingWalk(double c, std::uint64_t seed) : c_(c), rng_(seed), seed_(seed) {
    if (!(c > 0.0)) throw BadInput("walk scale must be positive");
  }

  double c() const { return c_; }
  const Vec& w() const { return w_; }
  bool failed() const { return failed_; }
  std::uint64_t seed() const { return seed_; }

  double inner(const SparseRow& v) const {
    double s = 0.0;
    for (const Coef& e : v)
      if (e.id < w_.size()) s += w_[e.id] * e.value;
    return s;
  }

  // Probability of choosing +1 for direction v.
  double plus_probability(const SparseRow& v) const {
    return std::clamp(0.5 - inner(v) / (2.0 * c_), 0.0, 1.0);
  }

  int sign(const SparseRow& v) {
    if (failed_) throw WalkFailed("walk already failed");
    if (sparse_norm2(v) > 1.0 + 1e-9) throw BadInput("walk direction has norm above one");
    const double ip = inner(v);
    if (std::abs(ip) > c_) {
      failed_ = true;
      throw WalkFailed("|<w, v>| exceeded the walk scale");
    }
    const int x = rng_.bernoulli(std::clamp(0.5 - ip / (2.0 * c_), 0.0, 1.0)) ? 1 : -1;
    for (const Coef& e : v) {
      if (e.id >= w_.size()) w_.resize(e.id + 1, 0.0);
      w_[e.id] += x * e.value;
    }
    return x;
  }

 private:
  double c_;
  CounterRng rng_;
  std::uint64_t seed_;
  Vec w_;
  bool failed_ = false;
};

struct DiscConfig {
  std::uint64_t seed = 0;
  std::size_t horizon = 0;         // declared stream length, 0 if unknown
  std::optional<double> walk_c;    // overrides the default scale
  std::size_t max_failures = 64;   // walk restarts after failure before giving up
};

struct DiscStep {
  int sign = 0;
  double prefix_inf = 0.0;
  double consistency_error = 0.0;  // ||sum x_i a_i - L_t u_t||_inf
};

// Online signing of arriving columns: factor the columns as L_t r_t and sign r_t with the
// walk, so that x_1 a_1 + ... + x_t a_t = L_t (x_1 r_1 + ... + x_t r_t).
class OnlineDiscrepancy {
 public:
  OnlineDiscrepancy(std::size_t m, DiscConfig cfg)
      : m_(m), cfg_(cfg), fact_(make_column_pipeline(m)), prefix_(m, 0.0) {
    if (m == 0) throw BadInput("column height must be positive");
    horizon_ = cfg.horizon > 0 ? cfg.horizon : 1;
    walk_ = std::make_unique<SelfBalancingWalk>(scale(), next_seed());
  }

  std::size_t height() const { return m_; }
  const std::vector<int>& signs() const { return signs_; }
  const Vec& prefix() const { return prefix_; }
  double max_prefix_inf() const { return max_prefix_; }
  const std::vector<double>& prefix_inf_trace() const { return trace_; }
  std::size_t failures() const { return failures_; }
  std::size_t schedule_restarts() const { return schedule_restarts_; }
  std::size_t restarts() const { return failures_ + schedule_restarts_; }
  double walk_c() const { return walk_->c(); }
  const DoublingColumnFactorizer& factorizer() const { return *fact_; }
  // Largest ||r_t||_2 seen so far.
  double max_right_norm() const { return max_r_; }
  // Factorization value ||L||_{2->inf} max_t ||r_t||_2.
  double gamma_estimate() const { return std::sqrt(fact_->left_row_norm2_max()) * max_r_; }

  DiscStep step(std::span<const double> a) {
    if (a.size() != m_) throw BadInput("column height mismatch");
    ColumnStep cs = fact_->step(a);
    for (RightRow& col : cs.new_left_columns) {
      if (col.id != cols_.size()) throw ContractViolation("left columns out of order");
      cols_.push_back(std::move(col.entries));
    }
    max_r_ = std::max(max_r_, sparse_norm2(cs.right));
    ++t_;
    if (cfg_.horizon == 0 && t_ > horizon_) {
      horizon_ *= 2;
      ++schedule_restarts_;
      walk_ = std::make_unique<SelfBalancingWalk>(scale(), next_seed());
    }
    int x = 0;
    for (;;) {
      try {
        x = walk_->sign(cs.right);
        break;
      } catch (const WalkFailed&) {
        if (++failures_ > cfg_.max_failures) throw;
        walk_ = std::make_unique<SelfBalancingWalk>(scale(), next_seed());
      }
    }
    signs_.push_back(x);
    for (const Coef& e : cs.right) {
      if (e.id >= u_.size()) u_.resize(e.id + 1, 0.0);
      u_[e.id] += x * e.value;
    }
    DiscStep out;
    out.sign = x;
    for (std::size_t i = 0; i < m_; ++i) prefix_[i] += x * a[i];
    out.prefix_inf = norm_inf(prefix_);
    max_prefix_ = std::max(max_prefix_, out.prefix_inf);
    trace_.push_back(out.prefix_inf);
    Vec lu(m_, 0.0);
    for (std::size_t k = 0; k < u_.size(); ++k)
      for (std::size_t i = 0; i < m_; ++i) lu[i] += cols_[k][i] * u_[k];
    for (std::size_t i = 0; i < m_; ++i)
      out.consistency_error = std::max(out.consistency_error, std::abs(lu[i] - prefix_[i]));
    return out;
  }

 private:
  double scale() const { return cfg_.walk_c ? *cfg_.walk_c : walk_scale(m_, horizon_); }
  std::uint64_t next_seed() { return cfg_.seed + 0x9e3779b97f4a7c15ULL * walks_++; }

  std::size_t m_;
  DiscConfig cfg_;
  std::unique_ptr<DoublingColumnFactorizer> fact_;
  std::unique_ptr<SelfBalancingWalk> walk_;
  std::vector<RowVec> cols_;
  Vec u_;
  Vec prefix_;
  std::vector<int> signs_;
  std::vector<double> trace_;
  double max_prefix_ = 0.0;
  double max_r_ = 0.0;
  std::size_t horizon_ = 1;
  std::size_t t_ = 0;
  std::size_t failures_ = 0;
  std::size_t schedule_restarts_ = 0;
  std::uint64_t walks_ = 0;
};

// Prefix discrepancy of a fixed sign sequence.
inline double prefix_disc(const std::vector<Vec>& columns, std::span<const int> signs) {
  if (columns.empty()) return 0.0;
  Vec p(columns[0].size(), 0.0);
  double best = 0.0;
  for (std::size_t t = 0; t < columns.size(); ++t) {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += signs[t] * columns[t][i];
    best = std::max(best, norm_inf(p));
  }
  return best;
}

// min over signs of max_t ||x_1 a_1 + ... + x_t a_t||_inf, by branch and bound.
inline double brute_prefix_disc(const std::vector<Vec>& columns) {
  const std::size_t n = columns.size();
  if (n > 22) throw ScaleGuard("brute-force prefix discrepancy limited to 22 columns");
  if (n == 0) return 0.0;
  const std::size_t m = columns[0].size();
  for (const Vec& c : columns)
    if (c.size() != m) throw BadInput("columns must share a height");
  double best = std::numeric_limits<double>::infinity();
  std::vector<Vec> prefix(n + 1, Vec(m, 0.0));
  // The first sign is fixed to +1 by symmetry.
  auto rec = [&](auto&& self, std::size_t t, double worst) -> void {
    if (worst >= best) return;
    if (t == n) {
      best = worst;
      return;
    }
    for (int x : {1, -1}) {
      if (t == 0 && x == -1) continue;
      for (std::size_t i = 0; i < m; ++i) prefix[t + 1][i] = prefix[t][i] + x * columns[t][i];
      self(self, t + 1, std::max(worst, norm_inf(prefix[t + 1])));
    }
  };
  rec(rec, 0, 0.0);
  return best;
}

}  // namespace onlinegamma2
