#pragma once

#include <algorithm>
#include <bit>
#include <limits>
#include <memory>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "onlinegamma2/errors.hpp"
#include "onlinegamma2/factorization.hpp"
#include "onlinegamma2/linalg.hpp"
#include "onlinegamma2/rng.hpp"

namespace onlinegamma2 {

// ---------------------------------------------------------------------------
// Workload families

enum class Family { Hadamard, ScaledHadamardLB, PrefixSums, Intervals, HalfplanesGrid, RandomBoolean };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::Hadamard: return "hadamard";
    case Family::ScaledHadamardLB: return "scaled-hadamard";
    case Family::PrefixSums: return "prefix";
    case Family::Intervals: return "intervals";
    case Family::HalfplanesGrid: return "halfplanes";
    case Family::RandomBoolean: return "random";
  }
  return "?";
}

inline Family parse_family(const std::string& s) {
  for (Family f : {Family::Hadamard, Family::ScaledHadamardLB, Family::PrefixSums, Family::Intervals,
                   Family::HalfplanesGrid, Family::RandomBoolean})
    if (s == family_name(f)) return f;
  throw BadSpec("unknown workload family: " + s);
}

inline bool is_pow2(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

// Sylvester Hadamard matrix of order n.
inline Matrix hadamard(std::size_t n) {
  if (!is_pow2(n)) throw BadSpec("Hadamard order must be a power of two");
  Matrix h(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) h(i, j) = (std::popcount(i & j) % 2) ? -1.0 : 1.0;
  return h;
}

// Generates m query rows over n columns. m = 0 selects the family's natural row count.
inline Matrix gen_workload(Family f, std::size_t n, std::size_t m, std::uint64_t seed) {
  if (n == 0) throw BadSpec("workload needs at least one column");
  CounterRng rng(seed);
  switch (f) {
    case Family::Hadamard:
    case Family::ScaledHadamardLB: {
      Matrix h = hadamard(n);
      if (m == 0) m = n;
      if (m > n) throw BadSpec("Hadamard workload has at most n rows");
      Matrix q = h.top_rows(m);
      if (f == Family::ScaledHadamardLB)
        for (std::size_t t = 0; t < m; ++t)
          for (double& x : q.row(t)) x *= std::pow(2.0, 0.5 * static_cast<double>(t));
      return q;
    }
    case Family::PrefixSums: {
      if (m == 0) m = n;
      if (m > n) throw BadSpec("prefix workload has at most n rows");
      Matrix q(m, n);
      for (std::size_t t = 0; t < m; ++t)
        for (std::size_t j = 0; j <= t; ++j) q(t, j) = 1.0;
      return q;
    }
    case Family::Intervals: {
      if (m == 0) m = n;
      Matrix q(m, n);
      for (std::size_t t = 0; t < m; ++t) {
        std::size_t a = rng.below(n), b = rng.below(n);
        if (a > b) std::swap(a, b);
        for (std::size_t j = a; j <= b; ++j) q(t, j) = 1.0;
      }
      return q;
    }
    case Family::HalfplanesGrid: {
      const std::size_t g = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
      if (g * g != n) throw BadSpec("halfplanes grid needs a square number of columns");
      if (m == 0) m = n;
      Matrix q(m, n);
      for (std::size_t t = 0; t < m; ++t) {
        double theta = 2.0 * std::numbers::pi * rng.uniform();
        double ux = std::cos(theta), uy = std::sin(theta);
        double px = rng.uniform() * static_cast<double>(g - 1), py = rng.uniform() * static_cast<double>(g - 1);
        double c = ux * px + uy * py;
        for (std::size_t a = 0; a < g; ++a)
          for (std::size_t b = 0; b < g; ++b)
            if (ux * static_cast<double>(a) + uy * static_cast<double>(b) >= c) q(t, a * g + b) = 1.0;
      }
      return q;
    }
    case Family::RandomBoolean: {
      if (m == 0) m = n;
      Matrix q(m, n);
      for (double& x : q.data()) x = rng.bernoulli(0.5) ? 1.0 : 0.0;
      return q;
    }
  }
  throw BadSpec("unknown workload family");
}

// ---------------------------------------------------------------------------
// Lower bound via the dual of the Frobenius factorization value

struct GammaFResult {
  double value = 0.0;        // tr sqrt(sum_i y_i q_i^T q_i) at the best weights found
  double lower_bound = 0.0;  // value / sqrt(N), a lower bound on the factorization value
  std::vector<double> weights;
};

struct DualAscentConfig {
  std::size_t iterations = 500;         // Frank-Wolfe steps with step size 2/(k+2)
  std::size_t refine_iterations = 100;  // multiplicative fixed-point steps
  double exclude_tol = 1e-12;
};

namespace detail {

struct DualPoint {
  double value = 0.0;
  std::vector<double> grad;  // (1/2) q_i W^{-1/2} q_i^T on the range of W
};

inline DualPoint dual_point(const Matrix& q, std::span<const double> y, double exclude_tol) {
  const std::size_t m = q.rows(), n = q.cols();
  std::vector<RowVec> f;
  for (std::size_t i = 0; i < m; ++i) {
    if (y[i] <= 0.0) continue;
    RowVec r = q.row_vec(i);
    double s = std::sqrt(y[i]);
    for (double& x : r) x *= s;
    f.push_back(std::move(r));
  }
  EigenDecomposition e = gram_eig(f, n);
  DualPoint p;
  for (double l : e.values) p.value += l > 0.0 ? std::sqrt(l) : 0.0;
  const double cut = exclude_tol * std::max(e.max_value(), 1e-300);
  p.grad.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    Vec c = e.project(q.row(i));
    double g = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (e.values[k] > cut) g += c[k] * c[k] / std::sqrt(e.values[k]);
    p.grad[i] = 0.5 * g;
  }
  return p;
}

}  // namespace detail

// Objective tr sqrt(sum_i y_i q_i^T q_i) at the given weights.
inline double dual_objective(const Matrix& q, std::span<const double> y) {
  return detail::dual_point(q, y, 1e-12).value;
}

// Maximizes tr sqrt(sum_i y_i q_i^T q_i) over the simplex. A Frank-Wolfe pass with step
// 2/(k+2) is followed by multiplicative updates y_i <- y_i * 2 g_i / value, which keep the
// weights on the simplex because the objective is homogeneous of degree 1/2. The best
// iterate of either pass is returned.
inline GammaFResult gammaF_dual_ascent(const Matrix& q, DualAscentConfig cfg = {}) {
  const std::size_t m = q.rows(), n = q.cols();
  GammaFResult best;
  if (m == 0 || n == 0) {
    best.weights.assign(m, 0.0);
    return best;
  }
  const std::vector<double> uniform(m, 1.0 / static_cast<double>(m));
  best.value = -1.0;
  auto keep = [&](double value, const std::vector<double>& y) {
    if (value > best.value) {
      best.value = value;
      best.weights = y;
    }
  };

  std::vector<double> y = uniform;
  for (std::size_t k = 0; k <= cfg.iterations; ++k) {
    detail::DualPoint p = detail::dual_point(q, y, cfg.exclude_tol);
    keep(p.value, y);
    if (k == cfg.iterations) break;
    std::size_t arg = static_cast<std::size_t>(std::max_element(p.grad.begin(), p.grad.end()) - p.grad.begin());
    const double eta = 2.0 / (static_cast<double>(k) + 2.0);
    for (double& w : y) w *= (1.0 - eta);
    y[arg] += eta;
  }

  y = uniform;
  for (std::size_t k = 0; k <= cfg.refine_iterations; ++k) {
    detail::DualPoint p = detail::dual_point(q, y, cfg.exclude_tol);
    keep(p.value, y);
    if (k == cfg.refine_iterations || p.value <= 0.0) break;
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      y[i] *= 2.0 * p.grad[i] / p.value;
      s += y[i];
    }
    if (!(s > 0.0)) break;
    for (double& w : y) w /= s;
  }
  best.lower_bound = best.value / std::sqrt(static_cast<double>(n));
  return best;
}

// Primal value sqrt(s tr X) for X = sqrt(W) + ridge, scaled by s = max_i q_i X^{-1} q_i^T so
// every constraint holds. An upper bound on the Frobenius factorization value.
inline double gammaF_upper(const Matrix& q, std::span<const double> weights) {
  if (q.rows() == 0) return 0.0;
  if (weights.size() != q.rows()) throw BadInput("one weight per row required");
  std::vector<RowVec> f;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    if (weights[i] <= 0.0) continue;
    RowVec r = q.row_vec(i);
    for (double& x : r) x *= std::sqrt(weights[i]);
    f.push_back(std::move(r));
  }
  EigenDecomposition e = gram_eig(f, q.cols());
  double tr = 0.0;
  for (double l : e.values) tr += l > 0.0 ? std::sqrt(l) : 0.0;
  const double ridge = 1e-9 * std::max(tr, 1e-300);
  Vec mu(e.values.size());
  tr = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    mu[k] = (e.values[k] > 0.0 ? std::sqrt(e.values[k]) : 0.0) + ridge;
    tr += mu[k];
  }
  double s = 0.0;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    Vec c = e.project(q.row(i));
    double v = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) v += c[k] * c[k] / mu[k];
    s = std::max(s, v);
  }
  return std::sqrt(s * tr);
}

// ---------------------------------------------------------------------------
// Certified upper bounds

// Exact value for rank-one matrices u v^T: ||u||_inf ||v||_inf. Empty if rank exceeds one.
inline std::optional<double> rank_one_value(const Matrix& q) {
  std::size_t pivot_row = q.rows();
  for (std::size_t i = 0; i < q.rows() && pivot_row == q.rows(); ++i)
    if (norm_inf(q.row(i)) > 0.0) pivot_row = i;
  if (pivot_row == q.rows()) return 0.0;
  auto v = q.row(pivot_row);
  std::size_t pc = 0;
  for (std::size_t j = 0; j < q.cols(); ++j)
    if (std::abs(v[j]) > std::abs(v[pc])) pc = j;
  double umax = 0.0;
  const double scale = std::max(1.0, max_abs(q));
  for (std::size_t i = 0; i < q.rows(); ++i) {
    double u = q(i, pc) / v[pc];
    for (std::size_t j = 0; j < q.cols(); ++j)
      if (std::abs(q(i, j) - u * v[j]) > 1e-12 * scale) return std::nullopt;
    umax = std::max(umax, std::abs(u));
  }
  return umax * norm_inf(v);
}

// sum_{k<n} (binom(2k, k) / 4^k)^2, the value of the square-root Toeplitz factorization
// of the n x n lower-triangular all-ones matrix.
inline double prefix_factorization_value(std::size_t n) {
  double c = 1.0, s = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    s += c * c;
    c *= (2.0 * static_cast<double>(k) + 1.0) / (2.0 * static_cast<double>(k) + 2.0);
  }
  return s;
}

inline bool is_prefix_workload(const Matrix& q) {
  for (std::size_t t = 0; t < q.rows(); ++t)
    for (std::size_t j = 0; j < q.cols(); ++j)
      if (q(t, j) != (j <= t ? 1.0 : 0.0)) return false;
  return true;
}

// Value max_i sqrt(q_i X^{-1} q_i^T) * max_j sqrt(X_jj) of the factorization
// Q = (Q X^{-1/2}) X^{1/2} for positive definite X.
inline double factorization_value_from(const Matrix& q, const SymMatrix& x) {
  EigenDecomposition e = sym_eig(x);
  if (e.min_value() <= 0.0) return std::numeric_limits<double>::infinity();
  double rmax = 0.0;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    Vec c = e.project(q.row(i));
    double s = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) s += c[k] * c[k] / e.values[k];
    rmax = std::max(rmax, s);
  }
  double cmax = 0.0;
  for (std::size_t j = 0; j < x.dim(); ++j) cmax = std::max(cmax, x(j, j));
  return std::sqrt(rmax * cmax);
}

struct Gamma2Bounds {
  double lower = 0.0;
  double upper = 0.0;
  GammaFResult dual;
};

// Smallest value among certified factorizations: trivial ones, rank one, the prefix
// closed form and the factorization induced by the dual weights.
inline double gamma2_upper(const Matrix& q, std::span<const double> dual_weights = {}) {
  double best = std::min(norm_2_to_inf(q), norm_1_to_2(q));
  if (auto r1 = rank_one_value(q)) best = std::min(best, *r1);
  if (q.rows() > 0 && is_prefix_workload(q)) best = std::min(best, prefix_factorization_value(q.rows()));
  if (dual_weights.size() == q.rows() && q.rows() > 0) {
    SymMatrix w(q.cols());
    for (std::size_t i = 0; i < q.rows(); ++i) w.add_outer(q.row(i), dual_weights[i]);
    SymMatrix x = psd_sqrt(w);
    const double ridge = 1e-9 * std::max(x.trace(), 1e-300);
    x.axpy(1.0, SymMatrix::identity(q.cols(), ridge));
    best = std::min(best, factorization_value_from(q, x));
  }
  return best;
}

inline Gamma2Bounds gamma2_bounds(const Matrix& q, DualAscentConfig cfg = {}) {
  Gamma2Bounds b;
  b.dual = gammaF_dual_ascent(q, cfg);
  b.lower = b.dual.lower_bound;
  b.upper = gamma2_upper(q, b.dual.weights);
  return b;
}

// ---------------------------------------------------------------------------
// Online lower-bound harness on the scaled Hadamard stream

// Full view of a factorization after step t: the left row and every right row so far.
struct Snapshot {
  Vec left;
  std::vector<RowVec> right;
};

using SnapshotFactorizer = std::function<Snapshot(std::span<const double> q)>;

struct LowerBoundReport {
  std::size_t n = 0;
  std::vector<double> ratios;  // ||ell_t|| / 2^{t/2}
  double ratio = 0.0;
  double bound = 0.0;  // sqrt(N/2) / sqrt(2)
  bool valid_online = true;
  std::string invalid_reason;
  bool meets_bound() const { return valid_online && ratio >= bound; }
};

// Wraps an online factorizer into snapshots.
inline SnapshotFactorizer snapshots_of(std::shared_ptr<OnlineRowFactorizer> f) {
  auto g = std::make_shared<GrowingFactorization>(f->dim());
  return [f, g](std::span<const double> q) {
    g->append(f->step(q));
    Snapshot s;
    s.right = g->right_rows();
    s.left.assign(g->num_right_rows(), 0.0);
    for (const Coef& c : g->left_row(g->num_left_rows() - 1)) s.left[c.id] += c.value;
    return s;
  };
}

// Offline baseline that refactors each prefix from scratch: R_t = Q_t / ||Q_t||_{1->2}.
// Its right factor is not append-only, so it is not an online algorithm.
inline SnapshotFactorizer prefix_refactoring_baseline(std::size_t n) {
  auto rows = std::make_shared<std::vector<RowVec>>();
  return [rows, n](std::span<const double> q) {
    rows->emplace_back(q.begin(), q.end());
    double c = norm_1_to_2(Matrix::from_rows(*rows));
    Snapshot s;
    for (const RowVec& r : *rows) {
      RowVec x = r;
      for (double& v : x) v /= c;
      s.right.push_back(std::move(x));
    }
    s.left.assign(rows->size(), 0.0);
    s.left.back() = c;
    (void)n;
    return s;
  };
}

inline LowerBoundReport lowerbound_harness(std::size_t n, SnapshotFactorizer f) {
  LowerBoundReport rep;
  rep.n = n;
  rep.bound = std::sqrt(static_cast<double>(n) / 2.0) / std::sqrt(2.0);
  Matrix q = gen_workload(Family::ScaledHadamardLB, n, n, 0);
  std::vector<RowVec> prev;
  for (std::size_t t = 0; t < n; ++t) {
    Snapshot s = f(q.row(t));
    // Append-only: the previous right factor must be a prefix of the new one.
    if (rep.valid_online) {
      bool prefix = s.right.size() >= prev.size();
      for (std::size_t i = 0; prefix && i < prev.size(); ++i) prefix = s.right[i] == prev[i];
      if (!prefix) {
        rep.valid_online = false;
        rep.invalid_reason = "right factor rewritten at step " + std::to_string(t + 1);
      }
    }
    Vec rec(n, 0.0);
    Vec colnorm2(n, 0.0);
    for (std::size_t i = 0; i < s.right.size(); ++i)
      for (std::size_t j = 0; j < n; ++j) {
        rec[j] += s.left[i] * s.right[i][j];
        colnorm2[j] += s.right[i][j] * s.right[i][j];
      }
    for (std::size_t j = 0; j < n && rep.valid_online; ++j) {
      if (std::abs(rec[j] - q(t, j)) > 1e-6 * (1.0 + norm_inf(q.row(t)))) {
        rep.valid_online = false;
        rep.invalid_reason = "reconstruction fails at step " + std::to_string(t + 1);
      } else if (colnorm2[j] > 1.0 + 1e-9) {
        rep.valid_online = false;
        rep.invalid_reason = "column norm exceeds one at step " + std::to_string(t + 1);
      }
    }
    // Steps are 1-based in the ratio ||ell_t|| / 2^{t/2}.
    double r = norm2(s.left) / std::pow(2.0, 0.5 * static_cast<double>(t + 1));
    rep.ratios.push_back(r);
    rep.ratio = std::max(rep.ratio, r);
    prev = std::move(s.right);
  }
  return rep;
}

}  // namespace onlinegamma2
