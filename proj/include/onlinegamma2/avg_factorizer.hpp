#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "onlinegamma2/errors.hpp"
#include "onlinegamma2/factorization.hpp"
#include "onlinegamma2/linalg.hpp"

namespace onlinegamma2 {

// q X^{-1} q^T for positive definite X.
inline double dominance_margin(const SymMatrix& x, std::span<const double> q) {
  EigenDecomposition e = sym_eig(x);
  if (e.values.empty()) return 0.0;
  if (e.min_value() <= 1e-14 * std::max(1.0, e.max_value())) throw NotPD("dominance_margin: X is not positive definite");
  Vec c = e.project(q);
  double m = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) m += c[k] * c[k] / e.values[k];
  return m;
}

// Trace of the square root of sum_i y_i q_i^T q_i.
inline double weighted_sqrt_trace(const Matrix& rows, std::span<const double> y) {
  SymMatrix w(rows.cols());
  for (std::size_t i = 0; i < rows.rows() && i < y.size(); ++i) w.add_outer(rows.row(i), y[i]);
  EigenDecomposition e = sym_eig(w);
  double s = 0.0;
  for (double l : e.values) s += l > 0.0 ? std::sqrt(l) : 0.0;
  return s;
}

// True iff the weights sum below one and reproduce the dual value gamma * sqrt(N).
inline bool verify_certificate(const DualCertificate& cert, const Matrix& rows, double gamma) {
  double sum = 0.0;
  for (double y : cert.weights) {
    if (y < 0.0 || !std::isfinite(y)) return false;
    sum += y;
  }
  if (!(sum < 1.0)) return false;
  const double target = gamma * std::sqrt(static_cast<double>(rows.cols()));
  return std::abs(weighted_sqrt_trace(rows, cert.weights) - target) <= 1e-6 * target;
}

struct AvgFactorizerConfig {
  double c = std::sqrt(3.0);
  double bin_search_tol = 1e-10;
  double tie_tol = 1e-9;
};

enum class FactorizerStatus { Active, Asserted };

// Online average-case factorizer for row arrivals over N columns.
// Keeps X = gamma^2 I + 2 gamma sqrt(N) sqrt(W) with W = sum_i y_i q_i^T q_i and right rows
// whose Gram matrix equals X / (C^2 gamma^2). Asserts once the trace budget C^2 gamma^2 N
// would be exceeded before q X^{-1} q^T <= 1.
class AvgFactorizer : public OnlineRowFactorizer {
 public:
  AvgFactorizer(double gamma, std::size_t n, AvgFactorizerConfig cfg = {})
      : gamma_(gamma), n_(n), cfg_(cfg), w_(n) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw BadInput("gamma must be positive");
    if (n == 0) throw BadInput("dimension must be positive");
    c2g2_ = cfg_.c * cfg_.c * gamma_ * gamma_;
    budget_ = c2g2_ * static_cast<double>(n_);
    sqrt_coeff_ = 2.0 * gamma_ * std::sqrt(static_cast<double>(n_));
    eig_w_ = sym_eig(w_);
    mu_.assign(n_, gamma_ * gamma_);
    x_ = SymMatrix::identity(n_, gamma_ * gamma_);
    const double s = std::sqrt(gamma_ * gamma_ / c2g2_);
    for (std::size_t i = 0; i < n_; ++i) {
      RowVec r(n_, 0.0);
      r[i] = s;
      pending_.push_back(push_row(std::move(r)));
    }
  }

  std::size_t dim() const override { return n_; }
  double gamma() const { return gamma_; }
  double trace_budget() const { return budget_; }
  FactorizerStatus status() const { return status_; }
  const SymMatrix& x() const { return x_; }
  const SymMatrix& w() const { return w_; }
  const std::vector<double>& y_history() const { return y_; }
  const std::vector<RowVec>& right_rows() const { return rows_; }
  // Step index (1-based) at which each right row was created; 0 for the initial rows.
  const std::vector<std::size_t>& row_steps() const { return row_step_; }
  const std::optional<DualCertificate>& certificate() const { return cert_; }

  StepResult step(std::span<const double> q) override {
    if (status_ == FactorizerStatus::Asserted) throw InvalidState("factorizer already asserted");
    if (q.size() != n_) throw BadInput("row width mismatch");
    if (!all_finite(q)) throw BadInput("non-finite row entry");
    ++t_;

    StepResult out;
    out.new_rows = std::move(pending_);
    pending_.clear();

    if (norm_inf(q) == 0.0) {
      y_.push_back(0.0);
      return out;
    }

    Eval at0 = eval_from(eig_w_, q);
    double y = 0.0;
    Eval chosen = at0;
    if (at0.margin > 1.0) {
      auto stop = [&](const Eval& e) { return e.margin <= 1.0 || e.trace >= budget_; };
      double lo = 0.0, hi = 0.0;
      Eval elo = at0, ehi = at0;
      // Budget already reached at y = 0 (within the tie tolerance of the previous step).
      if (!stop(at0)) {
        hi = 1e-12;
        ehi = evaluate(hi, q);
        while (!stop(ehi)) {
          lo = hi;
          elo = ehi;
          hi *= 2.0;
          ehi = evaluate(hi, q);
          check_monotone(elo, ehi);
        }
        bisect(lo, hi, elo, ehi, q, stop);
      }
      if (ehi.margin <= 1.0 && ehi.trace <= budget_ * (1.0 + cfg_.tie_tol)) {
        y = hi;
        chosen = std::move(ehi);
      } else {
        // Budget reached first. Locate the margin crossing to resolve near ties.
        double mlo = hi, mhi = hi;
        Eval emlo = ehi, emhi = ehi;
        if (mhi == 0.0) {
          mhi = 1e-12;
          emhi = evaluate(mhi, q);
        }
        auto margin_ok = [](const Eval& e) { return e.margin <= 1.0; };
        while (!margin_ok(emhi) && emhi.trace <= budget_ * (1.0 + cfg_.tie_tol)) {
          mlo = mhi;
          emlo = emhi;
          mhi *= 2.0;
          emhi = evaluate(mhi, q);
        }
        if (margin_ok(emhi)) bisect(mlo, mhi, emlo, emhi, q, margin_ok);
        if (margin_ok(emhi) && emhi.trace <= budget_ * (1.0 + cfg_.tie_tol)) {
          y = mhi;
          chosen = std::move(emhi);
        } else {
          return assert_with(hi, ehi, std::move(out));
        }
      }
    }
    return extend(y, chosen, q, std::move(out));
  }

 private:
  struct Eval {
    EigenDecomposition eig;  // of W + y q^T q
    Vec mu;                  // eigenvalues of X(y)
    double margin = 0.0;
    double trace = 0.0;
  };

  Eval eval_from(const EigenDecomposition& e, std::span<const double> q) const {
    Eval r;
    r.eig = e;
    r.mu.resize(n_);
    Vec c = e.project(q);
    for (std::size_t k = 0; k < n_; ++k) {
      double l = e.values[k] > 0.0 ? e.values[k] : 0.0;
      r.mu[k] = gamma_ * gamma_ + sqrt_coeff_ * std::sqrt(l);
      r.trace += r.mu[k];
      r.margin += c[k] * c[k] / r.mu[k];
    }
    return r;
  }

  Eval evaluate(double y, std::span<const double> q) {
    factor_.emplace_back(q.begin(), q.end());
    const double s = std::sqrt(y);
    for (double& v : factor_.back()) v *= s;
    EigenDecomposition e = gram_eig(factor_, n_);
    factor_.pop_back();
    return eval_from(e, q);
  }

  // The margin must be non-increasing in y.
  static void check_monotone(const Eval& lo, const Eval& hi) {
    if (hi.margin > lo.margin + 1e-9 * (1.0 + lo.margin))
      throw NumericalFailure("dominance margin is not monotone in y");
  }

  template <class Pred>
  void bisect(double& lo, double& hi, Eval& elo, Eval& ehi, std::span<const double> q, Pred stop) {
    while (hi - lo > cfg_.bin_search_tol * hi) {
      double mid = 0.5 * (lo + hi);
      if (!(mid > lo && mid < hi)) break;
      Eval em = evaluate(mid, q);
      check_monotone(elo, em);
      check_monotone(em, ehi);
      if (stop(em)) {
        hi = mid;
        ehi = std::move(em);
      } else {
        lo = mid;
        elo = std::move(em);
      }
    }
  }

  StepResult extend(double y, Eval& e, std::span<const double> q, StepResult out) {
    y_.push_back(y);
    if (y > 0.0) {
      w_.add_outer(q, y);
      factor_.emplace_back(q.begin(), q.end());
      for (double& v : factor_.back()) v *= std::sqrt(y);
      SymMatrix x_new = e.eig.map([&](double l) {
        return gamma_ * gamma_ + sqrt_coeff_ * std::sqrt(l > 0.0 ? l : 0.0);
      });
      SymMatrix delta = (1.0 / c2g2_) * (x_new - x_);
      for (RowVec& r : psd_factor(delta)) out.new_rows.push_back(push_row(std::move(r)));
      x_ = std::move(x_new);
      eig_w_ = std::move(e.eig);
      mu_ = std::move(e.mu);
    }
    // v = (X / C^2 gamma^2)^{-1} q^T, solved in the shared eigenbasis of W and X.
    Vec c = eig_w_.project(q);
    Vec v(n_, 0.0);
    for (std::size_t k = 0; k < n_; ++k) {
      double s = c2g2_ * c[k] / mu_[k];
      for (std::size_t i = 0; i < n_; ++i) v[i] += s * eig_w_.vectors(i, k);
    }
    out.left.reserve(rows_.size());
    for (std::size_t j = 0; j < rows_.size(); ++j) {
      double l = dot(rows_[j], v);
      if (l != 0.0) out.left.push_back({j, l});
    }
    return out;
  }

  StepResult assert_with(double y, const Eval& e, StepResult out) {
    status_ = FactorizerStatus::Asserted;
    DualCertificate cert;
    cert.weights = y_;
    cert.weights.push_back(y);
    for (double v : cert.weights) cert.sum_y += v;
    for (double l : e.eig.values) cert.dual_value += l > 0.0 ? std::sqrt(l) : 0.0;
    cert_ = cert;
    StepResult r;
    r.asserted = true;
    r.certificate = std::move(cert);
    (void)out;
    return r;
  }

  RightRow push_row(RowVec r) {
    RightRow rr{rows_.size(), r};
    rows_.push_back(std::move(r));
    row_step_.push_back(t_);
    return rr;
  }

  double gamma_;
  std::size_t n_;
  AvgFactorizerConfig cfg_;
  double c2g2_ = 0.0;
  double budget_ = 0.0;
  double sqrt_coeff_ = 0.0;
  SymMatrix w_;
  std::vector<RowVec> factor_;  // rows sqrt(y_i) q_i, so that W = factor^T factor
  SymMatrix x_;
  EigenDecomposition eig_w_;
  Vec mu_;
  std::vector<RowVec> rows_;
  std::vector<std::size_t> row_step_;
  std::vector<RightRow> pending_;
  std::vector<double> y_;
  std::size_t t_ = 0;
  FactorizerStatus status_ = FactorizerStatus::Active;
  std::optional<DualCertificate> cert_;
};

}  // namespace onlinegamma2
