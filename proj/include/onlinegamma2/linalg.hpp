#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "onlinegamma2/errors.hpp"

namespace onlinegamma2 {

using Vec = std::vector<double>;
using RowVec = Vec;

// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix from_rows(const std::vector<Vec>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.cols_) throw BadInput("ragged rows");
      std::copy(rows[i].begin(), rows[i].end(), m.data_.begin() + i * m.cols_);
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  Vec row_vec(std::size_t i) const {
    auto r = row(i);
    return Vec(r.begin(), r.end());
  }
  Vec col_vec(std::size_t j) const {
    Vec c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  // First k rows.
  Matrix top_rows(std::size_t k) const {
    Matrix t(std::min(k, rows_), cols_);
    std::copy(data_.begin(), data_.begin() + t.rows_ * cols_, t.data_.begin());
    return t;
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw BadInput("matrix product shape mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
  Matrix c = a;
  for (std::size_t i = 0; i < c.data().size(); ++i) c.data()[i] -= b.data()[i];
  return c;
}

inline Matrix operator+(const Matrix& a, const Matrix& b) {
  Matrix c = a;
  for (std::size_t i = 0; i < c.data().size(); ++i) c.data()[i] += b.data()[i];
  return c;
}

inline Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (double& x : c.data()) x *= s;
  return c;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

inline double max_abs(const Matrix& a) { return norm_inf(a.data()); }

inline bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double x) { return std::isfinite(x); });
}

// Maximum column norm, i.e. the 1->2 operator norm.
inline double norm_1_to_2(const Matrix& a) {
  double best = 0.0;
  for (std::size_t j = 0; j < a.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, j) * a(i, j);
    best = std::max(best, s);
  }
  return std::sqrt(best);
}

// Maximum row norm, i.e. the 2->inf operator norm.
inline double norm_2_to_inf(const Matrix& a) {
  double best = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) best = std::max(best, dot(a.row(i), a.row(i)));
  return std::sqrt(best);
}

// Square matrix kept exactly symmetric.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t n) : m_(n, n) {}
  // Symmetrizes by averaging with the transpose.
  explicit SymMatrix(const Matrix& a) : m_(a.rows(), a.cols()) {
    if (a.rows() != a.cols()) throw BadInput("SymMatrix needs a square matrix");
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < a.cols(); ++j) m_(i, j) = 0.5 * (a(i, j) + a(j, i));
  }

  static SymMatrix identity(std::size_t n, double scale = 1.0) {
    SymMatrix s(n);
    for (std::size_t i = 0; i < n; ++i) s.m_(i, i) = scale;
    return s;
  }

  static SymMatrix diagonal(std::span<const double> d) {
    SymMatrix s(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) s.m_(i, i) = d[i];
    return s;
  }

  std::size_t dim() const { return m_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  const Matrix& matrix() const { return m_; }

  // this += w * v^T v
  void add_outer(std::span<const double> v, double w) {
    for (std::size_t i = 0; i < dim(); ++i) {
      double wi = w * v[i];
      if (wi == 0.0) continue;
      for (std::size_t j = 0; j < dim(); ++j) m_(i, j) += wi * v[j];
    }
  }

  void axpy(double s, const SymMatrix& other) {
    for (std::size_t k = 0; k < m_.data().size(); ++k) m_.data()[k] += s * other.m_.data()[k];
  }

  double trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) t += m_(i, i);
    return t;
  }

  double max_abs() const { return onlinegamma2::max_abs(m_); }

  // v A v^T
  double quad(std::span<const double> v) const {
    double s = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) s += v[i] * dot(m_.row(i), v);
    return s;
  }

  Vec apply(std::span<const double> v) const {
    Vec out(dim());
    for (std::size_t i = 0; i < dim(); ++i) out[i] = dot(m_.row(i), v);
    return out;
  }

 private:
  friend SymMatrix operator-(const SymMatrix&, const SymMatrix&);
  friend SymMatrix operator+(const SymMatrix&, const SymMatrix&);
  friend SymMatrix operator*(double, const SymMatrix&);
  Matrix m_;
};

inline SymMatrix operator-(const SymMatrix& a, const SymMatrix& b) {
  SymMatrix c = a;
  c.axpy(-1.0, b);
  return c;
}

inline SymMatrix operator+(const SymMatrix& a, const SymMatrix& b) {
  SymMatrix c = a;
  c.axpy(1.0, b);
  return c;
}

inline SymMatrix operator*(double s, const SymMatrix& a) {
  SymMatrix c(a.dim());
  c.axpy(s, a);
  return c;
}

// Eigenvalues ascending; column k of `vectors` pairs with values[k].
struct EigenDecomposition {
  Vec values;
  Matrix vectors;

  double min_value() const { return values.empty() ? 0.0 : values.front(); }
  double max_value() const { return values.empty() ? 0.0 : values.back(); }

  // V diag(f(lambda)) V^T
  template <class F>
  SymMatrix map(F f) const {
    const std::size_t n = values.size();
    Matrix out(n, n);
    for (std::size_t k = 0; k < n; ++k) {
      double fk = f(values[k]);
      if (fk == 0.0) continue;
      for (std::size_t i = 0; i < n; ++i) {
        double vi = fk * vectors(i, k);
        if (vi == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) out(i, j) += vi * vectors(j, k);
      }
    }
    return SymMatrix(out);
  }

  // Coordinates of v in the eigenbasis.
  Vec project(std::span<const double> v) const {
    const std::size_t n = values.size();
    Vec c(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (v[i] == 0.0) continue;
      for (std::size_t k = 0; k < n; ++k) c[k] += v[i] * vectors(i, k);
    }
    return c;
  }
};

inline constexpr double kJacobiTol = 1e-12;

// Cyclic Jacobi eigendecomposition of a symmetric matrix.
inline EigenDecomposition sym_eig(const SymMatrix& s) {
  const std::size_t n = s.dim();
  Matrix a = s.matrix();
  Matrix v = Matrix::identity(n);
  if (!all_finite(a.data())) throw NumericalFailure("sym_eig: non-finite entry");

  double total = 0.0;
  for (double x : a.data()) total += x * x;
  const double target = kJacobiTol * kJacobiTol * total;
  auto off_mass = [&] {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += 2.0 * a(i, j) * a(i, j);
    return off;
  };

  const std::size_t max_sweeps = std::max<std::size_t>(1, 100 * n * n);
  std::size_t sweep = 0;
  while (off_mass() > target) {
    if (++sweep > max_sweeps) throw NumericalFailure("sym_eig: Jacobi did not converge");
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = a(p, q);
        if (apq == 0.0) continue;
        double app = a(p, p), aqq = a(q, q);
        // Skip entries already negligible against both diagonal entries.
        if (sweep > 3 && std::abs(apq) * 1e18 < std::abs(app) &&
            std::abs(apq) * 1e18 < std::abs(aqq)) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        double theta = (aqq - app) / (2.0 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
  EigenDecomposition e;
  e.values.resize(n);
  e.vectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    e.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) e.vectors(i, k) = v(i, order[k]);
  }
  return e;
}

// Eigendecomposition of B^T B computed from B by one-sided Jacobi. Small eigenvalues keep
// their accuracy relative to the largest singular value rather than its square.
inline EigenDecomposition gram_eig(const std::vector<RowVec>& b, std::size_t n) {
  const std::size_t t = b.size();
  // Column-major copy of B.
  std::vector<double> a(n * t);
  for (std::size_t i = 0; i < t; ++i) {
    if (b[i].size() != n) throw BadInput("gram_eig: ragged rows");
    for (std::size_t j = 0; j < n; ++j) a[j * t + i] = b[i][j];
  }
  if (!all_finite(a)) throw NumericalFailure("gram_eig: non-finite entry");
  Matrix v = Matrix::identity(n);
  auto col = [&](std::size_t j) { return a.data() + j * t; };
  double fro2 = 0.0;
  for (double x : a) fro2 += x * x;
  // Inner products between columns that are pure rounding noise.
  const double negligible = 1e-30 * fro2;
  const std::size_t max_sweeps = std::max<std::size_t>(1, 100 * n * n);
  for (std::size_t sweep = 0;; ++sweep) {
    if (sweep >= max_sweeps) throw NumericalFailure("gram_eig: one-sided Jacobi did not converge");
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double* ap = col(p);
        double* aq = col(q);
        double alpha = 0.0, beta = 0.0, g = 0.0;
        for (std::size_t i = 0; i < t; ++i) {
          alpha += ap[i] * ap[i];
          beta += aq[i] * aq[i];
          g += ap[i] * aq[i];
        }
        if (std::abs(g) <= 1e-15 * std::sqrt(alpha * beta) || std::abs(g) <= negligible) continue;
        rotated = true;
        double zeta = (beta - alpha) / (2.0 * g);
        double tn = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        double c = 1.0 / std::sqrt(1.0 + tn * tn);
        double sn = c * tn;
        for (std::size_t i = 0; i < t; ++i) {
          double x = ap[i], y = aq[i];
          ap[i] = c * x - sn * y;
          aq[i] = sn * x + c * y;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double x = v(k, p), y = v(k, q);
          v(k, p) = c * x - sn * y;
          v(k, q) = sn * x + c * y;
        }
      }
    }
    if (!rotated) break;
  }
  Vec sigma2(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < t; ++i) s += col(j)[i] * col(j)[i];
    sigma2[j] = s;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return sigma2[i] < sigma2[j]; });
  EigenDecomposition e;
  e.values.resize(n);
  e.vectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    e.values[k] = sigma2[order[k]];
    for (std::size_t i = 0; i < n; ++i) e.vectors(i, k) = v(i, order[k]);
  }
  return e;
}

inline constexpr double kClampTol = 1e-9;
inline constexpr double kDropTol = 1e-9;
inline constexpr double kRankTol = 1e-7;

inline void check_psd(const EigenDecomposition& e, double scale, double clamp_tol) {
  if (!e.values.empty() && e.min_value() < -clamp_tol * (1.0 + scale)) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "minimum eigenvalue %.3e below clamp tolerance", e.min_value());
    throw NotPSD(buf);
  }
}

// Symmetric square root; small negative eigenvalues are clamped to zero.
inline SymMatrix psd_sqrt(const SymMatrix& a, double clamp_tol = kClampTol) {
  EigenDecomposition e = sym_eig(a);
  check_psd(e, a.max_abs(), clamp_tol);
  return e.map([](double x) { return x > 0.0 ? std::sqrt(x) : 0.0; });
}

// Rows M with M^T M equal to the clamped matrix; rows shorter than drop_tol are dropped.
inline std::vector<RowVec> psd_factor(const SymMatrix& d, double clamp_tol = kClampTol,
                                      double drop_tol = kDropTol) {
  EigenDecomposition e = sym_eig(d);
  check_psd(e, d.max_abs(), clamp_tol);
  std::vector<RowVec> rows;
  for (std::size_t k = e.values.size(); k-- > 0;) {
    if (e.values[k] <= 0.0) break;
    double s = std::sqrt(e.values[k]);
    if (s < drop_tol) break;
    RowVec r = e.vectors.col_vec(k);
    for (double& x : r) x *= s;
    rows.push_back(std::move(r));
  }
  return rows;
}

// v = gram^+ q^T. The squared norm of the induced left row is dot(q, v).
inline Vec gram_pinv_solve(const SymMatrix& gram, std::span<const double> q,
                           double rank_tol = kRankTol) {
  EigenDecomposition e = sym_eig(gram);
  const double cut = rank_tol * std::max(1.0, std::abs(e.max_value()));
  Vec c = e.project(q);
  const std::size_t n = gram.dim();
  Vec v(n, 0.0);
  double residual2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (e.values[k] <= cut) {
      residual2 += c[k] * c[k];
      continue;
    }
    double w = c[k] / e.values[k];
    for (std::size_t i = 0; i < n; ++i) v[i] += w * e.vectors(i, k);
  }
  if (std::sqrt(residual2) > rank_tol * std::max(1.0, norm2(q)))
    throw NotInSpan("query is not in the row space of the factor");
  return v;
}

}  // namespace onlinegamma2
