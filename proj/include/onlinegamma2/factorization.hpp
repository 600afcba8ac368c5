#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "onlinegamma2/linalg.hpp"

namespace onlinegamma2 {

// One entry of a sparse left row, keyed by right-row id.
struct Coef {
  std::size_t id;
  double value;
};
using SparseRow = std::vector<Coef>;

// A right row together with its stable id. Ids are assigned in append order.
struct RightRow {
  std::size_t id;
  RowVec entries;
};

// Dual witness that the optimal factorization value exceeds the target.
struct DualCertificate {
  std::vector<double> weights;  // one weight per processed row
  double sum_y = 0.0;
  double dual_value = 0.0;  // trace of the square root of the weighted Gram matrix
};

// Result of one online step. When `asserted` is set, `left` and `new_rows` are empty.
struct StepResult {
  bool asserted = false;
  std::vector<RightRow> new_rows;
  SparseRow left;
  std::optional<DualCertificate> certificate;
};

inline double sparse_norm2(const SparseRow& r) {
  double s = 0.0;
  for (const Coef& c : r) s += c.value * c.value;
  return std::sqrt(s);
}

// Online factorizer for row arrivals: each step appends right rows and emits a left row.
class OnlineRowFactorizer {
 public:
  virtual ~OnlineRowFactorizer() = default;
  virtual StepResult step(std::span<const double> q) = 0;
  virtual std::size_t dim() const = 0;
};

using FactorizerFactory = std::function<std::unique_ptr<OnlineRowFactorizer>(std::size_t dim)>;

// Accumulated factorization L_t R_t with append-only right rows.
class GrowingFactorization {
 public:
  explicit GrowingFactorization(std::size_t dim) : dim_(dim), col_norm2_(dim, 0.0) {}

  std::size_t dim() const { return dim_; }
  std::size_t num_right_rows() const { return right_.size(); }
  std::size_t num_left_rows() const { return left_.size(); }
  const std::vector<RowVec>& right_rows() const { return right_; }
  const std::vector<SparseRow>& left_rows() const { return left_; }
  const SparseRow& left_row(std::size_t t) const { return left_[t]; }

  void append_right(const RightRow& r) {
    if (r.id != right_.size()) throw ContractViolation("right rows must be appended in id order");
    if (r.entries.size() != dim_) throw ContractViolation("right row width mismatch");
    for (std::size_t j = 0; j < dim_; ++j) col_norm2_[j] += r.entries[j] * r.entries[j];
    right_.push_back(r.entries);
  }

  void append(const StepResult& s) {
    for (const RightRow& r : s.new_rows) append_right(r);
    for (const Coef& c : s.left)
      if (c.id >= right_.size()) throw ContractViolation("left coefficient refers to a missing row");
    left_.push_back(s.left);
  }

  // ell_t R_t
  Vec reconstruct(std::size_t t) const {
    Vec out(dim_, 0.0);
    for (const Coef& c : left_[t])
      for (std::size_t j = 0; j < dim_; ++j) out[j] += c.value * right_[c.id][j];
    return out;
  }

  double col_norm(std::size_t j) const { return std::sqrt(col_norm2_[j]); }
  double max_col_norm() const {
    double m = 0.0;
    for (double x : col_norm2_) m = std::max(m, x);
    return std::sqrt(m);
  }
  double frobenius2() const {
    double s = 0.0;
    for (double x : col_norm2_) s += x;
    return s;
  }

 private:
  std::size_t dim_;
  std::vector<RowVec> right_;
  std::vector<SparseRow> left_;
  Vec col_norm2_;
};

}  // namespace onlinegamma2
