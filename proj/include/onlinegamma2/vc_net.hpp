#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "onlinegamma2/errors.hpp"
#include "onlinegamma2/factorization.hpp"
#include "onlinegamma2/linalg.hpp"

namespace onlinegamma2 {

struct VCNetConfig {
  std::size_t expected_m = 0;  // 0: unknown, handled by doubling
  double d = 2.0;              // shatter-function exponent, at least 2
  double norm_c = 8.0;         // right rows are divided by this, left rows multiplied
  double audit_c = 10.0;       // packing audit flags |L_i| / 2^{d i} above this
};

struct PackingAudit {
  std::vector<double> ratios;  // |L_i| / 2^{d i}
  bool ok = true;
};

// Hierarchical net over Boolean rows. Layer i holds stored vectors pairwise more than
// 2^{-i} N apart in squared distance; each new row links to its nearest stored vector in the
// highest layer where one lies within that radius, creating one difference edge.
class VCNet : public OnlineRowFactorizer {
 public:
  struct Node {
    std::vector<std::uint64_t> bits;
    std::size_t parent = kNone;  // index in the layer below
    std::size_t row = kNone;     // right-row id for a difference edge to the parent
    double eps = 0.0;            // weight of that edge
  };
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  VCNet(std::size_t n, VCNetConfig cfg = {}) : n_(n), cfg_(cfg), words_((n + 63) / 64) {
    if (n == 0) throw BadInput("dimension must be positive");
    if (!(cfg.d >= 2.0)) throw BadInput("shatter exponent must be at least two");
    h_ = static_cast<std::size_t>(std::bit_width(n));  // smallest h with 2^{-h} N < 1
    m_hat_ = cfg.expected_m > 0 ? static_cast<double>(cfg.expected_m) : 1.0;
    reset_layers();
  }

  std::size_t dim() const override { return n_; }
  std::size_t height() const { return h_; }
  const std::vector<std::vector<Node>>& layers() const { return layers_; }
  std::size_t num_rows() const { return rows_; }
  double m_hat() const { return m_hat_; }

  // eps_i = m^{(d-1)/(2d)} (1 + |h* - i|)^{-3/2} with h* = ceil(log2(m) / d).
  double eps(std::size_t i) const {
    const double hstar = std::ceil(std::log2(m_hat_) / cfg_.d);
    return std::pow(m_hat_, (cfg_.d - 1.0) / (2.0 * cfg_.d)) *
           std::pow(1.0 + std::abs(hstar - static_cast<double>(i)), -1.5);
  }

  // Squared norm bound C^2 sum_i eps_i^2 on every left row.
  double left_norm2_bound() const {
    double s = 0.0;
    for (std::size_t i = 1; i <= h_; ++i) s += eps(i) * eps(i);
    return cfg_.norm_c * cfg_.norm_c * s;
  }

  // Layer at which the most recent insert linked to an existing vector.
  std::size_t last_link_layer() const { return last_link_; }
  std::size_t inserts() const { return t_; }
  std::size_t restarts() const { return restarts_; }

  StepResult step(std::span<const double> q) override {
    if (q.size() != n_) throw BadInput("row width mismatch");
    std::vector<std::uint64_t> bits(words_, 0);
    for (std::size_t j = 0; j < n_; ++j) {
      if (q[j] == 1.0)
        bits[j / 64] |= std::uint64_t{1} << (j % 64);
      else if (q[j] != 0.0)
        throw BadInput("VC net rows must be Boolean");
    }
    ++t_;
    // Unknown m: once the guess is exceeded, double it and start a fresh net. Rows of
    // earlier phases stay in R but are no longer referenced.
    if (cfg_.expected_m == 0 && static_cast<double>(++phase_t_) > m_hat_) {
      m_hat_ *= 2.0;
      phase_t_ = 1;
      ++restarts_;
      reset_layers();
    }

    StepResult out;
    std::size_t child = kNone;  // copy created in the layer above
    std::size_t leaf = kNone;
    for (std::size_t i = h_ + 1; i-- > 0;) {
      auto [best, dist] = nearest(i, bits);
      // dist <= 2^{-i} N, compared exactly in integers.
      const bool within = best != kNone && (static_cast<unsigned __int128>(dist) << i) <= n_;
      if (within) {
        last_link_ = i;
        if (i == h_) {
          leaf = best;
        } else {
          Node& c = layers_[i + 1][child];
          c.parent = best;
          const double e = eps(i + 1);
          RowVec r(n_, 0.0);
          const Node& p = layers_[i][best];
          for (std::size_t j = 0; j < n_; ++j) {
            int a = (c.bits[j / 64] >> (j % 64)) & 1, b = (p.bits[j / 64] >> (j % 64)) & 1;
            r[j] = static_cast<double>(a - b) / (e * cfg_.norm_c);
          }
          c.row = rows_++;
          c.eps = e;
          out.new_rows.push_back({c.row, std::move(r)});
        }
        break;
      }
      Node copy;
      copy.bits = bits;
      layers_[i].push_back(std::move(copy));
      const std::size_t idx = layers_[i].size() - 1;
      if (child != kNone) layers_[i + 1][child].parent = idx;
      if (i == h_) leaf = idx;
      child = idx;
    }
    // Walk from the leaf to the root collecting difference edges.
    std::size_t node = leaf;
    for (std::size_t i = h_; i >= 1; --i) {
      const Node& nd = layers_[i][node];
      if (nd.row != kNone) out.left.push_back({nd.row, nd.eps * cfg_.norm_c});
      node = nd.parent;
    }
    return out;
  }

  // Ratios |L_i| / 2^{d i} for a claimed exponent d, which may differ from the configured one.
  PackingAudit packing_audit(double d) const {
    PackingAudit a;
    for (std::size_t i = 0; i <= h_; ++i) {
      double r = static_cast<double>(layers_[i].size()) / std::pow(2.0, d * static_cast<double>(i));
      a.ratios.push_back(r);
      if (r > cfg_.audit_c) a.ok = false;
    }
    return a;
  }
  PackingAudit packing_audit() const { return packing_audit(cfg_.d); }

  static std::size_t hamming(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
    std::size_t d = 0;
    for (std::size_t w = 0; w < a.size(); ++w) d += static_cast<std::size_t>(std::popcount(a[w] ^ b[w]));
    return d;
  }

 private:
  void reset_layers() {
    layers_.assign(h_ + 1, {});
    for (std::size_t i = 0; i <= h_; ++i) {
      Node z;
      z.bits.assign(words_, 0);
      z.parent = i == 0 ? kNone : 0;
      layers_[i].push_back(std::move(z));
    }
  }

  // Closest stored vector in layer i; ties go to the earliest inserted.
  std::pair<std::size_t, std::size_t> nearest(std::size_t i, const std::vector<std::uint64_t>& bits) const {
    std::size_t best = kNone, bd = std::numeric_limits<std::size_t>::max();
    for (std::size_t k = 0; k < layers_[i].size(); ++k) {
      std::size_t d = hamming(layers_[i][k].bits, bits);
      if (d < bd) {
        bd = d;
        best = k;
      }
    }
    return {best, bd};
  }

  std::size_t n_;
  VCNetConfig cfg_;
  std::size_t words_;
  std::size_t h_;
  double m_hat_;
  std::vector<std::vector<Node>> layers_;
  std::size_t rows_ = 0;
  std::size_t t_ = 0;
  std::size_t phase_t_ = 0;
  std::size_t restarts_ = 0;
  std::size_t last_link_ = 0;
};

inline FactorizerFactory vcnet_factory(VCNetConfig cfg) {
  return [cfg](std::size_t d) { return std::make_unique<VCNet>(d, cfg); };
}

}  // namespace onlinegamma2
