#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "onlinegamma2/avg_factorizer.hpp"
#include "onlinegamma2/errors.hpp"
#include "onlinegamma2/factorization.hpp"
#include "onlinegamma2/linalg.hpp"

namespace onlinegamma2 {

inline double log2d(double x) { return std::log2(x); }

// Largest power of two dividing i (i >= 1).
inline std::uint64_t largest_pow2_divisor(std::uint64_t i) { return i & (~i + 1); }

// Deletion-event window [lo, hi] (1-based, inclusive) aggregated by star row S_i.
inline std::pair<std::uint64_t, std::uint64_t> star_window(std::uint64_t i) {
  return {i + 1 - largest_pow2_divisor(i), i};
}

// Star indices whose windows partition events 1..a: 2^k floor(a / 2^k) for each set bit k.
inline std::vector<std::uint64_t> deletion_decomposition(std::uint64_t a) {
  std::vector<std::uint64_t> out;
  for (int k = 63; k >= 0; --k) {
    std::uint64_t b = std::uint64_t{1} << k;
    if (a & b) out.push_back((a >> k) << k);
  }
  return out;
}

// Stable id-keyed output builder shared by the wrappers.
class RowSink {
 public:
  explicit RowSink(std::size_t n) : n_(n), col_norm2_(n, 0.0) {}

  std::size_t add(RowVec r, StepResult& out) {
    for (std::size_t j = 0; j < n_; ++j) col_norm2_[j] += r[j] * r[j];
    std::size_t id = count_++;
    out.new_rows.push_back({id, std::move(r)});
    return id;
  }
  std::size_t count() const { return count_; }
  double col_norm2(std::size_t j) const { return col_norm2_[j]; }

 private:
  std::size_t n_;
  std::size_t count_ = 0;
  Vec col_norm2_;
};

// Insertion-only wrapper: elements of a growing universe are split into binary-counter
// blocks of sizes 2^k, each served by its own inner factorizer.
class InsertionWrapper {
 public:
  struct Instance {
    std::size_t k;
    std::vector<std::size_t> universe;  // global column ids
    std::unique_ptr<OnlineRowFactorizer> f;
    bool active = true;
    std::vector<std::size_t> row_map;  // inner row id -> wrapper row id
  };

  InsertionWrapper(std::size_t n, FactorizerFactory factory)
      : n_(n), factory_(std::move(factory)), sink_(n), member_(n, 0) {
    scale_ = std::sqrt(log2d(2.0 * static_cast<double>(n)));
  }

  std::size_t size() const { return order_.size(); }
  bool contains(std::size_t x) const { return member_[x] != 0; }
  const std::vector<std::size_t>& arrival_order() const { return order_; }
  const std::vector<Instance>& instances() const { return inst_; }
  // Column norm squared of the rescaled right factor.
  double col_norm2(std::size_t x) const { return sink_.col_norm2(x); }

  std::vector<std::size_t> active_sizes() const {
    std::vector<std::size_t> s;
    for (const Instance& i : inst_)
      if (i.active) s.push_back(i.universe.size());
    return s;
  }

  void insert(std::span<const std::size_t> elems) {
    if (elems.empty()) return;
    const std::uint64_t u_old = order_.size();
    for (std::size_t x : elems) {
      if (x >= n_) throw BadInput("element out of range");
      if (member_[x]) throw ContractViolation("element inserted twice");
      member_[x] = 1;
      order_.push_back(x);
    }
    const std::uint64_t u_new = order_.size();
    const int kstar = 63 - std::countl_zero(u_old ^ u_new);
    for (Instance& i : inst_)
      if (i.active && static_cast<int>(i.k) <= kstar) i.active = false;
    for (int k = kstar; k >= 0; --k) {
      std::uint64_t b = std::uint64_t{1} << k;
      if (!(u_new & b)) continue;
      std::uint64_t start = (u_new >> (k + 1)) << (k + 1);
      Instance inst;
      inst.k = static_cast<std::size_t>(k);
      inst.universe.assign(order_.begin() + start, order_.begin() + start + b);
      inst.f = factory_(inst.universe.size());
      inst_.push_back(std::move(inst));
    }
  }

  StepResult step(std::span<const double> q) {
    StepResult out;
    SparseRow left;
    for (Instance& inst : inst_) {
      if (!inst.active) continue;
      Vec local(inst.universe.size());
      for (std::size_t a = 0; a < local.size(); ++a) local[a] = q[inst.universe[a]];
      StepResult r = inst.f->step(local);
      if (r.asserted) {
        StepResult a;
        a.asserted = true;
        a.certificate = std::move(r.certificate);
        return a;
      }
      for (RightRow& rr : r.new_rows) {
        if (rr.id != inst.row_map.size()) throw ContractViolation("inner row ids out of order");
        RowVec g(n_, 0.0);
        for (std::size_t a = 0; a < inst.universe.size(); ++a) g[inst.universe[a]] = rr.entries[a] / scale_;
        inst.row_map.push_back(sink_.add(std::move(g), out));
      }
      for (const Coef& c : r.left) left.push_back({inst.row_map.at(c.id), c.value * scale_});
    }
    out.left = std::move(left);
    return out;
  }

 private:
  std::size_t n_;
  FactorizerFactory factory_;
  RowSink sink_;
  std::vector<char> member_;
  std::vector<std::size_t> order_;
  std::vector<Instance> inst_;
  double scale_;
};

// Semi-dynamic wrapper: turns an insertion-only factorization of Q|U into one of Q|U' where
// elements of U' may also be deleted. Each inner right row r becomes a bar row r restricted
// to U' at its birth, and deletions are subtracted through star rows over dyadic windows of
// deletion events.
class SemiDynamicWrapper {
 public:
  explicit SemiDynamicWrapper(std::size_t n)
      : n_(n), sink_(n), alive_(n, 0), deleted_(n, 0) {
    scale_ = std::sqrt(log2d(4.0 * static_cast<double>(n)));
  }

  bool alive(std::size_t x) const { return alive_[x] != 0; }
  std::size_t num_events() const { return deltas_.size(); }
  double col_norm2(std::size_t x) const { return sink_.col_norm2(x); }

  void insert(std::span<const std::size_t> elems) {
    for (std::size_t x : elems) {
      if (deleted_[x]) throw ContractViolation("re-inserting a deleted column");
      if (alive_[x]) throw ContractViolation("element inserted twice");
      alive_[x] = 1;
    }
  }

  // `inner` is the step of an insertion-only factorizer over a superset of U'.
  StepResult step(const StepResult& inner, std::span<const std::size_t> deleted) {
    if (inner.asserted) throw ContractViolation("inner factorizer asserted");
    StepResult out;
    if (!deleted.empty()) {
      for (std::size_t x : deleted) {
        if (!alive_[x]) throw ContractViolation("deleting an element that is not present");
        alive_[x] = 0;
        deleted_[x] = 1;
      }
      deltas_.emplace_back(deleted.begin(), deleted.end());
      const std::uint64_t e = deltas_.size();
      for (Bar& b : bars_) {
        const std::uint64_t i = e - b.birth;
        auto [lo, hi] = star_window(i);
        RowVec s(n_, 0.0);
        bool nonzero = false;
        for (std::uint64_t j = lo; j <= hi; ++j)
          for (std::size_t x : deltas_[b.birth + j - 1]) {
            s[x] = -b.values[x] / scale_;
            nonzero = nonzero || s[x] != 0.0;
          }
        if (nonzero) b.stars.emplace(i, sink_.add(std::move(s), out));
      }
    }
    for (const RightRow& r : inner.new_rows) {
      if (r.id != bar_of_.size()) throw ContractViolation("inner row ids out of order");
      RowVec bar(n_, 0.0);
      bool nonzero = false;
      for (std::size_t x = 0; x < n_; ++x)
        if (alive_[x] && r.entries[x] != 0.0) {
          bar[x] = r.entries[x];
          nonzero = true;
        }
      if (!nonzero) {
        bar_of_.push_back(kNone);
        continue;
      }
      Bar b;
      b.birth = deltas_.size();
      b.values = bar;
      for (double& v : bar) v /= scale_;
      b.row = sink_.add(std::move(bar), out);
      bar_of_.push_back(bars_.size());
      bars_.push_back(std::move(b));
    }
    const std::uint64_t e = deltas_.size();
    for (const Coef& c : inner.left) {
      std::size_t bi = bar_of_.at(c.id);
      if (bi == kNone) continue;
      const Bar& b = bars_[bi];
      const double v = c.value * scale_;
      out.left.push_back({b.row, v});
      for (std::uint64_t i : deletion_decomposition(e - b.birth)) {
        auto it = b.stars.find(i);
        if (it != b.stars.end()) out.left.push_back({it->second, v});
      }
    }
    return out;
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  struct Bar {
    std::size_t row = 0;
    std::uint64_t birth = 0;  // number of deletion events before the bar row existed
    RowVec values;            // unscaled bar entries
    std::map<std::uint64_t, std::size_t> stars;
  };

  std::size_t n_;
  RowSink sink_;
  std::vector<char> alive_;
  std::vector<char> deleted_;
  std::vector<std::vector<std::size_t>> deltas_;
  std::vector<Bar> bars_;
  std::vector<std::size_t> bar_of_;
  double scale_;
};

inline constexpr double kKickThreshold = 2.0;
inline constexpr double kKickTol = 1e-9;

// Worst-case competitive constant of the zone pipeline over N columns.
inline double zone_pipeline_constant(std::size_t n) {
  return std::sqrt(6.0) * std::pow(log2d(4.0 * static_cast<double>(n)), 3);
}

// Zone pipeline: turns an average-case factorizer into one with column norms at most one.
// Columns whose norm squared in zone z exceeds 2 are moved to zone z + 1.
class ZonePipeline : public OnlineRowFactorizer {
 public:
  struct Kick {
    std::size_t t;
    std::size_t zone;
    std::size_t column;
  };

  ZonePipeline(std::size_t n, FactorizerFactory factory) : n_(n), sink_(n) {
    if (n == 0) throw BadInput("dimension must be positive");
    num_zones_ = static_cast<std::size_t>(std::floor(log2d(static_cast<double>(n)))) + 1;
    for (std::size_t z = 0; z < num_zones_; ++z)
      zones_.push_back(std::make_unique<Zone>(n, factory));
    std::vector<std::size_t> all(n);
    for (std::size_t x = 0; x < n; ++x) all[x] = x;
    zones_[0]->ins.insert(all);
    zones_[0]->sd.insert(all);
    scale_ = std::sqrt(2.0 * log2d(2.0 * static_cast<double>(n)));
  }

  std::size_t dim() const override { return n_; }
  std::size_t num_zones() const { return num_zones_; }
  bool asserted() const { return asserted_; }
  const std::vector<Kick>& kicks() const { return kicks_; }
  std::size_t zone_ins_size(std::size_t z) const { return zones_[z]->ins.size(); }
  bool zone_alive(std::size_t z, std::size_t x) const { return zones_[z]->sd.alive(x); }
  const InsertionWrapper& zone_insertion(std::size_t z) const { return zones_[z]->ins; }
  double col_norm2(std::size_t x) const { return sink_.col_norm2(x); }

  StepResult step(std::span<const double> q) override {
    if (asserted_) throw InvalidState("pipeline already asserted");
    if (q.size() != n_) throw BadInput("row width mismatch");
    if (!all_finite(q)) throw BadInput("non-finite row entry");
    ++t_;
    StepResult out;
    std::vector<std::size_t> buffer;
    for (std::size_t z = 0; z < num_zones_; ++z) {
      Zone& zone = *zones_[z];
      if (!buffer.empty()) {
        zone.ins.insert(buffer);
        zone.sd.insert(buffer);
        buffer.clear();
      }
      if (zone.ins.size() == 0) continue;
      StepResult ri = zone.ins.step(q);
      if (ri.asserted) {
        asserted_ = true;
        StepResult a;
        a.asserted = true;
        a.certificate = std::move(ri.certificate);
        return a;
      }
      std::vector<std::size_t> kicked;
      for (std::size_t x : zone.ins.arrival_order())
        if (zone.sd.alive(x) && zone.ins.col_norm2(x) > kKickThreshold + kKickTol) kicked.push_back(x);
      if (!kicked.empty() && z + 1 == num_zones_) throw PipelineError("column kicked out of the last zone");
      StepResult rs = zone.sd.step(ri, kicked);
      for (std::size_t x : kicked) kicks_.push_back({t_, z, x});
      for (RightRow& r : rs.new_rows) {
        if (r.id != zone.row_map.size()) throw ContractViolation("zone row ids out of order");
        for (double& v : r.entries) v /= scale_;
        zone.row_map.push_back(sink_.add(std::move(r.entries), out));
      }
      for (const Coef& c : rs.left) out.left.push_back({zone.row_map.at(c.id), c.value * scale_});
      buffer = std::move(kicked);
    }
    return out;
  }

 private:
  struct Zone {
    Zone(std::size_t n, const FactorizerFactory& f) : ins(n, f), sd(n) {}
    InsertionWrapper ins;
    SemiDynamicWrapper sd;
    std::vector<std::size_t> row_map;
  };

  std::size_t n_;
  std::size_t num_zones_;
  RowSink sink_;
  std::vector<std::unique_ptr<Zone>> zones_;
  std::vector<Kick> kicks_;
  std::size_t t_ = 0;
  bool asserted_ = false;
  double scale_;
};

inline FactorizerFactory avg_factory(double gamma, AvgFactorizerConfig cfg = {}) {
  return [gamma, cfg](std::size_t d) { return std::make_unique<AvgFactorizer>(gamma, d, cfg); };
}

// Bounded factorizer for a fixed gamma: zone pipeline over average factorizers.
inline std::unique_ptr<OnlineRowFactorizer> make_bounded_pipeline(std::size_t n, double gamma) {
  return std::make_unique<ZonePipeline>(n, avg_factory(gamma));
}

using BoundedFactory = std::function<std::unique_ptr<OnlineRowFactorizer>(double gamma)>;

// Phase weight x^{1+2c} zeta(1+2c); summable scaling for doubling phases.
inline double phase_weight(double phase, double cexp) {
  const double s = 1.0 + 2.0 * cexp;
  return std::pow(phase, s) * std::riemann_zeta(s);
}

// Doubling wrapper for row arrivals. Starts at gamma = ||q_1||_inf and doubles on assertion,
// replaying the rejected row into a fresh phase.
class DoublingRowFactorizer : public OnlineRowFactorizer {
 public:
  DoublingRowFactorizer(std::size_t n, BoundedFactory make, double cexp = 0.5)
      : n_(n), make_(std::move(make)), cexp_(cexp), sink_(n) {
    if (!(cexp > 0.0)) throw BadInput("cexp must be positive");
  }

  std::size_t dim() const override { return n_; }
  std::size_t phase() const { return phase_; }
  double gamma() const { return gamma_; }
  double first_row_inf() const { return first_inf_; }
  double col_norm2(std::size_t x) const { return sink_.col_norm2(x); }

  StepResult step(std::span<const double> q) override {
    if (q.size() != n_) throw BadInput("row width mismatch");
    if (!all_finite(q)) throw BadInput("non-finite row entry");
    StepResult out;
    if (phase_ == 0) {
      if (norm_inf(q) == 0.0) return out;
      first_inf_ = norm_inf(q);
      start_phase(first_inf_);
    }
    StepResult r = inner_->step(q);
    while (r.asserted) {
      start_phase(2.0 * gamma_);
      r = inner_->step(q);
    }
    const double s = std::sqrt(phase_weight(static_cast<double>(phase_), cexp_));
    for (RightRow& rr : r.new_rows) {
      if (rr.id != row_map_.size()) throw ContractViolation("phase row ids out of order");
      for (double& v : rr.entries) v /= s;
      row_map_.push_back(sink_.add(std::move(rr.entries), out));
    }
    for (const Coef& c : r.left) out.left.push_back({row_map_.at(c.id), c.value * s});
    return out;
  }

 private:
  void start_phase(double gamma) {
    ++phase_;
    gamma_ = gamma;
    inner_ = make_(gamma);
    row_map_.clear();
  }

  std::size_t n_;
  BoundedFactory make_;
  double cexp_;
  RowSink sink_;
  std::unique_ptr<OnlineRowFactorizer> inner_;
  std::vector<std::size_t> row_map_;
  std::size_t phase_ = 0;
  double gamma_ = 0.0;
  double first_inf_ = 0.0;
};

inline std::unique_ptr<DoublingRowFactorizer> make_row_pipeline(std::size_t n, double cexp = 0.5) {
  return std::make_unique<DoublingRowFactorizer>(
      n, [n](double g) { return make_bounded_pipeline(n, g); }, cexp);
}

// One step of the column-arrival factorization A_t = L_t R_t.
struct ColumnStep {
  std::vector<RightRow> new_left_columns;  // id-keyed columns of L, length m
  SparseRow right;                         // r_t keyed by left-column id
};

// Column arrivals via the transposed row problem: L = C gamma R_row^T, r_t = ell_t / (C gamma).
// Each doubling phase contributes its own block of coordinates and is not rescaled.
class DoublingColumnFactorizer {
 public:
  DoublingColumnFactorizer(std::size_t m, BoundedFactory make)
      : m_(m), make_(std::move(make)), c_(zone_pipeline_constant(m)), row_norm2_(m, 0.0) {}

  std::size_t dim() const { return m_; }
  std::size_t phase() const { return phase_; }
  double gamma() const { return gamma_; }
  double constant() const { return c_; }
  std::size_t num_coords() const { return count_; }
  // ||L_t||_{2->inf}^2
  double left_row_norm2_max() const {
    double b = 0.0;
    for (double x : row_norm2_) b = std::max(b, x);
    return b;
  }

  ColumnStep step(std::span<const double> a) {
    if (a.size() != m_) throw BadInput("column height mismatch");
    if (!all_finite(a)) throw BadInput("non-finite column entry");
    ColumnStep out;
    if (phase_ == 0) {
      if (norm_inf(a) == 0.0) return out;
      start_phase(norm_inf(a));
    }
    StepResult r = inner_->step(a);
    while (r.asserted) {
      start_phase(2.0 * gamma_);
      r = inner_->step(a);
    }
    const double cg = c_ * gamma_;
    for (RightRow& rr : r.new_rows) {
      if (rr.id != row_map_.size()) throw ContractViolation("phase row ids out of order");
      for (std::size_t j = 0; j < m_; ++j) {
        rr.entries[j] *= cg;
        row_norm2_[j] += rr.entries[j] * rr.entries[j];
      }
      row_map_.push_back(count_);
      out.new_left_columns.push_back({count_++, std::move(rr.entries)});
    }
    for (const Coef& c : r.left) out.right.push_back({row_map_.at(c.id), c.value / cg});
    return out;
  }

 private:
  void start_phase(double gamma) {
    ++phase_;
    gamma_ = gamma;
    inner_ = make_(gamma);
    row_map_.clear();
  }

  std::size_t m_;
  BoundedFactory make_;
  double c_;
  Vec row_norm2_;
  std::unique_ptr<OnlineRowFactorizer> inner_;
  std::vector<std::size_t> row_map_;
  std::size_t count_ = 0;
  std::size_t phase_ = 0;
  double gamma_ = 0.0;
};

inline std::unique_ptr<DoublingColumnFactorizer> make_column_pipeline(std::size_t m) {
  return std::make_unique<DoublingColumnFactorizer>(m, [m](double g) { return make_bounded_pipeline(m, g); });
}

}  // namespace onlinegamma2
