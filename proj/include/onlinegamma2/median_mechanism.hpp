#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "onlinegamma2/dp_release.hpp"
#include "onlinegamma2/errors.hpp"
#include "onlinegamma2/linalg.hpp"
#include "onlinegamma2/rng.hpp"

namespace onlinegamma2 {

inline constexpr std::uint64_t kDefaultGuard = 10'000'000;

// sum_{t=1}^{s} N^t, or nothing once it exceeds the guard.
inline std::optional<std::uint64_t> candidate_count(std::size_t n_univ, std::size_t s, std::uint64_t guard) {
  std::uint64_t total = 0, p = 1;
  for (std::size_t t = 1; t <= s; ++t) {
    if (p > guard / n_univ) return std::nullopt;
    p *= n_univ;
    total += p;
    if (total > guard) return std::nullopt;
  }
  return total;
}

// log2(sum_{t=1}^{s} N^t) without forming the sum.
inline double log2_candidate_count(std::size_t n_univ, std::size_t s) {
  const double nn = static_cast<double>(n_univ), ss = static_cast<double>(s);
  if (n_univ == 1) return std::log2(ss);
  return ss * std::log2(nn) + std::log2((1.0 - std::pow(nn, -ss)) / (1.0 - 1.0 / nn));
}

struct InnerParams {
  double c = 0.0;
  double eps0 = 0.0;
  double sigma = 0.0;
  double tau = 0.0;
};

inline InnerParams inner_params(std::size_t n_univ, std::size_t n, std::size_t s, double eps, double delta,
                                std::size_t m, double beta) {
  if (n_univ < 2) throw BadInput("universe must have at least two elements");
  if (n == 0 || s == 0 || m == 0) throw BadInput("n, s and m must be positive");
  if (!(eps > 0.0) || !(delta > 0.0 && delta < 1.0)) throw BudgetViolation("need eps > 0 and delta in (0, 1)");
  if (!(beta > 0.0)) throw BadInput("beta must be positive");
  InnerParams p;
  p.c = log2_candidate_count(n_univ, s);
  p.eps0 = eps / std::sqrt(6.0 * p.c * std::log(1.0 / delta));
  p.sigma = 4.0 / (p.eps0 * static_cast<double>(n));
  p.tau = 4.0 * p.sigma * std::log(3.0 * static_cast<double>(m) / beta);
  return p;
}

// All ordered tuples of length 1..s over the universe, with a mask of survivors.
// Member index: tuples of length t follow all shorter ones, and within a length the
// first element is the most significant base-N digit.
class CandidateSet {
 public:
  CandidateSet(std::size_t n_univ, std::size_t s, std::uint64_t guard = kDefaultGuard) : n_(n_univ), s_(s) {
    auto total = candidate_count(n_univ, s, guard);
    if (!total)
      throw ScaleGuard("candidate set for s=" + std::to_string(s) + " exceeds the guard of " + std::to_string(guard));
    total_ = static_cast<std::size_t>(*total);
    alive_.assign(total_, 1);
    alive_count_ = total_;
    std::size_t off = 0, p = 1;
    for (std::size_t t = 1; t <= s; ++t) {
      p *= n_univ;
      offset_.push_back(off);
      off += p;
    }
    offset_.push_back(off);
  }

  std::size_t size() const { return total_; }
  std::size_t alive_count() const { return alive_count_; }
  bool alive(std::size_t k) const { return alive_[k] != 0; }

  // q(y) = mean of q over the tuple y, for every member.
  void evaluate(std::span<const double> q, std::vector<double>& out) const {
    out.assign(total_, 0.0);
    for (std::size_t k = 0; k < n_; ++k) out[k] = q[k];
    for (std::size_t t = 2; t <= s_; ++t) {
      const std::size_t prev = offset_[t - 2], cur = offset_[t - 1], len = offset_[t] - cur;
      for (std::size_t i = 0; i < len; ++i) out[cur + i] = out[prev + i / n_] + q[i % n_];
    }
    for (std::size_t t = 2; t <= s_; ++t)
      for (std::size_t i = offset_[t - 1]; i < offset_[t]; ++i) out[i] /= static_cast<double>(t);
  }

  // Order statistic ceil(k/2) of the alive values.
  double lower_median(const std::vector<double>& values) const {
    if (alive_count_ == 0) throw InvalidState("median of an empty candidate set");
    std::vector<double> v;
    v.reserve(alive_count_);
    for (std::size_t k = 0; k < total_; ++k)
      if (alive_[k]) v.push_back(values[k]);
    auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
  }

  // Keeps q(y) > nu when above is set, else q(y) < nu. Returns the new alive count.
  std::size_t keep(const std::vector<double>& values, double nu, bool above) {
    std::size_t n = 0;
    for (std::size_t k = 0; k < total_; ++k) {
      if (!alive_[k]) continue;
      const bool stay = above ? values[k] > nu : values[k] < nu;
      alive_[k] = stay;
      n += stay;
    }
    alive_count_ = n;
    return n;
  }

  std::vector<std::size_t> decode(std::size_t k) const {
    std::size_t t = 1;
    while (k >= offset_[t]) ++t;
    std::size_t i = k - offset_[t - 1];
    std::vector<std::size_t> out(t);
    for (std::size_t j = t; j-- > 0;) {
      out[j] = i % n_;
      i /= n_;
    }
    return out;
  }

  std::size_t index_of(std::span<const std::size_t> tuple) const {
    if (tuple.empty() || tuple.size() > s_) throw BadInput("tuple length outside 1..s");
    std::size_t i = 0;
    for (std::size_t e : tuple) {
      if (e >= n_) throw BadInput("tuple element outside the universe");
      i = i * n_ + e;
    }
    return offset_[tuple.size() - 1] + i;
  }

 private:
  std::size_t n_, s_;
  std::size_t total_ = 0;
  std::vector<std::size_t> offset_;
  std::vector<char> alive_;
  std::size_t alive_count_ = 0;
};

struct MedianConfig {
  double eps = 1.0;
  double delta = 1e-6;
  double beta = 0.05;
  std::uint64_t guard = kDefaultGuard;
  bool noiseless = false;             // every Laplace draw is zero
  std::optional<double> tau_override;  // replaces the threshold, keeps sigma
};

struct HalvingEvent {
  std::size_t before = 0;
  std::size_t after = 0;
  bool halved() const { return 2 * after <= before; }
};

struct InnerRunResult {
  InnerParams params;
  std::size_t s = 0;
  std::vector<double> answers;
  std::vector<char> from_median;  // 1 where the answer is the candidate median
  bool halted = false;            // the candidate set emptied before the stream ended
  std::size_t loops = 0;          // outer-loop iterations, one per threshold draw
  std::vector<HalvingEvent> halving;
  double max_abs_noise = 0.0;
};

// One run of the median mechanism at sparsity s, consuming queries from row `start` onward.
class InnerMechanism {
 public:
  InnerMechanism(const Dataset& data, std::size_t s, std::size_t m, const MedianConfig& cfg, CounterRng& rng)
      : data_(data), s_(s), cfg_(cfg), rng_(rng),
        params_(inner_params(data.universe(), data.size(), s, cfg.eps, cfg.delta, m, cfg.beta)),
        set_(data.universe(), s, cfg.guard) {
    if (cfg.tau_override) params_.tau = *cfg.tau_override;
  }

  const InnerParams& params() const { return params_; }
  const CandidateSet& candidates() const { return set_; }

  InnerRunResult run(const Matrix& queries, std::size_t start) {
    if (queries.cols() != data_.universe()) throw BadInput("query width mismatch");
    InnerRunResult r;
    r.params = params_;
    r.s = s_;
    std::size_t next = start;
    std::vector<double> values;
    while (set_.alive_count() > 0 && next < queries.rows()) {
      ++r.loops;
      const double tau_hat = params_.tau + lap(r);
      bool broke = false;
      double nu = 0.0, a = 0.0;
      while (next < queries.rows()) {
        const Vec q = queries.row_vec(next++);
        set_.evaluate(q, values);
        nu = set_.lower_median(values);
        const double truth = data_.answer(q);
        if (std::abs(truth - nu) + lap(r) <= tau_hat) {
          r.answers.push_back(nu);
          r.from_median.push_back(1);
          continue;
        }
        a = truth + lap(r);
        r.answers.push_back(a);
        r.from_median.push_back(0);
        broke = true;
        break;
      }
      if (!broke) break;
      HalvingEvent ev;
      ev.before = set_.alive_count();
      ev.after = set_.keep(values, nu, a > nu);
      if (!ev.halved() && cfg_.noiseless)
        throw InvalidState("candidate update kept more than half of the set");
      r.halving.push_back(ev);
    }
    r.halted = set_.alive_count() == 0 && next < queries.rows();
    return r;
  }

 private:
  double lap(InnerRunResult& r) {
    if (cfg_.noiseless) return 0.0;
    const double z = rng_.laplace(params_.sigma);
    r.max_abs_noise = std::max(r.max_abs_noise, std::abs(z));
    return z;
  }

  const Dataset& data_;
  std::size_t s_;
  MedianConfig cfg_;
  CounterRng& rng_;
  InnerParams params_;
  CandidateSet set_;
};

struct OuterRunResult {
  std::vector<double> answers;
  std::vector<InnerRunResult> runs;
  std::size_t s_star = 0;  // sparsity of the run that exhausted the stream, 0 if none did
  bool truncated = false;  // s exceeded n with queries left
};

// Doubles the sparsity from 1 while s <= n, splitting the budget evenly across log2 n runs.
inline OuterRunResult run_outer(const Dataset& data, const Matrix& queries, const MedianConfig& cfg,
                                std::uint64_t seed) {
  const std::size_t n = data.size();
  if (n < 2) throw BadInput("outer mechanism needs at least two records");
  const double ln = std::log2(static_cast<double>(n));
  MedianConfig inner = cfg;
  inner.eps = cfg.eps / ln;
  inner.delta = cfg.delta / ln;
  inner.beta = cfg.beta / ln;
  CounterRng rng(seed);
  OuterRunResult out;
  std::size_t next = 0;
  for (std::size_t s = 1; s <= n && next < queries.rows(); s *= 2) {
    InnerMechanism mech(data, s, queries.rows(), inner, rng);
    InnerRunResult r = mech.run(queries, next);
    next += r.answers.size();
    out.answers.insert(out.answers.end(), r.answers.begin(), r.answers.end());
    const bool done = next >= queries.rows();
    out.runs.push_back(std::move(r));
    if (done) out.s_star = s;
  }
  out.truncated = next < queries.rows();
  return out;
}

// Smallest power of two s <= n whose witness error 5H/s is at most alpha_s / 3, where
// alpha_s = 3 tau_s / 2 uses the per-run budget of the outer mechanism. Returns 0 if none.
inline std::size_t macc_crossover(std::size_t n_univ, std::size_t n, std::size_t m, const MedianConfig& cfg,
                                  double hdisc_star) {
  const double ln = std::log2(static_cast<double>(n));
  for (std::size_t s = 1; s <= n; s *= 2) {
    const InnerParams p = inner_params(n_univ, n, s, cfg.eps / ln, cfg.delta / ln, m, cfg.beta / ln);
    if (5.0 * hdisc_star / static_cast<double>(s) <= p.tau / 2.0) return s;
  }
  return 0;
}

// max over column subsets S with |S| <= w of min over signs x of ||Q_S x||_inf, optionally
// with an all-ones row appended.
inline double hdisc_bruteforce(const Matrix& q, std::size_t w, bool modified, std::uint64_t guard = kDefaultGuard) {
  const std::size_t n = q.cols();
  if (n > 62) throw ScaleGuard("too many columns for subset enumeration");
  w = std::min(w, n);
  // sum_{k<=w} C(n,k) 2^k
  double pairs = 0.0, binom = 1.0;
  for (std::size_t k = 0; k <= w; ++k) {
    pairs += binom * std::ldexp(1.0, static_cast<int>(k));
    binom = binom * static_cast<double>(n - k) / static_cast<double>(k + 1);
  }
  if (pairs > static_cast<double>(guard)) throw ScaleGuard("hdisc enumeration exceeds the guard");
  std::vector<Vec> rows;
  for (std::size_t i = 0; i < q.rows(); ++i) rows.push_back(q.row_vec(i));
  if (modified) rows.emplace_back(n, 1.0);
  double best = 0.0;
  std::vector<std::size_t> cols;
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) > w) continue;
    cols.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (mask >> j & 1) cols.push_back(j);
    // The first sign is fixed to +1 by symmetry.
    double disc = std::numeric_limits<double>::infinity();
    const std::size_t k = cols.size();
    for (std::uint64_t sg = 0; sg < (std::uint64_t{1} << (k - 1)) && disc > best; ++sg) {
      double worst = 0.0;
      for (const Vec& r : rows) {
        double acc = r[cols[0]];
        for (std::size_t i = 1; i < k; ++i) acc += (sg >> (i - 1) & 1) ? -r[cols[i]] : r[cols[i]];
        worst = std::max(worst, std::abs(acc));
      }
      disc = std::min(disc, worst);
    }
    best = std::max(best, disc);
  }
  return best;
}

// Answers of every row of Q on the dataset, as fractions.
inline Vec answers_on(const Matrix& q, const Dataset& x) {
  Vec out(q.rows());
  for (std::size_t i = 0; i < q.rows(); ++i) out[i] = x.answer(q.row_vec(i));
  return out;
}

struct SparseWitness {
  std::size_t s = 0;
  std::vector<std::size_t> records;  // nondecreasing
  double error = 0.0;                // ||Q(x) - Q(y)||_inf
};

// Searches datasets of exactly size s (as multisets) for one within `alpha` of Q(x).
// `budget` counts enumerated multisets and is decremented.
inline std::optional<SparseWitness> find_witness(const Matrix& q, const Vec& target, std::size_t s, double alpha,
                                                 std::uint64_t& budget) {
  const std::size_t m = q.rows(), n = q.cols();
  std::vector<std::size_t> pick(s, 0);
  std::vector<Vec> partial(s + 1, Vec(m, 0.0));
  std::optional<SparseWitness> found;
  // Depth-first over nondecreasing tuples; partial[d] holds column sums of the first d picks.
  auto rec = [&](auto&& self, std::size_t d, std::size_t from) -> void {
    if (found) return;
    if (d == s) {
      if (budget == 0) throw ScaleGuard("sparse approximation search exceeds the guard");
      --budget;
      double err = 0.0;
      for (std::size_t i = 0; i < m; ++i)
        err = std::max(err, std::abs(target[i] - partial[s][i] / static_cast<double>(s)));
      if (err <= alpha) found = SparseWitness{s, pick, err};
      return;
    }
    for (std::size_t u = from; u < n && !found; ++u) {
      pick[d] = u;
      for (std::size_t i = 0; i < m; ++i) partial[d + 1][i] = partial[d][i] + q(i, u);
      self(self, d + 1, u);
    }
  };
  rec(rec, 0, 0);
  return found;
}

// Smallest s with a dataset of size s answering Q within alpha of x. Terminates by s = |x|.
inline SparseWitness sparse_approx_search(const Matrix& q, const Dataset& x, double alpha,
                                          std::uint64_t guard = kDefaultGuard) {
  if (q.cols() != x.universe()) throw BadInput("query width mismatch");
  if (x.size() == 0) throw BadInput("dataset must be nonempty");
  const Vec target = answers_on(q, x);
  std::uint64_t budget = guard;
  for (std::size_t s = 1; s <= x.size(); ++s)
    if (auto w = find_witness(q, target, s, alpha, budget)) return *w;
  throw InvalidState("no witness up to the dataset size");
}

// Subsample size ceil(ln m / (2 alpha^2)) for the sampling argument.
inline std::size_t sampling_size(std::size_t m, double alpha) {
  if (!(alpha > 0.0)) throw BadInput("alpha must be positive");
  return std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(std::log(static_cast<double>(m)) / (2.0 * alpha * alpha))));
}

inline Dataset random_subsample(const Dataset& x, std::size_t s, CounterRng& rng) {
  if (x.size() == 0) throw BadInput("dataset must be nonempty");
  std::vector<std::size_t> recs(s);
  for (std::size_t& r : recs) r = x.records()[rng.below(x.size())];
  return Dataset(x.universe(), std::move(recs));
}

}  // namespace onlinegamma2
