#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "onlinegamma2/errors.hpp"
#include "onlinegamma2/factorization.hpp"
#include "onlinegamma2/linalg.hpp"
#include "onlinegamma2/rng.hpp"

namespace onlinegamma2 {

// A dataset over the universe {0, ..., N-1}, kept both as records and as a histogram.
class Dataset {
 public:
  Dataset(std::size_t universe, std::vector<std::size_t> records)
      : universe_(universe), records_(std::move(records)), hist_(universe, 0.0) {
    if (universe == 0) throw BadInput("universe must be nonempty");
    for (std::size_t r : records_) {
      if (r >= universe) throw BadInput("record " + std::to_string(r) + " outside the universe");
      hist_[r] += 1.0;
    }
  }

  std::size_t universe() const { return universe_; }
  std::size_t size() const { return records_.size(); }
  const std::vector<std::size_t>& records() const { return records_; }
  const Vec& histogram() const { return hist_; }

  // q(x) = <q, h> / n
  double answer(std::span<const double> q) const {
    if (q.size() != universe_) throw BadInput("query width mismatch");
    if (records_.empty()) return 0.0;
    return dot(q, hist_) / static_cast<double>(records_.size());
  }

 private:
  std::size_t universe_;
  std::vector<std::size_t> records_;
  Vec hist_;
};

inline void check_budget(double eps, double delta) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw BudgetViolation("epsilon must be finite and positive");
  if (!(delta > 0.0) || delta > std::exp(-eps)) throw BudgetViolation("delta must lie in (0, exp(-epsilon)]");
}

// Gaussian mechanism variance 2 S^2 (eps + ln(1/delta)) / eps^2 for l2 sensitivity bound S.
inline double gaussian_sigma2(double sensitivity, double eps, double delta) {
  check_budget(eps, delta);
  return 2.0 * sensitivity * sensitivity * (eps + std::log(1.0 / delta)) / (eps * eps);
}

inline double gaussian_answer(double value, double sensitivity, double eps, double delta, CounterRng& rng) {
  return value + std::sqrt(gaussian_sigma2(sensitivity, eps, delta)) * rng.gaussian();
}

// Per-strategy-row noise variance for the release mechanism: sensitivity 2/n.
inline double release_sigma2(double eps, double delta, std::size_t n) {
  if (n == 0) throw BadInput("dataset must be nonempty");
  return gaussian_sigma2(2.0 / static_cast<double>(n), eps, delta);
}

// Gaussian tail radius sqrt(2 ln(2m / p)) covering m answers with failure probability p.
inline double tail_radius(std::size_t m, double p = 0.05) {
  return std::sqrt(2.0 * std::log(2.0 * static_cast<double>(m) / p));
}

struct ReleaseStep {
  double answer = 0.0;
  double truth = 0.0;
  double value_bound = 0.0;  // ||ell_t||_2
  SparseRow left;
};

// Online query release: answers each query through the noisy strategy rows of the factorizer.
// Every right row receives exactly one noise draw, cached for the lifetime of the run.
class ReleaseMechanism {
 public:
  ReleaseMechanism(std::unique_ptr<OnlineRowFactorizer> factorizer, const Dataset& data, double eps, double delta,
                   std::uint64_t seed, bool noiseless = false)
      : fact_(std::move(factorizer)), data_(data), growing_(data.universe()), rng_(seed), seed_(seed),
        noiseless_(noiseless) {
    if (!fact_ || fact_->dim() != data.universe()) throw BadInput("factorizer dimension must match the universe");
    sigma_ = std::sqrt(release_sigma2(eps, delta, data.size()));
  }

  double sigma() const { return noiseless_ ? 0.0 : sigma_; }
  std::uint64_t seed() const { return seed_; }
  bool noiseless() const { return noiseless_; }
  const GrowingFactorization& factorization() const { return growing_; }
  // Noisy strategy answers indexed by right-row id.
  const std::vector<double>& noisy() const { return noisy_; }
  std::size_t noise_draws() const { return draws_; }
  std::size_t cache_reads() const { return reads_; }

  ReleaseStep step(std::span<const double> q) {
    if (q.size() != data_.universe()) throw BadInput("query width mismatch");
    for (double v : q)
      if (!(v >= 0.0 && v <= 1.0)) throw BadInput("query entries must lie in [0, 1]");
    StepResult r;
    try {
      r = fact_->step(q);
    } catch (const BadInput&) {
      throw;
    } catch (const std::exception& e) {
      throw PipelineError(std::string("factorizer failed: ") + e.what());
    }
    if (r.asserted) throw PipelineError("factorizer asserted under a doubling wrapper");
    growing_.append(r);
    const double n = static_cast<double>(data_.size());
    for (const RightRow& rr : r.new_rows) {
      double v = dot(rr.entries, data_.histogram()) / n;
      if (!noiseless_) v += sigma_ * rng_.gaussian();
      noisy_.push_back(v);
      ++draws_;
    }
    ReleaseStep out;
    out.answer = combine(r.left);
    out.truth = data_.answer(q);
    out.value_bound = sparse_norm2(r.left);
    out.left = std::move(r.left);
    return out;
  }

  // Recomputes <ell, noisy> in the same order as step(), for the decomposition check.
  double combine(const SparseRow& left) {
    double a = 0.0;
    for (const Coef& c : left) {
      a += c.value * noisy_.at(c.id);
      ++reads_;
    }
    return a;
  }

 private:
  std::unique_ptr<OnlineRowFactorizer> fact_;
  const Dataset& data_;
  GrowingFactorization growing_;
  CounterRng rng_;
  std::uint64_t seed_;
  bool noiseless_;
  double sigma_ = 0.0;
  std::vector<double> noisy_;
  std::size_t draws_ = 0;
  std::size_t reads_ = 0;
};

enum class AnalystMode { NonAdaptive, Adaptive };

struct TranscriptEntry {
  Vec query;
  double answer = 0.0;
  double truth = 0.0;
  double value_bound = 0.0;
};
using Transcript = std::vector<TranscriptEntry>;

// Returns the next query given the transcript so far, or nothing to stop.
using Analyst = std::function<std::optional<Vec>(const Transcript&)>;

// Runs the analyst against the mechanism for at most max_queries rounds. In non-adaptive mode
// every query is drawn before the first answer is computed, and the analyst sees no answers.
inline Transcript run_transcript(ReleaseMechanism& mech, const Analyst& analyst, AnalystMode mode,
                                 std::size_t max_queries) {
  auto ask = [&](const Transcript& seen) -> std::optional<Vec> {
    try {
      return analyst(seen);
    } catch (const std::exception& e) {
      throw AnalystError(std::string("analyst failed: ") + e.what());
    } catch (...) {
      throw AnalystError("analyst failed");
    }
  };
  Transcript out;
  if (mode == AnalystMode::NonAdaptive) {
    std::vector<Vec> queries;
    const Transcript blind;
    while (queries.size() < max_queries) {
      auto q = ask(blind);
      if (!q) break;
      queries.push_back(std::move(*q));
    }
    for (Vec& q : queries) {
      ReleaseStep s = mech.step(q);
      out.push_back({std::move(q), s.answer, s.truth, s.value_bound});
    }
    return out;
  }
  while (out.size() < max_queries) {
    auto q = ask(out);
    if (!q) break;
    ReleaseStep s = mech.step(*q);
    out.push_back({std::move(*q), s.answer, s.truth, s.value_bound});
  }
  return out;
}

// Non-adaptive analyst replaying the rows of a fixed workload.
inline Analyst workload_analyst(const Matrix& q) {
  auto next = std::make_shared<std::size_t>(0);
  return [q, next](const Transcript&) -> std::optional<Vec> {
    if (*next >= q.rows()) return std::nullopt;
    return q.row_vec((*next)++);
  };
}

// Records every step of an inner factorizer so the run can be replayed without recomputation.
class RecordingFactorizer : public OnlineRowFactorizer {
 public:
  explicit RecordingFactorizer(std::unique_ptr<OnlineRowFactorizer> inner) : inner_(std::move(inner)) {}
  std::size_t dim() const override { return inner_->dim(); }
  StepResult step(std::span<const double> q) override {
    StepResult r = inner_->step(q);
    log_->push_back(r);
    return r;
  }
  std::shared_ptr<const std::vector<StepResult>> log() const { return log_; }

 private:
  std::unique_ptr<OnlineRowFactorizer> inner_;
  std::shared_ptr<std::vector<StepResult>> log_ = std::make_shared<std::vector<StepResult>>();
};

// Replays recorded steps in order. The factorizers are deterministic, so a replay is
// indistinguishable from rerunning on the same rows.
class ReplayFactorizer : public OnlineRowFactorizer {
 public:
  ReplayFactorizer(std::size_t dim, std::shared_ptr<const std::vector<StepResult>> log)
      : dim_(dim), log_(std::move(log)) {}
  std::size_t dim() const override { return dim_; }
  StepResult step(std::span<const double> q) override {
    if (q.size() != dim_) throw BadInput("row width mismatch");
    if (next_ >= log_->size()) throw InvalidState("replay log exhausted");
    return (*log_)[next_++];
  }

 private:
  std::size_t dim_;
  std::shared_ptr<const std::vector<StepResult>> log_;
  std::size_t next_ = 0;
};

}  // namespace onlinegamma2
