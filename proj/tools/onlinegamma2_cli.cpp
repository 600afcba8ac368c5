#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "onlinegamma2/avg_factorizer.hpp"
#include "onlinegamma2/discrepancy_walk.hpp"
#include "onlinegamma2/dp_release.hpp"
#include "onlinegamma2/io.hpp"
#include "onlinegamma2/median_mechanism.hpp"
#include "onlinegamma2/oracles.hpp"
#include "onlinegamma2/transforms.hpp"
#include "onlinegamma2/vc_net.hpp"

using json = nlohmann::ordered_json;
using namespace onlinegamma2;

namespace {

constexpr int kSchemaVersion = 1;
constexpr const char* kVersion = "1.0.0";

int log_level() {
  const char* v = std::getenv("ONLINEGAMMA2_LOG");
  return v ? std::atoi(v) : 0;
}

void log(int level, const std::string& msg) {
  if (log_level() >= level) std::cerr << "[onlinegamma2] " << msg << '\n';
}

// ---------------------------------------------------------------------------
// Reproducible output

std::string format_double(double x) {
  if (!std::isfinite(x)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// JSON writer with 17 significant digits for every floating-point number.
void write_json(std::ostream& os, const json& j, int indent = 0) {
  const std::string pad(static_cast<std::size_t>(indent) + 2, ' '), end(static_cast<std::size_t>(indent), ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ",\n";
        first = false;
        os << pad << json(it.key()).dump() << ": ";
        write_json(os, it.value(), indent + 2);
      }
      os << '\n' << end << '}';
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      const bool flat = std::all_of(j.begin(), j.end(), [](const json& v) { return v.is_primitive(); });
      if (flat) {
        os << '[';
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) os << ", ";
          write_json(os, j[i], indent);
        }
        os << ']';
        return;
      }
      os << "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << ",\n";
        os << pad;
        write_json(os, j[i], indent + 2);
      }
      os << '\n' << end << ']';
      return;
    }
    case json::value_t::number_float:
      os << format_double(j.get<double>());
      return;
    default:
      os << j.dump();
  }
}

// Git blob id: SHA-1 of "blob <size>\0" followed by the content.
std::string git_blob_sha1(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), content.data(), content.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md, &len) != 1)
    throw std::runtime_error("SHA-1 computation failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

json module_versions() {
  json v;
  for (const char* m : {"linalg-core", "avg-factorizer", "transforms", "vc-net", "dp-release", "median-mechanism",
                        "discrepancy-walk", "oracles", "cli"})
    v[m] = kVersion;
  return v;
}

// ---------------------------------------------------------------------------
// Shared options

struct Common {
  std::uint64_t seed = 0;
  std::string out;
  std::size_t jobs = 1;
};

struct MatrixSource {
  std::string input;
  std::string family;
  std::size_t n = 0;
  std::size_t m = 0;
};

struct Inputs {
  json hashes = json::object();
  json source = json::object();
};

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw BadInput("cannot open " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void add_source_options(CLI::App* cmd, MatrixSource& src, const std::string& what) {
  cmd->add_option("--input", src.input, what + " CSV, one row per line");
  cmd->add_option("--family", src.family, "generated workload family instead of --input");
  cmd->add_option("--n", src.n, "columns of the generated workload");
  cmd->add_option("--m", src.m, "rows of the generated workload (0: family default)");
}

// Returns the rows and the column count; an empty input yields no rows.
std::pair<std::vector<Vec>, std::size_t> load_rows(const MatrixSource& src, std::uint64_t seed, Inputs& in) {
  if (!src.input.empty()) {
    if (!src.family.empty()) throw BadInput("--input and --family are exclusive");
    const std::string text = slurp(src.input);
    in.hashes[src.input] = git_blob_sha1(text);
    in.source = {{"input", src.input}};
    std::istringstream is(text);
    auto rows = read_csv_rows(is);
    const std::size_t width = rows.empty() ? 0 : rows[0].size();
    return {std::move(rows), width};
  }
  if (src.family.empty()) throw BadInput("one of --input or --family is required");
  Matrix q = gen_workload(parse_family(src.family), src.n, src.m, seed);
  in.source = {{"family", src.family}, {"n", src.n}, {"m", q.rows()}};
  std::vector<Vec> rows;
  for (std::size_t i = 0; i < q.rows(); ++i) rows.push_back(q.row_vec(i));
  return {std::move(rows), q.cols()};
}

Matrix to_matrix(const std::vector<Vec>& rows, std::size_t width) {
  Matrix q(rows.size(), width);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j) q(i, j) = rows[i][j];
  return q;
}

Dataset load_dataset(const std::string& path, std::size_t universe, Inputs& in) {
  if (path.empty()) throw BadInput("--data is required");
  const std::string text = slurp(path);
  in.hashes[path] = git_blob_sha1(text);
  std::istringstream is(text);
  return Dataset(universe, read_records(is));
}

void emit(const Common& c, const std::string& command, json config, const Inputs& in, json result) {
  json report;
  report["schemaVersion"] = kSchemaVersion;
  report["command"] = command;
  config["seed"] = c.seed;
  if (!in.source.empty()) config["source"] = in.source;
  report["config"] = std::move(config);
  report["inputHash"] = in.hashes;
  report["versions"] = module_versions();
  report["result"] = std::move(result);
  if (c.out.empty()) {
    write_json(std::cout, report);
    std::cout << '\n';
    return;
  }
  std::ofstream f(c.out);
  if (!f) throw BadInput("cannot write " + c.out);
  write_json(f, report);
  f << '\n';
}

// Runs fn(k) for k in [0, count) on a pool of `jobs` threads; results stay in index order.
template <class Fn>
auto parallel_map(std::size_t count, std::size_t jobs, Fn fn) {
  using R = decltype(fn(std::size_t{0}));
  std::vector<std::optional<R>> out(count);
  std::vector<std::exception_ptr> errs(count);
  std::size_t next = 0;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      std::size_t k;
      {
        std::lock_guard lock(mu);
        if (next >= count) return;
        k = next++;
      }
      try {
        out[k].emplace(fn(k));
      } catch (...) {
        errs[k] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < std::max<std::size_t>(jobs, 1); ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::vector<R> res;
  for (std::size_t k = 0; k < count; ++k) {
    if (errs[k]) std::rethrow_exception(errs[k]);
    res.push_back(std::move(*out[k]));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Subcommands

struct FactorizeOpts {
  MatrixSource src;
  std::optional<double> gamma;
  double cexp = 0.5;
  std::string trace;
};

int cmd_factorize(const Common& c, const FactorizeOpts& o) {
  Inputs in;
  auto [rows, n] = load_rows(o.src, c.seed, in);
  json config{{"cexp", o.cexp}, {"trace", o.trace}};
  if (o.gamma) config["gamma"] = *o.gamma;
  std::ofstream trace;
  if (!o.trace.empty()) {
    trace.open(o.trace);
    if (!trace) throw BadInput("cannot write " + o.trace);
    trace << "t,left_norm,right_1to2,gamma2_lower,ratio\n";
  }
  json result{{"steps", rows.size()}};
  if (rows.empty()) {
    result["maxRatio"] = 0.0;
    emit(c, "factorize", config, in, result);
    return 0;
  }
  std::unique_ptr<OnlineRowFactorizer> f;
  DoublingRowFactorizer* doubling = nullptr;
  if (o.gamma) {
    f = make_bounded_pipeline(n, *o.gamma);
  } else {
    auto d = make_row_pipeline(n, o.cexp);
    doubling = d.get();
    f = std::move(d);
  }
  GrowingFactorization g(n);
  Matrix q = to_matrix(rows, n);
  json left_norms = json::array(), lowers = json::array(), ratios = json::array();
  double lower = 0.0, max_ratio = 0.0;
  std::optional<std::size_t> asserted_at;
  for (std::size_t t = 0; t < rows.size(); ++t) {
    StepResult r = f->step(rows[t]);
    if (r.asserted) {
      asserted_at = t + 1;
      break;
    }
    g.append(r);
    const double ln = std::sqrt(sparse_norm2(r.left));
    // Prefix lower bounds are monotone in t, so keep the running maximum.
    lower = std::max(lower, gammaF_dual_ascent(q.top_rows(t + 1)).lower_bound);
    const double ratio = lower > 0.0 ? ln / lower : 0.0;
    max_ratio = std::max(max_ratio, ratio);
    left_norms.push_back(ln);
    lowers.push_back(lower);
    ratios.push_back(ratio);
    if (trace)
      trace << t + 1 << ',' << format_double(ln) << ',' << format_double(g.max_col_norm()) << ','
            << format_double(lower) << ',' << format_double(ratio) << '\n';
    log(2, "step " + std::to_string(t + 1) + " |l|=" + format_double(ln));
  }
  result["leftNorm"] = left_norms;
  result["gamma2Lower"] = lowers;
  result["ratio"] = ratios;
  result["maxRatio"] = max_ratio;
  result["rightRows"] = g.num_right_rows();
  result["maxColumnNorm"] = g.max_col_norm();
  if (doubling) result["phases"] = doubling->phase();
  if (asserted_at) result["assertedAt"] = *asserted_at;
  emit(c, "factorize", config, in, result);
  return 0;
}

struct ReleaseOpts {
  MatrixSource src;
  std::string data;
  double eps = 1.0;
  double delta = 1e-6;
  std::size_t sweep = 1;
  bool noiseless = false;
};

int cmd_release(const Common& c, const ReleaseOpts& o) {
  Inputs in;
  auto [rows, n] = load_rows(o.src, c.seed, in);
  json config{{"eps", o.eps}, {"delta", o.delta}, {"sweep", o.sweep}, {"noiseless", o.noiseless}};
  check_budget(o.eps, o.delta);
  if (rows.empty()) {
    emit(c, "release", config, in, json::array());
    return 0;
  }
  const Dataset data = load_dataset(o.data, n, in);
  const Matrix q = to_matrix(rows, n);
  auto run = [&](std::size_t k) {
    const std::uint64_t seed = c.seed + k;
    ReleaseMechanism mech(make_row_pipeline(n), data, o.eps, o.delta, seed, o.noiseless);
    json err = json::array(), bound = json::array(), answers = json::array();
    double max_err = 0.0;
    for (std::size_t t = 0; t < q.rows(); ++t) {
      ReleaseStep s = mech.step(q.row(t));
      const double e = std::abs(s.answer - s.truth);
      max_err = std::max(max_err, e);
      err.push_back(e);
      bound.push_back(s.value_bound);
      answers.push_back(s.answer);
    }
    return json{{"seed", seed},         {"eps", o.eps},       {"delta", o.delta},     {"n", data.size()},
                {"sigma", mech.sigma()}, {"answers", answers}, {"perStepError", err}, {"maxError", max_err},
                {"valueBound", bound},   {"noiseDraws", mech.noise_draws()}};
  };
  auto runs = parallel_map(o.sweep, c.jobs, run);
  json result = o.sweep == 1 ? runs[0] : json(runs);
  emit(c, "release", config, in, result);
  return 0;
}

struct DiscOpts {
  MatrixSource src;
  std::optional<double> walk_c;
  bool brute = false;
};

int cmd_disc(const Common& c, const DiscOpts& o) {
  Inputs in;
  auto [cols, m] = load_rows(o.src, c.seed, in);
  json config{{"brute", o.brute}};
  if (o.walk_c) config["walkC"] = *o.walk_c;
  json result;
  if (cols.empty()) {
    result = {{"signs", json::array()}, {"maxPrefixInf", 0.0}, {"restarts", 0}};
    emit(c, "disc", config, in, result);
    return 0;
  }
  OnlineDiscrepancy d(m, {.seed = c.seed, .horizon = cols.size(), .walk_c = o.walk_c});
  json prefix = json::array();
  double worst_consistency = 0.0;
  for (const Vec& a : cols) {
    DiscStep s = d.step(a);
    prefix.push_back(s.prefix_inf);
    worst_consistency = std::max(worst_consistency, s.consistency_error);
  }
  result["signs"] = d.signs();
  result["prefixInf"] = prefix;
  result["maxPrefixInf"] = d.max_prefix_inf();
  result["gammaEstimate"] = d.gamma_estimate();
  result["consistencyError"] = worst_consistency;
  result["walkC"] = d.walk_c();
  result["restarts"] = d.restarts();
  result["walkFailures"] = d.failures();
  if (o.brute || cols.size() <= 22) result["bruteOptimum"] = brute_prefix_disc(cols);
  // Short streams: show the prefix value at every step, which makes the t=2 / t=3 tradeoff visible.
  if (cols.size() <= 8)
    for (std::size_t t = 0; t < cols.size(); ++t)
      std::cerr << "t=" << t + 1 << " sign=" << d.signs()[t] << " prefix_inf=" << format_double(prefix[t].get<double>())
                << '\n';
  emit(c, "disc", config, in, result);
  return 0;
}

struct HdiscOpts {
  MatrixSource src;
  std::size_t w = 1;
  bool modified = false;
  std::uint64_t guard = kDefaultGuard;
};

int cmd_hdisc(const Common& c, const HdiscOpts& o) {
  Inputs in;
  auto [rows, n] = load_rows(o.src, c.seed, in);
  json config{{"w", o.w}, {"modified", o.modified}, {"guard", o.guard}};
  const double v = rows.empty() ? 0.0 : hdisc_bruteforce(to_matrix(rows, n), o.w, o.modified, o.guard);
  emit(c, "hdisc", config, in, json{{"hdisc", v}});
  return 0;
}

struct MedianOpts {
  MatrixSource src;
  std::string data;
  double eps = 1.0;
  double delta = 1e-6;
  double beta = 0.05;
  std::uint64_t guard = kDefaultGuard;
  bool noiseless = false;
  std::optional<double> tau;
  std::size_t sweep = 1;
};

int cmd_median(const Common& c, const MedianOpts& o) {
  Inputs in;
  auto [rows, n] = load_rows(o.src, c.seed, in);
  json config{{"eps", o.eps},     {"delta", o.delta},         {"beta", o.beta},
              {"guard", o.guard}, {"noiseless", o.noiseless}, {"sweep", o.sweep}};
  if (o.tau) config["tau"] = *o.tau;
  check_budget(o.eps, o.delta);
  if (rows.empty()) {
    emit(c, "median", config, in, json::array());
    return 0;
  }
  const Dataset data = load_dataset(o.data, n, in);
  const Matrix q = to_matrix(rows, n);
  MedianConfig cfg{.eps = o.eps, .delta = o.delta, .beta = o.beta, .guard = o.guard, .noiseless = o.noiseless,
                   .tau_override = o.tau};
  auto run = [&](std::size_t k) {
    const std::uint64_t seed = c.seed + k;
    OuterRunResult r = run_outer(data, q, cfg, seed);
    json err = json::array(), loops = json::array(), halving = json::array(), taus = json::array();
    double max_err = 0.0;
    for (std::size_t t = 0; t < r.answers.size(); ++t) {
      const double e = std::abs(r.answers[t] - data.answer(q.row(t)));
      max_err = std::max(max_err, e);
      err.push_back(e);
    }
    for (const InnerRunResult& ir : r.runs) {
      loops.push_back(ir.loops);
      taus.push_back(ir.params.tau);
      json h = json::array();
      for (const HalvingEvent& ev : ir.halving) h.push_back(json::array({ev.before, ev.after}));
      halving.push_back(h);
    }
    return json{{"seed", seed},         {"n", data.size()},         {"answers", r.answers},
                {"perStepError", err},   {"maxError", max_err},      {"sStar", r.s_star},
                {"truncated", r.truncated}, {"innerLoopCounts", loops}, {"tau", taus},
                {"halvingTrace", halving}};
  };
  auto runs = parallel_map(o.sweep, c.jobs, run);
  emit(c, "median", config, in, o.sweep == 1 ? runs[0] : json(runs));
  return 0;
}

int cmd_lowerbound(const Common& c, std::size_t n) {
  Inputs in;
  std::shared_ptr<OnlineRowFactorizer> p = make_row_pipeline(n);
  LowerBoundReport rep = lowerbound_harness(n, snapshots_of(p));
  json result{{"ratios", rep.ratios},          {"ratio", rep.ratio},           {"bound", rep.bound},
              {"validOnline", rep.valid_online}, {"meetsBound", rep.meets_bound()}};
  emit(c, "lowerbound", json{{"n", n}}, in, result);
  if (!rep.meets_bound()) {
    std::cerr << "error: ratio " << format_double(rep.ratio) << " below bound " << format_double(rep.bound) << '\n';
    return 1;
  }
  return 0;
}

struct VCNetOpts {
  MatrixSource src;
  double d = 2.0;
  std::optional<double> audit_d;
};

int cmd_vcnet(const Common& c, const VCNetOpts& o) {
  Inputs in;
  auto [rows, n] = load_rows(o.src, c.seed, in);
  json config{{"d", o.d}};
  if (o.audit_d) config["auditD"] = *o.audit_d;
  if (rows.empty()) {
    emit(c, "vcnet", config, in, json{{"steps", 0}});
    return 0;
  }
  VCNet net(n, {.expected_m = rows.size(), .d = o.d});
  GrowingFactorization g(n);
  double max_left = 0.0, max_rec = 0.0;
  for (std::size_t t = 0; t < rows.size(); ++t) {
    StepResult r = net.step(rows[t]);
    g.append(r);
    max_left = std::max(max_left, sparse_norm2(r.left));
    Vec rec = g.reconstruct(t);
    for (std::size_t j = 0; j < n; ++j) max_rec = std::max(max_rec, std::abs(rec[j] - rows[t][j]));
  }
  json layers = json::array();
  for (const auto& layer : net.layers()) layers.push_back(layer.size());
  PackingAudit audit = net.packing_audit(o.audit_d.value_or(o.d));
  json result{{"steps", rows.size()},
              {"rightRows", g.num_right_rows()},
              {"frobenius2", g.frobenius2()},
              {"maxLeftNorm2", max_left},
              {"leftNorm2Bound", net.left_norm2_bound()},
              {"maxReconstructionError", max_rec},
              {"layerSizes", layers},
              {"packingRatios", audit.ratios},
              {"packingOk", audit.ok}};
  emit(c, "vcnet", config, in, result);
  return 0;
}

int cmd_oracle(const Common& c, const MatrixSource& src) {
  Inputs in;
  auto [rows, n] = load_rows(src, c.seed, in);
  json result;
  if (rows.empty()) {
    result = {{"lower", 0.0}, {"upper", 0.0}};
  } else {
    const Matrix q = to_matrix(rows, n);
    Gamma2Bounds b = gamma2_bounds(q);
    result = {{"lower", b.lower},
              {"upper", b.upper},
              {"gammaF", b.dual.value},
              {"gammaFUpper", gammaF_upper(q, b.dual.weights)},
              {"dualWeights", b.dual.weights}};
  }
  emit(c, "oracle", json::object(), in, result);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online gamma-2 factorization, private query release and online discrepancy"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--seed", common.seed, "64-bit seed")->capture_default_str();
  app.add_option("--out", common.out, "JSON report path (default: stdout)");
  app.add_option("--jobs", common.jobs, "worker threads for --sweep")->capture_default_str();

  FactorizeOpts fo;
  auto* fac = app.add_subcommand("factorize", "stream rows through the online factorization pipeline");
  add_source_options(fac, fo.src, "row stream");
  fac->add_option("--gamma", fo.gamma, "fixed guess; runs the bounded pipeline without doubling");
  fac->add_option("--cexp", fo.cexp, "doubling phase exponent c")->capture_default_str();
  fac->add_option("--trace", fo.trace, "per-step CSV trace path");

  ReleaseOpts ro;
  auto* rel = app.add_subcommand("release", "private online query release");
  add_source_options(rel, ro.src, "query workload");
  rel->add_option("--data", ro.data, "dataset CSV of universe indices")->required();
  rel->add_option("--eps", ro.eps, "privacy parameter epsilon")->capture_default_str();
  rel->add_option("--delta", ro.delta, "privacy parameter delta")->capture_default_str();
  rel->add_option("--sweep", ro.sweep, "number of consecutive seeds")->capture_default_str();
  rel->add_flag("--noiseless", ro.noiseless, "disable noise");

  DiscOpts dopt;
  auto* disc = app.add_subcommand("disc", "online prefix discrepancy of a column stream");
  add_source_options(disc, dopt.src, "column stream");
  disc->add_option("--walk-c", dopt.walk_c, "walk scale override");
  disc->add_flag("--brute", dopt.brute, "also compute the offline optimum");

  HdiscOpts ho;
  auto* hd = app.add_subcommand("hdisc", "brute-force hereditary discrepancy");
  add_source_options(hd, ho.src, "matrix");
  hd->add_option("--w", ho.w, "largest column subset")->capture_default_str();
  hd->add_flag("--modified", ho.modified, "append the all-ones row");
  hd->add_option("--guard", ho.guard, "enumeration guard")->capture_default_str();

  MedianOpts mo;
  auto* med = app.add_subcommand("median", "sparsity-doubling median mechanism");
  add_source_options(med, mo.src, "query workload");
  med->add_option("--data", mo.data, "dataset CSV of universe indices")->required();
  med->add_option("--eps", mo.eps, "privacy parameter epsilon")->capture_default_str();
  med->add_option("--delta", mo.delta, "privacy parameter delta")->capture_default_str();
  med->add_option("--beta", mo.beta, "failure probability")->capture_default_str();
  med->add_option("--guard", mo.guard, "candidate-set guard")->capture_default_str();
  med->add_flag("--noiseless", mo.noiseless, "zero every Laplace draw");
  med->add_option("--tau", mo.tau, "threshold override");
  med->add_option("--sweep", mo.sweep, "number of consecutive seeds")->capture_default_str();

  std::size_t lb_n = 8;
  auto* lb = app.add_subcommand("lowerbound", "scaled Hadamard stream against the pipeline");
  lb->add_option("--n", lb_n, "power of two, at most 64")->capture_default_str();

  VCNetOpts vo;
  auto* vc = app.add_subcommand("vcnet", "hierarchical net factorization of Boolean rows");
  add_source_options(vc, vo.src, "Boolean row stream");
  vc->add_option("--d", vo.d, "shatter exponent")->capture_default_str();
  vc->add_option("--audit-d", vo.audit_d, "exponent used by the packing audit");

  MatrixSource os;
  auto* orc = app.add_subcommand("oracle", "offline gamma-2 bounds");
  add_source_options(orc, os, "matrix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    log(1, "running " + app.get_subcommands().front()->get_name());
    if (*fac) return cmd_factorize(common, fo);
    if (*rel) return cmd_release(common, ro);
    if (*disc) return cmd_disc(common, dopt);
    if (*hd) return cmd_hdisc(common, ho);
    if (*med) return cmd_median(common, mo);
    if (*lb) return cmd_lowerbound(common, lb_n);
    if (*vc) return cmd_vcnet(common, vo);
    if (*orc) return cmd_oracle(common, os);
  } catch (const BadInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const BadSpec& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const BudgetViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
