#pragma once

// Experiment orchestration: dataset/architecture selection, one run or a
// sweep of runs, telemetry aggregation and the CSV files
//
//   summary.csv   run_id,algo,m,eta,tp,batch,seed,status,f0,eps,eps_time_ns,eps_iters,mean_iter_ns
//   updates.csv   run_id,thread_id,seq,wall_ns,tau_c,tau_s,tries,abandoned
//   progress.csv  run_id,wall_ns,seq,loss
//   memory.csv    run_id,wall_ns,live_payloads,live_bytes
//
// Unreached epsilons are written with eps_time_ns = eps_iters = -1. Reals are
// written in shortest round-trip form.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "leashed/data.hpp"
#include "leashed/nn.hpp"
#include "leashed/optimizers.hpp"

namespace leashed {

// ---------------------------------------------------------------------------
// Formatting and parsing helpers

namespace csv {

template <typename T>
std::string num(T v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf, end);
}

template <typename T>
T parse(std::string_view s, std::string_view what) {
  T v{};
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) {
    throw std::runtime_error("cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Reads a CSV with the given header; returns the data rows split into fields.
inline std::vector<std::vector<std::string>> read(std::istream& in, std::string_view header) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV, expected header: " + std::string(header));
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) {
    throw std::runtime_error("CSV header mismatch: got '" + line + "', expected '" + std::string(header) + "'");
  }
  const std::size_t cols = split(header).size();
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line);
    if (fields.size() != cols) {
      throw std::runtime_error("CSV row has " + std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(cols) + ": " + line);
    }
    rows.emplace_back(fields.begin(), fields.end());
  }
  return rows;
}

}  // namespace csv

inline constexpr std::string_view kSummaryHeader =
    "run_id,algo,m,eta,tp,batch,seed,status,f0,eps,eps_time_ns,eps_iters,mean_iter_ns";
inline constexpr std::string_view kUpdatesHeader =
    "run_id,thread_id,seq,wall_ns,tau_c,tau_s,tries,abandoned";
inline constexpr std::string_view kProgressHeader = "run_id,wall_ns,seq,loss";
inline constexpr std::string_view kMemoryHeader = "run_id,wall_ns,live_payloads,live_bytes";

inline std::string persistence_string(const std::optional<std::uint32_t>& tp) {
  return tp ? std::to_string(*tp) : "inf";
}

inline std::optional<std::uint32_t> parse_persistence(std::string_view s) {
  if (s == "inf" || s == "unbounded") return std::nullopt;
  return csv::parse<std::uint32_t>(s, "persistence");
}

inline std::optional<RunStatus> parse_status(std::string_view s) {
  if (s == "Converged") return RunStatus::Converged;
  if (s == "Diverge") return RunStatus::Diverge;
  if (s == "Crash") return RunStatus::Crash;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Statistics

// Five-number summary with linear interpolation between order statistics
// (position q * (n - 1)).
struct Quantiles {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  std::size_t count = 0;
};

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

inline Quantiles quantiles(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  Quantiles q;
  q.count = values.size();
  if (values.empty()) return q;
  q.min = values.front();
  q.q1 = quantile_sorted(values, 0.25);
  q.median = quantile_sorted(values, 0.5);
  q.q3 = quantile_sorted(values, 0.75);
  q.max = values.back();
  return q;
}

struct StalenessWindow {
  std::int64_t start_ns = 0;
  std::size_t count = 0;
  double mean = 0;
  Quantiles tau;
};

// Per-window distribution of tau = tau_c + tau_s over published updates.
// Records must be sorted by wall time. Windows with no updates are skipped.
inline std::vector<StalenessWindow> staleness_windows(const std::vector<UpdateRecord>& records,
                                                      std::int64_t window_ns) {
  if (window_ns <= 0) throw std::invalid_argument("window must be positive");
  std::vector<StalenessWindow> out;
  std::vector<double> taus;
  std::int64_t current = -1;
  auto flush = [&] {
    if (taus.empty()) return;
    StalenessWindow w;
    w.start_ns = current * window_ns;
    w.count = taus.size();
    double sum = 0;
    for (double t : taus) sum += t;
    w.mean = sum / static_cast<double>(taus.size());
    w.tau = quantiles(std::move(taus));
    out.push_back(w);
    taus.clear();
  };
  for (const UpdateRecord& r : records) {
    if (r.abandoned) continue;
    const std::int64_t idx = r.wall_ns / window_ns;
    if (idx != current) {
      flush();
      current = idx;
    }
    taus.push_back(static_cast<double>(r.tau()));
  }
  flush();
  return out;
}

struct StalenessSummary {
  double mean_tau_c = 0;
  double mean_tau_s = 0;
  std::uint64_t max_tau = 0;
  std::uint64_t published = 0;
  std::uint64_t abandoned = 0;
  // Surplus departure rate from the publish loop caused by abandonment:
  // (published + abandoned) / published - 1.
  double gamma_hat = 0;
};

inline StalenessSummary summarize_staleness(const std::vector<UpdateRecord>& records) {
  StalenessSummary s;
  double sc = 0, ss = 0;
  for (const UpdateRecord& r : records) {
    if (r.abandoned) {
      ++s.abandoned;
      continue;
    }
    ++s.published;
    sc += static_cast<double>(r.tau_c);
    ss += static_cast<double>(r.tau_s);
    s.max_tau = std::max(s.max_tau, r.tau());
  }
  if (s.published > 0) {
    s.mean_tau_c = sc / static_cast<double>(s.published);
    s.mean_tau_s = ss / static_cast<double>(s.published);
    s.gamma_hat = static_cast<double>(s.abandoned) / static_cast<double>(s.published);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Experiment description

enum class Architecture { Mlp, Cnn, Tiny };

inline std::optional<Architecture> parse_architecture(std::string_view s) {
  if (s == "mlp") return Architecture::Mlp;
  if (s == "cnn") return Architecture::Cnn;
  if (s == "tiny") return Architecture::Tiny;
  return std::nullopt;
}

inline std::string_view to_string(Architecture a) {
  switch (a) {
    case Architecture::Mlp: return "mlp";
    case Architecture::Cnn: return "cnn";
    case Architecture::Tiny: return "tiny";
  }
  return "?";
}

inline nn::NetworkSpec network_for(Architecture a, const Dataset& data, std::size_t tiny_hidden = 32) {
  switch (a) {
    case Architecture::Mlp: return nn::mlp_spec();
    case Architecture::Cnn: return nn::cnn_spec();
    case Architecture::Tiny:
      return nn::tiny_spec(data.feature_size(), tiny_hidden, std::max<std::size_t>(data.classes, 2));
  }
  throw std::invalid_argument("unknown architecture");
}

// Dataset selectors:
//   mnist:IMAGES,LABELS[,LIMIT]
//   blobs[:classes=10,dims=16,per_class=200,spread=1,sep=4,seed=1]
inline Dataset load_dataset(std::string_view selector) {
  const std::size_t colon = selector.find(':');
  const std::string_view kind = selector.substr(0, colon);
  const std::string_view args = colon == std::string_view::npos ? "" : selector.substr(colon + 1);
  if (kind == "mnist") {
    const auto parts = csv::split(args);
    if (parts.size() < 2 || parts.size() > 3) {
      throw std::invalid_argument("mnist dataset needs IMAGES,LABELS[,LIMIT]");
    }
    const std::size_t limit = parts.size() == 3 ? csv::parse<std::size_t>(parts[2], "mnist limit") : 10'000;
    return load_mnist_idx(std::string(parts[0]), std::string(parts[1]), limit);
  }
  if (kind == "blobs") {
    BlobsOptions o;
    if (!args.empty()) {
      for (std::string_view kv : csv::split(args)) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string_view::npos) throw std::invalid_argument("blobs option without '=': " + std::string(kv));
        const std::string_view key = kv.substr(0, eq), val = kv.substr(eq + 1);
        if (key == "classes") o.classes = csv::parse<std::size_t>(val, key);
        else if (key == "dims") o.dims = csv::parse<std::size_t>(val, key);
        else if (key == "per_class") o.per_class = csv::parse<std::size_t>(val, key);
        else if (key == "spread") o.spread = csv::parse<double>(val, key);
        else if (key == "sep") o.separation = csv::parse<double>(val, key);
        else if (key == "seed") o.seed = csv::parse<std::uint64_t>(val, key);
        else throw std::invalid_argument("unknown blobs option: " + std::string(key));
      }
    }
    return synthetic_blobs(o);
  }
  throw std::invalid_argument("unknown dataset kind: " + std::string(kind));
}

struct ExperimentConfig {
  OptimizerConfig optimizer;
  Architecture arch = Architecture::Tiny;
  std::string dataset = "blobs";
  std::filesystem::path out_dir;  // empty: no files
  std::string run_id;             // empty: derived from the configuration
};

inline std::string default_run_id(const OptimizerConfig& c) {
  std::string id = std::string(to_string(c.algo)) + "-m" + std::to_string(c.threads);
  if (c.algo == Algorithm::Leashed) id += "-tp" + persistence_string(c.persistence);
  id += "-s" + std::to_string(c.seed);
  return id;
}

struct RunReport {
  std::string run_id;
  OptimizerConfig config;
  RunResult result;
  // wall time / published updates
  double mean_iter_ns = 0;
  // mean per-thread gap between consecutive published updates of one thread
  // (includes failed publish attempts and abandoned gradients)
  double mean_update_ns = 0;
};

inline RunReport make_report(std::string run_id, const OptimizerConfig& cfg, RunResult result) {
  RunReport r;
  r.run_id = std::move(run_id);
  r.config = cfg;
  r.config.on_publish = nullptr;
  r.result = std::move(result);
  const auto published = r.result.counters.published;
  if (published > 0) r.mean_iter_ns = static_cast<double>(r.result.wall_ns) / static_cast<double>(published);

  std::map<std::uint32_t, std::int64_t> last;
  double gaps = 0;
  std::uint64_t n = 0;
  for (const UpdateRecord& u : r.result.updates) {
    if (u.abandoned) continue;
    auto [it, fresh] = last.try_emplace(u.thread_id, 0);
    gaps += static_cast<double>(u.wall_ns - it->second);
    ++n;
    it->second = u.wall_ns;
  }
  if (n > 0) r.mean_update_ns = gaps / static_cast<double>(n);
  return r;
}

// ---------------------------------------------------------------------------
// CSV emission

struct SummaryRow {
  std::string run_id;
  std::string algo;
  unsigned m = 0;
  float eta = 0;
  std::string tp;
  std::size_t batch = 0;
  std::uint64_t seed = 0;
  std::string status;
  double f0 = 0;
  double eps = 0;
  std::int64_t eps_time_ns = -1;
  std::int64_t eps_iters = -1;
  double mean_iter_ns = 0;
  friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

struct UpdateRow {
  std::string run_id;
  UpdateRecord record;
  friend bool operator==(const UpdateRow&, const UpdateRow&) = default;
};

struct ProgressRow {
  std::string run_id;
  ProgressSample sample;
  friend bool operator==(const ProgressRow&, const ProgressRow&) = default;
};

struct MemoryRow {
  std::string run_id;
  MemorySample sample;
  friend bool operator==(const MemoryRow&, const MemoryRow&) = default;
};

inline std::vector<SummaryRow> summary_rows(const RunReport& r) {
  std::vector<SummaryRow> rows;
  SummaryRow base;
  base.run_id = r.run_id;
  base.algo = std::string(to_string(r.config.algo));
  base.m = r.config.threads;
  base.eta = r.config.eta;
  base.tp = r.config.algo == Algorithm::Leashed ? persistence_string(r.config.persistence) : "-";
  base.batch = r.config.batch_size;
  base.seed = r.config.seed;
  base.status = std::string(to_string(r.result.status));
  base.f0 = r.result.f0;
  base.mean_iter_ns = r.mean_iter_ns;
  for (const EpsilonHit& hit : r.result.eps) {
    SummaryRow row = base;
    row.eps = hit.eps;
    row.eps_time_ns = hit.reached ? hit.wall_ns : -1;
    row.eps_iters = hit.reached ? hit.iters : -1;
    rows.push_back(row);
  }
  if (rows.empty()) {
    base.eps = 0;
    rows.push_back(base);
  }
  return rows;
}

inline void write_summary_header(std::ostream& out) { out << kSummaryHeader << '\n'; }
inline void write_updates_header(std::ostream& out) { out << kUpdatesHeader << '\n'; }
inline void write_progress_header(std::ostream& out) { out << kProgressHeader << '\n'; }
inline void write_memory_header(std::ostream& out) { out << kMemoryHeader << '\n'; }

inline void write_summary(std::ostream& out, const RunReport& r) {
  for (const SummaryRow& s : summary_rows(r)) {
    out << s.run_id << ',' << s.algo << ',' << s.m << ',' << csv::num(s.eta) << ',' << s.tp << ','
        << s.batch << ',' << s.seed << ',' << s.status << ',' << csv::num(s.f0) << ','
        << csv::num(s.eps) << ',' << s.eps_time_ns << ',' << s.eps_iters << ','
        << csv::num(s.mean_iter_ns) << '\n';
  }
}

inline void write_updates(std::ostream& out, const RunReport& r) {
  for (const UpdateRecord& u : r.result.updates) {
    out << r.run_id << ',' << u.thread_id << ',' << u.seq << ',' << u.wall_ns << ',' << u.tau_c << ','
        << u.tau_s << ',' << u.tries << ',' << (u.abandoned ? 1 : 0) << '\n';
  }
}

inline void write_progress(std::ostream& out, const RunReport& r) {
  for (const ProgressSample& p : r.result.progress) {
    out << r.run_id << ',' << p.wall_ns << ',' << p.seq << ',' << csv::num(p.loss) << '\n';
  }
}

inline void write_memory(std::ostream& out, const RunReport& r) {
  for (const MemorySample& m : r.result.memory) {
    out << r.run_id << ',' << m.wall_ns << ',' << m.live_payloads << ',' << m.live_bytes << '\n';
  }
}

inline std::vector<SummaryRow> read_summary(std::istream& in) {
  std::vector<SummaryRow> out;
  for (const auto& f : csv::read(in, kSummaryHeader)) {
    SummaryRow s;
    s.run_id = f[0];
    s.algo = f[1];
    s.m = csv::parse<unsigned>(f[2], "m");
    s.eta = csv::parse<float>(f[3], "eta");
    s.tp = f[4];
    s.batch = csv::parse<std::size_t>(f[5], "batch");
    s.seed = csv::parse<std::uint64_t>(f[6], "seed");
    s.status = f[7];
    s.f0 = csv::parse<double>(f[8], "f0");
    s.eps = csv::parse<double>(f[9], "eps");
    s.eps_time_ns = csv::parse<std::int64_t>(f[10], "eps_time_ns");
    s.eps_iters = csv::parse<std::int64_t>(f[11], "eps_iters");
    s.mean_iter_ns = csv::parse<double>(f[12], "mean_iter_ns");
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<UpdateRow> read_updates(std::istream& in) {
  std::vector<UpdateRow> out;
  for (const auto& f : csv::read(in, kUpdatesHeader)) {
    UpdateRow u;
    u.run_id = f[0];
    u.record.thread_id = csv::parse<std::uint32_t>(f[1], "thread_id");
    u.record.seq = csv::parse<std::uint64_t>(f[2], "seq");
    u.record.wall_ns = csv::parse<std::int64_t>(f[3], "wall_ns");
    u.record.tau_c = csv::parse<std::uint64_t>(f[4], "tau_c");
    u.record.tau_s = csv::parse<std::uint64_t>(f[5], "tau_s");
    u.record.tries = csv::parse<std::uint32_t>(f[6], "tries");
    u.record.abandoned = csv::parse<int>(f[7], "abandoned") != 0;
    out.push_back(std::move(u));
  }
  return out;
}

inline std::vector<ProgressRow> read_progress(std::istream& in) {
  std::vector<ProgressRow> out;
  for (const auto& f : csv::read(in, kProgressHeader)) {
    out.push_back({f[0], {csv::parse<std::int64_t>(f[1], "wall_ns"), csv::parse<std::uint64_t>(f[2], "seq"),
                          csv::parse<double>(f[3], "loss")}});
  }
  return out;
}

inline std::vector<MemoryRow> read_memory(std::istream& in) {
  std::vector<MemoryRow> out;
  for (const auto& f : csv::read(in, kMemoryHeader)) {
    out.push_back({f[0], {csv::parse<std::int64_t>(f[1], "wall_ns"),
                          csv::parse<std::int64_t>(f[2], "live_payloads"),
                          csv::parse<std::int64_t>(f[3], "live_bytes")}});
  }
  return out;
}

// Appends one or more reports to the four CSV files in `dir`, writing
// headers for files that do not exist yet.
class CsvSink {
 public:
  explicit CsvSink(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    open(summary_, dir / "summary.csv", kSummaryHeader);
    open(updates_, dir / "updates.csv", kUpdatesHeader);
    open(progress_, dir / "progress.csv", kProgressHeader);
    open(memory_, dir / "memory.csv", kMemoryHeader);
  }

  void write(const RunReport& r) {
    write_summary(summary_, r);
    write_updates(updates_, r);
    write_progress(progress_, r);
    write_memory(memory_, r);
    for (auto* f : {&summary_, &updates_, &progress_, &memory_}) {
      f->flush();
      if (!*f) throw std::runtime_error("failed writing CSV output");
    }
  }

 private:
  static void open(std::ofstream& f, const std::filesystem::path& path, std::string_view header) {
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    f.open(path, std::ios::app);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    if (fresh) f << header << '\n';
  }

  std::ofstream summary_, updates_, progress_, memory_;
};

// ---------------------------------------------------------------------------
// Running experiments

// Runs one configuration on an already loaded dataset.
inline RunReport run_on(const ExperimentConfig& cfg, const Dataset& data) {
  cfg.optimizer.validate();
  const nn::Network<float> net(network_for(cfg.arch, data));
  const std::string id = cfg.run_id.empty() ? default_run_id(cfg.optimizer) : cfg.run_id;
  std::optional<CsvSink> sink;
  if (!cfg.out_dir.empty()) sink.emplace(cfg.out_dir);  // I/O errors surface before threads start
  RunReport report = make_report(id, cfg.optimizer, run(cfg.optimizer, net, data));
  if (sink) sink->write(report);
  return report;
}

inline RunReport run_experiment(const ExperimentConfig& cfg) {
  cfg.optimizer.validate();
  const Dataset data = load_dataset(cfg.dataset);
  return run_on(cfg, data);
}

struct SettingSummary {
  std::string setting;
  unsigned runs = 0;
  unsigned converged = 0;
  unsigned diverged = 0;
  unsigned crashed = 0;
  // per epsilon, over the runs that reached it
  std::vector<double> eps;
  std::vector<Quantiles> time_ns;
  std::vector<Quantiles> iters;
};

struct SweepResult {
  std::vector<RunReport> reports;
  std::vector<SettingSummary> settings;
};

inline constexpr std::string_view kAggregateHeader =
    "setting,runs,converged,diverge,crash,eps,reached,time_min,time_q1,time_median,time_q3,time_max,"
    "iters_min,iters_q1,iters_median,iters_q3,iters_max";

// Runs every setting `repeats` times; repeat r uses seed + r * seed_stride.
// A failing run (exception) is recorded as a Crash and the sweep continues.
inline SweepResult sweep(const std::vector<ExperimentConfig>& settings, unsigned repeats,
                         std::uint64_t seed_stride = 1, std::ostream* log = nullptr) {
  if (repeats == 0) throw std::invalid_argument("repeat count must be >= 1");
  SweepResult out;
  std::map<std::string, Dataset> datasets;
  for (const ExperimentConfig& base : settings) {
    base.optimizer.validate();
    if (!datasets.count(base.dataset)) datasets.emplace(base.dataset, load_dataset(base.dataset));
  }

  for (const ExperimentConfig& base : settings) {
    const std::string setting = base.run_id.empty() ? default_run_id(base.optimizer) : base.run_id;
    SettingSummary summary;
    summary.setting = setting;
    summary.eps = base.optimizer.epsilons;
    std::sort(summary.eps.begin(), summary.eps.end(), std::greater<>());
    std::vector<std::vector<double>> times(summary.eps.size()), iters(summary.eps.size());

    for (unsigned rep = 0; rep < repeats; ++rep) {
      ExperimentConfig cfg = base;
      cfg.optimizer.seed = base.optimizer.seed + rep * seed_stride;
      cfg.run_id = setting + "-r" + std::to_string(rep);
      RunReport report;
      try {
        report = run_on(cfg, datasets.at(cfg.dataset));
      } catch (const std::exception& e) {
        if (log) *log << cfg.run_id << ": " << e.what() << '\n';
        report.run_id = cfg.run_id;
        report.config = cfg.optimizer;
        report.result.status = RunStatus::Crash;
      }
      ++summary.runs;
      switch (report.result.status) {
        case RunStatus::Converged: ++summary.converged; break;
        case RunStatus::Diverge: ++summary.diverged; break;
        case RunStatus::Crash: ++summary.crashed; break;
      }
      for (std::size_t i = 0; i < summary.eps.size() && i < report.result.eps.size(); ++i) {
        const EpsilonHit& hit = report.result.eps[i];
        if (!hit.reached) continue;
        times[i].push_back(static_cast<double>(hit.wall_ns));
        iters[i].push_back(static_cast<double>(hit.iters));
      }
      if (log) {
        *log << cfg.run_id << ": " << to_string(report.result.status) << ", "
             << report.result.counters.published << " updates\n";
      }
      out.reports.push_back(std::move(report));
    }
    for (std::size_t i = 0; i < summary.eps.size(); ++i) {
      summary.time_ns.push_back(quantiles(times[i]));
      summary.iters.push_back(quantiles(iters[i]));
    }
    out.settings.push_back(std::move(summary));
  }
  return out;
}

inline void write_aggregate(std::ostream& out, const SweepResult& sweep) {
  out << kAggregateHeader << '\n';
  for (const SettingSummary& s : sweep.settings) {
    for (std::size_t i = 0; i < s.eps.size(); ++i) {
      const Quantiles& t = s.time_ns[i];
      const Quantiles& it = s.iters[i];
      out << s.setting << ',' << s.runs << ',' << s.converged << ',' << s.diverged << ',' << s.crashed
          << ',' << csv::num(s.eps[i]) << ',' << t.count;
      for (double v : {t.min, t.q1, t.median, t.q3, t.max, it.min, it.q1, it.median, it.q3, it.max}) {
        out << ',' << csv::num(v);
      }
      out << '\n';
    }
  }
}

inline int exit_code(RunStatus s) {
  switch (s) {
    case RunStatus::Converged: return 0;
    case RunStatus::Diverge: return 2;
    case RunStatus::Crash: return 3;
  }
  return 1;
}

}  // namespace leashed
