#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <unistd.h>

#include <gtest/gtest.h>

#include "leashed/harness.hpp"
#include "support/oracles.hpp"

using namespace leashed;

namespace {

ExperimentConfig quick(Algorithm algo, unsigned m) {
  ExperimentConfig c;
  c.optimizer.algo = algo;
  c.optimizer.threads = m;
  c.optimizer.time_budget_s = 10;
  c.optimizer.monitor_interval = std::chrono::milliseconds(20);
  c.optimizer.epsilons = {0.75, 0.5};
  c.dataset = "blobs";
  return c;
}

std::filesystem::path scratch_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() / ("leashed-harness-" + tag + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST(Csv, NumbersRoundTripExactly) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(gen) * std::pow(10.0, static_cast<int>(gen() % 40) - 20);
    EXPECT_EQ(csv::parse<double>(csv::num(v), "v"), v);
    const float f = static_cast<float>(v);
    EXPECT_EQ(csv::parse<float>(csv::num(f), "f"), f);
  }
  EXPECT_THROW(csv::parse<int>("12x", "n"), std::runtime_error);
  EXPECT_THROW(csv::parse<int>("", "n"), std::runtime_error);
}

TEST(Csv, HeaderAndFieldCountChecked) {
  std::istringstream wrong("a,b\n1,2\n");
  EXPECT_THROW(csv::read(wrong, "a,c"), std::runtime_error);
  std::istringstream ragged("a,b\n1,2,3\n");
  EXPECT_THROW(csv::read(ragged, "a,b"), std::runtime_error);
  std::istringstream empty("");
  EXPECT_THROW(csv::read(empty, "a,b"), std::runtime_error);
}

TEST(Csv, PersistenceAndStatusTokens) {
  EXPECT_EQ(persistence_string(std::nullopt), "inf");
  EXPECT_EQ(persistence_string(3u), "3");
  EXPECT_EQ(parse_persistence("inf"), std::nullopt);
  EXPECT_EQ(parse_persistence("0"), std::optional<std::uint32_t>(0));
  EXPECT_THROW(parse_persistence("-1"), std::runtime_error);
  EXPECT_EQ(parse_status("Diverge"), RunStatus::Diverge);
  EXPECT_FALSE(parse_status("ok"));
}

TEST(Report, CsvRoundTrip) {
  ExperimentConfig cfg = quick(Algorithm::Leashed, 3);
  cfg.optimizer.persistence = 1;
  cfg.optimizer.yield_before_publish = true;
  cfg.optimizer.epsilons = {0.75, 0.5, 1e-9};
  cfg.optimizer.time_budget_s = 0.5;
  const RunReport r = run_experiment(cfg);

  std::stringstream s, u, p, m;
  write_summary_header(s);
  write_summary(s, r);
  write_updates_header(u);
  write_updates(u, r);
  write_progress_header(p);
  write_progress(p, r);
  write_memory_header(m);
  write_memory(m, r);

  EXPECT_EQ(read_summary(s), summary_rows(r));
  const auto ups = read_updates(u);
  ASSERT_EQ(ups.size(), r.result.updates.size());
  for (std::size_t i = 0; i < ups.size(); ++i) {
    EXPECT_EQ(ups[i].run_id, r.run_id);
    ASSERT_EQ(ups[i].record, r.result.updates[i]);
  }
  const auto prog = read_progress(p);
  ASSERT_EQ(prog.size(), r.result.progress.size());
  for (std::size_t i = 0; i < prog.size(); ++i) EXPECT_EQ(prog[i].sample, r.result.progress[i]);
  const auto mem = read_memory(m);
  ASSERT_EQ(mem.size(), r.result.memory.size());
  for (std::size_t i = 0; i < mem.size(); ++i) EXPECT_EQ(mem[i].sample, r.result.memory[i]);

  const auto rows = summary_rows(r);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].tp, "1");
  EXPECT_EQ(rows[2].eps_time_ns, -1);  // 1e-9 is out of reach
  EXPECT_EQ(rows[0].status, "Diverge");
}

TEST(Report, FilesWrittenWithSchemas) {
  const auto dir = scratch_dir("files");
  ExperimentConfig cfg = quick(Algorithm::Seq, 1);
  cfg.out_dir = dir;
  const RunReport a = run_experiment(cfg);
  cfg.optimizer.seed = 2;
  cfg.run_id = "second";
  run_experiment(cfg);

  std::ifstream s(dir / "summary.csv");
  const auto rows = read_summary(s);
  ASSERT_EQ(rows.size(), 4u);  // two runs x two epsilons, one header
  EXPECT_EQ(rows[0].run_id, "seq-m1-s1");
  EXPECT_EQ(rows[0].tp, "-");
  EXPECT_EQ(rows[3].run_id, "second");
  std::ifstream u(dir / "updates.csv");
  const auto ups = read_updates(u);
  EXPECT_GT(ups.size(), a.result.updates.size());
  for (const char* f : {"progress.csv", "memory.csv"}) EXPECT_TRUE(std::filesystem::exists(dir / f));
  std::filesystem::remove_all(dir);
}

TEST(Report, SeqRunHasAllZeroStaleness) {
  const RunReport r = run_experiment(quick(Algorithm::Seq, 1));
  EXPECT_EQ(r.result.status, RunStatus::Converged);
  EXPECT_EQ(exit_code(r.result.status), 0);
  for (const auto& w : staleness_windows(r.result.updates, 1'000'000)) {
    EXPECT_EQ(w.tau.max, 0.0);
    EXPECT_EQ(w.mean, 0.0);
  }
}

TEST(Report, LeashedTpZeroEveryRowHasZeroRetryStaleness) {
  ExperimentConfig cfg = quick(Algorithm::Leashed, 8);
  cfg.optimizer.persistence = 0;
  cfg.optimizer.yield_before_publish = true;
  cfg.optimizer.max_updates = 3000;
  cfg.optimizer.epsilons.clear();
  const RunReport r = run_experiment(cfg);
  std::stringstream u;
  write_updates_header(u);
  write_updates(u, r);
  for (const auto& row : read_updates(u)) {
    if (!row.record.abandoned) {
      ASSERT_EQ(row.record.tau_s, 0u);
    }
  }
  EXPECT_LE(r.result.counters.census.max_live, 24);
}

TEST(ExitCodes, Distinct) {
  EXPECT_EQ(exit_code(RunStatus::Converged), 0);
  EXPECT_NE(exit_code(RunStatus::Diverge), 0);
  EXPECT_NE(exit_code(RunStatus::Crash), 0);
  EXPECT_NE(exit_code(RunStatus::Diverge), exit_code(RunStatus::Crash));
}

TEST(Datasets, Selectors) {
  const Dataset d = load_dataset("blobs:classes=3,dims=5,per_class=7,seed=4");
  EXPECT_EQ(d.size(), 21u);
  EXPECT_EQ(d.classes, 3u);
  EXPECT_EQ(d.feature_size(), 5u);
  EXPECT_THROW(load_dataset("blobs:colour=red"), std::invalid_argument);
  EXPECT_THROW(load_dataset("cifar"), std::invalid_argument);
  EXPECT_THROW(load_dataset("mnist:onlyone"), std::invalid_argument);
  EXPECT_THROW(load_dataset("mnist:/nonexistent/a,/nonexistent/b"), std::runtime_error);
  EXPECT_EQ(nn::param_count(network_for(Architecture::Tiny, d, 4)), 5u * 4 + 4 + 4 * 3 + 3);
  EXPECT_EQ(nn::param_count(network_for(Architecture::Mlp, d)), 134'794u);
}

TEST(Staleness, WindowsMatchSortOracle) {
  std::mt19937_64 gen(3);
  std::vector<UpdateRecord> recs;
  std::map<std::int64_t, std::vector<double>> by_window;
  const std::int64_t window = 1000;
  for (int i = 0; i < 5000; ++i) {
    UpdateRecord r;
    r.wall_ns = static_cast<std::int64_t>(i) * 3 + static_cast<std::int64_t>(gen() % 3);
    r.tau_c = gen() % 17;
    r.tau_s = gen() % 5;
    r.abandoned = gen() % 10 == 0;
    r.seq = r.abandoned ? 0 : static_cast<std::uint64_t>(i + 1);
    recs.push_back(r);
    if (!r.abandoned) by_window[r.wall_ns / window].push_back(static_cast<double>(r.tau()));
  }
  const auto ws = staleness_windows(recs, window);
  ASSERT_EQ(ws.size(), by_window.size());
  std::size_t i = 0;
  for (const auto& [idx, taus] : by_window) {
    const auto& w = ws[i++];
    EXPECT_EQ(w.start_ns, idx * window);
    EXPECT_EQ(w.count, taus.size());
    EXPECT_DOUBLE_EQ(w.tau.min, oracle::sorted_percentile(taus, 0));
    EXPECT_DOUBLE_EQ(w.tau.q1, oracle::sorted_percentile(taus, 0.25));
    EXPECT_DOUBLE_EQ(w.tau.median, oracle::sorted_percentile(taus, 0.5));
    EXPECT_DOUBLE_EQ(w.tau.q3, oracle::sorted_percentile(taus, 0.75));
    EXPECT_DOUBLE_EQ(w.tau.max, oracle::sorted_percentile(taus, 1));
  }

  // one window covering everything equals the global distribution
  const auto all = staleness_windows(recs, 1'000'000'000);
  ASSERT_EQ(all.size(), 1u);
  std::vector<double> taus;
  for (const auto& r : recs)
    if (!r.abandoned) taus.push_back(static_cast<double>(r.tau()));
  EXPECT_DOUBLE_EQ(all[0].tau.median, oracle::sorted_percentile(taus, 0.5));
  EXPECT_EQ(all[0].count, taus.size());
  EXPECT_THROW(staleness_windows(recs, 0), std::invalid_argument);
}

TEST(Staleness, SummaryCountsAbandonment) {
  std::vector<UpdateRecord> recs{{0, 1, 10, 2, 1, 2, false}, {1, 0, 11, 0, 3, 1, true},
                                 {1, 2, 12, 0, 0, 1, false}, {0, 3, 13, 4, 1, 3, false}};
  const auto s = summarize_staleness(recs);
  EXPECT_EQ(s.published, 3u);
  EXPECT_EQ(s.abandoned, 1u);
  EXPECT_DOUBLE_EQ(s.mean_tau_c, 2.0);
  EXPECT_DOUBLE_EQ(s.mean_tau_s, 2.0 / 3.0);
  EXPECT_EQ(s.max_tau, 5u);
  EXPECT_DOUBLE_EQ(s.gamma_hat, 1.0 / 3.0);
}

TEST(Quantiles, Ordered) {
  const auto q = quantiles({5, 1, 4, 2, 3});
  EXPECT_EQ(q.min, 1);
  EXPECT_EQ(q.q1, 2);
  EXPECT_EQ(q.median, 3);
  EXPECT_EQ(q.q3, 4);
  EXPECT_EQ(q.max, 5);
  EXPECT_EQ(quantiles({}).count, 0u);
}

TEST(Sweep, SameSeedSeqHasNoSpread) {
  ExperimentConfig cfg = quick(Algorithm::Seq, 1);
  cfg.optimizer.monitor_every_updates = 100;
  const auto res = sweep({cfg}, 11, /*seed_stride=*/0);
  ASSERT_EQ(res.settings.size(), 1u);
  const auto& s = res.settings[0];
  EXPECT_EQ(s.runs, 11u);
  EXPECT_EQ(s.converged, 11u);
  for (const auto& q : s.iters) {
    EXPECT_EQ(q.count, 11u);
    EXPECT_EQ(q.min, q.max);
  }
}

TEST(Sweep, DistinctSeedsGiveOrderedQuantiles) {
  std::vector<ExperimentConfig> settings;
  for (unsigned m : {1u, 2u, 4u}) settings.push_back(quick(Algorithm::Leashed, m));
  const auto res = sweep(settings, 5);
  ASSERT_EQ(res.settings.size(), 3u);
  ASSERT_EQ(res.reports.size(), 15u);
  for (const auto& s : res.settings) {
    for (const auto& q : s.time_ns) {
      EXPECT_LE(q.min, q.q1);
      EXPECT_LE(q.q1, q.median);
      EXPECT_LE(q.median, q.q3);
      EXPECT_LE(q.q3, q.max);
    }
    EXPECT_GT(s.time_ns.back().median, 0);
  }
  std::stringstream out;
  write_aggregate(out, res);
  std::string header;
  std::getline(out, header);
  EXPECT_EQ(header, kAggregateHeader);
}

TEST(Sweep, FailedRunIsRecordedAndSweepContinues) {
  ExperimentConfig bad = quick(Algorithm::Leashed, 2);
  bad.out_dir = "/proc/leashed-cannot-write-here";
  ExperimentConfig good = quick(Algorithm::Seq, 1);
  const auto res = sweep({bad, good}, 2);
  ASSERT_EQ(res.settings.size(), 2u);
  EXPECT_EQ(res.settings[0].crashed, 2u);
  EXPECT_EQ(res.settings[1].converged, 2u);
}
