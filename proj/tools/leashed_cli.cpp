// leashed: run SGD experiments, evaluate the retry-loop fluid model, and
// stress-test the shared parameter object.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "leashed/leashed.hpp"

namespace {

struct RunFlags {
  std::string algo = "leashed";
  unsigned threads = 1;
  float step_size = 0.005f;
  std::size_t batch_size = 32;
  std::string persistence = "inf";
  std::string epsilon = "0.5";
  std::string arch = "tiny";
  std::string dataset = "blobs";
  std::uint64_t seed = 1;
  double time_budget = 120.0;
  std::string out_dir;
  bool pin_cores = false;
  unsigned monitor_ms = 250;
  std::uint64_t max_updates = 0;
  bool yield_publish = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--algo", f.algo, "seq, async, hogwild or leashed")
      ->check(CLI::IsMember({"seq", "async", "hogwild", "leashed"}));
  cmd->add_option("--threads", f.threads, "worker threads (m)")->check(CLI::PositiveNumber);
  cmd->add_option("--step-size", f.step_size, "SGD step size (eta)");
  cmd->add_option("--batch-size", f.batch_size, "mini-batch size")->check(CLI::PositiveNumber);
  cmd->add_option("--persistence", f.persistence, "Leashed persistence bound T_p: 0,1,... or inf");
  cmd->add_option("--epsilon", f.epsilon, "comma-separated fractions of f(theta_0), e.g. 0.75,0.5,0.25,0.1");
  cmd->add_option("--arch", f.arch, "mlp, cnn or tiny")->check(CLI::IsMember({"mlp", "cnn", "tiny"}));
  cmd->add_option("--dataset", f.dataset,
                  "mnist:IMAGES,LABELS[,LIMIT] or blobs[:classes=10,dims=16,per_class=200,spread=1,sep=4,seed=1]");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--time-budget", f.time_budget, "wall-clock budget in seconds");
  cmd->add_option("--out-dir", f.out_dir, "directory for summary/updates/progress/memory CSVs");
  cmd->add_option("--pin-cores", f.pin_cores, "pin worker i to core i mod #cores (true/false)");
  cmd->add_option("--monitor-ms", f.monitor_ms, "convergence monitor period in ms")->check(CLI::PositiveNumber);
  cmd->add_option("--max-updates", f.max_updates, "stop after this many published updates (0 = no limit)");
  cmd->add_flag("--yield-publish", f.yield_publish,
                "yield before each Leashed publish attempt (contention emulation on few cores)");
}

leashed::ExperimentConfig to_config(const RunFlags& f) {
  leashed::ExperimentConfig cfg;
  auto& o = cfg.optimizer;
  o.algo = *leashed::parse_algorithm(f.algo);
  o.threads = f.threads;
  o.eta = f.step_size;
  o.batch_size = f.batch_size;
  o.persistence = leashed::parse_persistence(f.persistence);
  o.epsilons.clear();
  for (auto part : leashed::csv::split(f.epsilon)) {
    if (!part.empty()) o.epsilons.push_back(leashed::csv::parse<double>(part, "epsilon"));
  }
  o.seed = f.seed;
  o.time_budget_s = f.time_budget;
  o.pin_cores = f.pin_cores;
  o.monitor_interval = std::chrono::milliseconds(f.monitor_ms);
  o.max_updates = f.max_updates;
  o.yield_before_publish = f.yield_publish;
  cfg.arch = *leashed::parse_architecture(f.arch);
  cfg.dataset = f.dataset;
  cfg.out_dir = f.out_dir;
  return cfg;
}

void print_report(const leashed::RunReport& r) {
  const auto st = leashed::summarize_staleness(r.result.updates);
  std::printf("%s: %s  f0=%.4f  updates=%llu abandoned=%llu  wall=%.3fs  iter=%.1fus\n",
              r.run_id.c_str(), std::string(leashed::to_string(r.result.status)).c_str(), r.result.f0,
              static_cast<unsigned long long>(st.published), static_cast<unsigned long long>(st.abandoned),
              static_cast<double>(r.result.wall_ns) * 1e-9, r.mean_iter_ns * 1e-3);
  for (const auto& hit : r.result.eps) {
    if (hit.reached) {
      std::printf("  eps=%-6g reached at %.3fs after %lld updates\n", hit.eps,
                  static_cast<double>(hit.wall_ns) * 1e-9, static_cast<long long>(hit.iters));
    } else {
      std::printf("  eps=%-6g not reached\n", hit.eps);
    }
  }
  std::printf("  mean tau_c=%.3f tau_s=%.3f max tau=%llu  max live payloads=%lld\n", st.mean_tau_c,
              st.mean_tau_s, static_cast<unsigned long long>(st.max_tau),
              static_cast<long long>(r.result.counters.census.max_live));
}

int cmd_run(const RunFlags& f) {
  const leashed::RunReport r = leashed::run_experiment(to_config(f));
  print_report(r);
  return leashed::exit_code(r.result.status);
}

int cmd_sweep(const RunFlags& f, const std::string& threads_list, unsigned repeats, std::uint64_t seed_stride) {
  std::vector<leashed::ExperimentConfig> settings;
  for (auto part : leashed::csv::split(threads_list)) {
    RunFlags g = f;
    g.threads = leashed::csv::parse<unsigned>(part, "thread count");
    settings.push_back(to_config(g));
  }
  const auto result = leashed::sweep(settings, repeats, seed_stride, &std::cerr);
  if (!f.out_dir.empty()) {
    std::ofstream agg(std::filesystem::path(f.out_dir) / "aggregate.csv");
    leashed::write_aggregate(agg, result);
  }
  leashed::write_aggregate(std::cout, result);
  for (const auto& s : result.settings) {
    if (s.converged != s.runs) return 2;
  }
  return 0;
}

struct DynamicsFlags {
  double m = 16, tc = 4, tu = 2, gamma = 0, n0 = 0;
  std::size_t steps = 50;
  std::string simulate = "none";
  std::uint64_t seed = 1;
  std::uint64_t events = 1'000'000;
};

int cmd_dynamics(const DynamicsFlags& f) {
  leashed::dynamics::Params p{f.m, f.tc, f.tu, f.gamma, f.n0, f.steps};
  p.validate();
  const auto rec = leashed::dynamics::recurrence(p);
  std::optional<leashed::dynamics::SimulationResult> sim;
  if (f.simulate != "none") {
    leashed::dynamics::SimulationOptions so;
    so.durations = f.simulate == "det" ? leashed::dynamics::Durations::Deterministic
                                       : leashed::dynamics::Durations::Exponential;
    so.seed = f.seed;
    so.events = f.events;
    sim = leashed::dynamics::simulate_events(p, so);
  }

  std::cout << "t,n_recurrence,n_closed" << (sim ? ",n_simulated" : "") << '\n';
  for (std::size_t t = 0; t < rec.size(); ++t) {
    std::cout << t << ',' << leashed::csv::num(rec[t]) << ',';
    if (f.gamma == 0) std::cout << leashed::csv::num(leashed::dynamics::closed_form(p, t).value);
    if (sim) {
      std::cout << ',';
      if (t < sim->trajectory.size()) std::cout << leashed::csv::num(sim->trajectory[t]);
    }
    std::cout << '\n';
  }
  std::cerr << "fixed point n* = " << leashed::dynamics::fixed_point(p)
            << (leashed::dynamics::is_stable(p) ? " (stable)" : " (unstable: |1-1/Tc-(1+g)/Tu| >= 1)") << '\n';
  if (sim) {
    std::cerr << "simulated time-average occupancy = " << sim->mean_occupancy << " over " << sim->events
              << " events\n";
  }
  return 0;
}

struct VerifyFlags {
  unsigned threads = 4;
  std::uint64_t ops = 1'000'000;
  std::size_t dim = 64;
  std::string persistence = "inf";
  double yield = 0.05;
  std::uint64_t seed = 1;
};

int cmd_verify(const VerifyFlags& f) {
  leashed::stress::Options o;
  o.threads = f.threads;
  o.acquires = f.ops;
  o.dim = f.dim;
  o.persistence = leashed::parse_persistence(f.persistence);
  o.yield_probability = f.yield;
  o.seed = f.seed;
  const auto r = leashed::stress::run(o);
  auto line = [](const char* name, bool ok, const std::string& detail) {
    std::printf("%-28s %s  %s\n", name, ok ? "PASS" : "FAIL", detail.c_str());
  };
  line("monotone reads", r.monotonic_violations == 0,
       std::to_string(r.acquires) + " acquires, " + std::to_string(r.monotonic_violations) + " regressions");
  line("no read after reclaim", r.read_after_reclaim == 0, std::to_string(r.read_after_reclaim) + " events");
  line("total order of publishes", r.order_violations == 0,
       std::to_string(r.published) + " published, " + std::to_string(r.order_violations) + " violations");
  line("reclaim once", r.reclaim_violations == 0,
       std::to_string(r.census.reclaimed) + " reclaimed, " + std::to_string(r.reclaim_violations) + " violations");
  line("live payloads <= 3m", r.max_live <= r.live_bound,
       "max " + std::to_string(r.max_live) + ", bound " + std::to_string(r.live_bound));
  line("failed CAS has a winner", r.cas_failures_unexplained == 0,
       std::to_string(r.cas_failures) + " failures, " + std::to_string(r.cas_failures_unexplained) + " unexplained");
  line("publish exactly once", r.candidates == r.published + r.abandoned,
       std::to_string(r.candidates) + " candidates = " + std::to_string(r.published) + " published + " +
           std::to_string(r.abandoned) + " abandoned");
  return r.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lock-free parallel SGD experiments"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "train with one algorithm and write CSV telemetry");
  add_run_flags(run, run_flags);

  RunFlags sweep_flags;
  std::string threads_list = "1,2,4,8";
  unsigned repeats = 11;
  std::uint64_t seed_stride = 1;
  auto* sw = app.add_subcommand("sweep", "repeat a run over thread counts and seeds, aggregate quantiles");
  add_run_flags(sw, sweep_flags);
  sw->add_option("--threads-list", threads_list, "comma-separated thread counts");
  sw->add_option("--repeats", repeats, "runs per setting")->check(CLI::PositiveNumber);
  sw->add_option("--seed-stride", seed_stride, "seed increment between repeats (0 = same seed)");

  DynamicsFlags dyn;
  auto* dynamics = app.add_subcommand("dynamics", "retry-loop fluid model trajectory as CSV");
  dynamics->add_option("--m", dyn.m, "threads");
  dynamics->add_option("--tc", dyn.tc, "gradient computation time T_c");
  dynamics->add_option("--tu", dyn.tu, "update time T_u");
  dynamics->add_option("--gamma", dyn.gamma, "persistence departure surplus");
  dynamics->add_option("--n0", dyn.n0, "threads initially in the retry loop");
  dynamics->add_option("--steps", dyn.steps, "recurrence steps");
  dynamics->add_option("--simulate", dyn.simulate, "none, det or exp")
      ->check(CLI::IsMember({"none", "det", "exp"}));
  dynamics->add_option("--seed", dyn.seed, "simulation seed");
  dynamics->add_option("--events", dyn.events, "simulated phase completions");

  VerifyFlags ver;
  auto* verify = app.add_subcommand("verify", "concurrency stress and invariant checks");
  verify->add_option("--threads", ver.threads, "threads")->check(CLI::PositiveNumber);
  verify->add_option("--ops", ver.ops, "total acquire operations");
  verify->add_option("--dim", ver.dim, "payload length")->check(CLI::PositiveNumber);
  verify->add_option("--persistence", ver.persistence, "0,1,... or inf");
  verify->add_option("--yield", ver.yield, "yield probability at interleaving points");
  verify->add_option("--seed", ver.seed, "seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_flags);
    if (*sw) return cmd_sweep(sweep_flags, threads_list, repeats, seed_stride);
    if (*dynamics) return cmd_dynamics(dyn);
    if (*verify) return cmd_verify(ver);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
