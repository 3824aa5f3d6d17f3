#pragma once

// Sequential SGD, lock-based AsyncSGD, Hogwild! and Leashed-SGD over a shared
// ParameterVector, all producing the same telemetry.
//
// Staleness accounting for one update:
//   t_g  sequence number of the version the gradient was computed on
//   t_e  sequence number of the latest version when the publish phase starts
//   t_p  sequence number assigned to the update
//   tau_c = t_e - t_g,  tau_s = t_p - 1 - t_e
// so t_p - t_g - 1 = tau_c + tau_s. Hogwild! has no publish phase: tau_s = 0
// and tau_c counts the updates that landed between its copy and the end of
// its own update.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#ifdef __linux__
#include <pthread.h>
#include <sched.h>
#endif

#include "leashed/data.hpp"
#include "leashed/nn.hpp"
#include "leashed/param_vector.hpp"

namespace leashed {

enum class Algorithm { Seq, Async, Hogwild, Leashed };

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Seq: return "seq";
    case Algorithm::Async: return "async";
    case Algorithm::Hogwild: return "hogwild";
    case Algorithm::Leashed: return "leashed";
  }
  return "?";
}

inline std::optional<Algorithm> parse_algorithm(std::string_view s) {
  if (s == "seq") return Algorithm::Seq;
  if (s == "async") return Algorithm::Async;
  if (s == "hogwild" || s == "hog") return Algorithm::Hogwild;
  if (s == "leashed") return Algorithm::Leashed;
  return std::nullopt;
}

enum class RunStatus { Converged, Diverge, Crash };

inline std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Converged: return "Converged";
    case RunStatus::Diverge: return "Diverge";
    case RunStatus::Crash: return "Crash";
  }
  return "?";
}

// Called after each published update with its sequence number and the
// resulting parameters. For Hogwild! with m > 1 the view is racy.
using PublishObserver = std::function<void(std::uint64_t seq, std::span<const float> theta)>;

struct OptimizerConfig {
  Algorithm algo = Algorithm::Seq;
  unsigned threads = 1;
  float eta = 0.005f;
  std::optional<std::uint32_t> persistence;  // Leashed only; nullopt = unbounded
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  double time_budget_s = 120.0;
  std::vector<double> epsilons{0.5};  // fractions of f(theta_0)

  std::chrono::milliseconds monitor_interval{250};
  // SEQ only: evaluate every k updates instead of on the clock, which makes
  // iterations-to-epsilon reproducible.
  std::uint64_t monitor_every_updates = 0;
  std::uint64_t max_updates = 0;  // 0 = unlimited
  std::size_t eval_size = 1000;
  bool pin_cores = false;
  // Yield between building a candidate and publishing it. On hosts with
  // fewer cores than threads this interleaves publishers the way real
  // parallelism would.
  bool yield_before_publish = false;
  bool poison_reclaimed = false;  // fill reclaimed payloads with NaN
  PublishObserver on_publish;

  void validate() const {
    if (threads == 0) throw std::invalid_argument("threads must be >= 1");
    if (algo == Algorithm::Seq && threads != 1) throw std::invalid_argument("seq requires exactly 1 thread");
    if (!(eta > 0)) throw std::invalid_argument("step size must be > 0");
    if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
    if (!(time_budget_s > 0)) throw std::invalid_argument("time budget must be > 0");
    if (eval_size == 0) throw std::invalid_argument("eval size must be >= 1");
    for (double e : epsilons) {
      if (!(e > 0 && e <= 1)) throw std::invalid_argument("epsilon values must lie in (0, 1]");
    }
  }
};

struct UpdateRecord {
  std::uint32_t thread_id = 0;
  std::uint64_t seq = 0;  // 0 for abandoned candidates
  std::int64_t wall_ns = 0;
  std::uint64_t tau_c = 0;
  std::uint64_t tau_s = 0;
  std::uint32_t tries = 1;
  bool abandoned = false;

  std::uint64_t tau() const noexcept { return tau_c + tau_s; }
  friend bool operator==(const UpdateRecord&, const UpdateRecord&) = default;
};

struct ProgressSample {
  std::int64_t wall_ns = 0;
  std::uint64_t seq = 0;
  double loss = 0;
  friend bool operator==(const ProgressSample&, const ProgressSample&) = default;
};

struct MemorySample {
  std::int64_t wall_ns = 0;
  std::int64_t live_payloads = 0;
  std::int64_t live_bytes = 0;
  friend bool operator==(const MemorySample&, const MemorySample&) = default;
};

struct EpsilonHit {
  double eps = 0;
  bool reached = false;
  std::int64_t wall_ns = -1;
  std::int64_t iters = -1;
};

struct RunCounters {
  std::uint64_t published = 0;
  std::uint64_t abandoned = 0;
  std::uint64_t candidates = 0;               // Leashed versions allocated for publishing
  std::uint64_t cas_failures = 0;
  std::uint64_t cas_failures_unexplained = 0;  // failed CAS with no newer version installed
  std::uint64_t stale_retries = 0;             // acquire_latest loops that saw a stale version
  std::uint64_t read_after_reclaim = 0;
  std::uint64_t reclaim_violations = 0;        // headers reclaimed != 0/1 times, or flag mismatch
  std::uint64_t headers = 0;
  PayloadCensus census;                        // at teardown
};

struct RunResult {
  RunStatus status = RunStatus::Diverge;
  double f0 = 0;
  std::vector<EpsilonHit> eps;
  std::vector<ProgressSample> progress;
  std::vector<MemorySample> memory;
  std::vector<UpdateRecord> updates;  // merged, sorted by wall_ns
  RunCounters counters;
  std::int64_t wall_ns = 0;
  std::vector<float> final_theta;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline void pin_to_core(unsigned index) {
#ifdef __linux__
  const unsigned cores = std::max(1u, std::thread::hardware_concurrency());
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(index % cores, &set);
  pthread_setaffinity_np(pthread_self(), sizeof(set), &set);
#else
  (void)index;
#endif
}

// State shared by the workers and the monitor of one run.
class RunContext {
 public:
  RunContext(const OptimizerConfig& cfg, const nn::Network<float>& net, const Dataset& data)
      : cfg(cfg), net(net), data(data), eval(data.head(cfg.eval_size)),
        store(net.param_count(), cfg.poison_reclaimed), eval_ws(net.make_workspace()) {
    cfg.validate();
    if (data.size() == 0) throw std::invalid_argument("training set is empty");
    if (data.feature_size() != net.input_size()) {
      throw std::invalid_argument("dataset example size " + std::to_string(data.feature_size()) +
                                  " does not match network input " + std::to_string(net.input_size()));
    }
    if (data.classes > net.classes()) {
      throw std::invalid_argument("dataset has more classes than the network outputs");
    }
    thresholds = cfg.epsilons;
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    for (double e : thresholds) result.eps.push_back({e});
  }

  const OptimizerConfig& cfg;
  const nn::Network<float>& net;
  const Dataset& data;
  const Dataset eval;
  VersionStore store;
  nn::Network<float>::Workspace eval_ws;
  std::vector<double> thresholds;  // descending
  RunResult result;

  std::atomic<bool> stop{false};
  std::atomic<bool> crashed{false};
  std::atomic<std::uint64_t> read_after_reclaim{0};
  Clock::time_point t0;
  Clock::time_point deadline;
  std::mutex wake_mu;
  std::condition_variable wake;

  std::int64_t now_ns() const {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0).count();
  }

  double evaluate(std::span<const float> theta) { return net.loss(theta, eval.view(), eval_ws); }

  void begin(std::span<const float> theta0) {
    result.f0 = evaluate(theta0);
    result.progress.push_back({0, 0, result.f0});
    sample_memory(0);
    if (!std::isfinite(result.f0)) crashed = true;
    t0 = Clock::now();
    deadline = t0 + std::chrono::duration_cast<Clock::duration>(
                        std::chrono::duration<double>(cfg.time_budget_s));
  }

  void sample_memory(std::int64_t wall) {
    const PayloadCensus c = store.census();
    result.memory.push_back({wall, c.live, c.live_bytes()});
  }

  // Records a loss observation; returns true once the run should stop.
  bool observe(std::int64_t wall, std::uint64_t seq, double loss) {
    result.progress.push_back({wall, seq, loss});
    sample_memory(wall);
    if (!std::isfinite(loss)) {
      crashed = true;
      return true;
    }
    for (EpsilonHit& hit : result.eps) {
      if (!hit.reached && loss <= hit.eps * result.f0) {
        hit.reached = true;
        hit.wall_ns = wall;
        hit.iters = static_cast<std::int64_t>(seq);
      }
    }
    return !result.eps.empty() && result.eps.back().reached;
  }

  void request_stop() {
    {
      std::lock_guard lock(wake_mu);
      stop = true;
    }
    wake.notify_all();
  }

  void flag_crash() {
    crashed = true;
    request_stop();
  }

  // Called by a worker after it published sequence number `seq`.
  void after_publish(std::uint64_t seq) {
    if (cfg.max_updates != 0 && seq >= cfg.max_updates) request_stop();
    else if (Clock::now() >= deadline) request_stop();
  }

  // Time-driven monitor. `snapshot` copies the current parameters into its
  // argument and returns their sequence number.
  template <typename Snapshot>
  void monitor(Snapshot&& snapshot) {
    std::vector<float> theta(store.dim());
    auto next = t0 + cfg.monitor_interval;
    for (;;) {
      {
        std::unique_lock lock(wake_mu);
        wake.wait_until(lock, std::min(next, deadline), [&] { return stop.load(); });
      }
      if (stop) return;
      const bool expired = Clock::now() >= deadline;
      const std::uint64_t seq = snapshot(std::span<float>(theta));
      const bool done = observe(now_ns(), seq, evaluate(theta));
      if (done || expired) {
        request_stop();
        return;
      }
      next += cfg.monitor_interval;
    }
  }

  // Final bookkeeping once every worker has joined.
  void finish(std::span<const float> final_theta, std::uint64_t final_seq,
              std::vector<std::vector<UpdateRecord>>& per_thread) {
    result.wall_ns = now_ns();
    if (!crashed) {
      const double loss = evaluate(final_theta);
      observe(result.wall_ns, final_seq, loss);
    } else {
      sample_memory(result.wall_ns);
    }
    result.final_theta.assign(final_theta.begin(), final_theta.end());

    for (auto& recs : per_thread) {
      result.updates.insert(result.updates.end(), recs.begin(), recs.end());
    }
    std::stable_sort(result.updates.begin(), result.updates.end(),
                     [](const UpdateRecord& a, const UpdateRecord& b) { return a.wall_ns < b.wall_ns; });
    for (const UpdateRecord& r : result.updates) {
      if (r.abandoned) ++result.counters.abandoned;
      else ++result.counters.published;
    }

    if (crashed) result.status = RunStatus::Crash;
    else if (result.eps.empty() || result.eps.back().reached) result.status = RunStatus::Converged;
    else result.status = RunStatus::Diverge;

    result.counters.read_after_reclaim += read_after_reclaim.load();
    result.counters.census = store.census();
    result.counters.headers = store.header_count();
    store.for_each_header([&](const ParameterVector& pv) {
      const auto n = pv.reclaim_count();
      if (n > 1 || (n == 1) != pv.is_deleted()) ++result.counters.reclaim_violations;
    });
  }
};

inline bool finite_loss(double loss) { return std::isfinite(loss); }

template <typename Body>
void spawn_workers(RunContext& ctx, unsigned m, Body&& body) {
  std::vector<std::thread> threads;
  threads.reserve(m);
  for (unsigned i = 0; i < m; ++i) {
    threads.emplace_back([&ctx, &body, i] {
      if (ctx.cfg.pin_cores) pin_to_core(i);
      body(i);
    });
  }
  for (auto& t : threads) t.join();
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline RunResult run_seq(const OptimizerConfig& cfg, const nn::Network<float>& net,
                         const Dataset& data) {
  if (cfg.threads != 1) throw std::invalid_argument("run_seq requires m = 1");
  detail::RunContext ctx(cfg, net, data);
  ParameterVector* param = ctx.store.create();
  param->rand_init(cfg.seed);
  ParameterVector* grad = ctx.store.create();
  ctx.begin(param->theta());

  std::vector<std::vector<UpdateRecord>> records(1);
  auto ws = net.make_workspace();
  BatchSampler sampler(data, cfg.batch_size, cfg.seed, 0);
  auto next_eval = detail::Clock::now() + cfg.monitor_interval;

  while (!ctx.crashed) {
    const double loss = net.loss_and_gradient(param->theta(), sampler.next(), grad->theta(), ws);
    if (!detail::finite_loss(loss)) {
      ctx.crashed = true;
      break;
    }
    param->update(grad->theta(), cfg.eta);
    const std::uint64_t seq = param->seq();
    records[0].push_back({0, seq, ctx.now_ns(), 0, 0, 1, false});
    if (cfg.on_publish) cfg.on_publish(seq, param->theta());

    const auto now = detail::Clock::now();
    const bool due = cfg.monitor_every_updates != 0 ? seq % cfg.monitor_every_updates == 0
                                                    : now >= next_eval;
    if (due) {
      if (ctx.observe(ctx.now_ns(), seq, ctx.evaluate(param->theta()))) break;
      next_eval = detail::Clock::now() + cfg.monitor_interval;
    }
    if (cfg.max_updates != 0 && seq >= cfg.max_updates) break;
    if (now >= ctx.deadline) break;
  }

  ctx.finish(param->theta(), param->seq(), records);
  return std::move(ctx.result);
}

inline RunResult run_async_lock(const OptimizerConfig& cfg, const nn::Network<float>& net,
                                const Dataset& data) {
  detail::RunContext ctx(cfg, net, data);
  ParameterVector* param = ctx.store.create();
  param->rand_init(cfg.seed);
  std::mutex mtx;
  ctx.begin(param->theta());

  std::vector<std::vector<UpdateRecord>> records(cfg.threads);
  std::thread monitor([&] {
    ctx.monitor([&](std::span<float> out) {
      std::lock_guard lock(mtx);
      std::ranges::copy(param->theta(), out.begin());
      return param->seq();
    });
  });

  detail::spawn_workers(ctx, cfg.threads, [&](unsigned tid) {
    ParameterVector* local_param = ctx.store.create();
    ParameterVector* local_grad = ctx.store.create();
    auto ws = net.make_workspace();
    BatchSampler sampler(data, cfg.batch_size, cfg.seed, tid);
    auto& out = records[tid];
    while (!ctx.stop) {
      std::uint64_t t_g = 0;
      {
        std::lock_guard lock(mtx);
        std::ranges::copy(param->theta(), local_param->theta().begin());
        t_g = param->seq();
      }
      const double loss = net.loss_and_gradient(local_param->theta(), sampler.next(),
                                                local_grad->theta(), ws);
      if (!detail::finite_loss(loss)) {
        ctx.flag_crash();
        break;
      }
      std::uint64_t t_e = 0, t_p = 0;
      {
        std::lock_guard lock(mtx);
        t_e = param->seq();
        param->update(local_grad->theta(), cfg.eta);
        t_p = param->seq();
        if (cfg.on_publish) cfg.on_publish(t_p, param->theta());
      }
      out.push_back({tid, t_p, ctx.now_ns(), t_e - t_g, t_p - 1 - t_e, 1, false});
      ctx.after_publish(t_p);
    }
    local_param->discard();
    local_grad->discard();
  });
  ctx.request_stop();
  monitor.join();

  ctx.finish(param->theta(), param->seq(), records);
  return std::move(ctx.result);
}

inline RunResult run_hogwild(const OptimizerConfig& cfg, const nn::Network<float>& net,
                             const Dataset& data) {
  detail::RunContext ctx(cfg, net, data);
  ParameterVector* param = ctx.store.create();
  param->rand_init(cfg.seed);
  ctx.begin(param->theta());

  std::vector<std::vector<UpdateRecord>> records(cfg.threads);
  std::thread monitor([&] {
    ctx.monitor([&](std::span<float> out) {
      const std::uint64_t seq = param->seq();
      param->copy_racy_to(out);
      return seq;
    });
  });

  detail::spawn_workers(ctx, cfg.threads, [&](unsigned tid) {
    ParameterVector* local_param = ctx.store.create();
    ParameterVector* local_grad = ctx.store.create();
    auto ws = net.make_workspace();
    BatchSampler sampler(data, cfg.batch_size, cfg.seed, tid);
    auto& out = records[tid];
    while (!ctx.stop) {
      const std::uint64_t before = param->seq();
      param->copy_racy_to(local_param->theta());
      const double loss = net.loss_and_gradient(local_param->theta(), sampler.next(),
                                                local_grad->theta(), ws);
      if (!detail::finite_loss(loss)) {
        ctx.flag_crash();
        break;
      }
      const std::uint64_t t_p = param->update_racy(local_grad->theta(), cfg.eta);
      const std::uint64_t after = param->seq();
      if (cfg.on_publish) cfg.on_publish(t_p, param->theta());
      out.push_back({tid, t_p, ctx.now_ns(), after - 1 - before, 0, 1, false});
      ctx.after_publish(t_p);
    }
    local_param->discard();
    local_grad->discard();
  });
  ctx.request_stop();
  monitor.join();

  std::vector<float> final_theta(param->dim());
  param->copy_racy_to(final_theta);
  ctx.finish(final_theta, param->seq(), records);
  return std::move(ctx.result);
}

inline RunResult run_leashed(const OptimizerConfig& cfg, const nn::Network<float>& net,
                             const Dataset& data) {
  detail::RunContext ctx(cfg, net, data);
  ParameterVector* init = ctx.store.create();
  init->rand_init(cfg.seed);
  VersionSlot slot(init);
  ctx.begin(init->theta());

  std::vector<std::vector<UpdateRecord>> records(cfg.threads);
  std::vector<RunCounters> thread_counters(cfg.threads);

  auto check_live = [&ctx](const ParameterVector& pv) {
    if (pv.is_deleted()) ctx.read_after_reclaim.fetch_add(1, std::memory_order_relaxed);
  };

  std::thread monitor([&] {
    std::uint64_t retries = 0;
    ctx.monitor([&](std::span<float> out) {
      ReadLease lease = slot.acquire_latest(&retries);
      std::ranges::copy(lease->theta(), out.begin());
      check_live(*lease);
      return lease->seq();
    });
  });

  detail::spawn_workers(ctx, cfg.threads, [&](unsigned tid) {
    ParameterVector* local_grad = ctx.store.create();
    auto ws = net.make_workspace();
    BatchSampler sampler(data, cfg.batch_size, cfg.seed, tid);
    auto& out = records[tid];
    RunCounters& counters = thread_counters[tid];

    while (!ctx.stop) {
      std::uint64_t t_g = 0;
      double loss = 0;
      {
        ReadLease src = slot.acquire_latest(&counters.stale_retries);
        t_g = src->seq();
        loss = net.loss_and_gradient(src->theta(), sampler.next(), local_grad->theta(), ws);
        check_live(*src);
      }
      if (!detail::finite_loss(loss)) {
        ctx.flag_crash();
        break;
      }

      ParameterVector* candidate = ctx.store.create_for_overwrite();
      ++counters.candidates;
      std::uint64_t t_e = 0;
      std::uint32_t attempts = 0;
      for (;;) {
        ReadLease latest = slot.acquire_latest(&counters.stale_retries);
        if (attempts == 0) t_e = latest->seq();
        std::ranges::copy(latest->theta(), candidate->theta().begin());
        candidate->set_seq(latest->seq());
        check_live(*latest);
        const std::uint64_t base_seq = latest->seq();
        ParameterVector* expected = latest.reset();

        candidate->update(local_grad->theta(), cfg.eta);
        if (cfg.yield_before_publish) std::this_thread::yield();
        ++attempts;

        ParameterVector* const predecessor = expected;
        if (slot.publish(expected, candidate)) {
          predecessor->mark_stale();
          predecessor->safe_delete();
          const std::uint64_t t_p = candidate->seq();
          out.push_back({tid, t_p, ctx.now_ns(), t_e - t_g, t_p - 1 - t_e, attempts, false});
          if (cfg.on_publish) {
            candidate->start_reading();
            if (!candidate->is_stale()) cfg.on_publish(t_p, candidate->theta());
            candidate->stop_reading();
          }
          ctx.after_publish(t_p);
          break;
        }
        // a failed CAS must be explained by a newer published version
        ++counters.cas_failures;
        if (expected->seq() <= base_seq) ++counters.cas_failures_unexplained;
        if (cfg.persistence && attempts > *cfg.persistence) {
          candidate->discard();
          out.push_back({tid, 0, ctx.now_ns(), t_e - t_g, expected->seq() - t_e, attempts, true});
          break;
        }
      }
    }
    local_grad->discard();
  });
  ctx.request_stop();
  monitor.join();

  ReadLease last = slot.acquire_latest();
  std::vector<float> final_theta(last->theta().begin(), last->theta().end());
  const std::uint64_t final_seq = last->seq();
  last.reset();

  for (const RunCounters& c : thread_counters) {
    ctx.result.counters.candidates += c.candidates;
    ctx.result.counters.cas_failures += c.cas_failures;
    ctx.result.counters.cas_failures_unexplained += c.cas_failures_unexplained;
    ctx.result.counters.stale_retries += c.stale_retries;
  }
  ctx.finish(final_theta, final_seq, records);
  return std::move(ctx.result);
}

inline RunResult run(const OptimizerConfig& cfg, const nn::Network<float>& net, const Dataset& data) {
  switch (cfg.algo) {
    case Algorithm::Seq: return run_seq(cfg, net, data);
    case Algorithm::Async: return run_async_lock(cfg, net, data);
    case Algorithm::Hogwild: return run_hogwild(cfg, net, data);
    case Algorithm::Leashed: return run_leashed(cfg, net, data);
  }
  throw std::invalid_argument("unknown algorithm");
}

}  // namespace leashed
