#pragma once

// Concurrency stress for VersionSlot / ParameterVector, independent of any
// network. Every thread repeatedly acquires the latest version, checks it,
// then builds and publishes a successor in a bounded-persistence loop, the
// same protocol the Leashed-SGD workers follow.
//
// Each published version's payload is filled with a value derived from its
// sequence number and reclaimed payloads are poisoned with NaN, so a reader
// that touches recycled memory sees a mismatch.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include "leashed/param_vector.hpp"

namespace leashed::stress {

struct Options {
  unsigned threads = 4;
  std::uint64_t acquires = 1'000'000;  // publish-attempt budget; Report::acquires counts actual reads
  std::size_t dim = 64;
  std::optional<std::uint32_t> persistence;  // nullopt = unbounded
  // Probability of yielding at the interleaving points; on a single core this
  // is what makes threads overlap inside the publish loop.
  double yield_probability = 0.05;
  std::uint64_t seed = 1;
};

struct Report {
  unsigned threads = 0;
  std::uint64_t acquires = 0;
  std::uint64_t published = 0;
  std::uint64_t abandoned = 0;
  std::uint64_t cas_failures = 0;
  std::uint64_t cas_failures_unexplained = 0;
  std::uint64_t monotonic_violations = 0;  // a thread saw t go backwards
  std::uint64_t read_after_reclaim = 0;    // payload mismatch or deleted flag under a lease
  std::uint64_t order_violations = 0;      // published seqs not a gap-free 1..T permutation
  std::uint64_t reclaim_violations = 0;    // some header reclaimed more than once
  std::uint64_t candidates = 0;
  std::int64_t max_live = 0;
  std::int64_t live_bound = 0;  // 3m
  PayloadCensus census;

  bool passed() const noexcept {
    return monotonic_violations == 0 && read_after_reclaim == 0 && order_violations == 0 &&
           reclaim_violations == 0 && cas_failures_unexplained == 0 && max_live <= live_bound &&
           candidates == published + abandoned;
  }
};

inline float pattern(std::uint64_t seq) noexcept { return static_cast<float>(seq & 0xFFFFF); }

inline Report run(const Options& o) {
  if (o.threads == 0) throw std::invalid_argument("stress: threads must be >= 1");
  VersionStore store(o.dim, /*poison_on_release=*/true);
  ParameterVector* init = store.create();
  std::ranges::fill(init->theta(), pattern(0));
  VersionSlot slot(init);

  std::atomic<std::uint64_t> remaining{o.acquires};
  std::vector<Report> local(o.threads);
  std::vector<std::vector<std::uint64_t>> seqs(o.threads);

  auto body = [&](unsigned tid) {
    Report& r = local[tid];
    std::mt19937_64 rng(o.seed * 0x9E3779B97F4A7C15ull + tid);
    std::bernoulli_distribution yield(o.yield_probability);
    auto maybe_yield = [&] {
      if (o.yield_probability > 0 && yield(rng)) std::this_thread::yield();
    };
    // stands in for the per-thread gradient buffer
    ParameterVector* scratch = store.create();
    std::uint64_t last_seen = 0;

    auto verify = [&](const ParameterVector& pv) {
      ++r.acquires;
      const std::uint64_t t = pv.seq();
      if (t < last_seen) ++r.monotonic_violations;
      last_seen = std::max(last_seen, t);
      const float want = pattern(t);
      bool ok = !pv.is_deleted();
      for (float v : pv.theta()) ok = ok && v == want;
      maybe_yield();
      if (pv.is_deleted()) ok = false;
      if (!ok) ++r.read_after_reclaim;
    };
    auto take = [&]() -> bool {
      std::uint64_t left = remaining.load(std::memory_order_relaxed);
      while (left > 0) {
        if (remaining.compare_exchange_weak(left, left - 1, std::memory_order_relaxed)) return true;
      }
      return false;
    };

    while (take()) {
      {
        ReadLease src = slot.acquire_latest();
        verify(*src);
      }
      ParameterVector* candidate = store.create_for_overwrite();
      ++r.candidates;
      std::uint32_t attempts = 0;
      for (;;) {
        ReadLease latest = slot.acquire_latest();
        verify(*latest);
        const std::uint64_t base = latest->seq();
        candidate->set_seq(base + 1);
        std::ranges::fill(candidate->theta(), pattern(base + 1));
        ParameterVector* expected = latest.reset();
        maybe_yield();
        ++attempts;
        ParameterVector* const predecessor = expected;
        if (slot.publish(expected, candidate)) {
          predecessor->mark_stale();
          predecessor->safe_delete();
          ++r.published;
          seqs[tid].push_back(base + 1);
          break;
        }
        ++r.cas_failures;
        if (expected->seq() <= base) ++r.cas_failures_unexplained;
        if (o.persistence && attempts > *o.persistence) {
          candidate->discard();
          ++r.abandoned;
          break;
        }
        if (!take()) {
          // budget exhausted mid-loop: finish by abandoning
          candidate->discard();
          ++r.abandoned;
          break;
        }
      }
    }
    scratch->discard();
  };

  std::vector<std::thread> threads;
  for (unsigned i = 0; i < o.threads; ++i) threads.emplace_back(body, i);
  for (auto& t : threads) t.join();

  Report out;
  out.threads = o.threads;
  out.live_bound = 3 * static_cast<std::int64_t>(o.threads);
  for (const Report& r : local) {
    out.acquires += r.acquires;
    out.published += r.published;
    out.abandoned += r.abandoned;
    out.cas_failures += r.cas_failures;
    out.cas_failures_unexplained += r.cas_failures_unexplained;
    out.monotonic_violations += r.monotonic_violations;
    out.read_after_reclaim += r.read_after_reclaim;
    out.candidates += r.candidates;
  }

  std::vector<std::uint64_t> all;
  for (const auto& s : seqs) {
    // each thread's own publications are increasing
    if (!std::is_sorted(s.begin(), s.end())) ++out.order_violations;
    all.insert(all.end(), s.begin(), s.end());
  }
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i] != i + 1) {
      ++out.order_violations;
      break;
    }
  }
  store.for_each_header([&](const ParameterVector& pv) {
    const auto n = pv.reclaim_count();
    if (n > 1 || (n == 1) != pv.is_deleted()) ++out.reclaim_violations;
  });
  out.census = store.census();
  out.max_live = out.census.max_live;
  return out;
}

}  // namespace leashed::stress
