#pragma once

// Versioned parameter vectors with reader tracking and payload recycling.
//
// A ParameterVector is a small metadata header plus a d-length payload. Headers
// live in a run-scoped arena (VersionStore) and are never freed before the
// store is destroyed, so a thread may always touch the header of a version it
// loaded from a VersionSlot, even after that version's payload was recycled.
// Only payloads are recycled, through a per-size free list (PayloadPool) that
// also keeps the memory census.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <mutex>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace leashed {

// Snapshot of a payload pool. All fields are read under one lock, so
// allocated - reclaimed == live holds for every snapshot.
struct PayloadCensus {
  std::int64_t live = 0;
  std::int64_t allocated = 0;
  std::int64_t reclaimed = 0;
  std::int64_t max_live = 0;
  std::int64_t buffers = 0;  // distinct buffers ever created
  std::size_t dim = 0;

  std::int64_t live_bytes() const noexcept {
    return live * static_cast<std::int64_t>(dim * sizeof(float));
  }
};

class PayloadPool {
 public:
  explicit PayloadPool(std::size_t dim, bool poison_on_release = false)
      : dim_(dim), poison_(poison_on_release) {
    if (dim == 0) throw std::invalid_argument("PayloadPool: dimension must be >= 1");
  }

  PayloadPool(const PayloadPool&) = delete;
  PayloadPool& operator=(const PayloadPool&) = delete;

  std::size_t dim() const noexcept { return dim_; }

  // Contents of the returned buffer are unspecified.
  float* acquire() {
    std::lock_guard lock(mu_);
    float* buf = nullptr;
    if (!free_.empty()) {
      buf = free_.back();
      free_.pop_back();
    } else {
      owned_.push_back(std::make_unique<float[]>(dim_));
      buf = owned_.back().get();
    }
    ++allocated_;
    max_live_ = std::max(max_live_, allocated_ - reclaimed_);
    return buf;
  }

  void release(float* buf) {
    if (poison_) {
      std::fill_n(buf, dim_, std::numeric_limits<float>::quiet_NaN());
    }
    std::lock_guard lock(mu_);
    free_.push_back(buf);
    ++reclaimed_;
  }

  PayloadCensus census() const {
    std::lock_guard lock(mu_);
    PayloadCensus c;
    c.allocated = allocated_;
    c.reclaimed = reclaimed_;
    c.live = allocated_ - reclaimed_;
    c.max_live = max_live_;
    c.buffers = static_cast<std::int64_t>(owned_.size());
    c.dim = dim_;
    return c;
  }

 private:
  const std::size_t dim_;
  const bool poison_;
  mutable std::mutex mu_;
  std::vector<std::unique_ptr<float[]>> owned_;
  std::vector<float*> free_;
  std::int64_t allocated_ = 0;
  std::int64_t reclaimed_ = 0;
  std::int64_t max_live_ = 0;
};

class ParameterVector {
 public:
  ParameterVector(PayloadPool& pool, float* payload) : pool_(&pool), payload_(payload) {}

  ParameterVector(const ParameterVector&) = delete;
  ParameterVector& operator=(const ParameterVector&) = delete;

  std::size_t dim() const noexcept { return pool_->dim(); }

  // Valid only while the caller holds a registered read or exclusive access.
  std::span<float> theta() noexcept { return {payload_, pool_->dim()}; }
  std::span<const float> theta() const noexcept { return {payload_, pool_->dim()}; }

  std::uint64_t seq() const noexcept { return t_.load(std::memory_order_acquire); }
  // Only for a version the caller owns exclusively (not yet published).
  void set_seq(std::uint64_t t) noexcept { t_.store(t, std::memory_order_relaxed); }

  std::int32_t readers() const noexcept { return n_rdrs_.load(std::memory_order_seq_cst); }
  bool is_stale() const noexcept { return stale_.load(std::memory_order_seq_cst); }
  bool is_deleted() const noexcept { return deleted_.load(std::memory_order_seq_cst); }
  std::uint32_t reclaim_count() const noexcept { return reclaims_.load(std::memory_order_relaxed); }

  // theta ~ N(0, 0.01) with 0.01 the standard deviation.
  void rand_init(std::uint64_t seed) {
    if (is_deleted()) throw std::logic_error("rand_init on a reclaimed ParameterVector");
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 0.01);
    for (float& x : theta()) x = static_cast<float>(normal(gen));
  }

  void start_reading() noexcept { n_rdrs_.fetch_add(1, std::memory_order_seq_cst); }

  void stop_reading() noexcept {
    n_rdrs_.fetch_sub(1, std::memory_order_seq_cst);
    safe_delete();
  }

  void mark_stale() noexcept { stale_.store(true, std::memory_order_seq_cst); }

  // Reclaims the payload iff stale, unread, and not already reclaimed.
  // Returns whether this call performed the reclamation.
  bool safe_delete() noexcept {
    if (!stale_.load(std::memory_order_seq_cst)) return false;
    if (n_rdrs_.load(std::memory_order_seq_cst) != 0) return false;
    bool expected = false;
    if (!deleted_.compare_exchange_strong(expected, true, std::memory_order_seq_cst)) {
      return false;
    }
    reclaims_.fetch_add(1, std::memory_order_relaxed);
    pool_->release(payload_);
    return true;
  }

  // Drops a version that was never published (the owner has exclusive access).
  void discard() noexcept {
    stale_.store(true, std::memory_order_seq_cst);
    safe_delete();
  }

  // theta[i] -= eta * delta[i]; t += 1.
  void update(std::span<const float> delta, float eta) {
    check_length(delta.size());
    t_.fetch_add(1, std::memory_order_acq_rel);
    float* theta = payload_;
    const std::size_t d = dim();
    for (std::size_t i = 0; i < d; ++i) theta[i] = theta[i] - eta * delta[i];
  }

  // Hogwild variant: element accesses are relaxed atomics, so concurrent
  // updaters may interleave across elements but never tear a single element.
  // Returns the sequence number assigned to this update.
  std::uint64_t update_racy(std::span<const float> delta, float eta) {
    check_length(delta.size());
    const std::uint64_t t = t_.fetch_add(1, std::memory_order_acq_rel) + 1;
    float* theta = payload_;
    const std::size_t d = dim();
    for (std::size_t i = 0; i < d; ++i) {
      std::atomic_ref<float> cell(theta[i]);
      const float cur = cell.load(std::memory_order_relaxed);
      cell.store(cur - eta * delta[i], std::memory_order_relaxed);
    }
    return t;
  }

  void copy_racy_to(std::span<float> out) const {
    check_length(out.size());
    float* theta = payload_;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = std::atomic_ref<float>(theta[i]).load(std::memory_order_relaxed);
    }
  }

 private:
  void check_length(std::size_t n) const {
    if (n != dim()) {
      throw std::invalid_argument("ParameterVector: length " + std::to_string(n) +
                                  " does not match dimension " + std::to_string(dim()));
    }
  }

  PayloadPool* pool_;
  float* payload_;
  std::atomic<std::uint64_t> t_{0};
  std::atomic<std::int32_t> n_rdrs_{0};
  std::atomic<bool> stale_{false};
  std::atomic<bool> deleted_{false};
  std::atomic<std::uint32_t> reclaims_{0};
};

// Run-scoped owner of every ParameterVector header and payload of one
// dimension. Headers are type-stable until the store is destroyed.
class VersionStore {
 public:
  explicit VersionStore(std::size_t dim, bool poison_on_release = false)
      : pool_(dim, poison_on_release) {}

  VersionStore(const VersionStore&) = delete;
  VersionStore& operator=(const VersionStore&) = delete;

  std::size_t dim() const noexcept { return pool_.dim(); }

  // Fresh version: theta all zeros, t = 0, no readers, not stale.
  ParameterVector* create() {
    ParameterVector* pv = create_for_overwrite();
    std::ranges::fill(pv->theta(), 0.0f);
    return pv;
  }

  // Like create() but the payload contents are unspecified.
  ParameterVector* create_for_overwrite() {
    float* payload = pool_.acquire();
    std::lock_guard lock(mu_);
    return &headers_.emplace_back(pool_, payload);
  }

  PayloadPool& pool() noexcept { return pool_; }
  const PayloadPool& pool() const noexcept { return pool_; }
  PayloadCensus census() const { return pool_.census(); }

  std::size_t header_count() const {
    std::lock_guard lock(mu_);
    return headers_.size();
  }

  // Visits every header ever created. Callers must ensure quiescence.
  template <typename Fn>
  void for_each_header(Fn&& fn) const {
    std::lock_guard lock(mu_);
    for (const ParameterVector& pv : headers_) fn(pv);
  }

 private:
  PayloadPool pool_;
  mutable std::mutex mu_;
  std::deque<ParameterVector> headers_;
};

// Registered read of a version. Releasing the lease calls stop_reading.
class ReadLease {
 public:
  ReadLease() = default;
  explicit ReadLease(ParameterVector* pv) noexcept : pv_(pv) {}
  ReadLease(ReadLease&& other) noexcept : pv_(std::exchange(other.pv_, nullptr)) {}
  ReadLease& operator=(ReadLease&& other) noexcept {
    if (this != &other) {
      reset();
      pv_ = std::exchange(other.pv_, nullptr);
    }
    return *this;
  }
  ReadLease(const ReadLease&) = delete;
  ReadLease& operator=(const ReadLease&) = delete;
  ~ReadLease() { reset(); }

  ParameterVector* get() const noexcept { return pv_; }
  ParameterVector* operator->() const noexcept { return pv_; }
  ParameterVector& operator*() const noexcept { return *pv_; }
  explicit operator bool() const noexcept { return pv_ != nullptr; }

  // Ends the read. Returns the handle, which stays usable for pointer
  // comparison and header access only.
  ParameterVector* reset() noexcept {
    ParameterVector* pv = std::exchange(pv_, nullptr);
    if (pv) pv->stop_reading();
    return pv;
  }

 private:
  ParameterVector* pv_ = nullptr;
};

// The single shared word naming the latest published version.
class VersionSlot {
 public:
  explicit VersionSlot(ParameterVector* initial) noexcept : latest_(initial) {}

  ParameterVector* load() const noexcept { return latest_.load(std::memory_order_acquire); }

  // Registers a read on the latest version, retrying while the loaded version
  // turns out to be stale. `stale_retries`, if given, counts the retries.
  ReadLease acquire_latest(std::uint64_t* stale_retries = nullptr) const noexcept {
    for (;;) {
      ParameterVector* pv = latest_.load(std::memory_order_acquire);
      pv->start_reading();
      if (!pv->is_stale()) return ReadLease(pv);
      pv->stop_reading();
      if (stale_retries) ++*stale_retries;
    }
  }

  // On failure `expected` is updated to the currently installed version.
  bool publish(ParameterVector*& expected, ParameterVector* desired) noexcept {
    return latest_.compare_exchange_strong(expected, desired, std::memory_order_release,
                                           std::memory_order_acquire);
  }

 private:
  std::atomic<ParameterVector*> latest_;
};

}  // namespace leashed
