#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "leashed/param_vector.hpp"

using namespace leashed;

TEST(ParameterVector, FreshVersionIsZeroed) {
  VersionStore store(134'794);
  ParameterVector* pv = store.create();
  EXPECT_EQ(pv->dim(), 134'794u);
  EXPECT_EQ(pv->seq(), 0u);
  EXPECT_EQ(pv->readers(), 0);
  EXPECT_FALSE(pv->is_stale());
  for (float x : pv->theta()) ASSERT_EQ(x, 0.0f);
}

TEST(ParameterVector, ZeroDimensionThrows) {
  EXPECT_THROW(VersionStore store(0), std::invalid_argument);
}

TEST(ParameterVector, RandInitDeterministic) {
  VersionStore store(1000);
  ParameterVector* a = store.create();
  ParameterVector* b = store.create();
  a->rand_init(42);
  b->rand_init(42);
  EXPECT_TRUE(std::ranges::equal(a->theta(), b->theta()));
  b->rand_init(43);
  EXPECT_FALSE(std::ranges::equal(a->theta(), b->theta()));
}

TEST(ParameterVector, RandInitMoments) {
  const std::size_t d = 10'000;
  VersionStore store(d);
  ParameterVector* pv = store.create();
  pv->rand_init(1);
  double sum = 0, sq = 0;
  for (float x : pv->theta()) sum += x;
  const double mean = sum / d;
  for (float x : pv->theta()) sq += (x - mean) * (x - mean);
  const double sd = std::sqrt(sq / (d - 1));
  // standard error of the mean is 0.01 / sqrt(d) = 1e-4
  EXPECT_LT(std::abs(mean), 4 * 0.01 / 100);
  // sd of the sample sd is about 0.01 / sqrt(2d) ~ 0.7%, so 5% is > 7 sigma
  EXPECT_NEAR(sd, 0.01, 0.05 * 0.01);
}

TEST(ParameterVector, ReaderCounting) {
  VersionStore store(4);
  ParameterVector* pv = store.create();
  pv->start_reading();
  EXPECT_EQ(pv->readers(), 1);
  pv->stop_reading();
  EXPECT_EQ(pv->readers(), 0);

  std::thread a([&] { pv->start_reading(); });
  std::thread b([&] { pv->start_reading(); });
  a.join();
  b.join();
  EXPECT_EQ(pv->readers(), 2);
}

TEST(ParameterVector, ManyConcurrentReadersNoLostIncrement) {
  VersionStore store(4);
  ParameterVector* pv = store.create();
  std::vector<std::thread> ts;
  for (int i = 0; i < 8; ++i) {
    ts.emplace_back([&] {
      for (int k = 0; k < 10'000; ++k) pv->start_reading();
    });
  }
  for (auto& t : ts) t.join();
  EXPECT_EQ(pv->readers(), 80'000);
}

TEST(ParameterVector, LastReaderOfStaleVersionReclaims) {
  VersionStore store(4);
  ParameterVector* pv = store.create();
  pv->start_reading();
  pv->mark_stale();
  EXPECT_FALSE(pv->is_deleted());
  pv->stop_reading();
  EXPECT_TRUE(pv->is_deleted());
  EXPECT_EQ(pv->reclaim_count(), 1u);
  EXPECT_EQ(store.census().live, 0);
}

TEST(ParameterVector, RemainingReaderBlocksReclaim) {
  VersionStore store(4);
  ParameterVector* pv = store.create();
  pv->start_reading();
  pv->start_reading();
  pv->mark_stale();
  pv->stop_reading();
  EXPECT_FALSE(pv->is_deleted());
  pv->stop_reading();
  EXPECT_TRUE(pv->is_deleted());
}

TEST(ParameterVector, LatestVersionIsNotReclaimed) {
  VersionStore store(4);
  ParameterVector* pv = store.create();
  pv->start_reading();
  pv->stop_reading();
  EXPECT_FALSE(pv->is_deleted());
  EXPECT_FALSE(pv->safe_delete());
  EXPECT_EQ(store.census().live, 1);
}

TEST(ParameterVector, SafeDeleteOnEligibleVersion) {
  VersionStore store(4);
  ParameterVector* pv = store.create();
  pv->mark_stale();
  EXPECT_TRUE(pv->safe_delete());
  EXPECT_FALSE(pv->safe_delete());
  EXPECT_EQ(pv->reclaim_count(), 1u);
}

TEST(ParameterVector, ConcurrentSafeDeleteExactlyOnce) {
  for (int trial = 0; trial < 200; ++trial) {
    VersionStore store(4);
    ParameterVector* pv = store.create();
    pv->mark_stale();
    std::atomic<int> wins{0};
    std::atomic<bool> go{false};
    std::vector<std::thread> ts;
    for (int i = 0; i < 4; ++i) {
      ts.emplace_back([&] {
        while (!go) std::this_thread::yield();
        if (pv->safe_delete()) ++wins;
      });
    }
    go = true;
    for (auto& t : ts) t.join();
    ASSERT_EQ(wins.load(), 1);
    ASSERT_EQ(pv->reclaim_count(), 1u);
    ASSERT_EQ(store.census().reclaimed, 1);
  }
}

TEST(ParameterVector, UpdateArithmetic) {
  VersionStore store(2);
  ParameterVector* pv = store.create();
  pv->theta()[0] = 1.0f;
  pv->theta()[1] = 2.0f;
  pv->set_seq(7);
  const std::vector<float> delta{0.5f, -1.0f};
  pv->update(delta, 0.1f);
  EXPECT_FLOAT_EQ(pv->theta()[0], 0.95f);
  EXPECT_FLOAT_EQ(pv->theta()[1], 2.1f);
  EXPECT_EQ(pv->seq(), 8u);
}

TEST(ParameterVector, ZeroDeltaOrZeroStepOnlyAdvancesSeq) {
  VersionStore store(3);
  ParameterVector* pv = store.create();
  pv->rand_init(5);
  const std::vector<float> before(pv->theta().begin(), pv->theta().end());
  const std::vector<float> zero(3, 0.0f), ones(3, 1.0f);
  pv->update(zero, 0.5f);
  pv->update(ones, 0.0f);
  EXPECT_TRUE(std::ranges::equal(pv->theta(), before));
  EXPECT_EQ(pv->seq(), 2u);
}

TEST(ParameterVector, UpdateLengthMismatchThrows) {
  VersionStore store(3);
  ParameterVector* pv = store.create();
  const std::vector<float> delta(2, 1.0f);
  EXPECT_THROW(pv->update(delta, 0.1f), std::invalid_argument);
  EXPECT_THROW(pv->update_racy(delta, 0.1f), std::invalid_argument);
  EXPECT_EQ(pv->seq(), 0u);
}

TEST(ParameterVector, RacyUpdateMatchesPlainUpdate) {
  VersionStore store(5);
  ParameterVector* a = store.create();
  ParameterVector* b = store.create();
  a->rand_init(3);
  b->rand_init(3);
  const std::vector<float> delta{1, -2, 3, -4, 5};
  a->update(delta, 0.25f);
  EXPECT_EQ(b->update_racy(delta, 0.25f), 1u);
  EXPECT_TRUE(std::ranges::equal(a->theta(), b->theta()));
}

TEST(PayloadPool, RecyclesReclaimedBuffers) {
  VersionStore store(8);
  ParameterVector* a = store.create();
  const float* payload = a->theta().data();
  a->discard();
  ParameterVector* b = store.create();
  EXPECT_EQ(b->theta().data(), payload);
  const auto c = store.census();
  EXPECT_EQ(c.allocated, 2);
  EXPECT_EQ(c.reclaimed, 1);
  EXPECT_EQ(c.live, 1);
  EXPECT_EQ(c.buffers, 1);
  EXPECT_EQ(c.live_bytes(), 8 * 4);
  EXPECT_EQ(store.header_count(), 2u);
}

TEST(PayloadPool, PoisonOnRelease) {
  VersionStore store(4, /*poison_on_release=*/true);
  ParameterVector* a = store.create();
  const float* payload = a->theta().data();
  a->discard();
  for (int i = 0; i < 4; ++i) EXPECT_TRUE(std::isnan(payload[i]));
}

TEST(VersionSlot, SingleThreadReturnsOwnPublication) {
  VersionStore store(2);
  ParameterVector* v0 = store.create();
  VersionSlot slot(v0);
  for (std::uint64_t i = 1; i <= 5; ++i) {
    ReadLease latest = slot.acquire_latest();
    ParameterVector* next = store.create();
    next->set_seq(latest->seq() + 1);
    ParameterVector* expected = latest.reset();
    ParameterVector* prev = expected;
    ASSERT_TRUE(slot.publish(expected, next));
    prev->mark_stale();
    prev->safe_delete();
    ReadLease again = slot.acquire_latest();
    EXPECT_EQ(again.get(), next);
    EXPECT_EQ(again->seq(), i);
    EXPECT_TRUE(prev->is_deleted());
  }
  EXPECT_EQ(store.census().live, 1);
}

TEST(VersionSlot, FailedPublishReportsInstalledVersion) {
  VersionStore store(2);
  ParameterVector* v0 = store.create();
  ParameterVector* v1 = store.create();
  ParameterVector* v2 = store.create();
  VersionSlot slot(v0);
  ParameterVector* expected = v0;
  ASSERT_TRUE(slot.publish(expected, v1));
  expected = v0;
  EXPECT_FALSE(slot.publish(expected, v2));
  EXPECT_EQ(expected, v1);
  EXPECT_EQ(slot.load(), v1);
}

TEST(VersionSlot, StaleVersionIsNeverReturned) {
  // The slot still names v0, but v0 is already marked stale: acquire_latest
  // must loop until the slot is repointed.
  VersionStore store(2);
  ParameterVector* v0 = store.create();
  ParameterVector* v1 = store.create();
  v1->set_seq(1);
  VersionSlot slot(v0);
  v0->start_reading();  // keeps v0 from being reclaimed while stale
  v0->mark_stale();

  std::atomic<bool> done{false};
  std::uint64_t retries = 0;
  ParameterVector* got = nullptr;
  std::thread reader([&] {
    ReadLease l = slot.acquire_latest(&retries);
    got = l.get();
    done = true;
  });
  while (retries == 0 && !done) std::this_thread::yield();
  ParameterVector* expected = v0;
  ASSERT_TRUE(slot.publish(expected, v1));
  reader.join();
  EXPECT_EQ(got, v1);
  EXPECT_GT(retries, 0u);
  v0->stop_reading();
  EXPECT_TRUE(v0->is_deleted());
}

TEST(ReadLease, MoveTransfersRegistration) {
  VersionStore store(2);
  ParameterVector* v = store.create();
  VersionSlot slot(v);
  {
    ReadLease a = slot.acquire_latest();
    EXPECT_EQ(v->readers(), 1);
    ReadLease b = std::move(a);
    EXPECT_FALSE(a);
    EXPECT_EQ(v->readers(), 1);
  }
  EXPECT_EQ(v->readers(), 0);
}
