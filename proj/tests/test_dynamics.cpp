#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "leashed/dynamics.hpp"

using namespace leashed::dynamics;

namespace {

Params base(double gamma = 0) {
  Params p;
  p.m = 16;
  p.t_compute = 4;
  p.t_update = 2;
  p.gamma = gamma;
  return p;
}

}  // namespace

TEST(Rates, Substitution) {
  const Params p = base();
  const Rates r = rates(p, 4);
  EXPECT_DOUBLE_EQ(r.arrival, 3.0);
  EXPECT_DOUBLE_EQ(r.departure, 2.0);
  EXPECT_DOUBLE_EQ(rates(p, 0).departure, 0.0);
  EXPECT_DOUBLE_EQ(rates(p, 0).arrival, 4.0);
  EXPECT_DOUBLE_EQ(rates(p, 16).arrival, 0.0);
  EXPECT_DOUBLE_EQ(rates(base(1), 4).departure, 4.0);
}

TEST(Params, Validation) {
  Params p = base();
  p.m = 0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = base();
  p.t_update = 0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = base();
  p.gamma = -1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = base();
  p.n0 = 17;
  EXPECT_THROW(recurrence(p), std::invalid_argument);
}

TEST(Recurrence, HandIteration) {
  Params p = base();
  p.horizon = 3;
  const auto n = recurrence(p);
  ASSERT_EQ(n.size(), 4u);
  EXPECT_DOUBLE_EQ(n[0], 0.0);
  EXPECT_DOUBLE_EQ(n[1], 4.0);
  EXPECT_DOUBLE_EQ(n[2], 5.0);
  EXPECT_DOUBLE_EQ(n[3], 5.25);
}

TEST(Recurrence, FixedPointIsConstant) {
  Params p = base();
  p.n0 = fixed_point(p);
  p.horizon = 50;
  for (double v : recurrence(p)) EXPECT_NEAR(v, 16.0 / 3.0, 1e-12);
}

TEST(Recurrence, LargeGammaDecays) {
  // T_c >> T_u keeps 1 - 1/T_c - (1+g)/T_u inside (-1, 1) for g up to 1.9
  double prev = 17;
  for (double g : {0.0, 0.5, 1.0, 1.9}) {
    Params p{16, 1000, 1.5, g, 16, 400};
    ASSERT_TRUE(is_stable(p));
    const double last = recurrence(p).back();
    EXPECT_NEAR(last, fixed_point(p), 1e-9);
    EXPECT_LT(last, prev);
    prev = last;
  }
  EXPECT_LT(prev, 0.01);
}

TEST(ClosedForm, Examples) {
  Params p = base();
  EXPECT_DOUBLE_EQ(closed_form(p, 0).value, 0.0);
  EXPECT_NEAR(closed_form(p, 3).value, 16.0 / 3.0 * (1 - std::pow(0.25, 3)), 1e-12);
  EXPECT_NEAR(closed_form(p, 3).value, 5.25, 1e-12);
  EXPECT_TRUE(closed_form(p, 3).stable);
  EXPECT_NEAR(closed_form(p, 1000).value, 16.0 / 3.0, 1e-12);
  p.n0 = 7;
  EXPECT_DOUBLE_EQ(closed_form(p, 0).value, 7.0);
  EXPECT_THROW(closed_form(base(0.5), 2), std::invalid_argument);
}

TEST(ClosedForm, FlagsInstability) {
  Params p = base();
  p.t_compute = 0.5;
  p.t_update = 0.5;  // r = 1 - 2 - 2 = -3
  EXPECT_FALSE(closed_form(p, 5).stable);
  EXPECT_FALSE(is_stable(p));
}

TEST(ClosedForm, AgreesWithRecurrenceOnGrid) {
  double worst = 0;
  for (double m : {2.0, 8.0, 16.0, 64.0})
    for (double tc : {2.0, 4.0, 16.0})
      for (double tu : {1.0, 2.0, 4.0})
        for (double n0 : {0.0, m / 2, m}) {
          Params p{m, tc, tu, 0.0, n0, 10'000};
          ASSERT_TRUE(is_stable(p));
          const auto rec = recurrence(p);
          for (std::size_t t = 0; t < rec.size(); ++t) {
            const double diff = std::abs(closed_form(p, t).value - rec[t]);
            worst = std::max(worst, diff);
            ASSERT_LT(diff, 1e-9) << "m=" << m << " Tc=" << tc << " Tu=" << tu << " n0=" << n0 << " t=" << t;
          }
          EXPECT_NEAR(rec.back(), fixed_point(p), 1e-6);
        }
  RecordProperty("worst_abs_diff", std::to_string(worst));
}

TEST(Recurrence, StableTrajectoriesContractAndStayInRange) {
  for (double m : {2.0, 16.0})
    for (double tc : {2.0, 4.0, 16.0})
      for (double tu : {1.0, 2.0, 4.0})
        for (double n0 : {0.0, m / 2, m}) {
          Params p{m, tc, tu, 0.0, n0, 500};
          const auto rec = recurrence(p);
          const double star = fixed_point(p);
          for (std::size_t t = 1; t < rec.size(); ++t) {
            EXPECT_LE(std::abs(rec[t] - star), std::abs(rec[t - 1] - star) + 1e-12);
            EXPECT_GE(rec[t], -1e-12);
            EXPECT_LE(rec[t], m + 1e-12);
          }
        }
}

TEST(FixedPoint, Examples) {
  Params sym = base();
  sym.t_compute = sym.t_update = 3;
  EXPECT_DOUBLE_EQ(fixed_point(sym), 8.0);
  EXPECT_DOUBLE_EQ(fixed_point(base()), 16.0 / 3.0);
  EXPECT_DOUBLE_EQ(fixed_point(base(1)), 3.2);
}

TEST(FixedPoint, DecreasingInGamma) {
  const std::vector<double> gammas{0, 0.5, 1, 2, 4};
  double prev = fixed_point(base(0));
  EXPECT_EQ(prev, 16.0 / (4.0 / 2.0 + 1.0));
  for (std::size_t i = 1; i < gammas.size(); ++i) {
    const double cur = fixed_point(base(gammas[i]));
    EXPECT_LT(cur, prev);
    prev = cur;
  }
  EXPECT_LT(fixed_point(base(1e9)), 1e-7);
}

TEST(Simulation, DeterministicSingleThreadDutyCycle) {
  Params p;
  p.m = 1;
  p.t_compute = 3;
  p.t_update = 1;
  p.horizon = 8;
  SimulationOptions o;
  o.durations = Durations::Deterministic;
  o.events = 10'000;
  const auto r = simulate_events(p, o);
  EXPECT_NEAR(r.mean_occupancy, 1.0 / 4.0, 1e-3);
  EXPECT_NEAR(r.occupancy[1], 0.25, 1e-3);
  EXPECT_NEAR(r.occupancy[0], 0.75, 1e-3);
  // compute on [0,3), loop on [3,4), compute on [4,7), loop on [7,8)
  EXPECT_EQ(r.trajectory, (std::vector<double>{0, 0, 0, 1, 0, 0, 0, 1, 0}));
}

TEST(Simulation, ExponentialMatchesFixedPoint) {
  SimulationOptions o;
  o.events = 1'000'000;
  const auto r = simulate_events(base(), o);
  EXPECT_NEAR(r.mean_occupancy, 16.0 / 3.0, 0.1 * 16.0 / 3.0);
  double total = 0;
  for (double f : r.occupancy) total += f;
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(Simulation, SeededAndGammaLowersOccupancy) {
  SimulationOptions o;
  o.events = 200'000;
  o.seed = 3;
  const auto a = simulate_events(base(), o);
  const auto b = simulate_events(base(), o);
  EXPECT_EQ(a.mean_occupancy, b.mean_occupancy);
  const auto g = simulate_events(base(4), o);
  EXPECT_LT(g.mean_occupancy, a.mean_occupancy);
  EXPECT_NEAR(g.mean_occupancy, fixed_point(base(4)), 0.1 * fixed_point(base(4)));
}
