#pragma once

// Fluid model of how many threads sit in the publish (retry) loop.
//
// Threads outside the loop arrive at rate (m - n) / T_c, threads inside leave
// at rate n (1 + gamma) / T_u. One unit of model time per recurrence step.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <queue>
#include <random>
#include <stdexcept>
#include <vector>

namespace leashed::dynamics {

struct Params {
  double m = 1;
  double t_compute = 1;  // T_c
  double t_update = 1;   // T_u
  double gamma = 0;
  double n0 = 0;
  std::size_t horizon = 100;

  void validate() const {
    if (!(m >= 1)) throw std::invalid_argument("dynamics: m must be >= 1");
    if (!(t_compute > 0) || !(t_update > 0)) {
      throw std::invalid_argument("dynamics: T_c and T_u must be > 0");
    }
    if (!(gamma >= 0)) throw std::invalid_argument("dynamics: gamma must be >= 0");
    if (!(n0 >= 0 && n0 <= m)) throw std::invalid_argument("dynamics: n0 must lie in [0, m]");
  }
};

struct Rates {
  double arrival;    // lambda
  double departure;  // mu
};

inline Rates rates(const Params& p, double n) {
  return {(p.m - n) / p.t_compute, n / p.t_update * (1.0 + p.gamma)};
}

// Per-step contraction factor of the recurrence, 1 - 1/T_c - (1+gamma)/T_u.
inline double contraction(const Params& p) {
  return 1.0 - 1.0 / p.t_compute - (1.0 + p.gamma) / p.t_update;
}

inline bool is_stable(const Params& p) { return std::abs(contraction(p)) < 1.0; }

// n_0 .. n_horizon by literal iteration.
inline std::vector<double> recurrence(const Params& p) {
  p.validate();
  std::vector<double> n;
  n.reserve(p.horizon + 1);
  n.push_back(p.n0);
  for (std::size_t t = 0; t < p.horizon; ++t) {
    const Rates r = rates(p, n.back());
    n.push_back(n.back() + r.arrival - r.departure);
  }
  return n;
}

struct ClosedForm {
  double value;
  bool stable;  // false: |1 - 1/T_c - 1/T_u| >= 1, the value does not settle
};

// Closed-form n_t for gamma = 0.
inline ClosedForm closed_form(const Params& p, std::uint64_t t) {
  p.validate();
  if (p.gamma != 0) throw std::invalid_argument("dynamics: closed form requires gamma = 0");
  const double r = 1.0 - 1.0 / p.t_compute - 1.0 / p.t_update;
  const double rt = std::pow(r, static_cast<double>(t));
  const double value = (1.0 - rt) / (1.0 + p.t_compute / p.t_update) * p.m + rt * p.n0;
  return {value, std::abs(r) < 1.0};
}

// n*_gamma = m / (T_c/T_u (1 + gamma) + 1); n* when gamma = 0.
inline double fixed_point(const Params& p) {
  p.validate();
  return p.m / (p.t_compute / p.t_update * (1.0 + p.gamma) + 1.0);
}

// ---------------------------------------------------------------------------
// Event-driven validator: m independent threads alternating between a compute
// phase (mean T_c) and the retry loop (mean T_u / (1 + gamma)).

enum class Durations { Deterministic, Exponential };

struct SimulationOptions {
  Durations durations = Durations::Exponential;
  std::uint64_t events = 1'000'000;  // phase completions to simulate
  std::uint64_t seed = 1;
};

struct SimulationResult {
  double mean_occupancy = 0;           // time-average threads in the loop
  std::vector<double> occupancy;       // fraction of time with exactly k threads in the loop
  std::vector<double> trajectory;      // occupancy at integer times 0..horizon (right-continuous)
  double end_time = 0;
  std::uint64_t events = 0;
};

inline SimulationResult simulate_events(const Params& p, const SimulationOptions& o) {
  p.validate();
  const auto m = static_cast<std::size_t>(p.m);
  if (static_cast<double>(m) != p.m) throw std::invalid_argument("simulate_events: m must be an integer");
  const auto n0 = static_cast<std::size_t>(std::llround(p.n0));

  std::mt19937_64 gen(o.seed);
  const double mean_loop = p.t_update / (1.0 + p.gamma);
  auto draw = [&](double mean) {
    if (o.durations == Durations::Deterministic) return mean;
    return std::exponential_distribution<double>(1.0 / mean)(gen);
  };

  struct Event {
    double time;
    std::size_t thread;
    bool leaves_loop;
    bool operator>(const Event& other) const { return time > other.time; }
  };
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue;
  std::size_t in_loop = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (i < n0) {
      ++in_loop;
      queue.push({draw(mean_loop), i, true});
    } else {
      queue.push({draw(p.t_compute), i, false});
    }
  }

  SimulationResult r;
  r.occupancy.assign(m + 1, 0.0);
  r.trajectory.push_back(static_cast<double>(in_loop));
  double now = 0.0;
  double area = 0.0;
  while (r.events < o.events) {
    const Event e = queue.top();
    queue.pop();
    const double dt = e.time - now;
    area += dt * static_cast<double>(in_loop);
    r.occupancy[in_loop] += dt;
    while (r.trajectory.size() <= p.horizon && static_cast<double>(r.trajectory.size()) < e.time) {
      r.trajectory.push_back(static_cast<double>(in_loop));
    }
    now = e.time;
    if (e.leaves_loop) {
      --in_loop;
      queue.push({now + draw(p.t_compute), e.thread, false});
    } else {
      ++in_loop;
      queue.push({now + draw(mean_loop), e.thread, true});
    }
    ++r.events;
  }
  r.end_time = now;
  if (now > 0) {
    r.mean_occupancy = area / now;
    for (double& f : r.occupancy) f /= now;
  }
  return r;
}

}  // namespace leashed::dynamics
