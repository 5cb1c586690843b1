#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ncs/error.hpp"
#include "ncs/matrix.hpp"

// Delay realization and fixed-step DDE integration. A channel carries polled
// samples: sample age grows with slope one while a value is held and drops to
// the transport latency when a fresher packet arrives. Channel delays are
// generated once as explicit arrival sequences, then replayed exactly during
// integration, so a simulation is a pure function of (scenario, seed).

namespace ncs {

struct NetworkScenario {
  double control_cycle = 5e-4;        // poll period lower bound (T)
  double sampling_bound = 5e-4;       // hard bound on consecutive polls (h >= T)
  double transport_delay_max = 2e-4;  // bound on one-way network latency sum
  std::size_t loss_budget = 1;        // a held value may span at most this many polls
  double loss_probability = 0.0;
  double horizon = 20.0;
  std::uint64_t seed = 42;
};

inline void validate_scenario(const NetworkScenario& s) {
  require(s.control_cycle > 0.0, "control cycle must be positive");
  require(s.sampling_bound >= s.control_cycle, "sampling bound must be >= control cycle");
  require(s.transport_delay_max >= 0.0, "transport delay bound must be nonnegative");
  require(s.loss_budget >= 1, "loss budget must be at least 1");
  require(s.loss_probability >= 0.0 && s.loss_probability <= 1.0,
          "loss probability must lie in [0, 1]");
  require(s.horizon > 0.0, "horizon must be positive");
}

// Worst-case age of a held sample under the scenario: transport latency plus
// loss_budget poll intervals.
inline double scenario_delay_cap(const NetworkScenario& s) {
  return s.transport_delay_max + static_cast<double>(s.loss_budget) * s.sampling_bound;
}

struct ChannelArrival {
  double arrival;  // when the packet becomes the held value
  double poll;     // when its data was sampled
};

class DelayTraces {
 public:
  static DelayTraces none(std::size_t q) {
    DelayTraces t;
    t.channels_.resize(q);
    t.zero_ = true;
    return t;
  }

  std::size_t channel_count() const { return channels_.size(); }
  double horizon() const { return horizon_; }
  bool is_zero() const { return zero_; }
  const std::vector<ChannelArrival>& arrivals(std::size_t ch) const { return channels_[ch]; }

  // Sample age at time t: t minus the poll time of the freshest arrived packet.
  double delay_at(std::size_t ch, double t) const {
    if (zero_) return 0.0;
    const auto& a = channels_[ch];
    auto it = std::upper_bound(a.begin(), a.end(), t,
                               [](double v, const ChannelArrival& c) { return v < c.arrival; });
    if (it == a.begin()) return t;  // nothing arrived yet: aging since the start
    return t - std::prev(it)->poll;
  }

  double max_delay(std::size_t ch) const {
    if (zero_) return 0.0;
    const auto& a = channels_[ch];
    double m = 0.0, held_poll = 0.0;
    for (const auto& c : a) {
      m = std::max(m, c.arrival - held_poll);
      held_poll = std::max(held_poll, c.poll);
    }
    return std::max(m, horizon_ - held_poll);
  }

  double max_delay() const {
    double m = 0.0;
    for (std::size_t c = 0; c < channels_.size(); ++c) m = std::max(m, max_delay(c));
    return m;
  }

  double min_interarrival() const {
    if (zero_) return std::numeric_limits<double>::infinity();
    double m = std::numeric_limits<double>::infinity();
    for (const auto& ch : channels_)
      for (std::size_t i = 1; i < ch.size(); ++i)
        m = std::min(m, ch[i].arrival - ch[i - 1].arrival);
    return m;
  }

  friend DelayTraces generate_delays(const NetworkScenario&,
                                     const std::vector<std::pair<std::size_t, std::size_t>>&,
                                     double);

 private:
  std::vector<std::vector<ChannelArrival>> channels_;
  double horizon_ = 0.0;
  bool zero_ = false;
};

// Generate one delay realization. Each channel is a (sensor, actuator) pair;
// per cycle every sensor polls once (jittered), the two transport legs draw
// independently, and each channel loses the packet with the configured
// probability, except that a loss streak is cut before a held value would
// span more than loss_budget polls. Packets whose data is staler than the
// held value are dropped on arrival. `declared_cap` rejects scenarios whose
// worst-case age would exceed the cap the surrounding analysis assumed.
inline DelayTraces generate_delays(
    const NetworkScenario& s, const std::vector<std::pair<std::size_t, std::size_t>>& channels,
    double declared_cap = std::numeric_limits<double>::infinity()) {
  validate_scenario(s);
  require(!channels.empty(), "need at least one channel");
  if (scenario_delay_cap(s) > declared_cap)
    throw InputError("scenario delay cap exceeds the declared analysis cap");

  std::size_t sensors = 0, actuators = 0;
  for (const auto& [se, ac] : channels) {
    sensors = std::max(sensors, se + 1);
    actuators = std::max(actuators, ac + 1);
  }

  const std::size_t q = channels.size();
  DelayTraces out;
  out.channels_.resize(q);
  out.horizon_ = s.horizon;

  std::mt19937_64 rng(s.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double jitter_span = s.sampling_bound - s.control_cycle;
  const double leg_span = 0.5 * s.transport_delay_max;

  std::vector<std::vector<ChannelArrival>> raw(q);
  std::vector<std::size_t> streak(q, 0);

  std::vector<double> poll(sensors), leg_s(sensors), leg_a(actuators);
  for (std::size_t k = 0;; ++k) {
    const double base = static_cast<double>(k) * s.control_cycle;
    if (base > s.horizon) break;
    for (std::size_t i = 0; i < sensors; ++i) {
      poll[i] = base + jitter_span * u01(rng);
      leg_s[i] = leg_span * u01(rng);
    }
    for (std::size_t j = 0; j < actuators; ++j) leg_a[j] = leg_span * u01(rng);
    for (std::size_t c = 0; c < q; ++c) {
      const bool lose = u01(rng) < s.loss_probability;
      if (lose && streak[c] + 1 < s.loss_budget) {
        ++streak[c];
        continue;
      }
      streak[c] = 0;
      const auto [se, ac] = channels[c];
      raw[c].push_back({poll[se] + leg_s[se] + leg_a[ac], poll[se]});
    }
  }

  for (std::size_t c = 0; c < q; ++c) {
    std::stable_sort(raw[c].begin(), raw[c].end(),
                     [](const ChannelArrival& a, const ChannelArrival& b) {
                       return a.arrival < b.arrival;
                     });
    double held = 0.0;
    bool first = true;
    for (const auto& pkt : raw[c]) {
      if (pkt.arrival > s.horizon) continue;
      if (!first && pkt.poll <= held) continue;  // stale data: keep the fresher value
      held = pkt.poll;
      first = false;
      out.channels_[c].push_back(pkt);
    }
  }

  // Construction bounds every age by transport + loss_budget polls; verify.
  const double cap = scenario_delay_cap(s) + 1e-12;
  for (std::size_t c = 0; c < q; ++c)
    if (out.max_delay(c) > cap)
      throw std::runtime_error("generated trace violates its own delay cap");
  return out;
}

struct Trajectory {
  std::size_t dim = 0;
  std::size_t channels = 0;
  double horizon = 0.0;
  double divergence_cap = 0.0;
  bool divergent = false;
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Vec> delays;  // per stored step, per channel
  Vec err_norm;
};

struct IntegrateOptions {
  double dt = 1e-5;
  std::size_t store_stride = 1;
  Vec equilibrium;  // reference for err_norm; defaults to all-zero
  double divergence_cap = 1e6;
};

// Classical RK4 with held-sample delays. Aged states come from linear
// interpolation of the accumulated solution (constant initial history x0 for
// times at or before zero). When an aged time falls inside the current step,
// the value is interpolated between the step base and the stage argument;
// with zero delays this reproduces textbook RK4 exactly. Integration stops
// early and flags divergence when the sup norm passes divergence_cap.
template <class Field>
Trajectory integrate_dde(Field&& f, const Vec& x0, const DelayTraces& traces, double horizon,
                         const IntegrateOptions& opt = {}) {
  require(opt.dt > 0.0, "dt must be positive");
  require(horizon > opt.dt, "horizon must exceed dt");
  require(opt.store_stride >= 1, "store stride must be >= 1");
  const double min_gap = traces.min_interarrival();
  if (opt.dt > 0.25 * min_gap)
    throw InputError("dt too coarse: must be at most a quarter of the smallest "
                     "inter-arrival gap");

  const std::size_t n = x0.size();
  const std::size_t q = traces.channel_count();
  Vec eq = opt.equilibrium.empty() ? Vec(n, 0.0) : opt.equilibrium;
  require(eq.size() == n, "equilibrium dimension mismatch");

  const std::size_t steps = static_cast<std::size_t>(std::ceil(horizon / opt.dt - 1e-9));
  const double max_delay = traces.max_delay();
  const std::size_t ring = static_cast<std::size_t>(std::ceil(max_delay / opt.dt)) + 4;

  std::vector<Vec> hist(ring, x0);
  auto hist_at = [&](std::size_t step) -> const Vec& { return hist[step % ring]; };

  Trajectory traj;
  traj.dim = n;
  traj.channels = q;
  traj.horizon = horizon;
  traj.divergence_cap = opt.divergence_cap;

  auto store = [&](std::size_t step, const Vec& x) {
    const double t = static_cast<double>(step) * opt.dt;
    traj.times.push_back(t);
    traj.states.push_back(x);
    Vec d(q);
    for (std::size_t c = 0; c < q; ++c) d[c] = traces.delay_at(c, t);
    traj.delays.push_back(std::move(d));
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) err += (x[i] - eq[i]) * (x[i] - eq[i]);
    traj.err_norm.push_back(std::sqrt(err));
  };

  store(0, x0);

  Vec y = x0, k1(n), k2(n), k3(n), k4(n), ytmp(n), ynext(n);
  std::vector<Vec> aged(q, Vec(n));

  // Aged state at time tau, given the current step base (t0, y) and the stage
  // argument (ts, ystage) for within-step times.
  auto lookup = [&](double tau, std::size_t step, double t0, const Vec& ybase, double ts,
                    const Vec& ystage, Vec& out) {
    if (tau <= 0.0) {
      out = x0;
      return;
    }
    if (tau >= t0) {
      if (ts <= t0) {
        out = ybase;
        return;
      }
      const double w = (tau - t0) / (ts - t0);
      for (std::size_t i = 0; i < n; ++i) out[i] = ybase[i] + w * (ystage[i] - ybase[i]);
      return;
    }
    const double idx = tau / opt.dt;
    std::size_t lo = static_cast<std::size_t>(idx);
    if (lo >= step) lo = step - 1;
    const double w = idx - static_cast<double>(lo);
    const Vec& a = hist_at(lo);
    const Vec& b = hist_at(lo + 1);
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + w * (b[i] - a[i]);
  };

  auto eval = [&](double ts, const Vec& ystage, std::size_t step, double t0, Vec& kout) {
    for (std::size_t c = 0; c < q; ++c) {
      const double tau = ts - traces.delay_at(c, ts);
      lookup(tau, step, t0, y, ts, ystage, aged[c]);
    }
    f(ts, ystage, aged, kout);
  };

  for (std::size_t step = 0; step < steps; ++step) {
    const double t0 = static_cast<double>(step) * opt.dt;
    const double h = opt.dt;

    eval(t0, y, step, t0, k1);
    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + 0.5 * h * k1[i];
    eval(t0 + 0.5 * h, ytmp, step, t0, k2);
    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + 0.5 * h * k2[i];
    eval(t0 + 0.5 * h, ytmp, step, t0, k3);
    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * k3[i];
    eval(t0 + h, ytmp, step, t0, k4);

    for (std::size_t i = 0; i < n; ++i)
      ynext[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);

    y = ynext;
    hist[(step + 1) % ring] = y;

    bool diverged = false;
    for (double v : y)
      if (!std::isfinite(v) || std::abs(v) > opt.divergence_cap) diverged = true;

    if (diverged) {
      traj.divergent = true;
      store(step + 1, y);
      break;
    }
    if ((step + 1) % opt.store_stride == 0 || step + 1 == steps) store(step + 1, y);
  }
  return traj;
}

struct StabilityMetrics {
  bool settled = false;
  double settling_time = std::numeric_limits<double>::quiet_NaN();
  double peak_error = 0.0;
  double final_error = 0.0;
};

// settled: the error norm stays below 1e-3 over the last tenth of the horizon
// (and the run did not diverge). settling_time: first time the trajectory
// enters that band and never leaves again.
inline StabilityMetrics stability_metrics(const Trajectory& traj) {
  require(!traj.err_norm.empty(), "empty trajectory");
  constexpr double band = 1e-3;

  StabilityMetrics m;
  m.peak_error = *std::max_element(traj.err_norm.begin(), traj.err_norm.end());
  m.final_error = traj.divergent ? traj.divergence_cap : traj.err_norm.back();
  if (traj.divergent) return m;

  const double window_start = 0.9 * traj.horizon;
  bool ok = true;
  for (std::size_t i = 0; i < traj.times.size(); ++i)
    if (traj.times[i] >= window_start && traj.err_norm[i] >= band) ok = false;
  m.settled = ok;
  if (!ok) return m;

  std::size_t first = traj.times.size();
  for (std::size_t i = traj.times.size(); i-- > 0;) {
    if (traj.err_norm[i] >= band) break;
    first = i;
  }
  if (first < traj.times.size()) m.settling_time = traj.times[first];
  return m;
}

// One row per stored grid point. For the four-state, four-channel robot the
// header is exactly: t,q1,dq1,q2,dq2,d1,d2,d3,d4,err_norm
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  if (traj.dim == 4 && traj.channels == 4) {
    os << "t,q1,dq1,q2,dq2,d1,d2,d3,d4,err_norm\n";
  } else {
    os << "t";
    for (std::size_t i = 1; i <= traj.dim; ++i) os << ",x" << i;
    for (std::size_t c = 1; c <= traj.channels; ++c) os << ",d" << c;
    os << ",err_norm\n";
  }
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    os << buf;
  };
  for (std::size_t r = 0; r < traj.times.size(); ++r) {
    put(traj.times[r]);
    for (std::size_t i = 0; i < traj.dim; ++i) {
      os << ",";
      put(traj.states[r][i]);
    }
    for (std::size_t c = 0; c < traj.channels; ++c) {
      os << ",";
      put(traj.delays[r][c]);
    }
    os << ",";
    put(traj.err_norm[r]);
    os << "\n";
  }
}

}  // namespace ncs
