#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "ncs/analysis.hpp"
#include "ncs/matrix.hpp"

// Two-link robot arm under feedback-linearizing control where sensor and
// actuator data travel over four lossy links. State x = [q1, dq1, q2, dq2].
// The torque at actuator 1 is computed from joint-1 data aged by channel 1
// and joint-2 data aged by channel 3; actuator 2 reads channels 2 and 4.
// With all delays zero the feedback cancellation is exact and each joint
// error obeys  e'' + alpha e' + beta e = 0.

namespace ncs {

using RobotState = std::array<double, 4>;

struct RobotParams {
  double m1 = 1.5;
  double m2 = 0.8;
  double a1 = 0.5;
  double a2 = 0.4;
  double g = 9.8;
  double alpha1 = 2.55;
  double alpha2 = 2.55;
  double beta1 = 3.16;
  double beta2 = 3.16;
  double qd1 = 0.0;
  double qd2 = 0.0;
};

inline void validate_params(const RobotParams& p) {
  require(p.m1 > 0.0 && p.m2 > 0.0, "link masses must be positive");
  require(p.a1 > 0.0 && p.a2 > 0.0, "link lengths must be positive");
  require(p.g >= 0.0, "gravity must be nonnegative");
  require(p.alpha1 > 0.0 && p.alpha2 > 0.0 && p.beta1 > 0.0 && p.beta2 > 0.0,
          "error-dynamics gains must be positive");
}

// The velocity-product term in the second bias entry appears in two forms in
// the literature: linear in dq1 or quadratic. `paper` keeps the linear form
// used to derive the shipped bound fixtures.
enum class BiasForm { paper, coriolis };

inline Mat inertia_matrix(const RobotParams& p, double q2) {
  const double c = std::cos(q2);
  Mat m(2, 2);
  m(0, 0) = (p.m1 + p.m2) * p.a1 * p.a1 + p.m2 * p.a2 * p.a2 + 2.0 * p.m2 * p.a1 * p.a2 * c;
  m(0, 1) = p.m2 * p.a2 * (p.a2 + p.a1 * c);
  m(1, 0) = m(0, 1);
  m(1, 1) = p.m2 * p.a2 * p.a2;
  return m;
}

inline std::array<double, 2> bias_terms(const RobotParams& p, const RobotState& x,
                                        BiasForm form = BiasForm::paper) {
  const double q1 = x[0], dq1 = x[1], q2 = x[2], dq2 = x[3];
  const double s2 = std::sin(q2);
  std::array<double, 2> n{};
  n[0] = -p.m2 * p.a1 * p.a2 * (2.0 * dq1 * dq2 + dq2 * dq2) * s2 +
         (p.m1 + p.m2) * p.g * p.a1 * std::cos(q1) + p.m2 * p.g * p.a2 * std::cos(q1 + q2);
  const double vel = form == BiasForm::paper ? dq1 : dq1 * dq1;
  n[1] = p.m2 * p.a1 * p.a2 * vel * s2 + p.m2 * p.g * p.a2 * std::cos(q1 + q2);
  return n;
}

// Feedback-linearizing torques computed from per-channel aged states.
// delayed[k] is the state seen over channel k+1.
inline std::array<double, 2> control_torques(const RobotParams& p,
                                             const std::array<RobotState, 4>& delayed,
                                             BiasForm form = BiasForm::paper) {
  const RobotState& c1 = delayed[0];  // joint-1 data at actuator 1
  const RobotState& c2 = delayed[1];  // joint-1 data at actuator 2
  const RobotState& c3 = delayed[2];  // joint-2 data at actuator 1
  const RobotState& c4 = delayed[3];  // joint-2 data at actuator 2

  std::array<double, 2> tau{};
  {
    const double q2d = c3[2];
    const Mat m = inertia_matrix(p, q2d);
    const double v1 = p.alpha1 * c1[1] + p.beta1 * (c1[0] - p.qd1);
    const double v2 = p.alpha2 * c3[3] + p.beta2 * (c3[2] - p.qd2);
    const RobotState mixed{c1[0], c1[1], c3[2], c3[3]};
    tau[0] = -m(0, 0) * v1 - m(0, 1) * v2 - bias_terms(p, mixed, form)[0];
  }
  {
    const double q2d = c4[2];
    const Mat m = inertia_matrix(p, q2d);
    const double v1 = p.alpha1 * c2[1] + p.beta1 * (c2[0] - p.qd1);
    const double v2 = p.alpha2 * c4[3] + p.beta2 * (c4[2] - p.qd2);
    const RobotState mixed{c2[0], c2[1], c4[2], c4[3]};
    tau[1] = -m(0, 1) * v1 - m(1, 1) * v2 - bias_terms(p, mixed, form)[1];
  }
  return tau;
}

// Closed-loop vector field: inertia and bias evaluated at the current state,
// torques at the per-channel aged states.
inline RobotState closed_loop_f(const RobotParams& p, const RobotState& x,
                                const std::array<RobotState, 4>& delayed,
                                BiasForm form = BiasForm::paper) {
  const auto tau = control_torques(p, delayed, form);
  const auto n = bias_terms(p, x, form);
  const Mat m = inertia_matrix(p, x[2]);
  const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(0, 1);
  if (!(std::abs(det) > 1e-12)) throw std::runtime_error("singular inertia matrix");
  const double b0 = tau[0] + n[0], b1 = tau[1] + n[1];
  const double dd1 = (m(1, 1) * b0 - m(0, 1) * b1) / det;
  const double dd2 = (m(0, 0) * b1 - m(0, 1) * b0) / det;
  return {x[1], dd1, x[3], dd2};
}

inline RobotState equilibrium(const RobotParams& p) { return {p.qd1, 0.0, p.qd2, 0.0}; }

// Error dynamics matrix of the delay-free closed loop, acting on x - x_eq.
inline Mat error_dynamics_matrix(const RobotParams& p) {
  Mat a(4, 4, 0.0);
  a(0, 1) = 1.0;
  a(1, 0) = -p.beta1;
  a(1, 1) = -p.alpha1;
  a(2, 3) = 1.0;
  a(3, 2) = -p.beta2;
  a(3, 3) = -p.alpha2;
  return a;
}

// Partially-aged fields: channels below `k` read the current state, channels
// `k` and above read their aged copies; k = q+1 means no channel is aged.
inline RobotState staged_field(const RobotParams& p, std::size_t k, const RobotState& x,
                               const std::array<RobotState, 4>& delayed,
                               BiasForm form = BiasForm::paper) {
  require(k >= 1 && k <= 5, "stage index must lie in 1..q+1");
  std::array<RobotState, 4> args;
  for (std::size_t c = 0; c < 4; ++c) args[c] = (c + 1 >= k) ? delayed[c] : x;
  return closed_loop_f(p, x, args, form);
}

struct StateDomain {
  std::array<std::pair<double, double>, 4> box;

  static StateDomain centered(const RobotParams& p, double pos_halfwidth,
                              double vel_halfwidth) {
    require(pos_halfwidth > 0.0 && vel_halfwidth > 0.0, "domain halfwidths must be positive");
    StateDomain d;
    d.box[0] = {p.qd1 - pos_halfwidth, p.qd1 + pos_halfwidth};
    d.box[1] = {-vel_halfwidth, vel_halfwidth};
    d.box[2] = {p.qd2 - pos_halfwidth, p.qd2 + pos_halfwidth};
    d.box[3] = {-vel_halfwidth, vel_halfwidth};
    return d;
  }

  bool contains(const RobotState& x) const {
    for (std::size_t i = 0; i < 4; ++i)
      if (x[i] < box[i].first || x[i] > box[i].second) return false;
    return true;
  }

  template <class Rng>
  RobotState sample(Rng& rng) const {
    RobotState x{};
    for (std::size_t i = 0; i < 4; ++i) {
      std::uniform_real_distribution<double> u(box[i].first, box[i].second);
      x[i] = u(rng);
    }
    return x;
  }

  double coordinate_sample(std::size_t i, double u01) const {
    return box[i].first + u01 * (box[i].second - box[i].first);
  }
};

// Supremum estimate of the per-channel increment gains over a state domain:
// aging channel k alone in one coordinate and measuring the field increment
// gives a ratio whose supremum is the (row, column) entry. Rows for the
// velocity coordinates and columns never read by the channel stay exactly
// zero. Sampling mixes a deterministic corner grid with seeded random draws;
// growing sample_count only extends the draw sequence, so estimates are
// monotone in the sample budget. A 5% headroom factor is applied.
inline std::vector<Mat> estimate_increment_gains(const RobotParams& p, const StateDomain& dom,
                                                 std::size_t sample_count, std::uint64_t seed,
                                                 BiasForm form = BiasForm::paper) {
  validate_params(p);
  std::vector<Mat> out(4, Mat(4, 4, 0.0));

  for (std::size_t k = 1; k <= 4; ++k) {
    const std::array<std::size_t, 2> cols =
        k <= 2 ? std::array<std::size_t, 2>{0, 1} : std::array<std::size_t, 2>{2, 3};
    for (std::size_t j : cols) {
      double best1 = 0.0, best3 = 0.0;

      auto probe = [&](const RobotState& x, const std::array<RobotState, 4>& delayed) {
        const double u = x[j] - delayed[k - 1][j];
        if (std::abs(u) < 1e-9) return;
        const RobotState gk = staged_field(p, k, x, delayed, form);
        const RobotState gk1 = staged_field(p, k + 1, x, delayed, form);
        best1 = std::max(best1, std::abs(gk[1] - gk1[1]) / std::abs(u));
        best3 = std::max(best3, std::abs(gk[3] - gk1[3]) / std::abs(u));
      };

      // Corner/midpoint grid; the other channels stay at the current state.
      for (std::size_t code = 0; code < 81; ++code) {
        RobotState x{};
        std::size_t rest = code;
        for (std::size_t i = 0; i < 4; ++i) {
          x[i] = dom.coordinate_sample(i, 0.5 * static_cast<double>(rest % 3));
          rest /= 3;
        }
        for (double uj : {0.0, 0.5, 1.0}) {
          std::array<RobotState, 4> delayed{x, x, x, x};
          delayed[k - 1][j] = dom.coordinate_sample(j, uj);
          probe(x, delayed);
        }
      }

      std::mt19937_64 rng(seed ^ (0x517cc1b727220a95ULL * (16 * k + j + 1)));
      for (std::size_t s = 0; s < sample_count; ++s) {
        const RobotState x = dom.sample(rng);
        std::array<RobotState, 4> delayed;
        for (std::size_t c = 0; c < 4; ++c)
          delayed[c] = (c + 1 > k) ? dom.sample(rng) : x;
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        delayed[k - 1] = x;
        delayed[k - 1][j] = dom.coordinate_sample(j, u01(rng));
        probe(x, delayed);
      }

      out[k - 1](1, j) = 1.05 * best1;
      out[k - 1](3, j) = 1.05 * best3;
    }
  }
  return out;
}

struct BoundViolation {
  std::string inequality;
  int row;  // -1 for the scalar decay inequality
  double lhs;
  double rhs;
  RobotState state;
  std::array<RobotState, 4> delayed;
  bool uses_delayed = false;
};

struct AssumptionAudit {
  std::size_t samples = 0;
  std::map<std::string, std::size_t> counts;
  std::vector<BoundViolation> witnesses;

  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& [_, c] : counts) t += c;
    return t;
  }
};

// Sampled audit of the comparison-system bounds over a state domain, in error
// coordinates e = x - x_eq:
//   lyapunov_decay      2 e'P f(e)      <= -|e|' S |e|
//   gradient_bound      |2 P e|         <= 2 W |e|
//   field_bound         |f(e)|          <= F |e|
//   increment_bound_k   |G_k - G_{k+1}| <= M_k |x - x_dk|
// The field is always evaluated through the real closed loop. P defaults to W
// (valid whenever the certificate P is entrywise nonnegative, as for the
// shipped fixtures); pass an explicit P otherwise.
inline AssumptionAudit verify_assumptions(const SystemBounds& b, const RobotParams& p,
                                          const StateDomain& dom, std::size_t sample_count,
                                          std::uint64_t seed,
                                          const SymMat* p_explicit = nullptr,
                                          BiasForm form = BiasForm::paper) {
  validate_bounds(b);
  validate_params(p);
  require(b.n == 4 && b.q == 4, "robot audit expects n = 4, q = 4");

  const SymMat pmat = p_explicit ? *p_explicit : SymMat(b.W);
  const RobotState xeq = equilibrium(p);
  const double tol = 1e-9;
  constexpr std::size_t witness_cap = 50;

  AssumptionAudit audit;
  audit.samples = sample_count;

  auto record = [&](BoundViolation v) {
    ++audit.counts[v.inequality];
    if (audit.witnesses.size() < witness_cap) audit.witnesses.push_back(std::move(v));
  };

  std::mt19937_64 rng(seed);
  for (std::size_t s = 0; s < sample_count; ++s) {
    const RobotState x = dom.sample(rng);
    Vec e(4), ebar(4);
    for (std::size_t i = 0; i < 4; ++i) {
      e[i] = x[i] - xeq[i];
      ebar[i] = std::abs(e[i]);
    }

    const RobotState fx = closed_loop_f(p, x, {x, x, x, x}, form);
    const Vec fe{fx[0], fx[1], fx[2], fx[3]};
    const Vec pe = mat_vec(pmat.mat(), e);
    const Vec we = mat_vec(b.W, ebar);
    const Vec fbar = mat_vec(b.F, ebar);

    for (std::size_t i = 0; i < 4; ++i) {
      if (std::abs(fe[i]) > fbar[i] + tol)
        record({"field_bound", static_cast<int>(i), std::abs(fe[i]), fbar[i], x, {}, false});
      if (std::abs(2.0 * pe[i]) > 2.0 * we[i] + tol)
        record({"gradient_bound", static_cast<int>(i), std::abs(2.0 * pe[i]), 2.0 * we[i], x,
                {}, false});
    }

    double decay_lhs = 2.0 * dot(e, fe);
    double decay_rhs = -dot(ebar, mat_vec(b.S.mat(), ebar));
    if (decay_lhs > decay_rhs + tol)
      record({"lyapunov_decay", -1, decay_lhs, decay_rhs, x, {}, false});

    for (std::size_t k = 1; k <= 4; ++k) {
      std::array<RobotState, 4> delayed;
      for (std::size_t c = 0; c < 4; ++c) delayed[c] = (c + 1 >= k) ? dom.sample(rng) : x;
      const RobotState gk = staged_field(p, k, x, delayed, form);
      const RobotState gk1 = staged_field(p, k + 1, x, delayed, form);
      Vec du(4);
      for (std::size_t i = 0; i < 4; ++i) du[i] = std::abs(x[i] - delayed[k - 1][i]);
      const Vec rhs = mat_vec(b.M[k - 1], du);
      for (std::size_t i = 0; i < 4; ++i) {
        const double lhs = std::abs(gk[i] - gk1[i]);
        if (lhs > rhs[i] + tol)
          record({"increment_bound_" + std::to_string(k), static_cast<int>(i), lhs, rhs[i], x,
                  delayed, true});
      }
    }
  }
  return audit;
}

// Load the bound matrices (F, W, S, M1..Mq) from plain-text fixture files.
inline SystemBounds load_system_bounds(const std::string& dir, std::size_t q,
                                       const std::vector<double>& r) {
  SystemBounds b;
  b.F = load_matrix_file(dir + "/F.txt");
  b.n = b.F.rows();
  b.q = q;
  b.W = load_matrix_file(dir + "/W.txt");
  b.S = SymMat(load_matrix_file(dir + "/S.txt"));
  for (std::size_t k = 1; k <= q; ++k)
    b.M.push_back(load_matrix_file(dir + "/M" + std::to_string(k) + ".txt"));
  b.r = r;
  validate_bounds(b);
  return b;
}

}  // namespace ncs
