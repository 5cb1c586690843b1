#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ncs/robot.hpp"

using namespace ncs;

namespace {

RobotState sub(const RobotState& a, const RobotState& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]};
}

double max_abs(const RobotState& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

// Independent transcription of the delay-free control law: tau = -M(q2)v - N
// with v_i = alpha_i dq_i + beta_i (q_i - qd_i). Kept deliberately separate
// from the channelized implementation.
std::array<double, 2> plain_law(const RobotParams& p, const RobotState& x) {
  const Mat m = inertia_matrix(p, x[2]);
  const double v1 = p.alpha1 * x[1] + p.beta1 * (x[0] - p.qd1);
  const double v2 = p.alpha2 * x[3] + p.beta2 * (x[2] - p.qd2);
  const auto n = bias_terms(p, x);
  return {-m(0, 0) * v1 - m(0, 1) * v2 - n[0], -m(1, 0) * v1 - m(1, 1) * v2 - n[1]};
}

}  // namespace

TEST_CASE("inertia matrix hand values") {
  const RobotParams p;
  const Mat m0 = inertia_matrix(p, 0.0);
  CHECK(m0(0, 0) == Catch::Approx(1.023).margin(1e-12));
  CHECK(m0(0, 1) == Catch::Approx(0.288).margin(1e-12));
  CHECK(m0(1, 0) == Catch::Approx(0.288).margin(1e-12));
  CHECK(m0(1, 1) == Catch::Approx(0.128).margin(1e-12));

  const Mat m1 = inertia_matrix(p, M_PI / 2.0);
  CHECK(m1(0, 0) == Catch::Approx(0.703).margin(1e-12));
  CHECK(m1(0, 1) == Catch::Approx(0.128).margin(1e-12));

  // The (2,2) entry never depends on the joint angle.
  for (double q2 : {-2.0, -0.5, 0.3, 2.9}) CHECK(inertia_matrix(p, q2)(1, 1) == m0(1, 1));
}

TEST_CASE("inertia matrix stays positive definite over a full revolution") {
  const RobotParams p;
  double dmin = 1e9, dmax = -1e9;
  for (int i = 0; i < 10000; ++i) {
    const double q2 = -M_PI + 2.0 * M_PI * i / 9999.0;
    const Mat m = inertia_matrix(p, q2);
    CHECK(min_eigenvalue(SymMat(m)) > 0.0);
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    dmin = std::min(dmin, det);
    dmax = std::max(dmax, det);
  }
  CHECK(dmin == Catch::Approx(0.048).margin(1e-6));
  CHECK(dmax == Catch::Approx(0.0736).margin(1e-6));
}

TEST_CASE("bias terms hand values") {
  const RobotParams p;
  const auto rest = bias_terms(p, {0.0, 0.0, 0.0, 0.0});
  CHECK(rest[0] == Catch::Approx(14.406).margin(1e-12));
  CHECK(rest[1] == Catch::Approx(3.136).margin(1e-12));

  const auto up = bias_terms(p, {M_PI / 2.0, 0.0, 0.0, 0.0});
  CHECK(std::abs(up[0]) < 1e-12);
  CHECK(std::abs(up[1]) < 1e-12);

  // Velocity products vanish at sin(q2) = 0 and zero rates.
  const auto flat = bias_terms(p, {0.4, 0.0, 0.0, 0.0});
  const double grav1 = (p.m1 + p.m2) * p.g * p.a1 * std::cos(0.4) +
                       p.m2 * p.g * p.a2 * std::cos(0.4);
  CHECK(flat[0] == Catch::Approx(grav1).margin(1e-12));

  // The two velocity-term forms agree at dq1 = 1 and split elsewhere.
  const RobotState one{0.0, 1.0, 1.0, 0.0};
  CHECK(bias_terms(p, one, BiasForm::paper)[1] ==
        Catch::Approx(bias_terms(p, one, BiasForm::coriolis)[1]).margin(1e-15));
  const RobotState two{0.0, 2.0, 1.0, 0.0};
  const double gap = bias_terms(p, two, BiasForm::coriolis)[1] -
                     bias_terms(p, two, BiasForm::paper)[1];
  CHECK(gap == Catch::Approx(p.m2 * p.a1 * p.a2 * 2.0 * std::sin(1.0)).margin(1e-12));
}

TEST_CASE("equilibrium torques hold the arm") {
  RobotParams p;
  p.qd1 = 0.3;
  p.qd2 = -0.2;
  const RobotState eq = equilibrium(p);
  const auto tau = control_torques(p, {eq, eq, eq, eq});
  const auto n = bias_terms(p, eq);
  CHECK(tau[0] == Catch::Approx(-n[0]).margin(1e-12));
  CHECK(tau[1] == Catch::Approx(-n[1]).margin(1e-12));

  const RobotState f = closed_loop_f(p, eq, {eq, eq, eq, eq});
  CHECK(max_abs(f) < 1e-12);
}

TEST_CASE("zero delay torques match the plain control law") {
  const RobotParams p;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const RobotState x{u(rng), u(rng), u(rng), u(rng)};
    const auto got = control_torques(p, {x, x, x, x});
    const auto want = plain_law(p, x);
    CHECK(got[0] == Catch::Approx(want[0]).margin(1e-12));
    CHECK(got[1] == Catch::Approx(want[1]).margin(1e-12));
  }
}

TEST_CASE("torque channels read only their own joints") {
  const RobotParams p;
  const RobotState base{0.1, 0.2, -0.3, 0.4};
  const RobotState other{-0.8, 0.7, 0.9, -0.6};

  // tau1 depends on channels 1 and 3 only.
  const auto ref = control_torques(p, {base, base, base, base});
  auto t = control_torques(p, {base, other, base, other});
  CHECK(t[0] == ref[0]);
  t = control_torques(p, {other, base, other, base});
  CHECK(t[1] == ref[1]);

  // Channel 1 contributes only joint-1 variables: perturbing its q2 slots is
  // invisible.
  RobotState c1 = base;
  c1[2] += 0.5;
  c1[3] -= 0.5;
  t = control_torques(p, {c1, base, base, base});
  CHECK(t[0] == ref[0]);
  CHECK(t[1] == ref[1]);
}

TEST_CASE("field passes velocities through unchanged") {
  const RobotParams p;
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const RobotState x{u(rng), u(rng), u(rng), u(rng)};
    std::array<RobotState, 4> delayed;
    for (auto& d : delayed) d = RobotState{u(rng), u(rng), u(rng), u(rng)};
    const RobotState f = closed_loop_f(p, x, delayed);
    CHECK(f[0] == x[1]);
    CHECK(f[2] == x[3]);
  }
}

TEST_CASE("zero delay collapses to the linear error dynamics") {
  for (const auto& [qd1, qd2] : {std::pair{0.0, 0.0}, std::pair{0.7, -0.4}}) {
    RobotParams p;
    p.qd1 = qd1;
    p.qd2 = qd2;
    const Mat a = error_dynamics_matrix(p);
    const RobotState eq = equilibrium(p);
    const StateDomain dom = StateDomain::centered(p, 0.5, 0.5);

    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 1000; ++trial) {
      const RobotState x = dom.sample(rng);
      for (BiasForm form : {BiasForm::paper, BiasForm::coriolis}) {
        const RobotState f = closed_loop_f(p, x, {x, x, x, x}, form);
        const Vec lin = mat_vec(a, {x[0] - eq[0], x[1] - eq[1], x[2] - eq[2], x[3] - eq[3]});
        for (std::size_t i = 0; i < 4; ++i)
          CHECK(f[i] == Catch::Approx(lin[i]).margin(1e-9));
      }
    }
  }
}

TEST_CASE("staged fields mask channels below the stage index") {
  const RobotParams p;
  const RobotState x{0.2, -0.1, 0.3, 0.15};
  std::array<RobotState, 4> delayed{RobotState{0.5, 0.0, 0.1, 0.2},
                                    RobotState{-0.2, 0.3, 0.0, 0.1},
                                    RobotState{0.1, 0.1, -0.4, 0.0},
                                    RobotState{0.0, -0.3, 0.2, 0.4}};

  // Stage 1 ages every channel; stage q+1 none.
  CHECK(max_abs(sub(staged_field(p, 1, x, delayed), closed_loop_f(p, x, delayed))) == 0.0);
  CHECK(max_abs(sub(staged_field(p, 5, x, delayed), closed_loop_f(p, x, {x, x, x, x}))) == 0.0);

  // Stage 3: channels 1..2 read the current state.
  const RobotState s3 = staged_field(p, 3, x, delayed);
  const RobotState direct = closed_loop_f(p, x, {x, x, delayed[2], delayed[3]});
  CHECK(max_abs(sub(s3, direct)) == 0.0);

  CHECK_THROWS_AS(staged_field(p, 0, x, delayed), InputError);
  CHECK_THROWS_AS(staged_field(p, 6, x, delayed), InputError);

  // Equal arguments make every stage difference vanish identically.
  for (std::size_t k = 1; k <= 4; ++k)
    CHECK(max_abs(sub(staged_field(p, k, x, {x, x, x, x}),
                      staged_field(p, k + 1, x, {x, x, x, x}))) == 0.0);
}

TEST_CASE("stage differences telescope back to the delayed field") {
  const RobotParams p;
  const StateDomain dom = StateDomain::centered(p, 0.5, 0.5);
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 1000; ++trial) {
    const RobotState x = dom.sample(rng);
    std::array<RobotState, 4> delayed;
    for (auto& d : delayed) d = dom.sample(rng);

    RobotState acc = staged_field(p, 5, x, delayed);
    for (std::size_t k = 1; k <= 4; ++k) {
      const RobotState gk = staged_field(p, k, x, delayed);
      const RobotState gk1 = staged_field(p, k + 1, x, delayed);
      for (std::size_t i = 0; i < 4; ++i) acc[i] += gk[i] - gk1[i];
    }
    const RobotState f = closed_loop_f(p, x, delayed);
    CHECK(max_abs(sub(acc, f)) < 1e-9);
  }
}

TEST_CASE("state domain sampling and membership") {
  RobotParams p;
  p.qd1 = 1.0;
  const StateDomain dom = StateDomain::centered(p, 0.25, 0.5);
  CHECK(dom.contains(equilibrium(p)));
  CHECK_FALSE(dom.contains({1.3, 0.0, 0.0, 0.0}));
  CHECK(dom.coordinate_sample(0, 0.0) == 0.75);
  CHECK(dom.coordinate_sample(0, 1.0) == 1.25);
  CHECK_THROWS_AS(StateDomain::centered(p, 0.0, 0.5), InputError);

  std::mt19937_64 rng(47);
  for (int i = 0; i < 100; ++i) CHECK(dom.contains(dom.sample(rng)));
}

TEST_CASE("increment gain estimates keep the channel sparsity") {
  const RobotParams p;
  const StateDomain dom = StateDomain::centered(p, 0.5, 0.5);
  const auto gains = estimate_increment_gains(p, dom, 1500, 7);
  REQUIRE(gains.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(gains[k](0, j) == 0.0);
      CHECK(gains[k](2, j) == 0.0);
    }
    const std::array<std::size_t, 2> dead = k < 2 ? std::array<std::size_t, 2>{2, 3}
                                                  : std::array<std::size_t, 2>{0, 1};
    const std::array<std::size_t, 2> live = k < 2 ? std::array<std::size_t, 2>{0, 1}
                                                  : std::array<std::size_t, 2>{2, 3};
    for (std::size_t j : dead) {
      CHECK(gains[k](1, j) == 0.0);
      CHECK(gains[k](3, j) == 0.0);
    }
    for (std::size_t j : live) CHECK(gains[k](1, j) + gains[k](3, j) > 0.0);
  }
}

TEST_CASE("increment gain estimates are deterministic and monotone in budget") {
  const RobotParams p;
  const StateDomain dom = StateDomain::centered(p, 0.5, 0.5);
  const auto small = estimate_increment_gains(p, dom, 1000, 11);
  const auto again = estimate_increment_gains(p, dom, 1000, 11);
  const auto big = estimate_increment_gains(p, dom, 2000, 11);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK((small[k] - again[k]).max_abs() == 0.0);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) CHECK(big[k](i, j) >= small[k](i, j));
  }
}

TEST_CASE("assumption audit passes the shipped bounds for field and gradient") {
  const RobotParams p;
  const StateDomain dom = StateDomain::centered(p, 0.5, 0.5);
  const SystemBounds b = load_system_bounds("data/fixtures", 4, Vec(4, 1e-3));

  const AssumptionAudit audit = verify_assumptions(b, p, dom, 2000, 123);
  CHECK(audit.samples == 2000);
  CHECK(audit.counts.count("field_bound") == 0);
  CHECK(audit.counts.count("gradient_bound") == 0);
  // Decay and increment checks may legitimately report witnesses (rounded
  // fixtures, sampled suprema); every witness must carry its numbers.
  for (const auto& w : audit.witnesses) {
    CHECK(w.lhs > w.rhs);
    CHECK(dom.contains(w.state));
  }
  if (audit.total() > 0) CHECK(!audit.witnesses.empty());
}

TEST_CASE("assumption audit flags a forced field violation") {
  const RobotParams p;
  const StateDomain dom = StateDomain::centered(p, 0.5, 0.5);
  SystemBounds b = load_system_bounds("data/fixtures", 4, Vec(4, 1e-3));
  b.F(1, 0) = 0.0;  // drop the position term from the acceleration row bound

  const AssumptionAudit audit = verify_assumptions(b, p, dom, 500, 123);
  REQUIRE(audit.counts.count("field_bound") == 1);
  CHECK(audit.counts.at("field_bound") > 0);
  bool saw_row1 = false;
  for (const auto& w : audit.witnesses)
    if (w.inequality == "field_bound") {
      CHECK(w.row == 1);
      CHECK_FALSE(w.uses_delayed);
      saw_row1 = true;
    }
  CHECK(saw_row1);
}

TEST_CASE("fixture bounds load with the published entries") {
  const SystemBounds b = load_system_bounds("data/fixtures", 4, Vec(4, 1e-3));
  CHECK(b.n == 4);
  CHECK(b.q == 4);
  CHECK(b.F(1, 0) == 3.16);
  CHECK(b.F(3, 3) == 2.55);
  CHECK(b.W(0, 0) == 0.9796);
  CHECK(b.W(1, 1) == 0.2074);
  CHECK(b.S(2, 2) == 0.8035);
  CHECK(b.M[0](1, 0) == 29.7955);
  CHECK(b.M[0](3, 1) == 30.6);
  CHECK(b.M[1](1, 1) == 22.1);
  CHECK(b.M[2](3, 2) == 308.8420);
  CHECK(b.M[3](1, 2) == 104.9);
  CHECK(b.M[3](3, 3) == 7.0);

  CHECK_THROWS_AS(load_system_bounds("data/missing", 4, Vec(4, 1e-3)), InputError);
  CHECK_THROWS_AS(load_system_bounds("data/fixtures", 4, Vec{1e-3}), InputError);
}

TEST_CASE("parameter validation") {
  RobotParams p;
  CHECK_NOTHROW(validate_params(p));
  p.m2 = 0.0;
  CHECK_THROWS_AS(validate_params(p), InputError);
  p = {};
  p.beta1 = -1.0;
  CHECK_THROWS_AS(validate_params(p), InputError);
}
