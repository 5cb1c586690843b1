#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "ncs/lmi.hpp"
#include "ncs/log.hpp"

// Log-barrier interior-point solver for the structured LMI problems built in
// this toolkit. Two entry points:
//
//   solve_feasibility  maximizes the uniform margin t subject to
//                        G_j(x) - t*I >= 0           (every matrix block)
//                        x_s - t >= 0                 (positivity floors)
//                        |x_i| <= variable_bound      (box)
//                      and classifies the problem from the optimal margin.
//
//   maximize_linear    phase 1 runs the margin problem to find an interior
//                      point, phase 2 follows the central path of
//                        min -tau*c'x + barrier(x).
//
// Blocks declared nd are negated up front, so internally everything is ">= 0".
// Each stage centers with damped Newton using exact gradients and Hessians;
// the duality-gap bound m/tau decides when to stop sharpening the barrier.
// Verdicts are never taken from solver internals alone: the exact margin of
// the returned point is recomputed with the eigensolver and drives the status.

namespace ncs {

enum class SdpStatus { feasible, infeasible, inconclusive };

inline const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::feasible: return "feasible";
    case SdpStatus::infeasible: return "infeasible";
    case SdpStatus::inconclusive: return "inconclusive";
  }
  return "?";
}

struct SdpVerdict {
  SdpStatus status = SdpStatus::inconclusive;
  Vec point;
  // Worst signed eigenvalue margin over all blocks and positivity floors,
  // recomputed exactly at `point`.
  double margin = -std::numeric_limits<double>::infinity();
  double objective = std::numeric_limits<double>::quiet_NaN();
  std::size_t iterations = 0;
};

struct SolverConfig {
  std::size_t max_iterations = 20000;
  double margin_tolerance = 1e-7;
  double variable_bound = 1e6;
  std::uint64_t seed = 42;
  // Jittered restarts are a fallback for stalled runs, not the normal path.
  std::size_t restarts = 8;
};

// Per-stage progress (margin or objective value); monotone along the path.
struct SolveTrace {
  std::vector<double> stage_values;
};

namespace detail {

struct SparseEntry {
  std::size_t i, j;  // i <= j
  double v;
};

struct SparseTerm {
  std::size_t var;
  Mat basis;  // dense symmetric, sign-normalized
  std::vector<SparseEntry> entries;
};

struct PreparedBlock {
  std::size_t dim;
  Mat constant;  // sign-normalized: constraint reads constant + sum x*B >= 0
  std::vector<SparseTerm> terms;
};

struct Prepared {
  std::size_t nvars = 0;
  std::vector<PreparedBlock> blocks;
  std::vector<std::size_t> floors;
  double bound = 0.0;
};

inline Prepared prepare(const LmiProblem& p, double bound) {
  auto diag = validate(p);
  if (!diag.empty()) throw InputError("invalid LMI problem: " + diag.front());
  require(bound > 0.0, "variable bound must be positive");

  Prepared pp;
  pp.nvars = p.layout.total_scalars();
  pp.bound = bound;
  pp.floors = p.layout.positive_scalars();
  for (const auto& blk : p.constraints) {
    const double sgn = blk.sign == BlockSign::psd ? 1.0 : -1.0;
    PreparedBlock pb;
    pb.dim = blk.dim();
    pb.constant = blk.constant.mat() * sgn;
    for (const auto& t : blk.terms) {
      SparseTerm st;
      st.var = t.scalar_index;
      st.basis = t.basis.mat() * sgn;
      for (std::size_t i = 0; i < pb.dim; ++i)
        for (std::size_t j = i; j < pb.dim; ++j)
          if (st.basis(i, j) != 0.0) st.entries.push_back({i, j, st.basis(i, j)});
      if (!st.entries.empty()) pb.terms.push_back(std::move(st));
    }
    pp.blocks.push_back(std::move(pb));
  }
  return pp;
}

// Exact min-eigenvalue margin over blocks and floors (box excluded).
inline double exact_margin(const Prepared& pp, const Vec& x) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& blk : pp.blocks) {
    Mat e = blk.constant;
    for (const auto& t : blk.terms) {
      if (x[t.var] == 0.0) continue;
      for (const auto& en : t.entries) {
        e(en.i, en.j) += x[t.var] * en.v;
        if (en.i != en.j) e(en.j, en.i) += x[t.var] * en.v;
      }
    }
    m = std::min(m, min_eigenvalue(SymMat(std::move(e))));
  }
  for (std::size_t s : pp.floors) m = std::min(m, x[s]);
  return m;
}

// Barrier over z = [x] or z = [x, t]; the margin variable t, when present,
// subtracts t*I from every block and t from every floor.
class BarrierEngine {
 public:
  BarrierEngine(const Prepared& pp, bool with_t) : pp_(pp), with_t_(with_t) {
    nz_ = pp.nvars + (with_t ? 1 : 0);
    m_barrier_ = 0;
    for (const auto& b : pp.blocks) m_barrier_ += b.dim;
    m_barrier_ += pp.floors.size();
    m_barrier_ += 2 * pp.nvars;  // box
  }

  std::size_t size() const { return nz_; }
  std::size_t barrier_multiplicity() const { return m_barrier_; }

  // phi only; returns false if z is outside the strict interior.
  bool phi(const Vec& z, double* out) const {
    const double t = with_t_ ? z[pp_.nvars] : 0.0;
    double total = 0.0;
    Mat e;
    for (const auto& blk : pp_.blocks) {
      form(blk, z, t, e);
      if (!cholesky_in_place(e)) return false;
      double ld = 0.0;
      for (std::size_t i = 0; i < blk.dim; ++i) ld += std::log(e(i, i));
      total -= 2.0 * ld;
    }
    for (std::size_t s : pp_.floors) {
      double u = z[s] - t;
      if (!(u > 0.0)) return false;
      total -= std::log(u);
    }
    for (std::size_t i = 0; i < pp_.nvars; ++i) {
      double a = pp_.bound - z[i], b = pp_.bound + z[i];
      if (!(a > 0.0) || !(b > 0.0)) return false;
      total -= std::log(a) + std::log(b);
    }
    if (!std::isfinite(total)) return false;
    *out = total;
    return true;
  }

  // phi with exact gradient and Hessian; z must be strictly interior.
  bool derivatives(const Vec& z, double* phi_out, Vec& grad, Mat& hess) const {
    const double t = with_t_ ? z[pp_.nvars] : 0.0;
    grad.assign(nz_, 0.0);
    hess = Mat(nz_, nz_, 0.0);
    double total = 0.0;

    Mat e, inv, w;
    for (const auto& blk : pp_.blocks) {
      const std::size_t n = blk.dim;
      form(blk, z, t, e);
      if (!cholesky_in_place(e)) return false;
      double ld = 0.0;
      for (std::size_t i = 0; i < n; ++i) ld += std::log(e(i, i));
      total -= 2.0 * ld;

      // inv = E^{-1} via the factor.
      inv = Mat(n, n, 0.0);
      Vec col(n);
      for (std::size_t c = 0; c < n; ++c) {
        std::fill(col.begin(), col.end(), 0.0);
        col[c] = 1.0;
        Vec sol = cholesky_solve(e, col);
        for (std::size_t r = 0; r < n; ++r) inv(r, c) = sol[r];
      }

      const std::size_t nt = blk.terms.size();
      // W_v = E^{-1} B_v E^{-1}, assembled from the sparse entries of B_v.
      std::vector<Mat> ws(nt);
      for (std::size_t v = 0; v < nt; ++v) {
        w = Mat(n, n, 0.0);
        for (const auto& en : blk.terms[v].entries) {
          for (std::size_t r = 0; r < n; ++r) {
            const double uir = inv(r, en.i), ujr = inv(r, en.j);
            for (std::size_t c = 0; c < n; ++c) {
              double add = uir * inv(en.j, c);
              if (en.i != en.j) add += ujr * inv(en.i, c);
              w(r, c) += en.v * add;
            }
          }
        }
        ws[v] = w;

        double tr = 0.0;
        for (const auto& en : blk.terms[v].entries)
          tr += (en.i == en.j ? 1.0 : 2.0) * inv(en.i, en.j) * en.v;
        grad[blk.terms[v].var] -= tr;

        if (with_t_) {
          double trw = 0.0;
          for (std::size_t i = 0; i < n; ++i) trw += ws[v](i, i);
          hess(blk.terms[v].var, nz_ - 1) -= trw;
        }
      }

      for (std::size_t a = 0; a < nt; ++a)
        for (std::size_t b = a; b < nt; ++b) {
          double h = 0.0;
          for (const auto& en : blk.terms[b].entries)
            h += (en.i == en.j ? 1.0 : 2.0) * ws[a](en.i, en.j) * en.v;
          hess(blk.terms[a].var, blk.terms[b].var) += h;
          if (blk.terms[a].var != blk.terms[b].var)
            hess(blk.terms[b].var, blk.terms[a].var) += h;
        }

      if (with_t_) {
        double tri = 0.0, fro = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          tri += inv(i, i);
          for (std::size_t j = 0; j < n; ++j) fro += inv(i, j) * inv(i, j);
        }
        grad[nz_ - 1] += tri;
        hess(nz_ - 1, nz_ - 1) += fro;
      }
    }

    if (with_t_) {
      // Mirror the t-column accumulated above.
      for (std::size_t v = 0; v + 1 < nz_; ++v) hess(nz_ - 1, v) = hess(v, nz_ - 1);
    }

    for (std::size_t s : pp_.floors) {
      double u = z[s] - t;
      if (!(u > 0.0)) return false;
      total -= std::log(u);
      double iu = 1.0 / u, iu2 = iu * iu;
      grad[s] -= iu;
      hess(s, s) += iu2;
      if (with_t_) {
        grad[nz_ - 1] += iu;
        hess(nz_ - 1, nz_ - 1) += iu2;
        hess(s, nz_ - 1) -= iu2;
        hess(nz_ - 1, s) -= iu2;
      }
    }

    for (std::size_t i = 0; i < pp_.nvars; ++i) {
      double a = pp_.bound - z[i], b = pp_.bound + z[i];
      if (!(a > 0.0) || !(b > 0.0)) return false;
      total -= std::log(a) + std::log(b);
      grad[i] += 1.0 / a - 1.0 / b;
      hess(i, i) += 1.0 / (a * a) + 1.0 / (b * b);
    }

    if (!std::isfinite(total)) return false;
    *phi_out = total;
    return true;
  }

 private:
  void form(const PreparedBlock& blk, const Vec& z, double t, Mat& e) const {
    e = blk.constant;
    for (const auto& term : blk.terms) {
      const double x = z[term.var];
      if (x == 0.0) continue;
      for (const auto& en : term.entries) {
        e(en.i, en.j) += x * en.v;
        if (en.i != en.j) e(en.j, en.i) += x * en.v;
      }
    }
    if (with_t_)
      for (std::size_t i = 0; i < blk.dim; ++i) e(i, i) -= t;
  }

  const Prepared& pp_;
  bool with_t_;
  std::size_t nz_ = 0;
  std::size_t m_barrier_ = 0;
};

inline bool newton_direction(Mat h, Vec g, Vec& step) {
  const std::size_t n = h.rows();
  double base = 0.0;
  for (std::size_t i = 0; i < n; ++i) base = std::max(base, std::abs(h(i, i)));
  double ridge = 0.0;
  for (int attempt = 0; attempt < 10; ++attempt) {
    Mat hr = h;
    if (ridge > 0.0)
      for (std::size_t i = 0; i < n; ++i) hr(i, i) += ridge;
    if (cholesky_in_place(hr)) {
      Vec neg = g;
      for (double& v : neg) v = -v;
      step = cholesky_solve(hr, neg);
      bool ok = true;
      for (double v : step)
        if (!std::isfinite(v)) ok = false;
      if (ok) return true;
    }
    ridge = ridge == 0.0 ? std::max(1e-14 * base, 1e-300) : ridge * 100.0;
  }
  return false;
}

struct PathResult {
  Vec z;
  bool converged = false;
  std::size_t iterations = 0;
};

// Follow the central path of  min -tau*<dir,z> + phi(z), tau *= 20 per stage,
// from a strictly interior z0. dir selects the margin variable or the linear
// objective. Stops when m/tau <= gap or the iteration budget runs out.
inline PathResult follow_path(const BarrierEngine& eng, Vec z0, const Vec& dir, double gap,
                              std::size_t budget, std::size_t* used, SolveTrace* trace) {
  PathResult res;
  res.z = std::move(z0);

  double tau = 1.0;
  const double mu = 20.0;
  const std::size_t nz = eng.size();

  Vec grad, step;
  Mat hess;

  while (true) {
    bool centered = false;
    for (std::size_t inner = 0; inner < 120; ++inner) {
      if (*used >= budget) {
        res.iterations = *used;
        return res;
      }
      double ph = 0.0;
      if (!eng.derivatives(res.z, &ph, grad, hess)) return res;
      Vec gf = grad;
      for (std::size_t i = 0; i < nz; ++i) gf[i] -= tau * dir[i];
      if (!newton_direction(hess, gf, step)) return res;

      double lambda2 = 0.0;
      for (std::size_t i = 0; i < nz; ++i) lambda2 -= gf[i] * step[i];
      if (!(lambda2 > 0.0) || lambda2 * 0.5 <= 1e-10) {
        centered = true;
        break;
      }

      // Backtrack to the strict interior first, then Armijo on the stage
      // objective f = -tau*<dir,z> + phi.
      double f0 = ph;
      for (std::size_t i = 0; i < nz; ++i) f0 -= tau * dir[i] * res.z[i];
      double s = 1.0;
      bool moved = false;
      Vec zn(nz);
      for (int bt = 0; bt < 90; ++bt) {
        for (std::size_t i = 0; i < nz; ++i) zn[i] = res.z[i] + s * step[i];
        double phn;
        if (eng.phi(zn, &phn)) {
          double fn = phn;
          for (std::size_t i = 0; i < nz; ++i) fn -= tau * dir[i] * zn[i];
          if (fn <= f0 - 0.25 * s * lambda2) {
            res.z = zn;
            moved = true;
            break;
          }
        }
        s *= 0.5;
        if (s < 1e-16) break;
      }
      ++*used;
      if (!moved) {
        res.iterations = *used;
        return res;  // stalled
      }
    }
    if (!centered) {
      res.iterations = *used;
      return res;
    }

    if (trace) {
      double val = 0.0;
      for (std::size_t i = 0; i < nz; ++i) val += dir[i] * res.z[i];
      trace->stage_values.push_back(val);
    }

    if (static_cast<double>(eng.barrier_multiplicity()) / tau <= gap) {
      res.converged = true;
      res.iterations = *used;
      return res;
    }
    tau *= mu;
  }
}

struct MarginRun {
  Vec x;
  double margin = -std::numeric_limits<double>::infinity();
  bool converged = false;
};

// One complete margin maximization from x0 (jittered on restarts).
inline MarginRun run_margin(const Prepared& pp, Vec x0, double gap, std::size_t budget,
                            std::size_t* used, SolveTrace* trace) {
  BarrierEngine eng(pp, true);
  const std::size_t nz = eng.size();

  double m0 = exact_margin(pp, x0);
  Vec z0 = x0;
  z0.push_back(m0 - (1.0 + 0.1 * std::abs(m0)));

  Vec dir(nz, 0.0);
  dir[nz - 1] = 1.0;

  PathResult pr = follow_path(eng, std::move(z0), dir, gap, budget, used, trace);

  MarginRun out;
  out.x.assign(pr.z.begin(), pr.z.end() - 1);
  out.margin = exact_margin(pp, out.x);
  out.converged = pr.converged;
  return out;
}

inline Vec jittered_start(std::size_t n, double bound, std::uint64_t seed, std::size_t attempt) {
  Vec x(n, 0.0);
  if (attempt == 0) return x;
  std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ULL * attempt);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double scale = std::min(std::pow(10.0, static_cast<double>(attempt) - 1.0), 0.01 * bound);
  for (double& v : x) v = scale * u(rng);
  return x;
}

}  // namespace detail

// Margin maximization with classification. Requires a pure feasibility
// problem (no objective).
inline SdpVerdict solve_feasibility(const LmiProblem& p, const SolverConfig& cfg = {},
                                    SolveTrace* trace = nullptr) {
  require(!p.objective.has_value(), "feasibility solve expects no objective");
  detail::Prepared pp = detail::prepare(p, cfg.variable_bound);

  const double tol = cfg.margin_tolerance;
  require(tol > 0.0, "margin tolerance must be positive");

  std::size_t used = 0;
  detail::MarginRun best;

  const std::size_t attempts = std::max<std::size_t>(1, cfg.restarts);
  for (std::size_t a = 0; a < attempts && used < cfg.max_iterations; ++a) {
    Vec x0 = detail::jittered_start(pp.nvars, pp.bound, cfg.seed, a);
    auto run = detail::run_margin(pp, std::move(x0), 1e-9, cfg.max_iterations, &used, trace);
    if (run.margin > best.margin) best = run;
    if (run.margin >= tol) break;  // the point itself certifies feasibility
    if (run.converged) break;      // path optimum reached; restarts cannot improve it
    log::debug("feasibility restart " + std::to_string(a + 1) + ", margin " +
               std::to_string(run.margin));
  }

  SdpVerdict v;
  v.point = best.x;
  v.margin = best.margin;
  v.iterations = used;
  if (best.margin >= tol)
    v.status = SdpStatus::feasible;
  else if (best.margin <= -tol)
    v.status = SdpStatus::infeasible;
  else
    v.status = SdpStatus::inconclusive;
  return v;
}

// Maximize the problem's linear objective over the LMI set. Phase 1 finds an
// interior point via the margin problem; phase 2 follows the central path of
// the objective. stage objective values (recorded in the trace) are
// nondecreasing along the path.
inline SdpVerdict maximize_linear(const LmiProblem& p, const SolverConfig& cfg = {},
                                  SolveTrace* trace = nullptr) {
  require(p.objective.has_value(), "maximize_linear requires an objective");
  detail::Prepared pp = detail::prepare(p, cfg.variable_bound);

  SdpVerdict phase1;
  {
    LmiProblem feas = p;
    feas.objective.reset();
    phase1 = solve_feasibility(feas, cfg, nullptr);
  }
  if (phase1.status != SdpStatus::feasible) {
    phase1.objective = std::numeric_limits<double>::quiet_NaN();
    if (phase1.status == SdpStatus::inconclusive && phase1.margin > 0.0) {
      // Interior but thinner than the tolerance: still usable as a start.
    } else {
      return phase1;
    }
  }

  detail::BarrierEngine eng(pp, false);
  std::size_t used = phase1.iterations;
  auto pr = detail::follow_path(eng, phase1.point, *p.objective, 1e-8, cfg.max_iterations,
                                &used, trace);

  SdpVerdict v;
  v.point = pr.z;
  v.margin = detail::exact_margin(pp, v.point);
  v.iterations = used;
  v.objective = dot(*p.objective, v.point);
  v.status = v.margin > 0.0 ? SdpStatus::feasible : SdpStatus::inconclusive;
  if (!pr.converged)
    log::debug("objective path ended before reaching the gap target");
  return v;
}

}  // namespace ncs
