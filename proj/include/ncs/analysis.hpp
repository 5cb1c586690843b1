#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ncs/lmi.hpp"
#include "ncs/log.hpp"
#include "ncs/sdp.hpp"

// Delay-robust stability certification for comparison systems of the form
//
//   |f(x, x_d1, .., x_dq)| <= F*|x|  plus per-channel increment bounds
//   |G_k - G_{k+1}| <= M_k |x - x_dk|,  delays d_k(t) <= r_k,
//
// with S, W bounding the Lyapunov data of the delay-free core. Certification
// solves one LMI family parameterized by the delay caps r_k: a feasible point
// in variables (R_k, Y1, Y2, X11_k, X12_k, X22_k) proves asymptotic stability
// for every admissible delay realization.

namespace ncs {

struct SystemBounds {
  std::size_t n = 0;  // state dimension
  std::size_t q = 0;  // delay channels
  Mat F;              // n x n, entrywise bound on the full vector field
  Mat W;              // n x n, entrywise bound on the Lyapunov gradient factor
  SymMat S;           // n x n, positive definite decay bound
  std::vector<Mat> M;  // q entries, n x n increment bounds per channel
  std::vector<double> r;  // q entries, per-channel delay caps (> 0)
};

inline void validate_bounds(const SystemBounds& b) {
  require(b.n >= 1, "state dimension must be >= 1");
  require(b.q >= 1, "at least one delay channel required");
  auto check_mat = [&](const Mat& m, const std::string& name) {
    require(m.rows() == b.n && m.cols() == b.n, name + " must be n x n");
    require(m.all_finite(), name + " has non-finite entries");
    for (std::size_t i = 0; i < b.n; ++i)
      for (std::size_t j = 0; j < b.n; ++j)
        require(m(i, j) >= 0.0, name + " must be entrywise nonnegative");
  };
  check_mat(b.F, "F");
  check_mat(b.W, "W");
  check_mat(b.S.mat(), "S");
  require(min_eigenvalue(b.S) > 0.0, "S must be positive definite");
  require(b.M.size() == b.q, "M must have one matrix per channel");
  for (std::size_t k = 0; k < b.q; ++k) check_mat(b.M[k], "M[" + std::to_string(k) + "]");
  require(b.r.size() == b.q, "r must have one cap per channel");
  for (double rk : b.r) require(rk > 0.0, "delay caps must be positive");
}

// The coupling row of the k-th channel block pairs the increment bound with
// either W' (default) or W itself; both appear in the literature depending on
// whether the gradient factor is taken transposed. The default matches the
// convention used by the shipped fixtures.
enum class CouplingVariant { w_transpose, w_plain };

struct AnalysisOptionsLmi {
  CouplingVariant coupling = CouplingVariant::w_transpose;
};

// Build the certification LMI. Variable order: R_1..R_q, Y1, Y2 (diagonal
// positive, n scalars each), then per channel X11_k (symmetric), X12_k
// (full), X22_k (symmetric). Constraints: q coupling blocks of size 3n (psd)
// followed by one decay block of size 2n (strictly negative definite).
inline LmiProblem build_certification_lmi(const SystemBounds& b,
                                          AnalysisOptionsLmi opts = {}) {
  validate_bounds(b);
  const std::size_t n = b.n, q = b.q;

  LmiProblem prob;
  for (std::size_t k = 0; k < q; ++k)
    prob.layout.add("R" + std::to_string(k + 1), BlockKind::diagonal_positive, n);
  prob.layout.add("Y1", BlockKind::diagonal_positive, n);
  prob.layout.add("Y2", BlockKind::diagonal_positive, n);
  for (std::size_t k = 0; k < q; ++k) {
    const std::string suff = "_" + std::to_string(k + 1);
    prob.layout.add("X11" + suff, BlockKind::symmetric_free, n);
    prob.layout.add("X12" + suff, BlockKind::full_free, n);
    prob.layout.add("X22" + suff, BlockKind::symmetric_free, n);
  }
  const auto& L = prob.layout;

  const Mat wc = opts.coupling == CouplingVariant::w_transpose ? transpose(b.W) : b.W;

  // Per-channel coupling blocks:
  //   [ X11_k      X12_k      -(Wc + Y1) M_k ]
  //   [   .        X22_k        -Y2 M_k      ]
  //   [   .          .            R_k        ]  >= 0
  for (std::size_t k = 0; k < q; ++k) {
    const std::string suff = "_" + std::to_string(k + 1);
    BlockAssembler asmb("coupling" + suff, BlockSign::psd, 3 * n);
    const Mat wm = wc * b.M[k];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (wm(i, j) != 0.0) asmb.constant_add(i, 2 * n + j, -wm(i, j));
        // -(Y1 M_k)_{ij} depends on Y1_i, -(Y2 M_k)_{ij} on Y2_i.
        if (b.M[k](i, j) != 0.0) {
          asmb.term_add(L.index_of("Y1", i, i), i, 2 * n + j, -b.M[k](i, j));
          asmb.term_add(L.index_of("Y2", i, i), n + i, 2 * n + j, -b.M[k](i, j));
        }
      }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        asmb.term_add(L.index_of("X11" + suff, i, j), i, j, 1.0);
        asmb.term_add(L.index_of("X22" + suff, i, j), n + i, n + j, 1.0);
      }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        asmb.term_add(L.index_of("X12" + suff, i, j), i, n + j, 1.0);
    for (std::size_t i = 0; i < n; ++i)
      asmb.term_add(L.index_of("R" + std::to_string(k + 1), i, i), 2 * n + i, 2 * n + i, 1.0);
    prob.constraints.push_back(asmb.build());
  }

  // Decay block (strict):
  //   [ -S + Y1 F + F' Y1 + sum_k r_k X11_k    F' Y2 + Y1 + sum_k r_k X12_k ]
  //   [              .                        -2 Y2 + sum_k r_k (X22_k+R_k) ]  < 0
  {
    BlockAssembler asmb("decay", BlockSign::nd, 2 * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) asmb.constant_add(i, j, -b.S(i, j));

    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t y1 = L.index_of("Y1", i, i);
      const std::size_t y2 = L.index_of("Y2", i, i);
      // (Y1 F + F' Y1): row i and mirrored column i carry F(i,:).
      for (std::size_t j = 0; j < n; ++j)
        if (b.F(i, j) != 0.0) {
          asmb.term_add_raw(y1, i, j, b.F(i, j));
          asmb.term_add_raw(y1, j, i, b.F(i, j));
        }
      // Off-diagonal coupling: Y1 appears directly, F' Y2 column-scaled.
      asmb.term_add(y1, i, n + i, 1.0);
      for (std::size_t l = 0; l < n; ++l)
        if (b.F(i, l) != 0.0) asmb.term_add(y2, l, n + i, b.F(i, l));
      asmb.term_add(y2, n + i, n + i, -2.0);
    }

    for (std::size_t k = 0; k < q; ++k) {
      const std::string suff = "_" + std::to_string(k + 1);
      const double rk = b.r[k];
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
          asmb.term_add(L.index_of("X11" + suff, i, j), i, j, rk);
          asmb.term_add(L.index_of("X22" + suff, i, j), n + i, n + j, rk);
        }
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          asmb.term_add(L.index_of("X12" + suff, i, j), i, n + j, rk);
      for (std::size_t i = 0; i < n; ++i)
        asmb.term_add(L.index_of("R" + std::to_string(k + 1), i, i), n + i, n + i, rk);
    }
    prob.constraints.push_back(asmb.build());
  }

  return prob;
}

// Solve the certification LMI for fixed delay caps.
inline SdpVerdict check_stability(const SystemBounds& b, const SolverConfig& cfg = {},
                                  AnalysisOptionsLmi opts = {}) {
  LmiProblem prob = build_certification_lmi(b, opts);
  return solve_feasibility(prob, cfg);
}

struct ProbeRecord {
  double T;
  SdpStatus status;
  double margin;
};

struct BoundSearchResult {
  double t_star = 0.0;
  double tolerance = 0.0;
  std::vector<ProbeRecord> probes;
};

// Bisect the largest delay parameter T whose induced bounds certify stable.
// `bounds_of` maps T to the full bound set (caps r_k included). Inconclusive
// verdicts count as failures, so t_star errs on the safe side.
inline BoundSearchResult max_delay_bound(const std::function<SystemBounds(double)>& bounds_of,
                                         double t_lo, double t_hi, double tol,
                                         const SolverConfig& cfg = {},
                                         AnalysisOptionsLmi opts = {}) {
  require(tol > 0.0, "bisection tolerance must be positive");
  require(t_lo > 0.0 && t_hi > t_lo, "need 0 < t_lo < t_hi");

  BoundSearchResult res;
  res.tolerance = tol;

  auto probe = [&](double T) {
    SdpVerdict v = check_stability(bounds_of(T), cfg, opts);
    res.probes.push_back({T, v.status, v.margin});
    log::info("probe T=" + std::to_string(T) + " -> " + to_string(v.status) +
              " (margin " + std::to_string(v.margin) + ")");
    return v.status == SdpStatus::feasible;
  };

  if (!probe(t_lo)) throw InputError("system not certifiable even at the lower bound");
  if (t_hi - t_lo <= tol) {
    res.t_star = t_lo;
    return res;
  }
  if (probe(t_hi))
    throw InputError("already certifiable at the upper bound; widen the bracket");

  double lo = t_lo, hi = t_hi;
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    if (probe(mid))
      lo = mid;
    else
      hi = mid;
  }
  res.t_star = lo;
  return res;
}

// ---------------------------------------------------------------------------
// Lyapunov synthesis for the delay-free core.

// Solve A'P + P A = -rhs for symmetric P via the vectorized linear system.
inline SymMat solve_lyapunov(const Mat& a, const SymMat& rhs) {
  require(a.rows() == a.cols(), "solve_lyapunov needs a square matrix");
  require(rhs.dim() == a.rows(), "rhs dimension mismatch");
  const std::size_t n = a.rows();
  Mat sys(n * n, n * n, 0.0);
  Vec b(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t row = i * n + j;
      b[row] = -rhs(i, j);
      // (A'P)_{ij} = sum_k A(k,i) P(k,j); (PA)_{ij} = sum_l P(i,l) A(l,j).
      for (std::size_t k = 0; k < n; ++k) sys(row, k * n + j) += a(k, i);
      for (std::size_t l = 0; l < n; ++l) sys(row, i * n + l) += a(l, j);
    }
  Vec p = solve_linear(std::move(sys), std::move(b));
  Mat pm(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) pm(i, j) = p[i * n + j];
  // The unique solution of a Lyapunov equation with symmetric rhs is
  // symmetric up to roundoff.
  return SymMat((pm + transpose(pm)) * 0.5);
}

inline bool is_hurwitz(const Mat& a) {
  require(a.rows() == a.cols(), "is_hurwitz needs a square matrix");
  try {
    SymMat p = solve_lyapunov(a, SymMat::identity(a.rows()));
    return min_eigenvalue(p) > 0.0;
  } catch (const std::runtime_error&) {
    return false;  // singular Lyapunov operator: eigenvalues on the axis
  }
}

struct LyapunovCertificate {
  Mat A;
  SymMat P;  // normalized so that P <= I
  SymMat Q;  // entrywise nonpositive off the diagonal
  double alpha = 0.0;

  Mat bound_F() const { return elementwise_abs(A); }
  Mat bound_W() const { return elementwise_abs(P.mat()); }
  const SymMat& bound_S() const { return Q; }
};

// Maximize alpha subject to
//   P - 1e-6 I >= 0,  I - P >= 0,  -A'P - P A - Q >= 0,  Q - alpha I >= 0,
//   Q_ij <= 0 for i < j.
// The off-diagonal sign constraint keeps Q usable as a comparison-system
// decay bound; A must be Hurwitz or the problem is rejected up front.
inline LyapunovCertificate synthesize_lyapunov(const Mat& a, const SolverConfig& cfg = {}) {
  require(a.rows() == a.cols() && a.rows() >= 1, "synthesize_lyapunov needs a square matrix");
  require(a.all_finite(), "matrix has non-finite entries");
  if (!is_hurwitz(a)) throw InputError("matrix is not Hurwitz; no Lyapunov certificate exists");

  const std::size_t n = a.rows();
  LmiProblem prob;
  prob.layout.add("P", BlockKind::symmetric_free, n);
  prob.layout.add("Q", BlockKind::symmetric_free, n);
  prob.layout.add("alpha", BlockKind::diagonal_positive, 1);
  const auto& L = prob.layout;

  auto sym_elem = [&](std::size_t i, std::size_t j) {
    Mat e(n, n, 0.0);
    e(i, j) = 1.0;
    e(j, i) = 1.0;
    return e;
  };

  BlockAssembler floor_blk("p_floor", BlockSign::psd, n);
  BlockAssembler cap_blk("p_cap", BlockSign::psd, n);
  BlockAssembler decay_blk("decay", BlockSign::psd, n);
  BlockAssembler gap_blk("q_gap", BlockSign::psd, n);
  for (std::size_t i = 0; i < n; ++i) {
    floor_blk.constant_add(i, i, -1e-6);
    cap_blk.constant_add(i, i, 1.0);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const std::size_t pij = L.index_of("P", i, j);
      const std::size_t qij = L.index_of("Q", i, j);
      floor_blk.term_add(pij, i, j, 1.0);
      cap_blk.term_add(pij, i, j, -1.0);
      const Mat e = sym_elem(i, j);
      const Mat d = transpose(a) * e + e * a;
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = r; c < n; ++c)
          if (d(r, c) != 0.0) decay_blk.term_add(pij, r, c, -d(r, c));
      decay_blk.term_add(qij, i, j, -1.0);
      gap_blk.term_add(qij, i, j, 1.0);
    }
  for (std::size_t i = 0; i < n; ++i) gap_blk.term_add(L.index_of("alpha", 0, 0), i, i, -1.0);

  prob.constraints.push_back(floor_blk.build());
  prob.constraints.push_back(cap_blk.build());
  prob.constraints.push_back(decay_blk.build());
  prob.constraints.push_back(gap_blk.build());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      BlockAssembler off("q_offdiag", BlockSign::psd, 1);
      off.term_add(L.index_of("Q", i, j), 0, 0, -1.0);
      prob.constraints.push_back(off.build());
    }

  Vec c(L.total_scalars(), 0.0);
  c[L.index_of("alpha", 0, 0)] = 1.0;
  prob.objective = c;

  SdpVerdict v = maximize_linear(prob, cfg);
  if (v.status != SdpStatus::feasible)
    throw std::runtime_error("Lyapunov synthesis failed to find an interior certificate");

  LyapunovCertificate cert;
  cert.A = a;
  cert.P = SymMat(L.unpack("P", v.point));
  cert.Q = SymMat(L.unpack("Q", v.point));
  cert.alpha = v.point[L.index_of("alpha", 0, 0)];
  return cert;
}

}  // namespace ncs
