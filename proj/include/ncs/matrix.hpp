#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <initializer_list>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ncs/error.hpp"

// Dense matrix kernel sized for the problems in this toolkit (dimensions stay
// below ~40 for LMI blocks, eigenproblems stay at or below 12x12). Everything
// is plain row-major storage; no expression templates, no allocator games.

namespace ncs {

using Vec = std::vector<double>;

class Mat {
 public:
  Mat() = default;

  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    require(rows >= 1 && cols >= 1, "matrix dimensions must be at least 1x1");
  }

  Mat(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    require(rows_ >= 1, "matrix needs at least one row");
    cols_ = rows.begin()->size();
    require(cols_ >= 1, "matrix needs at least one column");
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      require(r.size() == cols_, "ragged initializer for matrix");
      for (double v : r) data_.push_back(v);
    }
  }

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
  }

  Mat& operator+=(const Mat& o) {
    require(rows_ == o.rows_ && cols_ == o.cols_, "matrix size mismatch in +=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }

  Mat& operator-=(const Mat& o) {
    require(rows_ == o.rows_ && cols_ == o.cols_, "matrix size mismatch in -=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }

  Mat& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Mat operator+(Mat a, const Mat& b) { return a += b; }
inline Mat operator-(Mat a, const Mat& b) { return a -= b; }
inline Mat operator*(Mat a, double s) { return a *= s; }
inline Mat operator*(double s, Mat a) { return a *= s; }

inline Mat operator*(const Mat& a, const Mat& b) {
  require(a.cols() == b.rows(), "matrix size mismatch in multiply");
  Mat c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline Mat transpose(const Mat& a) {
  Mat t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline Vec mat_vec(const Mat& a, const Vec& x) {
  require(a.cols() == x.size(), "matrix/vector size mismatch");
  Vec y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) y[i] += a(i, j) * x[j];
  return y;
}

inline double dot(const Vec& a, const Vec& b) {
  require(a.size() == b.size(), "vector size mismatch in dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

// Entrywise absolute value; the comparison-system construction leans on this.
inline Mat elementwise_abs(const Mat& a) {
  Mat r = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) r(i, j) = std::abs(a(i, j));
  return r;
}

inline Vec elementwise_abs(const Vec& a) {
  Vec r = a;
  for (double& v : r) v = std::abs(v);
  return r;
}

// Symmetric matrix. Construction rejects inputs whose asymmetry exceeds a
// relative 1e-12 tolerance, then stores the exact symmetrization (S+S^T)/2 so
// downstream eigenvalue code never sees representation drift.
class SymMat {
 public:
  SymMat() = default;

  explicit SymMat(Mat m) {
    require(m.rows() == m.cols(), "symmetric matrix must be square");
    double scale = 1.0 + m.max_abs();
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = i + 1; j < m.cols(); ++j) {
        if (std::abs(m(i, j) - m(j, i)) > 1e-12 * scale)
          throw InputError("matrix is not symmetric within tolerance");
        double v = 0.5 * (m(i, j) + m(j, i));
        m(i, j) = v;
        m(j, i) = v;
      }
    m_ = std::move(m);
  }

  static SymMat identity(std::size_t n) { return SymMat(Mat::identity(n)); }

  static SymMat zero(std::size_t n) { return SymMat(Mat(n, n, 0.0)); }

  std::size_t dim() const { return m_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  const Mat& mat() const { return m_; }

 private:
  Mat m_;
};

struct EigenSym {
  Vec values;   // ascending
  Mat vectors;  // column k pairs with values[k]
};

// Cyclic Jacobi. Dimensions here never exceed ~40, so the O(n^3) sweeps with
// full vector accumulation are more than fast enough and give eigenvalues
// accurate to machine precision relative to the spectral radius.
inline EigenSym eigen_sym(const SymMat& s) {
  const std::size_t n = s.dim();
  Mat a = s.mat();
  Mat v = Mat::identity(n);

  auto off_norm = [&]() {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) sum += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(sum);
  };

  const double scale = std::max(1.0, a.max_abs());
  const double tol = 1e-13 * scale;

  for (int sweep = 0; sweep < 64 && off_norm() > tol; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double sn = t * c;

        for (std::size_t k = 0; k < n; ++k) {
          double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });

  EigenSym out;
  out.values.resize(n);
  out.vectors = Mat(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

inline double min_eigenvalue(const SymMat& s) { return eigen_sym(s).values.front(); }
inline double max_eigenvalue(const SymMat& s) { return eigen_sym(s).values.back(); }

enum class Definiteness { positive, negative };

// margin >= 0 shifts the test: positive means eigenvalues >= margin,
// negative means eigenvalues <= -margin.
inline bool is_definite(const SymMat& s, Definiteness sign, double margin = 0.0) {
  require(margin >= 0.0, "definiteness margin must be nonnegative");
  if (sign == Definiteness::positive) return min_eigenvalue(s) >= margin;
  return max_eigenvalue(s) <= -margin;
}

// In-place lower Cholesky; returns false if a pivot drops below eps.
inline bool cholesky_in_place(Mat& a, double eps = 0.0) {
  const std::size_t n = a.rows();
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > eps)) return false;
    double rjj = std::sqrt(d);
    a(j, j) = rjj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / rjj;
    }
    for (std::size_t i = 0; i < j; ++i) a(i, j) = 0.0;
  }
  return true;
}

// Solve L L^T x = b given the lower factor from cholesky_in_place.
inline Vec cholesky_solve(const Mat& l, Vec b) {
  const std::size_t n = l.rows();
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * b[k];
    b[i] = s / l(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * b[k];
    b[ii] = s / l(ii, ii);
  }
  return b;
}

// Gaussian elimination with partial pivoting; throws on (near-)singular input.
inline Vec solve_linear(Mat a, Vec b) {
  require(a.rows() == a.cols() && a.rows() == b.size(), "solve_linear shape mismatch");
  const std::size_t n = a.rows();
  std::vector<std::size_t> piv(n);
  for (std::size_t i = 0; i < n; ++i) piv[i] = i;

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t best = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(best, col))) best = r;
    if (std::abs(a(best, col)) < 1e-300) throw std::runtime_error("singular linear system");
    if (best != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(best, j));
      std::swap(b[col], b[best]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      double f = a(r, col) / a(col, col);
      if (f == 0.0) continue;
      a(r, col) = 0.0;
      for (std::size_t j = col + 1; j < n; ++j) a(r, j) -= f * a(col, j);
      b[r] -= f * b[col];
    }
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= a(ii, j) * b[j];
    b[ii] = s / a(ii, ii);
  }
  return b;
}

// Plain-text matrix files: "rows cols" on the first line, then one row per
// line. Used for the shipped bound fixtures.
inline Mat load_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open matrix file: " + path);
  std::size_t r = 0, c = 0;
  in >> r >> c;
  if (!in || r < 1 || c < 1) throw InputError("malformed matrix header in " + path);
  Mat m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      in >> m(i, j);
      if (!in) throw InputError("malformed matrix body in " + path);
    }
  return m;
}

inline void save_matrix_file(const std::string& path, const Mat& m) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write matrix file: " + path);
  out << m.rows() << " " << m.cols() << "\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
    out << "\n";
  }
}

}  // namespace ncs
