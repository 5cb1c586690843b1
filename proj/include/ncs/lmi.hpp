#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ncs/matrix.hpp"

// Structured LMI problems: a flat scalar variable vector produced by packing
// named matrix variables, plus affine matrix-valued constraints
//
//     C + sum_i x_i * B_i   (psd: >= 0,  nd: <= 0 strictly)
//
// Scalar packing per block kind:
//   diagonal_positive  n scalars, the diagonal entries (each constrained > 0)
//   symmetric_free     n(n+1)/2 scalars, upper triangle row-major
//   full_free          n^2 scalars, row-major

namespace ncs {

enum class BlockKind { diagonal_positive, symmetric_free, full_free };

inline std::size_t scalar_count(BlockKind kind, std::size_t dim) {
  switch (kind) {
    case BlockKind::diagonal_positive: return dim;
    case BlockKind::symmetric_free: return dim * (dim + 1) / 2;
    case BlockKind::full_free: return dim * dim;
  }
  return 0;
}

struct VarBlock {
  std::string name;
  BlockKind kind;
  std::size_t dim;
};

class VariableLayout {
 public:
  void add(std::string name, BlockKind kind, std::size_t dim) {
    require(dim >= 1, "variable block dimension must be >= 1");
    for (const auto& b : blocks_)
      require(b.name != name, "duplicate variable block name: " + name);
    offsets_.push_back(total_);
    total_ += scalar_count(kind, dim);
    blocks_.push_back({std::move(name), kind, dim});
  }

  std::size_t total_scalars() const { return total_; }
  const std::vector<VarBlock>& blocks() const { return blocks_; }

  std::size_t offset_of(const std::string& name) const {
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      if (blocks_[i].name == name) return offsets_[i];
    throw InputError("unknown variable block: " + name);
  }

  const VarBlock& block(const std::string& name) const {
    for (const auto& b : blocks_)
      if (b.name == name) return b;
    throw InputError("unknown variable block: " + name);
  }

  // Scalar index of entry (i,j) of the named block, honoring its packing.
  std::size_t index_of(const std::string& name, std::size_t i, std::size_t j) const {
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      const auto& b = blocks_[k];
      if (b.name != name) continue;
      require(i < b.dim && j < b.dim, "entry out of range for block " + name);
      switch (b.kind) {
        case BlockKind::diagonal_positive:
          require(i == j, "diagonal block has no off-diagonal entries: " + name);
          return offsets_[k] + i;
        case BlockKind::symmetric_free: {
          std::size_t r = std::min(i, j), c = std::max(i, j);
          return offsets_[k] + r * b.dim - r * (r - 1) / 2 + (c - r);
        }
        case BlockKind::full_free:
          return offsets_[k] + i * b.dim + j;
      }
    }
    throw InputError("unknown variable block: " + name);
  }

  // Indices of scalars carrying a positivity floor (diagonal_positive blocks).
  std::vector<std::size_t> positive_scalars() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < blocks_.size(); ++k)
      if (blocks_[k].kind == BlockKind::diagonal_positive)
        for (std::size_t i = 0; i < blocks_[k].dim; ++i) out.push_back(offsets_[k] + i);
    return out;
  }

  // Unpack the named block from a flat point into a dense matrix.
  Mat unpack(const std::string& name, const Vec& point) const {
    require(point.size() == total_, "point length does not match layout");
    const VarBlock& b = block(name);
    Mat m(b.dim, b.dim, 0.0);
    for (std::size_t i = 0; i < b.dim; ++i)
      for (std::size_t j = 0; j < b.dim; ++j) {
        if (b.kind == BlockKind::diagonal_positive && i != j) continue;
        m(i, j) = point[index_of(name, i, j)];
      }
    return m;
  }

 private:
  std::vector<VarBlock> blocks_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

enum class BlockSign { psd, nd };

struct AffineTerm {
  std::size_t scalar_index;
  SymMat basis;
};

struct AffineBlock {
  std::string name;
  BlockSign sign;
  SymMat constant;
  std::vector<AffineTerm> terms;

  std::size_t dim() const { return constant.dim(); }
};

struct LmiProblem {
  VariableLayout layout;
  std::vector<AffineBlock> constraints;
  // Linear objective c over the flat scalars; maximize c'x when present.
  std::optional<Vec> objective;
};

inline SymMat evaluate_block(const AffineBlock& block, const Vec& point) {
  Mat acc = block.constant.mat();
  for (const auto& term : block.terms) {
    require(term.scalar_index < point.size(), "term index beyond point length");
    const double x = point[term.scalar_index];
    if (x == 0.0) continue;
    const Mat& b = term.basis.mat();
    for (std::size_t i = 0; i < acc.rows(); ++i)
      for (std::size_t j = 0; j < acc.cols(); ++j) acc(i, j) += x * b(i, j);
  }
  return SymMat(std::move(acc));
}

inline SymMat evaluate_block(const LmiProblem& p, std::size_t block_index, const Vec& point) {
  require(block_index < p.constraints.size(), "constraint index out of range");
  require(point.size() == p.layout.total_scalars(), "point length does not match layout");
  return evaluate_block(p.constraints[block_index], point);
}

// Structural diagnostics; empty vector means the problem is well formed.
inline std::vector<std::string> validate(const LmiProblem& p) {
  std::vector<std::string> out;
  const std::size_t n = p.layout.total_scalars();
  if (n == 0) out.push_back("layout has no variables");
  if (p.constraints.empty()) out.push_back("problem has no constraints");
  for (std::size_t c = 0; c < p.constraints.size(); ++c) {
    const auto& blk = p.constraints[c];
    std::ostringstream tag;
    tag << "constraint " << c << " (" << blk.name << ")";
    if (blk.dim() == 0) out.push_back(tag.str() + ": empty constant");
    if (!blk.constant.mat().all_finite()) out.push_back(tag.str() + ": non-finite constant");
    for (const auto& t : blk.terms) {
      if (t.scalar_index >= n) {
        out.push_back(tag.str() + ": term index beyond layout");
        continue;
      }
      if (t.basis.dim() != blk.dim()) out.push_back(tag.str() + ": basis dimension mismatch");
      if (!t.basis.mat().all_finite()) out.push_back(tag.str() + ": non-finite basis");
    }
  }
  if (p.objective && p.objective->size() != n)
    out.push_back("objective length does not match layout");
  return out;
}

// Helper used by problem builders: accumulate a dense (not yet symmetric)
// matrix per scalar index plus a constant part, then materialize symmetric
// bases. Assemblers are expected to write symmetric content (mirrored entries
// for off-diagonal placements); SymMat construction enforces it.
class BlockAssembler {
 public:
  BlockAssembler(std::string name, BlockSign sign, std::size_t dim)
      : name_(std::move(name)), sign_(sign), dim_(dim), constant_(dim, dim, 0.0) {}

  void constant_add(std::size_t i, std::size_t j, double v) {
    constant_(i, j) += v;
    if (i != j) constant_(j, i) += v;
  }

  // Adds v at (i,j) and mirrors to (j,i) so the basis stays symmetric.
  void term_add(std::size_t scalar, std::size_t i, std::size_t j, double v) {
    Mat& m = slot(scalar);
    m(i, j) += v;
    if (i != j) m(j, i) += v;
  }

  // Adds v at (i,j) only; caller is responsible for overall symmetry.
  void term_add_raw(std::size_t scalar, std::size_t i, std::size_t j, double v) {
    slot(scalar)(i, j) += v;
  }

  AffineBlock build() const {
    AffineBlock blk;
    blk.name = name_;
    blk.sign = sign_;
    blk.constant = SymMat(constant_);
    for (const auto& [idx, m] : terms_)
      if (m.max_abs() > 0.0) blk.terms.push_back({idx, SymMat(m)});
    return blk;
  }

 private:
  Mat& slot(std::size_t scalar) {
    auto it = terms_.find(scalar);
    if (it == terms_.end()) it = terms_.emplace(scalar, Mat(dim_, dim_, 0.0)).first;
    return it->second;
  }

  std::string name_;
  BlockSign sign_;
  std::size_t dim_;
  Mat constant_;
  std::map<std::size_t, Mat> terms_;
};

// SDPA sparse export. The file encodes
//     min c'x  s.t.  X = sum_i x_i F_i - F_0 >= 0  (block diagonal)
// psd blocks map directly (F_0 = -C, F_i = B_i); strict nd blocks are negated
// and shifted (F_0 = C + shift*I, F_i = -B_i); positivity floors on
// diagonal_positive scalars become one trailing diagonal block. A maximize
// objective is emitted negated to fit the min convention.
inline std::string export_sdpa(const LmiProblem& p, double strictness_shift = 1e-6) {
  {
    auto diag = validate(p);
    if (!diag.empty()) throw InputError("cannot export invalid problem: " + diag.front());
  }
  require(strictness_shift >= 0.0, "strictness shift must be nonnegative");

  const std::size_t m = p.layout.total_scalars();
  const auto floors = p.layout.positive_scalars();
  const std::size_t nblocks = p.constraints.size() + (floors.empty() ? 0 : 1);

  std::ostringstream os;
  os.setf(std::ios::fmtflags(0), std::ios::floatfield);
  os << std::setprecision(17);

  os << "* strict blocks negated and shifted by " << strictness_shift
     << "; objective emitted for the min convention (negated from maximize)\n";
  os << m << "\n";
  os << nblocks << "\n";
  for (std::size_t c = 0; c < p.constraints.size(); ++c)
    os << (c ? " " : "") << p.constraints[c].dim();
  if (!floors.empty()) os << (p.constraints.empty() ? "" : " ") << "-" << floors.size();
  os << "\n";

  for (std::size_t i = 0; i < m; ++i) {
    double ci = p.objective ? -(*p.objective)[i] : 0.0;
    os << (i ? " " : "") << ci;
  }
  os << "\n";

  auto emit = [&os](std::size_t matno, std::size_t blkno, std::size_t i, std::size_t j,
                    double v) {
    if (v == 0.0) return;
    os << matno << " " << blkno << " " << i + 1 << " " << j + 1 << " " << v << "\n";
  };

  // F_0 for every block.
  for (std::size_t c = 0; c < p.constraints.size(); ++c) {
    const auto& blk = p.constraints[c];
    const Mat& cm = blk.constant.mat();
    for (std::size_t i = 0; i < blk.dim(); ++i)
      for (std::size_t j = i; j < blk.dim(); ++j) {
        double v = blk.sign == BlockSign::psd ? -cm(i, j) : cm(i, j);
        if (blk.sign == BlockSign::nd && i == j) v += strictness_shift;
        emit(0, c + 1, i, j, v);
      }
  }

  // F_s, one matrix per scalar variable.
  for (std::size_t s = 0; s < m; ++s) {
    for (std::size_t c = 0; c < p.constraints.size(); ++c) {
      const auto& blk = p.constraints[c];
      for (const auto& t : blk.terms) {
        if (t.scalar_index != s) continue;
        const Mat& bm = t.basis.mat();
        for (std::size_t i = 0; i < blk.dim(); ++i)
          for (std::size_t j = i; j < blk.dim(); ++j)
            emit(s + 1, c + 1, i, j, blk.sign == BlockSign::psd ? bm(i, j) : -bm(i, j));
      }
    }
    for (std::size_t f = 0; f < floors.size(); ++f)
      if (floors[f] == s) emit(s + 1, nblocks, f, f, 1.0);
  }

  return os.str();
}

}  // namespace ncs
