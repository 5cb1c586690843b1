#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "ncs/lmi.hpp"
#include "sdpa_reader.hpp"

using namespace ncs;
using sdpa_reader::SdpaFile;
using sdpa_reader::materialize;
using sdpa_reader::parse_sdpa;

namespace {

LmiProblem sample_problem() {
  LmiProblem p;
  p.layout.add("d", BlockKind::diagonal_positive, 2);
  p.layout.add("s", BlockKind::symmetric_free, 2);
  p.layout.add("g", BlockKind::full_free, 2);

  BlockAssembler a("psd_block", BlockSign::psd, 3);
  a.constant_add(0, 0, 1.0);
  a.constant_add(0, 2, -0.5);
  a.term_add(p.layout.index_of("d", 0, 0), 0, 0, 1.0);
  a.term_add(p.layout.index_of("d", 1, 1), 1, 1, 1.0);
  a.term_add(p.layout.index_of("s", 0, 1), 0, 1, 2.0);
  a.term_add(p.layout.index_of("g", 1, 0), 1, 2, -1.5);
  a.term_add(p.layout.index_of("g", 0, 0), 2, 2, 0.25);
  p.constraints.push_back(a.build());

  BlockAssembler b("nd_block", BlockSign::nd, 2);
  b.constant_add(0, 0, -2.0);
  b.constant_add(1, 1, -2.0);
  b.term_add(p.layout.index_of("s", 0, 0), 0, 0, 1.0);
  b.term_add(p.layout.index_of("s", 1, 1), 1, 1, 1.0);
  b.term_add(p.layout.index_of("d", 0, 0), 0, 1, 0.5);
  p.constraints.push_back(b.build());

  Vec c(p.layout.total_scalars(), 0.0);
  c[p.layout.index_of("d", 0, 0)] = 1.0;
  c[p.layout.index_of("s", 0, 1)] = -2.0;
  p.objective = c;
  return p;
}

}  // namespace

TEST_CASE("scalar packing per block kind") {
  VariableLayout layout;
  layout.add("d", BlockKind::diagonal_positive, 3);
  layout.add("s", BlockKind::symmetric_free, 3);
  layout.add("g", BlockKind::full_free, 2);

  CHECK(layout.total_scalars() == 3 + 6 + 4);
  CHECK(layout.offset_of("d") == 0);
  CHECK(layout.offset_of("s") == 3);
  CHECK(layout.offset_of("g") == 9);

  CHECK(layout.index_of("d", 2, 2) == 2);
  CHECK_THROWS_AS(layout.index_of("d", 0, 1), InputError);

  // Upper triangle row-major, symmetric access.
  CHECK(layout.index_of("s", 0, 0) == 3);
  CHECK(layout.index_of("s", 0, 2) == 5);
  CHECK(layout.index_of("s", 1, 1) == 6);
  CHECK(layout.index_of("s", 2, 1) == 7);
  CHECK(layout.index_of("s", 1, 2) == 7);
  CHECK(layout.index_of("s", 2, 2) == 8);

  CHECK(layout.index_of("g", 1, 0) == 11);
  CHECK(layout.index_of("g", 0, 1) == 10);

  CHECK_THROWS_AS(layout.index_of("nope", 0, 0), InputError);
  CHECK_THROWS_AS(layout.add("d", BlockKind::full_free, 2), InputError);

  const auto floors = layout.positive_scalars();
  REQUIRE(floors.size() == 3);
  CHECK(floors[0] == 0);
  CHECK(floors[2] == 2);
}

TEST_CASE("pack and unpack are inverse") {
  VariableLayout layout;
  layout.add("s", BlockKind::symmetric_free, 3);
  layout.add("g", BlockKind::full_free, 3);
  Vec x(layout.total_scalars());
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : x) v = u(rng);

  const Mat s = layout.unpack("s", x);
  const Mat g = layout.unpack("g", x);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(s(i, j) == x[layout.index_of("s", i, j)]);
      CHECK(s(i, j) == s(j, i));
      CHECK(g(i, j) == x[layout.index_of("g", i, j)]);
    }
}

TEST_CASE("block evaluation matches direct assembly") {
  LmiProblem p = sample_problem();
  REQUIRE(validate(p).empty());

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    Vec x(p.layout.total_scalars());
    for (auto& v : x) v = u(rng);

    // Rebuild the first block by hand from the layout indices.
    Mat want(3, 3, 0.0);
    want(0, 0) = 1.0 + x[p.layout.index_of("d", 0, 0)];
    want(0, 2) = -0.5;
    want(2, 0) = -0.5;
    want(1, 1) = x[p.layout.index_of("d", 1, 1)];
    want(0, 1) = 2.0 * x[p.layout.index_of("s", 0, 1)];
    want(1, 0) = want(0, 1);
    want(1, 2) = -1.5 * x[p.layout.index_of("g", 1, 0)];
    want(2, 1) = want(1, 2);
    want(2, 2) = 0.25 * x[p.layout.index_of("g", 0, 0)];

    const SymMat got = evaluate_block(p, 0, x);
    CHECK((got.mat() - want).max_abs() < 1e-14);
  }

  CHECK_THROWS_AS(evaluate_block(p, 5, Vec(p.layout.total_scalars(), 0.0)), InputError);
  CHECK_THROWS_AS(evaluate_block(p, 0, Vec{1.0}), InputError);
}

TEST_CASE("validation reports structural defects") {
  LmiProblem p;
  CHECK_FALSE(validate(p).empty());

  p.layout.add("x", BlockKind::symmetric_free, 2);
  AffineBlock blk;
  blk.name = "broken";
  blk.sign = BlockSign::psd;
  blk.constant = SymMat::identity(2);
  blk.terms.push_back({99, SymMat::identity(2)});
  blk.terms.push_back({0, SymMat::identity(3)});
  p.constraints.push_back(blk);
  p.objective = Vec{1.0};

  const auto diag = validate(p);
  REQUIRE(diag.size() == 3);
  CHECK(diag[0].find("term index beyond layout") != std::string::npos);
  CHECK(diag[1].find("basis dimension mismatch") != std::string::npos);
  CHECK(diag[2].find("objective length") != std::string::npos);
}

TEST_CASE("sdpa export round trip") {
  const LmiProblem p = sample_problem();
  const double shift = 1e-6;
  const std::string text = export_sdpa(p, shift);
  const SdpaFile f = parse_sdpa(text);

  REQUIRE(f.m == p.layout.total_scalars());
  REQUIRE(f.dims.size() == 3);
  CHECK(f.dims[0] == 3);
  CHECK(f.dims[1] == 2);
  CHECK(f.dims[2] == -2);  // two positivity floors

  // Maximize objective is emitted negated for the min convention.
  for (std::size_t s = 0; s < f.m; ++s)
    CHECK(f.objective[s] == Catch::Approx(-(*p.objective)[s]).margin(0.0));

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    Vec x(f.m);
    for (auto& v : x) v = u(rng);

    for (std::size_t c = 0; c < p.constraints.size(); ++c) {
      // X_c = sum_s x_s F_s - F_0 as the importer would see it.
      Mat xc = materialize(f, 0, c) * -1.0;
      for (std::size_t s = 0; s < f.m; ++s) {
        const Mat fs = materialize(f, s + 1, c);
        for (std::size_t i = 0; i < xc.rows(); ++i)
          for (std::size_t j = 0; j < xc.cols(); ++j) xc(i, j) += x[s] * fs(i, j);
      }
      const Mat direct = evaluate_block(p, c, x).mat();
      if (p.constraints[c].sign == BlockSign::psd) {
        CHECK((xc - direct).max_abs() < 1e-9);
      } else {
        // Strict block: X_c = -(direct) - shift*I.
        Mat want = direct * -1.0;
        for (std::size_t i = 0; i < want.rows(); ++i) want(i, i) -= shift;
        CHECK((xc - want).max_abs() < 1e-9);
      }
    }

    // Floor block carries the diagonal_positive scalars in layout order.
    const auto floors = p.layout.positive_scalars();
    Mat xf = materialize(f, 0, 2) * -1.0;
    for (std::size_t s = 0; s < f.m; ++s) {
      const Mat fs = materialize(f, s + 1, 2);
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) xf(i, j) += x[s] * fs(i, j);
    }
    for (std::size_t k = 0; k < floors.size(); ++k)
      CHECK(xf(k, k) == Catch::Approx(x[floors[k]]).margin(0.0));
  }

  // Invalid problems are rejected up front.
  LmiProblem bad;
  CHECK_THROWS_AS(export_sdpa(bad), InputError);
}
