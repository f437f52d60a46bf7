#include <random>

#include <gtest/gtest.h>

#include "bfk/lattice.hpp"

using namespace bfk;

namespace {

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, int lo, int hi, double density = 1.0) {
  std::uniform_int_distribution<int> d(lo, hi);
  std::uniform_real_distribution<double> u(0, 1);
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      if (u(rng) < density) m(i, j) = d(rng);
  return m;
}

// Kernel via HNF of [A^T | I]: rows with vanishing left block.
IntegerLattice dense_kernel(const Matrix& a) {
  std::size_t m = a.rows(), n = a.cols();
  Matrix aug(n, m + n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) aug(j, i) = a(i, j);
    aug(j, m + j) = 1;
  }
  Matrix h = hermite_normal_form(aug);
  std::vector<Vector> ker;
  for (std::size_t i = 0; i < h.rows(); ++i) {
    bool zero = true;
    for (std::size_t k = 0; k < m; ++k) zero = zero && h(i, k) == 0;
    if (!zero) continue;
    Vector v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = h(i, m + k);
    ker.push_back(v);
  }
  return IntegerLattice::span(n, ker);
}

}  // namespace

TEST(Hermite, CanonicalForm) {
  Matrix a = Matrix::from_ints(3, 3, {2, 4, 4, -6, 6, 12, 10, -4, -16});
  Matrix h = hermite_normal_form(a);
  // Same lattice, canonical: positive pivots, reduced entries above pivots.
  Matrix expect = Matrix::from_ints(3, 3, {2, 4, 4, 0, 6, 0, 0, 0, 12});
  EXPECT_EQ(h, expect);
  Matrix b = Matrix::from_ints(3, 3, {10, -4, -16, 2, 4, 4, -6, 6, 12});
  EXPECT_EQ(hermite_normal_form(b), expect);
}

TEST(Hermite, RowPermutationInvariance) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    Matrix a = random_matrix(rng, 6, 5, -5, 5);
    Matrix h = hermite_normal_form(a);
    std::vector<std::size_t> idx{5, 3, 1, 0, 2, 4};
    EXPECT_EQ(hermite_normal_form(a.select_rows(idx)), h);
    EXPECT_TRUE(IntegerLattice::from_hnf(h).contains(IntegerLattice::row_span(a)));
  }
}

TEST(Smith, KnownInvariants) {
  EXPECT_EQ(smith_invariants(Matrix::from_ints(2, 2, {2, 0, 0, 3})), (std::vector<Int>{1, 6}));
  EXPECT_EQ(smith_invariants(Matrix::from_ints(2, 2, {2, 4, 6, 8})), (std::vector<Int>{2, 4}));
  EXPECT_EQ(smith_invariants(Matrix::from_ints(1, 2, {0, 0})), (std::vector<Int>{}));
  EXPECT_EQ(smith_invariants(Matrix::from_ints(3, 3, {2, 0, 0, 0, 4, 0, 0, 0, 6})), (std::vector<Int>{2, 2, 12}));
}

TEST(Smith, DeterminantMatchesForSquareMatrices) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    Matrix a = random_matrix(rng, 3, 3, -4, 4);
    // det by cofactor expansion
    auto d = [&](int i, int j) { return a(i, j); };
    Int det = d(0, 0) * (d(1, 1) * d(2, 2) - d(1, 2) * d(2, 1)) - d(0, 1) * (d(1, 0) * d(2, 2) - d(1, 2) * d(2, 0)) +
              d(0, 2) * (d(1, 0) * d(2, 1) - d(1, 1) * d(2, 0));
    auto inv = smith_invariants(a);
    if (det == 0) {
      EXPECT_LT(inv.size(), 3u);
    } else {
      ASSERT_EQ(inv.size(), 3u);
      EXPECT_EQ(inv[0] * inv[1] * inv[2], abs(det));
      EXPECT_EQ(inv[1] % inv[0], 0);
      EXPECT_EQ(inv[2] % inv[1], 0);
    }
  }
}

TEST(Lattice, QuotientInvariantsExample) {
  auto full = IntegerLattice::full(2);
  auto sub = IntegerLattice::span(2, {to_vector({2, 0}), to_vector({0, 3})});
  auto q = quotient_invariants(full, sub);
  EXPECT_EQ(q.free_rank, 0u);
  EXPECT_EQ(q.torsion, (std::vector<Int>{6}));
  EXPECT_EQ(q.elementary_divisors(), (std::vector<Int>{2, 3}));
  EXPECT_EQ(q.order(), 6);
}

TEST(Lattice, MembershipAndContainment) {
  auto l = IntegerLattice::span(3, {to_vector({1, 2, 3}), to_vector({0, 3, 3})});
  EXPECT_TRUE(l.member(Vector(3)));
  EXPECT_TRUE(l.member(to_vector({1, 5, 6})));
  EXPECT_FALSE(l.member(to_vector({0, 1, 1})));
  auto c = l.coordinates(to_vector({2, 7, 9}));
  ASSERT_TRUE(c.has_value());
  Vector back(3);
  for (std::size_t i = 0; i < l.rank(); ++i) back = back + (*c)[i] * l.basis().row(i);
  EXPECT_EQ(back, to_vector({2, 7, 9}));
  auto sub = l.scaled(3);
  EXPECT_TRUE(l.contains(sub));
  EXPECT_FALSE(sub.contains(l));
  auto q = quotient_invariants(l, sub);
  EXPECT_EQ(q.torsion, (std::vector<Int>{3, 3}));
  EXPECT_EQ(l + sub, l);
}

TEST(Lattice, ReduceIsCanonicalResidue) {
  auto l = IntegerLattice::span(2, {to_vector({2, 1}), to_vector({0, 3})});
  EXPECT_EQ(l.reduce(to_vector({5, 5})), l.reduce(to_vector({5, 5}) + to_vector({2, 1})));
  EXPECT_EQ(l.reduce(to_vector({2, 4})), Vector(2));
}

TEST(Eliminator, KernelMatchesDenseOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 60; ++trial) {
    std::size_t r = 1 + rng() % 7, c = 1 + rng() % 9;
    Matrix a = random_matrix(rng, r, c, -6, 6, 0.6);
    auto k1 = integer_kernel(a);
    auto k2 = dense_kernel(a);
    EXPECT_EQ(k1, k2) << a;
    for (auto& v : k1.basis_vectors()) EXPECT_TRUE(is_zero(a.apply(v)));
    EXPECT_TRUE(k1.saturated());
  }
}

TEST(Eliminator, PresentationMatchesSmith) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 60; ++trial) {
    std::size_t r = 1 + rng() % 7, n = 1 + rng() % 6;
    Matrix rel = random_matrix(rng, r, n, -6, 6, 0.7);
    SparseEliminator el(n, SparseEliminator::Mode::Presentation);
    for (std::size_t i = 0; i < r; ++i) el.add_row(sparse_from_dense(rel.row(i)));
    Matrix res = el.residual_relations();
    auto a = cokernel_invariants(res, el.alive_count());
    auto b = cokernel_invariants(rel, n);
    EXPECT_EQ(a, b) << rel;
    // Generator images send every original relation to zero in the reduced group.
    Matrix img = el.generator_images();
    AbelianPresentation reduced(el.alive_count(), res);
    for (std::size_t i = 0; i < r; ++i) {
      Vector v(el.alive_count());
      for (std::size_t g = 0; g < n; ++g) v = v + rel(i, g) * img.row(g);
      EXPECT_TRUE(reduced.is_zero(v));
    }
  }
}

TEST(Presentation, ElementEquality) {
  AbelianPresentation a(2, Matrix::from_ints(1, 2, {0, 4}));
  EXPECT_TRUE(a.equal(to_vector({1, 5}), to_vector({1, 1})));
  EXPECT_FALSE(a.equal(to_vector({1, 2}), to_vector({1, 1})));
  EXPECT_EQ(a.invariants().torsion, (std::vector<Int>{4}));
  EXPECT_EQ(a.invariants().free_rank, 1u);
  GroupHom ok{a, AbelianPresentation(1, Matrix::from_ints(1, 1, {2})), Matrix::from_ints(1, 2, {1, 1})};
  EXPECT_TRUE(ok.well_defined());
  GroupHom bad{a, AbelianPresentation(1, Matrix::from_ints(1, 1, {3})), Matrix::from_ints(1, 2, {1, 1})};
  EXPECT_FALSE(bad.well_defined());
}
