#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bfk/integer.hpp"

namespace bfk {

// Incremental row echelon form over Z. Rows are kept keyed by pivot column.
class EchelonBuilder {
 public:
  explicit EchelonBuilder(std::size_t width) : width_(width) {}

  std::size_t width() const { return width_; }
  std::size_t rank() const { return rows_.size(); }

  void insert(Vector v) {
    if (v.size() != width_) throw std::invalid_argument("echelon: width mismatch");
    std::size_t c = 0;
    bool grew = false;
    while (true) {
      while (c < width_ && v[c] == 0) ++c;
      if (c == width_) break;
      auto it = rows_.find(c);
      if (it == rows_.end()) {
        grew = grew || large(v);
        rows_.emplace(c, std::move(v));
        break;
      }
      Vector& h = it->second;
      if (v[c] % h[c] == 0) {
        Int q = v[c] / h[c];
        for (std::size_t j = c; j < width_; ++j)
          if (h[j] != 0) v[j] -= q * h[j];
        continue;
      }
      // Replace the pivot row by a gcd combination and keep eliminating.
      Int a = h[c], b = v[c];
      Int x0 = 1, x1 = 0, y0 = 0, y1 = 1, r0 = a, r1 = b;
      while (r1 != 0) {
        Int q = r0 / r1;
        Int t = r0 - q * r1; r0 = r1; r1 = t;
        t = x0 - q * x1; x0 = x1; x1 = t;
        t = y0 - q * y1; y0 = y1; y1 = t;
      }
      // r0 = x0*a + y0*b; (a/r0, b/r0) gives the complementary row.
      Int ag = a / r0, bg = b / r0;
      Vector g(width_), w(width_);
      for (std::size_t j = c; j < width_; ++j) {
        if (h[j] == 0 && v[j] == 0) continue;
        g[j] = x0 * h[j] + y0 * v[j];
        w[j] = bg * h[j] - ag * v[j];
      }
      h = std::move(g);
      v = std::move(w);
      grew = grew || large(h);
    }
    // Entries of unreduced rows can grow without bound; fall back to the reduced form.
    if (grew) normalize();
  }

  // Canonical Hermite normal form: positive pivots, entries above pivots reduced into [0, pivot).
  Matrix hermite() {
    normalize();
    std::vector<Vector> rows;
    for (const auto& [c, r] : rows_) rows.push_back(r);
    return rows.empty() ? Matrix(0, width_) : Matrix::from_rows(rows, width_);
  }

 private:
  static bool large(const Vector& v) {
    for (const auto& x : v)
      if (x != 0 && msb(abs(x)) > 192) return true;
    return false;
  }

  void normalize() {
    std::vector<Vector*> rows;
    std::vector<std::size_t> piv;
    for (auto& [c, r] : rows_) {
      rows.push_back(&r);
      piv.push_back(c);
    }
    for (std::size_t i = 0; i < rows.size(); ++i)
      if ((*rows[i])[piv[i]] < 0)
        for (auto& x : *rows[i]) x = -x;
    // Bottom-up, so every row used for reduction is already reduced.
    for (std::size_t i = rows.size(); i-- > 0;) {
      Vector& ri = *rows[i];
      for (std::size_t k = i + 1; k < rows.size(); ++k) {
        const Vector& rk = *rows[k];
        Int q = floor_div(ri[piv[k]], rk[piv[k]]);
        if (q == 0) continue;
        for (std::size_t j = piv[k]; j < width_; ++j)
          if (rk[j] != 0) ri[j] -= q * rk[j];
      }
    }
  }

  std::size_t width_;
  std::map<std::size_t, Vector> rows_;
};

// Nonzero rows of the canonical row-style Hermite normal form of the row span of `a`.
inline Matrix hermite_normal_form(const Matrix& a) {
  EchelonBuilder eb(a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) eb.insert(a.row(i));
  return eb.hermite();
}

inline std::vector<std::size_t> pivot_columns(const Matrix& hnf) {
  std::vector<std::size_t> piv;
  for (std::size_t i = 0; i < hnf.rows(); ++i) {
    std::size_t c = 0;
    while (hnf(i, c) == 0) ++c;
    piv.push_back(c);
  }
  return piv;
}

// Invariant factors (nonzero Smith diagonal, each dividing the next).
inline std::vector<Int> smith_invariants(const Matrix& a) {
  Matrix m = hermite_normal_form(a);
  auto diagonal = [](const Matrix& x) {
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j)
        if (i != j && x(i, j) != 0) return false;
    return true;
  };
  bool transposed = false;
  while (!diagonal(m)) {
    m = hermite_normal_form(m.transpose());
    transposed = !transposed;
  }
  std::vector<Int> d;
  for (std::size_t i = 0; i < std::min(m.rows(), m.cols()); ++i)
    if (m(i, i) != 0) d.push_back(abs(m(i, i)));
  // Diagonal to Smith form: (a, b) -> (gcd, lcm) until the divisibility chain holds.
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = i + 1; j < d.size(); ++j) {
      Int g = gcd(d[i], d[j]);
      Int l = d[i] / g * d[j];
      d[i] = g;
      d[j] = l;
    }
  return d;
}

struct AbelianInvariants {
  std::vector<Int> torsion;  // invariant factors > 1, each dividing the next
  std::size_t free_rank = 0;

  bool is_zero() const { return torsion.empty() && free_rank == 0; }
  bool is_free() const { return torsion.empty(); }
  bool is_finite() const { return free_rank == 0; }
  Int order() const {
    Int o = 1;
    for (const auto& t : torsion) o *= t;
    return o;
  }
  // Prime-power decomposition of the torsion part.
  std::vector<Int> elementary_divisors() const {
    std::vector<Int> out;
    for (Int t : torsion) {
      for (Int q = 2; q * q <= t; ++q) {
        Int pk = 1;
        while (t % q == 0) t /= q, pk *= q;
        if (pk > 1) out.push_back(pk);
      }
      if (t > 1) out.push_back(t);
    }
    std::sort(out.begin(), out.end());
    return out;
  }
  friend bool operator==(const AbelianInvariants&, const AbelianInvariants&) = default;
};

// Invariants of Z^n / rowspan(relations).
inline AbelianInvariants cokernel_invariants(const Matrix& relations, std::size_t n) {
  AbelianInvariants inv;
  auto d = smith_invariants(relations);
  for (auto& x : d)
    if (x > 1) inv.torsion.push_back(x);
  inv.free_rank = n - d.size();
  return inv;
}

// Sublattice of Z^n, stored by its HNF basis.
class IntegerLattice {
 public:
  IntegerLattice() = default;
  explicit IntegerLattice(std::size_t n) : n_(n), basis_(0, n) {}

  static IntegerLattice span(std::size_t n, const std::vector<Vector>& gens) {
    EchelonBuilder eb(n);
    for (const auto& g : gens) eb.insert(g);
    return from_hnf(eb.hermite());
  }
  static IntegerLattice row_span(const Matrix& m) {
    IntegerLattice l;
    l.n_ = m.cols();
    l.basis_ = hermite_normal_form(m);
    l.index();
    return l;
  }
  static IntegerLattice full(std::size_t n) { return from_hnf(Matrix::identity(n)); }
  static IntegerLattice from_hnf(Matrix hnf) {
    IntegerLattice l;
    l.n_ = hnf.cols();
    l.basis_ = std::move(hnf);
    l.index();
    return l;
  }

  std::size_t ambient_rank() const { return n_; }
  std::size_t rank() const { return basis_.rows(); }
  const Matrix& basis() const { return basis_; }
  std::vector<Vector> basis_vectors() const { return basis_.row_vectors(); }
  const std::vector<std::size_t>& pivots() const { return pivots_; }

  std::optional<Vector> coordinates(const Vector& v) const {
    if (v.size() != n_) throw std::invalid_argument("lattice: dimension mismatch");
    Vector r = v;
    Vector c(rank());
    for (std::size_t i = 0; i < rank(); ++i) {
      const Int& d = basis_(i, pivots_[i]);
      if (r[pivots_[i]] == 0) continue;
      if (r[pivots_[i]] % d != 0) return std::nullopt;
      c[i] = r[pivots_[i]] / d;
      for (const auto& [j, x] : rows_[i]) r[j] -= c[i] * x;
    }
    if (!bfk::is_zero(r)) return std::nullopt;
    return c;
  }
  bool member(const Vector& v) const { return coordinates(v).has_value(); }

  // Canonical residue of v modulo the lattice.
  Vector reduce(Vector v) const {
    for (std::size_t i = 0; i < rank(); ++i) {
      Int q = floor_div(v[pivots_[i]], basis_(i, pivots_[i]));
      if (q == 0) continue;
      for (const auto& [j, x] : rows_[i]) v[j] -= q * x;
    }
    return v;
  }

  bool contains(const IntegerLattice& other) const {
    if (other.n_ != n_) throw std::invalid_argument("lattice: dimension mismatch");
    for (std::size_t i = 0; i < other.rank(); ++i)
      if (!member(other.basis_.row(i))) return false;
    return true;
  }

  // Coordinates of the rows of `other` in this basis (rows of the result).
  Matrix coordinate_matrix(const IntegerLattice& other) const {
    Matrix m(other.rank(), rank());
    for (std::size_t i = 0; i < other.rank(); ++i) {
      auto c = coordinates(other.basis_.row(i));
      if (!c) throw std::domain_error("lattice: not a sublattice");
      for (std::size_t j = 0; j < rank(); ++j) m(i, j) = (*c)[j];
    }
    return m;
  }

  IntegerLattice operator+(const IntegerLattice& other) const {
    if (other.n_ != n_) throw std::invalid_argument("lattice: dimension mismatch");
    EchelonBuilder eb(n_);
    for (std::size_t i = 0; i < rank(); ++i) eb.insert(basis_.row(i));
    for (std::size_t i = 0; i < other.rank(); ++i) eb.insert(other.basis_.row(i));
    return from_hnf(eb.hermite());
  }

  IntegerLattice scaled(const Int& c) const { return row_span(c * basis_); }

  // Image under the linear map with matrix m (acting on column vectors).
  IntegerLattice image(const Matrix& m) const {
    if (m.cols() != n_) throw std::invalid_argument("lattice: map dimension mismatch");
    EchelonBuilder eb(m.rows());
    for (std::size_t i = 0; i < rank(); ++i) eb.insert(m.apply(basis_.row(i)));
    return from_hnf(eb.hermite());
  }

  bool saturated() const { return quotient_invariants_full().is_free(); }

  AbelianInvariants quotient_invariants_full() const {
    AbelianInvariants inv = cokernel_invariants(basis_, n_);
    return inv;
  }

  friend bool operator==(const IntegerLattice& a, const IntegerLattice& b) {
    return a.n_ == b.n_ && a.basis_ == b.basis_;
  }

 private:
  void index() {
    pivots_ = pivot_columns(basis_);
    rows_.assign(basis_.rows(), {});
    for (std::size_t i = 0; i < basis_.rows(); ++i)
      for (std::size_t j = pivots_[i]; j < n_; ++j)
        if (basis_(i, j) != 0) rows_[i].emplace_back(j, basis_(i, j));
  }

  std::size_t n_ = 0;
  Matrix basis_;
  std::vector<std::size_t> pivots_;
  std::vector<std::vector<std::pair<std::size_t, Int>>> rows_;
};

// Invariants of outer / inner; inner must be contained in outer.
inline AbelianInvariants quotient_invariants(const IntegerLattice& outer, const IntegerLattice& inner) {
  return cokernel_invariants(outer.coordinate_matrix(inner), outer.rank());
}

using SparseVec = std::vector<std::pair<std::size_t, Int>>;

inline SparseVec sparse_from_dense(const Vector& v) {
  SparseVec s;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] != 0) s.emplace_back(i, v[i]);
  return s;
}

// Sparse exact elimination engine.
//
// Kernel mode: variables x = M y are parametrized by free parameters y; each added row
// c.x = 0 either eliminates a parameter with a unit coefficient, or triggers a unimodular
// change of parameters until one does (or a single parameter is forced to zero).
//
// Presentation mode: variables are generators of Z^n; each added row is a relation. A unit
// coefficient eliminates a generator (Tietze move); otherwise the generators are changed
// unimodularly and a residual relation is kept when the row has content > 1.
class SparseEliminator {
 public:
  enum class Mode { Kernel, Presentation };

  SparseEliminator(std::size_t n, Mode mode, std::vector<std::int64_t> priority = {})
      : n_(n), mode_(mode), priority_(std::move(priority)), alive_(n, 1), users_(n), acc_(n), mark_(n, 0) {
    if (priority_.empty()) priority_.assign(n, 0);
    if (priority_.size() != n) throw std::invalid_argument("eliminator: priority size mismatch");
    expr_.resize(n);
    defs_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      expr_[i].emplace_back(i, Int(1));
      defs_[i].emplace_back(i, Int(1));
      users_[i].push_back(i);
    }
  }

  std::size_t variables() const { return n_; }
  std::size_t alive_count() const { return static_cast<std::size_t>(std::count(alive_.begin(), alive_.end(), 1)); }

  void add_row(const SparseVec& row) {
    SparseVec c = rewrite(row);
    while (!c.empty()) {
      // Unit coefficient with the highest priority.
      std::optional<std::size_t> unit;
      for (std::size_t k = 0; k < c.size(); ++k) {
        if (abs(c[k].second) != 1) continue;
        if (!unit || better(c[k].first, c[*unit].first)) unit = k;
      }
      if (unit) {
        std::size_t p = c[*unit].first;
        Int s = -c[*unit].second;  // y_p = s * sum_{k != p} c_k y_k
        SparseVec l;
        for (auto& [q, v] : c)
          if (q != p) l.emplace_back(q, s * v);
        substitute(p, l, false);
        return;
      }
      if (c.size() == 1) {
        if (mode_ == Mode::Kernel) {
          substitute(c[0].first, {}, false);
        } else {
          residual_.push_back(expr_.size());
          expr_.push_back(c);
          users_[c[0].first].push_back(expr_.size() - 1);
        }
        return;
      }
      // Euclid step on the smallest coefficient.
      std::size_t j = 0;
      for (std::size_t k = 1; k < c.size(); ++k)
        if (abs(c[k].second) < abs(c[j].second) ||
            (abs(c[k].second) == abs(c[j].second) && better(c[k].first, c[j].first)))
          j = k;
      std::size_t pj = c[j].first;
      Int cj = c[j].second;
      SparseVec l{{pj, Int(1)}};
      SparseVec next;
      for (auto& [q, v] : c) {
        if (q == pj) {
          next.emplace_back(q, v);
          continue;
        }
        Int qk = v / cj;
        Int rem = v - qk * cj;
        if (qk != 0) l.emplace_back(q, -qk);
        if (rem != 0) next.emplace_back(q, rem);
      }
      std::sort(l.begin(), l.end(), [](auto& a, auto& b) { return a.first < b.first; });
      // New generator y_j' = y_j + sum q_k y_k.
      for (auto& [q, v] : l)
        if (q != pj) defs_[pj] = axpy(defs_[pj], -v, defs_[q]);
      substitute(pj, l, true);
      c = std::move(next);
    }
  }

  std::vector<std::size_t> alive_params() const {
    std::vector<std::size_t> a;
    for (std::size_t i = 0; i < n_; ++i)
      if (alive_[i]) a.push_back(i);
    return a;
  }

  // Kernel mode: one basis vector (over the variables) per surviving parameter.
  std::vector<Vector> kernel_basis() const {
    auto params = alive_params();
    std::vector<std::size_t> col(n_, SIZE_MAX);
    for (std::size_t k = 0; k < params.size(); ++k) col[params[k]] = k;
    std::vector<Vector> basis(params.size(), Vector(n_));
    for (std::size_t i = 0; i < n_; ++i)
      for (auto& [p, v] : expr_[i])
        if (col[p] != SIZE_MAX) basis[col[p]][i] = v;
    return basis;
  }

  // Presentation mode: image of every original generator in the surviving generators (rows).
  Matrix generator_images() const {
    auto params = alive_params();
    std::vector<std::size_t> col(n_, SIZE_MAX);
    for (std::size_t k = 0; k < params.size(); ++k) col[params[k]] = k;
    Matrix m(n_, params.size());
    for (std::size_t i = 0; i < n_; ++i)
      for (auto& [p, v] : expr_[i]) m(i, col[p]) = v;
    return m;
  }

  // Presentation mode: each surviving generator as a combination of the original ones (rows).
  Matrix generator_definitions() const {
    auto params = alive_params();
    Matrix m(params.size(), n_);
    for (std::size_t k = 0; k < params.size(); ++k)
      for (auto& [i, v] : defs_[params[k]]) m(k, i) = v;
    return m;
  }

  // Presentation mode: relations that survived, over the surviving generators.
  Matrix residual_relations() const {
    auto params = alive_params();
    std::vector<std::size_t> col(n_, SIZE_MAX);
    for (std::size_t k = 0; k < params.size(); ++k) col[params[k]] = k;
    Matrix m(0, params.size());
    for (std::size_t r : residual_) {
      if (expr_[r].empty()) continue;
      Vector row(params.size());
      for (auto& [p, v] : expr_[r]) row[col[p]] = v;
      m.append_row(row);
    }
    return m;
  }

 private:
  bool better(std::size_t a, std::size_t b) const {
    if (priority_[a] != priority_[b]) return priority_[a] > priority_[b];
    return a > b;
  }

  static SparseVec axpy(const SparseVec& a, const Int& c, const SparseVec& b) {
    SparseVec out;
    auto x = a.begin();
    auto y = b.begin();
    while (x != a.end() || y != b.end()) {
      if (y == b.end() || (x != a.end() && x->first < y->first)) {
        out.push_back(*x++);
      } else if (x == a.end() || y->first < x->first) {
        out.emplace_back(y->first, c * y->second);
        ++y;
      } else {
        Int s = x->second + c * y->second;
        if (s != 0) out.emplace_back(x->first, std::move(s));
        ++x, ++y;
      }
    }
    return out;
  }

  SparseVec rewrite(const SparseVec& row) {
    std::vector<std::size_t> touched;
    for (auto& [i, v] : row) {
      if (i >= n_) throw std::out_of_range("eliminator: variable index");
      if (v == 0) continue;
      for (auto& [p, c] : expr_[i]) {
        if (!mark_[p]) {
          mark_[p] = 1;
          touched.push_back(p);
          acc_[p] = 0;
        }
        acc_[p] += v * c;
      }
    }
    std::sort(touched.begin(), touched.end());
    SparseVec out;
    for (std::size_t p : touched) {
      mark_[p] = 0;
      if (acc_[p] != 0) out.emplace_back(p, std::move(acc_[p]));
      acc_[p] = 0;
    }
    return out;
  }

  // y_p := l (l sorted; contains p only when keep is true).
  void substitute(std::size_t p, const SparseVec& l, bool keep) {
    std::vector<std::size_t> us = std::move(users_[p]);
    users_[p].clear();
    std::sort(us.begin(), us.end());
    us.erase(std::unique(us.begin(), us.end()), us.end());
    if (!keep) alive_[p] = 0;
    for (std::size_t v : us) {
      SparseVec& e = expr_[v];
      auto it = std::lower_bound(e.begin(), e.end(), p, [](auto& a, std::size_t x) { return a.first < x; });
      if (it == e.end() || it->first != p) continue;
      Int c = it->second;
      SparseVec merged;
      merged.reserve(e.size() + l.size());
      auto a = e.begin();
      auto b = l.begin();
      while (a != e.end() || b != l.end()) {
        if (b == l.end() || (a != e.end() && a->first < b->first)) {
          if (a->first != p) merged.push_back(*a);
          ++a;
        } else if (a == e.end() || b->first < a->first) {
          merged.emplace_back(b->first, c * b->second);
          users_[b->first].push_back(v);
          ++b;
        } else {
          Int s = (a->first == p ? Int(0) : a->second) + c * b->second;
          if (a->first == p) users_[p].push_back(v);
          if (s != 0) merged.emplace_back(a->first, std::move(s));
          ++a;
          ++b;
        }
      }
      e = std::move(merged);
    }
  }

  std::size_t n_;
  Mode mode_;
  std::vector<std::int64_t> priority_;
  std::vector<char> alive_;
  std::vector<SparseVec> expr_;
  std::vector<SparseVec> defs_;
  std::vector<std::vector<std::size_t>> users_;
  std::vector<std::size_t> residual_;
  std::vector<Int> acc_;
  std::vector<char> mark_;
};

// Integer kernel {x : A x = 0} as a saturated lattice.
inline IntegerLattice integer_kernel(const Matrix& a, const std::vector<std::int64_t>& priority = {}) {
  SparseEliminator el(a.cols(), SparseEliminator::Mode::Kernel, priority);
  for (std::size_t i = 0; i < a.rows(); ++i) el.add_row(sparse_from_dense(a.row(i)));
  return IntegerLattice::span(a.cols(), el.kernel_basis());
}

// Finitely generated abelian group Z^n / rowspan(relations).
class AbelianPresentation {
 public:
  AbelianPresentation() : rel_lattice_(0) {}
  explicit AbelianPresentation(std::size_t gens) : n_(gens), relations_(0, gens), rel_lattice_(gens) {
    inv_.free_rank = gens;
  }
  AbelianPresentation(std::size_t gens, Matrix relations)
      : n_(gens), relations_(std::move(relations)), rel_lattice_(gens) {
    if (relations_.rows() == 0) relations_ = Matrix(0, gens);
    if (relations_.cols() != gens) throw std::invalid_argument("presentation: relation width");
    rel_lattice_ = IntegerLattice::row_span(relations_);
    inv_ = cokernel_invariants(rel_lattice_.basis(), n_);
  }

  std::size_t generators() const { return n_; }
  const Matrix& relations() const { return relations_; }
  const IntegerLattice& relation_lattice() const { return rel_lattice_; }
  const AbelianInvariants& invariants() const { return inv_; }
  bool is_free() const { return rel_lattice_.rank() == 0; }
  bool is_zero_group() const { return inv_.is_zero(); }

  Vector reduce(const Vector& v) const { return rel_lattice_.reduce(v); }
  bool equal(const Vector& a, const Vector& b) const { return rel_lattice_.member(a - b); }
  bool is_zero(const Vector& v) const { return rel_lattice_.member(v); }

 private:
  std::size_t n_ = 0;
  Matrix relations_;
  IntegerLattice rel_lattice_;
  AbelianInvariants inv_;
};

// Homomorphism given by its matrix on generators (target.generators x source.generators).
struct GroupHom {
  AbelianPresentation source;
  AbelianPresentation target;
  Matrix matrix;

  Vector apply(const Vector& v) const { return matrix.apply(v); }

  bool well_defined() const {
    if (matrix.rows() != target.generators() || matrix.cols() != source.generators()) return false;
    const Matrix& r = source.relation_lattice().basis();
    for (std::size_t i = 0; i < r.rows(); ++i)
      if (!target.is_zero(matrix.apply(r.row(i)))) return false;
    return true;
  }
};

inline GroupHom compose(const GroupHom& g, const GroupHom& f) { return {f.source, g.target, g.matrix * f.matrix}; }

}  // namespace bfk
