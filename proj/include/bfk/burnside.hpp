#pragma once

#include <memory>
#include <stdexcept>
#include <vector>

#include "bfk/biset.hpp"
#include "bfk/lattice.hpp"
#include "bfk/subgroups.hpp"

namespace bfk {

// B(G) with basis the conjugacy classes of subgroups (class index order), its table of marks,
// the linearization matrix on cyclic classes and the kernel lattice K(G).
class BurnsideRing {
 public:
  explicit BurnsideRing(LatticePtr lat) : lat_(std::move(lat)) {
    const SubgroupLattice& l = *lat_;
    const FiniteGroup& g = l.group();
    int n = l.num_classes();
    marks_ = Matrix(n, n);
    for (int a = 0; a < n; ++a) {
      int s = l.class_rep(a);
      std::vector<int> count(l.size(), 0);
      for (Element x = 0; x < g.order(); ++x) ++count[l.conjugate(g.inv(x), s)];
      for (int b = 0; b < n; ++b) {
        int t = l.class_rep(b);
        long long fixed = 0;
        for (int c : l.class_members(a))
          if (count[c] && l.contains(t, c)) fixed += count[c];
        marks_(a, b) = fixed / l.order(t);
      }
    }
    for (int a = 0; a < n; ++a)
      if (l.is_cyclic(l.class_rep(a))) cyclic_.push_back(a);
    lin_ = marks_.select_rows(std::vector<std::size_t>(cyclic_.begin(), cyclic_.end()));
    k_ = integer_kernel(lin_);
  }

  const SubgroupLattice& lattice() const { return *lat_; }
  LatticePtr lattice_ptr() const { return lat_; }
  int rank() const { return lat_->num_classes(); }
  const Matrix& marks() const { return marks_; }
  const std::vector<int>& cyclic_classes() const { return cyclic_; }
  const Matrix& linearization() const { return lin_; }
  const IntegerLattice& k_lattice() const { return k_; }
  const Matrix& k_basis() const { return k_.basis(); }
  int k_rank() const { return static_cast<int>(k_.rank()); }

  Vector basis_vector(int cls) const {
    Vector v(rank());
    v[cls] = 1;
    return v;
  }
  // Transitive G-set G/H.
  Vector transitive(int subgroup) const { return basis_vector(lat_->class_of(subgroup)); }

  // Coordinates in the K basis; throws if v is not in K.
  Vector k_coordinates(const Vector& v) const {
    auto c = k_.coordinates(v);
    if (!c) throw std::domain_error("element is not in K");
    return *c;
  }

  // Column span of the linearization matrix, i.e. the image of B in Z^{cyclic classes}.
  IntegerLattice linearization_image() const {
    std::vector<Vector> cols;
    for (std::size_t j = 0; j < lin_.cols(); ++j) cols.push_back(lin_.column(j));
    return IntegerLattice::span(lin_.rows(), cols);
  }

  // R_Q^*(G) inside B^*(G) = Z^rank: rows of A^-1 L, with A a basis of the image of L.
  IntegerLattice rq_dual() const {
    IntegerLattice im = linearization_image();
    std::vector<Vector> rows(im.rank(), Vector(rank()));
    for (std::size_t j = 0; j < lin_.cols(); ++j) {
      auto y = im.coordinates(lin_.column(j));
      if (!y) throw std::logic_error("linearization column outside its own image");
      for (std::size_t i = 0; i < im.rank(); ++i) rows[i][j] = (*y)[i];
    }
    return IntegerLattice::span(rank(), rows);
  }

 private:
  LatticePtr lat_;
  Matrix marks_;
  std::vector<int> cyclic_;
  Matrix lin_;
  IntegerLattice k_;
};

using BurnsidePtr = std::shared_ptr<const BurnsideRing>;

// The element E/1 - sum_{|F|=p} E/F + p E/E of B(E), E elementary abelian of rank 2.
inline Vector epsilon_element(const BurnsideRing& b) {
  const SubgroupLattice& l = b.lattice();
  auto label = classify_quotient(l.group());
  if (label.kind != ClassLabel::Kind::ElementaryAbelian || label.rank != 2)
    throw std::invalid_argument("epsilon: group is not elementary abelian of rank 2");
  int p = l.group().prime();
  Vector v(b.rank());
  for (int s = 0; s < l.size(); ++s) {
    int c = l.class_of(s);
    if (l.order(s) == 1) v[c] += 1;
    else if (l.order(s) == p) v[c] -= 1;
    else v[c] += p;
  }
  return v;
}

// Subgroups used by delta on the extraspecial group: the centre Z and the representatives I, J
// of the first two non-central classes of order p (catalog order).
struct DeltaData {
  int Z = -1, I = -1, J = -1, IZ = -1, JZ = -1;
};

inline DeltaData delta_subgroups(const SubgroupLattice& l) {
  auto label = classify_quotient(l.group());
  if (label.kind != ClassLabel::Kind::Extraspecial) throw std::invalid_argument("delta: group is not extraspecial");
  DeltaData d;
  d.Z = l.center();
  int p = l.group().prime();
  std::vector<int> reps;
  for (int c = 0; c < l.num_classes(); ++c) {
    int r = l.class_rep(c);
    if (l.order(r) == p && r != d.Z) reps.push_back(r);
  }
  if (reps.size() < 2) throw std::logic_error("delta: fewer than two non-central classes of order p");
  d.I = reps[0];
  d.J = reps[1];
  if (l.class_of(d.I) == l.class_of(d.J)) throw std::invalid_argument("delta: I and J are conjugate");
  d.IZ = l.join(d.I, d.Z);
  d.JZ = l.join(d.J, d.Z);
  return d;
}

// X/I - X/IZ - X/J + X/JZ.
inline Vector delta_element(const BurnsideRing& b, const DeltaData& d) {
  Vector v(b.rank());
  const SubgroupLattice& l = b.lattice();
  v[l.class_of(d.I)] += 1;
  v[l.class_of(d.IZ)] -= 1;
  v[l.class_of(d.J)] -= 1;
  v[l.class_of(d.JZ)] += 1;
  return v;
}

// Oracle action of a concrete (Q,P)-biset on B(P): U x_P (P/S), decomposed into Q-orbits.
inline Matrix concrete_burnside_action(const ConcreteBiset& u, const BurnsideRing& bq, const BurnsideRing& bp) {
  require_same_group(u.left_group(), bq.lattice().group(), "burnside action");
  require_same_group(u.right_group(), bp.lattice().group(), "burnside action");
  const SubgroupLattice& lq = bq.lattice();
  const SubgroupLattice& lp = bp.lattice();
  GroupPtr one = cyclic_group(lp.group().prime(), 1);
  Matrix m(bq.rank(), bp.rank());
  for (int c = 0; c < bp.rank(); ++c) {
    int s = lp.class_rep(c);
    // P/S as a (P,1)-biset: cosets xS numbered by least element.
    const FiniteGroup& pg = u.right_group();
    std::vector<int> coset(pg.order(), -1);
    std::vector<Element> reps;
    for (Element x = 0; x < pg.order(); ++x) {
      if (coset[x] != -1) continue;
      for (Element y : lp.members(s)) coset[pg.mul(x, y)] = static_cast<int>(reps.size());
      reps.push_back(x);
    }
    int n = static_cast<int>(reps.size());
    std::vector<int> l(static_cast<std::size_t>(pg.order()) * n), r(n, 0);
    for (int k = 0; k < n; ++k) {
      r[k] = k;
      for (Element x = 0; x < pg.order(); ++x) l[static_cast<std::size_t>(x) * n + k] = coset[pg.mul(x, reps[k])];
    }
    ConcreteBiset ps(u.right_ptr(), one, n, std::move(l), std::move(r));
    for (const auto& label : orbit_decompose(compose(u, ps))) {
      std::vector<Element> stab;
      for (int code : label) stab.push_back(code);  // right group is trivial: code = q
      int h = lq.find(stab);
      if (h < 0) throw std::logic_error("burnside action: stabilizer is not a subgroup");
      m(lq.class_of(h), c) += 1;
    }
  }
  return m;
}

}  // namespace bfk
