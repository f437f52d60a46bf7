#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfk/burnside.hpp"

namespace bfk {

enum class FunctorKind { B, K, Bdual, Kdual };

inline std::string functor_name(FunctorKind f) {
  switch (f) {
    case FunctorKind::B: return "B";
    case FunctorKind::K: return "K";
    case FunctorKind::Bdual: return "Bdual";
    default: return "Kdual";
  }
}

inline FunctorKind parse_functor(const std::string& s) {
  if (s == "B") return FunctorKind::B;
  if (s == "K") return FunctorKind::K;
  if (s == "Bdual" || s == "B*") return FunctorKind::Bdual;
  if (s == "Kdual" || s == "K*") return FunctorKind::Kdual;
  throw std::invalid_argument("unknown functor '" + s + "' (expected B, K, Bdual or Kdual)");
}

inline bool is_dual(FunctorKind f) { return f == FunctorKind::Bdual || f == FunctorKind::Kdual; }
inline bool is_k(FunctorKind f) { return f == FunctorKind::K || f == FunctorKind::Kdual; }

// A section (T,S) of a base group together with its materialized quotient and B(T/S). Classes of
// T/S are identified with T-classes of subgroups V, S <= V <= T, of the base group.
class SectionModel {
 public:
  SectionModel(LatticePtr base, Section sec) : base_(std::move(base)), sec_(sec) {
    const SubgroupLattice& l = *base_;
    q_ = l.quotient(sec.T, sec.S);
    qlat_ = make_lattice(q_.group);
    burnside_ = std::make_shared<const BurnsideRing>(qlat_);
    const SubgroupLattice& ql = *qlat_;
    to_base_.resize(ql.size());
    for (int w = 0; w < ql.size(); ++w) {
      std::vector<Element> pre;
      for (Element t : l.members(sec.T))
        if (ql.has_element(w, q_.proj[t])) pre.push_back(t);
      to_base_[w] = l.find(pre);
      class_of_base_[to_base_[w]] = ql.class_of(w);
    }
  }

  const SubgroupLattice& base() const { return *base_; }
  Section section() const { return sec_; }
  const Quotient& quotient() const { return q_; }
  const SubgroupLattice& quotient_lattice() const { return *qlat_; }
  const BurnsideRing& burnside() const { return *burnside_; }
  BurnsidePtr burnside_ptr() const { return burnside_; }

  int burnside_rank() const { return burnside_->rank(); }
  int rank(FunctorKind f) const { return is_k(f) ? burnside_->k_rank() : burnside_->rank(); }

  // Base subgroup V with S <= V <= T -> class index of V/S in B(T/S).
  int class_of_base(int v) const {
    auto it = class_of_base_.find(v);
    if (it == class_of_base_.end()) throw std::out_of_range("subgroup is not between S and T");
    return it->second;
  }
  // Preimage in the base group of the representative of a class.
  int class_rep_base(int cls) const { return to_base_[qlat_->class_rep(cls)]; }
  // Preimage of a quotient subgroup.
  int subgroup_to_base(int w) const { return to_base_[w]; }

 private:
  LatticePtr base_;
  Section sec_;
  Quotient q_;
  LatticePtr qlat_;
  BurnsidePtr burnside_;
  std::vector<int> to_base_;
  std::map<int, int> class_of_base_;
};

using SectionModelPtr = std::shared_ptr<const SectionModel>;

// Matrix of F(U) from the B-level matrices of U (src -> tgt) and of its opposite (tgt -> src):
// F = B: forward; K: forward restricted to K; duals: transpose of the opposite's matrix.
inline Matrix restrict_to_k(const Matrix& b, const BurnsideRing& src, const BurnsideRing& tgt) {
  const Matrix& ks = src.k_basis();
  Matrix m(tgt.k_rank(), src.k_rank());
  for (int j = 0; j < src.k_rank(); ++j) {
    Vector img = b.apply(ks.row(j));
    Vector c = tgt.k_coordinates(img);
    for (int i = 0; i < tgt.k_rank(); ++i) m(i, j) = c[i];
  }
  return m;
}

template <class Fwd, class Opp>
Matrix lift_to_functor(FunctorKind f, const BurnsideRing& src, const BurnsideRing& tgt, Fwd&& forward,
                       Opp&& opposite) {
  switch (f) {
    case FunctorKind::B: return forward();
    case FunctorKind::K: return restrict_to_k(forward(), src, tgt);
    case FunctorKind::Bdual: return opposite().transpose();
    default: return restrict_to_k(opposite(), tgt, src).transpose();
  }
}

// Section-level formulas for B inside one base lattice.
namespace formula {

// Defres from T/S to T'/S' for S <= S' <= T' <= T:
// [V] -> sum over g in T'\T/V of [(T' n gVg^-1)S']. The double coset of g has
// |T'||V| / |T' n gVg^-1| elements, so the sum is taken over all g in T with that weight.
inline Matrix burnside_defres(const SectionModel& big, const SectionModel& small) {
  const SubgroupLattice& l = big.base();
  Section b = big.section(), s = small.section();
  if (!(l.contains(s.S, b.S) && l.contains(s.T, s.S) && l.contains(b.T, s.T)))
    throw std::invalid_argument("defres: sections are not nested");
  Matrix m(small.burnside_rank(), big.burnside_rank());
  for (int c = 0; c < big.burnside_rank(); ++c) {
    int v = big.class_rep_base(c);
    std::map<int, long long> conjugates;
    for (Element x : l.members(b.T)) ++conjugates[l.conjugate(x, v)];
    long long denom = static_cast<long long>(l.order(s.T)) * l.order(v);
    std::map<int, long long> acc;
    for (auto [vc, count] : conjugates) {
      int i = l.intersection(s.T, vc);
      acc[small.class_of_base(l.join(i, s.S))] += count * l.order(i);
    }
    for (auto [cls, num] : acc) {
      if (num % denom != 0) throw std::logic_error("defres: non-integral double coset count");
      m(cls, c) = num / denom;
    }
  }
  return m;
}

// Indinf from T'/S' to T/S: [V] -> [V].
inline Matrix burnside_indinf(const SectionModel& small, const SectionModel& big) {
  const SubgroupLattice& l = big.base();
  Section b = big.section(), s = small.section();
  if (!(l.contains(s.S, b.S) && l.contains(s.T, s.S) && l.contains(b.T, s.T)))
    throw std::invalid_argument("indinf: sections are not nested");
  Matrix m(big.burnside_rank(), small.burnside_rank());
  for (int c = 0; c < small.burnside_rank(); ++c) m(big.class_of_base(small.class_rep_base(c)), c) += 1;
  return m;
}

// Conj_x from T/S to xT/xS: [V] -> [xVx^-1].
inline Matrix burnside_conj(Element x, const SectionModel& src, const SectionModel& tgt) {
  const SubgroupLattice& l = src.base();
  Section a = src.section(), b = tgt.section();
  if (l.conjugate(x, a.T) != b.T || l.conjugate(x, a.S) != b.S) throw std::invalid_argument("conj: target mismatch");
  Matrix m(tgt.burnside_rank(), src.burnside_rank());
  for (int c = 0; c < src.burnside_rank(); ++c) m(tgt.class_of_base(l.conjugate(x, src.class_rep_base(c))), c) += 1;
  return m;
}

}  // namespace formula

// Evaluation of B, K, B*, K* on all sections of one base group, with caching of section models.
class FunctorModel {
 public:
  FunctorModel(LatticePtr base, FunctorKind f) : base_(std::move(base)), f_(f) {}

  const SubgroupLattice& base() const { return *base_; }
  LatticePtr base_ptr() const { return base_; }
  FunctorKind kind() const { return f_; }

  const SectionModel& section(Section s) const { return *section_ptr(s); }
  SectionModelPtr section_ptr(Section s) const {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto it = cache_.find(s);
      if (it != cache_.end()) return it->second;
    }
    auto m = std::make_shared<const SectionModel>(base_, s);
    std::lock_guard<std::mutex> lock(mutex_);
    return cache_.emplace(s, std::move(m)).first->second;
  }
  Section top() const { return {base_->whole(), base_->trivial()}; }

  int rank(Section s) const { return section(s).rank(f_); }

  Matrix defres(Section big, Section small) const {
    const auto& b = section(big);
    const auto& s = section(small);
    return lift_to_functor(
        f_, b.burnside(), s.burnside(), [&] { return formula::burnside_defres(b, s); },
        [&] { return formula::burnside_indinf(s, b); });
  }
  Matrix indinf(Section small, Section big) const {
    const auto& b = section(big);
    const auto& s = section(small);
    return lift_to_functor(
        f_, s.burnside(), b.burnside(), [&] { return formula::burnside_indinf(s, b); },
        [&] { return formula::burnside_defres(b, s); });
  }
  Matrix conj(Element x, Section src) const {
    const SubgroupLattice& l = *base_;
    Section dst{l.conjugate(x, src.T), l.conjugate(x, src.S)};
    const auto& a = section(src);
    const auto& b = section(dst);
    return lift_to_functor(
        f_, a.burnside(), b.burnside(), [&] { return formula::burnside_conj(x, a, b); },
        [&] { return formula::burnside_conj(l.group().inv(x), b, a); });
  }

 private:
  LatticePtr base_;
  FunctorKind f_;
  mutable std::mutex mutex_;
  mutable std::map<Section, SectionModelPtr> cache_;
};

using FunctorModelPtr = std::shared_ptr<const FunctorModel>;

}  // namespace bfk
