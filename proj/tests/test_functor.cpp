#include <gtest/gtest.h>

#include "bfk/functor.hpp"

using namespace bfk;

namespace {

std::vector<LatticePtr> lattices(int max_order) {
  std::vector<LatticePtr> out;
  for (const auto& d : catalog_descriptors(3, max_order)) out.push_back(make_lattice(build_group(d)));
  return out;
}

std::vector<Section> all_sections(const SubgroupLattice& l) {
  std::vector<Section> out;
  for (int t = 0; t < l.size(); ++t)
    for (int s : l.subgroups_between(0, t))
      if (l.is_normal_in(s, t)) out.push_back({t, s});
  return out;
}

bool nested(const SubgroupLattice& l, Section big, Section small) {
  return l.contains(small.S, big.S) && l.contains(small.T, small.S) && l.contains(big.T, small.T);
}

// S'\T as a (T'/S', T/S)-biset.
ConcreteBiset defres_biset(const SectionModel& big, const SectionModel& small) {
  const SubgroupLattice& l = big.base();
  const FiniteGroup& g = l.group();
  Section b = big.section(), s = small.section();
  std::vector<int> id(g.order(), -1);
  std::vector<Element> rep;
  for (Element x : l.members(b.T)) {
    if (id[x] != -1) continue;
    for (Element y : l.members(s.S)) id[g.mul(y, x)] = static_cast<int>(rep.size());
    rep.push_back(x);
  }
  int n = static_cast<int>(rep.size());
  const Quotient& qs = small.quotient();
  const Quotient& qb = big.quotient();
  int nl = qs.group->order(), nr = qb.group->order();
  std::vector<int> left(static_cast<std::size_t>(nl) * n), right(static_cast<std::size_t>(n) * nr);
  for (int k = 0; k < n; ++k) {
    for (Element c = 0; c < nl; ++c) left[static_cast<std::size_t>(c) * n + k] = id[g.mul(qs.rep[c], rep[k])];
    for (Element c = 0; c < nr; ++c) right[static_cast<std::size_t>(k) * nr + c] = id[g.mul(rep[k], qb.rep[c])];
  }
  return ConcreteBiset(qs.group, qb.group, n, std::move(left), std::move(right));
}

// Conjugation by x from T/S to xT/xS as an isomorphism biset.
ConcreteBiset conj_biset(Element x, const SectionModel& src, const SectionModel& tgt) {
  const FiniteGroup& g = src.base().group();
  const Quotient& a = src.quotient();
  const Quotient& b = tgt.quotient();
  std::vector<Element> alpha(a.group->order());
  for (Element c = 0; c < a.group->order(); ++c) alpha[c] = b.proj[g.conj(x, a.rep[c])];
  return isomorphism_biset(a.group, b.group, alpha);
}

}  // namespace

TEST(SectionModel, ClassMapsRoundTrip) {
  for (const auto& lp : lattices(27)) {
    const auto& l = *lp;
    for (Section s : all_sections(l)) {
      SectionModel m(lp, s);
      for (int c = 0; c < m.burnside_rank(); ++c) EXPECT_EQ(m.class_of_base(m.class_rep_base(c)), c);
      EXPECT_THROW(m.class_of_base(-5), std::out_of_range);
      EXPECT_EQ(m.quotient().group->order(), l.order(s.T) / l.order(s.S));
    }
  }
}

TEST(Formula, DefresAndIndinfMatchConcreteBisets) {
  for (const auto& lp : lattices(27)) {
    const auto& l = *lp;
    FunctorModel fm(lp, FunctorKind::B);
    auto secs = all_sections(l);
    for (Section b : secs)
      for (Section s : secs) {
        if (!nested(l, b, s)) continue;
        const auto& big = fm.section(b);
        const auto& small = fm.section(s);
        ConcreteBiset x = defres_biset(big, small);
        ASSERT_TRUE(x.is_valid());
        EXPECT_EQ(formula::burnside_defres(big, small), concrete_burnside_action(x, small.burnside(), big.burnside()))
            << l.group().name();
        EXPECT_EQ(formula::burnside_indinf(small, big),
                  concrete_burnside_action(opposite(x), big.burnside(), small.burnside()));
      }
  }
}

TEST(Formula, ConjMatchesIsomorphismBisets) {
  for (const auto& lp : lattices(27)) {
    const auto& l = *lp;
    FunctorModel fm(lp, FunctorKind::B);
    for (Section s : all_sections(l))
      for (Element x = 0; x < l.group().order(); ++x) {
        Section d{l.conjugate(x, s.T), l.conjugate(x, s.S)};
        const auto& src = fm.section(s);
        const auto& tgt = fm.section(d);
        EXPECT_EQ(formula::burnside_conj(x, src, tgt),
                  concrete_burnside_action(conj_biset(x, src, tgt), tgt.burnside(), src.burnside()));
      }
  }
}

TEST(Formula, RejectsNonNestedSections) {
  auto lp = make_lattice(build_group("elab:3:2"));
  FunctorModel fm(lp, FunctorKind::B);
  EXPECT_THROW(fm.defres({1, 0}, {2, 0}), std::invalid_argument);
  EXPECT_THROW(fm.indinf({1, 0}, {2, 0}), std::invalid_argument);
}

TEST(Functor, ParseNames) {
  EXPECT_EQ(parse_functor("Kdual"), FunctorKind::Kdual);
  EXPECT_EQ(parse_functor("K*"), FunctorKind::Kdual);
  EXPECT_EQ(functor_name(FunctorKind::Bdual), "Bdual");
  EXPECT_THROW(parse_functor("D"), std::invalid_argument);
}

TEST(Functor, TransitivityForAllFunctors) {
  // Defres composes along nested triples and Indinf likewise, for B, K and their duals.
  for (const auto& lp : lattices(27)) {
    const auto& l = *lp;
    auto secs = all_sections(l);
    for (auto f : {FunctorKind::B, FunctorKind::K, FunctorKind::Bdual, FunctorKind::Kdual}) {
      FunctorModel fm(lp, f);
      Section top = fm.top();
      for (Section m : secs) {
        if (!nested(l, top, m)) continue;
        for (Section s : secs) {
          if (!nested(l, m, s)) continue;
          EXPECT_EQ(fm.defres(m, s) * fm.defres(top, m), fm.defres(top, s)) << functor_name(f);
          EXPECT_EQ(fm.indinf(m, top) * fm.indinf(s, m), fm.indinf(s, top)) << functor_name(f);
        }
      }
    }
  }
}

TEST(Functor, KValuesVanishOnSmallGroups) {
  for (const auto& lp : lattices(81)) {
    FunctorModel fm(lp, FunctorKind::Kdual);
    const auto& l = *lp;
    for (int t = 0; t < l.size(); ++t)
      if (l.order(t) <= 3) { EXPECT_EQ(fm.rank({t, 0}), 0); }
  }
}

TEST(Functor, ConjIsMultiplicative) {
  auto lp = make_lattice(build_group("xsp:3"));
  const auto& l = *lp;
  const auto& g = l.group();
  for (auto f : {FunctorKind::B, FunctorKind::Kdual}) {
    FunctorModel fm(lp, f);
    for (Section s : all_sections(l))
      for (Element x = 0; x < g.order(); x += 4)
        for (Element y = 0; y < g.order(); y += 5) {
          Section ys{l.conjugate(y, s.T), l.conjugate(y, s.S)};
          EXPECT_EQ(fm.conj(x, ys) * fm.conj(y, s), fm.conj(g.mul(x, y), s));
        }
  }
}

TEST(Functor, DualsAreTransposesOfOpposites) {
  auto lp = make_lattice(build_group("elab:3:3"));
  FunctorModel b(lp, FunctorKind::B), bd(lp, FunctorKind::Bdual);
  for (Section s : all_sections(*lp)) {
    if (!nested(*lp, b.top(), s)) continue;
    EXPECT_EQ(bd.defres(b.top(), s), b.indinf(s, b.top()).transpose());
  }
}
