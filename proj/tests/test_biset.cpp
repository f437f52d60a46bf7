#include <random>
#include <set>

#include <gtest/gtest.h>

#include "bfk/biset.hpp"
#include "bfk/subgroups.hpp"

using namespace bfk;

namespace {

std::vector<GroupPtr> small_groups() {
  std::vector<GroupPtr> out;
  for (const auto& d : catalog_descriptors(3, 27)) out.push_back(build_group(d));
  return out;
}

// Number of (H,K)-double cosets in G, by brute force.
int double_coset_count(const FiniteGroup& g, const std::vector<Element>& h, const std::vector<Element>& k) {
  std::vector<int> seen(g.order(), 0);
  int count = 0;
  for (Element x = 0; x < g.order(); ++x) {
    if (seen[x]) continue;
    ++count;
    for (Element a : h)
      for (Element b : k) seen[g.mul(g.mul(a, x), b)] = 1;
  }
  return count;
}

}  // namespace

TEST(Biset, ElementaryBisetsAreValid) {
  for (const auto& g : small_groups()) {
    SubgroupLattice l(g);
    EXPECT_TRUE(regular_biset(g).is_valid());
    for (int h = 0; h < l.size(); ++h) {
      auto e = l.subgroup_group(h);
      EXPECT_TRUE(restriction_biset(g, e.group, e.embed).is_valid());
      EXPECT_TRUE(induction_biset(g, e.group, e.embed).is_valid());
      if (!l.is_normal(h)) continue;
      auto q = l.quotient(l.whole(), h);
      EXPECT_TRUE(inflation_biset(g, q.group, q.proj).is_valid());
      EXPECT_TRUE(deflation_biset(g, q.group, q.proj).is_valid());
    }
  }
}

TEST(Biset, RejectsBadMaps) {
  auto g = build_group("cyclic:9");
  auto h = build_group("cyclic:3");
  EXPECT_THROW(restriction_biset(g, h, {0, 1, 2}), std::invalid_argument);  // not a homomorphism
  EXPECT_THROW(inflation_biset(g, h, std::vector<Element>(9, 0)), std::invalid_argument);
  EXPECT_THROW(isomorphism_biset(g, h, std::vector<Element>(9, 0)), std::invalid_argument);
}

TEST(Biset, RegularIsIdentityForComposition) {
  std::mt19937_64 rng(1);
  for (const auto& g : small_groups()) {
    SubgroupLattice l(g);
    auto e = l.subgroup_group(static_cast<int>(rng() % l.size()));
    auto ind = induction_biset(g, e.group, e.embed);
    EXPECT_TRUE(is_biset_iso(compose(regular_biset(g), ind), ind));
    EXPECT_TRUE(is_biset_iso(compose(ind, regular_biset(e.group)), ind));
  }
}

TEST(Biset, OppositeSwapsInductionAndRestriction) {
  for (const auto& g : small_groups()) {
    SubgroupLattice l(g);
    for (int h = 0; h < l.size(); ++h) {
      auto e = l.subgroup_group(h);
      auto ind = induction_biset(g, e.group, e.embed);
      auto res = restriction_biset(g, e.group, e.embed);
      EXPECT_TRUE(is_biset_iso(opposite(ind), res));
      EXPECT_TRUE(is_biset_iso(opposite(opposite(ind)), ind));
    }
  }
}

TEST(Biset, DeflationAfterInflationIsIdentity) {
  for (const auto& g : small_groups()) {
    SubgroupLattice l(g);
    for (int n = 0; n < l.size(); ++n) {
      if (!l.is_normal(n)) continue;
      auto q = l.quotient(l.whole(), n);
      auto c = compose(deflation_biset(g, q.group, q.proj), inflation_biset(g, q.group, q.proj));
      EXPECT_TRUE(is_biset_iso(c, regular_biset(q.group)));
    }
  }
}

TEST(Biset, MackeyOrbitCount) {
  // Res^G_H Ind^G_K has one transitive orbit per double coset H\G/K.
  for (const auto& g : small_groups()) {
    SubgroupLattice l(g);
    for (int h = 0; h < l.size(); ++h)
      for (int k = 0; k < l.size(); ++k) {
        auto eh = l.subgroup_group(h);
        auto ek = l.subgroup_group(k);
        auto c = compose(restriction_biset(g, eh.group, eh.embed), induction_biset(g, ek.group, ek.embed));
        EXPECT_EQ(static_cast<int>(orbit_decompose(c).size()), double_coset_count(*g, l.members(h), l.members(k)));
        EXPECT_EQ(c.size(), g->order());
      }
  }
}

TEST(Biset, CompositionIsAssociative) {
  std::mt19937_64 rng(9);
  auto g = build_group("xsp:3");
  SubgroupLattice l(g);
  for (int trial = 0; trial < 20; ++trial) {
    auto a = l.subgroup_group(static_cast<int>(rng() % l.size()));
    auto b = l.subgroup_group(static_cast<int>(rng() % l.size()));
    auto u = induction_biset(g, a.group, a.embed);
    auto v = restriction_biset(g, b.group, b.embed);
    auto w = induction_biset(g, b.group, b.embed);
    EXPECT_TRUE(is_biset_iso(compose(compose(w, v), u), compose(w, compose(v, u))));
  }
}

TEST(Biset, TransportersOfTheRegularBiset) {
  // For U = G, T^u = u^-1 T u and ^uS = u S u^-1.
  auto g = build_group("xsp:3");
  SubgroupLattice l(g);
  auto u = regular_biset(g);
  for (int t = 0; t < l.size(); ++t)
    for (Element x = 0; x < g->order(); ++x) {
      EXPECT_EQ(l.find(right_transporter(u, l.members(t), x)), l.conjugate(g->inv(x), t));
      EXPECT_EQ(l.find(left_transporter(u, x, l.members(t))), l.conjugate(x, t));
    }
}

TEST(Biset, DoubleCosetRepresentatives) {
  for (const auto& g : small_groups()) {
    SubgroupLattice l(g);
    auto u = regular_biset(g);
    for (int t = 0; t < l.size(); ++t) {
      auto reps = double_coset_reps(u, l.members(t));
      // (T,G)-orbits on G: a single one.
      EXPECT_EQ(reps, std::vector<int>{0});
    }
    for (int h = 0; h < l.size(); ++h) {
      auto e = l.subgroup_group(h);
      auto res = restriction_biset(g, e.group, e.embed);
      // (H,G)-orbits on G: one; reps are least points.
      EXPECT_EQ(double_coset_reps(res, {0}).size(), 1u);
    }
  }
}

TEST(Biset, OrbitLabelsDistinguishTransitiveBisets) {
  auto g = build_group("elab:3:2");
  SubgroupLattice l(g);
  std::set<std::vector<BisetLabel>> labels;
  for (int h = 0; h < l.size(); ++h) {
    auto e = l.subgroup_group(h);
    auto c = compose(induction_biset(g, e.group, e.embed), restriction_biset(g, e.group, e.embed));
    labels.insert(orbit_decompose(c));
  }
  EXPECT_EQ(labels.size(), 6u);
}

TEST(Biset, QuotientsOfBisets) {
  for (const auto& g : small_groups()) {
    SubgroupLattice l(g);
    for (int n = 0; n < l.size(); ++n) {
      if (!l.is_normal(n)) continue;
      auto q = l.quotient(l.whole(), n);
      // N\G as a left quotient of the regular biset equals deflation.
      EXPECT_TRUE(is_biset_iso(left_quotient(regular_biset(g), q.group, q.proj), deflation_biset(g, q.group, q.proj)));
      EXPECT_TRUE(is_biset_iso(right_quotient(regular_biset(g), q.group, q.proj), inflation_biset(g, q.group, q.proj)));
    }
  }
}

TEST(Biset, DisjointUnionAndRestrictions) {
  auto g = build_group("cyclic:9");
  SubgroupLattice l(g);
  auto e = l.subgroup_group(1);
  auto r = regular_biset(g);
  auto d = disjoint_union(r, r);
  EXPECT_EQ(d.size(), 18);
  EXPECT_EQ(orbit_decompose(d).size(), 2u);
  EXPECT_TRUE(is_biset_iso(restrict_left(r, e.group, e.embed), restriction_biset(g, e.group, e.embed)));
  EXPECT_TRUE(is_biset_iso(restrict_right(r, e.group, e.embed), induction_biset(g, e.group, e.embed)));
}
