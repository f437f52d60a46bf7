#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "bfk/witness.hpp"

namespace bfk::lab {

enum class Status { Verified, Refuted, Skipped };

inline std::string status_name(Status s) {
  switch (s) {
    case Status::Verified: return "verified";
    case Status::Refuted: return "refuted";
    default: return "skipped";
  }
}

struct Claim {
  std::string id;
  std::string campaign;
  std::string statement;
};

inline const std::vector<Claim>& claims_registry() {
  static const std::vector<Claim> claims = {
      {"induction.ranks", "induction", "rank B(P) = rank of the linearization image + rank K(P), and the image has rank equal to the number of cyclic subgroup classes"},
      {"induction.epsilon", "induction", "for E = Cp x Cp: rank B(E) = p+3, linearization rank p+2, K(E) = Z epsilon, every proper Defres of epsilon is 0, epsilon is fixed by Aut(E)"},
      {"induction.delta", "induction", "for the extraspecial group X of order p^3 and exponent p: Ind_JZ eps_JZ - Ind_IZ eps_IZ = p delta with delta in K(X)"},
      {"induction.x2-sum", "induction", "K(P) is the sum of Indinf K(T/S) over the sections (T,S) in X2(P)"},
      {"induction.e2-sum", "induction", "K_eps(P), the sum of Indinf Z eps over sections with T/S elementary abelian of rank 2, is contained in K(P)"},
      {"induction.p-multiple", "induction", "p K(P) is contained in K_eps(P)"},
      {"exact.ranks", "exact", "rank B*(P) = rank R_Q*(P) + rank K*(P)"},
      {"exact.free-quotient", "exact", "B*(P)/R_Q*(P) is free of rank rank K*(P): all invariant factors of the inclusion are 1"},
      {"exact.sequence", "exact", "0 -> R_Q*(P) -> B*(P) -> K*(P) -> 0 is exact for the restriction of functionals to K(P)"},
      {"exact.biset-compatible", "exact", "the quotient map B* -> K* commutes with the action of elementary bisets"},
      {"main.limit-reverify", "main", "the computed inverse limit satisfies every Defres condition along nested pairs and every conjugation condition"},
      {"main.unit-iso", "main", "the unit eta: K*(P) -> lim over Y(P) is an isomorphism for Y = X and Y = X3"},
      {"main.unit-injective", "main", "the unit eta: K*(P) -> lim over Y(P) is injective for Y = E and Y = E3; its cokernel is recorded"},
      {"main.torsion-cokernel", "main", "for Y containing E, every invariant factor of coker eta^Y(P) divides |P|"},
      {"main.sigma-retraction", "main", "eta o sigma_P = |P| id on the limit over E(P) under the recorded component reading"},
      {"main.reduction-x3", "main", "if eta^X(P) is an isomorphism and eta^X3(Q) is an isomorphism for the subquotient types Q in X(P), then eta^X3(P) is an isomorphism"},
      {"main.projection-natural", "main", "projection to a subclass commutes with the units, and is injective on limits when the smaller unit is injective"},
      {"probe.counit-surjective", "probe", "the counit from the colimit of K over X(P) onto K(P) is surjective"},
      {"probe.m-finite", "probe", "M(P), the kernel of the counit, is finite; whether M(P) = 0 is recorded"},
      {"appendix.transport-conj", "appendix", "(T^u)^x = T^(ux) and y(uX) = (yu)X for transporters through a biset point"},
      {"appendix.transport-section", "appendix", "transporters of a section (T,S) form a section whose quotient is isomorphic to (T n uP)/((S n uP)(T n u1)), of the same order as (T n uP)S/(T n u1)S, and the mirrored statement"},
      {"appendix.transport-compose", "appendix", "transporters through a composite point (v,u) are iterated transporters"},
      {"appendix.facile", "appendix", "(C\\V) x_B (A\\U) is isomorphic to C\\(V x_B U) when A acts trivially on C\\V"},
      {"appendix.section-biset", "appendix", "the section biset S\\P maps a limit element to its components on the sections of T/S"},
      {"appendix.action-in-limit", "appendix", "the biset action on limits lands in the limit and the elementary and concrete evaluations agree"},
      {"appendix.action-identity", "appendix", "the identity biset acts as the identity on limits"},
      {"appendix.action-composition", "appendix", "acting by U then by V equals acting by V x_Q U on limits"},
      {"appendix.adjunction", "appendix", "phi -> phi+ and psi -> psi- are mutually inverse: (phi+)- = phi and (psi-)+ = psi"},
  };
  return claims;
}

inline const Claim& find_claim(const std::string& id) {
  for (const auto& c : claims_registry())
    if (c.id == id) return c;
  throw std::logic_error("unregistered claim " + id);
}

inline std::vector<std::string> campaign_claims(const std::string& campaign) {
  std::vector<std::string> out;
  for (const auto& c : claims_registry())
    if (c.campaign == campaign) out.push_back(c.id);
  return out;
}

struct Report {
  std::string campaign;
  std::string claim;
  std::string group;
  std::string scope;
  Status status = Status::Verified;
  json data = json::object();
  json witness;  // null unless refuted
  bool witness_confirmed = false;
  double seconds = 0;
};

struct RunConfig {
  int p = 3;
  int max_order = 81;
  std::vector<std::string> groups;  // overrides the catalog when nonempty
  std::string functor = "Kdual";
  std::string cls;                  // restricts main to one class when nonempty
  std::string cache_dir;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::size_t samples = 200;        // per claim and sampled group
  int exhaustive_order = 27;
  int sigma_max_order = 27;
  SigmaReading reading = SigmaReading::Subsection;
  bool timings = false;
};

// Largest order a run may attempt; larger catalog groups are reported as skipped.
inline long long hard_bound(int p) {
  if (p == 3) return 243;
  if (p == 5) return 125;
  return static_cast<long long>(p) * p * p;
}

inline json report_json(const Report& r, bool timings) {
  json j = {{"campaign", r.campaign}, {"claim", r.claim}, {"group", r.group}, {"scope", r.scope},
            {"status", status_name(r.status)}, {"data", r.data}, {"witness", r.witness}};
  if (r.status == Status::Refuted) j["witness_confirmed"] = r.witness_confirmed;
  if (timings) j["seconds"] = r.seconds;
  return j;
}

inline json config_json(const RunConfig& c) {
  return {{"p", c.p},
          {"max_order", c.max_order},
          {"groups", c.groups},
          {"functor", c.functor},
          {"class", c.cls},
          {"seed", c.seed},
          {"samples", c.samples},
          {"exhaustive_order", c.exhaustive_order},
          {"sigma_max_order", c.sigma_max_order},
          {"sigma_reading", reading_name(c.reading)}};
}

inline json invariants_json(const AbelianInvariants& a) {
  json t = json::array();
  for (const Int& x : a.torsion) t.push_back(io::int_json(x));
  return {{"free_rank", a.free_rank}, {"torsion", t}};
}

inline json ints_json(const std::vector<Int>& v) {
  json out = json::array();
  for (const Int& x : v) out.push_back(io::int_json(x));
  return out;
}

// A group given by a descriptor, or by a multiplication table file when the path exists.
inline GroupPtr load_group(const std::string& spec, int p) {
  std::error_code ec;
  if (std::filesystem::is_regular_file(spec, ec)) {
    auto g = read_table_file(spec);
    if (g->prime() != p) throw std::invalid_argument(spec + ": group is not a " + std::to_string(p) + "-group");
    return g;
  }
  return build_group(spec, p);
}

struct GroupContext {
  std::string descriptor;
  GroupPtr group;
  LatticePtr lattice;
  const RunConfig* cfg = nullptr;
  io::Cache* cache = nullptr;
  bool exhaustive = true;
  std::size_t samples = 0;  // cases per claim when not exhaustive

  std::mt19937_64 rng(const std::string& claim) const {
    return std::mt19937_64(io::fnv1a64(std::to_string(cfg->seed) + "|" + descriptor + "|" + claim));
  }
  long long order() const { return group->order(); }
};

// Collects the reports of one group and campaign.
class Sink {
 public:
  Sink(const GroupContext& g, std::string campaign) : g_(g), campaign_(std::move(campaign)), last_(clock::now()) {}

  Report& add(const std::string& claim, const std::string& scope, bool ok, json data, json witness = nullptr) {
    if (find_claim(claim).campaign != campaign_) throw std::logic_error(claim + " is not part of " + campaign_);
    Report r;
    r.campaign = campaign_;
    r.claim = claim;
    r.group = g_.descriptor;
    r.scope = scope;
    r.status = ok ? Status::Verified : Status::Refuted;
    r.data = std::move(data);
    if (!ok) {
      if (witness.is_null()) witness = values_witness("expected", "observed failure without numeric witness");
      r.witness = std::move(witness);
      r.witness_confirmed = recheck_witness(r.witness);
    }
    auto now = clock::now();
    r.seconds = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    reports.push_back(std::move(r));
    return reports.back();
  }

  std::vector<Report> reports;

 private:
  using clock = std::chrono::steady_clock;
  const GroupContext& g_;
  std::string campaign_;
  clock::time_point last_;
};

inline std::vector<Vector> rows_of(const Matrix& m) { return m.row_vectors(); }

inline Vector unit_vector(std::size_t n, std::size_t i) {
  Vector v(n);
  v[i] = 1;
  return v;
}

// Witness that lattice `outer` is not contained in span(gens): the first outer basis row outside.
inline json containment_witness(const std::vector<Vector>& gens, const IntegerLattice& span, const IntegerLattice& outer) {
  for (const Vector& v : outer.basis_vectors())
    if (!span.member(v)) return nonmember_witness(gens, v);
  return nullptr;
}

// ---------------------------------------------------------------------------------------------
// induction

inline void run_induction(const GroupContext& g, Sink& out) {
  const SubgroupLattice& l = *g.lattice;
  int p = l.group().prime();
  auto model = std::make_shared<FunctorModel>(g.lattice, FunctorKind::B);
  Section top = model->top();
  const BurnsideRing& b = model->section(top).burnside();
  std::size_t n = b.rank();
  std::size_t lin = b.linearization_image().rank();
  std::size_t kr = b.k_rank();
  std::size_t cyc = b.cyclic_classes().size();
  {
    bool ok = n == lin + kr && lin == cyc;
    json data = {{"rank_B", n}, {"rank_linearization", lin}, {"rank_K", kr}, {"cyclic_classes", cyc}};
    out.add("induction.ranks", "B", ok, data, ok ? json() : values_witness({n, lin}, {lin + kr, cyc}));
  }

  auto label = classify_quotient(l.group());
  if (label.kind == ClassLabel::Kind::ElementaryAbelian && label.rank == 2) {
    Vector eps = epsilon_element(b);
    json data = {{"epsilon", io::vector_json(eps)}, {"rank_B", n}, {"rank_linearization", lin}, {"rank_K", kr}};
    json w;
    if (n != static_cast<std::size_t>(p + 3) || lin != static_cast<std::size_t>(p + 2) || kr != 1)
      w = values_witness({n, lin, kr}, {p + 3, p + 2, 1});
    std::vector<Vector> gens{eps};
    auto span = IntegerLattice::span(n, gens);
    if (w.is_null() && !(span == b.k_lattice())) {
      w = containment_witness(gens, span, b.k_lattice());
      if (w.is_null()) w = nonmember_witness(b.k_lattice().basis_vectors(), eps);
    }
    std::size_t defres_checked = 0;
    for (int t = 0; t < l.size() && w.is_null(); ++t)
      for (int s = 0; s < l.size() && w.is_null(); ++s) {
        if (!l.is_section(t, s) || Section{t, s} == top) continue;
        Matrix d = model->defres(top, {t, s});
        ++defres_checked;
        Vector img = d.apply(eps);
        if (!bfk::is_zero(img)) w = product_witness(d, eps, Vector(img.size()));
      }
    // Every automorphism of E, as an isomorphism biset acting on B(E).
    std::size_t autos = 0;
    const FiniteGroup& e = l.group();
    auto gens_e = group_generators(e);
    for (Element a = 1; a < e.order() && w.is_null(); ++a)
      for (Element c = 1; c < e.order() && w.is_null(); ++c) {
        if (gens_e.size() != 2) break;
        // a, c images of the two generators; extend when they generate
        std::vector<Element> alpha(e.order(), -1);
        bool ok = true;
        for (int i = 0; i < p && ok; ++i)
          for (int j = 0; j < p && ok; ++j) {
            Element src = e.mul(e.pow(gens_e[0], i), e.pow(gens_e[1], j));
            Element dst = e.mul(e.pow(a, i), e.pow(c, j));
            if (alpha[src] != -1) ok = false;
            alpha[src] = dst;
          }
        std::vector<char> hit(e.order(), 0);
        for (Element x : alpha)
          if (x >= 0) hit[x] = 1;
        if (!ok || std::count(hit.begin(), hit.end(), 1) != e.order()) continue;
        ++autos;
        auto iso = isomorphism_biset(l.group_ptr(), l.group_ptr(), alpha);
        Matrix act = concrete_burnside_action(iso, b, b);
        if (act.apply(eps) != eps) w = product_witness(act, eps, eps);
      }
    data["proper_defres_checked"] = defres_checked;
    data["automorphisms_checked"] = autos;
    out.add("induction.epsilon", "B", w.is_null(), data, w);
  }

  if (label.kind == ClassLabel::Kind::Extraspecial) {
    DeltaData d = delta_subgroups(l);
    Vector delta = delta_element(b, d);
    auto ind_eps = [&](int h) {
      Section s{h, l.trivial()};
      return model->indinf(s, top).apply(epsilon_element(model->section(s).burnside()));
    };
    Vector lhs = ind_eps(d.JZ) - ind_eps(d.IZ);
    Vector rhs = Int(p) * delta;
    json w;
    if (lhs != rhs) w = values_witness(io::vector_json(lhs), io::vector_json(rhs));
    else if (!b.k_lattice().member(delta)) w = nonmember_witness(b.k_lattice().basis_vectors(), delta);
    json data = {{"I", io::members_json(l.members(d.I))}, {"J", io::members_json(l.members(d.J))},
                 {"Z", io::members_json(l.members(d.Z))}, {"delta", io::vector_json(delta)},
                 {"lhs", io::vector_json(lhs)}};
    out.add("induction.delta", "B", w.is_null(), data, w);
  }

  // Generators of the two sums.
  std::vector<Vector> x2, e2;
  std::size_t x2_sections = 0, e2_sections = 0;
  auto X2 = SectionClass::parse("X2");
  for (Section s : sections_in_class(l, X2)) {
    ++x2_sections;
    long long q = l.order(s.T) / l.order(s.S);
    if (q < static_cast<long long>(p) * p) continue;
    const SectionModel& sm = model->section(s);
    if (sm.burnside().k_rank() == 0) continue;
    Matrix ind = model->indinf(s, top);
    for (const Vector& k : sm.burnside().k_basis().row_vectors()) x2.push_back(ind.apply(k));
    if (classify_quotient(*sm.quotient().group).kind == ClassLabel::Kind::ElementaryAbelian) {
      ++e2_sections;
      e2.push_back(ind.apply(epsilon_element(sm.burnside())));
    }
  }
  const IntegerLattice& K = b.k_lattice();
  auto x2span = IntegerLattice::span(n, x2);
  auto e2span = IntegerLattice::span(n, e2);
  {
    json w;
    for (const Vector& v : x2)
      if (w.is_null() && !K.member(v)) w = nonmember_witness(K.basis_vectors(), v);
    if (w.is_null()) w = containment_witness(x2, x2span, K);
    json data = {{"sections", x2_sections}, {"generators", x2.size()}, {"rank_K", kr}, {"rank_sum", x2span.rank()}};
    out.add("induction.x2-sum", "B", w.is_null(), data, w);
  }
  AbelianInvariants index = K.contains(e2span) ? quotient_invariants(K, e2span) : AbelianInvariants{};
  {
    json w;
    for (const Vector& v : e2)
      if (w.is_null() && !K.member(v)) w = nonmember_witness(K.basis_vectors(), v);
    json data = {{"sections", e2_sections}, {"rank_K", kr}, {"rank_K_eps", e2span.rank()}};
    if (w.is_null()) data["K_over_K_eps"] = invariants_json(index);
    out.add("induction.e2-sum", "B", w.is_null(), data, w);
  }
  {
    json w = containment_witness(e2, e2span, K.scaled(p));
    json data = {{"rank_K", kr}, {"K_over_K_eps", invariants_json(index)}};
    out.add("induction.p-multiple", "B", w.is_null(), data, w);
  }
}

// ---------------------------------------------------------------------------------------------
// exact

struct NamedBiset {
  std::string name;
  ConcreteBiset biset;
};

// Res and Ind for each class representative, Inf and Def for each nontrivial normal subgroup,
// conjugation by each generator, and the identity.
inline std::vector<NamedBiset> elementary_family(const SubgroupLattice& l) {
  GroupPtr g = l.group_ptr();
  std::vector<NamedBiset> out;
  out.push_back({"id", regular_biset(g)});
  for (int c = 0; c < l.num_classes(); ++c) {
    int h = l.class_rep(c);
    if (h == l.whole()) continue;
    Embedded e = l.subgroup_group(h);
    std::string tag = std::to_string(h);
    out.push_back({"res:" + tag, restriction_biset(g, e.group, e.embed)});
    out.push_back({"ind:" + tag, induction_biset(g, e.group, e.embed)});
  }
  for (int n = 1; n < l.size(); ++n) {
    if (!l.is_normal(n)) continue;
    Quotient q = l.quotient(l.whole(), n);
    std::string tag = std::to_string(n);
    out.push_back({"inf:" + tag, inflation_biset(g, q.group, q.proj)});
    out.push_back({"def:" + tag, deflation_biset(g, q.group, q.proj)});
  }
  const FiniteGroup& grp = l.group();
  for (Element x : group_generators(grp)) {
    std::vector<Element> alpha(grp.order());
    bool inner_trivial = true;
    for (Element y = 0; y < grp.order(); ++y) {
      alpha[y] = grp.conj(x, y);
      inner_trivial = inner_trivial && alpha[y] == y;
    }
    if (!inner_trivial) out.push_back({"conj:" + std::to_string(x), isomorphism_biset(g, g, alpha)});
  }
  return out;
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) { return n ? static_cast<std::size_t>(rng() % n) : 0; }

// Lattices of the groups reached by a family, keyed by identity of the group object.
class LatticePool {
 public:
  LatticePtr get(const GroupPtr& g) {
    auto it = pool_.find(g.get());
    if (it != pool_.end()) return it->second;
    auto l = make_lattice(g);
    pool_.emplace(g.get(), l);
    keep_.push_back(g);
    return l;
  }
  void put(const LatticePtr& l) {
    pool_.emplace(&l->group(), l);
    keep_.push_back(l->group_ptr());
  }

 private:
  std::map<const FiniteGroup*, LatticePtr> pool_;
  std::vector<GroupPtr> keep_;
};

inline void run_exact(const GroupContext& g, Sink& out) {
  const SubgroupLattice& l = *g.lattice;
  auto model = std::make_shared<FunctorModel>(g.lattice, FunctorKind::Bdual);
  const BurnsideRing& b = model->section(model->top()).burnside();
  std::size_t n = b.rank();
  IntegerLattice rq = b.rq_dual();
  std::size_t kr = b.k_rank();
  {
    bool ok = n == rq.rank() + kr;
    out.add("exact.ranks", "Bdual", ok, {{"rank_Bdual", n}, {"rank_RQdual", rq.rank()}, {"rank_Kdual", kr}},
            ok ? json() : values_witness(n, rq.rank() + kr));
  }
  {
    AbelianInvariants q = rq.quotient_invariants_full();
    bool ok = q.is_free() && q.free_rank == kr;
    std::vector<Int> factors = smith_invariants(rq.basis());
    bool ones = std::all_of(factors.begin(), factors.end(), [](const Int& x) { return x == 1; });
    ok = ok && ones;
    json data = {{"quotient", invariants_json(q)}, {"invariant_factors", ints_json(factors)}};
    out.add("exact.free-quotient", "Bdual", ok, data, ok ? json() : values_witness(invariants_json(q), {{"free_rank", kr}, {"torsion", json::array()}}));
  }
  {
    const Matrix& kb = b.k_basis();  // pi: B* -> K*, functionals restricted to K
    IntegerLattice ker = integer_kernel(kb);
    json w;
    for (const Vector& v : rq.basis_vectors())
      if (w.is_null() && !bfk::is_zero(kb.apply(v))) w = product_witness(kb, v, Vector(kb.rows()));
    if (w.is_null()) w = containment_witness(rq.basis_vectors(), rq, ker);
    auto cols = kb.transpose().row_vectors();
    auto image = IntegerLattice::span(kr, cols);
    if (w.is_null()) w = containment_witness(cols, image, IntegerLattice::full(kr));
    out.add("exact.sequence", "Bdual", w.is_null(), {{"rank_kernel", ker.rank()}, {"rank_image", image.rank()}}, w);
  }
  {
    auto fam = elementary_family(l);
    std::vector<std::size_t> chosen;
    if (g.exhaustive) {
      for (std::size_t i = 0; i < fam.size(); ++i) chosen.push_back(i);
    } else {
      auto rng = g.rng("exact.biset-compatible");
      std::set<std::size_t> s;
      std::size_t want = std::min<std::size_t>(fam.size(), 8);
      while (s.size() < want) s.insert(pick(rng, fam.size()));
      chosen.assign(s.begin(), s.end());
    }
    LatticePool pool;
    pool.put(g.lattice);
    json w;
    json names = json::array();
    for (std::size_t i : chosen) {
      if (!w.is_null()) break;
      const ConcreteBiset& u = fam[i].biset;
      names.push_back(fam[i].name);
      BurnsideRing bq(pool.get(u.left_ptr())), bp(pool.get(u.right_ptr()));
      Matrix bop = concrete_burnside_action(opposite(u), bp, bq);  // B(Q) -> B(P)
      Matrix bdual = bop.transpose();
      Matrix kdual;
      try {
        kdual = restrict_to_k(bop, bq, bp).transpose();
      } catch (const std::exception& e) {
        w = values_witness(fam[i].name + ": K is not preserved", e.what());
        break;
      }
      Matrix lhs = bq.k_basis() * bdual;
      Matrix rhs = kdual * bp.k_basis();
      for (std::size_t j = 0; j < lhs.cols() && w.is_null(); ++j)
        if (lhs.column(j) != rhs.column(j)) w = product_witness(lhs, unit_vector(lhs.cols(), j), rhs.column(j));
    }
    out.add("exact.biset-compatible", "Bdual", w.is_null(),
            {{"mode", g.exhaustive ? "exhaustive" : "sampled"}, {"bisets", names}}, w);
  }
}

// ---------------------------------------------------------------------------------------------
// main

inline const char* kScopeNote = "torsion-free component (K*) only; the torsion part of the Dade group is out of verification scope";

struct LimitData {
  SystemPtr sys;
  InverseLimit lim;
};

inline LimitData limit_for(const GroupContext& g, const FunctorModelPtr& model, const std::string& cls,
                           SystemOptions opt = {}) {
  opt.jobs = 1;
  SystemPtr sys = g.cache ? g.cache->system(model, SectionClass::parse(cls), opt)
                          : system_from_functor(model, SectionClass::parse(cls), opt);
  return {sys, inverse_limit(sys)};
}

// Witness that eta is not injective or not surjective.
inline json eta_witness(const EtaAnalysis& a, const InverseLimit& lim, bool need_surjective) {
  if (!a.injective) {
    auto ker = integer_kernel(a.coordinates);
    if (ker.rank()) return kernel_witness(a.coordinates, ker.basis().row(0));
  }
  if (need_surjective && !a.surjective) {
    auto cols = a.coordinates.transpose().row_vectors();
    auto image = IntegerLattice::span(lim.generators(), cols);
    return containment_witness(cols, image, IntegerLattice::full(lim.generators()));
  }
  return nullptr;
}

inline json eta_json(const EtaAnalysis& a) {
  return {{"injective", a.injective}, {"surjective", a.surjective}, {"invariant_factors", ints_json(a.invariant_factors)},
          {"cokernel", invariants_json(a.cokernel)}};
}

// eta is an isomorphism on the group itself for one class.
inline bool eta_iso_on(const GroupPtr& q, FunctorKind f, const std::string& cls) {
  auto lat = make_lattice(q);
  auto m = std::make_shared<FunctorModel>(lat, f);
  auto sys = system_from_functor(m, SectionClass::parse(cls));
  return analyze_eta(inverse_limit(sys)).iso();
}

inline void sigma_check(const GroupContext& g, Sink& out, FunctorKind f) {
  auto model = std::make_shared<FunctorModel>(g.lattice, f);
  LimitData d = limit_for(g, model, "E");
  const CoefficientSystem& sys = *d.sys;
  Int order = g.order();
  auto check = [&](SigmaReading r, json* witness) {
    for (std::size_t k = 0; k < d.lim.generators(); ++k) {
      LimitElement u = d.lim.basis_element(k);
      LimitElement back = unit_eta(sys, sigma_retraction(sys, u, r));
      Vector want = order * d.lim.flatten(u);
      if (d.lim.flatten(back) == want) continue;
      if (witness) {
        std::vector<Vector> cols;
        for (std::size_t c = 0; c < d.lim.dimension; ++c)
          cols.push_back(d.lim.flatten(unit_eta(sys, sigma_retraction(sys, d.lim.unflatten(unit_vector(d.lim.dimension, c)), r))));
        *witness = product_witness(Matrix::from_columns(cols, d.lim.dimension), d.lim.flatten(u), want);
      }
      return false;
    }
    return true;
  };
  SigmaReading other = g.cfg->reading == SigmaReading::Subsection ? SigmaReading::Section : SigmaReading::Subsection;
  json w;
  bool ok = check(g.cfg->reading, &w);
  bool alt = check(other, nullptr);
  json data = {{"reading", reading_name(g.cfg->reading)},
               {"limit_rank", d.lim.generators()},
               {"alternative", {{"reading", reading_name(other)}, {"holds", alt}}}};
  out.add("main.sigma-retraction", functor_name(f) + "/E", ok, data, w);
}

inline void run_main(const GroupContext& g, Sink& out) {
  const SubgroupLattice& l = *g.lattice;
  FunctorKind f = parse_functor(g.cfg->functor);
  auto model = std::make_shared<FunctorModel>(g.lattice, f);
  std::vector<std::string> classes{"E", "E3", "X", "X3"};
  if (!g.cfg->cls.empty()) classes = {g.cfg->cls};
  std::map<std::string, LimitData> lims;
  std::map<std::string, EtaAnalysis> etas;
  std::string fname = functor_name(f);
  for (const auto& c : classes) {
    LimitData d = limit_for(g, model, c);
    auto re = reverify_limit(d.lim, true, 1);
    json w;
    if (!re.ok) w = values_witness(re.witness, "all conditions hold");
    out.add("main.limit-reverify", fname + "/" + c, re.ok,
            {{"sections", d.sys->size()}, {"generators", d.lim.generators()}, {"checks", re.checks},
             {"solver", d.lim.solver}, {"scope", kScopeNote}},
            w);
    EtaAnalysis a = analyze_eta(d.lim);
    auto cls = SectionClass::parse(c);
    json data = eta_json(a);
    data["rank_F"] = model->rank(model->top());
    data["limit_rank"] = d.lim.generators();
    data["scope"] = kScopeNote;
    if (cls.extraspecial) {
      out.add("main.unit-iso", fname + "/" + c, a.iso(), data, a.iso() ? json() : eta_witness(a, d.lim, true));
    } else {
      out.add("main.unit-injective", fname + "/" + c, a.injective, data, a.injective ? json() : eta_witness(a, d.lim, false));
    }
    if (cls.unbounded()) {
      json w2;
      if (a.cokernel.free_rank) {
        w2 = eta_witness(a, d.lim, true);
      } else {
        for (const Int& t : a.cokernel.torsion)
          if (Int(g.order()) % t != 0) w2 = values_witness(io::int_json(Int(g.order()) % t), 0);
      }
      out.add("main.torsion-cokernel", fname + "/" + c, w2.is_null(),
              {{"cokernel", invariants_json(a.cokernel)}, {"order", g.order()}, {"scope", kScopeNote}}, w2);
    }
    lims.emplace(c, std::move(d));
    etas.emplace(c, std::move(a));
  }

  if (g.order() <= g.cfg->sigma_max_order && (g.cfg->cls.empty() || g.cfg->cls == "E")) {
    sigma_check(g, out, f);
    if (f != FunctorKind::B) sigma_check(g, out, FunctorKind::B);
  }

  if (lims.count("X") && lims.count("X3")) {
    bool premise_x = etas.at("X").iso();
    json types = json::object();
    bool premises = premise_x;
    std::set<std::string> seen;
    auto X = SectionClass::parse("X");
    for (Section s : lims.at("X").sys->sections) {
      auto lab = l.section_label(s.T, s.S);
      if (!X.admits(lab) || !seen.insert(lab.str()).second) continue;
      bool iso = eta_iso_on(l.quotient(s.T, s.S).group, f, "X3");
      types[lab.str()] = iso;
      premises = premises && iso;
    }
    bool conclusion = etas.at("X3").iso();
    bool ok = !premises || conclusion;
    out.add("main.reduction-x3", fname + "/X->X3", ok,
            {{"premise_eta_X", premise_x}, {"premise_eta_X3_on_types", types}, {"conclusion_eta_X3", conclusion},
             {"scope", kScopeNote}},
            ok ? json() : values_witness(premises, conclusion));
  }

  for (auto [y, z] : {std::pair<std::string, std::string>{"X", "X3"}, {"X", "E"}, {"E", "E3"}, {"X3", "E3"}}) {
    if (!lims.count(y) || !lims.count(z)) continue;
    const LimitData& dy = lims.at(y);
    const LimitData& dz = lims.at(z);
    int rf = model->rank(model->top());
    json w;
    for (int j = 0; j < rf && w.is_null(); ++j) {
      Vector f0 = unit_vector(rf, j);
      auto lhs = project_pi(*dy.sys, *dz.sys, unit_eta(*dy.sys, f0));
      auto rhs = unit_eta(*dz.sys, f0);
      if (lhs != rhs) w = values_witness(io::vector_json(dz.lim.flatten(lhs)), io::vector_json(dz.lim.flatten(rhs)));
    }
    // pi on limits, in generator coordinates.
    Matrix pi(dz.lim.generators(), dy.lim.generators());
    for (std::size_t k = 0; k < dy.lim.generators() && w.is_null(); ++k) {
      auto c = dz.lim.coordinates(project_pi(*dy.sys, *dz.sys, dy.lim.basis_element(k)));
      if (!c) {
        w = nonmember_witness(dz.lim.lattice.basis_vectors(), dz.lim.flatten(project_pi(*dy.sys, *dz.sys, dy.lim.basis_element(k))));
        break;
      }
      for (std::size_t i = 0; i < c->size(); ++i) pi(i, k) = (*c)[i];
    }
    bool injective = w.is_null() && integer_kernel(pi).rank() == 0;
    bool smaller_injective = etas.at(z).injective;
    if (w.is_null() && smaller_injective && !injective) w = kernel_witness(pi, integer_kernel(pi).basis().row(0));
    out.add("main.projection-natural", fname + "/" + y + "->" + z, w.is_null(),
            {{"pi_injective", injective}, {"eta_" + z + "_injective", smaller_injective}, {"scope", kScopeNote}}, w);
  }
}

// ---------------------------------------------------------------------------------------------
// probe

inline void run_probe(const GroupContext& g, Sink& out) {
  auto model = std::make_shared<FunctorModel>(g.lattice, FunctorKind::K);
  LimitData d{};
  SystemPtr sys = g.cache ? g.cache->system(model, SectionClass::parse("X"), {true, true, true, 1})
                          : system_from_functor(model, SectionClass::parse("X"), {true, true, true, 1});
  DirectLimit dl = colimit(sys);
  CounitAnalysis a = analyze_counit(dl);
  json w;
  if (!a.surjective) {
    Matrix c = counit_matrix(dl);
    auto cols = c.transpose().row_vectors();
    w = containment_witness(cols, IntegerLattice::span(c.rows(), cols), IntegerLattice::full(c.rows()));
  }
  out.add("probe.counit-surjective", "K/X", a.surjective,
          {{"cokernel", invariants_json(a.cokernel)}, {"colimit", invariants_json(a.colimit)}, {"sections", sys->size()}}, w);
  json data = {{"M", invariants_json(a.kernel)}, {"M_is_zero", a.kernel.is_zero()}};
  if (a.kernel.is_finite()) data["M_order"] = io::int_json(a.kernel.order());
  out.add("probe.m-finite", "K/X", a.kernel.is_finite(), data,
          a.kernel.is_finite() ? json() : values_witness(a.kernel.free_rank, 0));
}

// ---------------------------------------------------------------------------------------------
// appendix

// Counts cases and keeps the first failure.
struct Tally {
  std::size_t cases = 0;
  json failure;
  std::string failing_case;

  bool failed() const { return !failure.is_null(); }
  void record(const std::string& label, json w) {
    ++cases;
    if (!w.is_null() && !failed()) {
      failure = std::move(w);
      failing_case = label;
    }
  }
};

inline std::vector<Element> sorted(std::vector<Element> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// (T^u)^x = T^(ux).
inline json check_transport_right(const ConcreteBiset& U, int u, const std::vector<Element>& t, Element x) {
  const FiniteGroup& P = U.right_group();
  auto a = right_transporter(U, t, u);
  std::vector<char> in(P.order(), 0);
  for (Element y : a) in[y] = 1;
  std::vector<Element> expected;
  for (Element y = 0; y < P.order(); ++y)
    if (in[P.conj(x, y)]) expected.push_back(y);
  auto got = right_transporter(U, t, U.act_right(u, x));
  return got == expected ? json() : values_witness(got, expected);
}

// y(uX) = (yu)X.
inline json check_transport_left(const ConcreteBiset& U, int u, const std::vector<Element>& xs, Element y) {
  const FiniteGroup& Q = U.left_group();
  std::vector<Element> expected;
  for (Element a : left_transporter(U, u, xs)) expected.push_back(Q.conj(y, a));
  expected = sorted(expected);
  auto got = left_transporter(U, U.act_left(y, u), xs);
  return got == expected ? json() : values_witness(got, expected);
}

// For a section (T,S) of Q: (T^u, S^u) is a section of P and x S^u -> t N with t u = u x is an
// isomorphism T^u/S^u -> (T n uP)/N, N = (S n uP)(T n u1); also |T^u/S^u| = |(T n uP)S / (T n u1)S|.
inline json check_transport_section(const ConcreteBiset& U, int u, const std::vector<Element>& tm,
                                    const std::vector<Element>& sm) {
  const FiniteGroup& Q = U.left_group();
  const FiniteGroup& P = U.right_group();
  auto fail = [](const std::string& what) { return values_witness(what, "holds"); };
  auto tu = right_transporter(U, tm, u), su = right_transporter(U, sm, u);
  std::vector<char> in_tu(P.order(), 0), in_su(P.order(), 0);
  for (Element x : tu) in_tu[x] = 1;
  for (Element x : su) in_su[x] = 1;
  for (Element x : su)
    if (!in_tu[x]) return fail("S^u is contained in T^u");
  for (Element x : tu)
    for (Element s : su)
      if (!in_su[P.conj(x, s)]) return fail("S^u is normal in T^u");
  std::vector<char> in_t(Q.order(), 0), in_s(Q.order(), 0), in_up(Q.order(), 0), in_u1(Q.order(), 0);
  for (Element y : tm) in_t[y] = 1;
  for (Element y : sm) in_s[y] = 1;
  std::vector<Element> all_p(P.order());
  std::iota(all_p.begin(), all_p.end(), 0);
  for (Element y : left_transporter(U, u, all_p)) in_up[y] = 1;
  for (Element y : left_transporter(U, u, {0})) in_u1[y] = 1;
  std::vector<char> in_n(Q.order(), 0);
  for (Element a : sm)
    if (in_up[a])
      for (Element b : tm)
        if (in_u1[b]) in_n[Q.mul(a, b)] = 1;
  for (Element a = 0; a < Q.order(); ++a)
    if (in_n[a])
      for (Element b = 0; b < Q.order(); ++b)
        if (in_n[b] && !in_n[Q.mul(a, b)]) return fail("N is a subgroup");
  // t(x) and the full fibres.
  std::vector<Element> rep(P.order(), -1);
  std::vector<char> reached(Q.order(), 0);
  for (Element x : tu) {
    int ux = U.act_right(u, x);
    for (Element t : tm) {
      if (U.act_left(t, u) != ux) continue;
      reached[t] = 1;
      if (rep[x] == -1) rep[x] = t;
      else if (!in_n[Q.mul(Q.inv(rep[x]), t)]) return fail("coset map is well defined");
    }
    if (rep[x] == -1) return fail("every x in T^u has some t with t u = u x");
  }
  for (Element x1 : tu)
    for (Element x2 : tu) {
      Element a = Q.mul(rep[x1], rep[x2]);
      if (!in_n[Q.mul(Q.inv(rep[P.mul(x1, x2)]), a)]) return fail("coset map is a homomorphism");
    }
  for (Element x : tu)
    if ((in_n[rep[x]] != 0) != (in_su[x] != 0)) return fail("kernel is S^u");
  for (Element y = 0; y < Q.order(); ++y)
    if ((in_t[y] && in_up[y]) != (reached[y] != 0)) return fail("image is T n uP");
  auto product_set = [&](const std::vector<char>& a) {
    std::vector<char> out(Q.order(), 0);
    for (Element x = 0; x < Q.order(); ++x)
      if (a[x])
        for (Element s : sm) out[Q.mul(x, s)] = 1;
    return static_cast<long long>(std::count(out.begin(), out.end(), 1));
  };
  std::vector<char> t_up(Q.order(), 0), t_u1(Q.order(), 0);
  for (Element y : tm) {
    t_up[y] = in_up[y];
    t_u1[y] = in_u1[y];
  }
  long long big = product_set(t_up), small = product_set(t_u1);
  long long lhs = static_cast<long long>(tu.size() / su.size());
  if (big % small != 0 || big / small != lhs) return values_witness(lhs, big / std::max(1LL, small));
  return nullptr;
}

// The mirrored statement through the opposite biset, plus uX = X^u in the opposite.
inline json check_transport_section_mirror(const ConcreteBiset& U, const ConcreteBiset& Uop, int u,
                                           const std::vector<Element>& ym, const std::vector<Element>& xm) {
  auto a = left_transporter(U, u, xm), b = right_transporter(Uop, xm, u);
  if (a != b) return values_witness(a, b);
  auto c = left_transporter(U, u, ym), d = right_transporter(Uop, ym, u);
  if (c != d) return values_witness(c, d);
  return check_transport_section(Uop, u, ym, xm);
}

inline json check_transport_compose(const ConcreteBiset& V, const ConcreteBiset& U, const Composite& c, int v, int u,
                                    const std::vector<Element>& xm, const std::vector<Element>& zm) {
  int w = c.pair_to_point[static_cast<std::size_t>(v) * U.size() + u];
  auto a = left_transporter(V, v, left_transporter(U, u, xm));
  auto b = left_transporter(c.biset, w, xm);
  if (a != b) return values_witness(a, b);
  auto d = right_transporter(U, right_transporter(V, zm, v), u);
  auto e = right_transporter(c.biset, zm, w);
  if (d != e) return values_witness(d, e);
  return nullptr;
}

// Elements of Q acting trivially on the right of C\V.
inline std::vector<char> trivial_on_quotient(const ConcreteBiset& cv) {
  const FiniteGroup& Q = cv.right_group();
  std::vector<char> ok(Q.order(), 1);
  for (Element q = 0; q < Q.order(); ++q)
    for (int w = 0; w < cv.size() && ok[q]; ++w)
      if (cv.act_right(w, q) != w) ok[q] = 0;
  return ok;
}

struct FacileSide {
  Embedded d;
  Quotient dc;
  std::vector<Element> proj_local;
  ConcreteBiset cv;
};

inline FacileSide facile_left(const SubgroupLattice& lr, const ConcreteBiset& V, int dsub, int csub) {
  FacileSide f{lr.subgroup_group(dsub), lr.quotient(dsub, csub), {}, regular_biset(V.left_ptr())};
  for (Element x : f.d.embed) f.proj_local.push_back(f.dc.proj[x]);
  f.cv = left_quotient(restrict_left(V, f.d.group, f.d.embed), f.dc.group, f.proj_local);
  return f;
}

inline json check_facile(const SubgroupLattice& lq, const ConcreteBiset& V, const ConcreteBiset& U, const FacileSide& side,
                         int bsub, int asub) {
  Embedded be = lq.subgroup_group(bsub);
  Quotient ba = lq.quotient(bsub, asub);
  std::vector<Element> projb;
  for (Element x : be.embed) projb.push_back(ba.proj[x]);
  ConcreteBiset cvb = restrict_right(side.cv, be.group, be.embed);
  ConcreteBiset ub = restrict_left(U, be.group, be.embed);
  ConcreteBiset au = left_quotient(ub, ba.group, projb);
  ConcreteBiset au_on_b = compose(inflation_biset(be.group, ba.group, projb), au);
  ConcreteBiset lhs = compose(cvb, au_on_b);
  ConcreteBiset vu = compose(restrict_right(V, be.group, be.embed), ub);
  ConcreteBiset rhs = left_quotient(restrict_left(vu, side.d.group, side.d.embed), side.dc.group, side.proj_local);
  if (is_biset_iso(lhs, rhs)) return nullptr;
  return values_witness(json{{"points", lhs.size()}, {"orbits", orbit_decompose(lhs)}},
                        json{{"points", rhs.size()}, {"orbits", orbit_decompose(rhs)}});
}

inline std::vector<Section> all_sections(const SubgroupLattice& l) {
  std::vector<Section> out;
  for (int t = 0; t < l.size(); ++t)
    for (int s = 0; s < l.size(); ++s)
      if (l.contains(t, s) && l.is_section(t, s)) out.push_back({t, s});
  return out;
}

// Functor-level data for one group reached by the family.
struct Side {
  LatticePtr lat;
  FunctorModelPtr model;
  SystemPtr sys;
  InverseLimit lim;
};

class SidePool {
 public:
  SidePool(LatticePool& lats, FunctorKind f, std::string cls) : lats_(lats), f_(f), cls_(std::move(cls)) {}
  const Side& get(const GroupPtr& g) {
    auto it = sides_.find(g.get());
    if (it != sides_.end()) return it->second;
    Side s;
    s.lat = lats_.get(g);
    s.model = std::make_shared<FunctorModel>(s.lat, f_);
    s.sys = system_from_functor(s.model, SectionClass::parse(cls_));
    s.lim = inverse_limit(s.sys);
    keep_.push_back(g);
    return sides_.emplace(g.get(), std::move(s)).first->second;
  }
  void put(const GroupPtr& g, Side s) {
    keep_.push_back(g);
    sides_.emplace(g.get(), std::move(s));
  }

 private:
  LatticePool& lats_;
  FunctorKind f_;
  std::string cls_;
  std::map<const FiniteGroup*, Side> sides_;
  std::vector<GroupPtr> keep_;
};

inline json limit_mismatch(const Side& q, const LimitElement& a, const LimitElement& b) {
  return values_witness(io::vector_json(q.lim.flatten(a)), io::vector_json(q.lim.flatten(b)));
}

struct PairIndex {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (V, U) with V.right == U.left
};

inline PairIndex composable_pairs(const std::vector<NamedBiset>& fam) {
  PairIndex out;
  for (std::size_t v = 0; v < fam.size(); ++v)
    for (std::size_t u = 0; u < fam.size(); ++u)
      if (fam[v].biset.right_ptr() == fam[u].biset.left_ptr()) out.pairs.emplace_back(v, u);
  return out;
}

inline json tally_data(const Tally& t, bool exhaustive, json extra = json::object()) {
  extra["mode"] = exhaustive ? "exhaustive" : "sampled";
  extra["cases"] = t.cases;
  if (t.failed()) extra["failing_case"] = t.failing_case;
  return extra;
}

inline void run_appendix(const GroupContext& g, Sink& out) {
  const SubgroupLattice& l = *g.lattice;
  auto fam = elementary_family(l);
  auto pairs = composable_pairs(fam).pairs;
  LatticePool lats;
  lats.put(g.lattice);
  auto subgroups_of = [&](const GroupPtr& grp) {
    auto lat = lats.get(grp);
    std::vector<const std::vector<Element>*> out;
    for (int i = 0; i < lat->size(); ++i) out.push_back(&lat->members(i));
    return out;
  };
  bool ex = g.exhaustive;
  std::size_t budget = g.samples;
  std::string fam_scope = "elementary bisets of " + g.descriptor;

  // transport-conj
  {
    Tally t;
    auto rng = g.rng("appendix.transport-conj");
    auto one = [&](std::size_t i, int u, std::size_t ti, Element x, std::size_t xi, Element y) {
      const ConcreteBiset& U = fam[i].biset;
      auto tq = subgroups_of(U.left_ptr());
      auto xp = subgroups_of(U.right_ptr());
      std::string lab = fam[i].name + " u=" + std::to_string(u);
      t.record(lab + " T=" + std::to_string(ti) + " x=" + std::to_string(x), check_transport_right(U, u, *tq[ti], x));
      t.record(lab + " X=" + std::to_string(xi) + " y=" + std::to_string(y), check_transport_left(U, u, *xp[xi], y));
    };
    if (ex) {
      for (std::size_t i = 0; i < fam.size(); ++i) {
        const ConcreteBiset& U = fam[i].biset;
        auto tq = subgroups_of(U.left_ptr());
        auto xp = subgroups_of(U.right_ptr());
        for (int u = 0; u < U.size(); ++u) {
          for (std::size_t ti = 0; ti < tq.size(); ++ti)
            for (Element x = 0; x < U.right_group().order(); ++x)
              t.record(fam[i].name, check_transport_right(U, u, *tq[ti], x));
          for (std::size_t xi = 0; xi < xp.size(); ++xi)
            for (Element y = 0; y < U.left_group().order(); ++y)
              t.record(fam[i].name, check_transport_left(U, u, *xp[xi], y));
        }
      }
    } else {
      while (t.cases < budget) {
        std::size_t i = pick(rng, fam.size());
        const ConcreteBiset& U = fam[i].biset;
        one(i, static_cast<int>(pick(rng, U.size())), pick(rng, subgroups_of(U.left_ptr()).size()),
            static_cast<Element>(pick(rng, U.right_group().order())), pick(rng, subgroups_of(U.right_ptr()).size()),
            static_cast<Element>(pick(rng, U.left_group().order())));
      }
    }
    out.add("appendix.transport-conj", fam_scope, !t.failed(), tally_data(t, ex), t.failure);
  }

  // transport-section
  {
    Tally t;
    auto rng = g.rng("appendix.transport-section");
    std::vector<ConcreteBiset> ops;
    for (const auto& nb : fam) ops.push_back(opposite(nb.biset));
    auto one = [&](std::size_t i, int u, Section qs, Section ps) {
      const ConcreteBiset& U = fam[i].biset;
      auto lq = lats.get(U.left_ptr());
      auto lp = lats.get(U.right_ptr());
      std::string lab = fam[i].name + " u=" + std::to_string(u);
      t.record(lab + " (T,S)=(" + std::to_string(qs.T) + "," + std::to_string(qs.S) + ")",
               check_transport_section(U, u, lq->members(qs.T), lq->members(qs.S)));
      t.record(lab + " (Y,X)=(" + std::to_string(ps.T) + "," + std::to_string(ps.S) + ")",
               check_transport_section_mirror(U, ops[i], u, lp->members(ps.T), lp->members(ps.S)));
    };
    if (ex) {
      for (std::size_t i = 0; i < fam.size(); ++i) {
        const ConcreteBiset& U = fam[i].biset;
        auto sq = all_sections(*lats.get(U.left_ptr()));
        auto sp = all_sections(*lats.get(U.right_ptr()));
        auto lq = lats.get(U.left_ptr());
        auto lp = lats.get(U.right_ptr());
        for (int u = 0; u < U.size(); ++u) {
          for (Section s : sq) t.record(fam[i].name, check_transport_section(U, u, lq->members(s.T), lq->members(s.S)));
          for (Section s : sp)
            t.record(fam[i].name, check_transport_section_mirror(U, ops[i], u, lp->members(s.T), lp->members(s.S)));
        }
      }
    } else {
      std::map<const FiniteGroup*, std::vector<Section>> secs;
      auto sections_of = [&](const GroupPtr& grp) -> const std::vector<Section>& {
        auto it = secs.find(grp.get());
        if (it == secs.end()) it = secs.emplace(grp.get(), all_sections(*lats.get(grp))).first;
        return it->second;
      };
      while (t.cases < budget) {
        std::size_t i = pick(rng, fam.size());
        const ConcreteBiset& U = fam[i].biset;
        const auto& sq = sections_of(U.left_ptr());
        const auto& sp = sections_of(U.right_ptr());
        one(i, static_cast<int>(pick(rng, U.size())), sq[pick(rng, sq.size())], sp[pick(rng, sp.size())]);
      }
    }
    out.add("appendix.transport-section", fam_scope, !t.failed(), tally_data(t, ex), t.failure);
  }

  // transport-compose
  {
    Tally t;
    auto rng = g.rng("appendix.transport-compose");
    std::map<std::size_t, Composite> comps;
    auto composite = [&](std::size_t k) -> const Composite& {
      auto it = comps.find(k);
      if (it == comps.end()) {
        if (!ex && comps.size() > 64) comps.clear();
        it = comps.emplace(k, compose_with_map(fam[pairs[k].first].biset, fam[pairs[k].second].biset)).first;
      }
      return it->second;
    };
    auto one = [&](std::size_t k, int v, int u, std::size_t xi, std::size_t zi) {
      const ConcreteBiset& V = fam[pairs[k].first].biset;
      const ConcreteBiset& U = fam[pairs[k].second].biset;
      auto xp = subgroups_of(U.right_ptr());
      auto zr = subgroups_of(V.left_ptr());
      t.record(fam[pairs[k].first].name + " x " + fam[pairs[k].second].name + " v=" + std::to_string(v) + " u=" +
                   std::to_string(u) + " X=" + std::to_string(xi) + " Z=" + std::to_string(zi),
               check_transport_compose(V, U, composite(k), v, u, *xp[xi], *zr[zi]));
    };
    if (ex) {
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        const ConcreteBiset& V = fam[pairs[k].first].biset;
        const ConcreteBiset& U = fam[pairs[k].second].biset;
        std::size_t nx = subgroups_of(U.right_ptr()).size(), nz = subgroups_of(V.left_ptr()).size();
        for (int v = 0; v < V.size(); ++v)
          for (int u = 0; u < U.size(); ++u)
            for (std::size_t s = 0; s < std::max(nx, nz); ++s) one(k, v, u, s % nx, s % nz);
        comps.erase(k);
      }
    } else {
      while (t.cases < budget) {
        std::size_t k = pick(rng, pairs.size());
        const ConcreteBiset& V = fam[pairs[k].first].biset;
        const ConcreteBiset& U = fam[pairs[k].second].biset;
        one(k, static_cast<int>(pick(rng, V.size())), static_cast<int>(pick(rng, U.size())),
            pick(rng, subgroups_of(U.right_ptr()).size()), pick(rng, subgroups_of(V.left_ptr()).size()));
      }
    }
    out.add("appendix.transport-compose", fam_scope, !t.failed(), tally_data(t, ex), t.failure);
  }

  // facile
  {
    Tally t;
    auto rng = g.rng("appendix.facile");
    auto one = [&](std::size_t k, Section dc, int bsub, int asub) {
      const ConcreteBiset& V = fam[pairs[k].first].biset;
      const ConcreteBiset& U = fam[pairs[k].second].biset;
      auto lr = lats.get(V.left_ptr());
      auto lq = lats.get(U.left_ptr());
      FacileSide side = facile_left(*lr, V, dc.T, dc.S);
      t.record(fam[pairs[k].first].name + " x " + fam[pairs[k].second].name, check_facile(*lq, V, U, side, bsub, asub));
    };
    // (B,A): A normal in B and inside the kernel of the right action on C\V.
    auto admissible = [&](const SubgroupLattice& lq, const std::vector<char>& triv) {
      std::vector<std::pair<int, int>> ba;
      for (int b = 0; b < lq.size(); ++b)
        for (int a = 0; a < lq.size(); ++a) {
          if (!lq.contains(b, a) || !lq.is_normal_in(a, b)) continue;
          bool in = true;
          for (Element x : lq.members(a)) in = in && triv[x];
          if (in) ba.emplace_back(b, a);
        }
      return ba;
    };
    if (ex) {
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        const ConcreteBiset& V = fam[pairs[k].first].biset;
        const ConcreteBiset& U = fam[pairs[k].second].biset;
        auto lr = lats.get(V.left_ptr());
        auto lq = lats.get(U.left_ptr());
        for (int c = 0; c < lr->num_classes(); ++c) {
          int d = lr->class_rep(c);
          for (int cs = 0; cs < lr->size(); ++cs) {
            if (!lr->contains(d, cs) || !lr->is_normal_in(cs, d)) continue;
            FacileSide side = facile_left(*lr, V, d, cs);
            for (auto [b, a] : admissible(*lq, trivial_on_quotient(side.cv))) {
              if (lq->class_rep(lq->class_of(b)) != b) continue;
              t.record(fam[pairs[k].first].name + " x " + fam[pairs[k].second].name, check_facile(*lq, V, U, side, b, a));
            }
          }
        }
      }
    } else {
      while (t.cases < budget) {
        std::size_t k = pick(rng, pairs.size());
        const ConcreteBiset& V = fam[pairs[k].first].biset;
        const ConcreteBiset& U = fam[pairs[k].second].biset;
        auto lr = lats.get(V.left_ptr());
        auto lq = lats.get(U.left_ptr());
        auto secs = all_sections(*lr);
        Section dc = secs[pick(rng, secs.size())];
        FacileSide side = facile_left(*lr, V, dc.T, dc.S);
        auto ba = admissible(*lq, trivial_on_quotient(side.cv));
        auto [b, a] = ba[pick(rng, ba.size())];
        one(k, dc, b, a);
      }
    }
    out.add("appendix.facile", fam_scope, !t.failed(), tally_data(t, ex), t.failure);
  }

  // Limit-level claims, for K* over X3 and, at exhaustive sizes, for B over X3.
  std::vector<FunctorKind> kinds{FunctorKind::Kdual};
  if (ex) kinds.push_back(FunctorKind::B);
  for (FunctorKind f : kinds) {
    std::string scope = functor_name(f) + "/X3";
    SidePool sides(lats, f, "X3");
    {
      auto model = std::make_shared<FunctorModel>(g.lattice, f);
      LimitData d = limit_for(g, model, "X3");
      sides.put(g.group, Side{g.lattice, model, d.sys, d.lim});
    }
    const Side& top = sides.get(g.group);
    std::size_t gens = top.lim.generators();

    // section-biset
    {
      Tally t;
      auto rng = g.rng("appendix.section-biset/" + scope);
      std::vector<int> idx;
      for (std::size_t i = 0; i < top.sys->size(); ++i) idx.push_back(static_cast<int>(i));
      auto one = [&](int i, std::size_t k) {
        Section s = top.sys->sections[i];
        Quotient q = l.quotient(s.T, s.S);
        ConcreteBiset sb = section_biset(l, s, q);
        const Side& qs = sides.get(q.group);
        LimitElement lk = top.lim.basis_element(k);
        LimitElement a = biset_act_limit(sb, *top.sys, *qs.sys, lk);
        const SubgroupLattice& lq = *qs.lat;
        for (std::size_t j = 0; j < qs.sys->size(); ++j) {
          Section sq = qs.sys->sections[j];
          auto preimage = [&](int sub) {
            std::vector<Element> m;
            for (Element x : l.members(s.T))
              if (lq.has_element(sub, q.proj[x])) m.push_back(x);
            return l.find(m);
          };
          Section back{preimage(sq.T), preimage(sq.S)};
          if (a[j] != lk[top.sys->at(back)]) {
            t.record(section_str(l, s), values_witness(io::vector_json(a[j]), io::vector_json(lk[top.sys->at(back)])));
            return;
          }
        }
        t.record(section_str(l, s), nullptr);
      };
      if (ex) {
        for (int i : idx)
          for (std::size_t k = 0; k < gens; ++k) one(i, k);
      } else {
        std::vector<int> live;
        for (int i : idx)
          if (top.sys->rank(i) > 0) live.push_back(i);
        while (t.cases < budget && gens && !live.empty()) one(live[pick(rng, live.size())], pick(rng, gens));
      }
      out.add("appendix.section-biset", scope, !t.failed(), tally_data(t, ex), t.failure);
    }

    // action-in-limit and action-identity
    {
      Tally in_limit, identity;
      auto rng = g.rng("appendix.action-in-limit/" + scope);
      auto one = [&](std::size_t i, std::size_t k) {
        const ConcreteBiset& U = fam[i].biset;
        const Side& p = sides.get(U.right_ptr());
        const Side& q = sides.get(U.left_ptr());
        LimitElement lk = p.lim.basis_element(k);
        LimitElement a = biset_act_limit(U, *p.sys, *q.sys, lk, ActionMethod::Elementary);
        json w;
        if (!q.lim.contains(a)) w = nonmember_witness(q.lim.lattice.basis_vectors(), q.lim.flatten(a));
        if (w.is_null()) {
          LimitElement c = biset_act_limit(U, *p.sys, *q.sys, lk, ActionMethod::Concrete);
          if (c != a) w = limit_mismatch(q, a, c);
        }
        in_limit.record(fam[i].name + " basis " + std::to_string(k), w);
        if (fam[i].name == "id") identity.record("basis " + std::to_string(k), a == lk ? json() : limit_mismatch(q, a, lk));
      };
      std::size_t pgens = gens;
      if (ex) {
        for (std::size_t i = 0; i < fam.size(); ++i)
          for (std::size_t k = 0; k < sides.get(fam[i].biset.right_ptr()).lim.generators(); ++k) one(i, k);
      } else {
        std::vector<std::size_t> live;
        for (std::size_t i = 0; i < fam.size(); ++i)
          if (sides.get(fam[i].biset.right_ptr()).lim.generators()) live.push_back(i);
        while (in_limit.cases < budget && !live.empty()) {
          std::size_t i = live[pick(rng, live.size())];
          one(i, pick(rng, sides.get(fam[i].biset.right_ptr()).lim.generators()));
        }
        auto rng2 = g.rng("appendix.action-identity/" + scope);
        while (identity.cases < budget && pgens) one(0, pick(rng2, pgens));
      }
      out.add("appendix.action-in-limit", scope, !in_limit.failed(), tally_data(in_limit, ex), in_limit.failure);
      out.add("appendix.action-identity", scope, !identity.failed(), tally_data(identity, ex), identity.failure);
    }

    // action-composition
    {
      Tally t;
      auto rng = g.rng("appendix.action-composition/" + scope);
      auto one = [&](std::size_t k, std::size_t b) {
        const ConcreteBiset& V = fam[pairs[k].first].biset;
        const ConcreteBiset& U = fam[pairs[k].second].biset;
        const Side& p = sides.get(U.right_ptr());
        const Side& q = sides.get(U.left_ptr());
        const Side& r = sides.get(V.left_ptr());
        LimitElement lb = p.lim.basis_element(b);
        LimitElement two = biset_act_limit(V, *q.sys, *r.sys, biset_act_limit(U, *p.sys, *q.sys, lb));
        LimitElement once = biset_act_limit(compose(V, U), *p.sys, *r.sys, lb);
        t.record(fam[pairs[k].first].name + " x " + fam[pairs[k].second].name + " basis " + std::to_string(b),
                 two == once ? json() : limit_mismatch(r, two, once));
      };
      if (ex) {
        for (std::size_t k = 0; k < pairs.size(); ++k)
          for (std::size_t b = 0; b < sides.get(fam[pairs[k].second].biset.right_ptr()).lim.generators(); ++b) one(k, b);
      } else {
        std::vector<std::size_t> live;
        for (std::size_t k = 0; k < pairs.size(); ++k)
          if (sides.get(fam[pairs[k].second].biset.right_ptr()).lim.generators()) live.push_back(k);
        while (t.cases < budget && !live.empty()) {
          std::size_t k = live[pick(rng, live.size())];
          one(k, pick(rng, sides.get(fam[pairs[k].second].biset.right_ptr()).lim.generators()));
        }
      }
      out.add("appendix.action-composition", scope, !t.failed(), tally_data(t, ex), t.failure);
    }
  }

  // adjunction round trips over X3 for three natural families.
  {
    struct Fam {
      std::string name;
      FunctorKind f, g;
      SectionFamily phi;
    };
    std::vector<Fam> fams{
        {"2 id on Kdual", FunctorKind::Kdual, FunctorKind::Kdual,
         [](const SectionModel& m) { return Int(2) * Matrix::identity(m.rank(FunctorKind::Kdual)); }},
        {"K into B", FunctorKind::K, FunctorKind::B, [](const SectionModel& m) { return m.burnside().k_basis().transpose(); }},
        {"Bdual onto Kdual", FunctorKind::Bdual, FunctorKind::Kdual, [](const SectionModel& m) { return m.burnside().k_basis(); }},
    };
    Tally t;
    auto rng = g.rng("appendix.adjunction");
    auto X3 = SectionClass::parse("X3");
    std::size_t active = 0;
    for (const auto& fam_ : fams) {
      FunctorModel m(g.lattice, fam_.f);
      active += m.rank(m.top()) > 0;
    }
    for (const auto& fam_ : fams) {
      auto mf = std::make_shared<FunctorModel>(g.lattice, fam_.f);
      auto mg = std::make_shared<FunctorModel>(g.lattice, fam_.g);
      auto sf = system_from_functor(mf, X3);
      auto sg = system_from_functor(mg, X3);
      auto lg = inverse_limit(sg);
      int r = mf->rank(mf->top());
      if (r == 0) continue;
      Matrix phi_p = fam_.phi(mf->section(mf->top()));
      if (auto bad = check_natural(*sf, *sg, fam_.phi)) {
        t.record(fam_.name, values_witness(*bad, "natural"));
        continue;
      }
      // Systems of F and G on the quotient of section i; no structure maps are needed there.
      std::map<int, std::pair<SystemPtr, SystemPtr>> quotient_systems;
      auto qsys = [&](int i) -> const std::pair<SystemPtr, SystemPtr>& {
        auto it = quotient_systems.find(i);
        if (it != quotient_systems.end()) return it->second;
        auto ql = make_lattice(mf->section(sf->sections[i]).quotient().group);
        SystemOptions none{false, false, false, 1};
        auto qf = system_from_functor(std::make_shared<FunctorModel>(ql, fam_.f), X3, none);
        auto qg = system_from_functor(std::make_shared<FunctorModel>(ql, fam_.g), X3, none);
        return quotient_systems.emplace(i, std::make_pair(qf, qg)).first->second;
      };
      bool top_in_class = sf->find(mf->top()) >= 0;
      struct AtBasis {
        LimitElement psi, df;
      };
      std::map<int, AtBasis> done;
      auto check_f = [&](int j, const std::vector<int>& secs) {
        Vector f = unit_vector(r, j);
        std::string lab = fam_.name + " basis " + std::to_string(j);
        auto it = done.find(j);
        if (it == done.end()) {
          auto plus = adjunction_plus(*sf, *sg, fam_.phi, f, false);
          json w;
          if (!lg.contains(plus)) w = nonmember_witness(lg.lattice.basis_vectors(), lg.flatten(plus));
          else if (top_in_class && adjunction_minus(*sg, plus) != phi_p.apply(f))
            w = product_witness(phi_p, f, adjunction_minus(*sg, plus));
          t.record(lab + " phi+ at P", w);
          it = done.emplace(j, AtBasis{unit_eta(*sg, phi_p.apply(f)), unit_eta(*sf, f)}).first;
        }
        const LimitElement& psi = it->second.psi;
        const LimitElement& df = it->second.df;
        for (int i : secs) {
          if (sf->rank(i) == 0) continue;
          const auto& [qf, qg] = qsys(i);
          std::string at = " at " + section_str(l, sf->sections[i]);
          Matrix phi_q = fam_.phi(qf->model->section(qf->model->top()));
          // (phi+)- = phi on the quotient T/S, evaluated at Defres f.
          Vector minus = adjunction_minus(*qg, adjunction_plus(*qf, *qg, fam_.phi, df[i], false));
          t.record(lab + " (phi+)-" + at, minus == phi_q.apply(df[i]) ? json() : product_witness(phi_q, df[i], minus));
          // (psi-)+ = psi for psi = eta_G o phi.
          Vector at_q = adjunction_minus(*qg, unit_eta(*qg, phi_q.apply(df[i])));
          t.record(lab + " (psi-)+" + at,
                   at_q == psi[i] ? json() : values_witness(io::vector_json(at_q), io::vector_json(psi[i])));
        }
      };
      std::vector<int> all;
      for (std::size_t i = 0; i < sf->size(); ++i)
        if (sf->rank(static_cast<int>(i)) > 0) all.push_back(static_cast<int>(i));
      if (ex) {
        for (int j = 0; j < r; ++j) check_f(j, all);
      } else {
        std::size_t stop = t.cases + budget / active + 1;
        while (t.cases < stop && !all.empty()) check_f(static_cast<int>(pick(rng, r)), {all[pick(rng, all.size())]});
      }
    }
    out.add("appendix.adjunction", "X3", !t.failed(), tally_data(t, ex), t.failure);
  }
}

// ---------------------------------------------------------------------------------------------
// orchestration

using CampaignBody = std::function<void(const GroupContext&, Sink&)>;

inline CampaignBody campaign_body(const std::string& name) {
  if (name == "induction") return run_induction;
  if (name == "exact") return run_exact;
  if (name == "main") return run_main;
  if (name == "probe") return run_probe;
  if (name == "appendix") return run_appendix;
  throw std::invalid_argument("unknown campaign '" + name + "'");
}

inline std::vector<std::string> run_groups(const RunConfig& cfg) {
  if (!cfg.groups.empty()) return cfg.groups;
  return catalog_descriptors(cfg.p, cfg.max_order);
}

struct RunResult {
  std::vector<Report> reports;
  int exit_code = 0;
};

inline int exit_code_for(const std::vector<Report>& reports) {
  bool refuted = false, skipped = false;
  for (const auto& r : reports) {
    refuted = refuted || r.status == Status::Refuted;
    skipped = skipped || r.status == Status::Skipped;
  }
  return refuted ? 2 : skipped ? 3 : 0;
}

inline void sort_reports(std::vector<Report>& reports) {
  std::stable_sort(reports.begin(), reports.end(), [](const Report& a, const Report& b) {
    return std::tie(a.campaign, a.claim, a.group, a.scope) < std::tie(b.campaign, b.claim, b.group, b.scope);
  });
}

inline RunResult run_campaigns(const RunConfig& cfg, const std::vector<std::string>& campaigns) {
  if (cfg.p < 3 || !is_prime(cfg.p)) throw std::invalid_argument("p must be an odd prime");
  auto descs = run_groups(cfg);
  io::Cache cache(cfg.cache_dir);
  std::vector<GroupPtr> groups(descs.size());
  std::vector<std::string> load_error(descs.size());
  for (std::size_t i = 0; i < descs.size(); ++i) {
    try {
      groups[i] = load_group(descs[i], cfg.p);
    } catch (const SizeError& e) {
      load_error[i] = e.what();
    }
  }
  std::size_t per_group = cfg.samples;

  std::vector<std::vector<Report>> parts(descs.size());
  parallel_for(descs.size(), cfg.jobs, [&](std::size_t i) {
    auto skip_all = [&](const std::string& why) {
      for (const auto& c : campaigns)
        for (const auto& id : campaign_claims(c)) {
          Report r;
          r.campaign = c;
          r.claim = id;
          r.group = descs[i];
          r.scope = "-";
          r.status = Status::Skipped;
          r.data = {{"reason", why}};
          parts[i].push_back(std::move(r));
        }
    };
    if (!groups[i]) return skip_all(load_error[i]);
    if (groups[i]->order() > hard_bound(cfg.p))
      return skip_all("order " + std::to_string(groups[i]->order()) + " exceeds the bound " + std::to_string(hard_bound(cfg.p)));
    GroupContext ctx;
    ctx.descriptor = descs[i];
    ctx.group = groups[i];
    ctx.cfg = &cfg;
    ctx.cache = cache.enabled() ? &cache : nullptr;
    ctx.exhaustive = groups[i]->order() <= cfg.exhaustive_order;
    ctx.samples = per_group;
    try {
      ctx.lattice = cache.lattice(groups[i]);
    } catch (const SizeError& e) {
      return skip_all(e.what());
    }
    for (const auto& c : campaigns) {
      Sink sink(ctx, c);
      campaign_body(c)(ctx, sink);
      for (auto& r : sink.reports) parts[i].push_back(std::move(r));
    }
  });
  RunResult res;
  for (auto& p : parts)
    for (auto& r : p) res.reports.push_back(std::move(r));
  sort_reports(res.reports);
  res.exit_code = exit_code_for(res.reports);
  return res;
}

inline json run_json(const std::string& command, const RunConfig& cfg, const RunResult& res) {
  json reports = json::array();
  std::size_t v = 0, r = 0, s = 0;
  for (const auto& rep : res.reports) {
    reports.push_back(report_json(rep, cfg.timings));
    (rep.status == Status::Verified ? v : rep.status == Status::Refuted ? r : s) += 1;
  }
  return {{"schema", "bfk-report/1"},
          {"command", command},
          {"config", config_json(cfg)},
          {"reports", reports},
          {"summary", {{"verified", v}, {"refuted", r}, {"skipped", s}}},
          {"exit_code", res.exit_code}};
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string run_csv(const RunConfig& cfg, const RunResult& res) {
  std::ostringstream os;
  os << "campaign,claim,group,scope,status,witness_confirmed,data";
  if (cfg.timings) os << ",seconds";
  os << "\n";
  for (const auto& r : res.reports) {
    os << csv_field(r.campaign) << ',' << csv_field(r.claim) << ',' << csv_field(r.group) << ',' << csv_field(r.scope) << ','
       << status_name(r.status) << ',' << (r.status == Status::Refuted ? (r.witness_confirmed ? "true" : "false") : "") << ','
       << csv_field(r.data.dump());
    if (cfg.timings) os << ',' << r.seconds;
    os << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------------------------
// catalog and single limits

inline json catalog_json(const RunConfig& cfg) {
  json groups = json::array();
  for (const auto& d : run_groups(cfg)) {
    GroupPtr g = load_group(d, cfg.p);
    json e = {{"descriptor", d}, {"order", g->order()}, {"fingerprint", io::group_fingerprint(*g)},
              {"label", classify_quotient(*g).str()}, {"abelian", g->is_abelian()}, {"exponent", g->exponent()}};
    if (g->order() > hard_bound(cfg.p)) {
      e["skipped"] = "order exceeds the bound " + std::to_string(hard_bound(cfg.p));
    } else {
      auto l = make_lattice(g);
      int normal = 0;
      for (int i = 0; i < l->size(); ++i) normal += l->is_normal(i);
      e["subgroups"] = l->size();
      e["subgroup_classes"] = l->num_classes();
      e["normal_subgroups"] = normal;
    }
    groups.push_back(e);
  }
  return {{"schema", "bfk-catalog/1"}, {"p", cfg.p}, {"max_order", cfg.max_order}, {"groups", groups}};
}

inline json limit_json(const RunConfig& cfg, const std::string& group, const std::string& cls, const std::string& functor) {
  GroupPtr g = load_group(group, cfg.p);
  if (g->order() > hard_bound(cfg.p)) throw SizeError("order " + std::to_string(g->order()) + " exceeds the bound");
  io::Cache cache(cfg.cache_dir);
  auto lat = cache.lattice(g);
  auto model = std::make_shared<FunctorModel>(lat, parse_functor(functor));
  SystemOptions opt;
  opt.jobs = cfg.jobs;
  auto sys = cache.system(model, SectionClass::parse(cls), opt);
  auto lim = inverse_limit(sys);
  auto re = reverify_limit(lim, true, cfg.jobs);
  json j = {{"schema", "bfk-limit/1"},
            {"group", group},
            {"order", g->order()},
            {"functor", functor_name(model->kind())},
            {"class", cls},
            {"sections", sys->size()},
            {"rank", lim.generators()},
            {"invariants", invariants_json(lim.presentation.invariants())},
            {"hnf_basis", io::matrix_json(lim.lattice.basis())},
            {"reverified", re.ok},
            {"checks", re.checks}};
  if (sys->free()) {
    EtaAnalysis a = analyze_eta(lim);
    json e = eta_json(a);
    e["rank_F"] = model->rank(model->top());
    j["eta"] = e;
  }
  return j;
}

}  // namespace bfk::lab
