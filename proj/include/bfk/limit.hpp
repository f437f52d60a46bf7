#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfk/functor.hpp"
#include "bfk/parallel.hpp"

namespace bfk {

// A structure map between two sections of a coefficient system (target gens x source gens).
struct StructureMap {
  int source = -1;
  int target = -1;
  Matrix matrix;
};

// Values and structure maps over Y(P). Defres and indinf are stored along covering pairs only
// (|T/S| = p |T'/S'|); conjugation along a generating set of P.
struct CoefficientSystem {
  LatticePtr base;
  SectionClass cls;
  std::string functor;   // B, K, Bdual, Kdual or external
  FunctorModelPtr model; // null for external data
  std::vector<Section> sections;
  std::map<Section, int> index;
  std::vector<AbelianPresentation> values;
  std::vector<StructureMap> defres;
  std::vector<Element> conj_generators;
  std::vector<std::vector<StructureMap>> conj;  // [generator][source section]
  std::vector<StructureMap> indinf;
  bool has_indinf = false;

  std::size_t size() const { return sections.size(); }
  int find(Section s) const {
    auto it = index.find(s);
    return it == index.end() ? -1 : it->second;
  }
  int at(Section s) const {
    int i = find(s);
    if (i < 0) throw std::out_of_range("section is not in the coefficient system");
    return i;
  }
  std::size_t rank(int i) const { return values[i].generators(); }
  bool free() const {
    for (const auto& v : values)
      if (!v.is_free()) return false;
    return true;
  }
  // |T/S| of section i.
  long long quotient_order(int i) const {
    return base->order(sections[i].T) / base->order(sections[i].S);
  }
};

using SystemPtr = std::shared_ptr<const CoefficientSystem>;
using LimitElement = std::vector<Vector>;

inline std::string section_str(const SubgroupLattice& l, Section s) {
  return "(T=" + std::to_string(s.T) + "|" + std::to_string(l.order(s.T)) + ", S=" + std::to_string(s.S) + "|" +
         std::to_string(l.order(s.S)) + ")";
}

// Pairs (big, small) of sections in the list with |big| = p |small|, ordered by big then small.
inline std::vector<std::pair<int, int>> covering_pairs(const SubgroupLattice& l, const std::vector<Section>& secs,
                                                       const std::map<Section, int>& index) {
  int p = l.group().prime();
  std::vector<std::pair<int, int>> out;
  for (std::size_t b = 0; b < secs.size(); ++b) {
    Section s = secs[b];
    std::vector<int> smalls;
    for (int s2 : l.subgroups_between(s.S, s.T)) {
      if (l.order(s2) != l.order(s.S) * p) continue;
      auto it = index.find({s.T, s2});
      if (it != index.end()) smalls.push_back(it->second);
    }
    for (int t2 : l.subgroups_between(s.S, s.T)) {
      if (l.order(t2) * p != l.order(s.T)) continue;
      auto it = index.find({t2, s.S});
      if (it != index.end()) smalls.push_back(it->second);
    }
    std::sort(smalls.begin(), smalls.end());
    for (int k : smalls) out.emplace_back(static_cast<int>(b), k);
  }
  return out;
}

struct SystemOptions {
  bool defres = true;
  bool conj = true;
  bool indinf = false;
  int jobs = 1;
};

inline SystemPtr system_from_functor(FunctorModelPtr model, const SectionClass& cls, SystemOptions opt = {}) {
  auto sys = std::make_shared<CoefficientSystem>();
  const SubgroupLattice& l = model->base();
  sys->base = model->base_ptr();
  sys->cls = cls;
  sys->functor = functor_name(model->kind());
  sys->model = model;
  sys->sections = sections_in_class(l, cls);
  for (std::size_t i = 0; i < sys->sections.size(); ++i) sys->index[sys->sections[i]] = static_cast<int>(i);
  std::size_t n = sys->sections.size();

  std::vector<int> ranks(n);
  parallel_for(n, opt.jobs, [&](std::size_t i) { ranks[i] = model->rank(sys->sections[i]); });
  for (int r : ranks) sys->values.emplace_back(static_cast<std::size_t>(r));

  auto pairs = covering_pairs(l, sys->sections, sys->index);
  if (opt.defres) {
    sys->defres.resize(pairs.size());
    parallel_for(pairs.size(), opt.jobs, [&](std::size_t k) {
      auto [b, s] = pairs[k];
      StructureMap m{b, s, Matrix(ranks[s], ranks[b])};
      if (ranks[s] > 0 && ranks[b] > 0) m.matrix = model->defres(sys->sections[b], sys->sections[s]);
      sys->defres[k] = std::move(m);
    });
  }
  sys->has_indinf = opt.indinf;
  if (opt.indinf) {
    sys->indinf.resize(pairs.size());
    parallel_for(pairs.size(), opt.jobs, [&](std::size_t k) {
      auto [b, s] = pairs[k];
      StructureMap m{s, b, Matrix(ranks[b], ranks[s])};
      if (ranks[s] > 0 && ranks[b] > 0) m.matrix = model->indinf(sys->sections[s], sys->sections[b]);
      sys->indinf[k] = std::move(m);
    });
  }
  if (opt.conj) {
    sys->conj_generators = group_generators(l.group());
    std::size_t g = sys->conj_generators.size();
    sys->conj.assign(g, std::vector<StructureMap>(n));
    parallel_for(g * n, opt.jobs, [&](std::size_t k) {
      std::size_t gi = k / n, i = k % n;
      Element x = sys->conj_generators[gi];
      Section src = sys->sections[i];
      Section dst{l.conjugate(x, src.T), l.conjugate(x, src.S)};
      int j = sys->at(dst);
      StructureMap m{static_cast<int>(i), j, Matrix(ranks[j], ranks[i])};
      if (ranks[i] > 0) m.matrix = model->conj(x, src);
      sys->conj[gi][i] = std::move(m);
    });
  }
  return sys;
}

namespace detail {

inline bool maps_equal_mod(const Matrix& a, const Matrix& b, const AbelianPresentation& target) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (std::size_t j = 0; j < a.cols(); ++j)
    if (!target.is_zero(a.column(j) - b.column(j))) return false;
  return true;
}

inline bool is_identity(const StructureMap& m) {
  return m.source == m.target && m.matrix == Matrix::identity(m.matrix.rows());
}

}  // namespace detail

// Structural checks of a coefficient system. Returns a description of the first violation.
// With `full`, also checks commuting diamonds of covering pairs and conj/defres compatibility.
inline std::optional<std::string> validate_system(const CoefficientSystem& sys, bool full = true) {
  const SubgroupLattice& l = *sys.base;
  auto check_map = [&](const StructureMap& m, const char* kind) -> std::optional<std::string> {
    if (m.source < 0 || m.target < 0 || m.source >= static_cast<int>(sys.size()) ||
        m.target >= static_cast<int>(sys.size()))
      return std::string(kind) + ": section index out of range";
    GroupHom h{sys.values[m.source], sys.values[m.target], m.matrix};
    if (m.matrix.rows() != sys.rank(m.target) || m.matrix.cols() != sys.rank(m.source))
      return std::string(kind) + ": matrix shape mismatch at " + section_str(l, sys.sections[m.source]);
    if (!h.well_defined())
      return std::string(kind) + ": map does not respect relations at " + section_str(l, sys.sections[m.source]);
    return std::nullopt;
  };
  for (const auto& m : sys.defres)
    if (auto w = check_map(m, "defres")) return w;
  for (const auto& m : sys.indinf)
    if (auto w = check_map(m, "indinf")) return w;
  for (const auto& row : sys.conj)
    for (const auto& m : row)
      if (auto w = check_map(m, "conj")) return w;
  // Covering-pair bookkeeping must match the section list.
  auto pairs = covering_pairs(l, sys.sections, sys.index);
  if (!sys.defres.empty() && sys.defres.size() != pairs.size()) return std::string("defres: covering pairs missing");
  for (std::size_t k = 0; k < sys.defres.size(); ++k)
    if (sys.defres[k].source != pairs[k].first || sys.defres[k].target != pairs[k].second)
      return "defres: unexpected pair " + section_str(l, sys.sections[sys.defres[k].source]) + " -> " +
             section_str(l, sys.sections[sys.defres[k].target]);
  for (std::size_t g = 0; g < sys.conj.size(); ++g) {
    Element x = sys.conj_generators[g];
    for (std::size_t i = 0; i < sys.size(); ++i) {
      Section s = sys.sections[i];
      if (sys.conj[g][i].target != sys.find({l.conjugate(x, s.T), l.conjugate(x, s.S)}))
        return "conj: wrong target for " + section_str(l, s);
    }
    // Conj_x applied ord(x) times is the identity.
    int ord = l.group().element_order(x);
    for (std::size_t i = 0; i < sys.size(); ++i) {
      if (sys.rank(static_cast<int>(i)) == 0) continue;
      Matrix acc = Matrix::identity(sys.rank(static_cast<int>(i)));
      int cur = static_cast<int>(i);
      for (int k = 0; k < ord; ++k) {
        acc = sys.conj[g][cur].matrix * acc;
        cur = sys.conj[g][cur].target;
      }
      if (cur != static_cast<int>(i) || !detail::maps_equal_mod(acc, Matrix::identity(acc.rows()), sys.values[i]))
        return "conj: x^ord(x) does not act trivially on " + section_str(l, sys.sections[i]);
    }
  }
  if (!full) return std::nullopt;
  std::map<std::pair<int, int>, const StructureMap*> by_pair;
  for (const auto& m : sys.defres) by_pair[{m.source, m.target}] = &m;
  // Diamonds: all covering paths of length two between the same sections agree.
  std::map<std::pair<int, int>, std::vector<Matrix>> two_step;
  for (const auto& m1 : sys.defres)
    for (const auto& m2 : sys.defres)
      if (m2.source == m1.target) two_step[{m1.source, m2.target}].push_back(m2.matrix * m1.matrix);
  for (const auto& [key, mats] : two_step)
    for (std::size_t k = 1; k < mats.size(); ++k)
      if (!detail::maps_equal_mod(mats[k], mats[0], sys.values[key.second]))
        return "defres: transitivity fails from " + section_str(l, sys.sections[key.first]) + " to " +
               section_str(l, sys.sections[key.second]);
  // Conj commutes with defres.
  for (std::size_t g = 0; g < sys.conj.size(); ++g)
    for (const auto& m : sys.defres) {
      const auto& cb = sys.conj[g][m.source];
      const auto& cs = sys.conj[g][m.target];
      auto it = by_pair.find({cb.target, cs.target});
      if (it == by_pair.end()) return std::string("conj: conjugate of a covering pair is missing");
      if (!detail::maps_equal_mod(cs.matrix * m.matrix, it->second->matrix * cb.matrix, sys.values[cs.target]))
        return "conj: does not commute with defres at " + section_str(l, sys.sections[m.source]) + " -> " +
               section_str(l, sys.sections[m.target]);
    }
  return std::nullopt;
}

// Inverse limit as a sublattice of the product of the free covers of the values.
struct InverseLimit {
  SystemPtr system;
  std::vector<std::size_t> offset;
  std::size_t dimension = 0;
  IntegerLattice lattice;
  AbelianPresentation presentation;  // generators are the rows of lattice.basis()
  std::string solver;

  std::size_t generators() const { return lattice.rank(); }

  Vector flatten(const LimitElement& x) const {
    Vector v(dimension);
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t k = 0; k < x[i].size(); ++k) v[offset[i] + k] = x[i][k];
    return v;
  }
  LimitElement unflatten(const Vector& v) const {
    LimitElement x(system->size());
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = Vector(v.begin() + static_cast<long>(offset[i]),
                    v.begin() + static_cast<long>(offset[i] + system->rank(static_cast<int>(i))));
    return x;
  }
  LimitElement element(const Vector& coords) const {
    Vector v(dimension);
    for (std::size_t k = 0; k < coords.size(); ++k)
      if (coords[k] != 0) v = v + coords[k] * lattice.basis().row(k);
    return unflatten(v);
  }
  LimitElement basis_element(std::size_t k) const { return unflatten(lattice.basis().row(k)); }
  std::optional<Vector> coordinates(const LimitElement& x) const { return lattice.coordinates(flatten(x)); }
  bool contains(const LimitElement& x) const { return lattice.member(flatten(x)); }

  // Projection to section i, in limit generator coordinates (rank_i x generators).
  Matrix projection(int i) const {
    std::size_t r = system->rank(i);
    Matrix m(r, generators());
    for (std::size_t k = 0; k < generators(); ++k)
      for (std::size_t a = 0; a < r; ++a) m(a, k) = lattice.basis()(k, offset[i] + a);
    return m;
  }
  // Limit elements as columns in product coordinates.
  Matrix product_matrix() const { return lattice.basis().transpose(); }
};

enum class LimitSolver { Automatic, Structured, General };

namespace detail {

using Expression = std::vector<std::pair<int, Matrix>>;  // (top section, block)

inline Expression scale_expression(const Matrix& a, const Expression& e) {
  Expression out;
  for (const auto& [t, m] : e) {
    Matrix p = a * m;
    if (!p.is_zero()) out.emplace_back(t, std::move(p));
  }
  return out;
}

// Free values: eliminate all sections that are determined by a bigger (or conjugate) one, then
// solve the remaining constraints over the free top variables.
inline InverseLimit solve_structured(const SystemPtr& sp) {
  const CoefficientSystem& sys = *sp;
  std::size_t n = sys.size();
  InverseLimit lim;
  lim.system = sp;
  lim.solver = "structured";
  lim.offset.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    lim.offset[i] = lim.dimension;
    lim.dimension += sys.rank(static_cast<int>(i));
  }

  // Conjugation orbits: least member is the representative, BFS tree edges define the others.
  std::vector<int> rep(n, -1);
  std::vector<std::pair<int, int>> via(n, {-1, -1});
  for (std::size_t i = 0; i < n; ++i) {
    if (rep[i] != -1) continue;
    rep[i] = static_cast<int>(i);
    std::queue<int> q;
    q.push(static_cast<int>(i));
    while (!q.empty()) {
      int j = q.front();
      q.pop();
      for (std::size_t g = 0; g < sys.conj.size(); ++g) {
        int t = sys.conj[g][j].target;
        if (rep[t] != -1) continue;
        rep[t] = static_cast<int>(i);
        via[t] = {static_cast<int>(g), j};
        q.push(t);
      }
    }
  }
  std::vector<int> parent_edge(n, -1);
  for (std::size_t e = 0; e < sys.defres.size(); ++e)
    if (parent_edge[sys.defres[e].target] == -1) parent_edge[sys.defres[e].target] = static_cast<int>(e);

  std::vector<long long> top_offset(n, -1);
  std::size_t ntop = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (sys.rank(static_cast<int>(i)) == 0) continue;
    if (rep[i] == static_cast<int>(i) && parent_edge[i] == -1) {
      top_offset[i] = static_cast<long long>(ntop);
      ntop += sys.rank(static_cast<int>(i));
    }
  }

  std::vector<std::optional<Expression>> expr(n);
  std::function<const Expression&(int)> get = [&](int i) -> const Expression& {
    if (expr[i]) return *expr[i];
    Expression e;
    if (sys.rank(i) == 0) {
    } else if (top_offset[i] >= 0) {
      e.emplace_back(i, Matrix::identity(sys.rank(i)));
    } else if (rep[i] != i) {
      auto [g, src] = via[i];
      e = scale_expression(sys.conj[g][src].matrix, get(src));
    } else {
      const auto& m = sys.defres[parent_edge[i]];
      e = scale_expression(m.matrix, get(m.source));
    }
    expr[i] = std::move(e);
    return *expr[i];
  };
  // Evaluate in order of decreasing quotient size to keep recursion shallow.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return sys.quotient_order(a) > sys.quotient_order(b); });
  for (int i : order) get(i);

  SparseEliminator el(ntop, SparseEliminator::Mode::Kernel);
  auto add_constraint = [&](const StructureMap& m) {
    if (sys.rank(m.target) == 0) return;
    std::map<int, Matrix> acc;
    for (auto& [t, blk] : scale_expression(m.matrix, get(m.source))) acc.emplace(t, blk);
    for (const auto& [t, blk] : get(m.target)) {
      auto it = acc.find(t);
      if (it == acc.end()) acc.emplace(t, Matrix(blk.rows(), blk.cols()) - blk);
      else it->second = it->second - blk;
    }
    for (std::size_t r = 0; r < sys.rank(m.target); ++r) {
      SparseVec row;
      for (const auto& [t, blk] : acc)
        for (std::size_t c = 0; c < blk.cols(); ++c)
          if (blk(r, c) != 0) row.emplace_back(static_cast<std::size_t>(top_offset[t]) + c, blk(r, c));
      if (!row.empty()) el.add_row(row);
    }
  };
  for (std::size_t e = 0; e < sys.defres.size(); ++e) {
    const auto& m = sys.defres[e];
    if (parent_edge[m.target] == static_cast<int>(e) && rep[m.target] == m.target) continue;
    add_constraint(m);
  }
  for (std::size_t g = 0; g < sys.conj.size(); ++g)
    for (std::size_t i = 0; i < n; ++i) {
      const auto& m = sys.conj[g][i];
      if (is_identity(m)) continue;
      if (via[m.target] == std::make_pair(static_cast<int>(g), static_cast<int>(i))) continue;
      add_constraint(m);
    }

  std::vector<Vector> full;
  for (const Vector& y : el.kernel_basis()) {
    Vector v(lim.dimension);
    for (std::size_t i = 0; i < n; ++i)
      for (const auto& [t, blk] : *expr[i]) {
        std::size_t o = static_cast<std::size_t>(top_offset[t]);
        for (std::size_t a = 0; a < blk.rows(); ++a) {
          Int s = 0;
          for (std::size_t c = 0; c < blk.cols(); ++c)
            if (blk(a, c) != 0 && y[o + c] != 0) s += blk(a, c) * y[o + c];
          v[lim.offset[i] + a] += s;
        }
      }
    full.push_back(std::move(v));
  }
  lim.lattice = IntegerLattice::span(lim.dimension, full);
  lim.presentation = AbelianPresentation(lim.lattice.rank());
  return lim;
}

// Any values: product of free covers plus one slack variable per relation of each target.
inline InverseLimit solve_general(const SystemPtr& sp) {
  const CoefficientSystem& sys = *sp;
  std::size_t n = sys.size();
  InverseLimit lim;
  lim.system = sp;
  lim.solver = "general";
  lim.offset.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    lim.offset[i] = lim.dimension;
    lim.dimension += sys.rank(static_cast<int>(i));
  }
  std::vector<const StructureMap*> edges;
  for (const auto& m : sys.defres) edges.push_back(&m);
  for (const auto& row : sys.conj)
    for (const auto& m : row)
      if (!is_identity(m)) edges.push_back(&m);
  std::size_t vars = lim.dimension;
  std::vector<std::size_t> slack(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    slack[e] = vars;
    vars += sys.values[edges[e]->target].relations().rows();
  }
  SparseEliminator el(vars, SparseEliminator::Mode::Kernel);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const StructureMap& m = *edges[e];
    const Matrix& rel = sys.values[m.target].relations();
    for (std::size_t r = 0; r < sys.rank(m.target); ++r) {
      std::map<std::size_t, Int> row;
      for (std::size_t c = 0; c < m.matrix.cols(); ++c)
        if (m.matrix(r, c) != 0) row[lim.offset[m.source] + c] += m.matrix(r, c);
      row[lim.offset[m.target] + r] -= 1;
      for (std::size_t k = 0; k < rel.rows(); ++k)
        if (rel(k, r) != 0) row[slack[e] + k] -= rel(k, r);
      SparseVec sv;
      for (auto& [i, v] : row)
        if (v != 0) sv.emplace_back(i, v);
      if (!sv.empty()) el.add_row(sv);
    }
  }
  std::vector<Vector> proj;
  for (const Vector& k : el.kernel_basis()) proj.emplace_back(k.begin(), k.begin() + static_cast<long>(lim.dimension));
  lim.lattice = IntegerLattice::span(lim.dimension, proj);
  Matrix rels(0, lim.lattice.rank());
  for (std::size_t i = 0; i < n; ++i) {
    const Matrix& r = sys.values[i].relations();
    for (std::size_t k = 0; k < r.rows(); ++k) {
      Vector v(lim.dimension);
      for (std::size_t c = 0; c < r.cols(); ++c) v[lim.offset[i] + c] = r(k, c);
      auto c = lim.lattice.coordinates(v);
      if (!c) throw std::logic_error("limit: relation vector outside the solution lattice");
      rels.append_row(*c);
    }
  }
  lim.presentation = AbelianPresentation(lim.lattice.rank(), rels);
  return lim;
}

}  // namespace detail

inline InverseLimit inverse_limit(const SystemPtr& sys, LimitSolver solver = LimitSolver::Automatic) {
  if (solver == LimitSolver::Automatic) solver = sys->free() ? LimitSolver::Structured : LimitSolver::General;
  if (solver == LimitSolver::Structured && !sys->free())
    throw std::invalid_argument("limit: the structured solver needs free values");
  return solver == LimitSolver::Structured ? detail::solve_structured(sys) : detail::solve_general(sys);
}

struct VerificationOutcome {
  bool ok = true;
  std::size_t checks = 0;
  std::string witness;
};

// Independent check of a computed limit: every generator satisfies the stored constraints and,
// when a functor model is attached, Defres along every nested pair of Y(P).
inline VerificationOutcome reverify_limit(const InverseLimit& lim, bool nested = true, int jobs = 1) {
  const CoefficientSystem& sys = *lim.system;
  const SubgroupLattice& l = *sys.base;
  VerificationOutcome out;
  std::size_t n = sys.size();
  std::vector<Matrix> proj(n);
  for (std::size_t i = 0; i < n; ++i) proj[i] = lim.projection(static_cast<int>(i));
  auto check = [&](const Matrix& m, int src, int tgt, const char* kind) -> std::optional<std::string> {
    Matrix lhs = m * proj[src];
    for (std::size_t k = 0; k < lim.generators(); ++k)
      if (!sys.values[tgt].is_zero(lhs.column(k) - proj[tgt].column(k)))
        return std::string(kind) + " fails for generator " + std::to_string(k) + " from " +
               section_str(l, sys.sections[src]) + " to " + section_str(l, sys.sections[tgt]);
    return std::nullopt;
  };
  for (const auto& m : sys.defres) {
    ++out.checks;
    if (auto w = check(m.matrix, m.source, m.target, "defres")) return {false, out.checks, *w};
  }
  for (const auto& row : sys.conj)
    for (const auto& m : row) {
      ++out.checks;
      if (auto w = check(m.matrix, m.source, m.target, "conj")) return {false, out.checks, *w};
    }
  if (!nested || !sys.model) return out;
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t b = 0; b < n; ++b) {
    if (sys.rank(static_cast<int>(b)) == 0) continue;
    Section B = sys.sections[b];
    for (std::size_t s = 0; s < n; ++s) {
      if (s == b || sys.rank(static_cast<int>(s)) == 0) continue;
      Section S = sys.sections[s];
      if (l.contains(S.S, B.S) && l.contains(S.T, S.S) && l.contains(B.T, S.T))
        pairs.emplace_back(static_cast<int>(b), static_cast<int>(s));
    }
  }
  std::vector<std::optional<std::string>> bad(pairs.size());
  parallel_for(pairs.size(), jobs, [&](std::size_t k) {
    auto [b, s] = pairs[k];
    bad[k] = check(sys.model->defres(sys.sections[b], sys.sections[s]), b, s, "nested defres");
  });
  out.checks += pairs.size();
  for (auto& w : bad)
    if (w) return {false, out.checks, *w};
  return out;
}

// Matrices Defres^P_{T/S}: F(P) -> F(T/S), one per section.
inline std::vector<Matrix> eta_blocks(const CoefficientSystem& sys, int jobs = 1) {
  if (!sys.model) throw std::invalid_argument("unit: the system has no functor model");
  Section top = sys.model->top();
  int rf = sys.model->rank(top);
  std::vector<Matrix> out(sys.size());
  parallel_for(sys.size(), jobs, [&](std::size_t i) {
    if (sys.rank(static_cast<int>(i)) == 0) out[i] = Matrix(0, rf);
    else if (sys.sections[i] == top) out[i] = Matrix::identity(rf);
    else out[i] = sys.model->defres(top, sys.sections[i]);
  });
  return out;
}

// eta(f): components Defres^P_{T/S} f.
inline LimitElement unit_eta(const CoefficientSystem& sys, const Vector& f) {
  auto blocks = eta_blocks(sys);
  LimitElement x(sys.size());
  for (std::size_t i = 0; i < sys.size(); ++i) x[i] = blocks[i].rows() == 0 ? Vector() : blocks[i].apply(f);
  return x;
}

struct EtaAnalysis {
  Matrix coordinates;            // limit generators x rank F(P)
  std::vector<Int> invariant_factors;
  bool injective = false;
  bool surjective = false;
  AbelianInvariants cokernel;
  bool iso() const { return injective && surjective; }
};

inline EtaAnalysis analyze_eta(const InverseLimit& lim) {
  const CoefficientSystem& sys = *lim.system;
  if (!sys.free()) throw std::invalid_argument("unit: limit values must be free");
  int rf = sys.model->rank(sys.model->top());
  EtaAnalysis a;
  a.coordinates = Matrix(lim.generators(), rf);
  auto blocks = eta_blocks(sys);
  for (int j = 0; j < rf; ++j) {
    LimitElement x(sys.size());
    for (std::size_t i = 0; i < sys.size(); ++i) x[i] = blocks[i].column(j);
    auto c = lim.coordinates(x);
    if (!c) throw std::logic_error("unit: eta(f) is not in the limit");
    for (std::size_t k = 0; k < lim.generators(); ++k) a.coordinates(k, j) = (*c)[k];
  }
  a.invariant_factors = smith_invariants(a.coordinates);
  a.injective = a.invariant_factors.size() == static_cast<std::size_t>(rf);
  a.cokernel = cokernel_invariants(a.coordinates.transpose(), lim.generators());
  a.surjective = a.cokernel.is_zero();
  return a;
}

// Restriction of a limit element over Y to the subclass Z.
inline LimitElement project_pi(const CoefficientSystem& y, const CoefficientSystem& z, const LimitElement& l) {
  if (y.base != z.base) throw std::invalid_argument("projection: different base groups");
  if (!z.cls.subclass_of(y.cls)) throw std::invalid_argument("projection: " + z.cls.name + " is not contained in " + y.cls.name);
  LimitElement out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = l[y.at(z.sections[i])];
  return out;
}

// The two readings of the component index in the Moebius-weighted retraction sum over (T,S) in E(P):
// Subsection: |S| mu(S,T) Indinf^P_{S/Phi(T)} u_{S,Phi(T)};  Section: |S| mu(S,T) Indinf^P_{T/S} u_{T,S}.
enum class SigmaReading { Subsection, Section };

inline std::string reading_name(SigmaReading r) {
  return r == SigmaReading::Subsection ? "sum |S| mu(S,T) Indinf^P_{S/Phi(T)} u_{S,Phi(T)}"
                                       : "sum |S| mu(S,T) Indinf^P_{T/S} u_{T,S}";
}

inline Vector sigma_retraction(const CoefficientSystem& sys, const LimitElement& u, SigmaReading reading) {
  if (!sys.model) throw std::invalid_argument("sigma: the system has no functor model");
  if (sys.cls.extraspecial || !sys.cls.unbounded()) throw std::invalid_argument("sigma: class must be E");
  const SubgroupLattice& l = *sys.base;
  Section top = sys.model->top();
  Vector out(sys.model->rank(top));
  for (std::size_t i = 0; i < sys.size(); ++i) {
    Section ts = sys.sections[i];
    long long mu = l.moebius(ts.S, ts.T);
    if (mu == 0) continue;
    Section term = reading == SigmaReading::Subsection ? Section{ts.S, l.frattini(ts.T)} : ts;
    int j = sys.at(term);
    if (sys.rank(j) == 0) continue;
    Int c = Int(l.order(ts.S)) * mu;
    out = out + c * sys.model->indinf(term, top).apply(u[j]);
  }
  return out;
}

// sigma after projection to E; `e` is the E-system of the same functor on the same group.
inline Vector tau_retraction(const CoefficientSystem& y, const CoefficientSystem& e, const LimitElement& u,
                             SigmaReading reading) {
  return sigma_retraction(e, project_pi(y, e, u), reading);
}

// (T/S, P)-biset S\P: points S-orbits under left multiplication.
inline ConcreteBiset section_biset(const SubgroupLattice& l, Section s, const Quotient& q) {
  const FiniteGroup& g = l.group();
  std::vector<int> point(g.order(), -1);
  std::vector<Element> rep;
  for (Element x = 0; x < g.order(); ++x) {
    if (point[x] != -1) continue;
    for (Element y : l.members(s.S)) point[g.mul(y, x)] = static_cast<int>(rep.size());
    rep.push_back(x);
  }
  int n = static_cast<int>(rep.size());
  int nq = q.group->order();
  std::vector<int> left(static_cast<std::size_t>(nq) * n), right(static_cast<std::size_t>(n) * g.order());
  for (int k = 0; k < n; ++k) {
    for (Element c = 0; c < nq; ++c) left[static_cast<std::size_t>(c) * n + k] = point[g.mul(q.rep[c], rep[k])];
    for (Element x = 0; x < g.order(); ++x) right[static_cast<std::size_t>(k) * g.order() + x] = point[g.mul(rep[k], x)];
  }
  return ConcreteBiset(q.group, l.group_ptr(), n, std::move(left), std::move(right));
}

enum class ActionMethod { Elementary, Concrete };

namespace detail {

inline int find_members(const SubgroupLattice& l, const std::vector<Element>& m, const char* what) {
  int i = l.find(m);
  if (i < 0) throw std::logic_error(std::string(what) + " is not a subgroup");
  return i;
}

// (T/S, T^u/S^u)-biset S\Tu, over the materialized quotients of the two section models.
inline ConcreteBiset transporter_biset(const ConcreteBiset& u, int pt, const SectionModel& tgt, const SectionModel& src) {
  const SubgroupLattice& lq = tgt.base();
  Section ts = tgt.section();
  std::vector<int> id(u.size(), -1);
  std::vector<int> rep;
  for (Element t : lq.members(ts.T)) {
    int v = u.act_left(t, pt);
    if (id[v] != -1) continue;
    for (Element s : lq.members(ts.S)) id[u.act_left(s, v)] = static_cast<int>(rep.size());
    rep.push_back(v);
  }
  int n = static_cast<int>(rep.size());
  const Quotient& qt = tgt.quotient();
  const Quotient& qs = src.quotient();
  int nl = qt.group->order(), nr = qs.group->order();
  std::vector<int> left(static_cast<std::size_t>(nl) * n), right(static_cast<std::size_t>(n) * nr);
  for (int k = 0; k < n; ++k) {
    for (Element c = 0; c < nl; ++c) left[static_cast<std::size_t>(c) * n + k] = id[u.act_left(qt.rep[c], rep[k])];
    for (Element c = 0; c < nr; ++c) {
      int v = id[u.act_right(rep[k], qs.rep[c])];
      if (v < 0) throw std::logic_error("transporter biset: right action leaves Tu");
      right[static_cast<std::size_t>(k) * nr + c] = v;
    }
  }
  return ConcreteBiset(qt.group, qs.group, n, std::move(left), std::move(right));
}

// Matrix of one double-coset term F(T^u/S^u) -> F(T/S).
inline Matrix action_term(const ConcreteBiset& U, int pt, const FunctorModel& fq, const SectionModel& tgt,
                          const SectionModel& src, ActionMethod method) {
  FunctorKind f = fq.kind();
  if (method == ActionMethod::Concrete) {
    ConcreteBiset x = transporter_biset(U, pt, tgt, src);
    return lift_to_functor(
        f, src.burnside(), tgt.burnside(), [&] { return concrete_burnside_action(x, tgt.burnside(), src.burnside()); },
        [&] { return concrete_burnside_action(opposite(x), src.burnside(), tgt.burnside()); });
  }
  const SubgroupLattice& lq = tgt.base();
  const SubgroupLattice& lp = src.base();
  Section ts = tgt.section();
  auto left_of = [&](const std::vector<Element>& v) {
    return find_members(lq, left_transporter(U, pt, v), "left transporter");
  };
  // Indinf^{T/S}_{A/N} Iso: class of V/S^u -> class of (T n ^uV)S / S.
  auto forward = [&] {
    Matrix m(tgt.burnside_rank(), src.burnside_rank());
    for (int c = 0; c < src.burnside_rank(); ++c) {
      int v = src.class_rep_base(c);
      int w = lq.join(lq.intersection(ts.T, left_of(lp.members(v))), ts.S);
      m(tgt.class_of_base(w), c) += 1;
    }
    return m;
  };
  // Iso^{-1} Defres^{T/S}_{A/N}: W/N -> W^u / S^u.
  auto backward = [&] {
    std::vector<Element> all(lp.group().order());
    std::iota(all.begin(), all.end(), 0);
    int a = lq.join(lq.intersection(ts.T, left_of(all)), ts.S);
    int nn = lq.join(lq.intersection(ts.T, left_of({0})), ts.S);
    const SectionModel& an = fq.section({a, nn});
    Matrix d = formula::burnside_defres(tgt, an);
    Matrix iso(src.burnside_rank(), an.burnside_rank());
    for (int c = 0; c < an.burnside_rank(); ++c) {
      int w = an.class_rep_base(c);
      int v = find_members(lp, right_transporter(U, lq.members(w), pt), "right transporter");
      iso(src.class_of_base(v), c) += 1;
    }
    return iso * d;
  };
  return lift_to_functor(f, src.burnside(), tgt.burnside(), forward, backward);
}

}  // namespace detail

// Action of a (Q,P)-biset on limits: the component at (T,S) is the sum over u in [T\U/P] of
// the image of l_{T^u,S^u} under S\Tu.
inline LimitElement biset_act_limit(const ConcreteBiset& U, const CoefficientSystem& sp, const CoefficientSystem& sq,
                                    const LimitElement& l, ActionMethod method = ActionMethod::Elementary) {
  if (!sp.model || !sq.model) throw std::invalid_argument("biset action: systems need functor models");
  if (sp.model->kind() != sq.model->kind()) throw std::invalid_argument("biset action: different functors");
  require_same_group(U.left_group(), sq.base->group(), "biset action");
  require_same_group(U.right_group(), sp.base->group(), "biset action");
  const SubgroupLattice& lq = *sq.base;
  const SubgroupLattice& lp = *sp.base;
  LimitElement out(sq.size());
  for (std::size_t i = 0; i < sq.size(); ++i) {
    out[i] = Vector(sq.rank(static_cast<int>(i)));
    if (out[i].empty()) continue;
    Section ts = sq.sections[i];
    const SectionModel& tgt = sq.model->section(ts);
    for (int pt : double_coset_reps(U, lq.members(ts.T))) {
      Section tu{detail::find_members(lp, right_transporter(U, lq.members(ts.T), pt), "T^u"),
                 detail::find_members(lp, right_transporter(U, lq.members(ts.S), pt), "S^u")};
      int j = sp.find(tu);
      if (j < 0) throw std::logic_error("biset action: (T^u,S^u) is not in the class");
      if (sp.rank(j) == 0) continue;
      const SectionModel& src = sp.model->section(tu);
      out[i] = out[i] + detail::action_term(U, pt, *sq.model, tgt, src, method).apply(l[j]);
    }
  }
  return out;
}

// A family phi_{T/S}: F(T/S) -> G(T/S) given section-wise on the quotient models.
using SectionFamily = std::function<Matrix(const SectionModel&)>;

// Witness of the first covering pair or conjugation where phi fails to commute with the structure maps.
inline std::optional<std::string> check_natural(const CoefficientSystem& f, const CoefficientSystem& g,
                                                const SectionFamily& phi) {
  if (f.base != g.base || f.sections != g.sections) throw std::invalid_argument("naturality: systems differ in shape");
  const SubgroupLattice& l = *f.base;
  std::vector<Matrix> ph(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) ph[i] = phi(f.model->section(f.sections[i]));
  auto test = [&](const StructureMap& mf, const StructureMap& mg, const char* kind) -> std::optional<std::string> {
    Matrix a = mg.matrix * ph[mf.source];
    Matrix b = ph[mf.target] * mf.matrix;
    for (std::size_t c = 0; c < a.cols(); ++c)
      if (!g.values[mf.target].is_zero(a.column(c) - b.column(c)))
        return std::string(kind) + " " + section_str(l, f.sections[mf.source]) + " -> " +
               section_str(l, f.sections[mf.target]) + " basis " + std::to_string(c);
    return std::nullopt;
  };
  for (std::size_t e = 0; e < f.defres.size(); ++e)
    if (auto w = test(f.defres[e], g.defres[e], "defres")) return w;
  for (std::size_t x = 0; x < f.conj.size(); ++x)
    for (std::size_t i = 0; i < f.size(); ++i)
      if (auto w = test(f.conj[x][i], g.conj[x][i], "conj")) return w;
  return std::nullopt;
}

// phi^+(f)_{T,S} = phi_{T/S}(Defres^P_{T/S} f), as an element of the G-limit.
inline LimitElement adjunction_plus(const CoefficientSystem& f, const CoefficientSystem& g, const SectionFamily& phi,
                                    const Vector& x, bool verify_natural = true) {
  if (verify_natural)
    if (auto w = check_natural(f, g, phi)) throw std::invalid_argument("adjunction: family is not natural at " + *w);
  LimitElement d = unit_eta(f, x);
  LimitElement out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    Matrix m = phi(f.model->section(f.sections[i]));
    out[i] = m.cols() == 0 ? Vector(m.rows()) : m.apply(d[i]);
  }
  return out;
}

// psi^-(f) = psi(f)_{Q,1}.
inline Vector adjunction_minus(const CoefficientSystem& g, const LimitElement& psi_value) {
  const SubgroupLattice& l = *g.base;
  return psi_value[g.at({l.whole(), l.trivial()})];
}

// w = - sum over 1 < J <= H of mu(1,J) Inf^H_{H/J} v_J.
inline Vector glue_from_quotients(const FunctorModel& f, const std::map<int, Vector>& v) {
  const SubgroupLattice& l = f.base();
  auto label = classify_quotient(l.group());
  if (label.kind != ClassLabel::Kind::ElementaryAbelian) throw std::invalid_argument("glue: group is not elementary abelian");
  Section top = f.top();
  Vector w(f.rank(top));
  for (int j = 1; j < l.size(); ++j) {
    long long mu = l.moebius(l.trivial(), j);
    if (mu == 0) continue;
    auto it = v.find(j);
    if (it == v.end()) throw std::invalid_argument("glue: missing value for subgroup " + std::to_string(j));
    if (f.rank({l.whole(), j}) == 0) continue;
    w = w - Int(mu) * f.indinf({l.whole(), j}, top).apply(it->second);
  }
  return w;
}

// Direct limit presented over surviving generators after Tietze reduction.
struct DirectLimit {
  SystemPtr system;
  std::vector<std::size_t> offset;
  std::size_t dimension = 0;
  Matrix images;       // original generator -> reduced coordinates (rows)
  Matrix definitions;  // reduced generator as a combination of original ones (rows)
  AbelianPresentation presentation;
};

inline DirectLimit colimit(const SystemPtr& sp) {
  const CoefficientSystem& sys = *sp;
  if (!sys.has_indinf) throw std::invalid_argument("colimit: the system has no indinf maps");
  DirectLimit d;
  d.system = sp;
  std::size_t n = sys.size();
  d.offset.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.offset[i] = d.dimension;
    d.dimension += sys.rank(static_cast<int>(i));
  }
  std::vector<std::int64_t> priority(d.dimension);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < sys.rank(static_cast<int>(i)); ++k) priority[d.offset[i] + k] = -sys.quotient_order(static_cast<int>(i));
  SparseEliminator el(d.dimension, SparseEliminator::Mode::Presentation, priority);
  auto add = [&](const StructureMap& m) {
    for (std::size_t c = 0; c < sys.rank(m.source); ++c) {
      std::map<std::size_t, Int> row;
      row[d.offset[m.source] + c] += 1;
      for (std::size_t r = 0; r < m.matrix.rows(); ++r)
        if (m.matrix(r, c) != 0) row[d.offset[m.target] + r] -= m.matrix(r, c);
      SparseVec sv;
      for (auto& [i, v] : row)
        if (v != 0) sv.emplace_back(i, v);
      if (!sv.empty()) el.add_row(sv);
    }
  };
  for (std::size_t i = 0; i < n; ++i) {
    const Matrix& r = sys.values[i].relations();
    for (std::size_t k = 0; k < r.rows(); ++k) {
      SparseVec sv;
      for (std::size_t c = 0; c < r.cols(); ++c)
        if (r(k, c) != 0) sv.emplace_back(d.offset[i] + c, r(k, c));
      if (!sv.empty()) el.add_row(sv);
    }
  }
  // Largest sources first: each generator is eliminated into an already reduced bigger section.
  std::vector<long long> sizes;
  for (std::size_t i = 0; i < n; ++i) sizes.push_back(sys.quotient_order(static_cast<int>(i)));
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  for (long long s : sizes) {
    for (const auto& m : sys.indinf)
      if (sys.quotient_order(m.source) == s) add(m);
    for (const auto& row : sys.conj)
      for (const auto& m : row)
        if (sys.quotient_order(m.source) == s && !detail::is_identity(m)) add(m);
  }
  d.images = el.generator_images();
  d.definitions = el.generator_definitions();
  d.presentation = AbelianPresentation(el.alive_count(), el.residual_relations());
  return d;
}

// Counit to F(P) on the reduced generators: sum of Indinf^P_{T/S}.
inline Matrix counit_matrix(const DirectLimit& d) {
  const CoefficientSystem& sys = *d.system;
  if (!sys.model) throw std::invalid_argument("counit: the system has no functor model");
  Section top = sys.model->top();
  int rp = sys.model->rank(top);
  Matrix orig(rp, d.dimension);
  for (std::size_t i = 0; i < sys.size(); ++i) {
    if (sys.rank(static_cast<int>(i)) == 0) continue;
    Matrix m = sys.sections[i] == top ? Matrix::identity(rp) : sys.model->indinf(sys.sections[i], top);
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (std::size_t c = 0; c < m.cols(); ++c) orig(r, d.offset[i] + c) = m(r, c);
  }
  return orig * d.definitions.transpose();
}

struct CounitAnalysis {
  bool surjective = false;
  AbelianInvariants cokernel;
  AbelianInvariants colimit;
  AbelianInvariants kernel;  // M = ker(counit)
  bool relations_in_kernel = true;
};

inline CounitAnalysis analyze_counit(const DirectLimit& d) {
  CounitAnalysis a;
  Matrix c = counit_matrix(d);
  a.cokernel = cokernel_invariants(c.transpose(), c.rows());
  a.surjective = a.cokernel.is_zero();
  a.colimit = d.presentation.invariants();
  IntegerLattice ker = integer_kernel(c);
  IntegerLattice rel = d.presentation.relation_lattice();
  a.relations_in_kernel = ker.contains(rel);
  if (!a.relations_in_kernel) throw std::logic_error("counit: a relation of the colimit is not in the kernel");
  a.kernel = quotient_invariants(ker, rel);
  return a;
}

}  // namespace bfk
