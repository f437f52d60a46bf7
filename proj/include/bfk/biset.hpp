#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "bfk/group.hpp"

namespace bfk {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  // The smaller index becomes the root, so roots are least orbit members.
  void unite(std::size_t a, std::size_t b) {
    a = find(a), b = find(b);
    if (a == b) return;
    if (a < b) parent_[b] = a;
    else parent_[a] = b;
  }

 private:
  std::vector<std::size_t> parent_;
};

inline std::vector<Element> group_generators(const FiniteGroup& g) {
  std::vector<Element> gens;
  std::vector<char> in(g.order(), 0);
  in[0] = 1;
  std::vector<Element> elems{0};
  for (Element x = 0; x < g.order(); ++x) {
    if (in[x]) continue;
    gens.push_back(x);
    std::fill(in.begin(), in.end(), 0);
    elems.assign(1, 0);
    in[0] = 1;
    for (std::size_t k = 0; k < elems.size(); ++k)
      for (Element y : gens) {
        Element z = g.mul(elems[k], y);
        if (!in[z]) in[z] = 1, elems.push_back(z);
      }
  }
  return gens;
}

// Finite (Q,P)-biset: points 0..n-1 with a left Q-action and a right P-action.
class ConcreteBiset {
 public:
  ConcreteBiset(GroupPtr left, GroupPtr right, int points, std::vector<int> left_act, std::vector<int> right_act)
      : q_(std::move(left)), p_(std::move(right)), n_(points), left_(std::move(left_act)), right_(std::move(right_act)) {
    if (left_.size() != static_cast<std::size_t>(q_->order()) * n_ ||
        right_.size() != static_cast<std::size_t>(n_) * p_->order())
      throw std::invalid_argument("biset: action table size mismatch");
  }

  const FiniteGroup& left_group() const { return *q_; }
  const FiniteGroup& right_group() const { return *p_; }
  GroupPtr left_ptr() const { return q_; }
  GroupPtr right_ptr() const { return p_; }
  int size() const { return n_; }

  // q.u
  int act_left(Element q, int u) const { return left_[static_cast<std::size_t>(q) * n_ + u]; }
  // u.g
  int act_right(int u, Element g) const { return right_[static_cast<std::size_t>(u) * p_->order() + g]; }

  // Action laws and commutation, checked exhaustively.
  bool is_valid() const {
    const FiniteGroup& q = *q_;
    const FiniteGroup& p = *p_;
    for (int u = 0; u < n_; ++u) {
      if (act_left(0, u) != u || act_right(u, 0) != u) return false;
      for (Element a = 0; a < q.order(); ++a) {
        int au = act_left(a, u);
        if (au < 0 || au >= n_) return false;
        for (Element b = 0; b < q.order(); ++b)
          if (act_left(q.mul(b, a), u) != act_left(b, au)) return false;
        for (Element g = 0; g < p.order(); ++g)
          if (act_right(au, g) != act_left(a, act_right(u, g))) return false;
      }
      for (Element g = 0; g < p.order(); ++g) {
        int ug = act_right(u, g);
        if (ug < 0 || ug >= n_) return false;
        for (Element h = 0; h < p.order(); ++h)
          if (act_right(u, p.mul(g, h)) != act_right(ug, h)) return false;
      }
    }
    return true;
  }

 private:
  GroupPtr q_, p_;
  int n_;
  std::vector<int> left_, right_;
};

namespace detail {

inline void require_hom(const FiniteGroup& src, const FiniteGroup& dst, const std::vector<Element>& f,
                        const char* what) {
  if (static_cast<int>(f.size()) != src.order()) throw std::invalid_argument(std::string(what) + ": map size mismatch");
  for (Element a = 0; a < src.order(); ++a) {
    if (f[a] < 0 || f[a] >= dst.order()) throw std::invalid_argument(std::string(what) + ": map out of range");
    for (Element b = 0; b < src.order(); ++b)
      if (f[src.mul(a, b)] != dst.mul(f[a], f[b]))
        throw std::invalid_argument(std::string(what) + ": map is not a homomorphism");
  }
}

inline bool is_injective(const std::vector<Element>& f, int n) {
  std::vector<char> seen(n, 0);
  for (Element x : f) {
    if (seen[x]) return false;
    seen[x] = 1;
  }
  return true;
}

inline bool is_surjective(const std::vector<Element>& f, int n) {
  std::vector<char> seen(n, 0);
  for (Element x : f) seen[x] = 1;
  return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
}

}  // namespace detail

inline ConcreteBiset regular_biset(const GroupPtr& g) {
  int n = g->order();
  std::vector<int> l(static_cast<std::size_t>(n) * n), r(static_cast<std::size_t>(n) * n);
  for (int a = 0; a < n; ++a)
    for (int u = 0; u < n; ++u) {
      l[static_cast<std::size_t>(a) * n + u] = g->mul(a, u);
      r[static_cast<std::size_t>(u) * n + a] = g->mul(u, a);
    }
  return ConcreteBiset(g, g, n, std::move(l), std::move(r));
}

// G as an (H,G)-biset, H acting through the injective homomorphism embed: H -> G.
inline ConcreteBiset restriction_biset(const GroupPtr& g, const GroupPtr& h, const std::vector<Element>& embed) {
  detail::require_hom(*h, *g, embed, "restriction");
  if (!detail::is_injective(embed, g->order())) throw std::invalid_argument("restriction: map is not injective");
  int n = g->order();
  std::vector<int> l(static_cast<std::size_t>(h->order()) * n), r(static_cast<std::size_t>(n) * n);
  for (int u = 0; u < n; ++u) {
    for (Element a = 0; a < h->order(); ++a) l[static_cast<std::size_t>(a) * n + u] = g->mul(embed[a], u);
    for (Element x = 0; x < n; ++x) r[static_cast<std::size_t>(u) * n + x] = g->mul(u, x);
  }
  return ConcreteBiset(h, g, n, std::move(l), std::move(r));
}

// G as a (G,H)-biset.
inline ConcreteBiset induction_biset(const GroupPtr& g, const GroupPtr& h, const std::vector<Element>& embed) {
  detail::require_hom(*h, *g, embed, "induction");
  if (!detail::is_injective(embed, g->order())) throw std::invalid_argument("induction: map is not injective");
  int n = g->order();
  std::vector<int> l(static_cast<std::size_t>(n) * n), r(static_cast<std::size_t>(n) * h->order());
  for (int u = 0; u < n; ++u) {
    for (Element x = 0; x < n; ++x) l[static_cast<std::size_t>(x) * n + u] = g->mul(x, u);
    for (Element a = 0; a < h->order(); ++a) r[static_cast<std::size_t>(u) * h->order() + a] = g->mul(u, embed[a]);
  }
  return ConcreteBiset(g, h, n, std::move(l), std::move(r));
}

// The quotient Q = G/N (N = ker proj) as a (G,Q)-biset.
inline ConcreteBiset inflation_biset(const GroupPtr& g, const GroupPtr& q, const std::vector<Element>& proj) {
  detail::require_hom(*g, *q, proj, "inflation");
  if (!detail::is_surjective(proj, q->order())) throw std::invalid_argument("inflation: map is not surjective");
  int n = q->order();
  std::vector<int> l(static_cast<std::size_t>(g->order()) * n), r(static_cast<std::size_t>(n) * n);
  for (int u = 0; u < n; ++u) {
    for (Element x = 0; x < g->order(); ++x) l[static_cast<std::size_t>(x) * n + u] = q->mul(proj[x], u);
    for (Element c = 0; c < n; ++c) r[static_cast<std::size_t>(u) * n + c] = q->mul(u, c);
  }
  return ConcreteBiset(g, q, n, std::move(l), std::move(r));
}

// N\G = G/N as a (Q,G)-biset.
inline ConcreteBiset deflation_biset(const GroupPtr& g, const GroupPtr& q, const std::vector<Element>& proj) {
  detail::require_hom(*g, *q, proj, "deflation");
  if (!detail::is_surjective(proj, q->order())) throw std::invalid_argument("deflation: map is not surjective");
  int n = q->order();
  std::vector<int> l(static_cast<std::size_t>(n) * n), r(static_cast<std::size_t>(n) * g->order());
  for (int u = 0; u < n; ++u) {
    for (Element c = 0; c < n; ++c) l[static_cast<std::size_t>(c) * n + u] = q->mul(c, u);
    for (Element x = 0; x < g->order(); ++x) r[static_cast<std::size_t>(u) * g->order() + x] = q->mul(u, proj[x]);
  }
  return ConcreteBiset(q, g, n, std::move(l), std::move(r));
}

// Q as a (Q,P)-biset, P acting on the right through the isomorphism alpha: P -> Q.
inline ConcreteBiset isomorphism_biset(const GroupPtr& p, const GroupPtr& q, const std::vector<Element>& alpha) {
  detail::require_hom(*p, *q, alpha, "isomorphism");
  if (p->order() != q->order() || !detail::is_injective(alpha, q->order()))
    throw std::invalid_argument("isomorphism: map is not bijective");
  int n = q->order();
  std::vector<int> l(static_cast<std::size_t>(n) * n), r(static_cast<std::size_t>(n) * n);
  for (int u = 0; u < n; ++u)
    for (Element x = 0; x < n; ++x) {
      l[static_cast<std::size_t>(x) * n + u] = q->mul(x, u);
      r[static_cast<std::size_t>(u) * n + x] = q->mul(u, alpha[x]);
    }
  return ConcreteBiset(q, p, n, std::move(l), std::move(r));
}

inline void require_same_group(const FiniteGroup& a, const FiniteGroup& b, const char* what) {
  if (!(a == b)) throw std::invalid_argument(std::string(what) + ": group mismatch");
}

struct Composite {
  ConcreteBiset biset;
  std::vector<int> pair_to_point;  // v * |U| + u -> point of V x_Q U
};

// V x_Q U for V an (R,Q)-biset and U a (Q,P)-biset.
inline Composite compose_with_map(const ConcreteBiset& v, const ConcreteBiset& u) {
  require_same_group(v.right_group(), u.left_group(), "compose");
  const FiniteGroup& q = u.left_group();
  int nv = v.size(), nu = u.size();
  std::size_t pairs = static_cast<std::size_t>(nv) * nu;
  UnionFind uf(pairs);
  auto gens = group_generators(q);
  for (int a = 0; a < nv; ++a)
    for (int b = 0; b < nu; ++b)
      for (Element y : gens)
        uf.unite(static_cast<std::size_t>(a) * nu + b,
                 static_cast<std::size_t>(v.act_right(a, q.inv(y))) * nu + u.act_left(y, b));
  std::vector<int> point(pairs, -1);
  std::vector<std::size_t> rep;
  for (std::size_t k = 0; k < pairs; ++k) {
    std::size_t r = uf.find(k);
    if (point[r] == -1) {
      point[r] = static_cast<int>(rep.size());
      rep.push_back(r);
    }
    point[k] = point[r];
  }
  int n = static_cast<int>(rep.size());
  const FiniteGroup& rg = v.left_group();
  const FiniteGroup& pg = u.right_group();
  std::vector<int> l(static_cast<std::size_t>(rg.order()) * n), r(static_cast<std::size_t>(n) * pg.order());
  for (int k = 0; k < n; ++k) {
    int a = static_cast<int>(rep[k] / nu), b = static_cast<int>(rep[k] % nu);
    for (Element z = 0; z < rg.order(); ++z)
      l[static_cast<std::size_t>(z) * n + k] = point[static_cast<std::size_t>(v.act_left(z, a)) * nu + b];
    for (Element x = 0; x < pg.order(); ++x)
      r[static_cast<std::size_t>(k) * pg.order() + x] = point[static_cast<std::size_t>(a) * nu + u.act_right(b, x)];
  }
  return {ConcreteBiset(v.left_ptr(), u.right_ptr(), n, std::move(l), std::move(r)), std::move(point)};
}

inline ConcreteBiset compose(const ConcreteBiset& v, const ConcreteBiset& u) { return compose_with_map(v, u).biset; }

inline ConcreteBiset opposite(const ConcreteBiset& u) {
  const FiniteGroup& q = u.left_group();
  const FiniteGroup& p = u.right_group();
  int n = u.size();
  std::vector<int> l(static_cast<std::size_t>(p.order()) * n), r(static_cast<std::size_t>(n) * q.order());
  for (int k = 0; k < n; ++k) {
    for (Element x = 0; x < p.order(); ++x) l[static_cast<std::size_t>(x) * n + k] = u.act_right(k, p.inv(x));
    for (Element y = 0; y < q.order(); ++y) r[static_cast<std::size_t>(k) * q.order() + y] = u.act_left(q.inv(y), k);
  }
  return ConcreteBiset(u.right_ptr(), u.left_ptr(), n, std::move(l), std::move(r));
}

inline ConcreteBiset disjoint_union(const ConcreteBiset& a, const ConcreteBiset& b) {
  require_same_group(a.left_group(), b.left_group(), "disjoint union");
  require_same_group(a.right_group(), b.right_group(), "disjoint union");
  int n = a.size() + b.size();
  int nq = a.left_group().order(), np = a.right_group().order();
  std::vector<int> l(static_cast<std::size_t>(nq) * n), r(static_cast<std::size_t>(n) * np);
  for (int k = 0; k < n; ++k) {
    bool first = k < a.size();
    int kk = first ? k : k - a.size();
    for (Element y = 0; y < nq; ++y)
      l[static_cast<std::size_t>(y) * n + k] = first ? a.act_left(y, kk) : b.act_left(y, kk) + a.size();
    for (Element x = 0; x < np; ++x)
      r[static_cast<std::size_t>(k) * np + x] = first ? a.act_right(kk, x) : b.act_right(kk, x) + a.size();
  }
  return ConcreteBiset(a.left_ptr(), a.right_ptr(), n, std::move(l), std::move(r));
}

// Restrict the left action along embed: H -> Q.
inline ConcreteBiset restrict_left(const ConcreteBiset& u, const GroupPtr& h, const std::vector<Element>& embed) {
  detail::require_hom(*h, u.left_group(), embed, "restrict_left");
  int n = u.size(), np = u.right_group().order();
  std::vector<int> l(static_cast<std::size_t>(h->order()) * n), r(static_cast<std::size_t>(n) * np);
  for (int k = 0; k < n; ++k) {
    for (Element a = 0; a < h->order(); ++a) l[static_cast<std::size_t>(a) * n + k] = u.act_left(embed[a], k);
    for (Element x = 0; x < np; ++x) r[static_cast<std::size_t>(k) * np + x] = u.act_right(k, x);
  }
  return ConcreteBiset(h, u.right_ptr(), n, std::move(l), std::move(r));
}

// Restrict the right action along embed: H -> P.
inline ConcreteBiset restrict_right(const ConcreteBiset& u, const GroupPtr& h, const std::vector<Element>& embed) {
  detail::require_hom(*h, u.right_group(), embed, "restrict_right");
  int n = u.size(), nq = u.left_group().order();
  std::vector<int> l(static_cast<std::size_t>(nq) * n), r(static_cast<std::size_t>(n) * h->order());
  for (int k = 0; k < n; ++k) {
    for (Element y = 0; y < nq; ++y) l[static_cast<std::size_t>(y) * n + k] = u.act_left(y, k);
    for (Element a = 0; a < h->order(); ++a) r[static_cast<std::size_t>(k) * h->order() + a] = u.act_right(k, embed[a]);
  }
  return ConcreteBiset(u.left_ptr(), h, n, std::move(l), std::move(r));
}

// C\U for a (D,P)-biset U and proj: D -> D/C; points are the C-orbits.
inline ConcreteBiset left_quotient(const ConcreteBiset& u, const GroupPtr& quot, const std::vector<Element>& proj) {
  const FiniteGroup& d = u.left_group();
  detail::require_hom(d, *quot, proj, "left_quotient");
  if (!detail::is_surjective(proj, quot->order())) throw std::invalid_argument("left_quotient: map is not surjective");
  UnionFind uf(u.size());
  std::vector<Element> preimage(quot->order(), -1);
  for (Element c = 0; c < d.order(); ++c) {
    if (preimage[proj[c]] == -1) preimage[proj[c]] = c;
    if (proj[c] != 0) continue;
    for (int k = 0; k < u.size(); ++k) uf.unite(k, u.act_left(c, k));
  }
  std::vector<int> point(u.size(), -1), rep;
  for (int k = 0; k < u.size(); ++k) {
    int r = static_cast<int>(uf.find(k));
    if (point[r] == -1) point[r] = static_cast<int>(rep.size()), rep.push_back(r);
    point[k] = point[r];
  }
  int n = static_cast<int>(rep.size()), np = u.right_group().order();
  std::vector<int> l(static_cast<std::size_t>(quot->order()) * n), r(static_cast<std::size_t>(n) * np);
  for (int k = 0; k < n; ++k) {
    for (Element a = 0; a < quot->order(); ++a) l[static_cast<std::size_t>(a) * n + k] = point[u.act_left(preimage[a], rep[k])];
    for (Element x = 0; x < np; ++x) r[static_cast<std::size_t>(k) * np + x] = point[u.act_right(rep[k], x)];
  }
  return ConcreteBiset(quot, u.right_ptr(), n, std::move(l), std::move(r));
}

// U/A for a (Q,B)-biset U and proj: B -> B/A; points are the A-orbits.
inline ConcreteBiset right_quotient(const ConcreteBiset& u, const GroupPtr& quot, const std::vector<Element>& proj) {
  const FiniteGroup& b = u.right_group();
  detail::require_hom(b, *quot, proj, "right_quotient");
  if (!detail::is_surjective(proj, quot->order())) throw std::invalid_argument("right_quotient: map is not surjective");
  UnionFind uf(u.size());
  std::vector<Element> preimage(quot->order(), -1);
  for (Element c = 0; c < b.order(); ++c) {
    if (preimage[proj[c]] == -1) preimage[proj[c]] = c;
    if (proj[c] != 0) continue;
    for (int k = 0; k < u.size(); ++k) uf.unite(k, u.act_right(k, c));
  }
  std::vector<int> point(u.size(), -1), rep;
  for (int k = 0; k < u.size(); ++k) {
    int r = static_cast<int>(uf.find(k));
    if (point[r] == -1) point[r] = static_cast<int>(rep.size()), rep.push_back(r);
    point[k] = point[r];
  }
  int n = static_cast<int>(rep.size()), nq = u.left_group().order();
  std::vector<int> l(static_cast<std::size_t>(nq) * n), r(static_cast<std::size_t>(n) * quot->order());
  for (int k = 0; k < n; ++k) {
    for (Element y = 0; y < nq; ++y) l[static_cast<std::size_t>(y) * n + k] = point[u.act_left(y, rep[k])];
    for (Element a = 0; a < quot->order(); ++a)
      r[static_cast<std::size_t>(k) * quot->order() + a] = point[u.act_right(rep[k], preimage[a])];
  }
  return ConcreteBiset(u.left_ptr(), quot, n, std::move(l), std::move(r));
}

// ^uS = { y in Q : exists s in S, u s = y u }, sorted.
inline std::vector<Element> left_transporter(const ConcreteBiset& b, int u, const std::vector<Element>& s) {
  std::vector<char> target(b.size(), 0);
  for (Element x : s) target[b.act_right(u, x)] = 1;
  std::vector<Element> out;
  for (Element y = 0; y < b.left_group().order(); ++y)
    if (target[b.act_left(y, u)]) out.push_back(y);
  return out;
}

// T^u = { x in P : exists t in T, t u = u x }, sorted.
inline std::vector<Element> right_transporter(const ConcreteBiset& b, const std::vector<Element>& t, int u) {
  std::vector<char> target(b.size(), 0);
  for (Element y : t) target[b.act_left(y, u)] = 1;
  std::vector<Element> out;
  for (Element x = 0; x < b.right_group().order(); ++x)
    if (target[b.act_right(u, x)]) out.push_back(x);
  return out;
}

// Least point of each (T,P)-orbit, ascending; T given by generators or members in Q.
inline std::vector<int> double_coset_reps(const ConcreteBiset& b, const std::vector<Element>& t) {
  UnionFind uf(b.size());
  auto pg = group_generators(b.right_group());
  for (int k = 0; k < b.size(); ++k) {
    for (Element y : t) uf.unite(k, b.act_left(y, k));
    for (Element x : pg) uf.unite(k, b.act_right(k, x));
  }
  std::vector<int> reps;
  for (int k = 0; k < b.size(); ++k)
    if (static_cast<int>(uf.find(k)) == k) reps.push_back(k);
  return reps;
}

// Stabilizer of a transitive constituent in Q x P^op, encoded as sorted codes q * |P| + x for
// the pairs with q u x^-1 = u; canonical up to conjugacy (least over the orbit).
using BisetLabel = std::vector<int>;

inline std::vector<BisetLabel> orbit_decompose(const ConcreteBiset& b) {
  const FiniteGroup& q = b.left_group();
  const FiniteGroup& p = b.right_group();
  int n = b.size();
  UnionFind uf(n);
  auto qg = group_generators(q);
  auto pg = group_generators(p);
  for (int k = 0; k < n; ++k) {
    for (Element y : qg) uf.unite(k, b.act_left(y, k));
    for (Element x : pg) uf.unite(k, b.act_right(k, x));
  }
  auto stabilizer = [&](int u) {
    std::vector<std::vector<Element>> by_image(n);
    for (Element y = 0; y < q.order(); ++y) by_image[b.act_left(y, u)].push_back(y);
    BisetLabel st;
    for (Element x = 0; x < p.order(); ++x)
      for (Element y : by_image[b.act_right(u, x)]) st.push_back(y * p.order() + x);
    std::sort(st.begin(), st.end());
    return st;
  };
  std::map<std::size_t, BisetLabel> best;
  for (int k = 0; k < n; ++k) {
    BisetLabel s = stabilizer(k);
    auto& cur = best[uf.find(k)];
    if (cur.empty() || s < cur) cur = std::move(s);
  }
  std::vector<BisetLabel> out;
  for (auto& [root, lab] : best) out.push_back(std::move(lab));
  std::sort(out.begin(), out.end());
  return out;
}

inline bool is_biset_iso(const ConcreteBiset& a, const ConcreteBiset& b) {
  if (!(a.left_group() == b.left_group()) || !(a.right_group() == b.right_group())) return false;
  if (a.size() != b.size()) return false;
  return orbit_decompose(a) == orbit_decompose(b);
}

}  // namespace bfk
