#pragma once

#include <algorithm>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include <boost/dynamic_bitset.hpp>
#include <boost/functional/hash.hpp>

#include "bfk/group.hpp"

namespace bfk {

using Bits = boost::dynamic_bitset<>;

struct BitsHash {
  std::size_t operator()(const Bits& b) const { return boost::hash_value(b); }
};

class SizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Section (T,S) of a group, by subgroup indices in its lattice.
struct Section {
  int T = 0;
  int S = 0;
  friend bool operator==(const Section&, const Section&) = default;
  friend auto operator<=>(const Section&, const Section&) = default;
};

// Quotient T/S materialized as a group; cosets are numbered by their least element.
struct Quotient {
  GroupPtr group;
  std::vector<int> proj;     // ambient element -> coset index, -1 outside T
  std::vector<Element> rep;  // coset index -> least element of the coset
};

// Subgroup materialized as a group; local element i is the i-th smallest member.
struct Embedded {
  GroupPtr group;
  std::vector<Element> embed;  // local -> ambient
  std::vector<int> local;      // ambient -> local, -1 outside
};

class SubgroupLattice {
 public:
  explicit SubgroupLattice(GroupPtr g, int max_order = 0) : g_(std::move(g)) {
    if (max_order > 0 && g_->order() > max_order)
      throw SizeError("subgroup enumeration: group order " + std::to_string(g_->order()) + " exceeds bound " +
                      std::to_string(max_order));
    enumerate();
    build_relations();
  }

  // Rebuild from a stored subgroup list (cache); the list is validated.
  SubgroupLattice(GroupPtr g, const std::vector<std::vector<Element>>& subgroups) : g_(std::move(g)) {
    std::vector<Entry> entries;
    for (const auto& m : subgroups) {
      if (!is_closed(m)) throw std::invalid_argument("cached subgroup is not closed");
      Entry e;
      e.members = m;
      e.gens = generating_set(m);
      entries.push_back(std::move(e));
    }
    install(std::move(entries));
    build_relations();
  }

  const FiniteGroup& group() const { return *g_; }
  GroupPtr group_ptr() const { return g_; }
  int size() const { return static_cast<int>(members_.size()); }
  int trivial() const { return 0; }
  int whole() const { return size() - 1; }

  const std::vector<Element>& members(int i) const { return members_[i]; }
  const Bits& bits(int i) const { return bits_[i]; }
  const std::vector<Element>& generators(int i) const { return gens_[i]; }
  int order(int i) const { return static_cast<int>(members_[i].size()); }
  bool has_element(int i, Element x) const { return bits_[i][x]; }

  int find(const Bits& b) const {
    auto it = index_.find(b);
    return it == index_.end() ? -1 : it->second;
  }
  int find(const std::vector<Element>& m) const {
    Bits b(g_->order());
    for (Element x : m) b.set(x);
    return find(b);
  }

  // small is a subgroup of big
  bool contains(int big, int small) const { return bits_[small].is_subset_of(bits_[big]); }

  // Proper subgroups of i, in index order.
  const std::vector<int>& proper_subgroups(int i) const { return below_[i]; }
  std::vector<int> subgroups_between(int s, int t) const {
    std::vector<int> out;
    if (!contains(t, s)) return out;
    for (int u : below_[t])
      if (contains(u, s)) out.push_back(u);
    out.push_back(t);
    return out;
  }

  int conjugate(Element x, int i) const { return conj_[static_cast<std::size_t>(i) * g_->order() + x]; }

  int class_of(int i) const { return class_of_[i]; }
  int num_classes() const { return static_cast<int>(classes_.size()); }
  const std::vector<int>& class_members(int c) const { return classes_[c]; }
  int class_rep(int c) const { return classes_[c].front(); }

  int intersection(int a, int b) const { return find(bits_[a] & bits_[b]); }

  int generated_by(const std::vector<Element>& gens) const {
    return find(closure(gens));
  }
  int join(int a, int b) const {
    std::vector<Element> gs = gens_[a];
    gs.insert(gs.end(), gens_[b].begin(), gens_[b].end());
    return generated_by(gs);
  }

  bool normalizes(Element x, int s) const { return conjugate(x, s) == s; }
  bool is_normal_in(int s, int t) const {
    if (!contains(t, s)) return false;
    for (Element x : gens_[t])
      if (!normalizes(x, s)) return false;
    return true;
  }
  bool is_normal(int s) const { return is_normal_in(s, whole()); }

  int normalizer(int s) const {
    std::vector<Element> els;
    for (Element x = 0; x < g_->order(); ++x)
      if (normalizes(x, s)) els.push_back(x);
    return find(els);
  }

  int center() const {
    std::vector<Element> els;
    for (Element x = 0; x < g_->order(); ++x) {
      bool c = true;
      for (Element y : gens_[whole()])
        if (g_->mul(x, y) != g_->mul(y, x)) c = false;
      if (c) els.push_back(x);
    }
    return find(els);
  }

  bool is_cyclic(int i) const { return cyclic_[i]; }

  std::vector<int> maximal_subgroups(int t) const {
    std::vector<int> out;
    for (int u : below_[t])
      if (order(u) * g_->prime() == order(t)) out.push_back(u);
    return out;
  }

  int frattini(int t) const {
    Bits b = bits_[t];
    for (int u : maximal_subgroups(t)) b &= bits_[u];
    return find(b);
  }

  // Moebius function of the subgroup poset.
  long long moebius(int s, int t) const {
    if (!contains(t, s)) throw std::domain_error("moebius: S is not contained in T");
    return moebius_row(s)[t];
  }
  const std::vector<long long>& moebius_from(int s) const { return moebius_row(s); }
  // Install a row read from a cache; ignored if the row is already known.
  void seed_moebius(int s, std::vector<long long> row) const {
    if (row.size() != static_cast<std::size_t>(size())) throw std::invalid_argument("moebius row: wrong length");
    std::lock_guard<std::mutex> lock(mu_mutex_);
    if (!mu_rows_[s]) mu_rows_[s] = std::make_unique<std::vector<long long>>(std::move(row));
  }

  // Label of the quotient T/S, read off from S and T directly (S normal in T assumed).
  ClassLabel section_label(int t, int s) const {
    const FiniteGroup& g = *g_;
    int p = g.prime();
    bool exp_p = true;
    for (Element x : members_[t])
      if (!bits_[s][g.pow(x, p)]) {
        exp_p = false;
        break;
      }
    bool ab = true;
    for (Element x : gens_[t])
      for (Element y : gens_[t]) {
        Element c = g.mul(g.mul(x, y), g.inv(g.mul(y, x)));
        if (!bits_[s][c]) ab = false;
      }
    int k = log_p(order(t) / order(s), p);
    if (ab && exp_p) return {ClassLabel::Kind::ElementaryAbelian, k};
    if (!ab && exp_p && k == 3) return {ClassLabel::Kind::Extraspecial, 0};
    return {};
  }

  bool is_section(int t, int s) const { return is_normal_in(s, t); }

  Quotient quotient(int t, int s) const {
    if (!is_normal_in(s, t)) throw std::domain_error("quotient: S is not normal in T");
    const FiniteGroup& g = *g_;
    Quotient q;
    q.proj.assign(g.order(), -1);
    for (Element x : members_[t]) {
      if (q.proj[x] != -1) continue;
      int c = static_cast<int>(q.rep.size());
      q.rep.push_back(x);
      for (Element y : members_[s]) q.proj[g.mul(x, y)] = c;
    }
    int n = static_cast<int>(q.rep.size());
    std::vector<Element> table(static_cast<std::size_t>(n) * n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) table[static_cast<std::size_t>(a) * n + b] = q.proj[g.mul(q.rep[a], q.rep[b])];
    q.group = std::make_shared<FiniteGroup>(g.prime(), std::move(table));
    return q;
  }

  Embedded subgroup_group(int i) const {
    const FiniteGroup& g = *g_;
    Embedded e;
    e.embed = members_[i];
    e.local.assign(g.order(), -1);
    for (std::size_t k = 0; k < e.embed.size(); ++k) e.local[e.embed[k]] = static_cast<int>(k);
    int n = static_cast<int>(e.embed.size());
    std::vector<Element> table(static_cast<std::size_t>(n) * n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) table[static_cast<std::size_t>(a) * n + b] = e.local[g.mul(e.embed[a], e.embed[b])];
    e.group = std::make_shared<FiniteGroup>(g.prime(), std::move(table));
    return e;
  }

  Bits closure(const std::vector<Element>& gens) const {
    const FiniteGroup& g = *g_;
    Bits b(g.order());
    std::vector<Element> queue{0};
    b.set(0);
    for (std::size_t k = 0; k < queue.size(); ++k)
      for (Element x : gens) {
        Element y = g.mul(queue[k], x);
        if (!b[y]) {
          b.set(y);
          queue.push_back(y);
        }
      }
    return b;
  }

 private:
  struct Entry {
    std::vector<Element> members;
    std::vector<Element> gens;
  };

  bool is_closed(const std::vector<Element>& m) const {
    Bits b(g_->order());
    for (Element x : m) b.set(x);
    if (m.empty() || !b[0]) return false;
    for (Element x : m)
      for (Element y : m)
        if (!b[g_->mul(x, y)]) return false;
    return true;
  }

  std::vector<Element> generating_set(const std::vector<Element>& m) const {
    std::vector<Element> gens;
    Bits cur = closure(gens);
    for (Element x : m)
      if (!cur[x]) {
        gens.push_back(x);
        cur = closure(gens);
      }
    return gens;
  }

  // Every subgroup K of a p-group has a maximal subgroup H with K = H u gH u ... u g^{p-1}H for
  // g in N(H) \ H with g^p in H; grow layer by layer.
  void enumerate() {
    const FiniteGroup& g = *g_;
    int n = g.order(), p = g.prime();
    std::vector<Entry> entries{{{0}, {}}};
    std::unordered_map<Bits, int, BitsHash> seen;
    Bits triv(n);
    triv.set(0);
    seen.emplace(triv, 0);
    std::vector<Bits> bits{triv};
    for (std::size_t k = 0; k < entries.size(); ++k) {
      Bits hb = bits[k];
      Bits done = hb;
      std::vector<Element> hm = entries[k].members;
      std::vector<Element> hg = entries[k].gens;
      for (Element x = 0; x < n; ++x) {
        if (done[x] || !hb[g.pow(x, p)]) continue;
        bool norm = true;
        for (Element h : hg)
          if (!hb[g.conj(x, h)]) {
            norm = false;
            break;
          }
        if (!norm) continue;
        Bits kb = hb;
        Element xi = 0;
        for (int i = 1; i < p; ++i) {
          xi = g.mul(xi, x);
          for (Element h : hm) kb.set(g.mul(xi, h));
        }
        done |= kb;
        if (seen.count(kb)) continue;
        seen.emplace(kb, static_cast<int>(entries.size()));
        Entry e;
        for (Element y = 0; y < n; ++y)
          if (kb[y]) e.members.push_back(y);
        e.gens = hg;
        e.gens.push_back(x);
        entries.push_back(std::move(e));
        bits.push_back(kb);
      }
    }
    install(std::move(entries));
  }

  void install(std::vector<Entry> entries) {
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      if (a.members.size() != b.members.size()) return a.members.size() < b.members.size();
      return a.members < b.members;
    });
    int n = g_->order();
    for (auto& e : entries) {
      Bits b(n);
      for (Element x : e.members) b.set(x);
      if (index_.count(b)) throw std::invalid_argument("duplicate subgroup");
      index_.emplace(b, static_cast<int>(members_.size()));
      bits_.push_back(std::move(b));
      members_.push_back(std::move(e.members));
      gens_.push_back(std::move(e.gens));
    }
  }

  void build_relations() {
    const FiniteGroup& g = *g_;
    int n = g.order(), m = size();
    below_.assign(m, {});
    for (int t = 0; t < m; ++t)
      for (int u = 0; u < t; ++u)
        if (order(u) < order(t) && contains(t, u)) below_[t].push_back(u);
    cyclic_.assign(m, false);
    for (int i = 0; i < m; ++i)
      for (Element x : members_[i])
        if (g.element_order(x) == order(i)) {
          cyclic_[i] = true;
          break;
        }
    conj_.assign(static_cast<std::size_t>(m) * n, -1);
    bool ab = g.is_abelian();
    for (int i = 0; i < m; ++i)
      for (Element x = 0; x < n; ++x) {
        if (ab) {
          conj_[static_cast<std::size_t>(i) * n + x] = i;
          continue;
        }
        Bits b(n);
        for (Element y : members_[i]) b.set(g.conj(x, y));
        conj_[static_cast<std::size_t>(i) * n + x] = find(b);
      }
    class_of_.assign(m, -1);
    for (int i = 0; i < m; ++i) {
      if (class_of_[i] != -1) continue;
      std::vector<int> cls;
      for (Element x = 0; x < n; ++x) cls.push_back(conjugate(x, i));
      std::sort(cls.begin(), cls.end());
      cls.erase(std::unique(cls.begin(), cls.end()), cls.end());
      for (int j : cls) class_of_[j] = static_cast<int>(classes_.size());
      classes_.push_back(std::move(cls));
    }
    mu_rows_.resize(m);
  }

  const std::vector<long long>& moebius_row(int s) const {
    std::lock_guard<std::mutex> lock(mu_mutex_);
    auto& row = mu_rows_[s];
    if (row) return *row;
    auto r = std::make_unique<std::vector<long long>>(size(), 0);
    for (int t = s; t < size(); ++t) {
      if (!contains(t, s)) continue;
      if (t == s) {
        (*r)[t] = 1;
        continue;
      }
      long long acc = 0;
      for (int u : below_[t])
        if (contains(u, s)) acc += (*r)[u];
      (*r)[t] = -acc;
    }
    row = std::move(r);
    return *row;
  }

  GroupPtr g_;
  std::vector<std::vector<Element>> members_;
  std::vector<Bits> bits_;
  std::vector<std::vector<Element>> gens_;
  std::unordered_map<Bits, int, BitsHash> index_;
  std::vector<std::vector<int>> below_;
  std::vector<bool> cyclic_;
  std::vector<int> conj_;
  std::vector<int> class_of_;
  std::vector<std::vector<int>> classes_;
  mutable std::mutex mu_mutex_;
  mutable std::vector<std::unique_ptr<std::vector<long long>>> mu_rows_;
};

using LatticePtr = std::shared_ptr<const SubgroupLattice>;

inline LatticePtr make_lattice(GroupPtr g, int max_order = 0) {
  return std::make_shared<const SubgroupLattice>(std::move(g), max_order);
}

// All sections (T,S) of the group whose quotient lies in the class; ordered by T then S.
inline std::vector<Section> sections_in_class(const SubgroupLattice& lat, const SectionClass& cls) {
  std::vector<Section> out;
  for (int t = 0; t < lat.size(); ++t) {
    for (int s : lat.subgroups_between(lat.trivial(), t)) {
      if (!lat.is_normal_in(s, t)) continue;
      if (cls.admits(lat.section_label(t, s))) out.push_back({t, s});
    }
  }
  return out;
}

}  // namespace bfk
