#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bfk {

using Element = int;

inline bool is_prime(int n) {
  if (n < 2) return false;
  for (int d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

// Exponent k with p^k = n, or -1.
inline int log_p(long long n, int p) {
  if (n < 1) return -1;
  int k = 0;
  while (n % p == 0) n /= p, ++k;
  return n == 1 ? k : -1;
}

// Finite p-group given by its multiplication table; element 0 is the identity.
class FiniteGroup {
 public:
  FiniteGroup(int p, std::vector<Element> table, std::string name = {}) : p_(p), name_(std::move(name)) {
    if (p % 2 == 0 || !is_prime(p)) throw std::invalid_argument("group: prime must be odd, got " + std::to_string(p));
    std::size_t n = 1;
    while (n * n < table.size()) ++n;
    if (n * n != table.size()) throw std::invalid_argument("group: table is not square");
    n_ = static_cast<int>(n);
    if (log_p(n_, p_) < 0) throw std::invalid_argument("group: order " + std::to_string(n_) + " is not a power of p");
    table_ = std::move(table);
    inverse_.assign(n_, -1);
    for (Element a = 0; a < n_; ++a) {
      if (mul(0, a) != a || mul(a, 0) != a) throw std::invalid_argument("group: 0 is not the identity");
      std::vector<char> seen(n_, 0);
      for (Element b = 0; b < n_; ++b) {
        Element c = mul(a, b);
        if (c < 0 || c >= n_ || seen[c]) throw std::invalid_argument("group: table row is not a permutation");
        seen[c] = 1;
        if (c == 0) inverse_[a] = b;
      }
    }
    for (Element a = 0; a < n_; ++a)
      if (mul(inverse_[a], a) != 0) throw std::invalid_argument("group: left and right inverses differ");
  }

  int prime() const { return p_; }
  int order() const { return n_; }
  const std::string& name() const { return name_; }
  const std::vector<Element>& table() const { return table_; }

  Element mul(Element a, Element b) const { return table_[static_cast<std::size_t>(a) * n_ + b]; }
  Element inv(Element a) const { return inverse_[a]; }
  // x g x^-1
  Element conj(Element x, Element g) const { return mul(mul(x, g), inverse_[x]); }
  Element pow(Element a, long long k) const {
    Element r = 0;
    for (long long i = 0; i < k; ++i) r = mul(r, a);
    return r;
  }
  int element_order(Element a) const {
    int k = 1;
    for (Element x = a; x != 0; x = mul(x, a)) ++k;
    return a == 0 ? 1 : k;
  }
  int exponent() const {
    int e = 1;
    for (Element a = 0; a < n_; ++a) e = std::lcm(e, element_order(a));
    return e;
  }
  bool is_abelian() const {
    for (Element a = 0; a < n_; ++a)
      for (Element b = a + 1; b < n_; ++b)
        if (mul(a, b) != mul(b, a)) return false;
    return true;
  }

  // Exhaustive associativity check (n^3 products).
  bool is_associative() const {
    for (Element a = 0; a < n_; ++a)
      for (Element b = 0; b < n_; ++b) {
        Element ab = mul(a, b);
        for (Element c = 0; c < n_; ++c)
          if (mul(ab, c) != mul(a, mul(b, c))) return false;
      }
    return true;
  }

  // FNV-1a over the prime and the table.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 1469598103934665603ull;
    auto feed = [&h](std::uint32_t x) {
      for (int k = 0; k < 4; ++k) {
        h ^= (x >> (8 * k)) & 0xffu;
        h *= 1099511628211ull;
      }
    };
    feed(static_cast<std::uint32_t>(p_));
    feed(static_cast<std::uint32_t>(n_));
    for (Element e : table_) feed(static_cast<std::uint32_t>(e));
    return h;
  }

  friend bool operator==(const FiniteGroup& a, const FiniteGroup& b) { return a.p_ == b.p_ && a.table_ == b.table_; }

 private:
  int p_ = 3;
  int n_ = 1;
  std::string name_;
  std::vector<Element> table_;
  std::vector<Element> inverse_;
};

using GroupPtr = std::shared_ptr<const FiniteGroup>;

inline GroupPtr cyclic_group(int p, int n) {
  if (log_p(n, p) < 0) throw std::invalid_argument("cyclic: order must be a power of p");
  std::vector<Element> t(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) t[static_cast<std::size_t>(i) * n + j] = (i + j) % n;
  return std::make_shared<FiniteGroup>(p, std::move(t), "cyclic:" + std::to_string(n));
}

inline GroupPtr direct_product(const FiniteGroup& g, const FiniteGroup& h, std::string name = {}) {
  if (g.prime() != h.prime()) throw std::invalid_argument("product: primes differ");
  int a = g.order(), b = h.order(), n = a * b;
  std::vector<Element> t(static_cast<std::size_t>(n) * n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y)
      t[static_cast<std::size_t>(x) * n + y] = g.mul(x % a, y % a) + a * h.mul(x / a, y / a);
  if (name.empty()) name = "prod:(" + g.name() + "),(" + h.name() + ")";
  return std::make_shared<FiniteGroup>(g.prime(), std::move(t), std::move(name));
}

inline GroupPtr elementary_abelian(int p, int r) {
  if (r < 0) throw std::invalid_argument("elab: negative rank");
  int n = 1;
  for (int i = 0; i < r; ++i) n *= p;
  std::vector<Element> t(static_cast<std::size_t>(n) * n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) {
      int z = 0, base = 1, a = x, b = y;
      for (int i = 0; i < r; ++i) {
        z += ((a % p + b % p) % p) * base;
        a /= p, b /= p, base *= p;
      }
      t[static_cast<std::size_t>(x) * n + y] = z;
    }
  return std::make_shared<FiniteGroup>(p, std::move(t), "elab:" + std::to_string(p) + ":" + std::to_string(r));
}

// Unitriangular 3x3 matrices over F_p; (a,b,c) <-> index a + p b + p^2 c.
inline GroupPtr extraspecial(int p) {
  if (p % 2 == 0 || !is_prime(p)) throw std::invalid_argument("xsp: prime must be odd");
  int n = p * p * p;
  std::vector<Element> t(static_cast<std::size_t>(n) * n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) {
      int a = x % p, b = (x / p) % p, c = x / (p * p);
      int a2 = y % p, b2 = (y / p) % p, c2 = y / (p * p);
      int ra = (a + a2) % p, rb = (b + b2) % p, rc = (c + c2 + a * b2) % p;
      t[static_cast<std::size_t>(x) * n + y] = ra + p * rb + p * p * rc;
    }
  return std::make_shared<FiniteGroup>(p, std::move(t), "xsp:" + std::to_string(p));
}

// Relabel by a permutation: new element perm[g] corresponds to old g (perm[0] must be 0).
inline GroupPtr relabel(const FiniteGroup& g, const std::vector<Element>& perm) {
  int n = g.order();
  if (static_cast<int>(perm.size()) != n || perm[0] != 0) throw std::invalid_argument("relabel: bad permutation");
  std::vector<Element> t(static_cast<std::size_t>(n) * n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) t[static_cast<std::size_t>(perm[x]) * n + perm[y]] = perm[g.mul(x, y)];
  return std::make_shared<FiniteGroup>(g.prime(), std::move(t), g.name());
}

inline GroupPtr random_relabel(const FiniteGroup& g, std::mt19937_64& rng) {
  std::vector<Element> perm(g.order());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin() + 1, perm.end(), rng);
  return relabel(g, perm);
}

inline GroupPtr read_table_stream(std::istream& in, const std::string& name) {
  std::string key;
  int p = 0, n = 0;
  if (!(in >> key) || key != "p" || !(in >> p)) throw std::invalid_argument("table file: expected 'p <prime>'");
  if (!(in >> key) || key != "order" || !(in >> n) || n <= 0)
    throw std::invalid_argument("table file: expected 'order <n>'");
  std::vector<Element> t(static_cast<std::size_t>(n) * n);
  for (auto& e : t)
    if (!(in >> e)) throw std::invalid_argument("table file: truncated table");
  return std::make_shared<FiniteGroup>(p, std::move(t), name);
}

inline GroupPtr read_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open group table file: " + path);
  return read_table_stream(in, path);
}

inline std::string table_file_text(const FiniteGroup& g) {
  std::ostringstream os;
  os << "p " << g.prime() << "\norder " << g.order() << "\n";
  for (int a = 0; a < g.order(); ++a) {
    for (int b = 0; b < g.order(); ++b) os << (b ? " " : "") << g.mul(a, b);
    os << "\n";
  }
  return os.str();
}

namespace detail {

inline std::vector<std::string> split_top_level(const std::string& s) {
  std::vector<std::string> parts;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (depth < 0) throw std::invalid_argument("descriptor: unbalanced parentheses in '" + s + "'");
    if (c == ',' && depth == 0) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (depth != 0) throw std::invalid_argument("descriptor: unbalanced parentheses in '" + s + "'");
  parts.push_back(cur);
  return parts;
}

inline std::string strip_parens(std::string s) {
  while (s.size() >= 2 && s.front() == '(' && s.back() == ')') {
    int depth = 0;
    bool wraps = true;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '(') ++depth;
      if (s[i] == ')') --depth;
      if (depth == 0 && i + 1 < s.size()) wraps = false;
    }
    if (!wraps) break;
    s = s.substr(1, s.size() - 2);
  }
  return s;
}

inline int parse_int(const std::string& s, const std::string& ctx) {
  std::size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("descriptor: bad integer '" + s + "' in '" + ctx + "'");
  }
  if (pos != s.size()) throw std::invalid_argument("descriptor: bad integer '" + s + "' in '" + ctx + "'");
  return v;
}

}  // namespace detail

// Descriptors: cyclic:<order>, elab:<p>:<rank>, xsp:<p>, prod:<d1>,<d2>[,...] (parenthesize nested
// products), table:<path> or a path to a table file. `p` is used where the descriptor leaves it open.
inline GroupPtr build_group(const std::string& descriptor, int p = 3) {
  std::string d = detail::strip_parens(descriptor);
  auto colon = d.find(':');
  std::string head = d.substr(0, colon);
  std::string rest = colon == std::string::npos ? "" : d.substr(colon + 1);
  if (head == "cyclic") {
    int n = detail::parse_int(rest, d);
    if (n > 1) {
      int q = 2;
      while (n % q != 0) ++q;
      p = q;
    }
    if (p % 2 == 0) throw std::invalid_argument("descriptor: even prime rejected in '" + d + "'");
    return cyclic_group(p, n);
  }
  if (head == "elab") {
    auto c2 = rest.find(':');
    if (c2 == std::string::npos) throw std::invalid_argument("descriptor: expected elab:<p>:<rank>");
    int q = detail::parse_int(rest.substr(0, c2), d);
    int r = detail::parse_int(rest.substr(c2 + 1), d);
    if (q % 2 == 0 || !is_prime(q)) throw std::invalid_argument("descriptor: prime must be odd in '" + d + "'");
    return elementary_abelian(q, r);
  }
  if (head == "xsp") {
    int q = detail::parse_int(rest, d);
    if (q % 2 == 0 || !is_prime(q)) throw std::invalid_argument("descriptor: prime must be odd in '" + d + "'");
    return extraspecial(q);
  }
  if (head == "prod") {
    auto parts = detail::split_top_level(rest);
    if (parts.size() < 2) throw std::invalid_argument("descriptor: prod needs at least two factors");
    GroupPtr g = build_group(parts[0], p);
    for (std::size_t i = 1; i < parts.size(); ++i) g = direct_product(*g, *build_group(parts[i], g->prime()));
    return std::make_shared<FiniteGroup>(g->prime(), g->table(), d);
  }
  if (head == "table") return read_table_file(rest);
  std::ifstream probe(d);
  if (probe) return read_table_stream(probe, d);
  throw std::invalid_argument("descriptor: unknown group descriptor '" + descriptor + "'");
}

// Groups of the catalog: all abelian groups and the extraspecial group (and its product with C_p)
// up to the order bound.
inline std::vector<std::string> catalog_descriptors(int p, int max_order) {
  std::vector<std::string> out;
  auto pk = [p](int k) {
    int n = 1;
    for (int i = 0; i < k; ++i) n *= p;
    return n;
  };
  int max_k = 0;
  while (pk(max_k + 1) <= max_order) ++max_k;
  // Partitions of k, descending parts.
  std::vector<std::vector<int>> parts;
  std::vector<int> cur;
  auto gen = [&](auto&& self, int left, int maxpart) -> void {
    if (left == 0) {
      parts.push_back(cur);
      return;
    }
    for (int a = std::min(left, maxpart); a >= 1; --a) {
      cur.push_back(a);
      self(self, left - a, a);
      cur.pop_back();
    }
  };
  for (int k = 0; k <= max_k; ++k) {
    parts.clear();
    gen(gen, k, k);
    if (k == 0) {
      out.push_back("cyclic:1");
      continue;
    }
    for (const auto& lambda : parts) {
      bool all_one = std::all_of(lambda.begin(), lambda.end(), [](int a) { return a == 1; });
      if (lambda.size() == 1) {
        out.push_back("cyclic:" + std::to_string(pk(lambda[0])));
      } else if (all_one) {
        out.push_back("elab:" + std::to_string(p) + ":" + std::to_string(k));
      } else {
        std::string d = "prod:";
        std::size_t ones = static_cast<std::size_t>(std::count(lambda.begin(), lambda.end(), 1));
        bool first = true;
        for (int a : lambda) {
          if (a == 1 && ones >= 2) break;
          d += (first ? "" : ",") + std::string("cyclic:") + std::to_string(pk(a));
          first = false;
        }
        if (ones >= 2) d += ",elab:" + std::to_string(p) + ":" + std::to_string(ones);
        out.push_back(d);
      }
    }
    if (k == 3) out.push_back("xsp:" + std::to_string(p));
    if (k == 4) out.push_back("prod:xsp:" + std::to_string(p) + ",cyclic:" + std::to_string(p));
  }
  return out;
}

struct ClassLabel {
  enum class Kind { ElementaryAbelian, Extraspecial, Other };
  Kind kind = Kind::Other;
  int rank = 0;  // for ElementaryAbelian

  std::string str() const {
    switch (kind) {
      case Kind::ElementaryAbelian: return "elementary-abelian(" + std::to_string(rank) + ")";
      case Kind::Extraspecial: return "extraspecial";
      default: return "other";
    }
  }
  friend bool operator==(const ClassLabel&, const ClassLabel&) = default;
};

// Order, commutativity and exponent determine the label.
inline ClassLabel classify_quotient(const FiniteGroup& q) {
  int p = q.prime();
  int e = q.exponent();
  bool ab = q.is_abelian();
  int k = log_p(q.order(), p);
  if (ab && (e == 1 || e == p)) return {ClassLabel::Kind::ElementaryAbelian, k};
  if (!ab && k == 3 && e == p) return {ClassLabel::Kind::Extraspecial, 0};
  return {};
}

// A class of groups closed under sections: elementary abelian groups of rank <= max_rank,
// optionally together with the extraspecial group of order p^3 and exponent p.
struct SectionClass {
  int max_rank = 1 << 20;  // effectively unbounded
  bool extraspecial = false;
  std::string name = "E";

  bool admits(const ClassLabel& l) const {
    if (l.kind == ClassLabel::Kind::ElementaryAbelian) return l.rank <= max_rank;
    if (l.kind == ClassLabel::Kind::Extraspecial) return extraspecial;
    return false;
  }
  bool subclass_of(const SectionClass& y) const {
    return max_rank <= y.max_rank && (!extraspecial || y.extraspecial);
  }
  bool unbounded() const { return max_rank >= (1 << 20); }

  // E, E2, E3, X, X2, X3, or E<r>/X<r>.
  static SectionClass parse(const std::string& s) {
    if (s.empty() || (s[0] != 'E' && s[0] != 'X')) throw std::invalid_argument("class: expected E, X, E<r> or X<r>, got '" + s + "'");
    SectionClass c;
    c.extraspecial = s[0] == 'X';
    c.name = s;
    if (s.size() > 1) {
      c.max_rank = detail::parse_int(s.substr(1), s);
      if (c.max_rank < 0) throw std::invalid_argument("class: negative rank");
    }
    return c;
  }
};

}  // namespace bfk
