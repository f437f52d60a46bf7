#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "bfk/limit.hpp"

namespace bfk::io {

using json = nlohmann::ordered_json;

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[i] = digits[h & 15];
  return out;
}

inline std::string group_fingerprint(const FiniteGroup& g) { return hex64(fnv1a64(table_file_text(g))); }

// Integers that fit in 64 bits are numbers, larger ones decimal strings.
inline json int_json(const Int& x) {
  if (x >= std::numeric_limits<long long>::min() && x <= std::numeric_limits<long long>::max())
    return json(static_cast<long long>(x));
  return json(x.str());
}

inline Int json_int(const json& j) {
  if (j.is_number_integer()) return Int(j.get<long long>());
  if (j.is_string()) return Int(j.get<std::string>());
  throw std::invalid_argument("expected an integer, got " + j.dump());
}

inline json vector_json(const Vector& v) {
  json a = json::array();
  for (const auto& x : v) a.push_back(int_json(x));
  return a;
}

inline Vector json_vector(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected an integer array");
  Vector v;
  for (const auto& x : j) v.push_back(json_int(x));
  return v;
}

// Row list; the shape is supplied by the reader.
inline json matrix_json(const Matrix& m) {
  json a = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) a.push_back(vector_json(m.row(i)));
  return a;
}

inline Matrix json_matrix(const json& j, std::size_t rows, std::size_t cols, const std::string& what) {
  if (!j.is_array() || j.size() != rows) throw std::invalid_argument(what + ": expected " + std::to_string(rows) + " rows");
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    Vector r = json_vector(j[i]);
    if (r.size() != cols) throw std::invalid_argument(what + ": expected " + std::to_string(cols) + " columns");
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = r[c];
  }
  return m;
}

inline json group_json(const FiniteGroup& g) {
  json t = json::array();
  for (int a = 0; a < g.order(); ++a) {
    json row = json::array();
    for (int b = 0; b < g.order(); ++b) row.push_back(g.mul(a, b));
    t.push_back(std::move(row));
  }
  return json{{"name", g.name()}, {"p", g.prime()}, {"order", g.order()}, {"table", std::move(t)}};
}

inline GroupPtr json_group(const json& j) {
  int p = j.at("p").get<int>(), n = j.at("order").get<int>();
  const json& t = j.at("table");
  if (!t.is_array() || static_cast<int>(t.size()) != n) throw std::invalid_argument("group: table has wrong row count");
  std::vector<Element> flat;
  for (const auto& row : t) {
    if (!row.is_array() || static_cast<int>(row.size()) != n) throw std::invalid_argument("group: ragged table");
    for (const auto& x : row) flat.push_back(x.get<int>());
  }
  auto g = std::make_shared<FiniteGroup>(p, std::move(flat), j.value("name", std::string()));
  if (!g->is_associative()) throw std::invalid_argument("group: table is not associative");
  return g;
}

inline json members_json(const std::vector<Element>& m) { return json(m); }

// Subgroup list and the nonzero Moebius values, keyed by the table fingerprint.
inline json lattice_json(const SubgroupLattice& l) {
  json subs = json::array();
  for (int i = 0; i < l.size(); ++i) subs.push_back(members_json(l.members(i)));
  json mu = json::array();
  for (int s = 0; s < l.size(); ++s) {
    const auto& row = l.moebius_from(s);
    for (int t = 0; t < l.size(); ++t)
      if (row[t] != 0) mu.push_back({s, t, row[t]});
  }
  return json{{"format", "bfk-lattice"},
              {"version", 1},
              {"group_fingerprint", group_fingerprint(l.group())},
              {"subgroups", std::move(subs)},
              {"moebius", std::move(mu)}};
}

inline LatticePtr json_lattice(GroupPtr g, const json& j) {
  if (j.value("format", "") != "bfk-lattice") throw std::invalid_argument("lattice file: wrong format tag");
  if (j.at("group_fingerprint").get<std::string>() != group_fingerprint(*g))
    throw std::invalid_argument("lattice file: fingerprint does not match the group");
  std::vector<std::vector<Element>> subs;
  for (const auto& m : j.at("subgroups")) subs.push_back(m.get<std::vector<Element>>());
  auto l = std::make_shared<const SubgroupLattice>(std::move(g), subs);
  std::vector<std::vector<long long>> rows(l->size(), std::vector<long long>(l->size(), 0));
  for (const auto& e : j.at("moebius")) {
    int s = e.at(0).get<int>(), t = e.at(1).get<int>();
    if (s < 0 || t < 0 || s >= l->size() || t >= l->size()) throw std::invalid_argument("lattice file: bad moebius index");
    rows[s][t] = e.at(2).get<long long>();
  }
  for (int s = 0; s < l->size(); ++s) l->seed_moebius(s, std::move(rows[s]));
  return l;
}

inline json section_json(const SubgroupLattice& l, Section s) {
  return json{{"T", members_json(l.members(s.T))}, {"S", members_json(l.members(s.S))}};
}

inline json system_json(const CoefficientSystem& sys) {
  const SubgroupLattice& l = *sys.base;
  json secs = json::array(), vals = json::array(), maps = json::array();
  for (Section s : sys.sections) secs.push_back(section_json(l, s));
  for (const auto& v : sys.values)
    vals.push_back(json{{"generators", v.generators()}, {"relations", matrix_json(v.relations())}});
  auto put = [&](const StructureMap& m, const std::string& kind) {
    maps.push_back(json{{"kind", kind}, {"source", m.source}, {"target", m.target}, {"matrix", matrix_json(m.matrix)}});
  };
  for (const auto& m : sys.defres) put(m, "defres");
  for (std::size_t g = 0; g < sys.conj.size(); ++g)
    for (const auto& m : sys.conj[g]) put(m, "conj:" + std::to_string(sys.conj_generators[g]));
  for (const auto& m : sys.indinf) put(m, "indinf");
  return json{{"format", "bfk-coefficient-system"},
              {"version", 1},
              {"group", group_json(l.group())},
              {"class", sys.cls.name},
              {"functor", sys.functor},
              {"has_indinf", sys.has_indinf},
              {"sections", std::move(secs)},
              {"values", std::move(vals)},
              {"maps", std::move(maps)}};
}

namespace detail {

inline bool generates(const FiniteGroup& g, const std::vector<Element>& gens) {
  std::vector<char> seen(g.order(), 0);
  std::vector<Element> queue{0};
  seen[0] = 1;
  for (std::size_t k = 0; k < queue.size(); ++k)
    for (Element x : gens) {
      Element y = g.mul(queue[k], x);
      if (!seen[y]) seen[y] = 1, queue.push_back(y);
    }
  return static_cast<int>(queue.size()) == g.order();
}

// A chain of covering pairs from big down to small, or empty if none.
inline std::vector<int> covering_chain(const CoefficientSystem& sys, const std::vector<StructureMap>& edges, int big,
                                       int small, bool downward) {
  std::map<int, std::vector<int>> out;
  for (std::size_t k = 0; k < edges.size(); ++k) out[downward ? edges[k].source : edges[k].target].push_back(static_cast<int>(k));
  const SubgroupLattice& l = *sys.base;
  Section goal = sys.sections[small];
  auto above = [&](int i) {
    Section s = sys.sections[i];
    return l.contains(goal.S, s.S) && l.contains(s.T, goal.T);
  };
  std::vector<int> path;
  int cur = big;
  while (cur != small) {
    int next = -1;
    for (int k : out[cur]) {
      int other = downward ? edges[k].target : edges[k].source;
      if (above(other)) {
        next = k;
        break;
      }
    }
    if (next < 0) return {};
    path.push_back(next);
    cur = downward ? edges[next].target : edges[next].source;
  }
  return path;
}

}  // namespace detail

// Ingest a coefficient system; the full structural validation runs before it is returned.
// Maps along non-covering nested pairs are accepted only if they agree with the composite
// of covering maps.
inline SystemPtr json_system(const json& j) {
  if (j.value("format", "") != "bfk-coefficient-system") throw std::invalid_argument("system file: wrong format tag");
  if (j.value("version", 0) != 1) throw std::invalid_argument("system file: unsupported version");
  auto g = json_group(j.at("group"));
  auto lat = make_lattice(g);
  const SubgroupLattice& l = *lat;
  auto sys = std::make_shared<CoefficientSystem>();
  sys->base = lat;
  sys->cls = SectionClass::parse(j.at("class").get<std::string>());
  sys->functor = j.at("functor").get<std::string>();
  sys->has_indinf = j.value("has_indinf", false);
  sys->sections = sections_in_class(l, sys->cls);
  for (std::size_t i = 0; i < sys->size(); ++i) sys->index[sys->sections[i]] = static_cast<int>(i);

  // File index -> canonical index.
  const json& secs = j.at("sections");
  if (secs.size() != sys->size())
    throw std::invalid_argument("system file: " + std::to_string(secs.size()) + " sections given, class has " +
                                std::to_string(sys->size()));
  std::vector<int> canon(secs.size(), -1);
  std::vector<char> hit(sys->size(), 0);
  for (std::size_t k = 0; k < secs.size(); ++k) {
    int t = l.find(secs[k].at("T").get<std::vector<Element>>());
    int s = l.find(secs[k].at("S").get<std::vector<Element>>());
    if (t < 0 || s < 0) throw std::invalid_argument("system file: section " + std::to_string(k) + " is not a pair of subgroups");
    int c = sys->find({t, s});
    if (c < 0 || hit[c]) throw std::invalid_argument("system file: section " + std::to_string(k) + " is not in the class or repeated");
    canon[k] = c;
    hit[c] = 1;
  }
  const json& vals = j.at("values");
  if (vals.size() != sys->size()) throw std::invalid_argument("system file: value count mismatch");
  sys->values.resize(sys->size());
  for (std::size_t k = 0; k < vals.size(); ++k) {
    std::size_t n = vals[k].at("generators").get<std::size_t>();
    const json& rel = vals[k].at("relations");
    Matrix r = json_matrix(rel, rel.size(), n, "value " + std::to_string(k));
    sys->values[canon[k]] = AbelianPresentation(n, std::move(r));
  }

  auto pairs = covering_pairs(l, sys->sections, sys->index);
  std::set<std::pair<int, int>> covering(pairs.begin(), pairs.end());
  std::map<std::pair<int, int>, Matrix> defres, indinf;
  std::map<Element, std::map<int, StructureMap>> conj;
  for (const auto& m : j.at("maps")) {
    std::string kind = m.at("kind").get<std::string>();
    int a = m.at("source").get<int>(), b = m.at("target").get<int>();
    if (a < 0 || b < 0 || a >= static_cast<int>(canon.size()) || b >= static_cast<int>(canon.size()))
      throw std::invalid_argument("system file: map index out of range");
    int s = canon[a], t = canon[b];
    Matrix mat = json_matrix(m.at("matrix"), sys->rank(t), sys->rank(s), kind + " map");
    if (kind == "defres") {
      defres[{s, t}] = std::move(mat);
    } else if (kind == "indinf") {
      indinf[{s, t}] = std::move(mat);
    } else if (kind.rfind("conj:", 0) == 0) {
      Element x = bfk::detail::parse_int(kind.substr(5), kind);
      if (x < 0 || x >= g->order()) throw std::invalid_argument("system file: bad conjugating element in " + kind);
      conj[x][s] = StructureMap{s, t, std::move(mat)};
    } else {
      throw std::invalid_argument("system file: unknown map kind '" + kind + "'");
    }
  }

  auto nested = [&](int big, int small) {
    Section b = sys->sections[big], s = sys->sections[small];
    return big != small && l.contains(s.S, b.S) && l.contains(s.T, s.S) && l.contains(b.T, s.T);
  };
  auto take = [&](std::map<std::pair<int, int>, Matrix>& given, std::vector<StructureMap>& out, bool downward,
                  const char* kind) {
    for (auto [big, small] : pairs) {
      auto key = downward ? std::make_pair(big, small) : std::make_pair(small, big);
      auto it = given.find(key);
      if (it == given.end())
        throw std::invalid_argument(std::string(kind) + ": missing map for covering pair " +
                                    section_str(l, sys->sections[big]) + " / " + section_str(l, sys->sections[small]));
      out.push_back(StructureMap{key.first, key.second, it->second});
    }
    for (const auto& [key, mat] : given) {
      int big = downward ? key.first : key.second, small = downward ? key.second : key.first;
      if (!nested(big, small))
        throw std::invalid_argument(std::string(kind) + ": map between sections that are not nested");
      if (covering.count({big, small})) continue;
      auto chain = detail::covering_chain(*sys, out, downward ? big : small, downward ? small : big, downward);
      if (chain.empty()) throw std::invalid_argument(std::string(kind) + ": no covering chain for a given map");
      Matrix acc = Matrix::identity(sys->rank(key.first));
      if (downward)
        for (int k : chain) acc = out[k].matrix * acc;
      else
        for (auto it = chain.rbegin(); it != chain.rend(); ++it) acc = out[*it].matrix * acc;
      if (!bfk::detail::maps_equal_mod(acc, mat, sys->values[key.second]))
        throw std::invalid_argument(std::string(kind) + ": map disagrees with the composite of covering maps at " +
                                    section_str(l, sys->sections[key.first]));
    }
  };
  take(defres, sys->defres, true, "defres");
  if (!indinf.empty() || sys->has_indinf) {
    sys->has_indinf = true;
    take(indinf, sys->indinf, false, "indinf");
  }
  for (auto& [x, row] : conj) {
    if (row.size() != sys->size()) throw std::invalid_argument("conj:" + std::to_string(x) + ": not given on every section");
    sys->conj_generators.push_back(x);
    std::vector<StructureMap> maps;
    for (auto& [s, m] : row) maps.push_back(std::move(m));
    sys->conj.push_back(std::move(maps));
  }
  if (!detail::generates(*g, sys->conj_generators))
    throw std::invalid_argument("conj: the conjugating elements do not generate the group");
  if (auto w = validate_system(*sys, true)) throw std::invalid_argument("system validation failed: " + *w);
  if (sys->functor != "external") {
    auto model = std::make_shared<const FunctorModel>(lat, parse_functor(sys->functor));
    for (std::size_t i = 0; i < sys->size(); ++i)
      if (static_cast<int>(sys->rank(static_cast<int>(i))) != model->rank(sys->sections[i]) || !sys->values[i].is_free())
        throw std::invalid_argument("system file: values do not match functor " + sys->functor);
    auto check = [&](const StructureMap& m, const Matrix& want, const char* kind) {
      if (m.matrix.rows() && m.matrix.cols() && !(m.matrix == want))
        throw std::invalid_argument(std::string(kind) + ": stored map differs from functor " + sys->functor + " at " +
                                    section_str(l, sys->sections[m.source]));
    };
    for (const auto& m : sys->defres) check(m, model->defres(sys->sections[m.source], sys->sections[m.target]), "defres");
    for (const auto& m : sys->indinf) check(m, model->indinf(sys->sections[m.source], sys->sections[m.target]), "indinf");
    for (std::size_t gi = 0; gi < sys->conj.size(); ++gi)
      for (const auto& m : sys->conj[gi]) check(m, model->conj(sys->conj_generators[gi], sys->sections[m.source]), "conj");
    sys->model = model;
  }
  return sys;
}

inline json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(p.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, p);
}

inline std::string default_cache_dir() {
  const char* v = std::getenv("BFK_CACHE_DIR");
  return v ? std::string(v) : std::string();
}

// Directory cache: lattice-<fingerprint>.json per group and system-<key>.json per system. An empty
// directory string disables caching. Entries that fail to load are rebuilt and overwritten.
class Cache {
 public:
  explicit Cache(std::string dir = default_cache_dir()) : dir_(std::move(dir)) {}

  bool enabled() const { return !dir_.empty(); }
  const std::string& dir() const { return dir_; }
  int hits() const { return hits_; }
  int misses() const { return misses_; }

  LatticePtr lattice(GroupPtr g) {
    if (!enabled()) return make_lattice(std::move(g));
    auto path = std::filesystem::path(dir_) / ("lattice-" + group_fingerprint(*g) + ".json");
    if (std::filesystem::exists(path)) {
      try {
        auto l = json_lattice(g, read_json_file(path));
        ++hits_;
        return l;
      } catch (const std::exception&) {
      }
    }
    ++misses_;
    auto l = make_lattice(std::move(g));
    store(path, lattice_json(*l).dump());
    return l;
  }

  SystemPtr system(const FunctorModelPtr& model, const SectionClass& cls, SystemOptions opt = {}) {
    if (!enabled()) return system_from_functor(model, cls, opt);
    std::string key = table_file_text(model->base().group()) + "|" + cls.name + "|" + functor_name(model->kind()) + "|" +
                      std::to_string(opt.defres) + std::to_string(opt.conj) + std::to_string(opt.indinf);
    auto path = std::filesystem::path(dir_) / ("system-" + hex64(fnv1a64(key)) + ".json");
    if (std::filesystem::exists(path)) {
      try {
        auto sys = json_system(read_json_file(path));
        if (sys->base->group() == model->base().group()) {
          auto out = std::make_shared<CoefficientSystem>(*sys);
          out->base = model->base_ptr();
          out->model = model;
          ++hits_;
          return out;
        }
      } catch (const std::exception&) {
      }
    }
    ++misses_;
    auto sys = system_from_functor(model, cls, opt);
    store(path, system_json(*sys).dump());
    return sys;
  }

 private:
  void store(const std::filesystem::path& path, const std::string& text) {
    std::lock_guard<std::mutex> lock(write_mutex_);
    write_text_file(path, text);
  }

  std::string dir_;
  std::atomic<int> hits_{0};
  std::atomic<int> misses_{0};
  std::mutex write_mutex_;
};

}  // namespace bfk::io
