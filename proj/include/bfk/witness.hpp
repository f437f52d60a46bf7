#pragma once

#include <string>
#include <vector>

#include "bfk/coefficient_io.hpp"

namespace bfk::lab {

using io::json;

// Machine-checkable evidence that a claim fails. Every kind is confirmed by a single pass of
// integer arithmetic, without solving anything:
//   product    {matrix A, vector x, expected y}: A x != y
//   kernel     {matrix A, vector x}: x != 0 and A x = 0
//   nonmember  {generators G, hnf H, coefficients C, vector v}: H = C G is in echelon form, every
//              row of G reduces to zero modulo H, and v does not
//   values     {lhs, rhs}: the two recorded values differ

inline json product_witness(const Matrix& a, const Vector& x, const Vector& y) {
  return {{"kind", "product"}, {"matrix", io::matrix_json(a)}, {"vector", io::vector_json(x)}, {"expected", io::vector_json(y)}};
}

inline json kernel_witness(const Matrix& a, const Vector& x) {
  return {{"kind", "kernel"}, {"matrix", io::matrix_json(a)}, {"vector", io::vector_json(x)}};
}

inline json values_witness(json lhs, json rhs) { return {{"kind", "values"}, {"lhs", std::move(lhs)}, {"rhs", std::move(rhs)}}; }

// Echelon basis of span(gens) with the transformation expressing it in the generators.
inline json nonmember_witness(const std::vector<Vector>& gens, const Vector& v) {
  std::size_t n = v.size(), k = gens.size();
  EchelonBuilder eb(n + k);
  for (std::size_t i = 0; i < k; ++i) {
    if (gens[i].size() != n) throw std::invalid_argument("witness: generator width");
    Vector row(n + k);
    std::copy(gens[i].begin(), gens[i].end(), row.begin());
    row[n + i] = 1;
    eb.insert(std::move(row));
  }
  Matrix full = eb.hermite();
  std::vector<Vector> h, c;
  for (std::size_t i = 0; i < full.rows(); ++i) {
    Vector r = full.row(i);
    Vector head(r.begin(), r.begin() + static_cast<long>(n));
    if (bfk::is_zero(head)) continue;
    h.push_back(std::move(head));
    c.emplace_back(r.begin() + static_cast<long>(n), r.end());
  }
  return {{"kind", "nonmember"},
          {"generators", io::matrix_json(Matrix::from_rows(gens, n))},
          {"hnf", io::matrix_json(Matrix::from_rows(h, n))},
          {"coefficients", io::matrix_json(Matrix::from_rows(c, k))},
          {"vector", io::vector_json(v)}};
}

namespace detail {

inline Matrix loose_matrix(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("witness: matrix must be an array");
  std::size_t rows = j.size();
  std::size_t cols = rows ? j[0].size() : 0;
  return io::json_matrix(j, rows, cols, "witness");
}

// Remainder of v modulo an echelon basis, or nullopt when a pivot does not divide.
inline std::optional<Vector> echelon_remainder(const Matrix& h, Vector v) {
  for (std::size_t i = 0; i < h.rows(); ++i) {
    std::size_t c = 0;
    while (c < h.cols() && h(i, c) == 0) ++c;
    if (v[c] % h(i, c) != 0) return std::nullopt;
    Int q = v[c] / h(i, c);
    if (q != 0)
      for (std::size_t j = c; j < h.cols(); ++j) v[j] -= q * h(i, j);
  }
  return v;
}

inline bool echelon(const Matrix& h) {
  std::size_t last = 0;
  for (std::size_t i = 0; i < h.rows(); ++i) {
    std::size_t c = 0;
    while (c < h.cols() && h(i, c) == 0) ++c;
    if (c == h.cols() || (i > 0 && c <= last)) return false;
    last = c;
  }
  return true;
}

}  // namespace detail

// True when the witness demonstrates a failure; malformed witnesses are never confirmed.
inline bool recheck_witness(const json& w) {
  try {
    std::string kind = w.at("kind");
    if (kind == "values") return w.at("lhs") != w.at("rhs");
    if (kind == "product") {
      Matrix a = detail::loose_matrix(w.at("matrix"));
      Vector x = io::json_vector(w.at("vector")), y = io::json_vector(w.at("expected"));
      if (x.size() != a.cols() || y.size() != a.rows()) return false;
      return a.apply(x) != y;
    }
    if (kind == "kernel") {
      Matrix a = detail::loose_matrix(w.at("matrix"));
      Vector x = io::json_vector(w.at("vector"));
      if (x.size() != a.cols() || bfk::is_zero(x)) return false;
      return a.rows() == 0 || bfk::is_zero(a.apply(x));
    }
    if (kind == "nonmember") {
      Matrix g = detail::loose_matrix(w.at("generators"));
      Matrix h = detail::loose_matrix(w.at("hnf"));
      Matrix c = detail::loose_matrix(w.at("coefficients"));
      Vector v = io::json_vector(w.at("vector"));
      std::size_t n = v.size();
      if ((g.rows() && g.cols() != n) || (h.rows() && h.cols() != n)) return false;
      if (h.rows() == 0) {
        for (std::size_t i = 0; i < g.rows(); ++i)
          if (!bfk::is_zero(g.row(i))) return false;
        return !bfk::is_zero(v);
      }
      if (c.rows() != h.rows() || c.cols() != g.rows() || !detail::echelon(h)) return false;
      if (!(c * g == h)) return false;
      for (std::size_t i = 0; i < g.rows(); ++i) {
        auto r = detail::echelon_remainder(h, g.row(i));
        if (!r || !bfk::is_zero(*r)) return false;
      }
      auto r = detail::echelon_remainder(h, v);
      return !r || !bfk::is_zero(*r);
    }
  } catch (const std::exception&) {
    return false;
  }
  return false;
}

}  // namespace bfk::lab
