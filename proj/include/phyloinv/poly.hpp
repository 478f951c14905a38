#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "phyloinv/common.hpp"
#include "phyloinv/linalg.hpp"
#include "phyloinv/tensor.hpp"

namespace phyloinv {

// A polynomial variable: either a tensor entry P[i_1,...,i_n] or an
// auxiliary z-matrix entry z^k_{i,b}. Variables are totally ordered by
// (kind, indices) so monomials have a canonical form.
struct Variable {
  enum class Kind : std::uint8_t { Entry = 0, Z = 1 };

  Kind kind = Kind::Entry;
  std::vector<int> idx;  // Entry: index tuple; Z: {axis k, row i, col b}

  static Variable entry(std::vector<int> indices) { return Variable{Kind::Entry, std::move(indices)}; }
  static Variable z(int k, int i, int b) { return Variable{Kind::Z, {k, i, b}}; }

  bool operator==(const Variable& o) const { return kind == o.kind && idx == o.idx; }
  bool operator<(const Variable& o) const {
    if (kind != o.kind) return kind < o.kind;
    return idx < o.idx;
  }

  std::string str() const {
    std::string out;
    std::size_t start = 0;
    if (kind == Kind::Entry) {
      out = "P[";
    } else {
      out = "z" + std::to_string(idx[0] + 1) + "[";  // z-axis printed 1-based
      start = 1;
    }
    for (std::size_t i = start; i < idx.size(); ++i) {
      if (i > start) out += ',';
      out += std::to_string(idx[i]);
    }
    return out + "]";
  }
};

// Sorted (variable, exponent) list with exponents >= 1.
using Monomial = std::vector<std::pair<Variable, int>>;

inline Monomial monomial_mul(const Monomial& a, const Monomial& b) {
  Monomial out;
  out.reserve(a.size() + b.size());
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first == b[j].first) {
      out.push_back({a[i].first, a[i].second + b[j].second});
      ++i;
      ++j;
    } else if (a[i].first < b[j].first) {
      out.push_back(a[i++]);
    } else {
      out.push_back(b[j++]);
    }
  }
  while (i < a.size()) out.push_back(a[i++]);
  while (j < b.size()) out.push_back(b[j++]);
  return out;
}

inline std::string monomial_str(const Monomial& m) {
  if (m.empty()) return "1";
  std::string out;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (i) out += ' ';
    out += m[i].first.str() + "^" + std::to_string(m[i].second);
  }
  return out;
}

// Sparse multivariate polynomial over exact rationals. Zero coefficients are
// never stored; the term map keeps monomials in canonical order.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(const Rational& constant) {
    if (constant != 0) terms_[{}] = constant;
  }
  static Polynomial variable(const Variable& v) {
    Polynomial p;
    p.terms_[{{v, 1}}] = 1;
    return p;
  }
  static Polynomial term(const Rational& coeff, Monomial m) {
    Polynomial p;
    if (coeff != 0) p.terms_[std::move(m)] = coeff;
    return p;
  }

  const std::map<Monomial, Rational>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t term_count() const { return terms_.size(); }

  void add_term(const Monomial& m, const Rational& coeff) {
    if (coeff == 0) return;
    auto it = terms_.find(m);
    if (it == terms_.end()) {
      terms_[m] = coeff;
    } else {
      it->second += coeff;
      if (it->second == 0) terms_.erase(it);
    }
  }

  Polynomial& operator+=(const Polynomial& o) {
    for (const auto& [m, c] : o.terms_) add_term(m, c);
    return *this;
  }
  Polynomial& operator-=(const Polynomial& o) {
    for (const auto& [m, c] : o.terms_) add_term(m, -c);
    return *this;
  }
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }

  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    Polynomial out;
    for (const auto& [ma, ca] : a.terms_)
      for (const auto& [mb, cb] : b.terms_) out.add_term(monomial_mul(ma, mb), ca * cb);
    return out;
  }

  Polynomial scaled(const Rational& c) const {
    Polynomial out;
    if (c == 0) return out;
    for (const auto& [m, coeff] : terms_) out.terms_[m] = coeff * c;
    return out;
  }
  Polynomial operator-() const { return scaled(-1); }

  bool operator==(const Polynomial& o) const { return terms_ == o.terms_; }
  bool operator<(const Polynomial& o) const {
    return std::lexicographical_compare(terms_.begin(), terms_.end(), o.terms_.begin(), o.terms_.end());
  }

  int degree() const {
    int d = 0;
    for (const auto& [m, c] : terms_) {
      int total = 0;
      for (const auto& [v, e] : m) total += e;
      d = std::max(d, total);
    }
    return d;
  }
  int degree_of_kind(Variable::Kind kind) const {
    int d = 0;
    for (const auto& [m, c] : terms_) {
      int total = 0;
      for (const auto& [v, e] : m)
        if (v.kind == kind) total += e;
      d = std::max(d, total);
    }
    return d;
  }
  int entry_degree() const { return degree_of_kind(Variable::Kind::Entry); }
  int z_degree() const { return degree_of_kind(Variable::Kind::Z); }

  bool has_z_variables() const {
    for (const auto& [m, c] : terms_)
      for (const auto& [v, e] : m)
        if (v.kind == Variable::Kind::Z) return true;
    return false;
  }

  std::set<Variable> variables() const {
    std::set<Variable> out;
    for (const auto& [m, c] : terms_)
      for (const auto& [v, e] : m) out.insert(v);
    return out;
  }

  // Applies fn to every tensor-entry index tuple (z-variables unchanged).
  Polynomial map_entry_indices(const std::function<std::vector<int>(const std::vector<int>&)>& fn) const {
    Polynomial out;
    for (const auto& [m, c] : terms_) {
      Monomial mapped;
      for (const auto& [v, e] : m) {
        Variable w = v;
        if (v.kind == Variable::Kind::Entry) w.idx = fn(v.idx);
        mapped = monomial_mul(mapped, Monomial{{w, e}});
      }
      out.add_term(mapped, c);
    }
    return out;
  }

  std::string str() const {
    if (terms_.empty()) return "0";
    std::string out;
    bool first = true;
    for (const auto& [m, c] : terms_) {
      if (!first) out += " + ";
      first = false;
      out += rational_str(c);
      if (!m.empty()) out += " " + monomial_str(m);
    }
    return out;
  }

 private:
  std::map<Monomial, Rational> terms_;
};

namespace detail {

template <typename S>
S power(const S& base, int e) {
  S out(1);
  for (int i = 0; i < e; ++i) out = out * base;
  return out;
}

inline int permutation_sign(const std::vector<int>& perm) {
  int inversions = 0;
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t j = i + 1; j < perm.size(); ++j)
      if (perm[i] > perm[j]) ++inversions;
  return inversions % 2 == 0 ? 1 : -1;
}

}  // namespace detail

// The d x d minor over the given rows and columns, expanded by the Leibniz
// formula (d! terms); entry_var names the variable at each (row, col).
inline Polynomial determinant_poly(const std::vector<int>& rows, const std::vector<int>& cols,
                                   const std::function<Variable(int, int)>& entry_var,
                                   int max_dimension = 5) {
  if (rows.size() != cols.size()) throw Error("minor needs equal row and column counts");
  const int d = static_cast<int>(rows.size());
  if (d == 0) throw Error("empty minor");
  if (d > max_dimension)
    throw Error("minor dimension " + std::to_string(d) + " exceeds cap " + std::to_string(max_dimension));
  std::vector<int> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  Polynomial out;
  do {
    Monomial m;
    for (int i = 0; i < d; ++i)
      m = monomial_mul(m, Monomial{{entry_var(rows[i], cols[perm[i]]), 1}});
    out.add_term(m, Rational(detail::permutation_sign(perm)));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

// Exact evaluation: every tensor-entry variable is looked up in p.
template <typename S>
S evaluate(const Polynomial& f, const Tensor<S>& p) {
  S out(0);
  for (const auto& [m, c] : f.terms()) {
    S prod;
    if constexpr (std::is_same_v<S, double>)
      prod = to_double(c);
    else
      prod = c;
    for (const auto& [v, e] : m) {
      if (v.kind != Variable::Kind::Entry)
        throw Error("polynomial has z-variables; supply z values to evaluate");
      prod = prod * detail::power(p.at(v.idx), e);
    }
    out += prod;
  }
  return out;
}

// Magnitude of the evaluation: sum of |coefficient| * prod |entry|^e. Used
// as the scale reference for floating-point zero tests.
inline double evaluate_magnitude(const Polynomial& f, const Tensor<double>& p) {
  double out = 0;
  for (const auto& [m, c] : f.terms()) {
    double prod = std::abs(to_double(c));
    for (const auto& [v, e] : m) {
      if (v.kind != Variable::Kind::Entry)
        throw Error("polynomial has z-variables; supply z values to evaluate");
      prod *= detail::power(std::abs(p.at(v.idx)), e);
    }
    out += prod;
  }
  return out;
}

// Evaluation with z-variable values: z^k_{i,b} = z_values[k](i, b).
template <typename S>
S evaluate(const Polynomial& f, const Tensor<S>& p, const std::vector<Mat<S>>& z_values) {
  S out(0);
  for (const auto& [m, c] : f.terms()) {
    S prod;
    if constexpr (std::is_same_v<S, double>)
      prod = to_double(c);
    else
      prod = c;
    for (const auto& [v, e] : m) {
      if (v.kind == Variable::Kind::Entry) {
        prod = prod * detail::power(p.at(v.idx), e);
      } else {
        const int k = v.idx[0];
        if (k < 0 || k >= static_cast<int>(z_values.size()))
          throw Error("no z matrix supplied for axis " + std::to_string(k + 1));
        prod = prod * detail::power(z_values[k](v.idx[1], v.idx[2]), e);
      }
    }
    out += prod;
  }
  return out;
}

struct TildeOptions {
  bool symbolic = true;
  // Estimated-term-count guard for symbolic expansion.
  std::size_t term_guard = 10'000'000;
  // Numeric mode: one l_k x kappa matrix per axis.
  std::vector<Mat<Rational>> z_values;
};

// Substitutes, into a polynomial f over a kappa x ... x kappa tensor, the
// entries of the tensor obtained by letting an l_k x kappa matrix act in
// every index k of an l_1 x ... x l_n tensor of indeterminates. Symbolic
// mode introduces z-variables for the matrix entries; numeric mode plugs in
// the supplied values and yields a polynomial in entry variables only.
inline Polynomial substitute_tilde(const Polynomial& f, int kappa, const std::vector<int>& target_states,
                                   const TildeOptions& opts = {}) {
  const int n = static_cast<int>(target_states.size());
  for (int l : target_states)
    if (l < kappa) throw Error("target state count " + std::to_string(l) + " below kappa");
  std::size_t grid = 1;
  for (int l : target_states) grid *= static_cast<std::size_t>(l);

  // Collect the base-entry variables appearing in f and validate shapes.
  std::set<std::vector<int>> base_tuples;
  for (const Variable& v : f.variables()) {
    if (v.kind != Variable::Kind::Entry) continue;
    if (static_cast<int>(v.idx.size()) != n)
      throw Error("polynomial variable arity " + std::to_string(v.idx.size()) +
                  " does not match target axis count " + std::to_string(n));
    for (int i : v.idx)
      if (i < 0 || i >= kappa) throw Error("variable index exceeds kappa");
    base_tuples.insert(v.idx);
  }

  if (!opts.symbolic) {
    if (static_cast<int>(opts.z_values.size()) != n)
      throw Error("numeric substitution needs one z matrix per axis");
    for (int k = 0; k < n; ++k)
      if (opts.z_values[k].rows() != target_states[k] || opts.z_values[k].cols() != kappa)
        throw Error("z matrix " + std::to_string(k + 1) + " must be " +
                    std::to_string(target_states[k]) + "x" + std::to_string(kappa));
  } else {
    // Estimate the fully expanded term count before committing.
    std::size_t estimate = 0;
    for (const auto& [m, c] : f.terms()) {
      std::size_t t = 1;
      for (const auto& [v, e] : m)
        for (int rep = 0; rep < e; ++rep) {
          if (t > opts.term_guard / grid + 1) {
            t = opts.term_guard + 1;
            break;
          }
          t *= grid;
        }
      estimate += t;
      if (estimate > opts.term_guard)
        throw Error("symbolic substitution estimated to exceed " + std::to_string(opts.term_guard) +
                    " terms; use numeric probe mode instead");
    }
  }

  // Expansion of one substituted base entry.
  auto expanded_entry = [&](const std::vector<int>& b) {
    Polynomial sum;
    std::vector<int> i(n, 0);
    while (true) {
      if (opts.symbolic) {
        Monomial m{{Variable::entry(i), 1}};
        for (int k = 0; k < n; ++k) m = monomial_mul(m, Monomial{{Variable::z(k, i[k], b[k]), 1}});
        sum.add_term(m, 1);
      } else {
        Rational coeff(1);
        for (int k = 0; k < n; ++k) coeff *= opts.z_values[k](i[k], b[k]);
        if (coeff != 0) sum.add_term({{Variable::entry(i), 1}}, coeff);
      }
      int k = n - 1;
      for (; k >= 0; --k) {
        if (++i[k] < target_states[k]) break;
        i[k] = 0;
      }
      if (k < 0) break;
    }
    return sum;
  };

  std::map<std::vector<int>, Polynomial> expansions;
  for (const auto& b : base_tuples) expansions[b] = expanded_entry(b);

  Polynomial out;
  for (const auto& [m, c] : f.terms()) {
    Polynomial prod{c};
    for (const auto& [v, e] : m) {
      if (v.kind != Variable::Kind::Entry) throw Error("base polynomial may not contain z-variables");
      for (int rep = 0; rep < e; ++rep) {
        prod = prod * expansions.at(v.idx);
        if (opts.symbolic && prod.term_count() > opts.term_guard)
          throw Error("symbolic substitution exceeded " + std::to_string(opts.term_guard) +
                      " terms; use numeric probe mode instead");
      }
    }
    out += prod;
  }
  return out;
}

// Splits g, viewed as a polynomial in its z-variables, into coefficient
// polynomials (entry variables only) keyed by z-monomial. Summing
// coefficient * z-monomial over the result reconstructs g.
inline std::map<Monomial, Polynomial> extract_z_coefficients(const Polynomial& g) {
  std::map<Monomial, Polynomial> out;
  for (const auto& [m, c] : g.terms()) {
    Monomial z_part, entry_part;
    for (const auto& [v, e] : m)
      (v.kind == Variable::Kind::Z ? z_part : entry_part).push_back({v, e});
    out[z_part].add_term(entry_part, c);
  }
  return out;
}

}  // namespace phyloinv
