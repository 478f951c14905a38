#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "phyloinv/common.hpp"

namespace phyloinv {

// Dense row-major matrix.
template <typename S>
class Mat {
 public:
  Mat() : rows_(0), cols_(0) {}
  Mat(int rows, int cols) : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows) * cols, S(0)) {
    if (rows < 0 || cols < 0) throw Error("negative matrix dimension");
  }

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = S(1);
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  S& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
  const S& operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * cols_ + j]; }

  const std::vector<S>& data() const { return a_; }
  std::vector<S>& data() { return a_; }

  Mat transposed() const {
    Mat m(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) m(j, i) = (*this)(i, j);
    return m;
  }

  bool operator==(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_ && a_ == o.a_; }

  friend Mat operator*(const Mat& x, const Mat& y) {
    if (x.cols_ != y.rows_) throw Error("matrix product dimension mismatch");
    Mat out(x.rows_, y.cols_);
    for (int i = 0; i < x.rows_; ++i)
      for (int k = 0; k < x.cols_; ++k) {
        const S& xik = x(i, k);
        if (xik == S(0)) continue;
        for (int j = 0; j < y.cols_; ++j) out(i, j) += xik * y(k, j);
      }
    return out;
  }

 private:
  int rows_, cols_;
  std::vector<S> a_;
};

// Exact matrix rank by fraction-free (Bareiss) elimination. Pivoting is
// deterministic: first nonzero entry in column order.
inline int bareiss_rank(Mat<Rational> m) {
  const int rows = m.rows(), cols = m.cols();
  int rank = 0;
  Rational prev(1);
  for (int col = 0; col < cols && rank < rows; ++col) {
    int pivot = -1;
    for (int r = rank; r < rows; ++r)
      if (m(r, col) != 0) {
        pivot = r;
        break;
      }
    if (pivot < 0) continue;
    if (pivot != rank)
      for (int j = col; j < cols; ++j) std::swap(m(pivot, j), m(rank, j));
    const Rational p = m(rank, col);
    for (int r = rank + 1; r < rows; ++r) {
      for (int j = col + 1; j < cols; ++j)
        m(r, j) = (m(r, j) * p - m(r, col) * m(rank, j)) / prev;
      m(r, col) = 0;
    }
    prev = p;
    ++rank;
  }
  return rank;
}

// Exact rank factorization m = U * V with U the pivot columns of m and V the
// nonzero rows of the reduced row echelon form. First-nonzero pivoting.
struct RankFactorization {
  int rank = 0;
  Mat<Rational> basis;    // rows x rank
  Mat<Rational> reduced;  // rank x cols
  std::vector<int> pivot_cols;
};

inline RankFactorization rank_factor(const Mat<Rational>& m) {
  Mat<Rational> r = m;
  const int rows = r.rows(), cols = r.cols();
  std::vector<int> pivots;
  int lead = 0;
  for (int col = 0; col < cols && lead < rows; ++col) {
    int pivot = -1;
    for (int i = lead; i < rows; ++i)
      if (r(i, col) != 0) {
        pivot = i;
        break;
      }
    if (pivot < 0) continue;
    if (pivot != lead)
      for (int j = 0; j < cols; ++j) std::swap(r(pivot, j), r(lead, j));
    const Rational p = r(lead, col);
    for (int j = 0; j < cols; ++j) r(lead, j) /= p;
    for (int i = 0; i < rows; ++i) {
      if (i == lead || r(i, col) == 0) continue;
      const Rational f = r(i, col);
      for (int j = 0; j < cols; ++j) r(i, j) -= f * r(lead, j);
    }
    pivots.push_back(col);
    ++lead;
  }
  RankFactorization out;
  out.rank = static_cast<int>(pivots.size());
  out.pivot_cols = pivots;
  out.basis = Mat<Rational>(rows, out.rank);
  for (int i = 0; i < rows; ++i)
    for (int k = 0; k < out.rank; ++k) out.basis(i, k) = m(i, pivots[k]);
  out.reduced = Mat<Rational>(out.rank, cols);
  for (int k = 0; k < out.rank; ++k)
    for (int j = 0; j < cols; ++j) out.reduced(k, j) = r(k, j);
  return out;
}

// Singular values by one-sided Jacobi, descending. Small dense matrices only.
inline std::vector<double> singular_values(Mat<double> m) {
  if (m.rows() < m.cols()) m = m.transposed();
  const int rows = m.rows(), cols = m.cols();
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      if (!std::isfinite(m(i, j))) throw Error("non-finite matrix entry");

  const double tol = 1e-14;
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < cols - 1; ++p)
      for (int q = p + 1; q < cols; ++q) {
        double app = 0, aqq = 0, apq = 0;
        for (int i = 0; i < rows; ++i) {
          app += m(i, p) * m(i, p);
          aqq += m(i, q) * m(i, q);
          apq += m(i, p) * m(i, q);
        }
        if (std::abs(apq) <= tol * std::sqrt(app * aqq) || apq == 0.0) continue;
        rotated = true;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double sign = zeta >= 0 ? 1.0 : -1.0;
        const double tan = sign / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cos = 1.0 / std::sqrt(1.0 + tan * tan);
        const double sin = cos * tan;
        for (int i = 0; i < rows; ++i) {
          const double vp = m(i, p), vq = m(i, q);
          m(i, p) = cos * vp - sin * vq;
          m(i, q) = sin * vp + cos * vq;
        }
      }
    if (!rotated) break;
  }
  std::vector<double> sigma(cols, 0.0);
  for (int j = 0; j < cols; ++j) {
    double s = 0;
    for (int i = 0; i < rows; ++i) s += m(i, j) * m(i, j);
    sigma[j] = std::sqrt(s);
  }
  std::sort(sigma.begin(), sigma.end(), std::greater<>());
  return sigma;
}

}  // namespace phyloinv
