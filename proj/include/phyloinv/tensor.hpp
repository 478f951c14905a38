#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "phyloinv/common.hpp"
#include "phyloinv/linalg.hpp"

namespace phyloinv {

struct Axis {
  std::string label;
  int size = 0;

  bool operator==(const Axis& o) const { return label == o.label && size == o.size; }
};

// Dense n-dimensional array with taxon-labeled axes, entries in row-major
// order. Immutable by convention after construction; operations return new
// tensors.
template <typename S>
class Tensor {
 public:
  explicit Tensor(std::vector<Axis> axes) : axes_(std::move(axes)) {
    std::set<std::string> labels;
    std::size_t total = 1;
    for (const Axis& ax : axes_) {
      if (ax.size <= 0) throw Error("axis '" + ax.label + "' has non-positive size");
      if (!labels.insert(ax.label).second) throw Error("duplicate axis label '" + ax.label + "'");
      total *= static_cast<std::size_t>(ax.size);
    }
    data_.assign(total, S(0));
  }

  Tensor(std::vector<Axis> axes, std::vector<S> entries) : Tensor(std::move(axes)) {
    if (entries.size() != data_.size()) throw Error("entry count does not match axis sizes");
    data_ = std::move(entries);
  }

  int order() const { return static_cast<int>(axes_.size()); }
  const std::vector<Axis>& axes() const { return axes_; }
  const Axis& axis(int k) const { return axes_[static_cast<std::size_t>(k)]; }
  std::size_t size() const { return data_.size(); }
  const std::vector<S>& data() const { return data_; }
  std::vector<S>& data() { return data_; }

  int axis_of(const std::string& label) const {
    for (int k = 0; k < order(); ++k)
      if (axes_[k].label == label) return k;
    throw Error("no axis labeled '" + label + "'");
  }

  std::size_t offset(const std::vector<int>& idx) const {
    if (idx.size() != axes_.size()) throw Error("index arity mismatch");
    std::size_t off = 0;
    for (int k = 0; k < order(); ++k) {
      if (idx[k] < 0 || idx[k] >= axes_[k].size)
        throw Error("index " + std::to_string(idx[k]) + " out of range for axis '" + axes_[k].label + "'");
      off = off * static_cast<std::size_t>(axes_[k].size) + static_cast<std::size_t>(idx[k]);
    }
    return off;
  }

  const S& at(const std::vector<int>& idx) const { return data_[offset(idx)]; }
  S& at(const std::vector<int>& idx) { return data_[offset(idx)]; }

  // Advances idx in row-major order; returns false after the last index.
  bool next_index(std::vector<int>& idx) const {
    for (int k = order() - 1; k >= 0; --k) {
      if (++idx[k] < axes_[k].size) return true;
      idx[k] = 0;
    }
    return false;
  }

  bool operator==(const Tensor& o) const { return axes_ == o.axes_ && data_ == o.data_; }

 private:
  std::vector<Axis> axes_;
  std::vector<S> data_;
};

template <typename To, typename From>
Tensor<To> convert(const Tensor<From>& t) {
  std::vector<To> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    if constexpr (std::is_same_v<To, double> && std::is_same_v<From, Rational>)
      out[i] = to_double(t.data()[i]);
    else
      out[i] = static_cast<To>(t.data()[i]);
  }
  return Tensor<To>(t.axes(), std::move(out));
}

// Ordered partition of a tensor's axis labels; each block becomes one axis
// of the flattening, composite indices running row-major over the members
// in the tensor's own axis order.
struct FlatteningSpec {
  std::vector<std::vector<std::string>> blocks;
};

namespace detail {

inline std::string block_label(const std::vector<std::string>& members) {
  std::string out;
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (i) out += '|';
    out += members[i];
  }
  return out;
}

// Axis positions of each block member, sorted by position.
template <typename S>
std::vector<std::vector<int>> block_positions(const Tensor<S>& p, const FlatteningSpec& spec) {
  std::vector<bool> used(p.order(), false);
  std::vector<std::vector<int>> out;
  for (const auto& block : spec.blocks) {
    if (block.empty()) throw Error("flattening block must be nonempty");
    std::vector<int> pos;
    for (const auto& label : block) {
      int k = p.axis_of(label);
      if (used[k]) throw Error("axis '" + label + "' appears in two blocks");
      used[k] = true;
      pos.push_back(k);
    }
    std::sort(pos.begin(), pos.end());
    out.push_back(std::move(pos));
  }
  for (int k = 0; k < p.order(); ++k)
    if (!used[k]) throw Error("flattening spec does not cover axis '" + p.axis(k).label + "'");
  return out;
}

}  // namespace detail

template <typename S>
Tensor<S> flatten(const Tensor<S>& p, const FlatteningSpec& spec) {
  auto positions = detail::block_positions(p, spec);
  std::vector<Axis> axes;
  for (std::size_t b = 0; b < positions.size(); ++b) {
    int size = 1;
    std::vector<std::string> members;
    for (int k : positions[b]) {
      size *= p.axis(k).size;
      members.push_back(p.axis(k).label);
    }
    axes.push_back({detail::block_label(members), size});
  }
  Tensor<S> out(std::move(axes));
  if (p.size() == 0) return out;
  std::vector<int> idx(p.order(), 0);
  std::vector<int> comp(positions.size(), 0);
  do {
    for (std::size_t b = 0; b < positions.size(); ++b) {
      int c = 0;
      for (int k : positions[b]) c = c * p.axis(k).size + idx[k];
      comp[b] = c;
    }
    out.at(comp) = p.at(idx);
  } while (p.next_index(idx));
  return out;
}

// Inverse of flatten: original_axes are the axes of the tensor that was
// flattened with the same spec.
template <typename S>
Tensor<S> unflatten(const Tensor<S>& flat, const std::vector<Axis>& original_axes,
                    const FlatteningSpec& spec) {
  Tensor<S> out(original_axes);
  auto positions = detail::block_positions(out, spec);
  if (static_cast<int>(positions.size()) != flat.order())
    throw Error("unflatten: spec block count does not match flattening order");
  std::vector<int> idx(out.order(), 0);
  std::vector<int> comp(positions.size(), 0);
  do {
    for (std::size_t b = 0; b < positions.size(); ++b) {
      int c = 0;
      for (int k : positions[b]) c = c * out.axis(k).size + idx[k];
      comp[b] = c;
    }
    out.at(idx) = flat.at(comp);
  } while (out.next_index(idx));
  return out;
}

// Axes reordered to the given label order; entries rearranged to match.
template <typename S>
Tensor<S> permute_axes(const Tensor<S>& p, const std::vector<std::string>& label_order) {
  if (static_cast<int>(label_order.size()) != p.order())
    throw Error("permutation must list every axis");
  std::vector<int> from;
  std::vector<Axis> axes;
  for (const auto& label : label_order) {
    int k = p.axis_of(label);
    from.push_back(k);
    axes.push_back(p.axis(k));
  }
  Tensor<S> out(std::move(axes));
  std::vector<int> idx(p.order(), 0);
  std::vector<int> src(p.order(), 0);
  do {
    for (int k = 0; k < p.order(); ++k) src[from[k]] = idx[k];
    out.at(idx) = p.at(src);
  } while (out.next_index(idx));
  return out;
}

// Equality after aligning rhs's axes to lhs's label order.
template <typename S>
bool aligned_equal(const Tensor<S>& lhs, const Tensor<S>& rhs) {
  if (lhs.order() != rhs.order()) return false;
  std::vector<std::string> order;
  for (const Axis& ax : lhs.axes()) order.push_back(ax.label);
  for (const auto& label : order) {
    bool found = false;
    for (const Axis& ax : rhs.axes()) found = found || ax.label == label;
    if (!found) return false;
  }
  return lhs == permute_axes(rhs, order);
}

// The star contraction: sums over q's axis q_idx against r's axis r_idx.
// Result axes are q's remaining axes followed by r's remaining axes. With
// the default indices (last of q, first of r) and matrices this is matrix
// multiplication.
template <typename S>
Tensor<S> star(const Tensor<S>& q, const Tensor<S>& r, int q_idx, int r_idx) {
  if (q_idx < 0 || q_idx >= q.order() || r_idx < 0 || r_idx >= r.order())
    throw Error("star: contraction index out of range");
  if (q.axis(q_idx).size != r.axis(r_idx).size)
    throw Error("star: contracted axes have sizes " + std::to_string(q.axis(q_idx).size) + " and " +
                std::to_string(r.axis(r_idx).size));
  std::vector<Axis> axes;
  for (int k = 0; k < q.order(); ++k)
    if (k != q_idx) axes.push_back(q.axis(k));
  for (int k = 0; k < r.order(); ++k)
    if (k != r_idx) axes.push_back(r.axis(k));
  Tensor<S> out(axes);  // duplicate labels rejected here

  const int kappa = q.axis(q_idx).size;
  std::vector<int> idx(out.order(), 0);
  std::vector<int> qi(q.order(), 0), ri(r.order(), 0);
  if (out.size() == 0) return out;
  do {
    int at = 0;
    for (int k = 0; k < q.order(); ++k)
      if (k != q_idx) qi[k] = idx[at++];
    for (int k = 0; k < r.order(); ++k)
      if (k != r_idx) ri[k] = idx[at++];
    S acc(0);
    for (int j = 0; j < kappa; ++j) {
      qi[q_idx] = j;
      ri[r_idx] = j;
      acc += q.at(qi) * r.at(ri);
    }
    out.at(idx) = acc;
  } while (out.next_index(idx));
  return out;
}

template <typename S>
Tensor<S> star(const Tensor<S>& q, const Tensor<S>& r) {
  return star(q, r, q.order() - 1, 0);
}

// Lets matrix a act in axis k: result(..., b, ...) = sum_i p(..., i, ...) a(i, b).
// The acted axis keeps its label and position; its size becomes a's column
// count.
template <typename S>
Tensor<S> act(const Tensor<S>& p, int k, const Mat<S>& a) {
  if (k < 0 || k >= p.order()) throw Error("act: axis out of range");
  if (a.rows() != p.axis(k).size)
    throw Error("act: matrix has " + std::to_string(a.rows()) + " rows but axis '" +
                p.axis(k).label + "' has size " + std::to_string(p.axis(k).size));
  std::vector<Axis> axes = p.axes();
  axes[k].size = a.cols();
  Tensor<S> out(std::move(axes));
  std::vector<int> idx(out.order(), 0);
  std::vector<int> src(p.order(), 0);
  do {
    src = idx;
    S acc(0);
    for (int i = 0; i < a.rows(); ++i) {
      src[k] = i;
      const S& v = p.at(src);
      if (v == S(0)) continue;
      acc += v * a(i, idx[k]);
    }
    out.at(idx) = acc;
  } while (out.next_index(idx));
  return out;
}

// Restriction of p to the chosen indices along each axis.
template <typename S>
Tensor<S> subarray(const Tensor<S>& p, const std::vector<std::vector<int>>& keep) {
  if (static_cast<int>(keep.size()) != p.order()) throw Error("subarray: one index set per axis required");
  std::vector<Axis> axes = p.axes();
  for (int k = 0; k < p.order(); ++k) {
    if (keep[k].empty()) throw Error("subarray: empty index set for axis '" + p.axis(k).label + "'");
    for (int i : keep[k])
      if (i < 0 || i >= p.axis(k).size)
        throw Error("subarray: index " + std::to_string(i) + " out of range for axis '" +
                    p.axis(k).label + "'");
    axes[k].size = static_cast<int>(keep[k].size());
  }
  Tensor<S> out(std::move(axes));
  std::vector<int> idx(out.order(), 0);
  std::vector<int> src(p.order(), 0);
  do {
    for (int k = 0; k < p.order(); ++k) src[k] = keep[k][idx[k]];
    out.at(idx) = p.at(src);
  } while (out.next_index(idx));
  return out;
}

// View of a 2-axis tensor as a matrix.
template <typename S>
Mat<S> as_matrix(const Tensor<S>& t) {
  if (t.order() != 2) throw Error("expected a 2-axis tensor, got order " + std::to_string(t.order()));
  Mat<S> m(t.axis(0).size, t.axis(1).size);
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m(i, j) = t.at({i, j});
  return m;
}

template <typename S>
Tensor<S> from_matrix(const Mat<S>& m, const std::string& row_label, const std::string& col_label) {
  Tensor<S> t({{row_label, m.rows()}, {col_label, m.cols()}});
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) t.at({i, j}) = m(i, j);
  return t;
}

// Exact rank of a 2-axis rational tensor (fraction-free elimination).
inline int rank_exact(const Tensor<Rational>& m) { return bareiss_rank(as_matrix(m)); }

// Numeric rank: number of singular values with sigma_i / sigma_1 >= tol.
inline int rank_numeric(const Tensor<double>& m, double tol = 1e-9) {
  auto sigma = singular_values(as_matrix(m));
  if (sigma.empty() || sigma[0] <= 0.0) return 0;
  int rank = 0;
  for (double s : sigma)
    if (s / sigma[0] >= tol) ++rank;
  return rank;
}

}  // namespace phyloinv
