#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "phyloinv/common.hpp"
#include "phyloinv/linalg.hpp"
#include "phyloinv/tensor.hpp"
#include "phyloinv/tree.hpp"

namespace phyloinv {

// Stochastic parameters: root distribution plus one Markov matrix per edge.
// Matrices sit on normalized edge keys with rows indexed by the state at the
// endpoint closer to `root`, so each row is the conditional distribution of
// the child state given the parent state.
struct ModelParams {
  int root = 0;
  std::vector<Rational> pi;
  std::map<Edge, Mat<Rational>> matrices;

  int kappa() const { return static_cast<int>(pi.size()); }
};

// Cone parameters: arbitrary square matrices per edge; the root fixes only
// the orientation bookkeeping, with the same storage convention.
struct GeneralParams {
  int root = 0;
  std::map<Edge, Mat<Rational>> matrices;

  int kappa() const {
    if (matrices.empty()) throw Error("no edge matrices");
    return matrices.begin()->second.rows();
  }
};

namespace detail {

inline std::vector<int> parent_map(const Tree& t, int root) {
  std::vector<int> parent(t.vertex_count(), -2);
  parent[root] = -1;
  std::vector<int> stack{root};
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : t.neighbors(v))
      if (parent[w] == -2) {
        parent[w] = v;
        stack.push_back(w);
      }
  }
  return parent;
}

// Matrix for edge {a,b} with rows indexed by the state at a.
inline Mat<Rational> matrix_from(const std::map<Edge, Mat<Rational>>& mats,
                                 const std::vector<int>& parent, int a, int b) {
  auto it = mats.find(edge_key(a, b));
  if (it == mats.end())
    throw Error("no matrix for edge " + std::to_string(a) + "-" + std::to_string(b));
  const bool a_is_parent = parent[b] == a;
  return a_is_parent ? it->second : it->second.transposed();
}

inline void check_square(const std::map<Edge, Mat<Rational>>& mats, int kappa) {
  for (const auto& [e, m] : mats)
    if (m.rows() != kappa || m.cols() != kappa)
      throw Error("edge " + std::to_string(e.first) + "-" + std::to_string(e.second) +
                  " matrix is not " + std::to_string(kappa) + "x" + std::to_string(kappa));
}

inline void check_edges_covered(const Tree& t, const std::map<Edge, Mat<Rational>>& mats) {
  auto edges = t.edges();
  if (mats.size() != edges.size()) throw Error("params must carry exactly one matrix per edge");
  for (const Edge& e : edges)
    if (!mats.count(e))
      throw Error("missing matrix for edge " + std::to_string(e.first) + "-" + std::to_string(e.second));
}

}  // namespace detail

inline void validate_params(const Tree& t, const ModelParams& p) {
  if (p.root < 0 || p.root >= t.vertex_count()) throw Error("root vertex out of range");
  if (p.pi.empty()) throw Error("empty root distribution");
  Rational total = 0;
  for (const Rational& x : p.pi) {
    if (x < 0) throw Error("negative root distribution entry");
    total += x;
  }
  if (total != 1) throw Error("root distribution must sum to 1");
  detail::check_edges_covered(t, p.matrices);
  detail::check_square(p.matrices, p.kappa());
  for (const auto& [e, m] : p.matrices)
    for (int i = 0; i < m.rows(); ++i) {
      Rational row = 0;
      for (int j = 0; j < m.cols(); ++j) {
        if (m(i, j) < 0) throw Error("negative Markov matrix entry");
        row += m(i, j);
      }
      if (row != 1)
        throw Error("row " + std::to_string(i) + " of edge " + std::to_string(e.first) + "-" +
                    std::to_string(e.second) + " does not sum to 1");
    }
}

inline void validate_params(const Tree& t, const GeneralParams& p) {
  if (p.root < 0 || p.root >= t.vertex_count()) throw Error("root vertex out of range");
  detail::check_edges_covered(t, p.matrices);
  detail::check_square(p.matrices, p.kappa());
}

namespace detail {

// Joint distribution by explicit summation over all histories (states at the
// internal vertices). Exponential in the internal vertex count; this is the
// oracle implementation. pi == nullptr gives the cone map (no root factor).
inline Tensor<Rational> joint_by_histories(const Tree& t, int root, const std::vector<Rational>* pi,
                                           const std::map<Edge, Mat<Rational>>& mats, int kappa) {
  std::vector<Axis> axes;
  for (const auto& taxon : t.taxa_order()) axes.push_back({taxon, kappa});
  Tensor<Rational> out(std::move(axes));

  const auto parent = parent_map(t, root);
  std::vector<int> internals = t.internal_vertices();
  std::vector<std::pair<int, int>> directed;  // (parent, child)
  for (const Edge& e : t.edges())
    directed.push_back(parent[e.second] == e.first ? std::pair{e.first, e.second}
                                                   : std::pair{e.second, e.first});
  std::vector<const Mat<Rational>*> edge_mat;  // rows at parent by storage convention
  for (const auto& [p, c] : directed) edge_mat.push_back(&mats.at(edge_key(p, c)));

  std::vector<int> state(t.vertex_count(), 0);
  std::vector<int> leaf_vertex_of_axis;
  for (const auto& taxon : t.taxa_order()) leaf_vertex_of_axis.push_back(t.leaf_vertex(taxon));

  std::vector<int> idx(t.taxon_count(), 0);
  do {
    for (int k = 0; k < t.taxon_count(); ++k) state[leaf_vertex_of_axis[k]] = idx[k];
    Rational total = 0;
    std::vector<int> hidden(internals.size(), 0);
    while (true) {
      for (std::size_t h = 0; h < internals.size(); ++h) state[internals[h]] = hidden[h];
      Rational term = pi ? (*pi)[state[root]] : Rational(1);
      for (std::size_t e = 0; e < directed.size() && term != 0; ++e)
        term *= (*edge_mat[e])(state[directed[e].first], state[directed[e].second]);
      total += term;
      std::size_t h = 0;
      for (; h < hidden.size(); ++h) {
        if (++hidden[h] < kappa) break;
        hidden[h] = 0;
      }
      if (h == hidden.size()) break;
    }
    out.at(idx) = total;
  } while (out.next_index(idx));
  return out;
}

enum class CherryRule { LeastTaxon, GreatestTaxon };

// Inductive joint distribution by repeated cherry reduction. Operates on the
// original vertex ids throughout; current leaves are tracked by a
// vertex -> axis-label map so pruned vertices become fresh "#k" axes.
inline Tensor<Rational> joint_by_reduction(const Tree& t, int root, const std::vector<Rational>* pi,
                                           const std::map<Edge, Mat<Rational>>& mats, int kappa,
                                           CherryRule rule) {
  const auto parent = parent_map(t, root);

  struct State {
    std::vector<std::vector<int>> adj;
    std::vector<std::string> label;       // axis label per vertex, "" if internal/removed
    std::vector<std::string> order;       // current axis labels in order
  };
  State st;
  st.adj.resize(t.vertex_count());
  st.label.resize(t.vertex_count());
  for (int v = 0; v < t.vertex_count(); ++v) {
    st.adj[v] = t.neighbors(v);
    st.label[v] = t.leaf_name(v);
  }
  st.order = t.taxa_order();

  auto matrix_into = [&](int from, int to) { return matrix_from(mats, parent, from, to); };

  auto recurse = [&](auto&& self, State& s) -> Tensor<Rational> {
    std::vector<int> leaves;
    for (int v = 0; v < static_cast<int>(s.adj.size()); ++v)
      if (!s.label[v].empty()) leaves.push_back(v);

    auto position = [&](const std::string& label) {
      for (std::size_t i = 0; i < s.order.size(); ++i)
        if (s.order[i] == label) return static_cast<int>(i);
      throw Error("internal: label not in order");
    };

    if (leaves.size() == 2) {
      int u = leaves[0], v = leaves[1];
      if (position(s.label[u]) > position(s.label[v])) std::swap(u, v);
      if (root != u && root != v) throw Error("internal: root lost during reduction");
      Mat<Rational> m = matrix_into(u, v);
      Tensor<Rational> out({{s.label[u], kappa}, {s.label[v], kappa}});
      for (int i = 0; i < kappa; ++i)
        for (int j = 0; j < kappa; ++j) {
          Rational val = m(i, j);
          if (pi) val *= (*pi)[root == u ? i : j];
          out.at({i, j}) = val;
        }
      return out;
    }

    // Eligible cherries: current leaf pairs sharing a neighbor, root excluded.
    struct Cherry {
      int x, y, c, best_pos;
    };
    std::vector<Cherry> cherries;
    for (int v = 0; v < static_cast<int>(s.adj.size()); ++v) {
      if (!s.label[v].empty() || s.adj[v].empty()) continue;
      std::vector<int> kid;
      for (int w : s.adj[v])
        if (!s.label[w].empty() && w != root) kid.push_back(w);
      std::sort(kid.begin(), kid.end(),
                [&](int a, int b) { return position(s.label[a]) < position(s.label[b]); });
      for (std::size_t i = 0; i + 1 < kid.size(); ++i)
        for (std::size_t j = i + 1; j < kid.size(); ++j)
          cherries.push_back({kid[i], kid[j], v, position(s.label[kid[i]])});
    }
    if (cherries.empty()) throw Error("internal: no reducible cherry found");
    std::sort(cherries.begin(), cherries.end(),
              [](const Cherry& a, const Cherry& b) { return a.best_pos < b.best_pos; });
    Cherry ch = rule == CherryRule::LeastTaxon ? cherries.front() : cherries.back();

    const std::string label_x = s.label[ch.x], label_y = s.label[ch.y];
    const int pos_x = position(label_x), pos_y = position(label_y);
    Mat<Rational> m1 = matrix_into(ch.c, ch.x);
    Mat<Rational> m2 = matrix_into(ch.c, ch.y);

    State next = s;
    auto cut = [&](int gone) {
      for (int w : next.adj[gone]) {
        auto& nb = next.adj[w];
        nb.erase(std::find(nb.begin(), nb.end(), gone));
      }
      next.adj[gone].clear();
      next.label[gone].clear();
    };
    cut(ch.x);
    cut(ch.y);
    const std::string fresh = "#" + std::to_string(ch.c);
    next.label[ch.c] = fresh;
    next.order.clear();
    for (int i = 0; i < static_cast<int>(s.order.size()); ++i) {
      if (i == std::min(pos_x, pos_y)) next.order.push_back(fresh);
      if (i == pos_x || i == pos_y) continue;
      next.order.push_back(s.order[i]);
    }

    Tensor<Rational> sub = self(self, next);

    std::vector<Axis> axes;
    for (const auto& label : s.order) axes.push_back({label, kappa});
    Tensor<Rational> out(std::move(axes));
    const int fresh_axis = [&] {
      int k = 0;
      for (const Axis& ax : sub.axes()) {
        if (ax.label == fresh) return k;
        ++k;
      }
      throw Error("internal: fresh axis missing");
    }();

    // out(.., i_x, .., i_y, ..) = sum_b sub(.., b, ..) m1(b, i_x) m2(b, i_y)
    std::vector<int> out_axis_of_sub(sub.order(), -1);  // -1 marks the fresh axis
    for (int k = 0; k < sub.order(); ++k)
      if (k != fresh_axis) out_axis_of_sub[k] = out.axis_of(sub.axis(k).label);
    const int ax_x = out.axis_of(label_x), ax_y = out.axis_of(label_y);

    std::vector<int> idx(out.order(), 0);
    std::vector<int> sidx(sub.order(), 0);
    do {
      for (int k = 0; k < sub.order(); ++k)
        if (k != fresh_axis) sidx[k] = idx[out_axis_of_sub[k]];
      Rational acc = 0;
      for (int b = 0; b < kappa; ++b) {
        sidx[fresh_axis] = b;
        const Rational& sv = sub.at(sidx);
        if (sv == 0) continue;
        acc += sv * m1(b, idx[ax_x]) * m2(b, idx[ax_y]);
      }
      out.at(idx) = acc;
    } while (out.next_index(idx));
    return out;
  };

  return recurse(recurse, st);
}

struct ResolvedParams {
  Tree tree;
  int root;
  std::map<Edge, Mat<Rational>> matrices;
};

// Lifts parameters of a non-binary tree to a binary resolution, assigning
// the identity matrix to the collapsed edges.
inline ResolvedParams resolve_params(const Tree& t, int root,
                                     const std::map<Edge, Mat<Rational>>& mats, int kappa) {
  ResolvedTree r = resolve_binary(t, 0);
  std::map<Edge, Mat<Rational>> lifted;
  for (const auto& [orig, matrix] : mats) lifted[r.edge_map.at(orig)] = matrix;
  for (const Edge& e : r.collapsed_edges) lifted[e] = Mat<Rational>::identity(kappa);
  return ResolvedParams{std::move(r.tree), r.vertex_map[root], std::move(lifted)};
}

}  // namespace detail

using detail::CherryRule;

// Joint distribution over leaf states by explicit summation over histories
// (the oracle path; exponential in the internal vertex count).
inline Tensor<Rational> joint_history(const Tree& t, const ModelParams& p) {
  validate_params(t, p);
  return detail::joint_by_histories(t, p.root, &p.pi, p.matrices, p.kappa());
}
inline Tensor<Rational> joint_history(const Tree& t, const GeneralParams& p) {
  validate_params(t, p);
  return detail::joint_by_histories(t, p.root, nullptr, p.matrices, p.kappa());
}

// Joint distribution by cherry reduction (the production path). Non-binary
// trees are computed on a binary resolution with identity matrices on the
// collapsed edges. The result is independent of the cherry rule.
inline Tensor<Rational> joint_inductive(const Tree& t, const ModelParams& p,
                                        CherryRule rule = CherryRule::LeastTaxon) {
  validate_params(t, p);
  if (!t.is_binary()) {
    auto r = detail::resolve_params(t, p.root, p.matrices, p.kappa());
    return detail::joint_by_reduction(r.tree, r.root, &p.pi, r.matrices, p.kappa(), rule);
  }
  return detail::joint_by_reduction(t, p.root, &p.pi, p.matrices, p.kappa(), rule);
}
inline Tensor<Rational> joint_inductive(const Tree& t, const GeneralParams& p,
                                        CherryRule rule = CherryRule::LeastTaxon) {
  validate_params(t, p);
  if (!t.is_binary()) {
    auto r = detail::resolve_params(t, p.root, p.matrices, p.kappa());
    return detail::joint_by_reduction(r.tree, r.root, nullptr, r.matrices, p.kappa(), rule);
  }
  return detail::joint_by_reduction(t, p.root, nullptr, p.matrices, p.kappa(), rule);
}

// Absorbs diag(pi) into the matrix on a designated edge at the root (the
// edge toward the root's least-taxon neighbor), producing cone parameters
// with the same joint tensor.
inline GeneralParams stochastic_to_general(const Tree& t, const ModelParams& p) {
  validate_params(t, p);
  const auto parent = detail::parent_map(t, p.root);
  int designated = -1, best = t.taxon_count();
  for (int w : t.neighbors(p.root)) {
    auto taxa = t.taxa_beyond(p.root, w);
    int pos = t.taxon_position(taxa.front());
    if (pos < best) {
      best = pos;
      designated = w;
    }
  }
  GeneralParams out;
  out.root = p.root;
  out.matrices = p.matrices;
  Mat<Rational> m = detail::matrix_from(p.matrices, parent, p.root, designated);
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m(i, j) *= p.pi[i];
  // Rows index the root state, and the root stays the closer endpoint.
  out.matrices[edge_key(p.root, designated)] = std::move(m);
  return out;
}

// Moves the orientation root of cone parameters; matrices on edges whose
// orientation flips are transposed, leaving the joint map unchanged.
inline GeneralParams reroot(const Tree& t, const GeneralParams& p, int new_root) {
  validate_params(t, p);
  if (new_root < 0 || new_root >= t.vertex_count()) throw Error("root vertex out of range");
  const auto old_parent = detail::parent_map(t, p.root);
  const auto new_parent = detail::parent_map(t, new_root);
  GeneralParams out;
  out.root = new_root;
  for (const auto& [e, m] : p.matrices) {
    const bool was_forward = old_parent[e.second] == e.first;
    const bool is_forward = new_parent[e.second] == e.first;
    out.matrices[e] = was_forward == is_forward ? m : m.transposed();
  }
  return out;
}

// Moves the root of stochastic parameters across the tree by exact Bayes
// reversal of each edge on the path; the joint tensor is unchanged. Fails if
// a marginal entry on the path is zero.
inline ModelParams move_root(const Tree& t, const ModelParams& p, int new_root) {
  validate_params(t, p);
  if (new_root < 0 || new_root >= t.vertex_count()) throw Error("root vertex out of range");
  ModelParams cur = p;
  while (cur.root != new_root) {
    // Step to the neighbor of cur.root on the path toward new_root.
    const auto parent = detail::parent_map(t, cur.root);
    int step = new_root;
    while (parent[step] != cur.root) step = parent[step];

    Mat<Rational> m = detail::matrix_from(cur.matrices, parent, cur.root, step);
    const int kappa = cur.kappa();
    std::vector<Rational> marginal(kappa, 0);
    for (int j = 0; j < kappa; ++j)
      for (int i = 0; i < kappa; ++i) marginal[j] += cur.pi[i] * m(i, j);
    Mat<Rational> reversed(kappa, kappa);
    for (int j = 0; j < kappa; ++j) {
      if (marginal[j] == 0)
        throw Error("cannot move root: zero marginal probability at state " + std::to_string(j));
      for (int i = 0; i < kappa; ++i) reversed(j, i) = cur.pi[i] * m(i, j) / marginal[j];
    }
    cur.pi = std::move(marginal);
    // After the step, `step` is the root-closer endpoint of this edge, and
    // `reversed` already has rows indexed by the state at `step`. Only this
    // edge's orientation flips.
    cur.matrices[edge_key(cur.root, step)] = std::move(reversed);
    cur.root = step;
  }
  return cur;
}

struct StarParams {
  JoinedTree join;
  GeneralParams params;
};

// The star operation on cone parameters: matrices carry over, and the
// conjoined edge receives the product of the two matrices flowing from t1's
// side into t2's side.
inline StarParams star_params(const Tree& t1, const GeneralParams& u1, const Tree& t2,
                              const GeneralParams& u2, const std::string& leaf1,
                              const std::string& leaf2) {
  validate_params(t1, u1);
  validate_params(t2, u2);
  if (u1.kappa() != u2.kappa()) throw Error("kappa mismatch between parameter sets");
  const int kappa = u1.kappa();

  const int x = t1.leaf_vertex(leaf1);
  const int y = t2.leaf_vertex(leaf2);
  GeneralParams a = u1.root == x ? reroot(t1, u1, t1.neighbors(x)[0]) : u1;
  GeneralParams b = reroot(t2, u2, y);

  JoinedTree join = star_join(t1, t2, leaf1, leaf2);
  const auto parent1 = detail::parent_map(t1, a.root);
  const auto parent2 = detail::parent_map(t2, b.root);

  GeneralParams out;
  out.root = join.map1[a.root];
  const int n1 = t1.neighbors(x)[0];  // leaf1's neighbor
  const int n2 = t2.neighbors(y)[0];

  // Root-closer endpoints are preserved by the embedding: the new root lies
  // on t1's side, and paths into t2's side spread from n2 exactly as they do
  // from t2's root y. Matrices therefore carry over without transposition.
  for (const auto& [e, m] : a.matrices) {
    if (e == edge_key(x, n1)) continue;
    out.matrices[edge_key(join.map1[e.first], join.map1[e.second])] = m;
  }
  for (const auto& [e, m] : b.matrices) {
    if (e == edge_key(y, n2)) continue;
    out.matrices[edge_key(join.map2[e.first], join.map2[e.second])] = m;
  }
  // Rows index the state on t1's side, the root-closer end of the new edge.
  out.matrices[join.conjoined_edge] = detail::matrix_from(a.matrices, parent1, n1, x) *
                                      detail::matrix_from(b.matrices, parent2, y, n2);
  if (out.matrices.begin()->second.rows() != kappa) throw Error("kappa mismatch after join");
  return StarParams{std::move(join), std::move(out)};
}

// Deterministic parameter sampling. Stochastic rows are normalized positive
// integers (exact rationals summing to 1); general entries are integers in
// [-9, 9]. The root is the leaf carrying the first taxon.
inline ModelParams sample_stochastic_params(const Tree& t, int kappa, std::uint64_t seed) {
  Rng rng(seed);
  ModelParams p;
  p.root = t.leaf_vertex(t.taxa_order()[0]);
  auto row = [&](int width) {
    std::vector<Rational> r(width);
    Rational total = 0;
    for (auto& v : r) {
      v = Rational(rng.uniform_int(1, 9));
      total += v;
    }
    for (auto& v : r) v /= total;
    return r;
  };
  p.pi = row(kappa);
  for (const Edge& e : t.edges()) {
    Mat<Rational> m(kappa, kappa);
    for (int i = 0; i < kappa; ++i) {
      auto r = row(kappa);
      for (int j = 0; j < kappa; ++j) m(i, j) = r[j];
    }
    p.matrices[e] = std::move(m);
  }
  return p;
}

inline GeneralParams sample_general_params(const Tree& t, int kappa, std::uint64_t seed) {
  Rng rng(seed);
  GeneralParams p;
  p.root = t.leaf_vertex(t.taxa_order()[0]);
  for (const Edge& e : t.edges()) {
    Mat<Rational> m(kappa, kappa);
    for (auto& v : m.data()) v = Rational(rng.uniform_int(-9, 9));
    p.matrices[e] = std::move(m);
  }
  return p;
}

// Counts of observed leaf patterns from `sites` independent root-to-leaf
// simulations. Per-site random streams are indexed by site number, so the
// result is reproducible for any thread count.
inline Tensor<std::int64_t> simulate_sequences(const Tree& t, const ModelParams& p,
                                               std::int64_t sites, std::uint64_t seed,
                                               int threads = 1) {
  validate_params(t, p);
  if (sites <= 0) throw Error("site count must be positive");
  const int kappa = p.kappa();

  // Double-precision sampling thresholds; exactness is not needed here.
  std::vector<double> pi_cdf(kappa);
  double acc = 0;
  for (int i = 0; i < kappa; ++i) {
    acc += to_double(p.pi[i]);
    pi_cdf[i] = acc;
  }
  const auto parent = detail::parent_map(t, p.root);
  std::vector<std::pair<int, int>> bfs_edges;  // (parent, child), root-first order
  {
    std::vector<int> queue{p.root};
    for (std::size_t q = 0; q < queue.size(); ++q)
      for (int w : t.neighbors(queue[q]))
        if (parent[w] == queue[q]) {
          bfs_edges.push_back({queue[q], w});
          queue.push_back(w);
        }
  }
  std::map<Edge, std::vector<double>> cdf;
  for (const auto& [a, b] : bfs_edges) {
    Mat<Rational> m = detail::matrix_from(p.matrices, parent, a, b);
    std::vector<double> rows(static_cast<std::size_t>(kappa) * kappa);
    for (int i = 0; i < kappa; ++i) {
      double s = 0;
      for (int j = 0; j < kappa; ++j) {
        s += to_double(m(i, j));
        rows[static_cast<std::size_t>(i) * kappa + j] = s;
      }
    }
    cdf[edge_key(a, b)] = std::move(rows);
  }

  std::vector<Axis> axes;
  for (const auto& taxon : t.taxa_order()) axes.push_back({taxon, kappa});
  std::vector<int> leaf_vertex_of_axis;
  for (const auto& taxon : t.taxa_order()) leaf_vertex_of_axis.push_back(t.leaf_vertex(taxon));

  Rng base(seed);
  auto run_chunk = [&](std::int64_t lo, std::int64_t hi, Tensor<std::int64_t>& counts) {
    std::vector<int> state(t.vertex_count(), 0);
    std::vector<int> idx(t.taxon_count(), 0);
    for (std::int64_t site = lo; site < hi; ++site) {
      Rng rng = base.stream(static_cast<std::uint64_t>(site));
      auto draw = [&](const std::vector<double>& row_cdf, int off) {
        const double u = rng.uniform01();
        for (int k = 0; k < kappa; ++k)
          if (u < row_cdf[off + k]) return k;
        return kappa - 1;
      };
      state[p.root] = draw(pi_cdf, 0);
      for (const auto& [a, b] : bfs_edges)
        state[b] = draw(cdf.at(edge_key(a, b)), state[a] * kappa);
      for (int k = 0; k < t.taxon_count(); ++k) idx[k] = state[leaf_vertex_of_axis[k]];
      ++counts.at(idx);
    }
  };

  threads = std::max(1, threads);
  if (threads == 1) {
    Tensor<std::int64_t> counts(axes);
    run_chunk(0, sites, counts);
    return counts;
  }
  std::vector<Tensor<std::int64_t>> partial(threads, Tensor<std::int64_t>(axes));
  std::vector<std::thread> workers;
  const std::int64_t chunk = (sites + threads - 1) / threads;
  for (int w = 0; w < threads; ++w) {
    const std::int64_t lo = w * chunk, hi = std::min(sites, lo + chunk);
    if (lo >= hi) break;
    workers.emplace_back([&, lo, hi, w] { run_chunk(lo, hi, partial[w]); });
  }
  for (auto& th : workers) th.join();
  Tensor<std::int64_t> counts(axes);
  for (const auto& part : partial)
    for (std::size_t i = 0; i < counts.size(); ++i) counts.data()[i] += part.data()[i];
  return counts;
}

}  // namespace phyloinv
