#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "phyloinv/common.hpp"

namespace phyloinv {

// Undirected edge key, endpoints ordered.
using Edge = std::pair<int, int>;

inline Edge edge_key(int u, int v) { return u < v ? Edge{u, v} : Edge{v, u}; }

// Bipartition of the taxa induced by deleting an edge. Canonical form:
// side_a holds the taxon that comes first in taxa_order, members of each
// side listed in taxa_order.
struct Split {
  std::vector<std::string> side_a;
  std::vector<std::string> side_b;

  bool operator==(const Split& o) const { return side_a == o.side_a && side_b == o.side_b; }
  bool operator<(const Split& o) const {
    return std::tie(side_a, side_b) < std::tie(o.side_a, o.side_b);
  }

  std::string str() const {
    auto join = [](const std::vector<std::string>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += v[i];
      }
      return s;
    };
    return join(side_a) + "|" + join(side_b);
  }
};

// Partition of the taxa induced by deleting an internal vertex together with
// its incident edges; one part per incident edge, d parts for valency d.
struct Tripartition {
  std::vector<std::vector<std::string>> parts;
};

// Leaf-labeled unrooted tree. Internal vertices are unlabeled and have
// valency >= 3; leaves have valency 1 and carry taxon names. taxa_order is
// the total order fixing all downstream tensor index conventions.
class Tree {
 public:
  Tree(std::vector<std::vector<int>> adjacency, std::vector<std::string> leaf_names,
       std::vector<std::string> taxa_order)
      : adj_(std::move(adjacency)), leaf_name_(std::move(leaf_names)), taxa_order_(std::move(taxa_order)) {
    validate();
  }

  int vertex_count() const { return static_cast<int>(adj_.size()); }
  int taxon_count() const { return static_cast<int>(taxa_order_.size()); }

  const std::vector<int>& neighbors(int v) const { return adj_[v]; }
  bool is_leaf(int v) const { return !leaf_name_[v].empty(); }
  const std::string& leaf_name(int v) const { return leaf_name_[v]; }
  const std::vector<std::string>& taxa_order() const { return taxa_order_; }

  int leaf_vertex(const std::string& taxon) const {
    for (int v = 0; v < vertex_count(); ++v)
      if (leaf_name_[v] == taxon) return v;
    throw Error("no leaf named '" + taxon + "'");
  }

  int taxon_position(const std::string& taxon) const {
    for (int i = 0; i < taxon_count(); ++i)
      if (taxa_order_[i] == taxon) return i;
    throw Error("taxon '" + taxon + "' not in taxa order");
  }

  // Edges as normalized pairs, sorted; index in this list is the edge id.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (int u = 0; u < vertex_count(); ++u)
      for (int v : adj_[u])
        if (u < v) out.push_back({u, v});
    std::sort(out.begin(), out.end());
    return out;
  }

  bool has_edge(const Edge& e) const {
    if (e.first < 0 || e.second < 0 || e.first >= vertex_count() || e.second >= vertex_count())
      return false;
    const auto& nb = adj_[e.first];
    return std::find(nb.begin(), nb.end(), e.second) != nb.end();
  }

  bool is_binary() const {
    for (int v = 0; v < vertex_count(); ++v)
      if (!is_leaf(v) && adj_[v].size() != 3) return false;
    return true;
  }

  std::vector<int> internal_vertices() const {
    std::vector<int> out;
    for (int v = 0; v < vertex_count(); ++v)
      if (!is_leaf(v)) out.push_back(v);
    return out;
  }

  // Taxa reachable from `from` without crossing `blocked`, in taxa_order.
  std::vector<std::string> taxa_beyond(int blocked, int from) const {
    std::vector<bool> seen(vertex_count(), false);
    seen[blocked] = true;
    std::vector<int> stack{from};
    seen[from] = true;
    std::set<std::string> names;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      if (is_leaf(v)) names.insert(leaf_name_[v]);
      for (int w : adj_[v])
        if (!seen[w]) {
          seen[w] = true;
          stack.push_back(w);
        }
    }
    std::vector<std::string> out;
    for (const auto& t : taxa_order_)
      if (names.count(t)) out.push_back(t);
    return out;
  }

 private:
  void validate() const {
    const int n = vertex_count();
    if (static_cast<int>(leaf_name_.size()) != n) throw Error("leaf name table size mismatch");
    int edge_total = 0;
    for (int v = 0; v < n; ++v) {
      const std::size_t deg = adj_[v].size();
      edge_total += static_cast<int>(deg);
      for (int w : adj_[v]) {
        if (w < 0 || w >= n) throw Error("adjacency index out of range");
        const auto& back = adj_[w];
        if (std::find(back.begin(), back.end(), v) == back.end())
          throw Error("adjacency not symmetric");
      }
      if (!leaf_name_[v].empty() && deg != 1)
        throw Error("leaf '" + leaf_name_[v] + "' has valency " + std::to_string(deg));
      if (leaf_name_[v].empty() && deg < 3)
        throw Error("internal vertex " + std::to_string(v) + " has valency " + std::to_string(deg) +
                    " (must be >= 3)");
    }
    if (edge_total % 2 != 0) throw Error("adjacency not symmetric");
    const int edge_count = edge_total / 2;
    if (edge_count != n - 1) throw Error("not a tree: wrong edge count");
    // Connectivity: reach all vertices from 0.
    std::vector<bool> seen(n, false);
    std::vector<int> stack{0};
    seen[0] = true;
    int reached = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w : adj_[v])
        if (!seen[w]) {
          seen[w] = true;
          ++reached;
          stack.push_back(w);
        }
    }
    if (reached != n) throw Error("not a tree: disconnected");
    std::set<std::string> names;
    for (int v = 0; v < n; ++v)
      if (!leaf_name_[v].empty() && !names.insert(leaf_name_[v]).second)
        throw Error("duplicate taxon name '" + leaf_name_[v] + "'");
    if (names.size() < 2) throw Error("tree needs at least 2 taxa");
    std::set<std::string> order(taxa_order_.begin(), taxa_order_.end());
    if (order != names || order.size() != taxa_order_.size())
      throw Error("taxa order must cover exactly the leaf labels");
  }

  std::vector<std::vector<int>> adj_;
  std::vector<std::string> leaf_name_;
  std::vector<std::string> taxa_order_;
};

namespace detail {

inline bool name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '+' || c == '-';
}

struct NewickCursor {
  const std::string& text;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error("newick syntax error at position " + std::to_string(pos) + ": " + msg);
  }

  void skip_filler() {
    while (pos < text.size()) {
      char c = text[pos];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else if (c == '[') {  // bracket comment, discarded
        std::size_t close = text.find(']', pos);
        if (close == std::string::npos) fail("unterminated comment");
        pos = close + 1;
      } else {
        break;
      }
    }
  }

  char peek() {
    skip_filler();
    if (pos >= text.size()) fail("unexpected end of input");
    return text[pos];
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos;
  }

  std::string name() {
    skip_filler();
    std::string out;
    while (pos < text.size() && name_char(text[pos])) out += text[pos++];
    return out;
  }

  void discard_length() {
    skip_filler();
    if (pos < text.size() && text[pos] == ':') {
      ++pos;
      skip_filler();
      std::size_t start = pos;
      while (pos < text.size() &&
             (std::isdigit(static_cast<unsigned char>(text[pos])) || text[pos] == '.' ||
              text[pos] == '-' || text[pos] == '+' || text[pos] == 'e' || text[pos] == 'E'))
        ++pos;
      if (pos == start) fail("expected branch length after ':'");
    }
  }
};

}  // namespace detail

// Parses a Newick string. Branch lengths, bracket comments, and internal
// labels are accepted and discarded. A degree-2 top vertex (rooted-binary
// dialect) is suppressed; any other valency-2 vertex is rejected. taxa_order
// is the left-to-right order of appearance. Vertex ids are assigned in
// parse order, compacted if the top vertex is suppressed.
inline Tree parse_newick(const std::string& text) {
  detail::NewickCursor cur{text};
  std::vector<std::vector<int>> adj;
  std::vector<std::string> leaf_name;
  std::vector<std::string> taxa;

  auto new_vertex = [&]() {
    adj.emplace_back();
    leaf_name.emplace_back();
    return static_cast<int>(adj.size()) - 1;
  };
  auto link = [&](int u, int v) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  };

  // Returns vertex id of the parsed subtree's top vertex.
  auto parse_subtree = [&](auto&& self) -> int {
    if (cur.peek() == '(') {
      int v = new_vertex();
      cur.expect('(');
      link(v, self(self));
      while (cur.peek() == ',') {
        cur.expect(',');
        link(v, self(self));
      }
      cur.expect(')');
      cur.name();  // internal label, discarded
      cur.discard_length();
      return v;
    }
    std::size_t at = cur.pos;
    std::string taxon = cur.name();
    if (taxon.empty()) {
      cur.pos = at;
      cur.fail("expected taxon name or '('");
    }
    for (const auto& t : taxa)
      if (t == taxon) throw Error("duplicate taxon name '" + taxon + "'");
    int v = new_vertex();
    leaf_name[v] = taxon;
    taxa.push_back(taxon);
    cur.discard_length();
    return v;
  };

  int root = parse_subtree(parse_subtree);
  cur.expect(';');
  cur.skip_filler();
  if (cur.pos != text.size())
    throw Error("newick syntax error at position " + std::to_string(cur.pos) + ": trailing input");

  if (leaf_name[root].empty() && adj[root].size() == 2) {
    // Rooted-binary dialect: suppress the top vertex, merging its two edges.
    int a = adj[root][0], b = adj[root][1];
    auto drop = [&](int v, int gone) {
      auto& nb = adj[v];
      nb.erase(std::find(nb.begin(), nb.end(), gone));
    };
    drop(a, root);
    drop(b, root);
    adj[a].push_back(b);
    adj[b].push_back(a);
    adj.erase(adj.begin() + root);
    leaf_name.erase(leaf_name.begin() + root);
    for (auto& nb : adj)
      for (int& w : nb)
        if (w > root) --w;
  }
  return Tree(std::move(adj), std::move(leaf_name), std::move(taxa));
}

namespace detail {

inline std::string least_taxon_beyond(const Tree& t, int blocked, int from) {
  auto taxa = t.taxa_beyond(blocked, from);
  return taxa.front();
}

inline void write_subtree(const Tree& t, int v, int parent, std::string& out) {
  if (t.is_leaf(v)) {
    out += t.leaf_name(v);
    return;
  }
  std::vector<int> kids;
  for (int w : t.neighbors(v))
    if (w != parent) kids.push_back(w);
  std::sort(kids.begin(), kids.end(), [&](int a, int b) {
    return t.taxon_position(least_taxon_beyond(t, v, a)) <
           t.taxon_position(least_taxon_beyond(t, v, b));
  });
  out += '(';
  for (std::size_t i = 0; i < kids.size(); ++i) {
    if (i) out += ',';
    write_subtree(t, kids[i], v, out);
  }
  out += ')';
}

}  // namespace detail

// Canonical Newick writer: rooted at the internal neighbor of the
// taxa_order-least taxon, children ordered by least contained taxon.
inline std::string write_newick(const Tree& t) {
  if (t.taxon_count() == 2)
    return "(" + t.taxa_order()[0] + "," + t.taxa_order()[1] + ");";
  int first_leaf = t.leaf_vertex(t.taxa_order()[0]);
  int root = t.neighbors(first_leaf)[0];
  std::string out;
  detail::write_subtree(t, root, -1, out);
  out += ';';
  return out;
}

// Split of the taxa by the connected components of t with e deleted.
inline Split edge_split(const Tree& t, const Edge& e) {
  if (!t.has_edge(e)) throw Error("edge " + std::to_string(e.first) + "-" + std::to_string(e.second) + " not in tree");
  std::vector<std::string> side_u = t.taxa_beyond(e.second, e.first);
  std::vector<std::string> side_v = t.taxa_beyond(e.first, e.second);
  if (t.taxon_position(side_v.front()) < t.taxon_position(side_u.front())) std::swap(side_u, side_v);
  return Split{std::move(side_u), std::move(side_v)};
}

inline std::set<Split> split_set(const Tree& t) {
  std::set<Split> out;
  for (const Edge& e : t.edges()) out.insert(edge_split(t, e));
  return out;
}

// One part per component of t with v and its incident edges deleted;
// parts ordered by least contained taxon.
inline Tripartition vertex_tripartition(const Tree& t, int v) {
  if (t.is_leaf(v)) throw Error("vertex " + std::to_string(v) + " is a leaf, not internal");
  Tripartition out;
  for (int w : t.neighbors(v)) out.parts.push_back(t.taxa_beyond(v, w));
  std::sort(out.parts.begin(), out.parts.end(),
            [&](const auto& a, const auto& b) { return t.taxon_position(a.front()) < t.taxon_position(b.front()); });
  return out;
}

// All pairs of leaves sharing an internal neighbor, ordered by taxa_order.
inline std::vector<std::pair<std::string, std::string>> find_cherries(const Tree& t) {
  if (t.taxon_count() < 3) throw Error("find_cherries needs at least 3 taxa");
  std::vector<std::pair<std::string, std::string>> out;
  for (int v : t.internal_vertices()) {
    std::vector<std::string> leaves;
    for (int w : t.neighbors(v))
      if (t.is_leaf(w)) leaves.push_back(t.leaf_name(w));
    std::sort(leaves.begin(), leaves.end(),
              [&](const std::string& a, const std::string& b) { return t.taxon_position(a) < t.taxon_position(b); });
    for (std::size_t i = 0; i < leaves.size(); ++i)
      for (std::size_t j = i + 1; j < leaves.size(); ++j) out.push_back({leaves[i], leaves[j]});
  }
  std::sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
    return std::pair(t.taxon_position(a.first), t.taxon_position(a.second)) <
           std::pair(t.taxon_position(b.first), t.taxon_position(b.second));
  });
  if (t.is_binary() && out.size() < 2)
    throw Error("binary tree with >= 3 taxa must have at least two cherries");
  return out;
}

struct PrunedTree {
  Tree tree;
  std::vector<int> vertex_map;  // old vertex id -> new id, -1 for removed
};

// Deletes the cherry's two leaves and incident edges; the former common
// vertex becomes a leaf labeled new_taxon, placed at the pruned pair's
// earliest taxa_order position.
inline PrunedTree prune_cherry(const Tree& t, const std::pair<std::string, std::string>& cherry,
                               const std::string& new_taxon) {
  int x = t.leaf_vertex(cherry.first);
  int y = t.leaf_vertex(cherry.second);
  if (x == y) throw Error("cherry leaves must be distinct");
  int cx = t.neighbors(x)[0];
  int cy = t.neighbors(y)[0];
  if (cx != cy) throw Error("(" + cherry.first + "," + cherry.second + ") is not a cherry");
  if (t.neighbors(cx).size() != 3)
    throw Error("cherry vertex has valency " + std::to_string(t.neighbors(cx).size()) +
                "; pruning requires valency 3");
  for (const auto& taxon : t.taxa_order())
    if (taxon == new_taxon) throw Error("new taxon name '" + new_taxon + "' collides");

  std::vector<int> vmap(t.vertex_count(), -1);
  int next = 0;
  for (int v = 0; v < t.vertex_count(); ++v)
    if (v != x && v != y) vmap[v] = next++;

  std::vector<std::vector<int>> adj(next);
  std::vector<std::string> names(next);
  for (int v = 0; v < t.vertex_count(); ++v) {
    if (vmap[v] < 0) continue;
    names[vmap[v]] = t.leaf_name(v);
    for (int w : t.neighbors(v))
      if (vmap[w] >= 0) adj[vmap[v]].push_back(vmap[w]);
  }
  names[vmap[cx]] = new_taxon;

  std::vector<std::string> order;
  const int px = t.taxon_position(cherry.first);
  const int py = t.taxon_position(cherry.second);
  const int insert_at = std::min(px, py);
  for (int i = 0; i < t.taxon_count(); ++i) {
    if (i == insert_at) order.push_back(new_taxon);
    if (i == px || i == py) continue;
    order.push_back(t.taxa_order()[i]);
  }
  return PrunedTree{Tree(std::move(adj), std::move(names), std::move(order)), std::move(vmap)};
}

struct JoinedTree {
  Tree tree;
  Edge conjoined_edge;
  std::vector<int> map1;  // t1 vertex id -> joined id, -1 for the removed leaf
  std::vector<int> map2;
};

// Identifies leaf1 of t1 with leaf2 of t2 and deletes the merged vertex,
// replacing its two incident edges by one conjoined edge. Taxa order:
// t1's order minus leaf1, then t2's order minus leaf2.
inline JoinedTree star_join(const Tree& t1, const Tree& t2, const std::string& leaf1,
                            const std::string& leaf2) {
  int x = t1.leaf_vertex(leaf1);
  int y = t2.leaf_vertex(leaf2);
  for (const auto& a : t1.taxa_order())
    if (a != leaf1)
      for (const auto& b : t2.taxa_order())
        if (a == b) throw Error("taxon name '" + a + "' appears in both trees");

  std::vector<int> map1(t1.vertex_count(), -1), map2(t2.vertex_count(), -1);
  int next = 0;
  for (int v = 0; v < t1.vertex_count(); ++v)
    if (v != x) map1[v] = next++;
  for (int v = 0; v < t2.vertex_count(); ++v)
    if (v != y) map2[v] = next++;

  std::vector<std::vector<int>> adj(next);
  std::vector<std::string> names(next);
  for (int v = 0; v < t1.vertex_count(); ++v) {
    if (map1[v] < 0) continue;
    names[map1[v]] = t1.leaf_name(v);
    for (int w : t1.neighbors(v))
      if (map1[w] >= 0) adj[map1[v]].push_back(map1[w]);
  }
  for (int v = 0; v < t2.vertex_count(); ++v) {
    if (map2[v] < 0) continue;
    names[map2[v]] = t2.leaf_name(v);
    for (int w : t2.neighbors(v))
      if (map2[w] >= 0) adj[map2[v]].push_back(map2[w]);
  }
  int u1 = map1[t1.neighbors(x)[0]];
  int u2 = map2[t2.neighbors(y)[0]];
  adj[u1].push_back(u2);
  adj[u2].push_back(u1);

  std::vector<std::string> order;
  for (const auto& a : t1.taxa_order())
    if (a != leaf1) order.push_back(a);
  for (const auto& b : t2.taxa_order())
    if (b != leaf2) order.push_back(b);

  return JoinedTree{Tree(std::move(adj), std::move(names), std::move(order)), edge_key(u1, u2),
                    std::move(map1), std::move(map2)};
}

struct SplitTrees {
  Tree side_a;  // component of e's lesser endpoint; fresh taxon appended last
  Tree side_b;  // other component; fresh taxon placed first
};

// Cuts t at edge e into the two component subtrees, each gaining a fresh
// pendant leaf where the edge was attached.
inline SplitTrees split_at_edge(const Tree& t, const Edge& e, const std::string& fresh_a,
                                const std::string& fresh_b) {
  if (!t.has_edge(e)) throw Error("edge not in tree");
  auto component = [&](int keep, int drop, const std::string& fresh, bool fresh_first) {
    std::vector<int> vmap(t.vertex_count(), -1);
    std::vector<int> stack{keep};
    std::vector<int> verts;
    std::vector<bool> seen(t.vertex_count(), false);
    seen[keep] = seen[drop] = true;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      verts.push_back(v);
      for (int w : t.neighbors(v))
        if (!seen[w]) {
          seen[w] = true;
          stack.push_back(w);
        }
    }
    std::sort(verts.begin(), verts.end());
    int next = 0;
    for (int v : verts) vmap[v] = next++;
    std::vector<std::vector<int>> adj(next + 1);
    std::vector<std::string> names(next + 1);
    for (int v : verts) {
      names[vmap[v]] = t.leaf_name(v);
      for (int w : t.neighbors(v))
        if (vmap[w] >= 0 && w != v) adj[vmap[v]].push_back(vmap[w]);
    }
    const int fresh_vertex = next;
    names[fresh_vertex] = fresh;
    adj[fresh_vertex].push_back(vmap[keep]);
    adj[vmap[keep]].push_back(fresh_vertex);
    std::vector<std::string> order;
    if (fresh_first) order.push_back(fresh);
    for (const auto& taxon : t.taxa_order())
      if (std::count(names.begin(), names.end(), taxon)) order.push_back(taxon);
    if (!fresh_first) order.push_back(fresh);
    return Tree(std::move(adj), std::move(names), std::move(order));
  };
  return SplitTrees{component(e.first, e.second, fresh_a, false),
                    component(e.second, e.first, fresh_b, true)};
}

struct ResolvedTree {
  Tree tree;
  std::vector<Edge> collapsed_edges;       // new edges; contracting them recovers the input
  std::map<Edge, Edge> edge_map;           // original edge -> resolved edge
  std::vector<int> vertex_map;             // original vertex id -> resolved id
};

// Resolves every vertex of valency > 3 into a caterpillar of trivalent
// vertices. Branches at each such vertex are ordered by least contained
// taxon and rotated by the seed, so distinct seeds pick distinct
// resolutions; the result is deterministic given the seed.
inline ResolvedTree resolve_binary(const Tree& t, std::uint64_t seed = 0) {
  std::vector<std::vector<int>> adj(t.vertex_count());
  for (int v = 0; v < t.vertex_count(); ++v) adj[v] = t.neighbors(v);
  std::vector<std::string> names(t.vertex_count());
  for (int v = 0; v < t.vertex_count(); ++v) names[v] = t.leaf_name(v);

  std::vector<int> vmap(t.vertex_count());
  for (int v = 0; v < t.vertex_count(); ++v) vmap[v] = v;
  std::map<Edge, Edge> cur_to_orig;
  for (const Edge& e : t.edges()) cur_to_orig[e] = e;
  std::vector<Edge> collapsed;

  // Least taxa_order position reachable from `from` on the current structure,
  // not crossing `blocked`.
  auto least_pos_beyond = [&](int blocked, int from) {
    std::vector<bool> seen(adj.size(), false);
    seen[blocked] = seen[from] = true;
    std::vector<int> stack{from};
    int best = t.taxon_count();
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      if (!names[v].empty()) best = std::min(best, t.taxon_position(names[v]));
      for (int w : adj[v])
        if (!seen[w]) {
          seen[w] = true;
          stack.push_back(w);
        }
    }
    return best;
  };

  std::vector<int> high;
  for (int v : t.internal_vertices())
    if (t.neighbors(v).size() > 3) high.push_back(v);
  std::sort(high.begin(), high.end(),
            [&](int a, int b) { return least_pos_beyond(a, adj[a][0]) < least_pos_beyond(b, adj[b][0]); });

  for (int v : high) {
    std::vector<int> branches = adj[v];
    std::sort(branches.begin(), branches.end(),
              [&](int a, int b) { return least_pos_beyond(v, a) < least_pos_beyond(v, b); });
    std::rotate(branches.begin(), branches.begin() + static_cast<long>(seed % branches.size()),
                branches.end());
    const int d = static_cast<int>(branches.size());
    // Caterpillar chain v = c_0, c_1, ..., c_{d-3}; interior hubs keep one
    // branch each, the two ends keep two.
    std::vector<int> chain{v};
    for (int i = 0; i < d - 3; ++i) {
      adj.emplace_back();
      names.emplace_back();
      chain.push_back(static_cast<int>(adj.size()) - 1);
    }
    adj[v].clear();
    auto relink = [&](int hub, int branch) {
      auto& nb = adj[branch];
      auto it = std::find(nb.begin(), nb.end(), v);
      if (it != nb.end()) *it = hub;
      adj[hub].push_back(branch);
      if (hub != v) {
        auto entry = cur_to_orig.find(edge_key(v, branch));
        if (entry != cur_to_orig.end()) {
          Edge orig = entry->second;
          cur_to_orig.erase(entry);
          cur_to_orig[edge_key(hub, branch)] = orig;
        }
      }
    };
    relink(chain[0], branches[0]);
    relink(chain[0], branches[1]);
    for (int i = 1; i <= d - 3; ++i) {
      adj[chain[i - 1]].push_back(chain[i]);
      adj[chain[i]].push_back(chain[i - 1]);
      collapsed.push_back(edge_key(chain[i - 1], chain[i]));
      relink(chain[i], branches[i + 1]);
    }
    relink(chain[d - 3], branches[d - 1]);
  }

  std::map<Edge, Edge> emap;
  for (const auto& [cur, orig] : cur_to_orig) emap[orig] = cur;
  return ResolvedTree{Tree(std::move(adj), std::move(names), t.taxa_order()), std::move(collapsed),
                      std::move(emap), std::move(vmap)};
}

// Contracts the given internal edges (inverse of resolve_binary).
inline Tree contract_edges(const Tree& t, const std::vector<Edge>& contract) {
  std::set<Edge> gone;
  for (const Edge& e : contract) {
    if (!t.has_edge(e)) throw Error("cannot contract: edge not in tree");
    if (t.is_leaf(e.first) || t.is_leaf(e.second)) throw Error("cannot contract a pendant edge");
    gone.insert(edge_key(e.first, e.second));
  }
  // Union-find over endpoints of contracted edges.
  std::vector<int> rep(t.vertex_count());
  for (int v = 0; v < t.vertex_count(); ++v) rep[v] = v;
  auto find = [&](int v) {
    while (rep[v] != v) v = rep[v] = rep[rep[v]];
    return v;
  };
  for (const Edge& e : gone) rep[find(e.first)] = find(e.second);

  std::vector<int> vmap(t.vertex_count(), -1);
  int next = 0;
  for (int v = 0; v < t.vertex_count(); ++v)
    if (find(v) == v) vmap[v] = next++;
  std::vector<std::vector<int>> adj(next);
  std::vector<std::string> names(next);
  for (int v = 0; v < t.vertex_count(); ++v) {
    int rv = vmap[find(v)];
    if (!t.leaf_name(v).empty()) names[rv] = t.leaf_name(v);
    for (int w : t.neighbors(v)) {
      int rw = vmap[find(w)];
      if (rv != rw && v < w) {
        adj[rv].push_back(rw);
        adj[rw].push_back(rv);
      }
    }
  }
  return Tree(std::move(adj), std::move(names), t.taxa_order());
}

}  // namespace phyloinv
