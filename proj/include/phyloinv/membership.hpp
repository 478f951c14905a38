#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "phyloinv/common.hpp"
#include "phyloinv/invariants.hpp"
#include "phyloinv/linalg.hpp"
#include "phyloinv/poly.hpp"
#include "phyloinv/tensor.hpp"
#include "phyloinv/tree.hpp"

namespace phyloinv {

// Rank bound exceeded where a factorization or membership precondition
// required it; carries the offending rank.
class RankExceeded : public Error {
 public:
  RankExceeded(const std::string& msg, int rank) : Error(msg), rank_(rank) {}
  int rank() const { return rank_; }

 private:
  int rank_;
};

enum class Verdict { Accept, Reject, ProbabilisticAccept };

inline std::string verdict_str(Verdict v) {
  switch (v) {
    case Verdict::Accept: return "accept";
    case Verdict::Reject: return "reject";
    default: return "probabilistic-accept";
  }
}

struct MembershipReport {
  Verdict verdict = Verdict::Accept;
  int kappa = 0;
  std::string mode;  // "edge-rank" | "exact" | "probe"

  struct EdgeRank {
    Split split;
    int rows = 0, cols = 0;
    int rank = 0;
  };
  std::vector<EdgeRank> edge_ranks;

  struct Witness {
    std::string generator;
    std::string value;
  };
  std::vector<Witness> witnesses;  // nonzero certificates on reject

  struct ProbeSummary {
    int trials = 0;
    std::uint64_t seed = 0;
    int z_entry_range = 0;
    int vertices_probed = 0;
    // Worst per-vertex Schwartz-Zippel bound; 1 when no probe ran.
    double false_accept_bound = 1.0;
  };
  std::optional<ProbeSummary> probe;

  std::vector<std::string> notes;
};

namespace detail {

inline void check_axes_match(const Tensor<Rational>& p, const Tree& t) {
  if (p.order() != t.taxon_count()) throw Error("tensor order does not match taxon count");
  for (int k = 0; k < p.order(); ++k)
    if (p.axis(k).label != t.taxa_order()[static_cast<std::size_t>(k)])
      throw Error("tensor axis '" + p.axis(k).label + "' does not match taxon '" +
                  t.taxa_order()[static_cast<std::size_t>(k)] + "'");
}

}  // namespace detail

// Exact rank of every edge flattening; accept iff all ranks are at most
// kappa. For kappa = 2 on binary trees this is the full set-theoretic
// membership test.
inline MembershipReport edge_rank_test(const Tensor<Rational>& p, const Tree& t, int kappa) {
  detail::check_axes_match(p, t);
  MembershipReport report;
  report.kappa = kappa;
  report.mode = "edge-rank";
  for (const Edge& e : t.edges()) {
    Split s = edge_split(t, e);
    auto flat = flatten(p, FlatteningSpec{{s.side_a, s.side_b}});
    MembershipReport::EdgeRank entry;
    entry.split = s;
    entry.rows = flat.axis(0).size;
    entry.cols = flat.axis(1).size;
    entry.rank = rank_exact(flat);
    if (entry.rank > kappa) {
      report.verdict = Verdict::Reject;
      report.witnesses.push_back({"edge split=" + s.str(),
                                  "rank " + std::to_string(entry.rank) + " > " + std::to_string(kappa)});
    }
    report.edge_ranks.push_back(std::move(entry));
  }
  return report;
}

struct MembershipOptions {
  bool probe_mode = false;
  ProbeConfig probe;
  GeneratorOptions generators;
};

// Zero-set membership for the tree-wide generator construction. Exact mode
// evaluates every generator symbolically; probe mode combines exact edge
// ranks with randomized contractions of the base set at every internal
// vertex. Probe accepts are labeled probabilistic unless no probe actually
// ran (the kappa = 2 case, which the edge ranks decide exactly).
inline MembershipReport membership(const Tensor<Rational>& p, const Tree& t, int kappa,
                                   const GeneratorSet& base3, const MembershipOptions& opts = {}) {
  detail::check_axes_match(p, t);
  if (kappa >= 3 && base3.trivial()) {
    if (kappa >= 4)
      throw Error("no base generator set is known for kappa >= 4; supply one explicitly");
    throw Error("kappa = 3 needs an imported 3-leaf base generator set (27 quartics)");
  }
  std::vector<int> states;
  for (const Axis& ax : p.axes()) states.push_back(ax.size);
  const char* multifurcation_note =
      "multifurcating tree: the verdict is set-theoretic only; no ideal-level statement is implied";

  if (!opts.probe_mode) {
    MembershipReport report;
    report.kappa = kappa;
    report.mode = "exact";
    if (!t.is_binary()) report.notes.push_back(multifurcation_note);
    GeneratorSet gens = tree_generators(t, kappa, base3, states, opts.generators);
    for (std::size_t i = 0; i < gens.polys.size(); ++i) {
      Rational value = evaluate(gens.polys[i], p);
      if (value != 0) {
        report.verdict = Verdict::Reject;
        report.witnesses.push_back({gens.sources[i], rational_str(value)});
      }
    }
    return report;
  }

  MembershipReport report = edge_rank_test(p, t, kappa);
  report.mode = "probe";
  if (!t.is_binary()) report.notes.push_back(multifurcation_note);
  MembershipReport::ProbeSummary summary;
  summary.trials = opts.probe.trials;
  summary.seed = opts.probe.seed;
  summary.z_entry_range = opts.probe.z_entry_range;
  if (!base3.trivial()) {
    for (int v : t.internal_vertices()) {
      Tripartition tp = vertex_tripartition(t, v);
      if (tp.parts.size() != 3)
        throw Error("probe mode needs a matching base set for valency " +
                    std::to_string(tp.parts.size()) + " vertices");
      auto flat = flatten(p, FlatteningSpec{{tp.parts[0], tp.parts[1], tp.parts[2]}});
      ProbeConfig cfg = opts.probe;
      cfg.exact = true;  // reject witnesses must be exact certificates
      cfg.seed = opts.probe.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(v + 1));
      ProbeReport pr = probe_eval(base3, flat, cfg);
      if (summary.vertices_probed == 0)
        summary.false_accept_bound = pr.false_accept_bound;
      else
        summary.false_accept_bound = std::max(summary.false_accept_bound, pr.false_accept_bound);
      ++summary.vertices_probed;
      for (const auto& w : pr.witnesses) {
        report.verdict = Verdict::Reject;
        report.witnesses.push_back({"probe vertex=" + std::to_string(v) + " base=" +
                                        std::to_string(w.poly) + " trial=" + std::to_string(w.trial),
                                    w.value});
      }
    }
  }
  report.probe = summary;
  if (report.verdict == Verdict::Accept && summary.vertices_probed > 0)
    report.verdict = Verdict::ProbabilisticAccept;
  return report;
}

struct EdgeDecomposition {
  Tensor<Rational> left;   // side_a taxa plus the fresh axis last
  Tensor<Rational> right;  // fresh axis first, then side_b taxa
  int inner_rank = 0;
  Split split;
  Tree side_a_tree;
  Tree side_b_tree;
  std::string fresh_label;
};

// Exact rank factorization of the edge flattening, unflattened into two
// tensors sharing a fresh axis padded to size kappa; their star contraction
// reproduces p exactly. The nonzero slices of each factor along the fresh
// axis are linearly independent by construction.
inline EdgeDecomposition decompose_edge(const Tensor<Rational>& p, const Tree& t, const Edge& e,
                                        int kappa, const std::string& fresh = "#edge") {
  detail::check_axes_match(p, t);
  Split s = edge_split(t, e);
  auto flat = flatten(p, FlatteningSpec{{s.side_a, s.side_b}});
  RankFactorization rf = rank_factor(as_matrix(flat));
  if (rf.rank > kappa)
    throw RankExceeded("edge split=" + s.str() + " has rank " + std::to_string(rf.rank) + " > " +
                           std::to_string(kappa),
                       rf.rank);

  // Pad the factorization to width kappa with zero columns / rows.
  Mat<Rational> u(rf.basis.rows(), kappa), v(kappa, rf.reduced.cols());
  for (int i = 0; i < rf.basis.rows(); ++i)
    for (int k = 0; k < rf.rank; ++k) u(i, k) = rf.basis(i, k);
  for (int k = 0; k < rf.rank; ++k)
    for (int j = 0; j < rf.reduced.cols(); ++j) v(k, j) = rf.reduced(k, j);

  std::vector<Axis> left_axes, right_axes;
  for (const auto& taxon : s.side_a) left_axes.push_back(p.axis(p.axis_of(taxon)));
  left_axes.push_back({fresh, kappa});
  right_axes.push_back({fresh, kappa});
  for (const auto& taxon : s.side_b) right_axes.push_back(p.axis(p.axis_of(taxon)));

  FlatteningSpec left_spec{{s.side_a, {fresh}}};
  FlatteningSpec right_spec{{{fresh}, s.side_b}};

  // Orient the cut so its first component is the canonical side_a.
  Edge oriented = e;
  if (t.taxa_beyond(e.second, e.first).front() != s.side_a.front())
    oriented = {e.second, e.first};
  SplitTrees sides = split_at_edge(t, oriented, fresh, fresh);

  EdgeDecomposition out{
      unflatten(from_matrix(u, detail::block_label(s.side_a), fresh), left_axes, left_spec),
      unflatten(from_matrix(v, fresh, detail::block_label(s.side_b)), right_axes, right_spec),
      rf.rank,
      s,
      std::move(sides.side_a),
      std::move(sides.side_b),
      fresh};
  return out;
}

struct FactorizationStep {
  std::string fresh;
  std::pair<std::string, std::string> cherry;
  Tensor<Rational> factor;  // three axes: the cherry pair and the fresh axis
  int inner_rank = 0;
};

// Tree-structured factorization into 3-dimensional pieces. Factors are not
// unique (each internal edge carries a gauge freedom) and no normalization
// is imposed; recomposition is exact.
struct Factorization {
  int kappa = 0;
  std::vector<std::string> taxa_order;
  std::vector<FactorizationStep> steps;
  Tensor<Rational> core;

  Factorization() : core(std::vector<Axis>{}) {}
};

// Recursive cherry-wise factorization of a tensor accepted by the edge rank
// test on a binary tree.
inline Factorization decompose_full(const Tensor<Rational>& p, const Tree& t, int kappa = 2) {
  detail::check_axes_match(p, t);
  if (!t.is_binary()) throw Error("decompose_full needs a binary tree");
  {
    MembershipReport gate = edge_rank_test(p, t, kappa);
    if (gate.verdict == Verdict::Reject) {
      int worst = 0;
      for (const auto& entry : gate.edge_ranks) worst = std::max(worst, entry.rank);
      throw RankExceeded("input fails the edge rank test: " + gate.witnesses.front().generator + " " +
                             gate.witnesses.front().value,
                         worst);
    }
  }

  Factorization out;
  out.kappa = kappa;
  out.taxa_order = t.taxa_order();
  Tensor<Rational> cur = p;
  Tree cur_t = t;
  int counter = 0;
  while (cur_t.taxon_count() > 3) {
    auto cherries = find_cherries(cur_t);
    auto cherry = cherries.front();
    int cx = cur_t.neighbors(cur_t.leaf_vertex(cherry.first))[0];
    int third = -1;
    for (int w : cur_t.neighbors(cx))
      if (cur_t.is_leaf(w) == false || (cur_t.leaf_name(w) != cherry.first && cur_t.leaf_name(w) != cherry.second))
        third = w;
    const std::string fresh = "#" + std::to_string(counter++);
    EdgeDecomposition dec = decompose_edge(cur, cur_t, edge_key(cx, third), kappa, fresh);

    // One factor carries the cherry pair; the other continues the recursion.
    const bool cherry_in_a =
        std::find(dec.split.side_a.begin(), dec.split.side_a.end(), cherry.first) !=
        dec.split.side_a.end();
    Tensor<Rational> cherry_factor = cherry_in_a ? dec.left : dec.right;
    Tensor<Rational> rest = cherry_in_a ? dec.right : dec.left;

    out.steps.push_back({fresh, cherry, std::move(cherry_factor), dec.inner_rank});
    Tree next = prune_cherry(cur_t, cherry, fresh).tree;
    std::vector<std::string> order = next.taxa_order();
    cur = permute_axes(rest, order);
    cur_t = std::move(next);
  }
  out.core = cur;
  return out;
}

// Folds the factor tree back together; the result matches the decomposed
// tensor exactly.
inline Tensor<Rational> recompose(const Factorization& f) {
  Tensor<Rational> cur = f.core;
  for (auto it = f.steps.rbegin(); it != f.steps.rend(); ++it) {
    cur = star(cur, it->factor, cur.axis_of(it->fresh), it->factor.axis_of(it->fresh));
  }
  return permute_axes(cur, f.taxa_order);
}

struct SplitScore {
  Split split;
  double score = 0;
  int exact_rank = -1;  // set in exact mode
};

struct SplitSupportOptions {
  bool exact = true;        // exact rank short-circuit for rational counts
  bool minor_score = false; // score by the largest |minor| instead of the
                            // singular value ratio
};

namespace detail {

inline double minor_score(const Mat<double>& m, int kappa) {
  const int d = kappa + 1;
  if (m.rows() < d || m.cols() < d) return 0;
  std::vector<int> rsel(d), csel(d);
  std::iota(rsel.begin(), rsel.end(), 0);
  double best = 0;
  do {
    std::iota(csel.begin(), csel.end(), 0);
    do {
      Mat<double> sub(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) sub(i, j) = m(rsel[i], csel[j]);
      // Gaussian determinant, small d.
      double det = 1;
      for (int c = 0; c < d; ++c) {
        int piv = -1;
        for (int r = c; r < d; ++r)
          if (std::abs(sub(r, c)) > 1e-300) {
            piv = r;
            break;
          }
        if (piv < 0) {
          det = 0;
          break;
        }
        if (piv != c) {
          for (int j = 0; j < d; ++j) std::swap(sub(piv, j), sub(c, j));
          det = -det;
        }
        det *= sub(c, c);
        for (int r = c + 1; r < d; ++r) {
          double fac = sub(r, c) / sub(c, c);
          for (int j = c; j < d; ++j) sub(r, j) -= fac * sub(c, j);
        }
      }
      best = std::max(best, std::abs(det));
    } while (next_combination(csel, m.cols()));
  } while (next_combination(rsel, m.rows()));
  return best;
}

}  // namespace detail

// Scores candidate splits on (count or frequency) data: the flattening's
// residual singular value ratio sigma_{kappa+1} / sigma_1, zero when the
// rank bound already holds. Splits are ranked ascending, so the best
// supported split comes first. In exact mode a rational flattening of rank
// at most kappa scores exactly zero.
inline std::vector<SplitScore> split_support(const Tensor<Rational>& counts,
                                             const std::vector<Split>& candidates, int kappa,
                                             const SplitSupportOptions& opts = {}) {
  if (candidates.empty()) throw Error("no candidate splits given");
  Rational total = 0;
  for (const auto& v : counts.data()) {
    if (v < 0) throw Error("negative count entry");
    total += v;
  }
  if (total == 0) throw Error("empty counts");

  Tensor<Rational> freq = counts;
  for (auto& v : freq.data()) v /= total;

  std::vector<SplitScore> out;
  for (const Split& s : candidates) {
    auto flat = flatten(freq, FlatteningSpec{{s.side_a, s.side_b}});
    SplitScore score;
    score.split = s;
    if (opts.exact) {
      score.exact_rank = rank_exact(flat);
      if (score.exact_rank <= kappa) {
        score.score = 0;
        out.push_back(std::move(score));
        continue;
      }
    }
    Mat<double> m = as_matrix(convert<double>(flat));
    if (opts.minor_score) {
      score.score = detail::minor_score(m, kappa);
    } else {
      auto sigma = singular_values(m);
      if (static_cast<int>(sigma.size()) <= kappa || sigma[0] <= 0)
        score.score = 0;
      else
        score.score = sigma[static_cast<std::size_t>(kappa)] / sigma[0];
    }
    out.push_back(std::move(score));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const SplitScore& a, const SplitScore& b) { return a.score < b.score; });
  return out;
}

}  // namespace phyloinv
