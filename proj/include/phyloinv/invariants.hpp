#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "phyloinv/common.hpp"
#include "phyloinv/poly.hpp"
#include "phyloinv/tensor.hpp"
#include "phyloinv/tree.hpp"

namespace phyloinv {

// A named collection of invariant polynomials with the model shape they
// belong to and a provenance tag per generator.
struct GeneratorSet {
  int kappa = 0;
  std::vector<int> states;
  std::vector<Polynomial> polys;
  std::vector<std::string> sources;

  // Exact number of generators the construction defines; exceeds
  // polys.size() when materialization was capped.
  std::size_t total_count = 0;

  bool trivial() const {
    for (const auto& p : polys)
      if (!p.is_zero()) return false;
    return true;
  }
};

inline void validate_generator_set(const GeneratorSet& g) {
  if (g.kappa < 2) throw Error("generator set needs kappa >= 2");
  if (g.polys.size() != g.sources.size()) throw Error("generator sources out of sync");
  for (const auto& p : g.polys)
    for (const Variable& v : p.variables()) {
      if (v.kind != Variable::Kind::Entry) throw Error("generator contains z-variables");
      if (v.idx.size() != g.states.size())
        throw Error("generator variable arity does not match states");
      for (std::size_t k = 0; k < v.idx.size(); ++k)
        if (v.idx[k] < 0 || v.idx[k] >= g.states[k])
          throw Error("generator variable index out of range for declared states");
    }
}

// The set {0} defining the 3-leaf variety for kappa = 2.
inline GeneratorSet trivial_base_kappa2(int n_leaves = 3) {
  GeneratorSet g;
  g.kappa = 2;
  g.states.assign(n_leaves, 2);
  g.polys.push_back(Polynomial{});
  g.sources.push_back("zero");
  g.total_count = 1;
  return g;
}

namespace detail {

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t out = 1;
  for (std::uint64_t i = 1; i <= k; ++i) out = out * (n - k + i) / i;
  return out;
}

inline bool next_combination(std::vector<int>& c, int n) {
  const int k = static_cast<int>(c.size());
  for (int i = k - 1; i >= 0; --i) {
    if (c[i] < n - k + i) {
      ++c[i];
      for (int j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
      return true;
    }
  }
  return false;
}

// Decodes a flattening's composite (row, col) position back to the full
// index tuple, for a bipartition of axis positions into two blocks.
struct BlockDecoder {
  std::vector<int> positions;  // axis positions, ascending
  std::vector<int> sizes;      // matching axis sizes

  void decode(int composite, std::vector<int>& idx) const {
    for (int k = static_cast<int>(positions.size()) - 1; k >= 0; --k) {
      idx[positions[k]] = composite % sizes[k];
      composite /= sizes[k];
    }
  }
  int block_size() const {
    int s = 1;
    for (int x : sizes) s *= x;
    return s;
  }
};

inline BlockDecoder make_decoder(const std::vector<std::string>& members,
                                 const std::vector<std::string>& taxa,
                                 const std::vector<int>& states) {
  BlockDecoder d;
  for (std::size_t t = 0; t < taxa.size(); ++t)
    for (const auto& m : members)
      if (taxa[t] == m) {
        d.positions.push_back(static_cast<int>(t));
        d.sizes.push_back(states[t]);
      }
  return d;
}

// Streams all (kappa+1)-minors of the flattening given by a bipartition of
// the taxa, as polynomials in the full tensor-entry variables.
template <typename Sink>
std::uint64_t bipartition_minors(const std::vector<std::string>& side_a,
                                 const std::vector<std::string>& side_b,
                                 const std::vector<std::string>& taxa, const std::vector<int>& states,
                                 int kappa, const std::string& source_prefix, Sink&& sink,
                                 std::optional<std::size_t> cap, std::size_t already) {
  const int d = kappa + 1;
  BlockDecoder rows = make_decoder(side_a, taxa, states);
  BlockDecoder cols = make_decoder(side_b, taxa, states);
  const int nrows = rows.block_size(), ncols = cols.block_size();
  if (nrows < d || ncols < d) return 0;
  const std::uint64_t total = binomial(nrows, d) * binomial(ncols, d);

  std::vector<int> full(taxa.size(), 0);
  auto entry_var = [&](int r, int c) {
    rows.decode(r, full);
    cols.decode(c, full);
    return Variable::entry(full);
  };

  std::size_t produced = already;
  std::vector<int> rsel(d), csel(d);
  std::iota(rsel.begin(), rsel.end(), 0);
  do {
    std::iota(csel.begin(), csel.end(), 0);
    do {
      if (cap && produced >= *cap) return total;
      auto row_str = [](const std::vector<int>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
        return s;
      };
      sink(determinant_poly(rsel, csel, entry_var),
           source_prefix + " rows=" + row_str(rsel) + " cols=" + row_str(csel));
      ++produced;
    } while (next_combination(csel, ncols));
  } while (next_combination(rsel, nrows));
  return total;
}

}  // namespace detail

struct GeneratorOptions {
  // Materialize at most this many generators; exact totals are still
  // reported in total_count.
  std::optional<std::size_t> cap;
  std::size_t term_guard = 10'000'000;
};

// All (kappa+1) x (kappa+1) minors of the edge flattenings of a tensor of
// indeterminates on t. Edges whose flattening has a side shorter than
// kappa+1 contribute nothing. `states` lists per-taxon state counts in
// taxa_order (defaults to kappa everywhere).
inline GeneratorSet edge_invariants(const Tree& t, int kappa, std::vector<int> states = {},
                                    const GeneratorOptions& opts = {}) {
  const auto& taxa = t.taxa_order();
  if (states.empty()) states.assign(taxa.size(), kappa);
  if (states.size() != taxa.size()) throw Error("one state count per taxon required");
  for (int s : states)
    if (s < 1) throw Error("state counts must be >= 1");

  GeneratorSet out;
  out.kappa = kappa;
  out.states = states;
  for (const Edge& e : t.edges()) {
    Split s = edge_split(t, e);
    out.total_count += detail::bipartition_minors(
        s.side_a, s.side_b, taxa, states, kappa, "edge-minor split=" + s.str(),
        [&](Polynomial p, std::string src) {
          out.polys.push_back(std::move(p));
          out.sources.push_back(std::move(src));
        },
        opts.cap, out.polys.size());
  }
  return out;
}

enum class StarMode { Symbolic, SkipTilde };

// The construction F(kappa; l_1, ..., l_n) for the n-leaf star tree from a
// base set F for (kappa; kappa, ..., kappa): the z-coefficient polynomials
// of every base generator evaluated at the formally contracted tensor,
// together with edge minors. For kappa = 2 the base is {0} and the output
// is the 3x3 minors of all bipartition flattenings, which define the
// variety for every n; for larger kappa the pendant-edge flattenings
// suffice alongside the tilde set. When every l_i equals kappa the tilde
// set is the base itself.
inline GeneratorSet star_generators(int kappa, const std::vector<int>& states,
                                    const GeneratorSet& base, StarMode mode = StarMode::Symbolic,
                                    const GeneratorOptions& opts = {}) {
  const int n = static_cast<int>(states.size());
  if (n < 2) throw Error("star tree needs at least 2 leaves");
  for (int l : states)
    if (l < kappa) throw Error("state count below kappa: the construction needs every l_i >= kappa");
  validate_generator_set(base);
  if (base.kappa != kappa) throw Error("base set kappa mismatch");
  if (static_cast<int>(base.states.size()) != n)
    throw Error("base set is for " + std::to_string(base.states.size()) + " leaves, star tree has " +
                std::to_string(n));
  for (int s : base.states)
    if (s != kappa) throw Error("base set must have kappa states on every leaf");
  if (mode == StarMode::SkipTilde && !base.trivial())
    throw Error("skip_tilde is only valid for a trivial base set");

  std::vector<std::string> taxa;
  for (int i = 0; i < n; ++i) taxa.push_back("a" + std::to_string(i + 1));

  GeneratorSet out;
  out.kappa = kappa;
  out.states = states;
  std::set<Polynomial> seen;
  auto emit = [&](Polynomial p, std::string src) {
    if (p.is_zero()) return;
    if (!seen.insert(p).second) return;
    out.polys.push_back(std::move(p));
    out.sources.push_back(std::move(src));
  };

  // Edge-minor part.
  if (base.trivial()) {
    // All bipartition flattenings.
    for (int mask = 0; mask < (1 << (n - 1)); ++mask) {
      std::vector<std::string> side_a{taxa[0]};
      std::vector<std::string> side_b;
      for (int i = 1; i < n; ++i)
        ((mask >> (i - 1)) & 1 ? side_a : side_b).push_back(taxa[i]);
      if (side_b.empty()) continue;
      out.total_count += detail::bipartition_minors(
          side_a, side_b, taxa, states, kappa,
          "edge-minor split=" + Split{side_a, side_b}.str(), emit, opts.cap, out.polys.size());
    }
    return out;
  }

  // Pendant-edge flattenings.
  for (int i = 0; i < n; ++i) {
    std::vector<std::string> side_a{taxa[i]};
    std::vector<std::string> side_b;
    for (int j = 0; j < n; ++j)
      if (j != i) side_b.push_back(taxa[j]);
    out.total_count += detail::bipartition_minors(side_a, side_b, taxa, states, kappa,
                                                  "edge-minor split=" + Split{side_a, side_b}.str(),
                                                  emit, opts.cap, out.polys.size());
  }

  // Tilde part.
  bool all_kappa = true;
  for (int l : states) all_kappa = all_kappa && l == kappa;
  if (all_kappa) {
    for (std::size_t i = 0; i < base.polys.size(); ++i) {
      emit(base.polys[i], "base " + base.sources[i]);
      ++out.total_count;
    }
    return out;
  }
  TildeOptions topts;
  topts.term_guard = opts.term_guard;
  for (std::size_t i = 0; i < base.polys.size(); ++i) {
    if (base.polys[i].is_zero()) continue;
    Polynomial substituted = substitute_tilde(base.polys[i], kappa, states, topts);
    for (auto& [zmono, coeff] : extract_z_coefficients(substituted)) {
      ++out.total_count;
      emit(std::move(coeff), "tilde base=" + std::to_string(i) + " z=" + monomial_str(zmono));
    }
  }
  return out;
}

// The tree-wide generator set: the union over internal vertices of the star
// construction applied to the vertex flattening, with every polynomial
// rewritten in the full tensor's entry variables and deduplicated by
// canonical form. base3 may be the trivial set for kappa = 2; explicit base
// sets are required for kappa >= 3.
inline GeneratorSet tree_generators(const Tree& t, int kappa, const GeneratorSet& base3,
                                    std::vector<int> states = {}, const GeneratorOptions& opts = {}) {
  const auto& taxa = t.taxa_order();
  if (states.empty()) states.assign(taxa.size(), kappa);
  if (states.size() != taxa.size()) throw Error("one state count per taxon required");
  if (kappa >= 3 && base3.trivial()) {
    if (kappa >= 4)
      throw Error("no base generator set is known for kappa >= 4; supply one explicitly");
    throw Error("kappa = 3 needs an imported 3-leaf base generator set (27 quartics)");
  }
  validate_generator_set(base3);

  GeneratorSet out;
  out.kappa = kappa;
  out.states = states;
  std::set<Polynomial> seen;

  for (int v : t.internal_vertices()) {
    Tripartition tp = vertex_tripartition(t, v);
    const int d = static_cast<int>(tp.parts.size());

    std::vector<int> block_states;
    std::vector<detail::BlockDecoder> decoders;
    for (const auto& part : tp.parts) {
      auto dec = detail::make_decoder(part, taxa, states);
      block_states.push_back(dec.block_size());
      decoders.push_back(std::move(dec));
    }

    GeneratorSet star_base;
    if (base3.trivial()) {
      star_base = trivial_base_kappa2(d);
    } else if (d == 3) {
      star_base = base3;
    } else {
      throw Error("vertex of valency " + std::to_string(d) +
                  " needs a matching " + std::to_string(d) + "-leaf base set for kappa >= 3");
    }
    GeneratorSet local = star_generators(kappa, block_states, star_base,
                                         base3.trivial() ? StarMode::SkipTilde : StarMode::Symbolic,
                                         opts);
    out.total_count += local.total_count;

    // Rewrite block-composite variables as full-tuple variables.
    std::vector<int> full(taxa.size(), 0);
    auto remap = [&](const std::vector<int>& block_idx) {
      for (int k = 0; k < d; ++k) decoders[k].decode(block_idx[k], full);
      return full;
    };
    std::string vertex_tag = " vertex=" + std::to_string(v);
    for (std::size_t i = 0; i < local.polys.size(); ++i) {
      Polynomial p = local.polys[i].map_entry_indices(remap);
      if (p.is_zero()) continue;
      if (!seen.insert(p).second) continue;
      out.polys.push_back(std::move(p));
      out.sources.push_back(local.sources[i] + vertex_tag);
    }
  }
  return out;
}

struct ProbeConfig {
  int trials = 5;
  std::uint64_t seed = 0;
  int z_entry_range = 10;
  bool exact = true;
  // Float mode calls a value nonzero when it exceeds tol relative to the
  // magnitude of the evaluation (sum of absolute monomial contributions).
  double tol = 1e-9;
};

struct ProbeReport {
  int trials = 0;
  std::uint64_t seed = 0;
  int z_entry_range = 0;
  bool any_nonzero = false;
  // Schwartz-Zippel bound on the probability that every trial evaluates to
  // zero although the tensor lies outside the zero set. Conservative; 1 when
  // the entry range is too small for the degree to say anything.
  double false_accept_bound = 1.0;
  struct Witness {
    int trial;
    std::size_t poly;
    std::string value;
  };
  std::vector<Witness> witnesses;
  // Per-trial values of every base polynomial, in base order.
  std::vector<std::vector<std::string>> values;
};

// Evaluates every base polynomial at the contraction of p by random integer
// matrices Z_k, per trial. An exact nonzero is a certificate that p lies
// outside the zero set of the tilde construction; all-zero trials are
// probabilistic evidence of membership only.
inline ProbeReport probe_eval(const GeneratorSet& base, const Tensor<Rational>& p,
                              const ProbeConfig& cfg) {
  validate_generator_set(base);
  if (cfg.trials < 1) throw Error("probe needs at least one trial");
  const int n = p.order();
  if (static_cast<int>(base.states.size()) != n)
    throw Error("base set leaf count does not match tensor order");
  const int kappa = base.kappa;
  for (int s : base.states)
    if (s != kappa) throw Error("probe base set must have kappa states on every leaf");
  for (int k = 0; k < n; ++k)
    if (p.axis(k).size < kappa)
      throw Error("axis '" + p.axis(k).label + "' has fewer than kappa states");

  ProbeReport report;
  report.trials = cfg.trials;
  report.seed = cfg.seed;
  report.z_entry_range = cfg.z_entry_range;
  {
    // Each substituted entry has z-degree n, so a base polynomial of degree d
    // probes a z-polynomial of degree at most n*d.
    int max_deg = 0;
    for (const auto& f : base.polys) max_deg = std::max(max_deg, f.degree());
    const double support = 2.0 * cfg.z_entry_range + 1.0;
    const double per_trial = std::min(1.0, static_cast<double>(n) * max_deg / support);
    report.false_accept_bound = 1.0;
    for (int i = 0; i < cfg.trials; ++i) report.false_accept_bound *= per_trial;
  }
  Rng rng(cfg.seed);
  for (int trial = 0; trial < cfg.trials; ++trial) {
    Tensor<Rational> contracted = p;
    for (int k = 0; k < n; ++k) {
      Mat<Rational> z(p.axis(k).size, kappa);
      for (auto& v : z.data()) v = Rational(rng.uniform_int(-cfg.z_entry_range, cfg.z_entry_range));
      contracted = act(contracted, k, z);
    }
    report.values.emplace_back();
    for (std::size_t i = 0; i < base.polys.size(); ++i) {
      bool nonzero = false;
      std::string rendered;
      if (cfg.exact) {
        Rational value = evaluate(base.polys[i], contracted);
        nonzero = value != 0;
        rendered = rational_str(value);
      } else {
        Tensor<double> approx = convert<double>(contracted);
        double value = evaluate(base.polys[i], approx);
        double scale = evaluate_magnitude(base.polys[i], approx);
        nonzero = std::abs(value) > cfg.tol * std::max(1.0, scale);
        rendered = std::to_string(value);
      }
      report.values.back().push_back(rendered);
      if (nonzero) {
        report.any_nonzero = true;
        report.witnesses.push_back({trial, i, rendered});
      }
    }
  }
  return report;
}

}  // namespace phyloinv
