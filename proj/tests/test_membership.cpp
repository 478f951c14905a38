#include <doctest.h>

#include "phyloinv/membership.hpp"
#include "phyloinv/model.hpp"
#include "test_helpers.hpp"

using namespace phyloinv;
using test_support::random_binary_tree;
using test_support::star_model_point;
using test_support::strassen_commutation_quartics;

namespace {

const char* kFiveTaxon = "((a1,a2),a3,(a4,a5));";

Tensor<Rational> remark_tensor() {
  Tensor<Rational> p({{"a1", 3}, {"a2", 3}, {"a3", 4}});
  p.at({0, 0, 0}) = 1;
  p.at({1, 1, 1}) = 1;
  p.at({2, 2, 2}) = 1;
  p.at({0, 1, 3}) = 1;
  return p;
}

}  // namespace

TEST_CASE("edge_rank_test accepts model points and the zero tensor") {
  Tree t = parse_newick(kFiveTaxon);
  Rng rng(61);
  for (int trial = 0; trial < 5; ++trial) {
    auto joint = joint_inductive(t, sample_general_params(t, 2, rng.next_u64()));
    auto report = edge_rank_test(joint, t, 2);
    CHECK(report.verdict == Verdict::Accept);
    for (const auto& entry : report.edge_ranks) CHECK(entry.rank <= 2);
  }
  Tensor<Rational> zero({{"a1", 2}, {"a2", 2}, {"a3", 2}, {"a4", 2}, {"a5", 2}});
  auto report = edge_rank_test(zero, t, 2);
  CHECK(report.verdict == Verdict::Accept);
  for (const auto& entry : report.edge_ranks) CHECK(entry.rank == 0);
}

TEST_CASE("edge_rank_test rejects the remark tensor with a witness") {
  Tree star = parse_newick("(a1,a2,a3);");
  auto p = remark_tensor();
  auto report = edge_rank_test(p, star, 3);
  CHECK(report.verdict == Verdict::Reject);
  REQUIRE(!report.witnesses.empty());
  bool found = false;
  for (const auto& entry : report.edge_ranks)
    if (entry.split.str() == "a1,a2|a3") {
      CHECK(entry.rank == 4);
      found = true;
    }
  CHECK(found);

  // Every slice-deleted 3x3x3 subarray satisfies all bipartition rank bounds.
  for (int drop = 0; drop < 4; ++drop) {
    std::vector<int> keep;
    for (int k = 0; k < 4; ++k)
      if (k != drop) keep.push_back(k);
    auto sub = subarray(p, {{0, 1, 2}, {0, 1, 2}, keep});
    auto small = edge_rank_test(sub, star, 3);
    CHECK(small.verdict == Verdict::Accept);
  }
}

TEST_CASE("edge_rank_test validates axes") {
  Tree t = parse_newick("(a1,a2,a3);");
  Tensor<Rational> wrong({{"a1", 2}, {"b", 2}, {"a3", 2}});
  CHECK_THROWS_AS(edge_rank_test(wrong, t, 2), Error);
}

TEST_CASE("membership and edge_rank_test verdicts coincide for kappa 2") {
  Rng rng(62);
  int rejects = 0;
  for (int trial = 0; trial < 40; ++trial) {
    Tree t = random_binary_tree(rng.uniform_int(4, 5), rng, "a");
    std::vector<Axis> axes;
    for (const auto& taxon : t.taxa_order()) axes.push_back({taxon, 2});
    Tensor<Rational> p(axes);
    if (trial % 2 == 0)
      p = joint_inductive(t, sample_general_params(t, 2, rng.next_u64()));
    else
      p = test_support::random_rational_tensor(axes, rng);

    auto by_rank = edge_rank_test(p, t, 2);
    auto by_gens = membership(p, t, 2, trivial_base_kappa2());
    CHECK(by_rank.verdict == by_gens.verdict);
    if (by_gens.verdict == Verdict::Reject) {
      ++rejects;
      CHECK(!by_gens.witnesses.empty());
    } else {
      CHECK(by_gens.verdict == Verdict::Accept);  // exact, never probabilistic
    }
  }
  CHECK(rejects > 5);  // the mixed sample really exercises both verdicts
}

TEST_CASE("membership with the imported quartics on the 3-taxon tree") {
  Tree star = parse_newick("(a1,a2,a3);");
  auto base = strassen_commutation_quartics();
  Rng rng(63);

  // Base polynomials vanish exactly on hidden naive Bayes points.
  for (int trial = 0; trial < 10; ++trial) {
    auto p = star_model_point({{"a1", 3}, {"a2", 3}, {"a3", 3}}, 3, rng);
    for (const auto& f : base.polys) CHECK(evaluate(f, p) == 0);
    auto report = membership(p, star, 3, base);
    CHECK(report.verdict == Verdict::Accept);
  }

  // Random tensors are flagged by some quartic.
  int rejected = 0;
  for (int trial = 0; trial < 10; ++trial) {
    auto p = test_support::random_rational_tensor({{"a1", 3}, {"a2", 3}, {"a3", 3}}, rng);
    auto report = membership(p, star, 3, base);
    if (report.verdict == Verdict::Reject) ++rejected;
  }
  CHECK(rejected >= 9);

  CHECK_THROWS_WITH_AS(membership(remark_tensor(), star, 4, trivial_base_kappa2()),
                       doctest::Contains("kappa >= 4"), Error);
}

TEST_CASE("membership probe mode on wide star models") {
  Tree star = parse_newick("(a1,a2,a3);");
  auto base = strassen_commutation_quartics();
  Rng rng(64);
  MembershipOptions opts;
  opts.probe_mode = true;
  opts.probe.trials = 4;
  opts.probe.seed = 5;

  // A genuine (3,3,9) hidden naive Bayes point: edge ranks pass and probes
  // stay zero, so the verdict is probabilistic-accept, never accept.
  auto p = star_model_point({{"a1", 3}, {"a2", 3}, {"a3", 9}}, 3, rng);
  auto report = membership(p, star, 3, base, opts);
  CHECK(report.verdict == Verdict::ProbabilisticAccept);
  REQUIRE(report.probe.has_value());
  CHECK(report.probe->vertices_probed == 1);

  // A rank violation in the 9x9 flattening rejects exactly.
  auto bad = test_support::random_rational_tensor({{"a1", 3}, {"a2", 3}, {"a3", 9}}, rng);
  while (true) {
    auto flat = flatten(bad, FlatteningSpec{{{"a1", "a2"}, {"a3"}}});
    if (rank_exact(flat) > 3) break;
    bad = test_support::random_rational_tensor(bad.axes(), rng);
  }
  auto rejected = membership(bad, star, 3, base, opts);
  CHECK(rejected.verdict == Verdict::Reject);

  // The remark tensor in probe mode: the edge check already rejects, and the
  // probe report is still attached.
  auto remark_report = membership(remark_tensor(), star, 3, base, opts);
  CHECK(remark_report.verdict == Verdict::Reject);
  CHECK(remark_report.probe.has_value());
}

TEST_CASE("probe pipeline accepts kappa-3 model points on a real tree") {
  // The full vertex-flattening route: a 3-state cone point on a quartet has
  // (3,3,9)-shaped flattenings at both internal vertices; contracting them
  // with random matrices lands in the 3x3x3 variety, so every imported
  // quartic evaluates to exactly zero, trial after trial.
  Tree t = parse_newick("((a1,a2),(a3,a4));");
  auto base = strassen_commutation_quartics();
  Rng rng(70);
  MembershipOptions opts;
  opts.probe_mode = true;
  opts.probe.trials = 3;
  for (int trial = 0; trial < 3; ++trial) {
    auto joint = joint_inductive(t, sample_general_params(t, 3, rng.next_u64()));
    opts.probe.seed = rng.next_u64();
    auto report = membership(joint, t, 3, base, opts);
    CHECK(report.verdict == Verdict::ProbabilisticAccept);
    REQUIRE(report.probe.has_value());
    CHECK(report.probe->vertices_probed == 2);
    CHECK(report.probe->false_accept_bound < 1.0);
    for (const auto& entry : report.edge_ranks) CHECK(entry.rank <= 3);
  }
}

TEST_CASE("float-mode probe evaluation respects the tolerance") {
  auto base = strassen_commutation_quartics();
  Rng rng(72);
  auto p = test_support::star_model_point({{"a1", 3}, {"a2", 3}, {"a3", 3}}, 3, rng);
  ProbeConfig cfg;
  cfg.trials = 3;
  cfg.seed = 4;
  cfg.exact = false;
  cfg.tol = 1e-6;
  auto report = probe_eval(base, p, cfg);
  CHECK(!report.any_nonzero);  // model point: zero up to rounding

  auto generic = test_support::random_nonzero_rational_tensor({{"a1", 3}, {"a2", 3}, {"a3", 3}}, rng);
  while (!probe_eval(base, generic, ProbeConfig{1, 9, 10, true, 0}).any_nonzero)
    generic = test_support::random_nonzero_rational_tensor(generic.axes(), rng);
  auto flagged = probe_eval(base, generic, cfg);
  CHECK(flagged.any_nonzero);
}

TEST_CASE("probe mode with the trivial base decides exactly for kappa 2") {
  Tree t = parse_newick("((a1,a2),(a3,a4));");
  auto joint = joint_inductive(t, sample_general_params(t, 2, 9));
  MembershipOptions opts;
  opts.probe_mode = true;
  auto report = membership(joint, t, 2, trivial_base_kappa2(), opts);
  CHECK(report.verdict == Verdict::Accept);  // no probes ran; ranks decide
}

TEST_CASE("membership on multifurcating trees works and is flagged") {
  Tree star = parse_newick("(a1,a2,a3,a4);");
  auto joint = joint_inductive(star, sample_general_params(star, 2, 41));
  auto report = membership(joint, star, 2, trivial_base_kappa2());
  CHECK(report.verdict == Verdict::Accept);
  REQUIRE(!report.notes.empty());
  CHECK(report.notes[0].find("set-theoretic") != std::string::npos);

  // The 4-block star construction contributes non-edge bipartition minors
  // ({a1,a2}|{a3,a4} and friends), which genuine model points satisfy.
  auto gens = tree_generators(star, 2, trivial_base_kappa2());
  CHECK(gens.polys.size() == 48);
  for (const auto& g : gens.polys) CHECK(evaluate(g, joint) == 0);

  Rng rng(42);
  auto generic = test_support::random_rational_tensor(joint.axes(), rng);
  auto rejected = membership(generic, star, 2, trivial_base_kappa2());
  CHECK(rejected.verdict == Verdict::Reject);
}

TEST_CASE("decompose_edge on a rank-1 tensor") {
  Tree t = parse_newick("((a1,a2),(a3,a4));");
  Rng rng(65);
  // Outer product of four vectors: every flattening has rank 1.
  std::vector<std::vector<Rational>> vecs;
  for (int k = 0; k < 4; ++k) {
    std::vector<Rational> v(2);
    for (auto& x : v) x = Rational(rng.uniform_int(1, 9));
    vecs.push_back(v);
  }
  Tensor<Rational> p({{"a1", 2}, {"a2", 2}, {"a3", 2}, {"a4", 2}});
  std::vector<int> idx(4, 0);
  do {
    Rational prod = 1;
    for (int k = 0; k < 4; ++k) prod *= vecs[k][idx[k]];
    p.at(idx) = prod;
  } while (p.next_index(idx));

  Edge internal{-1, -1};
  for (const Edge& e : t.edges())
    if (!t.is_leaf(e.first) && !t.is_leaf(e.second)) internal = e;
  auto dec = decompose_edge(p, t, internal, 2);
  CHECK(dec.inner_rank == 1);
  auto back = star(dec.left, dec.right, dec.left.axis_of(dec.fresh_label),
                   dec.right.axis_of(dec.fresh_label));
  CHECK(aligned_equal(p, back));
}

TEST_CASE("decompose_edge reproduces model points and factors pass subtree tests") {
  Tree t = parse_newick(kFiveTaxon);
  Rng rng(66);
  for (int trial = 0; trial < 5; ++trial) {
    auto p = joint_inductive(t, sample_general_params(t, 2, rng.next_u64()));
    for (const Edge& e : t.edges()) {
      if (t.is_leaf(e.first) || t.is_leaf(e.second)) continue;
      auto dec = decompose_edge(p, t, e, 2);
      CHECK(dec.inner_rank <= 2);
      auto back = star(dec.left, dec.right, dec.left.axis_of(dec.fresh_label),
                       dec.right.axis_of(dec.fresh_label));
      CHECK(aligned_equal(p, back));
      CHECK(edge_rank_test(dec.left, dec.side_a_tree, 2).verdict == Verdict::Accept);
      CHECK(edge_rank_test(dec.right, dec.side_b_tree, 2).verdict == Verdict::Accept);
    }
  }
}

TEST_CASE("decompose_edge rejects rank violations with the rank value") {
  Tree t = parse_newick("((a1,a2),(a3,a4));");
  Rng rng(67);
  Edge internal{-1, -1};
  for (const Edge& e : t.edges())
    if (!t.is_leaf(e.first) && !t.is_leaf(e.second)) internal = e;
  while (true) {
    auto p = test_support::random_rational_tensor({{"a1", 2}, {"a2", 2}, {"a3", 2}, {"a4", 2}}, rng);
    if (rank_exact(flatten(p, FlatteningSpec{{{"a1", "a2"}, {"a3", "a4"}}})) <= 2) continue;
    try {
      decompose_edge(p, t, internal, 2);
      CHECK(false);
    } catch (const RankExceeded& e) {
      CHECK(e.rank() > 2);
    }
    break;
  }
}

TEST_CASE("decompose_full recomposes model points exactly") {
  Rng rng(68);
  for (int n = 4; n <= 6; ++n) {
    Tree t = random_binary_tree(n, rng, "a");
    auto p = joint_inductive(t, sample_general_params(t, 2, rng.next_u64()));
    auto fact = decompose_full(p, t, 2);
    CHECK(fact.steps.size() == static_cast<std::size_t>(n - 3));
    CHECK(recompose(fact) == p);
    for (const auto& step : fact.steps) {
      CHECK(step.factor.order() == 3);
      CHECK(step.inner_rank <= 2);
    }
  }
}

TEST_CASE("decompose_full on the diagonal tensor") {
  Tree t = parse_newick(kFiveTaxon);
  ModelParams params;
  params.root = t.leaf_vertex("a1");
  params.pi = {Rational(1, 2), Rational(1, 2)};
  for (const Edge& e : t.edges()) params.matrices[e] = Mat<Rational>::identity(2);
  auto p = joint_inductive(t, params);
  auto fact = decompose_full(p, t, 2);
  for (const auto& step : fact.steps) CHECK(step.inner_rank == 2);
  CHECK(recompose(fact) == p);
}

TEST_CASE("decompose_full handles the zero tensor") {
  Tree t = parse_newick(kFiveTaxon);
  Tensor<Rational> zero({{"a1", 2}, {"a2", 2}, {"a3", 2}, {"a4", 2}, {"a5", 2}});
  auto fact = decompose_full(zero, t, 2);
  for (const auto& step : fact.steps) CHECK(step.inner_rank == 0);
  CHECK(recompose(fact) == zero);
}

TEST_CASE("decompose_full rejects generic tensors at the first rank check") {
  Tree t = parse_newick(kFiveTaxon);
  Rng rng(69);
  auto p = test_support::random_rational_tensor(
      {{"a1", 2}, {"a2", 2}, {"a3", 2}, {"a4", 2}, {"a5", 2}}, rng);
  // Generic tensors violate the internal edge ranks.
  CHECK_THROWS_AS(decompose_full(p, t, 2), RankExceeded);
  Tree star = parse_newick("(a1,a2,a3,a4);");
  Tensor<Rational> q({{"a1", 2}, {"a2", 2}, {"a3", 2}, {"a4", 2}});
  CHECK_THROWS_WITH_AS(decompose_full(q, star, 2), doctest::Contains("binary"), Error);
}

TEST_CASE("split support on an exact quartet tensor") {
  Tree t = parse_newick("((a1,a2),(a3,a4));");
  auto p = joint_inductive(t, sample_stochastic_params(t, 2, 71));
  std::vector<Split> candidates{
      Split{{"a1", "a2"}, {"a3", "a4"}},
      Split{{"a1", "a3"}, {"a2", "a4"}},
      Split{{"a1", "a4"}, {"a2", "a3"}},
  };
  auto scores = split_support(p, candidates, 2);
  REQUIRE(scores.size() == 3);
  CHECK(scores[0].split.str() == "a1,a2|a3,a4");
  CHECK(scores[0].score == 0);
  CHECK(scores[0].exact_rank <= 2);
  CHECK(scores[1].score > 0);
  CHECK(scores[2].score > 0);

  // The raw-minor scoring flag agrees on the ranking.
  SplitSupportOptions opts;
  opts.minor_score = true;
  auto minor_scores = split_support(p, candidates, 2, opts);
  CHECK(minor_scores[0].split.str() == "a1,a2|a3,a4");
}

TEST_CASE("fully symmetric tensors score all quartet splits equally") {
  Tensor<Rational> p({{"a1", 2}, {"a2", 2}, {"a3", 2}, {"a4", 2}});
  std::vector<int> idx(4, 0);
  do {
    int ones = idx[0] + idx[1] + idx[2] + idx[3];
    p.at(idx) = Rational(1 + ones * ones);
  } while (p.next_index(idx));
  std::vector<Split> candidates{
      Split{{"a1", "a2"}, {"a3", "a4"}},
      Split{{"a1", "a3"}, {"a2", "a4"}},
      Split{{"a1", "a4"}, {"a2", "a3"}},
  };
  auto scores = split_support(p, candidates, 1);
  CHECK(std::abs(scores[0].score - scores[2].score) < 1e-12);
}

TEST_CASE("split support on simulated quartet data ranks the true split first") {
  Tree t = parse_newick("((a1,a2),(a3,a4));");
  // Moderately mixing channels: 0.7 I + 0.3 random stochastic, exactly.
  auto base = sample_stochastic_params(t, 2, 73);
  ModelParams params = base;
  for (auto& [e, m] : params.matrices) {
    Mat<Rational> mixed(2, 2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        mixed(i, j) = Rational(7, 10) * (i == j ? 1 : 0) + Rational(3, 10) * m(i, j);
    m = mixed;
  }
  auto counts = simulate_sequences(t, params, 10000, 75);
  Tensor<Rational> rational_counts(counts.axes());
  for (std::size_t i = 0; i < counts.size(); ++i)
    rational_counts.data()[i] = Rational(counts.data()[i]);
  std::vector<Split> candidates{
      Split{{"a1", "a2"}, {"a3", "a4"}},
      Split{{"a1", "a3"}, {"a2", "a4"}},
      Split{{"a1", "a4"}, {"a2", "a3"}},
  };
  auto scores = split_support(rational_counts, candidates, 2);
  CHECK(scores[0].split.str() == "a1,a2|a3,a4");
  CHECK(scores[0].score < scores[1].score);
}

TEST_CASE("split support input validation") {
  Tensor<Rational> zero({{"a1", 2}, {"a2", 2}});
  std::vector<Split> candidates{Split{{"a1"}, {"a2"}}};
  CHECK_THROWS_WITH_AS(split_support(zero, candidates, 1), doctest::Contains("empty"), Error);
  Tensor<Rational> neg({{"a1", 2}, {"a2", 2}});
  neg.at({0, 0}) = -1;
  CHECK_THROWS_AS(split_support(neg, candidates, 1), Error);
  Tensor<Rational> ok({{"a1", 2}, {"a2", 2}});
  ok.at({0, 0}) = 1;
  CHECK_THROWS_AS(split_support(ok, {}, 1), Error);
}
