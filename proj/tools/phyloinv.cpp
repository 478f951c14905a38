// Command-line surface for the library: simulation, joint distributions,
// flattenings, invariant generation and evaluation, membership tests,
// decompositions, and split support scoring.
//
// Exit codes: 0 success or accept, 1 semantic reject, 2 usage or validation
// error. All randomized commands record their seed in the output header; in
// exact mode reruns are byte-identical.

#include <CLI11.hpp>

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "phyloinv/common.hpp"
#include "phyloinv/invariants.hpp"
#include "phyloinv/io.hpp"
#include "phyloinv/membership.hpp"
#include "phyloinv/model.hpp"
#include "phyloinv/poly.hpp"
#include "phyloinv/tensor.hpp"
#include "phyloinv/tree.hpp"

namespace {

using namespace phyloinv;

// Semantic negative (reject verdict, rank violation); maps to exit code 1.
struct Reject {
  std::string message;
};

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty())
    std::cout << content;
  else
    spill_file(out_path, content);
}

Tree load_tree(const std::string& path) { return parse_newick(slurp_file(path)); }

Tensor<Rational> load_tensor(const std::string& path) {
  std::istringstream in(slurp_file(path));
  return read_tensor_rational(in);
}

Split parse_split_arg(const std::string& text) {
  std::size_t bar = text.find('|');
  if (bar == std::string::npos) throw Error("split '" + text + "' needs the form a,b|c,d");
  auto side = [](const std::string& s) {
    std::vector<std::string> out;
    std::istringstream iss(s);
    std::string tok;
    while (std::getline(iss, tok, ',')) {
      if (!tok.empty()) out.push_back(tok);
    }
    if (out.empty()) throw Error("empty split side");
    return out;
  };
  return Split{side(text.substr(0, bar)), side(text.substr(bar + 1))};
}

FlatteningSpec parse_flatten_arg(const std::string& text) {
  FlatteningSpec spec;
  std::istringstream blocks(text);
  std::string block;
  while (std::getline(blocks, block, '|')) {
    std::vector<std::string> members;
    std::istringstream iss(block);
    std::string tok;
    while (std::getline(iss, tok, ',')) {
      if (!tok.empty()) members.push_back(tok);
    }
    if (!members.empty()) spec.blocks.push_back(std::move(members));
  }
  if (spec.blocks.empty()) throw Error("flattening spec is empty");
  return spec;
}

GeneratorSet load_base3(const std::string& path, int kappa) {
  if (path.empty()) {
    if (kappa == 2) return trivial_base_kappa2();
    if (kappa >= 4)
      throw Error("no base generator set is known for kappa >= 4; supply one with --base3");
    throw Error("kappa = 3 needs --base3 with the imported 27 quartics");
  }
  std::istringstream in(slurp_file(path));
  GeneratorSet base = read_generator_set(in);
  if (base.kappa != kappa) throw Error("--base3 file has kappa " + std::to_string(base.kappa));
  return base;
}

int run(int argc, char** argv) {
  CLI::App app{"phylogenetic invariants for the general Markov model"};
  app.require_subcommand(1);

  std::string tree_path, params_path, tensor_path, gens_path, base3_path, fact_path, out_path;
  std::string method = "inductive", mode = "exact", inv_mode = "edge", sample_mode = "stochastic";
  int kappa = 2;
  std::uint64_t seed = 0;
  std::int64_t sites = 1000;
  int trials = 5, threads = 1, z_range = 10;
  double tol = 1e-9;
  bool general = false, minor_score = false;
  std::string split_arg;
  std::vector<std::string> split_args;
  std::size_t cap = 0;
  std::vector<std::string> states_arg;

  auto add_out = [&](CLI::App* cmd) { cmd->add_option("--out", out_path, "output file (default stdout)"); };
  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "random seed")->envname("PHYLOINV_SEED");
  };

  // joint ------------------------------------------------------------
  auto* joint_cmd = app.add_subcommand("joint", "joint leaf distribution of a parameterized tree");
  joint_cmd->add_option("--tree", tree_path, "newick file")->required();
  joint_cmd->add_option("--params", params_path, "params file")->required();
  joint_cmd->add_option("--method", method, "inductive|history")
      ->check(CLI::IsMember({"inductive", "history"}));
  joint_cmd->add_flag("--general", general, "params file has no pi line (cone parameters)");
  add_out(joint_cmd);
  joint_cmd->callback([&] {
    Tree t = load_tree(tree_path);
    std::string content = slurp_file(params_path);
    Tensor<Rational> joint({{"_", 1}});
    if (general) {
      std::istringstream in(content);
      GeneralParams p = read_general_params(in, t, sniff_params_kappa(content));
      joint = method == "history" ? joint_history(t, p) : joint_inductive(t, p);
    } else {
      std::istringstream in(content);
      ModelParams p = read_model_params(in, t);
      joint = method == "history" ? joint_history(t, p) : joint_inductive(t, p);
    }
    std::ostringstream out;
    write_tensor(out, joint, {std::string("joint ") + (general ? "general" : "stochastic")});
    emit(out_path, out.str());
  });

  // sample-params ------------------------------------------------------
  auto* sample_cmd = app.add_subcommand("sample-params", "deterministic random parameter sets");
  sample_cmd->add_option("--tree", tree_path, "newick file")->required();
  sample_cmd->add_option("--kappa", kappa, "state count")->required();
  sample_cmd->add_option("--mode", sample_mode, "stochastic|general")
      ->check(CLI::IsMember({"stochastic", "general"}));
  add_seed(sample_cmd);
  add_out(sample_cmd);
  sample_cmd->callback([&] {
    Tree t = load_tree(tree_path);
    std::ostringstream out;
    std::vector<std::string> header{"sampled mode=" + sample_mode + " kappa=" + std::to_string(kappa) +
                                    " seed=" + std::to_string(seed)};
    if (sample_mode == "stochastic")
      write_params(out, t, sample_stochastic_params(t, kappa, seed), header);
    else
      write_params(out, t, sample_general_params(t, kappa, seed), header);
    emit(out_path, out.str());
  });

  // simulate -----------------------------------------------------------
  auto* sim_cmd = app.add_subcommand("simulate", "i.i.d. site simulation, pattern counts");
  sim_cmd->add_option("--tree", tree_path, "newick file")->required();
  sim_cmd->add_option("--params", params_path, "stochastic params file")->required();
  sim_cmd->add_option("--sites", sites, "site count")->required();
  sim_cmd->add_option("--threads", threads, "worker threads")->envname("PHYLOINV_THREADS");
  add_seed(sim_cmd);
  add_out(sim_cmd);
  sim_cmd->callback([&] {
    Tree t = load_tree(tree_path);
    std::istringstream in(slurp_file(params_path));
    ModelParams p = read_model_params(in, t);
    auto counts = simulate_sequences(t, p, sites, seed, threads);
    std::ostringstream out;
    write_tensor(out, counts,
                 {"simulated sites=" + std::to_string(sites) + " seed=" + std::to_string(seed)});
    emit(out_path, out.str());
  });

  // flatten -------------------------------------------------------------
  auto* flat_cmd = app.add_subcommand("flatten", "flatten a tensor by a taxon partition");
  flat_cmd->add_option("--tensor", tensor_path, "tensor file")->required();
  flat_cmd->add_option("--split", split_arg, "blocks, e.g. a1,a2|a3,a4,a5")->required();
  flat_cmd->add_option("--mode", mode, "exact|float")->check(CLI::IsMember({"exact", "float"}))
      ->envname("PHYLOINV_MODE");
  add_out(flat_cmd);
  flat_cmd->callback([&] {
    FlatteningSpec spec = parse_flatten_arg(split_arg);
    std::ostringstream out;
    if (mode == "float") {
      std::istringstream in(slurp_file(tensor_path));
      write_tensor(out, flatten(read_tensor_double(in), spec), {"flattened " + split_arg});
    } else {
      write_tensor(out, flatten(load_tensor(tensor_path), spec), {"flattened " + split_arg});
    }
    emit(out_path, out.str());
  });

  // invariants ------------------------------------------------------------
  auto* inv_cmd = app.add_subcommand("invariants", "generate invariant sets");
  inv_cmd->add_option("--tree", tree_path, "newick file")->required();
  inv_cmd->add_option("--kappa", kappa, "state count")->required();
  inv_cmd->add_option("--states", states_arg, "per-taxon state counts (default kappa each)");
  inv_cmd->add_option("--base3", base3_path, "imported 3-leaf base generator set");
  inv_cmd->add_option("--mode", inv_mode, "edge|tree")->check(CLI::IsMember({"edge", "tree"}));
  inv_cmd->add_option("--cap", cap, "materialize at most this many generators");
  add_out(inv_cmd);
  inv_cmd->callback([&] {
    Tree t = load_tree(tree_path);
    std::vector<int> states;
    for (const auto& s : states_arg) states.push_back(std::stoi(s));
    GeneratorOptions opts;
    if (cap > 0) opts.cap = cap;
    GeneratorSet gens;
    if (inv_mode == "edge") {
      gens = edge_invariants(t, kappa, states, opts);
    } else {
      gens = tree_generators(t, kappa, load_base3(base3_path, kappa), states, opts);
    }
    std::ostringstream out;
    write_generator_set(out, gens,
                        {"mode=" + inv_mode + " kappa=" + std::to_string(kappa),
                         "count=" + std::to_string(gens.total_count) +
                             " materialized=" + std::to_string(gens.polys.size())});
    emit(out_path, out.str());
    std::cerr << "generators: " << gens.total_count << " (materialized " << gens.polys.size()
              << ")\n";
    if (gens.polys.empty())
      std::cerr << "note: no invariants at this kappa/states (every flattening is too small)\n";
  });

  // eval ---------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a generator set on a tensor");
  eval_cmd->add_option("--gens", gens_path, "generator set file")->required();
  eval_cmd->add_option("--tensor", tensor_path, "tensor file")->required();
  eval_cmd->add_option("--mode", mode, "exact|float")->check(CLI::IsMember({"exact", "float"}))
      ->envname("PHYLOINV_MODE");
  eval_cmd->add_option("--tol", tol, "float-mode zero tolerance, relative to evaluation magnitude")
      ->envname("PHYLOINV_TOL");
  add_out(eval_cmd);
  eval_cmd->callback([&] {
    std::istringstream gin(slurp_file(gens_path));
    GeneratorSet gens = read_generator_set(gin);
    std::ostringstream out;
    std::size_t nonzero = 0;
    if (mode == "float") {
      std::istringstream tin(slurp_file(tensor_path));
      auto p = read_tensor_double(tin);
      for (std::size_t i = 0; i < gens.polys.size(); ++i) {
        double v = evaluate(gens.polys[i], p);
        if (std::abs(v) > tol * std::max(1.0, evaluate_magnitude(gens.polys[i], p))) ++nonzero;
        out << "generator " << i << ": " << io_detail::render_double(v) << "\n";
      }
    } else {
      auto p = load_tensor(tensor_path);
      for (std::size_t i = 0; i < gens.polys.size(); ++i) {
        Rational v = evaluate(gens.polys[i], p);
        if (v != 0) ++nonzero;
        out << "generator " << i << ": " << rational_str(v) << "\n";
      }
    }
    out << "nonzero: " << nonzero << " of " << gens.polys.size() << "\n";
    emit(out_path, out.str());
  });

  // membership -----------------------------------------------------------
  auto* mem_cmd = app.add_subcommand("membership", "zero-set membership test");
  mem_cmd->add_option("--tensor", tensor_path, "tensor file")->required();
  mem_cmd->add_option("--tree", tree_path, "newick file")->required();
  mem_cmd->add_option("--kappa", kappa, "state count")->required();
  mem_cmd->add_option("--base3", base3_path, "imported 3-leaf base generator set");
  mem_cmd->add_option("--mode", mode, "exact|probe")->check(CLI::IsMember({"exact", "probe"}));
  mem_cmd->add_option("--trials", trials, "probe trials")->envname("PHYLOINV_TRIALS");
  mem_cmd->add_option("--z-range", z_range, "probe matrix entry range");
  add_seed(mem_cmd);
  add_out(mem_cmd);
  mem_cmd->callback([&] {
    Tree t = load_tree(tree_path);
    auto p = load_tensor(tensor_path);
    MembershipOptions opts;
    opts.probe_mode = mode == "probe";
    opts.probe.trials = trials;
    opts.probe.seed = seed;
    opts.probe.z_entry_range = z_range;
    MembershipReport report = membership(p, t, kappa, load_base3(base3_path, kappa), opts);
    std::ostringstream out;
    write_report(out, report,
                 {"membership kappa=" + std::to_string(kappa) + " mode=" + mode +
                  (opts.probe_mode ? " seed=" + std::to_string(seed) : "")});
    emit(out_path, out.str());
    if (report.verdict == Verdict::Reject) throw Reject{"tensor rejected (witnesses in report)"};
  });

  // decompose ------------------------------------------------------------
  auto* dec_cmd = app.add_subcommand("decompose", "cherry-wise tensor factorization");
  dec_cmd->add_option("--tensor", tensor_path, "tensor file")->required();
  dec_cmd->add_option("--tree", tree_path, "newick file")->required();
  dec_cmd->add_option("--kappa", kappa, "rank bound");
  add_out(dec_cmd);
  dec_cmd->callback([&] {
    Tree t = load_tree(tree_path);
    auto p = load_tensor(tensor_path);
    Factorization f = decompose_full(p, t, kappa);
    std::ostringstream out;
    write_factorization(out, f, {"decomposition kappa=" + std::to_string(kappa)});
    emit(out_path, out.str());
  });

  // recompose ------------------------------------------------------------
  auto* rec_cmd = app.add_subcommand("recompose", "rebuild a tensor from a factorization");
  rec_cmd->add_option("--factorization", fact_path, "factorization file")->required();
  add_out(rec_cmd);
  rec_cmd->callback([&] {
    std::istringstream in(slurp_file(fact_path));
    Factorization f = read_factorization(in);
    std::ostringstream out;
    write_tensor(out, recompose(f), {"recomposed"});
    emit(out_path, out.str());
  });

  // split-support ----------------------------------------------------------
  auto* split_cmd = app.add_subcommand("split-support", "rank candidate splits on count data");
  split_cmd->add_option("--tensor", tensor_path, "counts tensor file")->required();
  split_cmd->add_option("--kappa", kappa, "state count")->required();
  split_cmd->add_option("--split", split_args, "candidate split, e.g. a1,a2|a3,a4 (repeatable)");
  split_cmd->add_flag("--minor-score", minor_score, "score by largest |minor| instead");
  split_cmd->add_option("--mode", mode, "exact|float")->check(CLI::IsMember({"exact", "float"}))
      ->envname("PHYLOINV_MODE");
  add_out(split_cmd);
  split_cmd->callback([&] {
    auto counts = load_tensor(tensor_path);
    std::vector<Split> candidates;
    for (const auto& s : split_args) candidates.push_back(parse_split_arg(s));
    if (candidates.empty() && counts.order() == 4) {
      // Default quartet candidates: the three balanced splits.
      const auto& ax = counts.axes();
      for (int partner = 1; partner < 4; ++partner) {
        std::vector<std::string> a{ax[0].label, ax[partner].label}, b;
        for (int k = 1; k < 4; ++k)
          if (k != partner) b.push_back(ax[k].label);
        candidates.push_back(Split{a, b});
      }
    }
    SplitSupportOptions opts;
    opts.exact = mode == "exact";
    opts.minor_score = minor_score;
    auto scores = split_support(counts, candidates, kappa, opts);
    std::ostringstream out;
    out << "# split support kappa=" << kappa << " mode=" << mode << "\n";
    for (const auto& s : scores) {
      out << io_detail::render_double(s.score);
      if (s.exact_rank >= 0) out << " rank=" << s.exact_rank;
      out << " " << s.split.str() << "\n";
    }
    emit(out_path, out.str());
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Reject& r) {
    std::cerr << "reject: " << r.message << "\n";
    return 1;
  } catch (const phyloinv::RankExceeded& e) {
    std::cerr << "reject: " << e.what() << "\n";
    return 1;
  } catch (const phyloinv::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
