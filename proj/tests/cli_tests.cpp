// Drives the installed CLI binary (path in PHYLOINV_BIN) through temp files:
// exit-code contract, determinism, and the end-to-end workflows.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "phyloinv/io.hpp"
#include "phyloinv/model.hpp"
#include "test_helpers.hpp"

using namespace phyloinv;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

const fs::path& work_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "phyloinv_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string path_of(const std::string& name) { return (work_dir() / name).string(); }

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliResult run_cli(const std::string& args) {
  const char* bin = std::getenv("PHYLOINV_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "PHYLOINV_BIN must point at the CLI binary");
  std::string out_file = path_of("stdout.txt"), err_file = path_of("stderr.txt");
  std::string cmd = std::string(bin) + " " + args + " >" + out_file + " 2>" + err_file;
  int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

void write_file(const std::string& name, const std::string& content) {
  std::ofstream out(path_of(name));
  out << content;
}

// Strips '#' comment lines so outputs can be compared up to headers.
std::string without_comments(const std::string& text) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line))
    if (line.empty() || line[0] != '#') out << line << "\n";
  return out.str();
}

}  // namespace

TEST_CASE("joint: both methods produce byte-identical tensors") {
  write_file("fig1.nwk", "((a1,a2),a3,(a4,a5));\n");
  auto sample = run_cli("sample-params --tree " + path_of("fig1.nwk") +
                        " --kappa 2 --seed 4 --out " + path_of("p.par"));
  REQUIRE(sample.exit_code == 0);
  auto a = run_cli("joint --tree " + path_of("fig1.nwk") + " --params " + path_of("p.par") +
                   " --method inductive --out " + path_of("j_ind.tsr"));
  auto b = run_cli("joint --tree " + path_of("fig1.nwk") + " --params " + path_of("p.par") +
                   " --method history --out " + path_of("j_his.tsr"));
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  CHECK(slurp(path_of("j_ind.tsr")) == slurp(path_of("j_his.tsr")));

  // Reruns are byte-identical.
  auto again = run_cli("joint --tree " + path_of("fig1.nwk") + " --params " + path_of("p.par") +
                       " --out " + path_of("j_again.tsr"));
  REQUIRE(again.exit_code == 0);
  CHECK(slurp(path_of("j_again.tsr")) == slurp(path_of("j_ind.tsr")));
}

TEST_CASE("malformed inputs exit 2 with a line-numbered message") {
  write_file("fig1.nwk", "((a1,a2),a3,(a4,a5));\n");
  write_file("bad.par", "root: 0\npi: 1/2 1/2\nedge 0-1:\n1/2 1/2\nbroken\n");
  auto r = run_cli("joint --tree " + path_of("fig1.nwk") + " --params " + path_of("bad.par"));
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("line") != std::string::npos);

  auto usage = run_cli("joint --params " + path_of("bad.par"));
  CHECK(usage.exit_code == 2);  // missing required --tree
}

TEST_CASE("invariants: counts, empty-set note, and missing-base guard") {
  write_file("fig1.nwk", "((a1,a2),a3,(a4,a5));\n");
  auto r = run_cli("invariants --tree " + path_of("fig1.nwk") + " --kappa 2 --out " +
                   path_of("gens.txt"));
  REQUIRE(r.exit_code == 0);
  CHECK(r.err.find("448") != std::string::npos);
  std::istringstream in(slurp(path_of("gens.txt")));
  auto gens = read_generator_set(in);
  CHECK(gens.polys.size() == 448);

  write_file("star3.nwk", "(a1,a2,a3);\n");
  auto empty = run_cli("invariants --tree " + path_of("star3.nwk") + " --kappa 2 --out " +
                       path_of("none.txt"));
  CHECK(empty.exit_code == 0);
  CHECK(empty.err.find("note") != std::string::npos);

  auto guarded = run_cli("invariants --tree " + path_of("fig1.nwk") +
                         " --kappa 4 --mode tree --out " + path_of("g4.txt"));
  CHECK(guarded.exit_code == 2);
  CHECK(guarded.err.find("base") != std::string::npos);

  // Tree-wide mode deduplicates by canonical form: the 448 edge minors
  // contain 32 cross-edge coincidences (a 4x8 minor whose columns share one
  // a3 index equals an 8x4 minor), leaving 416 distinct polynomials.
  auto tree_mode = run_cli("invariants --tree " + path_of("fig1.nwk") +
                           " --kappa 2 --mode tree --out " + path_of("tg.txt"));
  REQUIRE(tree_mode.exit_code == 0);
  std::istringstream tin(slurp(path_of("tg.txt")));
  CHECK(read_generator_set(tin).polys.size() == 416);
}

TEST_CASE("membership: accept exits 0, reject exits 1 with witnesses") {
  write_file("fig1.nwk", "((a1,a2),a3,(a4,a5));\n");
  run_cli("sample-params --tree " + path_of("fig1.nwk") + " --kappa 2 --seed 9 --out " +
          path_of("p.par"));
  run_cli("joint --tree " + path_of("fig1.nwk") + " --params " + path_of("p.par") + " --out " +
          path_of("model.tsr"));
  auto accept = run_cli("membership --tensor " + path_of("model.tsr") + " --tree " +
                        path_of("fig1.nwk") + " --kappa 2 --out " + path_of("rep.txt"));
  CHECK(accept.exit_code == 0);
  CHECK(slurp(path_of("rep.txt")).find("verdict: accept") != std::string::npos);

  // The 3x3x4 counterexample tensor on the 3-leaf star.
  write_file("star3.nwk", "(a1,a2,a3);\n");
  {
    Tensor<Rational> p({{"a1", 3}, {"a2", 3}, {"a3", 4}});
    p.at({0, 0, 0}) = 1;
    p.at({1, 1, 1}) = 1;
    p.at({2, 2, 2}) = 1;
    p.at({0, 1, 3}) = 1;
    std::ostringstream out;
    write_tensor(out, p);
    write_file("remark.tsr", out.str());
    std::ostringstream gens;
    write_generator_set(gens, test_support::strassen_commutation_quartics());
    write_file("base3.gens", gens.str());
  }
  auto reject = run_cli("membership --tensor " + path_of("remark.tsr") + " --tree " +
                        path_of("star3.nwk") + " --kappa 3 --base3 " + path_of("base3.gens") +
                        " --mode probe --seed 3 --out " + path_of("rej.txt"));
  CHECK(reject.exit_code == 1);
  std::string report = slurp(path_of("rej.txt"));
  CHECK(report.find("verdict: reject") != std::string::npos);
  CHECK(report.find("witness") != std::string::npos);
  CHECK(report.find("rank=4") != std::string::npos);

  // kappa 3 without a base file is a usage error.
  auto no_base = run_cli("membership --tensor " + path_of("remark.tsr") + " --tree " +
                         path_of("star3.nwk") + " --kappa 3");
  CHECK(no_base.exit_code == 2);
}

TEST_CASE("decompose and recompose round-trip through files") {
  write_file("fig1.nwk", "((a1,a2),a3,(a4,a5));\n");
  run_cli("sample-params --tree " + path_of("fig1.nwk") + " --kappa 2 --seed 5 --mode general" +
          " --out " + path_of("g.par"));
  auto joint = run_cli("joint --tree " + path_of("fig1.nwk") + " --params " + path_of("g.par") +
                       " --general --out " + path_of("gj.tsr"));
  REQUIRE(joint.exit_code == 0);
  auto dec = run_cli("decompose --tensor " + path_of("gj.tsr") + " --tree " + path_of("fig1.nwk") +
                     " --kappa 2 --out " + path_of("fact.txt"));
  REQUIRE(dec.exit_code == 0);
  auto rec = run_cli("recompose --factorization " + path_of("fact.txt") + " --out " +
                     path_of("back.tsr"));
  REQUIRE(rec.exit_code == 0);
  CHECK(without_comments(slurp(path_of("back.tsr"))) ==
        without_comments(slurp(path_of("gj.tsr"))));

  // A generic tensor is rejected with exit 1.
  {
    Rng rng(17);
    auto p = test_support::random_rational_tensor(
        {{"a1", 2}, {"a2", 2}, {"a3", 2}, {"a4", 2}, {"a5", 2}}, rng);
    std::ostringstream out;
    write_tensor(out, p);
    write_file("generic.tsr", out.str());
  }
  auto bad = run_cli("decompose --tensor " + path_of("generic.tsr") + " --tree " +
                     path_of("fig1.nwk") + " --kappa 2");
  CHECK(bad.exit_code == 1);
  CHECK(bad.err.find("rank") != std::string::npos);
}

TEST_CASE("simulate and split-support workflow") {
  write_file("quartet.nwk", "((a1,a2),(a3,a4));\n");
  {
    // Moderately mixing channels, so the generating split is recoverable;
    // uniformly random channels are frequently near non-identifiable.
    Tree t = parse_newick("((a1,a2),(a3,a4));");
    ModelParams params;
    params.root = t.leaf_vertex("a1");
    params.pi = {Rational(1, 2), Rational(1, 2)};
    Rng rng(11);
    for (const Edge& e : t.edges()) {
      Mat<Rational> m(2, 2);
      for (int i = 0; i < 2; ++i) {
        Rational noise(rng.uniform_int(1, 9), 10);
        Rational off = noise * Rational(3, 10);
        m(i, i) = 1 - off;
        m(i, 1 - i) = off;
      }
      params.matrices[e] = m;
    }
    std::ostringstream out;
    write_params(out, t, params);
    write_file("q.par", out.str());
  }
  auto sim1 = run_cli("simulate --tree " + path_of("quartet.nwk") + " --params " + path_of("q.par") +
                      " --sites 5000 --seed 21 --out " + path_of("c1.tsr"));
  auto sim2 = run_cli("simulate --tree " + path_of("quartet.nwk") + " --params " + path_of("q.par") +
                      " --sites 5000 --seed 21 --threads 2 --out " + path_of("c2.tsr"));
  REQUIRE(sim1.exit_code == 0);
  CHECK(slurp(path_of("c1.tsr")) == slurp(path_of("c2.tsr")));  // thread-count independent

  auto sim3 = run_cli("simulate --tree " + path_of("quartet.nwk") + " --params " + path_of("q.par") +
                      " --sites 5000 --seed 22 --out " + path_of("c3.tsr"));
  CHECK(slurp(path_of("c1.tsr")) != slurp(path_of("c3.tsr")));

  auto scores = run_cli("split-support --tensor " + path_of("c1.tsr") + " --kappa 2");
  REQUIRE(scores.exit_code == 0);
  // First non-comment line carries the best-ranked split.
  std::string body = without_comments(scores.out);
  CHECK(body.substr(0, body.find('\n')).find("a1,a2|a3,a4") != std::string::npos);
}

TEST_CASE("flatten matches the library computation") {
  write_file("fig1.nwk", "((a1,a2),a3,(a4,a5));\n");
  run_cli("sample-params --tree " + path_of("fig1.nwk") + " --kappa 2 --seed 8 --out " +
          path_of("p8.par"));
  run_cli("joint --tree " + path_of("fig1.nwk") + " --params " + path_of("p8.par") + " --out " +
          path_of("j8.tsr"));
  auto flat = run_cli("flatten --tensor " + path_of("j8.tsr") +
                      " --split 'a1,a2|a3,a4,a5' --out " + path_of("f8.tsr"));
  REQUIRE(flat.exit_code == 0);

  std::istringstream jin(slurp(path_of("j8.tsr")));
  auto joint = read_tensor_rational(jin);
  std::istringstream fin(slurp(path_of("f8.tsr")));
  auto flattened = read_tensor_rational(fin);
  CHECK(flattened == flatten(joint, FlatteningSpec{{{"a1", "a2"}, {"a3", "a4", "a5"}}}));
  CHECK(flattened.axis(0).size == 4);
  CHECK(flattened.axis(1).size == 8);
}

TEST_CASE("eval command reports per-generator values") {
  write_file("quartet.nwk", "((a1,a2),(a3,a4));\n");
  run_cli("invariants --tree " + path_of("quartet.nwk") + " --kappa 2 --out " + path_of("qg.txt"));
  run_cli("sample-params --tree " + path_of("quartet.nwk") + " --kappa 2 --seed 2 --out " +
          path_of("qp.par"));
  run_cli("joint --tree " + path_of("quartet.nwk") + " --params " + path_of("qp.par") + " --out " +
          path_of("qj.tsr"));
  auto r = run_cli("eval --gens " + path_of("qg.txt") + " --tensor " + path_of("qj.tsr"));
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("nonzero: 0 of 16") != std::string::npos);
}
