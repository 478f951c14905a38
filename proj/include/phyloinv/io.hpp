#pragma once

// Text formats: tensors, parameter sets, generator sets, membership reports,
// and factorizations. Everything is line-oriented; '#' starts a comment;
// exact rationals render as p/q. Readers report line numbers on failure.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "phyloinv/common.hpp"
#include "phyloinv/invariants.hpp"
#include "phyloinv/membership.hpp"
#include "phyloinv/model.hpp"
#include "phyloinv/poly.hpp"
#include "phyloinv/tensor.hpp"
#include "phyloinv/tree.hpp"

namespace phyloinv {

namespace io_detail {

struct LineReader {
  std::istream& in;
  int line_no = 0;
  std::string line;

  // Next content line, comments and blanks skipped. False at end of input.
  bool next() {
    while (std::getline(in, line)) {
      ++line_no;
      std::size_t start = line.find_first_not_of(" \t\r");
      if (start == std::string::npos) continue;
      if (line[start] == '#') continue;
      if (start > 0) line = line.substr(start);
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
        line.pop_back();
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error("line " + std::to_string(line_no) + ": " + msg);
  }
};

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream iss(s);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

inline bool strip_prefix(std::string& s, const std::string& prefix) {
  if (s.rfind(prefix, 0) != 0) return false;
  s = s.substr(prefix.size());
  return true;
}

inline int parse_int(const LineReader& r, const std::string& tok) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) r.fail("expected integer, got '" + tok + "'");
  return value;
}

inline std::string first_token(const LineReader& r, const std::string& rest, const std::string& what) {
  auto toks = split_ws(rest);
  if (toks.empty()) r.fail("missing value after '" + what + "'");
  return toks[0];
}

inline std::string render_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace io_detail

// ---------------------------------------------------------------- tensors

template <typename S>
void write_tensor(std::ostream& out, const Tensor<S>& t,
                  const std::vector<std::string>& header_comments = {}) {
  for (const auto& c : header_comments) out << "# " << c << "\n";
  out << "axes:";
  for (const Axis& ax : t.axes()) out << ' ' << ax.label << ':' << ax.size;
  out << "\n";
  for (const S& v : t.data()) {
    if constexpr (std::is_same_v<S, double>)
      out << io_detail::render_double(v) << "\n";
    else if constexpr (std::is_same_v<S, Rational>)
      out << rational_str(v) << "\n";
    else
      out << v << "\n";
  }
}

namespace io_detail {

inline std::vector<Axis> parse_axes_line(LineReader& r) {
  std::string rest = r.line;
  if (!strip_prefix(rest, "axes:")) r.fail("expected 'axes:' header");
  std::vector<Axis> axes;
  for (const auto& tok : split_ws(rest)) {
    std::size_t colon = tok.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= tok.size())
      r.fail("bad axis token '" + tok + "' (want label:size)");
    axes.push_back({tok.substr(0, colon), parse_int(r, tok.substr(colon + 1))});
  }
  if (axes.empty()) r.fail("no axes declared");
  return axes;
}

template <typename S, typename ParseFn>
Tensor<S> read_tensor_impl(std::istream& in, ParseFn&& parse) {
  LineReader r{in, 0, {}};
  if (!r.next()) throw Error("empty tensor file");
  Tensor<S> t(parse_axes_line(r));
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!r.next()) r.fail("tensor ends early: expected " + std::to_string(t.size()) + " entries");
    auto toks = split_ws(r.line);
    if (toks.size() != 1) r.fail("expected one scalar per line");
    t.data()[i] = parse(r, toks[0]);
  }
  return t;
}

}  // namespace io_detail

inline Tensor<Rational> read_tensor_rational(std::istream& in) {
  return io_detail::read_tensor_impl<Rational>(in, [](io_detail::LineReader& r, const std::string& tok) {
    try {
      return parse_rational(tok);
    } catch (const Error& e) {
      r.fail(e.what());
    }
  });
}

inline Tensor<double> read_tensor_double(std::istream& in) {
  return io_detail::read_tensor_impl<double>(in, [](io_detail::LineReader& r, const std::string& tok) {
    try {
      std::size_t used = 0;
      double v = std::stod(tok, &used);
      if (used != tok.size()) r.fail("bad float '" + tok + "'");
      return v;
    } catch (const std::exception&) {
      r.fail("bad float '" + tok + "'");
    }
  });
}

// ------------------------------------------------------------- parameters

namespace io_detail {

inline void write_edge_blocks(std::ostream& out, const Tree& t, int root,
                              const std::map<Edge, Mat<Rational>>& mats) {
  const auto parent = phyloinv::detail::parent_map(t, root);
  for (const auto& [e, m] : mats) {
    const int from = parent[e.second] == e.first ? e.first : e.second;
    const int to = from == e.first ? e.second : e.first;
    out << "edge " << from << "-" << to << ":\n";
    for (int i = 0; i < m.rows(); ++i) {
      for (int j = 0; j < m.cols(); ++j) out << (j ? " " : "") << rational_str(m(i, j));
      out << "\n";
    }
  }
}

// Reads "edge u-v:" blocks; rows in the file index states at u. Matrices are
// stored with rows at the root-closer endpoint.
inline std::map<Edge, Mat<Rational>> read_edge_blocks(LineReader& r, const Tree& t, int root,
                                                      int kappa, bool have_first_line) {
  const auto parent = phyloinv::detail::parent_map(t, root);
  std::map<Edge, Mat<Rational>> mats;
  bool have_line = have_first_line;
  while (have_line || r.next()) {
    have_line = false;
    std::string rest = r.line;
    if (!strip_prefix(rest, "edge ")) r.fail("expected 'edge u-v:' block");
    if (rest.empty() || rest.back() != ':') r.fail("edge header must end with ':'");
    rest.pop_back();
    std::size_t dash = rest.find('-');
    if (dash == std::string::npos) r.fail("edge header needs 'u-v'");
    int u = parse_int(r, rest.substr(0, dash));
    int v = parse_int(r, rest.substr(dash + 1));
    if (!t.has_edge(edge_key(u, v)))
      r.fail("tree has no edge " + std::to_string(u) + "-" + std::to_string(v));
    Mat<Rational> m(kappa, kappa);
    for (int i = 0; i < kappa; ++i) {
      if (!r.next()) r.fail("edge block ends early");
      auto toks = split_ws(r.line);
      if (static_cast<int>(toks.size()) != kappa)
        r.fail("expected " + std::to_string(kappa) + " entries in matrix row");
      for (int j = 0; j < kappa; ++j) {
        try {
          m(i, j) = parse_rational(toks[j]);
        } catch (const Error& e) {
          r.fail(e.what());
        }
      }
    }
    // Reorient so rows sit at the root-closer endpoint.
    const bool u_closer = parent[v] == u;
    if (mats.count(edge_key(u, v))) r.fail("duplicate edge block");
    mats[edge_key(u, v)] = u_closer ? m : m.transposed();
  }
  return mats;
}

}  // namespace io_detail

inline void write_params(std::ostream& out, const Tree& t, const ModelParams& p,
                         const std::vector<std::string>& header_comments = {}) {
  for (const auto& c : header_comments) out << "# " << c << "\n";
  out << "root: " << p.root << "\n";
  out << "pi:";
  for (const auto& x : p.pi) out << ' ' << rational_str(x);
  out << "\n";
  io_detail::write_edge_blocks(out, t, p.root, p.matrices);
}

inline void write_params(std::ostream& out, const Tree& t, const GeneralParams& p,
                         const std::vector<std::string>& header_comments = {}) {
  for (const auto& c : header_comments) out << "# " << c << "\n";
  out << "root: " << p.root << "\n";
  io_detail::write_edge_blocks(out, t, p.root, p.matrices);
}

inline ModelParams read_model_params(std::istream& in, const Tree& t) {
  io_detail::LineReader r{in, 0, {}};
  ModelParams p;
  if (!r.next()) throw Error("empty params file");
  std::string rest = r.line;
  if (!io_detail::strip_prefix(rest, "root:")) r.fail("expected 'root: <vertex>'");
  p.root = io_detail::parse_int(r, io_detail::first_token(r, rest, r.line));
  if (!r.next()) r.fail("expected 'pi:' line");
  rest = r.line;
  if (!io_detail::strip_prefix(rest, "pi:")) r.fail("expected 'pi:' line");
  for (const auto& tok : io_detail::split_ws(rest)) {
    try {
      p.pi.push_back(parse_rational(tok));
    } catch (const Error& e) {
      r.fail(e.what());
    }
  }
  if (p.pi.empty()) r.fail("empty pi line");
  p.matrices = io_detail::read_edge_blocks(r, t, p.root, p.kappa(), false);
  validate_params(t, p);
  return p;
}

// Infers kappa from the first matrix row of a general-params file.
inline int sniff_params_kappa(const std::string& content) {
  std::istringstream in(content);
  io_detail::LineReader r{in, 0, {}};
  while (r.next()) {
    std::string rest = r.line;
    if (!io_detail::strip_prefix(rest, "edge ")) continue;
    if (!r.next()) r.fail("edge block ends early");
    return static_cast<int>(io_detail::split_ws(r.line).size());
  }
  throw Error("params file has no edge blocks");
}

inline GeneralParams read_general_params(std::istream& in, const Tree& t, int kappa) {
  io_detail::LineReader r{in, 0, {}};
  GeneralParams p;
  if (!r.next()) throw Error("empty params file");
  std::string rest = r.line;
  if (!io_detail::strip_prefix(rest, "root:")) r.fail("expected 'root: <vertex>'");
  p.root = io_detail::parse_int(r, io_detail::first_token(r, rest, r.line));
  p.matrices = io_detail::read_edge_blocks(r, t, p.root, kappa, false);
  validate_params(t, p);
  return p;
}

// ----------------------------------------------------------- polynomials

namespace io_detail {

inline std::string render_term(const Rational& coeff, const Monomial& m) {
  std::string out = "term: " + rational_str(coeff);
  for (const auto& [v, e] : m) out += " " + v.str() + "^" + std::to_string(e);
  return out;
}

inline Variable parse_variable(const LineReader& r, const std::string& text) {
  Variable v;
  std::string body;
  if (text.size() >= 2 && text[0] == 'P' && text[1] == '[') {
    v.kind = Variable::Kind::Entry;
    body = text.substr(2);
  } else if (text.size() >= 2 && text[0] == 'z') {
    std::size_t bracket = text.find('[');
    if (bracket == std::string::npos) r.fail("bad variable '" + text + "'");
    v.kind = Variable::Kind::Z;
    v.idx.push_back(parse_int(r, text.substr(1, bracket - 1)) - 1);  // z-axis is 1-based in files
    body = text.substr(bracket + 1);
  } else {
    r.fail("bad variable '" + text + "'");
  }
  if (body.empty() || body.back() != ']') r.fail("bad variable '" + text + "'");
  body.pop_back();
  std::string tok;
  std::istringstream iss(body);
  while (std::getline(iss, tok, ',')) v.idx.push_back(parse_int(r, tok));
  if (v.kind == Variable::Kind::Z && v.idx.size() != 3) r.fail("z variable needs two indices");
  return v;
}

inline void parse_term_into(LineReader& r, const std::string& rest, Polynomial& poly) {
  auto toks = split_ws(rest);
  if (toks.empty()) r.fail("empty term");
  Rational coeff;
  try {
    coeff = parse_rational(toks[0]);
  } catch (const Error& e) {
    r.fail(e.what());
  }
  Monomial m;
  for (std::size_t i = 1; i < toks.size(); ++i) {
    std::string vt = toks[i];
    int exponent = 1;
    std::size_t caret = vt.rfind('^');
    if (caret != std::string::npos && caret > vt.rfind(']')) {
      exponent = parse_int(r, vt.substr(caret + 1));
      vt = vt.substr(0, caret);
    }
    if (exponent < 1) r.fail("exponent must be positive");
    m = monomial_mul(m, Monomial{{parse_variable(r, vt), exponent}});
  }
  poly.add_term(m, coeff);
}

}  // namespace io_detail

inline void write_generator_set(std::ostream& out, const GeneratorSet& g,
                                const std::vector<std::string>& header_comments = {}) {
  for (const auto& c : header_comments) out << "# " << c << "\n";
  out << "kappa: " << g.kappa << "\n";
  out << "states:";
  for (int s : g.states) out << ' ' << s;
  out << "\n";
  for (std::size_t i = 0; i < g.polys.size(); ++i) {
    out << "generator: " << i << "\n";
    out << "source: " << g.sources[i] << "\n";
    for (const auto& [m, c] : g.polys[i].terms()) out << io_detail::render_term(c, m) << "\n";
  }
}

inline GeneratorSet read_generator_set(std::istream& in) {
  io_detail::LineReader r{in, 0, {}};
  GeneratorSet g;
  if (!r.next()) throw Error("empty generator set file");
  std::string rest = r.line;
  if (!io_detail::strip_prefix(rest, "kappa:")) r.fail("expected 'kappa:'");
  g.kappa = io_detail::parse_int(r, io_detail::first_token(r, rest, r.line));
  if (!r.next()) r.fail("expected 'states:'");
  rest = r.line;
  if (!io_detail::strip_prefix(rest, "states:")) r.fail("expected 'states:'");
  for (const auto& tok : io_detail::split_ws(rest)) g.states.push_back(io_detail::parse_int(r, tok));
  if (g.states.empty()) r.fail("empty states line");

  while (r.next()) {
    std::string line = r.line;
    if (io_detail::strip_prefix(line, "generator:")) {
      g.polys.emplace_back();
      g.sources.emplace_back("imported");
    } else if (io_detail::strip_prefix(line, "source:")) {
      if (g.sources.empty()) r.fail("'source:' before any generator");
      auto toks = io_detail::split_ws(line);
      std::string src;
      for (const auto& t : toks) src += (src.empty() ? "" : " ") + t;
      g.sources.back() = src.empty() ? "imported" : src;
    } else if (io_detail::strip_prefix(line, "term:")) {
      if (g.polys.empty()) r.fail("'term:' before any generator");
      io_detail::parse_term_into(r, line, g.polys.back());
    } else {
      r.fail("unrecognized line '" + r.line + "'");
    }
  }
  g.total_count = g.polys.size();
  validate_generator_set(g);
  return g;
}

// --------------------------------------------------------------- reports

inline void write_report(std::ostream& out, const MembershipReport& report,
                         const std::vector<std::string>& header_comments = {}) {
  for (const auto& c : header_comments) out << "# " << c << "\n";
  out << "verdict: " << verdict_str(report.verdict) << "\n";
  out << "kappa: " << report.kappa << "\n";
  out << "mode: " << report.mode << "\n";
  for (const auto& e : report.edge_ranks)
    out << "edge-rank: split=" << e.split.str() << " rows=" << e.rows << " cols=" << e.cols
        << " rank=" << e.rank << "\n";
  for (const auto& w : report.witnesses)
    out << "witness: generator=" << w.generator << " value=" << w.value << "\n";
  if (report.probe) {
    out << "probe: trials=" << report.probe->trials << " seed=" << report.probe->seed
        << " z-range=" << report.probe->z_entry_range
        << " vertices=" << report.probe->vertices_probed << "\n";
    if (report.probe->vertices_probed > 0)
      out << "probe-false-accept-bound: " << io_detail::render_double(report.probe->false_accept_bound)
          << "\n";
  }
  for (const auto& n : report.notes) out << "note: " << n << "\n";
}

// ---------------------------------------------------------- factorization

inline void write_factorization(std::ostream& out, const Factorization& f,
                                const std::vector<std::string>& header_comments = {}) {
  for (const auto& c : header_comments) out << "# " << c << "\n";
  out << "kappa: " << f.kappa << "\n";
  out << "taxa:";
  for (const auto& t : f.taxa_order) out << ' ' << t;
  out << "\n";
  out << "steps: " << f.steps.size() << "\n";
  for (const auto& step : f.steps) {
    out << "step: fresh=" << step.fresh << " cherry=" << step.cherry.first << ","
        << step.cherry.second << " rank=" << step.inner_rank << "\n";
    write_tensor(out, step.factor);
  }
  out << "core:\n";
  write_tensor(out, f.core);
}

inline Factorization read_factorization(std::istream& in) {
  io_detail::LineReader r{in, 0, {}};
  Factorization f;
  if (!r.next()) throw Error("empty factorization file");
  std::string rest = r.line;
  if (!io_detail::strip_prefix(rest, "kappa:")) r.fail("expected 'kappa:'");
  f.kappa = io_detail::parse_int(r, io_detail::first_token(r, rest, r.line));
  if (!r.next()) r.fail("expected 'taxa:'");
  rest = r.line;
  if (!io_detail::strip_prefix(rest, "taxa:")) r.fail("expected 'taxa:'");
  f.taxa_order = io_detail::split_ws(rest);
  if (!r.next()) r.fail("expected 'steps:'");
  rest = r.line;
  if (!io_detail::strip_prefix(rest, "steps:")) r.fail("expected 'steps:'");
  const int nsteps = io_detail::parse_int(r, io_detail::first_token(r, rest, r.line));

  auto read_inline_tensor = [&]() {
    if (!r.next()) r.fail("expected 'axes:' line");
    Tensor<Rational> t(io_detail::parse_axes_line(r));
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!r.next()) r.fail("tensor block ends early");
      try {
        t.data()[i] = parse_rational(r.line);
      } catch (const Error& e) {
        r.fail(e.what());
      }
    }
    return t;
  };

  for (int s = 0; s < nsteps; ++s) {
    if (!r.next()) r.fail("expected 'step:' line");
    rest = r.line;
    if (!io_detail::strip_prefix(rest, "step:")) r.fail("expected 'step:'");
    FactorizationStep step{"", {"", ""}, Tensor<Rational>({{"_", 1}}), 0};
    for (const auto& tok : io_detail::split_ws(rest)) {
      std::string t = tok;
      if (io_detail::strip_prefix(t, "fresh=")) {
        step.fresh = t;
      } else if (io_detail::strip_prefix(t, "cherry=")) {
        std::size_t comma = t.find(',');
        if (comma == std::string::npos) r.fail("cherry needs two taxa");
        step.cherry = {t.substr(0, comma), t.substr(comma + 1)};
      } else if (io_detail::strip_prefix(t, "rank=")) {
        step.inner_rank = io_detail::parse_int(r, t);
      } else {
        r.fail("unrecognized step field '" + tok + "'");
      }
    }
    step.factor = read_inline_tensor();
    f.steps.push_back(std::move(step));
  }
  if (!r.next() || r.line != "core:") r.fail("expected 'core:'");
  f.core = read_inline_tensor();
  return f;
}

// ------------------------------------------------------------ file utils

inline std::string slurp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spill_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
}

}  // namespace phyloinv
