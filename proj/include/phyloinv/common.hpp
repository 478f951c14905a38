#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace phyloinv {

// Exact scalar used everywhere an invariant must vanish identically.
using Rational = boost::multiprecision::cpp_rational;
using Integer = boost::multiprecision::cpp_int;

// Validation and computational failures. Message carries position/context;
// the CLI maps this to exit code 2.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

inline double to_double(const Rational& q) { return q.convert_to<double>(); }

// Parses "p/q" or an integer literal. Throws Error on malformed input.
inline Rational parse_rational(const std::string& text) {
  try {
    Rational q(text);
    return q;
  } catch (const std::exception&) {
    throw Error("invalid rational literal '" + text + "'");
  }
}

inline std::string rational_str(const Rational& q) { return q.str(); }

// Counter-based pseudo-random generator (SplitMix64 core).
//
// Seeding: a 64-bit key plus an incrementing counter; each draw mixes
// key + counter so the sequence is a pure function of (key, draw index).
// stream(i) derives an independent generator keyed by (key, i); simulation
// uses stream(site) so per-site draws are reproducible under any execution
// order or thread count.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key), counter_(0) {}

  std::uint64_t next_u64() {
    std::uint64_t z = key_ + 0x9E3779B97F4A7C15ULL * ++counter_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [lo, hi], inclusive.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  // Uniform in [0, 1).
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  Rng stream(std::uint64_t idx) const {
    Rng derive(key_ ^ (0xD1B54A32D192ED03ULL * (idx + 1)));
    derive.counter_ = 0x9E6C63D0876A9ULL;
    return Rng(derive.next_u64());
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace phyloinv
