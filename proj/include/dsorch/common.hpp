#pragma once

// Shared primitives: error types, skill-name normalization, stable hashing,
// and deterministic RNG draws used across the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace dsorch {

using json = nlohmann::json;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller violated an operation's precondition.
class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& msg) : Error(msg) {}
};

// A provider call failed (schema violation after retries, replay miss,
// transport failure).
class ProviderError : public Error {
 public:
  explicit ProviderError(const std::string& msg) : Error(msg) {}
};

namespace detail {

inline bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Byte length of the Unicode space starting at s[i], 0 if none. Recognizes
// ASCII whitespace plus the common UTF-8 space code points (NBSP, the
// U+2000 block, narrow NBSP, ideographic space).
inline std::size_t space_len(std::string_view s, std::size_t i) {
  unsigned char c = static_cast<unsigned char>(s[i]);
  if (is_ascii_space(c)) return 1;
  if (i + 1 < s.size() && c == 0xC2 && static_cast<unsigned char>(s[i + 1]) == 0xA0) return 2;
  if (i + 2 < s.size()) {
    unsigned char c1 = static_cast<unsigned char>(s[i + 1]);
    unsigned char c2 = static_cast<unsigned char>(s[i + 2]);
    if (c == 0xE2 && c1 == 0x80 && ((c2 >= 0x80 && c2 <= 0x8A) || c2 == 0xAF)) return 3;
    if (c == 0xE3 && c1 == 0x80 && c2 == 0x80) return 3;
  }
  return 0;
}

}  // namespace detail

// Skill identity: trim (Unicode-aware), lowercase ASCII letters, collapse
// internal whitespace runs to one space. Idempotent. Non-ASCII bytes other
// than recognized spaces pass through untouched.
inline std::string normalize_skill(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  std::size_t i = 0;
  while (i < raw.size()) {
    std::size_t sl = detail::space_len(raw, i);
    if (sl > 0) {
      if (!out.empty()) pending_space = true;
      i += sl;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    char c = raw[i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    out.push_back(c);
    ++i;
  }
  return out;
}

// FNV-1a 64-bit: stable across processes and platforms; used for request
// fingerprints and the hash-mock embedder.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

// Uniform double in [0,1) from the top 53 bits of one engine draw; keeps
// seeded sampling independent of the standard library's distribution
// implementations.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) by rejection; n must be > 0.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  if (n == 0) throw Error("uniform_index: empty range");
  std::uint64_t bound = std::numeric_limits<std::uint64_t>::max() / n * n;
  std::uint64_t v = rng();
  while (v >= bound) v = rng();
  return static_cast<std::size_t>(v % n);
}

inline bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(const std::vector<double>& v) { return std::sqrt(dot(v, v)); }

inline std::vector<double> normalized(std::vector<double> v) {
  double n = l2_norm(v);
  if (n <= 0.0 || !std::isfinite(n)) throw Error("cannot normalize zero or non-finite vector");
  for (double& x : v) x /= n;
  return v;
}

}  // namespace dsorch
