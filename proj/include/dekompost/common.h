#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dekompost {

// Bad input data: malformed files, unalignable entries, inconsistent models.
// The CLI maps these to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller violated an operation's precondition (bad ratios, bad hyperparameters).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace utf8 {

// Throws DataError on malformed UTF-8.
std::u32string decode(std::string_view s);
std::string encode(std::u32string_view s);
std::string encode(char32_t c);
bool valid(std::string_view s);

// Number of code points.
std::size_t length(std::string_view s);

char32_t to_lower(char32_t c);
char32_t to_upper(char32_t c);
std::u32string to_lower(std::u32string_view s);
std::string to_lower(std::string_view s);

// First code point uppercased, rest untouched.
std::string capitalize(std::string_view s);

// Substring by code-point offsets [begin, end).
std::string substr(std::string_view s, std::size_t begin, std::size_t end);

}  // namespace utf8

// Deterministic RNG helpers. std distributions are implementation-defined, so
// the few draws we need are derived from raw mt19937_64 output directly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1).
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

std::vector<std::string> split_string(std::string_view s, char sep);

// Shortest representation that parses back to the same double.
std::string format_double(double value);

}  // namespace dekompost
