#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mtdetect {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text. `line()` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Features, models or corpora bound to different tagsets/metrics/embeddings.
class LayoutMismatch : public Error {
 public:
  using Error::Error;
};

enum class Label : int8_t { Human = -1, Unlabeled = 0, Machine = 1 };

std::string_view label_name(Label l);
/// Accepts "human", "machine"; anything else throws.
Label parse_label(std::string_view s);

/// 64-bit FNV-1a, incremental.
class Fnv1a {
 public:
  void update(std::string_view bytes);
  std::uint64_t digest() const noexcept { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

/// Uniform integer in [0, n) by rejection; portable across standard libraries,
/// unlike std::uniform_int_distribution.
std::uint64_t bounded_random(std::mt19937_64& rng, std::uint64_t n);

/// Fisher-Yates driven by `bounded_random`.
template <typename T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(bounded_random(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace mtdetect
