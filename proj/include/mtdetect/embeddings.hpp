#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mtdetect/common.hpp"

namespace mtdetect {

enum class DistanceMetric { Euclidean, Cosine };

std::string_view metric_name(DistanceMetric m);
DistanceMetric parse_metric(std::string_view s);

/// Raised when cosine distance meets a zero vector.
class DegenerateEmbedding : public Error {
 public:
  using Error::Error;
};

using VectorView = std::span<const float>;

/// Token -> fixed-dimension vector map. Immutable once built, so it can be
/// shared between matcher threads without locking.
class EmbeddingTable {
 public:
  EmbeddingTable(std::size_t dimension, std::string source_id);

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& source_id() const noexcept { return source_id_; }
  /// Lines that repeated an already-seen token during load.
  std::size_t duplicates() const noexcept { return duplicates_; }

  /// Inserts or overwrites. Returns false when `token` was already present.
  bool insert(std::string_view token, VectorView vec);

  /// Exact match, then lowercase fallback.
  std::optional<VectorView> lookup(std::string_view token) const;
  std::optional<std::uint32_t> find_row(std::string_view token) const;
  VectorView row(std::uint32_t r) const {
    return {data_.data() + static_cast<std::size_t>(r) * dimension_, dimension_};
  }
  /// Tokens in first-insertion order.
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  void reserve(std::size_t rows);

 private:
  friend EmbeddingTable load_embeddings(const std::filesystem::path&, std::optional<std::size_t>);

  std::size_t dimension_;
  std::string source_id_;
  std::size_t duplicates_ = 0;
  std::vector<float> data_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// Reads GloVe text format: a token followed by D reals per line.
/// `source_id` of the result is an FNV-1a hash of the file bytes.
EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               std::optional<std::size_t> expected_dimension = std::nullopt);

/// Writes the table back in GloVe text format (shortest round-trip floats).
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);

namespace kernels {
// Fixed-order reductions; the matcher's fast path and `distance` share them
// so both produce bit-identical values.
double squared_euclidean(const float* u, const float* v, std::size_t n) noexcept;
double dot(const float* u, const float* v, std::size_t n) noexcept;
double euclidean(const float* u, const float* v, std::size_t n) noexcept;
/// 1 - u.v / (|u||v|), clamped to [0, 2]; norms passed precomputed.
double cosine_from_parts(double dot_uv, double norm_u, double norm_v) noexcept;
}  // namespace kernels

/// Symmetric distance between two vectors of equal length.
double distance(DistanceMetric metric, VectorView u, VectorView v);

}  // namespace mtdetect
