#include "mtdetect/embeddings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include <spdlog/spdlog.h>

namespace mtdetect {

std::string_view metric_name(DistanceMetric m) {
  return m == DistanceMetric::Euclidean ? "euclidean" : "cosine";
}

DistanceMetric parse_metric(std::string_view s) {
  if (s == "euclidean") return DistanceMetric::Euclidean;
  if (s == "cosine") return DistanceMetric::Cosine;
  throw Error("unknown metric '" + std::string(s) + "' (expected euclidean|cosine)");
}

EmbeddingTable::EmbeddingTable(std::size_t dimension, std::string source_id)
    : dimension_(dimension), source_id_(std::move(source_id)) {
  if (dimension_ == 0) throw Error("embedding dimension must be positive");
}

void EmbeddingTable::reserve(std::size_t rows) {
  data_.reserve(rows * dimension_);
  tokens_.reserve(rows);
  index_.reserve(rows);
}

bool EmbeddingTable::insert(std::string_view token, VectorView vec) {
  if (vec.size() != dimension_)
    throw Error("vector for '" + std::string(token) + "' has " + std::to_string(vec.size()) +
                " components, expected " + std::to_string(dimension_));
  for (float x : vec)
    if (!std::isfinite(x)) throw Error("non-finite component in vector for '" + std::string(token) + "'");
  auto [it, fresh] = index_.try_emplace(std::string(token), static_cast<std::uint32_t>(tokens_.size()));
  if (fresh) {
    tokens_.emplace_back(token);
    data_.insert(data_.end(), vec.begin(), vec.end());
  } else {
    std::copy(vec.begin(), vec.end(), data_.begin() + static_cast<std::ptrdiff_t>(it->second * dimension_));
  }
  return fresh;
}

std::optional<std::uint32_t> EmbeddingTable::find_row(std::string_view token) const {
  std::string key(token);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  return std::nullopt;
}

std::optional<VectorView> EmbeddingTable::lookup(std::string_view token) const {
  if (auto r = find_row(token)) return row(*r);
  return std::nullopt;
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

}  // namespace

EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               std::optional<std::size_t> expected_dimension) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embeddings file '" + path.string() + "'");

  Fnv1a hash;
  std::optional<EmbeddingTable> table;
  std::vector<float> buf;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    hash.update(line);
    hash.update("\n");
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end && is_space(*p)) ++p;
    if (p == end) continue;  // blank line
    const char* tok_begin = p;
    while (p < end && !is_space(*p)) ++p;
    std::string_view token(tok_begin, static_cast<std::size_t>(p - tok_begin));

    buf.clear();
    while (true) {
      while (p < end && is_space(*p)) ++p;
      if (p == end) break;
      float x = 0;
      auto [next, ec] = std::from_chars(p, end, x);
      if (ec != std::errc() || (next < end && !is_space(*next)))
        throw ParseError("non-numeric component for token '" + std::string(token) + "'", lineno);
      buf.push_back(x);
      p = next;
    }
    if (buf.empty()) throw ParseError("token '" + std::string(token) + "' has no components", lineno);

    if (!table) {
      if (expected_dimension && *expected_dimension != buf.size())
        throw ParseError("dimension mismatch: expected " + std::to_string(*expected_dimension) + ", found " +
                             std::to_string(buf.size()),
                         lineno);
      table.emplace(buf.size(), std::string());
    } else if (buf.size() != table->dimension()) {
      throw ParseError("wrong field count: expected " + std::to_string(table->dimension()) +
                           " components, found " + std::to_string(buf.size()),
                       lineno);
    }
    try {
      if (!table->insert(token, buf)) ++table->duplicates_;
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  if (in.bad()) throw IoError("read error on '" + path.string() + "'");
  if (!table) throw ParseError("embeddings file '" + path.string() + "' is empty", 0);
  table->source_id_ = "fnv1a:" + hash.hex();
  if (table->duplicates_)
    spdlog::warn("{}: {} duplicate token line(s), last occurrence kept", path.string(), table->duplicates_);
  return std::move(*table);
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  char num[32];
  std::string line;
  for (std::uint32_t r = 0; r < table.size(); ++r) {
    line = table.tokens()[r];
    for (float x : table.row(r)) {
      auto res = std::to_chars(num, num + sizeof num, x);
      line += ' ';
      line.append(num, res.ptr);
    }
    line += '\n';
    out << line;
  }
  if (!out) throw IoError("write error on '" + path.string() + "'");
}

namespace kernels {

double squared_euclidean(const float* u, const float* v, std::size_t n) noexcept {
  double acc[4] = {0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (int k = 0; k < 4; ++k) {
      const double d = static_cast<double>(u[i + k]) - static_cast<double>(v[i + k]);
      acc[k] += d * d;
    }
  }
  for (; i < n; ++i) {
    const double d = static_cast<double>(u[i]) - static_cast<double>(v[i]);
    acc[0] += d * d;
  }
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

double dot(const float* u, const float* v, std::size_t n) noexcept {
  double acc[4] = {0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    for (int k = 0; k < 4; ++k) acc[k] += static_cast<double>(u[i + k]) * static_cast<double>(v[i + k]);
  for (; i < n; ++i) acc[0] += static_cast<double>(u[i]) * static_cast<double>(v[i]);
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

double euclidean(const float* u, const float* v, std::size_t n) noexcept {
  return std::sqrt(squared_euclidean(u, v, n));
}

double cosine_from_parts(double dot_uv, double norm_u, double norm_v) noexcept {
  const double d = 1.0 - dot_uv / (norm_u * norm_v);
  return std::clamp(d, 0.0, 2.0);
}

}  // namespace kernels

double distance(DistanceMetric metric, VectorView u, VectorView v) {
  if (u.size() != v.size())
    throw Error("distance: dimension mismatch (" + std::to_string(u.size()) + " vs " + std::to_string(v.size()) +
                ")");
  if (metric == DistanceMetric::Euclidean) return kernels::euclidean(u.data(), v.data(), u.size());
  const double nu = std::sqrt(kernels::dot(u.data(), u.data(), u.size()));
  const double nv = std::sqrt(kernels::dot(v.data(), v.data(), v.size()));
  if (nu == 0.0 || nv == 0.0) throw DegenerateEmbedding("cosine distance undefined for a zero vector");
  return kernels::cosine_from_parts(kernels::dot(u.data(), v.data(), u.size()), nu, nv);
}

}  // namespace mtdetect
