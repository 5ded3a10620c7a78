#include "mtdetect/matcher.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <set>
#include <thread>
#include <utility>

#include "json.hpp"

namespace mtdetect {

namespace {

struct Embedded {
  std::uint32_t index;
  TagId tag;
  const float* vec;
};

// Above this many embedded tokens the distance matrix is not materialized.
constexpr std::size_t kMatrixLimit = 4096;

}  // namespace

std::vector<MatchRecord> match_records(const TaggedParagraph& p, const EmbeddingTable& table,
                                       DistanceMetric metric) {
  const std::size_t dim = table.dimension();
  std::vector<Embedded> toks;
  toks.reserve(p.tokens.size());
  TagId max_tag = 0;
  for (std::size_t i = 0; i < p.tokens.size(); ++i) {
    if (auto row = table.find_row(p.tokens[i].surface)) {
      toks.push_back({static_cast<std::uint32_t>(i), p.tokens[i].tag, table.row(*row).data()});
      max_tag = std::max(max_tag, p.tokens[i].tag);
    }
  }
  const std::size_t m = toks.size();
  std::vector<MatchRecord> out;
  if (m < 2) return out;

  std::vector<double> norms;
  if (metric == DistanceMetric::Cosine) {
    norms.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      norms[i] = std::sqrt(kernels::dot(toks[i].vec, toks[i].vec, dim));
      if (norms[i] == 0.0)
        throw DegenerateEmbedding("zero vector for token '" + p.tokens[toks[i].index].surface + "' in paragraph '" +
                                  p.id + "'");
    }
  }
  auto pair_distance = [&](std::size_t i, std::size_t j) {
    if (metric == DistanceMetric::Euclidean) return kernels::euclidean(toks[i].vec, toks[j].vec, dim);
    return kernels::cosine_from_parts(kernels::dot(toks[i].vec, toks[j].vec, dim), norms[i], norms[j]);
  };

  std::vector<double> matrix;
  const bool use_matrix = m <= kMatrixLimit;
  if (use_matrix) {
    matrix.resize(m * m);
    for (std::size_t i = 0; i < m; ++i) {
      matrix[i * m + i] = 0.0;
      for (std::size_t j = i + 1; j < m; ++j) matrix[i * m + j] = matrix[j * m + i] = pair_distance(i, j);
    }
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::pair<double, std::uint32_t>> best(static_cast<std::size_t>(max_tag) + 1);
  out.reserve(m * 4);
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(best.begin(), best.end(), std::pair{kInf, kNone});
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      const double d = use_matrix ? matrix[i * m + j] : pair_distance(i, j);
      auto& slot = best[toks[j].tag];
      // Ascending j with strict < keeps the smallest index on ties.
      if (slot.second == kNone || d < slot.first) slot = {d, toks[j].index};
    }
    for (std::size_t t = 0; t < best.size(); ++t) {
      if (best[t].second == kNone) continue;
      out.push_back({toks[i].index, toks[i].tag, static_cast<TagId>(t), best[t].second, best[t].first});
    }
  }
  return out;
}

GroupedSimilarities group_records(const std::vector<MatchRecord>& records, bool dedupe_symmetric) {
  GroupedSimilarities g;
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (const auto& r : records) {
    if (dedupe_symmetric) {
      auto key = std::minmax(r.source_index, r.target_index);
      if (!seen.insert(key).second) continue;
    }
    g.groups[TagPair::of(r.source_tag, r.target_tag)].push_back(r.dist);
  }
  return g;
}

GroupedSimilarities match_paragraph(const TaggedParagraph& p, const EmbeddingTable& table,
                                    const MatchOptions& options) {
  std::size_t embedded = 0;
  for (const auto& t : p.tokens)
    if (table.find_row(t.surface)) ++embedded;
  GroupedSimilarities g = group_records(match_records(p, table, options.metric), options.dedupe_symmetric);
  g.embedded_tokens = embedded;
  g.skipped_tokens = p.tokens.size() - embedded;
  return g;
}

std::vector<ParagraphMatch> match_corpus(const Corpus& corpus, const EmbeddingTable& table,
                                         const MatchOptions& options, unsigned jobs) {
  const auto& paras = corpus.paragraphs();
  std::vector<ParagraphMatch> out(paras.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t i; !failed.load() && (i = next.fetch_add(1)) < paras.size();) {
      try {
        out[i] = {paras[i].id, match_paragraph(paras[i], table, options)};
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(paras.size())));
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::string match_diagnostics_json(const std::vector<ParagraphMatch>& matches) {
  using nlohmann::json;
  json paragraphs = json::array();
  json empty = json::array();
  std::size_t skipped_total = 0;
  for (const auto& m : matches) {
    paragraphs.push_back({{"id", m.id},
                          {"skipped_tokens", m.similarities.skipped_tokens},
                          {"embedded_tokens", m.similarities.embedded_tokens}});
    skipped_total += m.similarities.skipped_tokens;
    if (m.similarities.empty()) empty.push_back(m.id);
  }
  json report = {{"paragraphs", std::move(paragraphs)},
                 {"empty_group_paragraphs", std::move(empty)},
                 {"skipped_tokens_total", skipped_total}};
  return report.dump(2);
}

}  // namespace mtdetect
