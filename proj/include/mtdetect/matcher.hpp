#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mtdetect/corpus.hpp"
#include "mtdetect/embeddings.hpp"

namespace mtdetect {

/// Unordered POS pair, stored with a <= b in tagset order.
struct TagPair {
  TagId a = 0;
  TagId b = 0;

  static TagPair of(TagId x, TagId y) { return x <= y ? TagPair{x, y} : TagPair{y, x}; }
  auto operator<=>(const TagPair&) const = default;
};

/// Nearest token of `target_tag` for the token at `source_index`.
struct MatchRecord {
  std::uint32_t source_index = 0;
  TagId source_tag = 0;
  TagId target_tag = 0;
  std::uint32_t target_index = 0;
  double dist = 0.0;

  bool operator==(const MatchRecord&) const = default;
};

struct GroupedSimilarities {
  std::map<TagPair, std::vector<double>> groups;
  /// Tokens with no vector after lowercase fallback.
  std::size_t skipped_tokens = 0;
  std::size_t embedded_tokens = 0;

  bool empty() const noexcept { return groups.empty(); }
  bool operator==(const GroupedSimilarities&) const = default;
};

struct MatchOptions {
  DistanceMetric metric = DistanceMetric::Euclidean;
  /// Keep a mutual pair (i->j and j->i) only once per group. Off by default.
  bool dedupe_symmetric = false;
};

/// For every embedded token i and every tag t held by some other embedded
/// token, the minimum-distance target of tag t (smallest index on ties).
/// Records come out ordered by source index, then target tag.
std::vector<MatchRecord> match_records(const TaggedParagraph& p, const EmbeddingTable& table,
                                       DistanceMetric metric);

/// Buckets record distances by unordered tag pair.
GroupedSimilarities group_records(const std::vector<MatchRecord>& records, bool dedupe_symmetric = false);

GroupedSimilarities match_paragraph(const TaggedParagraph& p, const EmbeddingTable& table,
                                    const MatchOptions& options = {});

struct ParagraphMatch {
  std::string id;
  GroupedSimilarities similarities;
};

/// One result per paragraph in corpus order, independent of `jobs`.
std::vector<ParagraphMatch> match_corpus(const Corpus& corpus, const EmbeddingTable& table,
                                         const MatchOptions& options = {}, unsigned jobs = 1);

/// JSON report: per-paragraph skipped-token counts and the ids whose groups
/// came out empty.
std::string match_diagnostics_json(const std::vector<ParagraphMatch>& matches);

}  // namespace mtdetect
