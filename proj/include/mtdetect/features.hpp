#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mtdetect/corpus.hpp"
#include "mtdetect/matcher.hpp"

namespace mtdetect {

/// Enumerates unordered tag pairs (a, b), a <= b, lexicographically in
/// tagset order. Means occupy [0, G), variances [G, 2G).
class FeatureLayout {
 public:
  explicit FeatureLayout(Tagset tagset);

  const Tagset& tagset() const noexcept { return tagset_; }
  std::size_t group_count() const noexcept { return groups_; }
  std::size_t total_len() const noexcept { return 2 * groups_; }

  std::size_t index(TagPair p) const;
  TagPair pair_at(std::size_t g) const;
  /// "TO-:" style label.
  std::string pair_name(std::size_t g) const;

 private:
  Tagset tagset_;
  std::size_t groups_;
  std::vector<TagPair> pairs_;
};

inline FeatureLayout build_layout(const Tagset& tagset) { return FeatureLayout(tagset); }

struct CoherenceVector {
  std::string paragraph_id;
  Label label = Label::Unlabeled;
  std::optional<std::string> pair;
  std::vector<double> values;
  /// One flag per group; false for groups that were empty before zero-fill.
  std::vector<bool> present;

  bool operator==(const CoherenceVector&) const = default;
};

/// Mean and population variance per group. Values are summed in sorted
/// order, so the result does not depend on the order of a group's entries.
CoherenceVector featurize(const GroupedSimilarities& g, const FeatureLayout& layout);

struct FeatureHeader {
  int schema_version = 1;
  std::string tagset_hash;
  std::string metric;
  std::string embedding_id;
  std::size_t group_count = 0;
  std::vector<std::string> tags;

  bool operator==(const FeatureHeader&) const = default;
  /// Same tagset, metric and embedding.
  bool compatible(const FeatureHeader& o) const {
    return tagset_hash == o.tagset_hash && metric == o.metric && embedding_id == o.embedding_id &&
           group_count == o.group_count;
  }
};

struct FeatureSet {
  FeatureHeader header;
  std::vector<CoherenceVector> rows;

  std::size_t total_len() const noexcept { return 2 * header.group_count; }
  bool operator==(const FeatureSet&) const = default;
};

FeatureHeader make_header(const FeatureLayout& layout, DistanceMetric metric, const std::string& embedding_id);

/// Pairs each match with its paragraph's label and pair id from `corpus`.
FeatureSet featurize_corpus(const std::vector<ParagraphMatch>& matches, const FeatureLayout& layout,
                            const Corpus& corpus, DistanceMetric metric, const std::string& embedding_id);

/// JSON Lines: header record, then {"id","label","values","present"} rows;
/// `present` is a base64 bitmask, group g at bit (g % 8) of byte g / 8.
void write_feature_set(const FeatureSet& fs, std::ostream& out);
void save_feature_set(const FeatureSet& fs, const std::filesystem::path& path);
FeatureSet read_feature_set(std::istream& in);
FeatureSet load_feature_set(const std::filesystem::path& path);
/// Appends rows to an existing file; its header must match `fs.header`.
void append_feature_set(const FeatureSet& fs, const std::filesystem::path& path);

}  // namespace mtdetect
