#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mtdetect {

using TagId = std::uint16_t;

/// Ordered list of distinct POS tags. Tag order defines the feature layout.
class Tagset {
 public:
  explicit Tagset(std::vector<std::string> tags);

  /// The 45-tag Penn Treebank set, punctuation tags included, in the order
  /// used for feature layouts. Brackets use the Stanford spelling -LRB-/-RRB-.
  static const Tagset& penn_treebank();
  /// One tag per line; blank lines and lines starting with '#' followed by a
  /// space are skipped.
  static Tagset from_file(const std::filesystem::path& path);

  std::size_t size() const noexcept { return tags_.size(); }
  const std::vector<std::string>& tags() const noexcept { return tags_; }
  const std::string& name(TagId id) const { return tags_.at(id); }
  std::optional<TagId> find(std::string_view tag) const;
  bool canonical() const noexcept { return canonical_; }
  /// FNV-1a over the newline-joined tag list.
  const std::string& hash() const noexcept { return hash_; }

  bool operator==(const Tagset& other) const { return tags_ == other.tags_; }

 private:
  std::vector<std::string> tags_;
  std::unordered_map<std::string, TagId> index_;
  bool canonical_ = false;
  std::string hash_;
};

}  // namespace mtdetect
