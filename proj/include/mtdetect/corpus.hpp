#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "mtdetect/common.hpp"
#include "mtdetect/tagset.hpp"

namespace mtdetect {

struct Token {
  std::string surface;
  TagId tag = 0;

  bool operator==(const Token&) const = default;
};

struct TaggedParagraph {
  std::string id;
  Label label = Label::Unlabeled;
  std::vector<Token> tokens;
  std::optional<int> sentence_count;
  /// Shared by a human paragraph and the translation of its counterpart;
  /// cross-validation keeps both in one fold.
  std::optional<std::string> pair;

  bool operator==(const TaggedParagraph&) const = default;
};

struct CorpusStats {
  std::size_t human = 0;
  std::size_t machine = 0;
  std::size_t unlabeled = 0;
  /// Mean over paragraphs that carry a sentence count.
  std::optional<double> mean_sentences;
};

class Corpus {
 public:
  explicit Corpus(Tagset tagset) : tagset_(std::move(tagset)) {}

  const Tagset& tagset() const noexcept { return tagset_; }
  const std::vector<TaggedParagraph>& paragraphs() const noexcept { return paragraphs_; }
  std::size_t size() const noexcept { return paragraphs_.size(); }
  CorpusStats stats() const;

  /// Throws if the id is already present or a tag is out of range.
  void add(TaggedParagraph p);

  bool operator==(const Corpus& o) const { return tagset_ == o.tagset_ && paragraphs_ == o.paragraphs_; }

 private:
  Tagset tagset_;
  std::vector<TaggedParagraph> paragraphs_;
  std::unordered_set<std::string> ids_;
};

struct Rejection {
  std::string id;
  std::size_t line = 0;
  std::string reason;
};

/// Every input record lands in exactly one of `corpus` or `rejections`.
struct IngestResult {
  Corpus corpus;
  std::vector<Rejection> rejections;
  std::size_t records = 0;
};

/// Tagged JSON Lines: {"id", "label": "human"|"machine"|null,
/// "tokens": [{"t": surface, "p": tag}, ...]} with optional "sentences"
/// and "pair". Syntax errors and duplicate ids throw ParseError; records
/// with unknown tags or no tokens are rejected.
IngestResult load_corpus(const std::filesystem::path& path, const Tagset& tagset);
IngestResult read_corpus(std::istream& in, const Tagset& tagset);

void write_corpus(const Corpus& corpus, std::ostream& out);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Tagger process exited nonzero.
class TaggerError : public Error {
 public:
  using Error::Error;
};

/// Raw JSON Lines {"id", "label", "text"} piped paragraph by paragraph
/// through `tagger_cmd` (run by /bin/sh). The command reads text on stdin
/// and prints one `surface<TAB>tag` per line; blank lines separate
/// sentences and determine the sentence count.
IngestResult tag_with_external(const std::filesystem::path& path, const std::string& tagger_cmd,
                               const Tagset& tagset, unsigned jobs = 1);

/// Parses one paragraph worth of tagger output. Returns the rejection
/// reason instead of throwing.
struct TaggerParse {
  std::vector<Token> tokens;
  int sentences = 0;
  std::optional<std::string> error;
};
TaggerParse parse_tagger_output(const std::string& output, const Tagset& tagset);

}  // namespace mtdetect
