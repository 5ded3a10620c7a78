#include "mtdetect/tagset.hpp"

#include <fstream>

#include "mtdetect/common.hpp"

namespace mtdetect {

namespace {

const std::vector<std::string>& penn_tags() {
  static const std::vector<std::string> tags = {
      "CC",  "CD",  "DT",  "EX",  "FW",  "IN",  "JJ",  "JJR",  "JJS", "LS",  "MD",  "NN",
      "NNS", "NNP", "NNPS", "PDT", "POS", "PRP", "PRP$", "RB",  "RBR", "RBS", "RP",  "SYM",
      "TO",  "UH",  "VB",  "VBD", "VBG", "VBN", "VBP", "VBZ", "WDT", "WP",  "WP$", "WRB",
      "#",   "$",   ".",   ",",   ":",   "-LRB-", "-RRB-", "``", "''"};
  return tags;
}

}  // namespace

Tagset::Tagset(std::vector<std::string> tags) : tags_(std::move(tags)) {
  if (tags_.empty()) throw Error("tagset is empty");
  if (tags_.size() > 0xFFFF) throw Error("tagset too large");
  Fnv1a h;
  for (std::size_t i = 0; i < tags_.size(); ++i) {
    if (tags_[i].empty()) throw Error("tagset contains an empty tag");
    if (!index_.emplace(tags_[i], static_cast<TagId>(i)).second)
      throw Error("tagset contains duplicate tag '" + tags_[i] + "'");
    h.update(tags_[i]);
    h.update("\n");
  }
  hash_ = h.hex();
  canonical_ = tags_ == penn_tags();
}

const Tagset& Tagset::penn_treebank() {
  static const Tagset ts(penn_tags());
  return ts;
}

Tagset Tagset::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open tagset file '" + path.string() + "'");
  std::vector<std::string> tags;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    std::size_t b = line.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    line.erase(0, b);
    if (line.rfind("# ", 0) == 0) continue;
    tags.push_back(line);
  }
  return Tagset(std::move(tags));
}

std::optional<TagId> Tagset::find(std::string_view tag) const {
  if (auto it = index_.find(std::string(tag)); it != index_.end()) return it->second;
  return std::nullopt;
}

}  // namespace mtdetect
