#include "mtdetect/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "json.hpp"

namespace mtdetect {

using nlohmann::json;

FeatureLayout::FeatureLayout(Tagset tagset)
    : tagset_(std::move(tagset)), groups_(tagset_.size() * (tagset_.size() + 1) / 2) {
  pairs_.reserve(groups_);
  const auto n = static_cast<TagId>(tagset_.size());
  for (TagId a = 0; a < n; ++a)
    for (TagId b = a; b < n; ++b) pairs_.push_back({a, b});
}

std::size_t FeatureLayout::index(TagPair p) const {
  const std::size_t n = tagset_.size();
  if (p.a > p.b || p.b >= n) throw Error("tag pair outside feature layout");
  // Rows before a contribute n, n-1, ..., n-a+1 pairs.
  return p.a * n - p.a * (p.a - 1) / 2 + (p.b - p.a);
}

TagPair FeatureLayout::pair_at(std::size_t g) const { return pairs_.at(g); }

std::string FeatureLayout::pair_name(std::size_t g) const {
  const TagPair p = pair_at(g);
  return tagset_.name(p.a) + "-" + tagset_.name(p.b);
}

CoherenceVector featurize(const GroupedSimilarities& g, const FeatureLayout& layout) {
  const std::size_t G = layout.group_count();
  CoherenceVector v;
  v.values.assign(2 * G, 0.0);
  v.present.assign(G, false);
  std::vector<double> sorted;
  for (const auto& [pair, dists] : g.groups) {
    const std::size_t idx = layout.index(pair);
    if (dists.empty()) continue;
    sorted.assign(dists.begin(), dists.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double sum = 0;
    for (double x : sorted) sum += x;
    const double mean = sum / n;
    double ss = 0;
    for (double x : sorted) ss += (x - mean) * (x - mean);
    v.values[idx] = mean;
    v.values[G + idx] = ss / n;
    v.present[idx] = true;
  }
  return v;
}

FeatureHeader make_header(const FeatureLayout& layout, DistanceMetric metric, const std::string& embedding_id) {
  return {1, layout.tagset().hash(), std::string(metric_name(metric)), embedding_id, layout.group_count(),
          layout.tagset().tags()};
}

FeatureSet featurize_corpus(const std::vector<ParagraphMatch>& matches, const FeatureLayout& layout,
                            const Corpus& corpus, DistanceMetric metric, const std::string& embedding_id) {
  std::unordered_map<std::string, const TaggedParagraph*> by_id;
  for (const auto& p : corpus.paragraphs()) by_id.emplace(p.id, &p);
  FeatureSet fs{make_header(layout, metric, embedding_id), {}};
  fs.rows.reserve(matches.size());
  for (const auto& m : matches) {
    auto it = by_id.find(m.id);
    if (it == by_id.end()) throw Error("match for unknown paragraph '" + m.id + "'");
    CoherenceVector v = featurize(m.similarities, layout);
    v.paragraph_id = m.id;
    v.label = it->second->label;
    v.pair = it->second->pair;
    fs.rows.push_back(std::move(v));
  }
  return fs;
}

namespace {

json header_json(const FeatureHeader& h) {
  return {{"schema_version", h.schema_version}, {"tagset_hash", h.tagset_hash}, {"metric", h.metric},
          {"embedding_id", h.embedding_id},     {"group_count", h.group_count}, {"tags", h.tags}};
}

std::string encode_mask(const std::vector<bool>& present) {
  std::vector<std::uint8_t> bytes((present.size() + 7) / 8, 0);
  for (std::size_t g = 0; g < present.size(); ++g)
    if (present[g]) bytes[g / 8] |= static_cast<std::uint8_t>(1u << (g % 8));
  return base64_encode(bytes);
}

void write_rows(const std::vector<CoherenceVector>& rows, std::ostream& out) {
  for (const auto& r : rows) {
    json rec = {{"id", r.paragraph_id},
                {"label", r.label == Label::Unlabeled ? json(nullptr) : json(std::string(label_name(r.label)))},
                {"values", r.values},
                {"present", encode_mask(r.present)}};
    if (r.pair) rec["pair"] = *r.pair;
    out << rec.dump() << '\n';
  }
}

FeatureHeader parse_header(const json& j) {
  FeatureHeader h;
  try {
    h.schema_version = j.at("schema_version").get<int>();
    h.tagset_hash = j.at("tagset_hash").get<std::string>();
    h.metric = j.at("metric").get<std::string>();
    h.embedding_id = j.at("embedding_id").get<std::string>();
    h.group_count = j.at("group_count").get<std::size_t>();
    if (auto t = j.find("tags"); t != j.end()) h.tags = t->get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad feature header: ") + e.what(), 1);
  }
  if (h.schema_version != 1)
    throw ParseError("unsupported feature schema_version " + std::to_string(h.schema_version), 1);
  if (!h.tags.empty() && h.tags.size() * (h.tags.size() + 1) / 2 != h.group_count)
    throw ParseError("feature header tags disagree with group_count", 1);
  return h;
}

}  // namespace

void write_feature_set(const FeatureSet& fs, std::ostream& out) {
  out << header_json(fs.header).dump() << '\n';
  write_rows(fs.rows, out);
}

void save_feature_set(const FeatureSet& fs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  write_feature_set(fs, out);
  if (!out) throw IoError("write error on '" + path.string() + "'");
}

FeatureSet read_feature_set(std::istream& in) {
  FeatureSet fs;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), lineno);
    }
    if (!have_header) {
      fs.header = parse_header(j);
      have_header = true;
      continue;
    }
    CoherenceVector v;
    try {
      v.paragraph_id = j.at("id").get<std::string>();
      const auto& l = j.at("label");
      v.label = l.is_null() ? Label::Unlabeled : parse_label(l.get<std::string>());
      v.values = j.at("values").get<std::vector<double>>();
      const auto bytes = base64_decode(j.at("present").get<std::string>());
      if (bytes.size() != (fs.header.group_count + 7) / 8) throw Error("presence mask has wrong length");
      v.present.resize(fs.header.group_count);
      for (std::size_t g = 0; g < fs.header.group_count; ++g) v.present[g] = (bytes[g / 8] >> (g % 8)) & 1u;
      if (auto p = j.find("pair"); p != j.end() && !p->is_null()) v.pair = p->get<std::string>();
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad feature row: ") + e.what(), lineno);
    } catch (const Error& e) {
      throw ParseError(std::string("bad feature row: ") + e.what(), lineno);
    }
    if (v.values.size() != fs.total_len())
      throw ParseError("row has " + std::to_string(v.values.size()) + " values, expected " +
                           std::to_string(fs.total_len()),
                       lineno);
    fs.rows.push_back(std::move(v));
  }
  if (!have_header) throw ParseError("feature file has no header", 0);
  return fs;
}

FeatureSet load_feature_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open feature file '" + path.string() + "'");
  return read_feature_set(in);
}

void append_feature_set(const FeatureSet& fs, const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    save_feature_set(fs, path);
    return;
  }
  FeatureHeader existing;
  {
    std::ifstream in(path, std::ios::binary);
    std::string first;
    if (!std::getline(in, first)) throw ParseError("feature file '" + path.string() + "' has no header", 0);
    try {
      existing = parse_header(json::parse(first));
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), 1);
    }
  }
  if (!existing.compatible(fs.header))
    throw LayoutMismatch("cannot append to '" + path.string() + "': header binds a different tagset, metric or embedding");
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to '" + path.string() + "'");
  write_rows(fs.rows, out);
}

}  // namespace mtdetect
