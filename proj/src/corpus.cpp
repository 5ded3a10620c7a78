#include "mtdetect/corpus.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace mtdetect {

using nlohmann::json;

CorpusStats Corpus::stats() const {
  CorpusStats s;
  double sentences = 0;
  std::size_t with_sentences = 0;
  for (const auto& p : paragraphs_) {
    switch (p.label) {
      case Label::Human: ++s.human; break;
      case Label::Machine: ++s.machine; break;
      case Label::Unlabeled: ++s.unlabeled; break;
    }
    if (p.sentence_count) {
      sentences += *p.sentence_count;
      ++with_sentences;
    }
  }
  if (with_sentences) s.mean_sentences = sentences / static_cast<double>(with_sentences);
  return s;
}

void Corpus::add(TaggedParagraph p) {
  for (const auto& t : p.tokens)
    if (t.tag >= tagset_.size()) throw Error("paragraph '" + p.id + "': tag id out of range");
  if (!ids_.insert(p.id).second) throw Error("duplicate paragraph id '" + p.id + "'");
  paragraphs_.push_back(std::move(p));
}

namespace {

Label label_from_json(const json& j) {
  if (j.is_null()) return Label::Unlabeled;
  if (!j.is_string()) throw Error("label must be a string or null");
  return parse_label(j.get<std::string>());
}

json label_to_json(Label l) {
  if (l == Label::Unlabeled) return nullptr;
  return std::string(label_name(l));
}

struct RecordHead {
  std::string id;
  Label label = Label::Unlabeled;
  std::optional<int> sentences;
  std::optional<std::string> pair;
};

RecordHead parse_head(const json& rec) {
  if (!rec.is_object()) throw Error("record is not a JSON object");
  RecordHead h;
  auto id = rec.find("id");
  if (id == rec.end() || !id->is_string()) throw Error("missing string field 'id'");
  h.id = id->get<std::string>();
  if (auto l = rec.find("label"); l != rec.end()) h.label = label_from_json(*l);
  if (auto s = rec.find("sentences"); s != rec.end() && !s->is_null()) {
    if (!s->is_number_integer() || s->get<int>() <= 0) throw Error("'sentences' must be a positive integer");
    h.sentences = s->get<int>();
  }
  if (auto pr = rec.find("pair"); pr != rec.end() && !pr->is_null()) {
    if (!pr->is_string()) throw Error("'pair' must be a string");
    h.pair = pr->get<std::string>();
  }
  return h;
}

// Reads JSONL records, handing each parsed object and its line number to fn.
template <typename Fn>
void for_each_record(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), lineno);
    }
    fn(rec, lineno);
  }
}

}  // namespace

IngestResult read_corpus(std::istream& in, const Tagset& tagset) {
  IngestResult result{Corpus(tagset), {}, 0};
  std::unordered_set<std::string> seen;
  for_each_record(in, [&](const json& rec, std::size_t lineno) {
    ++result.records;
    RecordHead head;
    try {
      head = parse_head(rec);
    } catch (const Error& e) {
      throw ParseError(e.what(), lineno);
    }
    if (!seen.insert(head.id).second) throw ParseError("duplicate id '" + head.id + "'", lineno);

    auto toks = rec.find("tokens");
    if (toks == rec.end() || !toks->is_array()) throw ParseError("missing array field 'tokens'", lineno);
    TaggedParagraph p{head.id, head.label, {}, head.sentences, head.pair};
    std::optional<std::string> reason;
    p.tokens.reserve(toks->size());
    for (const auto& t : *toks) {
      auto surface = t.find("t");
      auto tag = t.find("p");
      if (!t.is_object() || surface == t.end() || tag == t.end() || !surface->is_string() || !tag->is_string())
        throw ParseError("token entries must be objects {\"t\": string, \"p\": string}", lineno);
      auto id = tagset.find(tag->get_ref<const std::string&>());
      if (!id) {
        reason = "unknown tag " + tag->get<std::string>();
        break;
      }
      p.tokens.push_back({surface->get<std::string>(), *id});
    }
    if (!reason && p.tokens.empty()) reason = "no tokens";
    if (reason)
      result.rejections.push_back({head.id, lineno, *reason});
    else
      result.corpus.add(std::move(p));
  });
  return result;
}

IngestResult load_corpus(const std::filesystem::path& path, const Tagset& tagset) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file '" + path.string() + "'");
  return read_corpus(in, tagset);
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  const auto& tags = corpus.tagset();
  for (const auto& p : corpus.paragraphs()) {
    json rec = json::object();
    rec["id"] = p.id;
    rec["label"] = label_to_json(p.label);
    json toks = json::array();
    for (const auto& t : p.tokens) toks.push_back({{"t", t.surface}, {"p", tags.name(t.tag)}});
    rec["tokens"] = std::move(toks);
    if (p.sentence_count) rec["sentences"] = *p.sentence_count;
    if (p.pair) rec["pair"] = *p.pair;
    out << rec.dump() << '\n';
  }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  write_corpus(corpus, out);
  if (!out) throw IoError("write error on '" + path.string() + "'");
}

TaggerParse parse_tagger_output(const std::string& output, const Tagset& tagset) {
  TaggerParse r;
  std::istringstream in(output);
  std::string line;
  bool in_sentence = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      in_sentence = false;
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      r.error = "malformed tagger line '" + line + "'";
      return r;
    }
    const std::string tag = line.substr(tab + 1);
    auto id = tagset.find(tag);
    if (!id) {
      r.error = "unknown tag " + tag;
      return r;
    }
    if (!in_sentence) {
      ++r.sentences;
      in_sentence = true;
    }
    r.tokens.push_back({line.substr(0, tab), *id});
  }
  if (r.tokens.empty()) r.error = "no tokens";
  return r;
}

namespace {

class TempFile {
 public:
  TempFile() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "mtdetect-XXXXXX").string();
    const int fd = ::mkstemp(tmpl.data());
    if (fd < 0) throw IoError("cannot create temporary file");
    ::close(fd);
    path_ = tmpl;
  }
  TempFile(const TempFile&) = delete;
  TempFile& operator=(const TempFile&) = delete;
  ~TempFile() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::string shell_quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) {
    if (c == '\'')
      q += "'\\''";
    else
      q += c;
  }
  return q + "'";
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TaggerRun {
  int status = 0;
  std::string out;
  std::string err;
};

TaggerRun run_tagger(const std::string& cmd, const std::string& text) {
  TempFile input, errors;
  {
    std::ofstream f(input.path(), std::ios::binary);
    f << text;
    if (!text.empty() && text.back() != '\n') f << '\n';
  }
  const std::string full =
      "(" + cmd + ") < " + shell_quote(input.path().string()) + " 2> " + shell_quote(errors.path().string());
  FILE* pipe = ::popen(full.c_str(), "r");
  if (!pipe) throw TaggerError("cannot start tagger command");
  TaggerRun r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.status = WIFEXITED(status) ? WEXITSTATUS(status) : 128;
  r.err = read_file(errors.path());
  return r;
}

}  // namespace

IngestResult tag_with_external(const std::filesystem::path& path, const std::string& tagger_cmd,
                               const Tagset& tagset, unsigned jobs) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open raw text file '" + path.string() + "'");

  struct RawRecord {
    RecordHead head;
    std::size_t line;
    std::string text;
  };
  std::vector<RawRecord> raw;
  std::unordered_set<std::string> seen;
  for_each_record(in, [&](const json& rec, std::size_t lineno) {
    RawRecord r;
    try {
      r.head = parse_head(rec);
    } catch (const Error& e) {
      throw ParseError(e.what(), lineno);
    }
    if (!seen.insert(r.head.id).second) throw ParseError("duplicate id '" + r.head.id + "'", lineno);
    auto text = rec.find("text");
    if (text == rec.end() || !text->is_string()) throw ParseError("missing string field 'text'", lineno);
    r.line = lineno;
    r.text = text->get<std::string>();
    raw.push_back(std::move(r));
  });

  std::vector<TaggerParse> parsed(raw.size());
  std::vector<std::string> failures(raw.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < raw.size();) {
      if (raw[i].text.find_first_not_of(" \t\r\n") == std::string::npos) {
        parsed[i].error = "no tokens";
        continue;
      }
      TaggerRun run = run_tagger(tagger_cmd, raw[i].text);
      if (run.status != 0) {
        failures[i] = "tagger exited with status " + std::to_string(run.status) + " on record '" +
                      raw[i].head.id + "': " + run.err;
        continue;
      }
      parsed[i] = parse_tagger_output(run.out, tagset);
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < std::max(1u, jobs); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  IngestResult result{Corpus(tagset), {}, raw.size()};
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!failures[i].empty()) throw TaggerError(failures[i]);
    auto& r = raw[i];
    if (parsed[i].error) {
      result.rejections.push_back({r.head.id, r.line, *parsed[i].error});
      continue;
    }
    result.corpus.add({r.head.id, r.head.label, std::move(parsed[i].tokens), parsed[i].sentences, r.head.pair});
  }
  return result;
}

}  // namespace mtdetect
