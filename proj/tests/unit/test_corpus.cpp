#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "mtdetect/corpus.hpp"

using namespace mtdetect;
namespace fs = std::filesystem;

namespace {

IngestResult parse(const std::string& text, const Tagset& ts = Tagset::penn_treebank()) {
  std::istringstream in(text);
  return read_corpus(in, ts);
}

fs::path write_temp(const std::string& name, const std::string& content) {
  const fs::path p = fs::temp_directory_path() / ("mtdetect_test_" + name);
  std::ofstream(p, std::ios::binary) << content;
  return p;
}

const std::string kTagger = std::string("python3 ") + MTDETECT_FIXTURES + "/demo_tagger.py";

}  // namespace

TEST_CASE("penn treebank tagset has 45 tags including punctuation") {
  const auto& ts = Tagset::penn_treebank();
  CHECK(ts.size() == 45);
  CHECK(ts.canonical());
  CHECK(ts.find(":"));
  CHECK(ts.find("TO"));
  CHECK(ts.find("WP"));
  CHECK_FALSE(ts.find("ZZ"));
  CHECK_FALSE(Tagset({"A", "B"}).canonical());
  CHECK_THROWS_AS(Tagset({"A", "A"}), Error);
  CHECK_THROWS_AS(Tagset({"A", ""}), Error);
  CHECK_THROWS_AS(Tagset(std::vector<std::string>{}), Error);
}

TEST_CASE("tagset files") {
  const auto p = write_temp("tags.txt", "# custom tags\nNN\n\nVB\n#\n");
  const auto ts = Tagset::from_file(p);
  CHECK(ts.tags() == std::vector<std::string>{"NN", "VB", "#"});
  CHECK(ts.hash() != Tagset::penn_treebank().hash());
}

TEST_CASE("load a single tagged record") {
  auto r = parse(R"({"id":"x","label":"human","tokens":[{"t":"computer","p":"NN"}]})"
                 "\n");
  CHECK(r.records == 1);
  CHECK(r.rejections.empty());
  REQUIRE(r.corpus.size() == 1);
  CHECK(r.corpus.stats().human == 1);
  CHECK(r.corpus.paragraphs()[0].tokens[0].surface == "computer");
}

TEST_CASE("unknown tags and empty token lists are rejected per record") {
  auto r = parse(R"({"id":"a","label":"human","tokens":[{"t":"x","p":"ZZ"}]})"
                 "\n"
                 R"({"id":"b","label":"machine","tokens":[{"t":"x","p":"NN"}]})"
                 "\n"
                 R"({"id":"c","label":null,"tokens":[]})"
                 "\n");
  CHECK(r.records == 3);
  REQUIRE(r.rejections.size() == 2);
  CHECK(r.rejections[0].id == "a");
  CHECK(r.rejections[0].reason == "unknown tag ZZ");
  CHECK(r.rejections[0].line == 1);
  CHECK(r.rejections[1].reason == "no tokens");
  CHECK(r.corpus.size() + r.rejections.size() == r.records);
}

TEST_CASE("structural errors abort with a line number") {
  try {
    parse("{\"id\":\"a\",\"tokens\":[{\"t\":\"x\",\"p\":\"NN\"}]}\n{not json\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse("{\"id\":\"a\",\"tokens\":[{\"t\":\"x\",\"p\":\"NN\"}]}\n"
                        "{\"id\":\"a\",\"tokens\":[{\"t\":\"y\",\"p\":\"NN\"}]}\n"),
                  ParseError);
  CHECK_THROWS_AS(parse("{\"tokens\":[]}\n"), ParseError);
  CHECK_THROWS_AS(parse("{\"id\":\"a\",\"label\":\"robot\",\"tokens\":[]}\n"), ParseError);
  CHECK_THROWS_AS(load_corpus("/nonexistent/corpus.jsonl", Tagset::penn_treebank()), IoError);
}

TEST_CASE("stats report mean sentence count") {
  auto r = parse(R"({"id":"a","label":"human","sentences":14,"tokens":[{"t":"x","p":"NN"}]})"
                 "\n"
                 R"({"id":"b","label":"machine","sentences":15,"tokens":[{"t":"x","p":"NN"}]})"
                 "\n"
                 R"({"id":"c","label":null,"tokens":[{"t":"x","p":"NN"}]})"
                 "\n");
  const auto s = r.corpus.stats();
  CHECK(s.human == 1);
  CHECK(s.machine == 1);
  CHECK(s.unlabeled == 1);
  REQUIRE(s.mean_sentences);
  CHECK(*s.mean_sentences == doctest::Approx(14.5));
}

TEST_CASE("corpus write/read round trip on random corpora") {
  std::mt19937_64 rng(5);
  const auto& ts = Tagset::penn_treebank();
  for (int trial = 0; trial < 20; ++trial) {
    Corpus c(ts);
    const auto n = bounded_random(rng, 8);
    for (std::uint64_t i = 0; i < n; ++i) {
      TaggedParagraph p;
      p.id = "p" + std::to_string(i) + "\"q\\";
      p.label = static_cast<Label>(static_cast<int>(bounded_random(rng, 3)) - 1);
      const auto len = 1 + bounded_random(rng, 10);
      for (std::uint64_t k = 0; k < len; ++k)
        p.tokens.push_back({"tok\xc3\xa9" + std::to_string(rng() % 100), static_cast<TagId>(rng() % ts.size())});
      if (rng() % 2) p.sentence_count = static_cast<int>(1 + rng() % 20);
      if (rng() % 2) p.pair = "pair" + std::to_string(i);
      c.add(std::move(p));
    }
    std::ostringstream out;
    write_corpus(c, out);
    std::istringstream in(out.str());
    auto back = read_corpus(in, ts);
    CHECK(back.rejections.empty());
    CHECK(back.corpus == c);
  }
}

TEST_CASE("tagger output parsing") {
  const auto& ts = Tagset::penn_treebank();
  auto ok = parse_tagger_output("I\tPRP\nrun\tVBP\n.\t.\n\n", ts);
  REQUIRE_FALSE(ok.error);
  REQUIRE(ok.tokens.size() == 3);
  CHECK(ts.name(ok.tokens[0].tag) == "PRP");
  CHECK(ts.name(ok.tokens[1].tag) == "VBP");
  CHECK(ts.name(ok.tokens[2].tag) == ".");
  CHECK(ok.sentences == 1);

  auto two = parse_tagger_output("A\tDT\n\nB\tNN\n", ts);
  CHECK(two.sentences == 2);

  auto bad = parse_tagger_output("run\n", ts);
  REQUIRE(bad.error);
  CHECK(*bad.error == "malformed tagger line 'run'");
  CHECK(*parse_tagger_output("x\tZZ\n", ts).error == "unknown tag ZZ");
  CHECK(*parse_tagger_output("\n\n", ts).error == "no tokens");
}

TEST_CASE("external tagger pipeline") {
  const auto raw = write_temp("raw.jsonl",
                              R"({"id":"r1","label":"human","text":"I run ."})"
                              "\n"
                              R"({"id":"r2","label":"machine","text":""})"
                              "\n"
                              R"({"id":"r3","label":null,"text":"We ran. They run quickly!","pair":"p3"})"
                              "\n");
  for (unsigned jobs : {1u, 3u}) {
    auto r = tag_with_external(raw, kTagger, Tagset::penn_treebank(), jobs);
    CHECK(r.records == 3);
    REQUIRE(r.corpus.size() == 2);
    const auto& p1 = r.corpus.paragraphs()[0];
    CHECK(p1.id == "r1");
    REQUIRE(p1.tokens.size() == 3);
    CHECK(r.corpus.tagset().name(p1.tokens[1].tag) == "VBP");
    CHECK(p1.sentence_count == 1);
    CHECK(r.corpus.paragraphs()[1].sentence_count == 2);
    CHECK(r.corpus.paragraphs()[1].pair == "p3");
    REQUIRE(r.rejections.size() == 1);
    CHECK(r.rejections[0].id == "r2");
    CHECK(r.rejections[0].reason == "no tokens");
  }

  auto bad = tag_with_external(raw, kTagger + " --emit-bad", Tagset::penn_treebank());
  CHECK(bad.corpus.size() == 0);
  CHECK(bad.rejections.size() == 3);
  CHECK(bad.rejections[0].reason == "malformed tagger line 'run'");

  try {
    tag_with_external(raw, kTagger + " --fail", Tagset::penn_treebank());
    FAIL("expected TaggerError");
  } catch (const TaggerError& e) {
    CHECK(std::string(e.what()).find("forced failure") != std::string::npos);
  }
}
