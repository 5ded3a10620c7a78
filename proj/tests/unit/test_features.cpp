#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "doctest.h"
#include "mtdetect/features.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace mtdetect;

TEST_CASE("layout sizes") {
  const FeatureLayout penn(Tagset::penn_treebank());
  CHECK(penn.group_count() == 1035);
  CHECK(penn.total_len() == 2070);

  const FeatureLayout abc(Tagset({"A", "B", "C"}));
  CHECK(abc.group_count() == 6);
  CHECK(abc.total_len() == 12);
  const char* names[] = {"A-A", "A-B", "A-C", "B-B", "B-C", "C-C"};
  for (std::size_t g = 0; g < 6; ++g) {
    CHECK(abc.pair_name(g) == names[g]);
    CHECK(abc.index(abc.pair_at(g)) == g);
  }

  const FeatureLayout one(Tagset({"X"}));
  CHECK(one.group_count() == 1);
  CHECK(one.total_len() == 2);
}

TEST_CASE("layout index is the lexicographic enumeration for the 45-tag set") {
  const FeatureLayout a(Tagset::penn_treebank()), b(Tagset::penn_treebank());
  std::size_t expected = 0;
  for (TagId x = 0; x < 45; ++x)
    for (TagId y = x; y < 45; ++y) {
      CHECK(a.index({x, y}) == expected);
      CHECK(b.index({x, y}) == expected);
      ++expected;
    }
  CHECK_THROWS_AS(a.index({3, 2}), Error);
  CHECK_THROWS_AS(a.index({0, 45}), Error);
}

TEST_CASE("featurize: mean, population variance, presence") {
  const FeatureLayout layout(Tagset({"NN", "VB"}));
  GroupedSimilarities g;
  g.groups[{0, 0}] = {2.0, 4.0};
  g.groups[{0, 1}] = {5.0};
  const auto v = featurize(g, layout);
  const std::size_t nn = layout.index({0, 0}), nv = layout.index({0, 1}), vv = layout.index({1, 1});
  CHECK(v.values[nn] == 3.0);
  CHECK(v.values[3 + nn] == 1.0);
  CHECK(v.values[nv] == 5.0);
  CHECK(v.values[3 + nv] == 0.0);
  CHECK(v.present[nv]);
  CHECK_FALSE(v.present[vv]);
  CHECK(v.values[vv] == 0.0);
  CHECK(v.values[3 + vv] == 0.0);

  const auto empty = featurize(GroupedSimilarities{}, layout);
  CHECK(std::all_of(empty.values.begin(), empty.values.end(), [](double x) { return x == 0.0; }));
  CHECK(std::none_of(empty.present.begin(), empty.present.end(), [](bool b) { return b; }));

  GroupedSimilarities bad;
  bad.groups[{0, 7}] = {1.0};
  CHECK_THROWS_AS(featurize(bad, layout), Error);
}

TEST_CASE("featurize agrees with a two-pass computation and ignores order") {
  std::mt19937_64 rng(99);
  const FeatureLayout layout(Tagset({"A", "B", "C", "D"}));
  for (int trial = 0; trial < 200; ++trial) {
    GroupedSimilarities g;
    for (std::size_t k = 0; k < layout.group_count(); ++k) {
      if (bounded_random(rng, 3) == 0) continue;
      std::vector<double> xs(1 + bounded_random(rng, 300));
      const double scale = std::pow(10.0, static_cast<double>(bounded_random(rng, 5)) - 2.0);
      for (auto& x : xs) x = scale * std::abs(synth::gauss(rng) + 3.0);
      g.groups[layout.pair_at(k)] = xs;
    }
    const auto v = featurize(g, layout);
    std::size_t present = 0;
    for (const auto& [pair, xs] : g.groups) {
      const auto idx = layout.index(pair);
      const auto ref = oracle::two_pass(xs);
      CHECK(v.values[idx] == doctest::Approx(ref.mean).epsilon(1e-9));
      CHECK(v.values[layout.group_count() + idx] == doctest::Approx(ref.variance).epsilon(1e-9));
      CHECK(v.values[layout.group_count() + idx] >= 0.0);
      ++present;
    }
    CHECK(static_cast<std::size_t>(std::count(v.present.begin(), v.present.end(), true)) == present);

    auto shuffled = g;
    for (auto& [pair, xs] : shuffled.groups) seeded_shuffle(xs, rng);
    CHECK(featurize(shuffled, layout).values == v.values);
  }
}

TEST_CASE("feature set serialization") {
  const Tagset tags({"A", "B", "C"});
  const FeatureLayout layout(tags);
  Corpus corpus(tags);
  corpus.add({"p1", Label::Human, {{"x", 0}, {"y", 0}}, {}, std::string("pair1")});
  corpus.add({"p2", Label::Unlabeled, {{"x", 1}}, {}, {}});
  std::vector<ParagraphMatch> matches(2);
  matches[0].id = "p1";
  matches[0].similarities.groups[{0, 0}] = {0.1, 0.30000000000000004};
  matches[1].id = "p2";

  const auto fs = featurize_corpus(matches, layout, corpus, DistanceMetric::Cosine, "emb-1");
  CHECK(fs.header.group_count == 6);
  CHECK(fs.header.metric == "cosine");
  CHECK(fs.header.tagset_hash == tags.hash());
  REQUIRE(fs.rows.size() == 2);
  CHECK(fs.rows[0].pair == "pair1");
  CHECK(fs.rows[1].label == Label::Unlabeled);

  std::ostringstream a, b;
  write_feature_set(fs, a);
  write_feature_set(featurize_corpus(matches, layout, corpus, DistanceMetric::Cosine, "emb-1"), b);
  CHECK(a.str() == b.str());

  std::istringstream in(a.str());
  CHECK(read_feature_set(in) == fs);

  FeatureSet empty{fs.header, {}};
  std::ostringstream e;
  write_feature_set(empty, e);
  const std::string header_only = e.str();
  CHECK(std::count(header_only.begin(), header_only.end(), '\n') == 1);

  std::vector<ParagraphMatch> unknown(1);
  unknown[0].id = "nope";
  CHECK_THROWS_AS(featurize_corpus(unknown, layout, corpus, DistanceMetric::Cosine, "x"), Error);
}

TEST_CASE("appending checks the header binding") {
  const Tagset tags({"A", "B"});
  FeatureSet fs{make_header(FeatureLayout(tags), DistanceMetric::Euclidean, "emb"), {}};
  CoherenceVector v;
  v.paragraph_id = "r1";
  v.label = Label::Machine;
  v.values.assign(6, 1.5);
  v.present.assign(3, true);
  fs.rows.push_back(v);

  const auto path = std::filesystem::temp_directory_path() / "mtdetect_test_append.jsonl";
  std::filesystem::remove(path);
  append_feature_set(fs, path);
  fs.rows[0].paragraph_id = "r2";
  append_feature_set(fs, path);
  CHECK(load_feature_set(path).rows.size() == 2);

  FeatureSet other = fs;
  other.header.metric = "cosine";
  CHECK_THROWS_AS(append_feature_set(other, path), LayoutMismatch);
}

TEST_CASE("feature file errors") {
  std::istringstream no_header("");
  CHECK_THROWS_AS(read_feature_set(no_header), ParseError);
  std::istringstream short_row(
      R"({"schema_version":1,"tagset_hash":"h","metric":"euclidean","embedding_id":"e","group_count":1})"
      "\n"
      R"({"id":"a","label":"human","values":[1.0],"present":"AQ=="})"
      "\n");
  CHECK_THROWS_AS(read_feature_set(short_row), ParseError);
  std::istringstream bad_version(
      R"({"schema_version":9,"tagset_hash":"h","metric":"euclidean","embedding_id":"e","group_count":1})"
      "\n");
  CHECK_THROWS_AS(read_feature_set(bad_version), ParseError);
}
