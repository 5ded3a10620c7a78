#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "mtdetect/matcher.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace mtdetect;

namespace {

EmbeddingTable toy_table() {
  EmbeddingTable t(2, "toy");
  const float a[2] = {0, 0}, b[2] = {3, 4}, c[2] = {0, 1};
  t.insert("a", a);
  t.insert("b", b);
  t.insert("c", c);
  return t;
}

std::map<TagPair, std::vector<double>> sorted_groups(GroupedSimilarities g) {
  for (auto& [k, v] : g.groups) std::sort(v.begin(), v.end());
  return g.groups;
}

}  // namespace

TEST_CASE("toy paragraph: both directions land in the unordered group") {
  const TagId NN = 0, VB = 1;
  TaggedParagraph p{"toy", Label::Human, {{"a", NN}, {"b", NN}, {"c", VB}}, {}, {}};
  const auto table = toy_table();
  const auto g = match_paragraph(p, table);

  // Expected values from the brute-force enumeration of ordered (i, t) minima:
  // a->NN b 5, a->VB c 1, b->NN a 5, b->VB c sqrt(18), c->NN a 1.
  const auto expected = oracle::brute_force_groups(p, table, DistanceMetric::Euclidean);
  CHECK(sorted_groups(g) == expected);

  const auto& nn = g.groups.at(TagPair::of(NN, NN));
  CHECK(nn == std::vector<double>{5.0, 5.0});
  auto nv = g.groups.at(TagPair::of(VB, NN));
  std::sort(nv.begin(), nv.end());
  REQUIRE(nv.size() == 3);
  CHECK(nv[0] == 1.0);
  CHECK(nv[1] == 1.0);
  CHECK(nv[2] == doctest::Approx(std::sqrt(18.0)).epsilon(1e-15));
  CHECK(g.groups.size() == 2);
}

TEST_CASE("duplicate surface words match at distance zero") {
  EmbeddingTable t(2, "fig");
  const float computer[2] = {0, 0}, idea[2] = {5.2f, 0};
  t.insert("computer", computer);
  t.insert("idea", idea);
  TaggedParagraph p{"dup", Label::Human, {{"computer", 0}, {"idea", 0}, {"computer", 0}}, {}, {}};
  const auto recs = match_records(p, t, DistanceMetric::Euclidean);
  REQUIRE(recs.size() == 3);
  CHECK(recs[0].source_index == 0);
  CHECK(recs[0].target_index == 2);
  CHECK(recs[0].dist == 0.0);
  // idea's nearest NN is the first computer (tie with the second, smaller index wins).
  CHECK(recs[1].target_index == 0);
  CHECK(recs[1].dist == doctest::Approx(5.2).epsilon(1e-6));
}

TEST_CASE("degenerate paragraphs give empty groups") {
  const auto table = toy_table();
  TaggedParagraph one{"one", Label::Human, {{"a", 0}}, {}, {}};
  CHECK(match_paragraph(one, table).empty());
  TaggedParagraph oov{"oov", Label::Human, {{"a", 0}, {"zzz", 0}, {"yyy", 1}}, {}, {}};
  const auto g = match_paragraph(oov, table);
  CHECK(g.empty());
  CHECK(g.skipped_tokens == 2);
  CHECK(g.embedded_tokens == 1);
}

TEST_CASE("cosine with a zero vector is reported") {
  const auto table = toy_table();
  TaggedParagraph p{"z", Label::Human, {{"a", 0}, {"b", 0}}, {}, {}};
  CHECK_THROWS_AS(match_paragraph(p, table, {DistanceMetric::Cosine, false}), DegenerateEmbedding);
}

TEST_CASE("oracle equivalence on random paragraphs with frequent ties") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 150; ++trial) {
    const auto metric = trial % 2 ? DistanceMetric::Cosine : DistanceMetric::Euclidean;
    const std::size_t dim = 2 + bounded_random(rng, 3);
    const auto table = synth::integer_table(rng, 12, dim, 3, metric == DistanceMetric::Cosine ? 1 : 0);
    const std::size_t n = 5 + bounded_random(rng, 46);
    const std::size_t tags = 3 + bounded_random(rng, 8);
    const auto p = synth::random_paragraph(rng, table, n, tags);

    const auto recs = match_records(p, table, metric);
    const auto g = match_paragraph(p, table, {metric, false});
    CHECK(sorted_groups(g) == oracle::brute_force_groups(p, table, metric));

    std::size_t skipped = 0;
    for (const auto& t : p.tokens) skipped += !table.lookup(t.surface);
    CHECK(g.skipped_tokens == skipped);

    for (const auto& r : recs) {
      CHECK(r.source_index != r.target_index);
      CHECK(std::isfinite(r.dist));
      CHECK(r.dist >= 0.0);
      CHECK(r.target_index == oracle::brute_force_target(p, table, metric, r.source_index, r.target_tag));
      CHECK(r.dist == distance(metric, *table.lookup(p.tokens[r.source_index].surface),
                               *table.lookup(p.tokens[r.target_index].surface)));
    }
  }
}

TEST_CASE("group sizes count one record per (source, present target tag)") {
  std::mt19937_64 rng(77);
  const auto table = synth::gaussian_table(rng, 40, 5);
  const auto p = synth::random_paragraph(rng, table, 30, 4, 0.1);
  const auto g = match_paragraph(p, table);
  // |{a,b}| = #a-tokens with another b-token + #b-tokens with another a-token (a != b).
  std::vector<std::size_t> count(4, 0);
  for (const auto& t : p.tokens)
    if (table.lookup(t.surface)) ++count[t.tag];
  for (TagId a = 0; a < 4; ++a)
    for (TagId b = a; b < 4; ++b) {
      std::size_t expected;
      if (a == b)
        expected = count[a] >= 2 ? count[a] : 0;
      else
        expected = (count[b] ? count[a] : 0) + (count[a] ? count[b] : 0);
      auto it = g.groups.find({a, b});
      CHECK((it == g.groups.end() ? 0 : it->second.size()) == expected);
    }
}

TEST_CASE("dedupe_symmetric keeps each mutual pair once") {
  const auto table = toy_table();
  TaggedParagraph p{"toy", Label::Human, {{"a", 0}, {"b", 0}, {"c", 1}}, {}, {}};
  const auto g = match_paragraph(p, table, {DistanceMetric::Euclidean, true});
  CHECK(g.groups.at({0, 0}) == std::vector<double>{5.0});
  CHECK(g.groups.at({0, 1}).size() == 2);  // a<->c mutual, b->c single
}

TEST_CASE("match_corpus is ordered and independent of worker count") {
  std::mt19937_64 rng(8);
  const auto table = synth::gaussian_table(rng, 50, 6);
  Corpus empty(Tagset({"A", "B", "C"}));
  CHECK(match_corpus(empty, table).empty());

  Corpus c(Tagset({"A", "B", "C"}));
  auto base = synth::random_paragraph(rng, table, 25, 3);
  for (int i = 0; i < 5; ++i) {
    auto p = base;
    p.id = "same" + std::to_string(i);
    c.add(p);
  }
  for (int i = 0; i < 20; ++i) {
    auto p = synth::random_paragraph(rng, table, 10 + bounded_random(rng, 30), 3);
    p.id = "r" + std::to_string(i);
    c.add(p);
  }
  const auto serial = match_corpus(c, table, {}, 1);
  const auto parallel = match_corpus(c, table, {}, 6);
  REQUIRE(serial.size() == c.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].id == c.paragraphs()[i].id);
    CHECK(serial[i].similarities == parallel[i].similarities);
  }
  for (int i = 1; i < 5; ++i) CHECK(serial[i].similarities == serial[0].similarities);

  const auto diag = match_diagnostics_json(serial);
  CHECK(diag.find("\"skipped_tokens_total\"") != std::string::npos);
}
