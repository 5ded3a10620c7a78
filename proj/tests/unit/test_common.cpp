#include <random>

#include "doctest.h"
#include "mtdetect/common.hpp"

using namespace mtdetect;

TEST_CASE("fnv1a matches published test vectors") {
  Fnv1a empty;
  CHECK(empty.hex() == "cbf29ce484222325");
  Fnv1a a;
  a.update("a");
  CHECK(a.hex() == "af63dc4c8601ec8c");
  Fnv1a split;
  split.update("foo");
  split.update("bar");
  Fnv1a whole;
  whole.update("foobar");
  CHECK(split.digest() == whole.digest());
}

TEST_CASE("base64 known strings and random round trip") {
  auto enc = [](std::string_view s) {
    return base64_encode({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
  };
  CHECK(enc("") == "");
  CHECK(enc("f") == "Zg==");
  CHECK(enc("fo") == "Zm8=");
  CHECK(enc("foo") == "Zm9v");
  CHECK(enc("foobar") == "Zm9vYmFy");

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::uint8_t> bytes(bounded_random(rng, 40));
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
    CHECK(base64_decode(base64_encode(bytes)) == bytes);
  }
  CHECK_THROWS_AS(base64_decode("abc"), Error);
  CHECK_THROWS_AS(base64_decode("a*cd"), Error);
}

TEST_CASE("seeded shuffle is a deterministic permutation") {
  std::vector<int> a(100), b(100);
  for (int i = 0; i < 100; ++i) a[i] = b[i] = i;
  std::mt19937_64 r1(9), r2(9);
  seeded_shuffle(a, r1);
  seeded_shuffle(b, r2);
  CHECK(a == b);
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) CHECK(sorted[i] == i);
}

TEST_CASE("labels parse and print") {
  CHECK(parse_label("human") == Label::Human);
  CHECK(parse_label("machine") == Label::Machine);
  CHECK(label_name(Label::Machine) == "machine");
  CHECK_THROWS_AS(parse_label("robot"), Error);
}
