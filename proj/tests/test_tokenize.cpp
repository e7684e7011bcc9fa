#include "doctest.h"

#include <random>

#include "dekompost/tokenize.h"
#include "test_util.h"

using namespace dekompost;
using namespace dekompost::tokenize;

namespace {

bool spans_cover(const TokenSequence& t, std::size_t length) {
  std::size_t pos = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t.spans[i].begin != pos || t.spans[i].end <= t.spans[i].begin) return false;
    if (utf8::length(t.tokens[i]) != t.spans[i].end - t.spans[i].begin) return false;
    pos = t.spans[i].end;
  }
  return pos == length;
}

}  // namespace

TEST_CASE("char_tokenize") {
  auto t = char_tokenize("Tag");
  CHECK(t.tokens == std::vector<std::string>{"T", "a", "g"});
  CHECK(t.spans[2] == Span{2, 3});

  auto b = char_tokenize("Bücherregal");
  CHECK(b.size() == 11);
  CHECK(b.tokens[1] == "ü");
  CHECK(spans_cover(b, 11));

  CHECK_THROWS_AS(char_tokenize(""), UsageError);
}

TEST_CASE("bpe_train merges the most frequent pair first") {
  auto m = bpe_train({"abab", "abab"}, 4);
  REQUIRE(m.merges.size() == 2);
  CHECK(m.merges[0] == std::pair<std::string, std::string>{"a", "b"});
  CHECK(m.merges[1] == std::pair<std::string, std::string>{"ab", "ab"});
  CHECK(m.vocab == std::set<std::string>{"a", "b", "ab", "abab"});
}

TEST_CASE("bpe_train ties go to the lexicographically smallest pair") {
  // "xy" and "cd" both occur twice; ("c","d") sorts first.
  auto m = bpe_train({"xy", "xy", "cd", "cd"}, 5);
  REQUIRE(m.merges.size() >= 1);
  CHECK(m.merges[0] == std::pair<std::string, std::string>{"c", "d"});
}

TEST_CASE("bpe_train stops when no pair repeats") {
  auto m = bpe_train({"abc", "def"}, 100);
  CHECK(m.merges.empty());
  CHECK(m.vocab == std::set<std::string>{"a", "b", "c", "d", "e", "f"});
  CHECK_THROWS_AS(bpe_train({"abc"}, 3), UsageError);
}

TEST_CASE("bpe_encode applies merges in order") {
  BpeModel m;
  m.merges = {{"a", "b"}};
  m.vocab = {"a", "b", "c", "ab"};
  auto t = bpe_encode(m, "abc");
  CHECK(t.tokens == std::vector<std::string>{"ab", "c"});
  CHECK(t.spans[1] == Span{2, 3});
  CHECK(bpe_encode(m, "x").tokens == std::vector<std::string>{"x"});
  CHECK(bpe_encode(m, "abab").tokens == bpe_encode(m, "abab").tokens);

  // A merge that only becomes possible after a later merge never fires.
  BpeModel late;
  late.merges = {{"ab", "c"}, {"a", "b"}};
  CHECK(bpe_encode(late, "abc").tokens == std::vector<std::string>{"ab", "c"});
}

TEST_CASE("bpe_encode handles multi-byte characters") {
  auto m = bpe_train({"über", "über", "übel"}, 10);
  auto t = bpe_encode(m, "übermut");
  CHECK(t.joined() == "übermut");
  CHECK(spans_cover(t, 7));
}

TEST_CASE("project_labels") {
  auto chars = char_tokenize("Arbeitstag");
  auto l = project_labels({7}, chars);
  CHECK(l.labels == std::vector<int>{0, 0, 0, 0, 0, 0, 1, 0, 0, 0});
  CHECK_FALSE(l.lossy);

  TokenSequence inside{{"Arbeit", "stag"}, {{0, 6}, {6, 10}}};
  auto lossy = project_labels({7}, inside);
  CHECK(lossy.labels == std::vector<int>{0, 1});
  CHECK(lossy.lossy);

  TokenSequence exact{{"Arbeits", "tag"}, {{0, 7}, {7, 10}}};
  auto ok = project_labels({7}, exact);
  CHECK(ok.labels == std::vector<int>{1, 0});
  CHECK_FALSE(ok.lossy);

  CHECK_THROWS_AS(project_labels({0}, chars), UsageError);
  CHECK_THROWS_AS(project_labels({10}, chars), UsageError);
  TokenSequence single{{"Arbeitstag"}, {{0, 10}}};
  CHECK_THROWS_AS(project_labels({7}, single), UsageError);
}

TEST_CASE("merge files round-trip") {
  auto m = bpe_train({"arbeitstag", "arbeitszeit", "feiertag", "tagung"}, 30);
  auto parsed = parse_merges("#version: 0.2\n" + serialize_merges(m));
  CHECK(parsed.merges == m.merges);
  for (const auto& w : {"arbeitstag", "tagzeit", "xyz"}) {
    CHECK(bpe_encode(parsed, w).tokens == bpe_encode(m, w).tokens);
  }
  CHECK_THROWS_AS(parse_merges("a b c\n"), DataError);

  test_util::TempDir dir("merges");
  save_merges(m, dir / "m.txt");
  CHECK(load_merges(dir / "m.txt").merges == m.merges);
}

TEST_CASE("Tokenizer dispatches on mode") {
  Tokenizer chars;
  CHECK(chars.mode() == Mode::character);
  CHECK(chars.encode("abc").size() == 3);
  Tokenizer bpe(bpe_train({"abab", "abab"}, 4));
  CHECK(bpe.mode() == Mode::bpe);
  CHECK(bpe.encode("abab").tokens == std::vector<std::string>{"abab"});
}

TEST_CASE("lossy rate never increases as the vocabulary shrinks") {
  std::mt19937_64 rng(3);
  std::vector<std::string> roots;
  for (int i = 0; i < 30; ++i) roots.push_back(test_util::random_word(rng, 3, 6, "abcdefgh"));
  std::vector<std::pair<std::string, std::size_t>> words;
  std::vector<std::string> corpus;
  for (int i = 0; i < 200; ++i) {
    const auto& a = roots[rng() % roots.size()];
    const auto& b = roots[rng() % roots.size()];
    words.emplace_back(a + b, a.size());
    corpus.push_back(a + b);
  }
  auto lossy_rate = [&](const Tokenizer& tok) {
    std::size_t lossy = 0, n = 0;
    for (const auto& [w, b] : words) {
      auto t = tok.encode(w);
      ++n;
      // A single-token word cannot carry the boundary at all.
      lossy += t.size() < 2 || project_labels({b}, t).lossy;
    }
    return static_cast<double>(lossy) / static_cast<double>(n);
  };
  double previous = 2.0;
  for (std::size_t size : {400, 200, 100, 50, 20, 9}) {
    // Truncating the merge list is the same as training with a smaller budget.
    BpeModel model = bpe_train(corpus, 400);
    model.merges.resize(std::min(model.merges.size(), size > 8 ? size - 8 : 0));
    double rate = lossy_rate(Tokenizer(model));
    CHECK(rate <= previous + 1e-12);
    previous = rate;
  }
  CHECK(lossy_rate(Tokenizer()) == 0.0);
}
