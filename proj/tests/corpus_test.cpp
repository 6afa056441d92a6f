#include <gtest/gtest.h>

#include <random>
#include <set>

#include "test_support.hpp"
#include "xlkg/corpus.hpp"
#include "xlkg/error.hpp"
#include "xlkg/text.hpp"

namespace xlkg {
namespace {

using testing::TempDir;
using testing::passage;
using testing::write_file;

TEST(NormalizePhrase, CollapsesWhitespaceAndCase) {
  EXPECT_EQ(normalize_phrase("Soft  Cuddly Friend "), "soft cuddly friend");
  EXPECT_EQ(normalize_phrase("GRAU"), "grau");
  EXPECT_EQ(normalize_phrase("steiff teddy"), "steiff teddy");
}

TEST(NormalizePhrase, AppliesCompatibilityFolding) {
  EXPECT_EQ(normalize_phrase("\xEF\xBC\xA1\xEF\xBC\xA2"), "ab");  // fullwidth AB
  EXPECT_EQ(normalize_phrase("\xEF\xAC\x81le"), "file");          // fi ligature
  EXPECT_EQ(normalize_phrase("a\xE2\x80\x83\tb\n"), "a b");       // em space, tab
  EXPECT_EQ(normalize_phrase("   "), "");
}

TEST(NormalizePhrase, IdempotentOnRandomUnicode) {
  const std::vector<char32_t> pool = {U'a', U'Z', U' ', U'\t', U'Ä', U'ß', U'İ',
                                      U'ﬁ', U'Ａ', U'　', U'Ⅳ', U'Σ',
                                      U'ẞ', U'́', U' ', U'中', U'한'};
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::uniform_int_distribution<int> len(0, 12);
  for (int trial = 0; trial < 2000; ++trial) {
    std::u32string s;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) s.push_back(pool[pick(rng)]);
    const std::string once = normalize_phrase(codepoints_to_utf8(s));
    EXPECT_EQ(normalize_phrase(once), once) << once;
  }
}

TEST(LangCode, UppercasesAndFlagsUnknown) {
  EXPECT_EQ(LangCode::parse("de").str(), "DE");
  EXPECT_TRUE(LangCode::parse("ko").known());
  EXPECT_FALSE(LangCode::parse("pt").known());
  EXPECT_THROW(LangCode::parse("deu"), Error);
  EXPECT_THROW(LangCode::parse("d1"), Error);
}

TEST(LoadCorpus, ThreeValidLines) {
  TempDir dir;
  write_file(dir / "c.jsonl",
             R"({"id":"a","lang":"DE","text":"eins","keyphrases":["x"]})"
             "\n"
             R"({"id":"b","lang":"DE","text":"zwei","keyphrases":[]})"
             "\n\n"
             R"({"id":"c","lang":"DE","text":"drei","keyphrases":["y","z"]})"
             "\n");
  LoadStats stats;
  const Corpus c = load_corpus(dir / "c.jsonl", LangCode::parse("DE"), &stats);
  EXPECT_EQ(c.size(), 3u);
  EXPECT_EQ(stats.blank_lines, 1u);
  EXPECT_EQ(c.at("c").keyphrases, (std::vector<std::string>{"y", "z"}));
  EXPECT_EQ(c.lang_histogram().at(LangCode::parse("DE")), 3u);
}

TEST(LoadCorpus, DeduplicatesNormalizedKeyphrases) {
  TempDir dir;
  write_file(dir / "c.jsonl",
             R"({"id":"a","lang":"DE","text":"t","keyphrases":["Grau","grau"]})" "\n");
  LoadStats stats;
  const Corpus c = load_corpus(dir / "c.jsonl", std::nullopt, &stats);
  EXPECT_EQ(c.at("a").keyphrases, std::vector<std::string>{"grau"});
  EXPECT_EQ(stats.deduplicated_keyphrases, 1u);
}

TEST(LoadCorpus, EmptyFileGivesEmptyCorpus) {
  TempDir dir;
  write_file(dir / "c.jsonl", "");
  EXPECT_TRUE(load_corpus(dir / "c.jsonl").empty());
}

TEST(LoadCorpus, ErrorsNameTheLine) {
  TempDir dir;
  write_file(dir / "bad.jsonl",
             R"({"id":"a","lang":"DE","text":"t","keyphrases":[]})" "\n{oops\n");
  try {
    load_corpus(dir / "bad.jsonl");
    FAIL() << "expected a parse error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
  write_file(dir / "dup.jsonl",
             R"({"id":"a","lang":"DE","text":"t","keyphrases":[]})" "\n"
             R"({"id":"a","lang":"DE","text":"u","keyphrases":[]})" "\n");
  EXPECT_THROW(load_corpus(dir / "dup.jsonl"), Error);
  write_file(dir / "blank.jsonl", R"({"id":"a","lang":"DE","text":"  ","keyphrases":[]})" "\n");
  EXPECT_THROW(load_corpus(dir / "blank.jsonl"), Error);
  EXPECT_THROW(load_corpus(dir / "missing.jsonl"), Error);
}

TEST(LoadCorpus, LanguageMismatchIsCountedNotFatal) {
  TempDir dir;
  write_file(dir / "c.jsonl",
             R"({"id":"a","lang":"FR","text":"t","keyphrases":[]})" "\n"
             R"({"id":"b","lang":"PT","text":"t","keyphrases":[]})" "\n");
  LoadStats stats;
  const Corpus c = load_corpus(dir / "c.jsonl", LangCode::parse("DE"), &stats);
  EXPECT_EQ(c.size(), 2u);
  EXPECT_EQ(stats.lang_mismatches, 2u);
  EXPECT_EQ(stats.unknown_langs, 1u);
}

TEST(LoadCorpus, SaveLoadRoundTrip) {
  TempDir dir;
  Corpus c;
  c.add(passage("z", "DE", "Grüße aus Köln \"zitiert\"", {"grüße", "köln"}));
  c.add(passage("a", "ZH", "\xE4\xB8\xAD\xE6\x96\x87", {}));
  c.add(passage("m", "EN", "line\nbreak", {"x y"}));
  save_corpus(c, dir / "c.jsonl");
  EXPECT_EQ(load_corpus(dir / "c.jsonl"), c);
}

Corpus numbered_corpus(std::size_t n) {
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) c.add(passage("p" + std::to_string(i), "DE", "text"));
  return c;
}

TEST(LoadPairs, ResolvesIdsAndKeepsOrder) {
  TempDir dir;
  Corpus xx = numbered_corpus(3);
  Corpus en;
  en.add(passage("e0", "EN", "t"));
  en.add(passage("e1", "EN", "t"));
  write_file(dir / "par.jsonl",
             R"({"xx_id":"p2","en_id":"e1"})" "\n" R"({"xx_id":"p0","en_id":"e0"})" "\n");
  const PairSet par = load_pairs(dir / "par.jsonl", PairKind::kParallel, xx, &en);
  ASSERT_EQ(par.size(), 2u);
  EXPECT_EQ(par.pairs()[0].xx_id, "p2");
  EXPECT_EQ(par.partner_of("p0"), std::optional<std::string>("e0"));

  write_file(dir / "dangling.jsonl", R"({"xx_id":"p1","en_id":"e9"})" "\n");
  try {
    load_pairs(dir / "dangling.jsonl", PairKind::kParallel, xx, &en);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("e9"), std::string::npos) << e.what();
  }
  write_file(dir / "dup.jsonl",
             R"({"xx_id":"p1","en_id":"e0"})" "\n" R"({"xx_id":"p1","en_id":"e0"})" "\n");
  EXPECT_THROW(load_pairs(dir / "dup.jsonl", PairKind::kParallel, xx, &en), Error);
}

TEST(LoadPairs, NonParallelIdsOnly) {
  TempDir dir;
  const Corpus xx = numbered_corpus(500);
  std::string lines;
  for (std::size_t i = 0; i < 500; ++i) {
    lines += R"({"xx_id":"p)" + std::to_string(i) + "\"}\n";
  }
  write_file(dir / "np.jsonl", lines);
  const PairSet np = load_pairs(dir / "np.jsonl", PairKind::kNonParallel, xx);
  EXPECT_EQ(np.size(), 500u);
  EXPECT_EQ(np.kind(), PairKind::kNonParallel);
  EXPECT_THROW(np.partner_of("p0").value(), std::bad_optional_access);
}

TEST(PairSet, ShapeFollowsKind) {
  PairSet np(PairKind::kNonParallel);
  EXPECT_THROW(np.add({"a", "b", std::nullopt}), Error);
  PairSet par(PairKind::kParallel);
  EXPECT_THROW(par.add({"a", std::nullopt, std::nullopt}), Error);
  EXPECT_THROW(par.add({"a", "b", 1.0}), Error);
  PairSet pseudo(PairKind::kPseudo);
  pseudo.add({"a", "b", 7.5});
  EXPECT_THROW(pseudo.add({"a", "b", 1.0}), Error);
  pseudo.add({"a", "c", std::nullopt});
  EXPECT_EQ(pseudo.size(), 2u);
}

TEST(PairSet, SaveLoadRoundTrip) {
  TempDir dir;
  Corpus xx = numbered_corpus(4);
  Corpus en;
  en.add(passage("e0", "EN", "t"));
  PairSet pseudo(PairKind::kPseudo);
  pseudo.add({"p3", "e0", 12.5});
  pseudo.add({"p1", "e0", std::nullopt});
  save_pairs(pseudo, dir / "p.jsonl");
  EXPECT_EQ(load_pairs(dir / "p.jsonl", PairKind::kPseudo, xx, &en), pseudo);
}

TEST(SplitParNp, PartitionArithmetic) {
  const Corpus c = numbered_corpus(10);
  PairSet par(PairKind::kParallel);
  for (const char* id : {"p1", "p4", "p7"}) par.add({id, "e", std::nullopt});
  auto [a, b] = split_par_np(c, par);
  EXPECT_EQ(a.size(), 3u);
  EXPECT_EQ(b.size(), 7u);

  auto [none, all] = split_par_np(c, PairSet(PairKind::kParallel));
  EXPECT_EQ(none.size(), 0u);
  EXPECT_EQ(all.size(), 10u);

  PairSet every(PairKind::kParallel);
  for (const auto& p : c.passages()) every.add({p.id, "e", std::nullopt});
  auto [full, empty] = split_par_np(c, every);
  EXPECT_EQ(full.size(), 10u);
  EXPECT_EQ(empty.size(), 0u);
}

TEST(SplitParNp, DisjointAndExhaustiveOnRandomInputs) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(0, 40)(rng);
    const Corpus c = numbered_corpus(n);
    PairSet par(PairKind::kParallel);
    std::bernoulli_distribution take(0.3);
    for (const auto& p : c.passages()) {
      if (take(rng)) par.add({p.id, "e" + std::to_string(trial), std::nullopt});
    }
    auto [a, b] = split_par_np(c, par);
    ASSERT_EQ(a.size() + b.size(), n);
    std::set<std::string> seen;
    for (const auto& p : a.passages()) seen.insert(p.id);
    for (const auto& p : b.passages()) {
      EXPECT_EQ(seen.count(p.id), 0u);
      seen.insert(p.id);
    }
    EXPECT_EQ(seen.size(), n);
  }
}

}  // namespace
}  // namespace xlkg
