#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "test_support.hpp"
#include "xlkg/error.hpp"
#include "xlkg/index.hpp"

namespace xlkg {
namespace {

using testing::passage;
using testing::TempDir;

Corpus three_passages() {
  Corpus c;
  c.add(passage("e1", "EN", "teddy bear plush toy", {"teddy bear", "plush"}));
  c.add(passage("e2", "EN", "kitchen knife set", {"knife"}));
  c.add(passage("e3", "EN", "running shoes for men", {"running shoes"}));
  return c;
}

EncoderModel small_model(double scale = 0.0) {
  FeaturizerConfig cfg;
  cfg.num_buckets = 1024;
  return EncoderModel::random(cfg, 16, 5, 0.0, scale);
}

struct RandomIndex {
  std::vector<std::string> ids;
  std::vector<std::vector<float>> vecs;
  DenseIndex index{1, TargetMode::kP2P};
};

RandomIndex random_index(std::mt19937_64& rng, std::size_t n, std::size_t d, bool ties) {
  RandomIndex r;
  r.index = DenseIndex(d, TargetMode::kP2P);
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> v(d);
    if (ties && i > 0 && i % 3 == 0) {
      v = r.vecs[pick(rng) % i];
    } else {
      for (auto& x : v) x = g(rng);
    }
    // Ids inserted out of lexical order so the tie-break is exercised.
    r.ids.push_back("p" + std::to_string(100000 + order[i]));
    r.vecs.push_back(v);
    r.index.add(r.ids.back(), std::span<const float>(v));
  }
  return r;
}

void expect_matches_oracle(const RandomIndex& r, const std::vector<double>& q, std::size_t k) {
  const SearchResult got = search(r.index, q, k);
  const auto want = oracle::knn(r.ids, r.vecs, q, k);
  ASSERT_EQ(got.hits.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_EQ(got.hits[i].id, want[i].first) << "rank " << i;
    EXPECT_EQ(got.hits[i].score, want[i].second) << "rank " << i;
  }
  EXPECT_EQ(got.truncated, k > r.ids.size());
}

TEST(TargetText, KeyphraseLayouts) {
  const Passage p = passage("e1", "EN", "teddy bear plush toy", {"teddy bear", "plush"});
  EXPECT_EQ(retrieval_target_text(p, TargetMode::kP2P), "teddy bear plush toy");
  EXPECT_EQ(retrieval_target_text(p, TargetMode::kP2K), "teddy bear [SEP] plush");
  EXPECT_EQ(retrieval_target_text(p, TargetMode::kP2PK),
            "teddy bear [SEP] plush [CTX] teddy bear plush toy");
  const Passage bare = passage("e9", "EN", "no phrases");
  try {
    retrieval_target_text(bare, TargetMode::kP2K);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("e9"), std::string::npos);
  }
  EXPECT_EQ(parse_target_mode("P2PK"), TargetMode::kP2PK);
  EXPECT_THROW(parse_target_mode("p2x"), Error);
}

TEST(BuildIndex, OneVectorPerPassageDeterministic) {
  const Corpus c = three_passages();
  const EncoderModel m = small_model();
  const DenseIndex a = build_index(c, m, TargetMode::kP2P);
  EXPECT_EQ(a.size(), 3u);
  EXPECT_EQ(a.ids(), (std::vector<std::string>{"e1", "e2", "e3"}));
  EXPECT_EQ(a, build_index(c, m, TargetMode::kP2P));
  const DenseIndex pk = build_index(c, m, TargetMode::kP2PK);
  EXPECT_EQ(pk.ids(), a.ids());
  EXPECT_NE(pk, a);
  EXPECT_THROW(build_index(Corpus{}, m, TargetMode::kP2P), Error);
}

TEST(DenseIndexAdd, RejectsBadEntries) {
  DenseIndex idx(2, TargetMode::kP2P);
  idx.add("a", std::vector<double>{1.0, 2.0});
  EXPECT_THROW(idx.add("a", std::vector<double>{1.0, 2.0}), Error);
  EXPECT_THROW(idx.add("b", std::vector<double>{1.0}), Error);
  EXPECT_THROW(idx.add("c", std::vector<double>{1.0, std::nan("")}), Error);
}

TEST(Search, IdenticalQueryRanksFirstAmongOrthogonal) {
  DenseIndex idx(4, TargetMode::kP2P);
  idx.add("a", std::vector<double>{1, 0, 0, 0});
  idx.add("b", std::vector<double>{0, 1, 0, 0});
  idx.add("c", std::vector<double>{0, 0, 1, 0});
  const std::vector<double> q = {0, 0, 1, 0};
  const SearchResult r = search(idx, q, 1);
  ASSERT_EQ(r.hits.size(), 1u);
  EXPECT_EQ(r.hits[0].id, "c");
  EXPECT_FALSE(r.truncated);
  // Ties on zero score fall back to ascending id.
  const SearchResult all = search(idx, q, 3);
  EXPECT_EQ(all.hits[1].id, "a");
  EXPECT_EQ(all.hits[2].id, "b");
}

TEST(Search, OversizedKReturnsEverythingFlagged) {
  const Corpus c = three_passages();
  const EncoderModel m = small_model();
  const DenseIndex idx = build_index(c, m, TargetMode::kP2P);
  const SearchResult r = search(idx, "teddy", m, 5);
  EXPECT_EQ(r.hits.size(), 3u);
  EXPECT_TRUE(r.truncated);
  EXPECT_THROW(search(idx, "teddy", m, 0), Error);
  EXPECT_THROW(search(idx, std::vector<double>(3, 0.0), 1), Error);
}

TEST(Search, MatchesBruteForceOnThousandVectors) {
  std::mt19937_64 rng(21);
  const RandomIndex r = random_index(rng, 1000, 32, false);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> q(32);
    for (auto& x : q) x = g(rng);
    expect_matches_oracle(r, q, 10);
  }
}

TEST(Search, MatchesBruteForceWithTiesAndRandomShapes) {
  std::mt19937_64 rng(22);
  std::uniform_int_distribution<std::size_t> n_dist(1, 400), d_dist(1, 64), k_dist(1, 50);
  for (int t = 0; t < 40; ++t) {
    const RandomIndex r = random_index(rng, n_dist(rng), d_dist(rng), true);
    std::vector<double> q(r.index.dim());
    if (t % 4 == 0) {
      std::fill(q.begin(), q.end(), 0.0);  // every score ties at zero
    } else {
      std::normal_distribution<double> g(0.0, 1.0);
      for (auto& x : q) x = g(rng);
    }
    expect_matches_oracle(r, q, k_dist(rng));
  }
}

TEST(Search, FullKIsSortedPermutation) {
  std::mt19937_64 rng(23);
  const RandomIndex r = random_index(rng, 50, 8, true);
  const std::vector<double> q(8, 0.5);
  const SearchResult res = search(r.index, q, 50);
  ASSERT_EQ(res.hits.size(), 50u);
  EXPECT_FALSE(res.truncated);
  std::set<std::string> seen;
  for (std::size_t i = 0; i < res.hits.size(); ++i) {
    seen.insert(res.hits[i].id);
    if (i == 0) continue;
    const auto& a = res.hits[i - 1];
    const auto& b = res.hits[i];
    EXPECT_TRUE(a.score > b.score || (a.score == b.score && a.id < b.id));
  }
  EXPECT_EQ(seen.size(), 50u);
}

TEST(SearchBatch, ThreadCountDoesNotChangeResults) {
  const Corpus c = three_passages();
  const EncoderModel m = small_model(10.0);
  const DenseIndex idx = build_index(c, m, TargetMode::kP2P);
  std::vector<std::string> queries;
  for (int i = 0; i < 30; ++i) queries.push_back("query number " + std::to_string(i));
  const auto one = search_batch(idx, m, queries, 2, 1);
  EXPECT_EQ(search_batch(idx, m, queries, 2, 4), one);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    EXPECT_EQ(one[i], search(idx, queries[i], m, 2));
  }
}

TEST(Recall, GoldFirstGivesOneAndIsMonotone) {
  Corpus en;
  Corpus xx;
  PairSet pairs(PairKind::kParallel);
  const char* words[] = {"alpha", "bravo", "charlie", "delta", "echo", "foxtrot"};
  for (int i = 0; i < 6; ++i) {
    en.add(passage("e" + std::to_string(i), "EN", words[i]));
    xx.add(passage("x" + std::to_string(i), "DE", words[i]));
    pairs.add({"x" + std::to_string(i), "e" + std::to_string(i), std::nullopt});
  }
  FeaturizerConfig cfg;
  cfg.num_buckets = 4096;
  EncoderModel m(cfg, 4096);
  for (std::size_t i = 0; i < 4096; ++i) m.set_weight(i, i, 1.0);
  const DenseIndex idx = build_index(en, m, TargetMode::kP2P);
  const std::vector<std::size_t> ks = {1, 2, 5};
  for (const auto& [k, v] : recall_at_k(idx, m, xx, pairs, ks)) EXPECT_EQ(v, 1.0) << k;

  std::mt19937_64 rng(4);
  const EncoderModel noisy = EncoderModel::random(cfg, 8, 9);
  const DenseIndex nidx = build_index(en, noisy, TargetMode::kP2P);
  const auto rec = recall_at_k(nidx, noisy, xx, pairs, ks);
  EXPECT_LE(rec.at(1), rec.at(2));
  EXPECT_LE(rec.at(2), rec.at(5));
  EXPECT_THROW(recall_at_k(idx, m, xx, PairSet(PairKind::kParallel), ks), Error);
}

TEST(Hits, RoundTripAndRecallFromHits) {
  TempDir dir;
  std::vector<QueryHits> hits = {
      {"x1", {{{"e1", 2.5}, {"e2", -0.125}}, false}},
      {"x2", {{{"e3", 1.0}}, true}},
  };
  save_hits(hits, dir / "hits.jsonl");
  EXPECT_EQ(load_hits(dir / "hits.jsonl"), hits);

  PairSet gold(PairKind::kParallel);
  gold.add({"x1", "e2", std::nullopt});
  gold.add({"x2", "e1", std::nullopt});
  gold.add({"x3", "e3", std::nullopt});  // no hits record: a miss
  const std::vector<std::size_t> ks = {1, 2};
  const auto rec = recall_from_hits(hits, gold, ks);
  EXPECT_DOUBLE_EQ(rec.at(1), 0.0);
  EXPECT_DOUBLE_EQ(rec.at(2), 1.0 / 3.0);

  testing::write_file(dir / "dup.jsonl",
                      "{\"xx_id\":\"a\",\"hits\":[],\"truncated\":false}\n"
                      "{\"xx_id\":\"a\",\"hits\":[],\"truncated\":false}\n");
  EXPECT_THROW(load_hits(dir / "dup.jsonl"), Error);
  testing::write_file(dir / "bad.jsonl", "{\"xx_id\":3,\"hits\":[]}\n");
  EXPECT_THROW(load_hits(dir / "bad.jsonl"), Error);
}

TEST(IndexFile, RoundTripPreservesSearch) {
  TempDir dir;
  const Corpus c = three_passages();
  const EncoderModel m = small_model(10.0);
  const DenseIndex idx = build_index(c, m, TargetMode::kP2PK);
  save_index(idx, dir / "idx.bin");
  const DenseIndex back = load_index(dir / "idx.bin");
  EXPECT_EQ(back, idx);
  EXPECT_EQ(back.mode(), TargetMode::kP2PK);
  EXPECT_EQ(search(back, "plush", m, 3), search(idx, "plush", m, 3));

  save_vector_file(idx, dir / "vec.bin");
  const DenseIndex vec = load_vector_file(dir / "vec.bin", TargetMode::kP2PK);
  EXPECT_EQ(vec, idx);

  testing::write_file(dir / "junk.bin", "garbage");
  EXPECT_THROW(load_index(dir / "junk.bin"), Error);
  const std::string bytes = testing::read_file(dir / "idx.bin");
  testing::write_file(dir / "cut.bin", bytes.substr(0, bytes.size() - 1));
  EXPECT_THROW(load_index(dir / "cut.bin"), Error);
}

}  // namespace
}  // namespace xlkg
