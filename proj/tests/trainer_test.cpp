#include <gtest/gtest.h>

#include "test_support.hpp"
#include "xlkg/error.hpp"
#include "xlkg/index.hpp"
#include "xlkg/synthetic.hpp"
#include "xlkg/trainer.hpp"

namespace xlkg {
namespace {

SyntheticData small_fixture() {
  SyntheticConfig cfg;
  cfg.en_passages = 300;
  cfg.par_pairs = 60;
  cfg.dev_pairs = 60;
  return make_synthetic(cfg);
}

std::vector<TrainingPair> training_pairs(const SyntheticData& data) {
  std::vector<TrainingPair> out;
  for (const auto& p : data.par.pairs()) {
    out.push_back({data.xx.at(p.xx_id).text, data.en.at(*p.en_id).text, *p.en_id});
  }
  return out;
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.featurizer.num_buckets = 4096;
  cfg.dim = 32;
  cfg.epochs = 6;
  cfg.negatives = 20;
  cfg.batch_size = 8;
  return cfg;
}

TEST(TrainRetriever, LossDecreasesAndRecallImproves) {
  const auto data = small_fixture();
  const auto pairs = training_pairs(data);
  const TrainConfig cfg = small_config();
  const TrainResult r = train_retriever(pairs, data.en, cfg);
  ASSERT_EQ(r.epoch_loss.size(), cfg.epochs);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());

  const EncoderModel untrained = EncoderModel::random(
      cfg.featurizer, cfg.dim, cfg.seed ^ 0x5EEDC0DEULL, 0.0, cfg.score_scale);
  const std::vector<std::size_t> ks = {5};
  const double before = recall_at_k(build_index(data.en, untrained, TargetMode::kP2P),
                                    untrained, data.xx, data.dev, ks)
                            .at(5);
  const double after = recall_at_k(build_index(data.en, r.model, TargetMode::kP2P), r.model,
                                   data.xx, data.dev, ks)
                           .at(5);
  EXPECT_GT(after, before);
}

TEST(TrainRetriever, ZeroLearningRateKeepsInitialWeights) {
  const auto data = small_fixture();
  const auto pairs = training_pairs(data);
  TrainConfig cfg = small_config();
  cfg.learning_rate = 0.0;
  cfg.epochs = 2;
  EncoderModel init = EncoderModel::random(cfg.featurizer, cfg.dim, 3, 0.0, cfg.score_scale);
  init.round_to_float();
  const TrainResult r = train_retriever(pairs, data.en, cfg, &init);
  EXPECT_EQ(r.model, init);
}

TEST(TrainRetriever, SinglePairConverges) {
  Corpus pool;
  pool.add(testing::passage("e1", "EN", "blue teddy bear plush"));
  pool.add(testing::passage("e2", "EN", "stainless kitchen knife set"));
  const std::vector<TrainingPair> pairs = {
      {"blauer teddybaer pluesch", "blue teddy bear plush", "e1"}};
  TrainConfig cfg;
  cfg.featurizer.num_buckets = 1024;
  cfg.dim = 16;
  cfg.negatives = 1;
  cfg.epochs = 60;
  const TrainResult r = train_retriever(pairs, pool, cfg);
  // The only candidate negative is e2, so the loss falls toward
  // log(1 + exp(-2s)) with s the score scale.
  EXPECT_LT(r.epoch_loss.back(), 1e-3);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
  const SearchResult hits =
      search(build_index(pool, r.model, TargetMode::kP2P), pairs[0].query_text, r.model, 1);
  EXPECT_EQ(hits.hits[0].id, "e1");
}

TEST(TrainRetriever, DeterministicForFixedSeed) {
  const auto data = small_fixture();
  const auto pairs = training_pairs(data);
  TrainConfig cfg = small_config();
  cfg.epochs = 2;
  const TrainResult a = train_retriever(pairs, data.en, cfg);
  const TrainResult b = train_retriever(pairs, data.en, cfg);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  cfg.seed = 14;
  EXPECT_NE(train_retriever(pairs, data.en, cfg).model, a.model);
}

TEST(TrainRetriever, InBatchNegativesRun) {
  const auto data = small_fixture();
  const auto pairs = training_pairs(data);
  TrainConfig cfg = small_config();
  cfg.epochs = 3;
  cfg.in_batch_negatives = true;
  const TrainResult r = train_retriever(pairs, data.en, cfg);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
}

TEST(TrainRetriever, RejectsBadInputs) {
  const auto data = small_fixture();
  const auto pairs = training_pairs(data);
  TrainConfig cfg = small_config();
  cfg.negatives = data.en.size();
  EXPECT_THROW(train_retriever(pairs, data.en, cfg), Error);
  cfg = small_config();
  EXPECT_THROW(train_retriever(std::vector<TrainingPair>{}, data.en, cfg), Error);
  cfg.learning_rate = -1.0;
  EXPECT_THROW(train_retriever(pairs, data.en, cfg), Error);
  cfg = small_config();
  cfg.score_scale = -1.0;
  EXPECT_THROW(train_retriever(pairs, data.en, cfg), Error);
  cfg = small_config();
  FeaturizerConfig other = cfg.featurizer;
  other.hash_seed += 1;
  const EncoderModel init(other, cfg.dim);
  EXPECT_THROW(train_retriever(pairs, data.en, cfg, &init), Error);
}

}  // namespace
}  // namespace xlkg
