#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xlkg/corpus.hpp"
#include "xlkg/encoder.hpp"

namespace xlkg {

struct TrainConfig {
  FeaturizerConfig featurizer;
  std::size_t dim = 128;
  std::size_t epochs = 15;
  std::size_t batch_size = 32;
  std::size_t negatives = 100;  // sampled EN negatives per positive
  double learning_rate = 1.0;
  double score_scale = 10.0;  // similarity = scale * cosine; 0 = raw dot product
  std::uint64_t seed = 13;
  bool in_batch_negatives = false;
  double init_scale = 0.0;  // <= 0 selects 1/sqrt(dim)

  void validate() const;
};

/// One (query, positive) example. positive_id, when it names a passage of
/// the negative pool, keeps that passage out of the sampled negatives.
struct TrainingPair {
  std::string query_text;
  std::string positive_text;
  std::string positive_id;
};

struct TrainResult {
  EncoderModel model;
  std::vector<double> epoch_loss;  // mean example loss per epoch
};

/// Mini-batch gradient descent on the dual-encoder NLL with negatives drawn
/// uniformly (without replacement, fresh every epoch) from `negative_pool`.
/// Starts from `init` when given, otherwise from EncoderModel::random with
/// the configured seed. Deterministic for fixed inputs; the returned
/// weights are rounded to float32.
TrainResult train_retriever(std::span<const TrainingPair> pairs,
                            const Corpus& negative_pool,
                            const TrainConfig& cfg,
                            const EncoderModel* init = nullptr);

}  // namespace xlkg
