#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "xlkg/corpus.hpp"
#include "xlkg/encoder.hpp"

namespace xlkg {

struct MarginConfig {
  std::size_t k_neighbors = 4;
  double threshold = 1.03;
  bool bidirectional = false;  // keep only mutual best matches

  void validate() const;
};

struct MarginScore {
  double value = 0.0;
  bool degenerate = false;  // neighborhood denominator <= 0; value is 0
};

/// Cosine similarity, 0 when either vector is zero.
double cosine(std::span<const double> x, std::span<const double> y);

/// Ratio margin: cos(x, y) divided by the mean of the two k-nearest
/// neighborhood averages, i.e. sum_x / 2k + sum_y / 2k. Uses the k largest
/// entries of each neighbor list; throws if a list has fewer than k.
MarginScore ratio_margin(double cos_xy, std::span<const double> nn_x,
                         std::span<const double> nn_y, std::size_t k);

MarginScore margin_score(std::span<const double> x, std::span<const double> y,
                         std::span<const double> nn_x,
                         std::span<const double> nn_y, std::size_t k);

/// Forward (XX -> EN) mining: each XX passage is matched to the candidate
/// among its k cosine neighbors with the highest margin, kept when the
/// margin reaches the threshold. Output is sorted by xx_id and carries the
/// margin as score.
PairSet mine_bitext(const Corpus& xx_corpus, const Corpus& en_corpus,
                    const EncoderModel& model, const MarginConfig& cfg,
                    std::size_t threads = 1);

/// Same procedure over precomputed embeddings.
PairSet mine_bitext(std::span<const std::string> xx_ids,
                    std::span<const DenseVec> xx_vectors,
                    std::span<const std::string> en_ids,
                    std::span<const DenseVec> en_vectors,
                    const MarginConfig& cfg, std::size_t threads = 1);

}  // namespace xlkg
