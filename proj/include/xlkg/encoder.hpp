#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xlkg {

struct FeaturizerConfig {
  std::uint32_t ngram_min = 2;
  std::uint32_t ngram_max = 4;
  std::uint32_t num_buckets = 32768;
  std::uint64_t hash_seed = 0;

  /// Throws kInvalidArgument unless 1 <= min <= max <= 8 and num_buckets is
  /// a power of two >= 64.
  void validate() const;

  bool operator==(const FeaturizerConfig&) const = default;
};

/// L2-normalized sparse feature vector with strictly increasing indices.
struct SparseVec {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  std::size_t nnz() const { return indices.size(); }
  bool operator==(const SparseVec&) const = default;
};

/// Hashed character n-gram counts of the normalized text, L2-normalized.
/// Each whitespace token is processed on its own; grams touching the start
/// (end) of a token carry a begin (end) marker, and a token shorter than
/// ngram_min contributes itself as a single marked gram.
SparseVec featurize(const FeaturizerConfig& cfg, std::string_view text);

/// The marked grams featurize() hashes, in extraction order. Exposed for
/// inspection and tests.
std::vector<std::string> extract_ngrams(const FeaturizerConfig& cfg,
                                        std::string_view text);

std::uint32_t hash_bucket(const FeaturizerConfig& cfg, std::string_view gram);

using DenseVec = std::vector<double>;

/// Dual encoder: one projection shared by the query side and the passage
/// side. With score_scale s > 0 the projected vector is rescaled to length
/// sqrt(s), so dot products are s times a cosine; s = 0 keeps the raw
/// projection. Weights live in memory as doubles in bucket-major order;
/// the model file stores them as row-major float32.
class EncoderModel {
 public:
  EncoderModel(FeaturizerConfig cfg, std::size_t dim, double score_scale = 0.0);

  /// Gaussian weights with standard deviation `scale` (1/sqrt(dim) when
  /// scale <= 0), so that W^T W starts close to the identity. Weights are
  /// float32-representable, like every model the trainer returns.
  static EncoderModel random(FeaturizerConfig cfg, std::size_t dim,
                             std::uint64_t seed, double scale = 0.0,
                             double score_scale = 0.0);

  const FeaturizerConfig& featurizer() const { return cfg_; }
  std::size_t dim() const { return dim_; }
  std::size_t num_buckets() const { return cfg_.num_buckets; }
  double score_scale() const { return score_scale_; }

  double weight(std::size_t row, std::size_t bucket) const {
    return weights_[bucket * dim_ + row];
  }
  void set_weight(std::size_t row, std::size_t bucket, double v) {
    weights_[bucket * dim_ + row] = v;
  }
  std::span<const double> column(std::size_t bucket) const {
    return {weights_.data() + bucket * dim_, dim_};
  }
  std::span<double> column(std::size_t bucket) {
    return {weights_.data() + bucket * dim_, dim_};
  }

  /// Rounds every weight to the nearest float32, making the in-memory model
  /// identical to what save/load produce.
  void round_to_float();
  bool all_finite() const;

  bool operator==(const EncoderModel&) const = default;

 private:
  FeaturizerConfig cfg_;
  std::size_t dim_;
  double score_scale_;
  std::vector<double> weights_;
};

/// W x, before the output rescaling.
DenseVec project(const EncoderModel& model, const SparseVec& features);

/// Applies the output rescaling to a projected vector. A zero projection
/// stays zero.
DenseVec finish_encoding(const EncoderModel& model, DenseVec projected);

/// Maps a gradient with respect to the encoding back to the projection.
DenseVec encoding_backward(const EncoderModel& model, const DenseVec& projected,
                           const DenseVec& grad_encoding);

DenseVec encode(const EncoderModel& model, const SparseVec& features);
DenseVec encode(const EncoderModel& model, std::string_view text);

// Both sides of the dual encoder are the same function of the same weights.
inline DenseVec encode_query(const EncoderModel& m, std::string_view text) {
  return encode(m, text);
}
inline DenseVec encode_passage(const EncoderModel& m, std::string_view text) {
  return encode(m, text);
}

/// Dot product; throws kInvalidArgument on a dimension mismatch.
double sim(std::span<const double> q, std::span<const double> p);

/// Gradient of the loss with respect to the projection, same shape as it.
struct ProjectionGradient {
  std::size_t dim = 0;
  std::size_t num_buckets = 0;
  std::vector<double> values;  // bucket-major, like EncoderModel

  double at(std::size_t row, std::size_t bucket) const {
    return values[bucket * dim + row];
  }
};

/// -log softmax of the positive among {positive} + negatives, with dot
/// product similarities and a max-shifted log-sum-exp. Never negative.
double nll_loss(const EncoderModel& model, std::string_view query_text,
                std::string_view positive_text,
                std::span<const std::string> negative_texts);

ProjectionGradient grad_nll(const EncoderModel& model,
                            std::string_view query_text,
                            std::string_view positive_text,
                            std::span<const std::string> negative_texts);

/// Loss from precomputed similarities; candidate 0 is the positive.
double nll_from_scores(std::span<const double> scores);

void save_model(const EncoderModel& model, const std::filesystem::path& path);
EncoderModel load_model(const std::filesystem::path& path);
std::string serialize_model(const EncoderModel& model);

}  // namespace xlkg
