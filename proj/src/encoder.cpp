#include "xlkg/encoder.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "loss_kernel.hpp"
#include "xlkg/binary_io.hpp"
#include "xlkg/error.hpp"
#include "xlkg/text.hpp"

namespace xlkg {

namespace {

constexpr char32_t kTokenBegin = U'\u0002';
constexpr char32_t kTokenEnd = U'\u0003';
constexpr std::uint32_t kModelMagic = 0x4D4B4C58;  // "XLKM"
constexpr std::uint32_t kModelVersion = 1;

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

void FeaturizerConfig::validate() const {
  if (ngram_min < 1 || ngram_min > ngram_max || ngram_max > 8) {
    throw Error(ErrorCode::kInvalidArgument,
                "n-gram range must satisfy 1 <= min <= max <= 8");
  }
  if (num_buckets < 64 || !std::has_single_bit(num_buckets)) {
    throw Error(ErrorCode::kInvalidArgument,
                "num_buckets must be a power of two >= 64");
  }
}

std::uint32_t hash_bucket(const FeaturizerConfig& cfg, std::string_view gram) {
  // FNV-1a over the UTF-8 bytes, seeded and finalized so the low bits mix.
  std::uint64_t h = 14695981039346656037ULL ^ mix64(cfg.hash_seed);
  for (unsigned char c : gram) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return static_cast<std::uint32_t>(mix64(h) & (cfg.num_buckets - 1));
}

std::vector<std::string> extract_ngrams(const FeaturizerConfig& cfg,
                                        std::string_view text) {
  std::vector<std::string> grams;
  for (const auto& token : split_whitespace(normalize_phrase(text))) {
    const std::u32string w = utf8_to_codepoints(token);
    const std::size_t len = w.size();
    if (len < cfg.ngram_min) {
      std::u32string g;
      g.push_back(kTokenBegin);
      g += w;
      g.push_back(kTokenEnd);
      grams.push_back(codepoints_to_utf8(g));
      continue;
    }
    for (std::size_t n = cfg.ngram_min; n <= cfg.ngram_max && n <= len; ++n) {
      for (std::size_t start = 0; start + n <= len; ++start) {
        std::u32string g;
        if (start == 0) g.push_back(kTokenBegin);
        g.append(w, start, n);
        if (start + n == len) g.push_back(kTokenEnd);
        grams.push_back(codepoints_to_utf8(g));
      }
    }
  }
  return grams;
}

SparseVec featurize(const FeaturizerConfig& cfg, std::string_view text) {
  if (is_blank(text)) {
    throw Error(ErrorCode::kInvalidArgument, "cannot featurize empty text");
  }
  std::map<std::uint32_t, double> counts;
  for (const auto& gram : extract_ngrams(cfg, text)) {
    counts[hash_bucket(cfg, gram)] += 1.0;
  }
  double sq = 0.0;
  for (const auto& [_, c] : counts) sq += c * c;
  const double norm = std::sqrt(sq);
  SparseVec v;
  v.indices.reserve(counts.size());
  v.values.reserve(counts.size());
  for (const auto& [idx, c] : counts) {
    v.indices.push_back(idx);
    v.values.push_back(c / norm);
  }
  return v;
}

EncoderModel::EncoderModel(FeaturizerConfig cfg, std::size_t dim, double score_scale)
    : cfg_(cfg), dim_(dim), score_scale_(score_scale) {
  cfg_.validate();
  if (!(score_scale_ >= 0.0) || !std::isfinite(score_scale_)) {
    throw Error(ErrorCode::kInvalidArgument, "score_scale must be finite and >= 0");
  }
  if (dim_ < 2) {
    throw Error(ErrorCode::kInvalidArgument, "encoder dimension must be >= 2");
  }
  weights_.assign(dim_ * cfg_.num_buckets, 0.0);
}

EncoderModel EncoderModel::random(FeaturizerConfig cfg, std::size_t dim,
                                  std::uint64_t seed, double scale,
                                  double score_scale) {
  EncoderModel m(cfg, dim, score_scale);
  if (scale <= 0.0) scale = 1.0 / std::sqrt(static_cast<double>(dim));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, scale);
  for (auto& w : m.weights_) w = gauss(rng);
  m.round_to_float();
  return m;
}

void EncoderModel::round_to_float() {
  for (auto& w : weights_) w = static_cast<double>(static_cast<float>(w));
}

bool EncoderModel::all_finite() const {
  for (double w : weights_) {
    if (!std::isfinite(w)) return false;
  }
  return true;
}

DenseVec project(const EncoderModel& model, const SparseVec& features) {
  DenseVec out(model.dim(), 0.0);
  for (std::size_t k = 0; k < features.nnz(); ++k) {
    const double x = features.values[k];
    const auto col = model.column(features.indices[k]);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += col[i] * x;
  }
  return out;
}

DenseVec finish_encoding(const EncoderModel& model, DenseVec projected) {
  if (model.score_scale() <= 0.0) return projected;
  const double norm = std::sqrt(sim(projected, projected));
  if (norm == 0.0) return projected;
  const double f = std::sqrt(model.score_scale()) / norm;
  for (double& v : projected) v *= f;
  return projected;
}

DenseVec encoding_backward(const EncoderModel& model, const DenseVec& projected,
                           const DenseVec& grad_encoding) {
  if (model.score_scale() <= 0.0) return grad_encoding;
  const double norm = std::sqrt(sim(projected, projected));
  DenseVec g(projected.size(), 0.0);
  if (norm == 0.0) return g;
  // y = c v / |v|  =>  dL/dv = c / |v| (g - (g.u) u), u = v / |v|.
  const double c = std::sqrt(model.score_scale()) / norm;
  double gu = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) gu += grad_encoding[i] * projected[i] / norm;
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = c * (grad_encoding[i] - gu * projected[i] / norm);
  }
  return g;
}

DenseVec encode(const EncoderModel& model, const SparseVec& features) {
  return finish_encoding(model, project(model, features));
}

DenseVec encode(const EncoderModel& model, std::string_view text) {
  return encode(model, featurize(model.featurizer(), text));
}

double sim(std::span<const double> q, std::span<const double> p) {
  if (q.size() != p.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "similarity between vectors of dimension " +
                    std::to_string(q.size()) + " and " +
                    std::to_string(p.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) s += q[i] * p[i];
  return s;
}

double nll_from_scores(std::span<const double> scores) {
  if (scores.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "need a positive and >= 1 negative");
  }
  return detail::nll_with_coefficients(scores, nullptr);
}

namespace {

struct Candidates {
  SparseVec query;
  std::vector<SparseVec> items;  // positive first
};

Candidates featurize_all(const EncoderModel& model, std::string_view query,
                         std::string_view positive,
                         std::span<const std::string> negatives) {
  if (negatives.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "need at least one negative");
  }
  const auto& cfg = model.featurizer();
  Candidates c{featurize(cfg, query), {}};
  c.items.push_back(featurize(cfg, positive));
  for (const auto& n : negatives) c.items.push_back(featurize(cfg, n));
  return c;
}

}  // namespace

double nll_loss(const EncoderModel& model, std::string_view query_text,
                std::string_view positive_text,
                std::span<const std::string> negative_texts) {
  const auto c = featurize_all(model, query_text, positive_text, negative_texts);
  const DenseVec q = encode(model, c.query);
  std::vector<double> scores;
  for (const auto& item : c.items) scores.push_back(sim(q, encode(model, item)));
  return detail::nll_with_coefficients(scores, nullptr);
}

ProjectionGradient grad_nll(const EncoderModel& model,
                            std::string_view query_text,
                            std::string_view positive_text,
                            std::span<const std::string> negative_texts) {
  const auto c = featurize_all(model, query_text, positive_text, negative_texts);
  const std::size_t d = model.dim();
  const DenseVec q_raw = project(model, c.query);
  const DenseVec q = finish_encoding(model, q_raw);
  std::vector<DenseVec> raw;
  std::vector<DenseVec> encoded;
  std::vector<double> scores;
  for (const auto& item : c.items) {
    raw.push_back(project(model, item));
    encoded.push_back(finish_encoding(model, raw.back()));
    scores.push_back(sim(q, encoded.back()));
  }
  std::vector<double> coeff;
  detail::nll_with_coefficients(scores, &coeff);

  ProjectionGradient g{d, model.num_buckets(),
                       std::vector<double>(d * model.num_buckets(), 0.0)};
  auto add_outer = [&](const DenseVec& direction, double scale,
                       const SparseVec& x) {
    for (std::size_t k = 0; k < x.nnz(); ++k) {
      double* col = g.values.data() + x.indices[k] * d;
      const double s = scale * x.values[k];
      for (std::size_t i = 0; i < d; ++i) col[i] += s * direction[i];
    }
  };
  // dL/dq = sum_i a_i p_i, dL/dp_i = a_i q, then chain through the output
  // rescaling and p = W x.
  DenseVec dq(d, 0.0);
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    for (std::size_t r = 0; r < d; ++r) dq[r] += coeff[i] * encoded[i][r];
  }
  add_outer(encoding_backward(model, q_raw, dq), 1.0, c.query);
  for (std::size_t i = 0; i < c.items.size(); ++i) {
    DenseVec dp(q);
    for (double& v : dp) v *= coeff[i];
    add_outer(encoding_backward(model, raw[i], dp), 1.0, c.items[i]);
  }
  return g;
}

std::string serialize_model(const EncoderModel& model) {
  std::ostringstream out(std::ios::binary);
  const auto& cfg = model.featurizer();
  binary::write_u32(out, kModelMagic);
  binary::write_u32(out, kModelVersion);
  binary::write_u32(out, static_cast<std::uint32_t>(model.dim()));
  binary::write_u32(out, cfg.num_buckets);
  binary::write_u32(out, cfg.ngram_min);
  binary::write_u32(out, cfg.ngram_max);
  binary::write_u64(out, cfg.hash_seed);
  binary::write_f64(out, model.score_scale());
  for (std::size_t r = 0; r < model.dim(); ++r) {
    for (std::size_t b = 0; b < model.num_buckets(); ++b) {
      binary::write_f32(out, static_cast<float>(model.weight(r, b)));
    }
  }
  return std::move(out).str();
}

void save_model(const EncoderModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  const std::string bytes = serialize_model(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

EncoderModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  if (binary::read_u32(in) != kModelMagic) {
    throw Error(ErrorCode::kParse, path.string() + " is not a model file");
  }
  if (const auto v = binary::read_u32(in); v != kModelVersion) {
    throw Error(ErrorCode::kParse,
                "unsupported model version " + std::to_string(v));
  }
  const std::uint32_t dim = binary::read_u32(in);
  FeaturizerConfig cfg;
  cfg.num_buckets = binary::read_u32(in);
  cfg.ngram_min = binary::read_u32(in);
  cfg.ngram_max = binary::read_u32(in);
  cfg.hash_seed = binary::read_u64(in);
  const double score_scale = binary::read_f64(in);
  EncoderModel model(cfg, dim, score_scale);
  for (std::size_t r = 0; r < dim; ++r) {
    for (std::size_t b = 0; b < cfg.num_buckets; ++b) {
      const float w = binary::read_f32(in);
      if (!std::isfinite(w)) {
        throw Error(ErrorCode::kParse, "non-finite weight in " + path.string());
      }
      model.set_weight(r, b, w);
    }
  }
  return model;
}

}  // namespace xlkg
