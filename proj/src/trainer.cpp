#include "xlkg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "loss_kernel.hpp"
#include "xlkg/error.hpp"

namespace xlkg {

void TrainConfig::validate() const {
  featurizer.validate();
  if (dim < 2) throw Error(ErrorCode::kInvalidArgument, "dim must be >= 2");
  if (batch_size < 1) {
    throw Error(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  }
  if (negatives < 1) {
    throw Error(ErrorCode::kInvalidArgument, "negatives must be >= 1");
  }
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::kInvalidArgument,
                "learning_rate must be finite and >= 0");
  }
  if (!(score_scale >= 0.0) || !std::isfinite(score_scale)) {
    throw Error(ErrorCode::kInvalidArgument, "score_scale must be finite and >= 0");
  }
}

namespace {

// Dense gradient buffer that remembers which columns were touched so an
// update costs O(touched * dim) rather than O(buckets * dim).
class ColumnAccumulator {
 public:
  ColumnAccumulator(std::size_t dim, std::size_t buckets)
      : dim_(dim), values_(dim * buckets, 0.0), touched_(buckets, 0) {}

  void add_outer(std::span<const double> direction, double scale,
                 const SparseVec& x) {
    for (std::size_t k = 0; k < x.nnz(); ++k) {
      const std::uint32_t b = x.indices[k];
      if (!touched_[b]) {
        touched_[b] = 1;
        order_.push_back(b);
      }
      double* col = values_.data() + b * dim_;
      const double s = scale * x.values[k];
      for (std::size_t i = 0; i < dim_; ++i) col[i] += s * direction[i];
    }
  }

  void apply_and_clear(EncoderModel& model, double step) {
    for (std::uint32_t b : order_) {
      double* g = values_.data() + b * dim_;
      auto w = model.column(b);
      for (std::size_t i = 0; i < dim_; ++i) {
        w[i] -= step * g[i];
        g[i] = 0.0;
      }
      touched_[b] = 0;
    }
    order_.clear();
  }

 private:
  std::size_t dim_;
  std::vector<double> values_;
  std::vector<std::uint8_t> touched_;
  std::vector<std::uint32_t> order_;
};

constexpr std::size_t kNotInPool = static_cast<std::size_t>(-1);

}  // namespace

TrainResult train_retriever(std::span<const TrainingPair> pairs,
                            const Corpus& negative_pool,
                            const TrainConfig& cfg, const EncoderModel* init) {
  cfg.validate();
  if (pairs.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "train_retriever needs >= 1 pair");
  }
  if (negative_pool.size() <= cfg.negatives) {
    throw Error(ErrorCode::kInvalidArgument,
                "negative pool (" + std::to_string(negative_pool.size()) +
                    ") must be larger than negatives per positive (" +
                    std::to_string(cfg.negatives) + ")");
  }

  EncoderModel model =
      init != nullptr ? *init
                      : EncoderModel::random(cfg.featurizer, cfg.dim,
                                             cfg.seed ^ 0x5EEDC0DEULL,
                                             cfg.init_scale, cfg.score_scale);
  if (init != nullptr && !(init->featurizer() == cfg.featurizer)) {
    throw Error(ErrorCode::kInvalidArgument,
                "initial model featurizer differs from the training config");
  }
  const auto& fcfg = model.featurizer();
  const std::size_t d = model.dim();

  const auto pool = negative_pool.passages();
  std::vector<SparseVec> pool_features;
  pool_features.reserve(pool.size());
  for (const auto& p : pool) pool_features.push_back(featurize(fcfg, p.text));

  std::vector<SparseVec> query_features;
  std::vector<SparseVec> positive_features;
  std::vector<std::size_t> positive_pool_index;
  for (const auto& pair : pairs) {
    query_features.push_back(featurize(fcfg, pair.query_text));
    positive_features.push_back(featurize(fcfg, pair.positive_text));
    const Passage* p = negative_pool.find(pair.positive_id);
    positive_pool_index.push_back(
        p != nullptr ? negative_pool.index_of(pair.positive_id) : kNotInPool);
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);

  ColumnAccumulator grad(d, model.num_buckets());
  // Per-batch caches of pool encodings and of their accumulated gradients.
  std::vector<DenseVec> pool_raw(pool.size());
  std::vector<DenseVec> pool_vec(pool.size());
  std::vector<DenseVec> pool_grad(pool.size());
  std::vector<std::uint8_t> pool_live(pool.size(), 0);
  std::vector<std::size_t> live_list;

  TrainResult result{model, {}};
  std::vector<double> scores;
  std::vector<double> coeff;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::size_t batch = end - start;

      // Sample negatives for the whole batch before touching the weights.
      std::vector<std::vector<std::size_t>> negatives(batch);
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t ex = order[start + b];
        std::unordered_set<std::size_t> chosen;
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        while (negatives[b].size() < cfg.negatives) {
          const std::size_t j = pick(rng);
          if (j == positive_pool_index[ex] || !chosen.insert(j).second) continue;
          negatives[b].push_back(j);
        }
      }

      auto live = [&](std::size_t j) -> const DenseVec& {
        if (!pool_live[j]) {
          pool_live[j] = 1;
          live_list.push_back(j);
          pool_raw[j] = project(model, pool_features[j]);
          pool_vec[j] = finish_encoding(model, pool_raw[j]);
          pool_grad[j].assign(d, 0.0);
        }
        return pool_vec[j];
      };

      std::vector<DenseVec> queries_raw(batch);
      std::vector<DenseVec> positives_raw(batch);
      std::vector<DenseVec> queries(batch);
      std::vector<DenseVec> positives(batch);
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t ex = order[start + b];
        queries_raw[b] = project(model, query_features[ex]);
        positives_raw[b] = project(model, positive_features[ex]);
        queries[b] = finish_encoding(model, queries_raw[b]);
        positives[b] = finish_encoding(model, positives_raw[b]);
      }
      auto add_item_grad = [&](std::size_t o, double a, const DenseVec& q) {
        DenseVec dp(q);
        for (double& v : dp) v *= a;
        grad.add_outer(encoding_backward(model, positives_raw[o], dp), 1.0,
                       positive_features[order[start + o]]);
      };

      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t ex = order[start + b];
        const DenseVec& q = queries[b];
        scores.assign(1, sim(q, positives[b]));
        for (std::size_t j : negatives[b]) scores.push_back(sim(q, live(j)));
        std::vector<std::size_t> in_batch;
        if (cfg.in_batch_negatives) {
          for (std::size_t o = 0; o < batch; ++o) {
            const std::size_t other = order[start + o];
            if (o == b || pairs[other].positive_id == pairs[ex].positive_id) {
              continue;
            }
            in_batch.push_back(o);
            scores.push_back(sim(q, positives[o]));
          }
        }

        const double loss = detail::nll_with_coefficients(scores, &coeff);
        if (!std::isfinite(loss)) {
          throw Error(ErrorCode::kNumeric,
                      "non-finite training loss at epoch " +
                          std::to_string(epoch) + ", example " +
                          std::to_string(ex) + " (query '" +
                          pairs[ex].query_text.substr(0, 40) + "')");
        }
        epoch_loss += loss;

        // dL/dq = sum_i a_i p_i; dL/dp_i = a_i q (on the encodings).
        DenseVec dq(d, 0.0);
        auto accumulate_dq = [&](double a, const DenseVec& p) {
          for (std::size_t r = 0; r < d; ++r) dq[r] += a * p[r];
        };
        accumulate_dq(coeff[0], positives[b]);
        add_item_grad(b, coeff[0], q);
        for (std::size_t n = 0; n < negatives[b].size(); ++n) {
          const std::size_t j = negatives[b][n];
          const double a = coeff[1 + n];
          accumulate_dq(a, pool_vec[j]);
          for (std::size_t r = 0; r < d; ++r) pool_grad[j][r] += a * q[r];
        }
        for (std::size_t n = 0; n < in_batch.size(); ++n) {
          const std::size_t o = in_batch[n];
          const double a = coeff[1 + negatives[b].size() + n];
          accumulate_dq(a, positives[o]);
          add_item_grad(o, a, q);
        }
        grad.add_outer(encoding_backward(model, queries_raw[b], dq), 1.0,
                       query_features[ex]);
      }

      std::sort(live_list.begin(), live_list.end());
      for (std::size_t j : live_list) {
        grad.add_outer(encoding_backward(model, pool_raw[j], pool_grad[j]), 1.0,
                       pool_features[j]);
        pool_live[j] = 0;
      }
      live_list.clear();
      grad.apply_and_clear(model, cfg.learning_rate / static_cast<double>(batch));
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(pairs.size()));
  }

  if (!model.all_finite()) {
    throw Error(ErrorCode::kNumeric, "training produced non-finite weights");
  }
  model.round_to_float();
  result.model = std::move(model);
  return result;
}

}  // namespace xlkg
