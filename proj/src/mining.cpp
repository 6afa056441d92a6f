#include "xlkg/mining.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "xlkg/error.hpp"
#include "xlkg/parallel.hpp"

namespace xlkg {

void MarginConfig::validate() const {
  if (k_neighbors < 1) {
    throw Error(ErrorCode::kInvalidArgument, "k_neighbors must be >= 1");
  }
  if (!(threshold > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "margin threshold must be > 0");
  }
}

double cosine(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::kInvalidArgument, "cosine of vectors of different dimension");
  }
  double xy = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xy += x[i] * y[i];
    xx += x[i] * x[i];
    yy += y[i] * y[i];
  }
  if (xx == 0.0 || yy == 0.0) return 0.0;
  return xy / (std::sqrt(xx) * std::sqrt(yy));
}

namespace {

double top_k_sum(std::span<const double> sims, std::size_t k) {
  if (sims.size() < k) {
    throw Error(ErrorCode::kInvalidArgument,
                "neighbor list has " + std::to_string(sims.size()) +
                    " entries, margin needs k=" + std::to_string(k));
  }
  std::vector<double> v(sims.begin(), sims.end());
  std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k),
                    v.end(), std::greater<>());
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += v[i];
  return s;
}

std::vector<DenseVec> unit_rows(std::span<const DenseVec> rows) {
  std::vector<DenseVec> out(rows.begin(), rows.end());
  for (auto& v : out) {
    double n = 0.0;
    for (double x : v) n += x * x;
    if (n == 0.0) continue;
    n = std::sqrt(n);
    for (double& x : v) x /= n;
  }
  return out;
}

double dot(const DenseVec& a, const DenseVec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct Neighbor {
  double sim;
  std::size_t idx;
};

// k most similar rows of `others` to `v`; ties by ascending id.
std::vector<Neighbor> nearest(const DenseVec& v, const std::vector<DenseVec>& others,
                              std::span<const std::string> other_ids,
                              std::size_t k) {
  std::vector<Neighbor> all(others.size());
  for (std::size_t j = 0; j < others.size(); ++j) all[j] = {dot(v, others[j]), j};
  auto better = [&](const Neighbor& a, const Neighbor& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    return other_ids[a.idx] < other_ids[b.idx];
  };
  const std::size_t keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep),
                    all.end(), better);
  all.resize(keep);
  return all;
}

}  // namespace

MarginScore ratio_margin(double cos_xy, std::span<const double> nn_x,
                         std::span<const double> nn_y, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "margin needs k >= 1");
  const double denom = top_k_sum(nn_x, k) / (2.0 * static_cast<double>(k)) +
                       top_k_sum(nn_y, k) / (2.0 * static_cast<double>(k));
  if (!(denom > 0.0)) return {0.0, true};
  return {cos_xy / denom, false};
}

MarginScore margin_score(std::span<const double> x, std::span<const double> y,
                         std::span<const double> nn_x,
                         std::span<const double> nn_y, std::size_t k) {
  return ratio_margin(cosine(x, y), nn_x, nn_y, k);
}

PairSet mine_bitext(std::span<const std::string> xx_ids,
                    std::span<const DenseVec> xx_vectors,
                    std::span<const std::string> en_ids,
                    std::span<const DenseVec> en_vectors,
                    const MarginConfig& cfg, std::size_t threads) {
  cfg.validate();
  if (xx_ids.size() != xx_vectors.size() || en_ids.size() != en_vectors.size()) {
    throw Error(ErrorCode::kInvalidArgument, "id and vector counts differ");
  }
  if (xx_ids.empty() || en_ids.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "bitext mining needs two non-empty sides");
  }
  const std::size_t k = std::min({cfg.k_neighbors, xx_ids.size(), en_ids.size()});
  const auto xs = unit_rows(xx_vectors);
  const auto ys = unit_rows(en_vectors);

  // Neighborhood density of every EN passage among the XX side.
  std::vector<double> en_density(ys.size());
  std::vector<std::vector<Neighbor>> en_neighbors(ys.size());
  parallel_for(ys.size(), threads, [&](std::size_t j) {
    en_neighbors[j] = nearest(ys[j], xs, xx_ids, k);
    std::vector<double> sims;
    for (const auto& n : en_neighbors[j]) sims.push_back(n.sim);
    en_density[j] = top_k_sum(sims, k);
  });

  struct Match {
    std::size_t en = 0;
    MarginScore score;
    bool found = false;
  };
  auto best_match = [&](const std::vector<Neighbor>& cands, double own_sum,
                        const std::vector<double>& other_density,
                        std::span<const std::string> other_ids) {
    Match best;
    for (const auto& c : cands) {
      const double denom = own_sum / (2.0 * static_cast<double>(k)) +
                           other_density[c.idx] / (2.0 * static_cast<double>(k));
      const MarginScore s =
          denom > 0.0 ? MarginScore{c.sim / denom, false} : MarginScore{0.0, true};
      if (!best.found || s.value > best.score.value ||
          (s.value == best.score.value && other_ids[c.idx] < other_ids[best.en])) {
        best = {c.idx, s, true};
      }
    }
    return best;
  };

  std::vector<double> xx_density(xs.size());
  std::vector<std::vector<Neighbor>> xx_neighbors(xs.size());
  parallel_for(xs.size(), threads, [&](std::size_t i) {
    xx_neighbors[i] = nearest(xs[i], ys, en_ids, k);
    std::vector<double> sims;
    for (const auto& n : xx_neighbors[i]) sims.push_back(n.sim);
    xx_density[i] = top_k_sum(sims, k);
  });

  std::vector<Match> forward(xs.size());
  parallel_for(xs.size(), threads, [&](std::size_t i) {
    forward[i] = best_match(xx_neighbors[i], xx_density[i], en_density, en_ids);
  });
  std::vector<Match> backward;
  if (cfg.bidirectional) {
    backward.resize(ys.size());
    parallel_for(ys.size(), threads, [&](std::size_t j) {
      backward[j] = best_match(en_neighbors[j], en_density[j], xx_density, xx_ids);
    });
  }

  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return xx_ids[a] < xx_ids[b]; });
  PairSet out(PairKind::kPseudo);
  for (std::size_t i : order) {
    const Match& m = forward[i];
    if (!m.found || m.score.degenerate || m.score.value < cfg.threshold) continue;
    if (cfg.bidirectional && !(backward[m.en].found && backward[m.en].en == i)) {
      continue;
    }
    out.add({xx_ids[i], en_ids[m.en], m.score.value});
  }
  return out;
}

PairSet mine_bitext(const Corpus& xx_corpus, const Corpus& en_corpus,
                    const EncoderModel& model, const MarginConfig& cfg,
                    std::size_t threads) {
  auto embed = [&](const Corpus& c, std::vector<std::string>& ids,
                   std::vector<DenseVec>& vecs) {
    for (const auto& p : c.passages()) {
      ids.push_back(p.id);
      vecs.push_back(encode(model, p.text));
    }
  };
  std::vector<std::string> xx_ids, en_ids;
  std::vector<DenseVec> xx_vecs, en_vecs;
  embed(xx_corpus, xx_ids, xx_vecs);
  embed(en_corpus, en_ids, en_vecs);
  return mine_bitext(xx_ids, xx_vecs, en_ids, en_vecs, cfg, threads);
}

}  // namespace xlkg
