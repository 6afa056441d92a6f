#include "xlkg/index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <unordered_map>
#include <unordered_set>

#include "xlkg/binary_io.hpp"
#include "xlkg/error.hpp"
#include "xlkg/jsonl.hpp"
#include "xlkg/parallel.hpp"

namespace xlkg {

namespace {

constexpr std::uint32_t kIndexMagic = 0x494B4C58;  // "XLKI"
constexpr std::uint32_t kIndexVersion = 1;

struct Scored {
  double score;
  std::size_t row;
};

}  // namespace

std::string_view to_string(TargetMode mode) {
  switch (mode) {
    case TargetMode::kP2P: return "P2P";
    case TargetMode::kP2K: return "P2K";
    case TargetMode::kP2PK: return "P2PK";
  }
  return "?";
}

TargetMode parse_target_mode(std::string_view text) {
  if (text == "P2P") return TargetMode::kP2P;
  if (text == "P2K") return TargetMode::kP2K;
  if (text == "P2PK") return TargetMode::kP2PK;
  throw Error(ErrorCode::kInvalidArgument,
              "retrieval mode must be P2P, P2K or P2PK: '" + std::string(text) + "'");
}

std::string retrieval_target_text(const Passage& passage, TargetMode mode) {
  if (mode == TargetMode::kP2P) return passage.text;
  if (passage.keyphrases.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "passage '" + passage.id + "' has no keyphrases for " +
                    std::string(to_string(mode)) + " indexing");
  }
  std::string kps;
  for (std::size_t i = 0; i < passage.keyphrases.size(); ++i) {
    if (i > 0) kps += " [SEP] ";
    kps += passage.keyphrases[i];
  }
  if (mode == TargetMode::kP2K) return kps;
  return kps + " [CTX] " + passage.text;
}

DenseIndex::DenseIndex(std::size_t dim, TargetMode mode)
    : dim_(dim), mode_(mode) {
  if (dim_ == 0) throw Error(ErrorCode::kInvalidArgument, "index dim must be > 0");
}

void DenseIndex::add(std::string id, std::span<const float> vector) {
  if (vector.size() != dim_) {
    throw Error(ErrorCode::kInvalidArgument,
                "vector for '" + id + "' has dimension " +
                    std::to_string(vector.size()) + ", index expects " +
                    std::to_string(dim_));
  }
  for (float v : vector) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument, "non-finite vector entry for '" + id + "'");
    }
  }
  if (!id_set_.insert(id).second) {
    throw Error(ErrorCode::kDuplicate, "duplicate index id '" + id + "'");
  }
  ids_.push_back(std::move(id));
  vectors_.insert(vectors_.end(), vector.begin(), vector.end());
}

void DenseIndex::add(std::string id, std::span<const double> vector) {
  std::vector<float> f(vector.begin(), vector.end());
  add(std::move(id), std::span<const float>(f));
}

DenseIndex build_index(const Corpus& corpus, const EncoderModel& model,
                       TargetMode mode) {
  if (corpus.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "cannot index an empty corpus");
  }
  DenseIndex index(model.dim(), mode);
  for (const auto& p : corpus.passages()) {
    index.add(p.id, std::span<const double>(
                        encode(model, retrieval_target_text(p, mode))));
  }
  return index;
}

SearchResult search(const DenseIndex& index, std::span<const double> query,
                    std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (query.size() != index.dim()) {
    throw Error(ErrorCode::kInvalidArgument,
                "query dimension " + std::to_string(query.size()) +
                    " does not match index dimension " +
                    std::to_string(index.dim()));
  }
  const auto& ids = index.ids();
  auto better = [&](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return ids[a.row] < ids[b.row];
  };
  const std::size_t keep = std::min(k, index.size());
  // Bounded heap whose top is the worst hit kept so far.
  std::priority_queue<Scored, std::vector<Scored>, decltype(better)> heap(better);
  for (std::size_t row = 0; row < index.size(); ++row) {
    const auto v = index.vector(row);
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += query[i] * static_cast<double>(v[i]);
    const Scored cand{s, row};
    if (heap.size() < keep) {
      heap.push(cand);
    } else if (keep > 0 && better(cand, heap.top())) {
      heap.pop();
      heap.push(cand);
    }
  }
  SearchResult result;
  result.truncated = k > index.size();
  result.hits.resize(heap.size());
  for (std::size_t i = heap.size(); i-- > 0;) {
    result.hits[i] = {ids[heap.top().row], heap.top().score};
    heap.pop();
  }
  return result;
}

SearchResult search(const DenseIndex& index, std::string_view query_text,
                    const EncoderModel& model, std::size_t k) {
  if (model.dim() != index.dim()) {
    throw Error(ErrorCode::kInvalidArgument,
                "model dimension " + std::to_string(model.dim()) +
                    " does not match index dimension " +
                    std::to_string(index.dim()));
  }
  return search(index, std::span<const double>(encode(model, query_text)), k);
}

std::vector<SearchResult> search_batch(const DenseIndex& index,
                                       const EncoderModel& model,
                                       std::span<const std::string> queries,
                                       std::size_t k, std::size_t threads) {
  std::vector<SearchResult> out(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t i) {
    out[i] = search(index, queries[i], model, k);
  });
  return out;
}

std::map<std::size_t, double> recall_at_k(const DenseIndex& index,
                                          const EncoderModel& model,
                                          const Corpus& xx_corpus,
                                          const PairSet& eval_pairs,
                                          std::span<const std::size_t> ks,
                                          std::size_t threads) {
  if (eval_pairs.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "recall@k needs a non-empty evaluation set");
  }
  if (ks.empty()) throw Error(ErrorCode::kInvalidArgument, "no k values given");
  const std::size_t max_k = *std::max_element(ks.begin(), ks.end());
  std::vector<std::string> queries;
  for (const auto& pair : eval_pairs.pairs()) {
    if (!pair.en_id) {
      throw Error(ErrorCode::kInvalidArgument, "recall@k needs pairs with en_id");
    }
    queries.push_back(xx_corpus.at(pair.xx_id).text);
  }
  const auto results = search_batch(index, model, queries, max_k, threads);
  std::map<std::size_t, double> recall;
  for (std::size_t k : ks) {
    if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
    std::size_t hits = 0;
    for (std::size_t q = 0; q < results.size(); ++q) {
      const auto& gold = *eval_pairs.pairs()[q].en_id;
      const auto& h = results[q].hits;
      const std::size_t upto = std::min(k, h.size());
      for (std::size_t r = 0; r < upto; ++r) {
        if (h[r].id == gold) {
          ++hits;
          break;
        }
      }
    }
    recall[k] = static_cast<double>(hits) / static_cast<double>(results.size());
  }
  return recall;
}

void save_hits(std::span<const QueryHits> hits, const std::filesystem::path& path) {
  JsonlWriter out(path);
  for (const auto& q : hits) {
    Json list = Json::array();
    for (const auto& h : q.result.hits) list.push_back({{"en_id", h.id}, {"score", h.score}});
    out.write(Json{{"xx_id", q.xx_id}, {"hits", list}, {"truncated", q.result.truncated}});
  }
  out.close();
}

std::map<std::size_t, double> recall_from_hits(std::span<const QueryHits> hits,
                                               const PairSet& eval_pairs,
                                               std::span<const std::size_t> ks) {
  if (eval_pairs.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "recall needs at least one evaluation pair");
  }
  std::unordered_map<std::string, const SearchResult*> by_id;
  for (const auto& q : hits) by_id.emplace(q.xx_id, &q.result);
  std::map<std::size_t, double> out;
  for (std::size_t k : ks) {
    if (k == 0) throw Error(ErrorCode::kInvalidArgument, "recall@k needs k >= 1");
    std::size_t found = 0;
    for (const auto& pair : eval_pairs.pairs()) {
      const auto it = by_id.find(pair.xx_id);
      if (it == by_id.end() || !pair.en_id) continue;
      const auto& list = it->second->hits;
      const std::size_t n = std::min(k, list.size());
      for (std::size_t r = 0; r < n; ++r) {
        if (list[r].id == *pair.en_id) {
          ++found;
          break;
        }
      }
    }
    out[k] = static_cast<double>(found) / static_cast<double>(eval_pairs.size());
  }
  return out;
}

std::vector<QueryHits> load_hits(const std::filesystem::path& path) {
  std::vector<QueryHits> out;
  std::unordered_set<std::string> seen;
  for_each_json_line(path, [&](const Json& rec, std::size_t line) {
    QueryHits q;
    q.xx_id = require_string(rec, "xx_id", line);
    if (!seen.insert(q.xx_id).second) {
      throw_parse_error(path, line, "duplicate xx_id '" + q.xx_id + "'");
    }
    const auto it = rec.find("hits");
    if (it == rec.end() || !it->is_array()) throw_parse_error(path, line, "'hits' must be an array");
    for (const auto& h : *it) {
      if (!h.is_object() || !h.contains("en_id") || !h["en_id"].is_string() ||
          !h.contains("score") || !h["score"].is_number()) {
        throw_parse_error(path, line, "hit needs string 'en_id' and numeric 'score'");
      }
      q.result.hits.push_back({h["en_id"].get<std::string>(), h["score"].get<double>()});
    }
    if (const auto t = rec.find("truncated"); t != rec.end()) {
      if (!t->is_boolean()) throw_parse_error(path, line, "'truncated' must be a boolean");
      q.result.truncated = t->get<bool>();
    }
    out.push_back(std::move(q));
  });
  return out;
}

void save_index(const DenseIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  binary::write_u32(out, kIndexMagic);
  binary::write_u32(out, kIndexVersion);
  binary::write_u64(out, index.size());
  binary::write_u32(out, static_cast<std::uint32_t>(index.dim()));
  binary::write_u32(out, static_cast<std::uint32_t>(index.mode()));
  for (const auto& id : index.ids()) binary::write_string(out, id);
  for (std::size_t i = 0; i < index.size(); ++i) {
    for (float v : index.vector(i)) binary::write_f32(out, v);
  }
}

DenseIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  if (binary::read_u32(in) != kIndexMagic) {
    throw Error(ErrorCode::kParse, path.string() + " is not an index file");
  }
  if (const auto v = binary::read_u32(in); v != kIndexVersion) {
    throw Error(ErrorCode::kParse, "unsupported index version " + std::to_string(v));
  }
  const std::uint64_t count = binary::read_u64(in);
  const std::uint32_t dim = binary::read_u32(in);
  const std::uint32_t mode = binary::read_u32(in);
  if (mode > static_cast<std::uint32_t>(TargetMode::kP2PK)) {
    throw Error(ErrorCode::kParse, "unknown target mode " + std::to_string(mode));
  }
  std::vector<std::string> ids;
  ids.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) ids.push_back(binary::read_string(in));
  DenseIndex index(dim, static_cast<TargetMode>(mode));
  std::vector<float> row(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    for (auto& v : row) v = binary::read_f32(in);
    index.add(std::move(ids[i]), std::span<const float>(row));
  }
  return index;
}

DenseIndex load_vector_file(const std::filesystem::path& path, TargetMode mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  const std::uint32_t dim = binary::read_u32(in);
  DenseIndex index(dim, mode);
  std::vector<float> row(dim);
  while (in.peek() != std::char_traits<char>::eof()) {
    std::string id = binary::read_string(in);
    for (auto& v : row) v = binary::read_f32(in);
    index.add(std::move(id), std::span<const float>(row));
  }
  return index;
}

void save_vector_file(const DenseIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  binary::write_u32(out, static_cast<std::uint32_t>(index.dim()));
  for (std::size_t i = 0; i < index.size(); ++i) {
    binary::write_string(out, index.ids()[i]);
    for (float v : index.vector(i)) binary::write_f32(out, v);
  }
}

}  // namespace xlkg
