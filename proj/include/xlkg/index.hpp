#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "xlkg/corpus.hpp"
#include "xlkg/encoder.hpp"

namespace xlkg {

/// What text of an English record is embedded in the index: the passage
/// (P2P), its keyphrase string (P2K), or both (P2PK).
enum class TargetMode : std::uint32_t { kP2P = 0, kP2K = 1, kP2PK = 2 };

std::string_view to_string(TargetMode mode);
TargetMode parse_target_mode(std::string_view text);

/// "kp1 [SEP] kp2 ..." for P2K, that string + " [CTX] " + text for P2PK.
/// Throws kInvalidArgument when a keyphrase mode meets an empty list.
std::string retrieval_target_text(const Passage& passage, TargetMode mode);

/// Exact (brute-force) inner-product index over float32 vectors.
class DenseIndex {
 public:
  DenseIndex(std::size_t dim, TargetMode mode);

  /// Throws kDuplicate for a repeated id, kInvalidArgument for a wrong
  /// dimension or a non-finite entry.
  void add(std::string id, std::span<const float> vector);
  void add(std::string id, std::span<const double> vector);

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  TargetMode mode() const { return mode_; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const float> vector(std::size_t i) const {
    return {vectors_.data() + i * dim_, dim_};
  }

  bool operator==(const DenseIndex& o) const {
    return dim_ == o.dim_ && mode_ == o.mode_ && ids_ == o.ids_ &&
           vectors_ == o.vectors_;
  }

 private:
  std::size_t dim_;
  TargetMode mode_;
  std::vector<std::string> ids_;
  std::unordered_set<std::string> id_set_;
  std::vector<float> vectors_;
};

DenseIndex build_index(const Corpus& corpus, const EncoderModel& model,
                       TargetMode mode);

struct SearchHit {
  std::string id;
  double score = 0.0;

  bool operator==(const SearchHit&) const = default;
};

struct SearchResult {
  std::vector<SearchHit> hits;  // score descending, ties by ascending id
  bool truncated = false;       // k exceeded the index size

  bool operator==(const SearchResult&) const = default;
};

/// Top-k by dot product. k larger than the index returns every entry and
/// sets `truncated`.
SearchResult search(const DenseIndex& index, std::span<const double> query,
                    std::size_t k);
SearchResult search(const DenseIndex& index, std::string_view query_text,
                    const EncoderModel& model, std::size_t k);

/// Searches many queries, spreading them over `threads` workers. Results
/// are in query order whatever the thread count.
std::vector<SearchResult> search_batch(const DenseIndex& index,
                                       const EncoderModel& model,
                                       std::span<const std::string> queries,
                                       std::size_t k, std::size_t threads = 1);

/// Fraction of evaluation pairs whose gold EN id is in the top k, per k.
std::map<std::size_t, double> recall_at_k(const DenseIndex& index,
                                          const EncoderModel& model,
                                          const Corpus& xx_corpus,
                                          const PairSet& eval_pairs,
                                          std::span<const std::size_t> ks,
                                          std::size_t threads = 1);

/// Search output for one query, as stored in hits files:
/// {"xx_id", "hits": [{"en_id", "score"}], "truncated"}.
struct QueryHits {
  std::string xx_id;
  SearchResult result;

  bool operator==(const QueryHits&) const = default;
};

void save_hits(std::span<const QueryHits> hits, const std::filesystem::path& path);

/// recall@k from stored hits. Evaluation pairs without a hits record count
/// as misses.
std::map<std::size_t, double> recall_from_hits(std::span<const QueryHits> hits,
                                               const PairSet& eval_pairs,
                                               std::span<const std::size_t> ks);
std::vector<QueryHits> load_hits(const std::filesystem::path& path);

void save_index(const DenseIndex& index, const std::filesystem::path& path);
DenseIndex load_index(const std::filesystem::path& path);

/// Precomputed embeddings: u32 dim, then (length-prefixed id, dim float32)
/// records to end of file. Lets an external encoder supply the vectors.
DenseIndex load_vector_file(const std::filesystem::path& path,
                            TargetMode mode);
void save_vector_file(const DenseIndex& index,
                      const std::filesystem::path& path);

}  // namespace xlkg
