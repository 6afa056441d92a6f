#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace xlkg {

/// Two-letter uppercase language tag. The seven languages of the
/// multilingual keyphrase setting are "known"; other ISO-639-1 codes are
/// accepted and reported as unknown.
class LangCode {
 public:
  LangCode() = default;

  /// Accepts two ASCII letters in any case; throws kInvalidArgument otherwise.
  static LangCode parse(std::string_view text);

  const std::string& str() const { return code_; }
  bool known() const;
  bool is_english() const { return code_ == "EN"; }

  auto operator<=>(const LangCode&) const = default;

 private:
  explicit LangCode(std::string code) : code_(std::move(code)) {}
  std::string code_;
};

struct Passage {
  std::string id;
  LangCode lang;
  std::string text;
  std::vector<std::string> keyphrases;

  bool operator==(const Passage&) const = default;
};

/// Normalizes and deduplicates a keyphrase list in place (first occurrence
/// kept, empty phrases dropped). Returns the number of entries removed.
std::size_t canonicalize_keyphrases(std::vector<std::string>& keyphrases);

class Corpus {
 public:
  /// Throws kDuplicate when the id is already present and kInvalidArgument
  /// for a blank text.
  void add(Passage passage);

  const Passage* find(std::string_view id) const;
  const Passage& at(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id) != nullptr; }

  std::span<const Passage> passages() const { return passages_; }
  std::size_t size() const { return passages_.size(); }
  bool empty() const { return passages_.empty(); }
  std::size_t index_of(std::string_view id) const;

  const std::map<LangCode, std::size_t>& lang_histogram() const {
    return histogram_;
  }

  bool operator==(const Corpus& other) const {
    return passages_ == other.passages_;
  }

 private:
  std::vector<Passage> passages_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::map<LangCode, std::size_t> histogram_;
};

struct LoadStats {
  std::size_t records = 0;
  std::size_t blank_lines = 0;
  std::size_t deduplicated_keyphrases = 0;
  std::size_t lang_mismatches = 0;
  std::size_t unknown_langs = 0;
};

Corpus load_corpus(const std::filesystem::path& path,
                   std::optional<LangCode> expected_lang = std::nullopt,
                   LoadStats* stats = nullptr);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

enum class PairKind { kParallel, kNonParallel, kPseudo };

std::string_view to_string(PairKind kind);
PairKind parse_pair_kind(std::string_view text);

struct PassagePair {
  std::string xx_id;
  std::optional<std::string> en_id;
  std::optional<double> score;

  bool operator==(const PassagePair&) const = default;
};

/// Typed, order-preserving list of (XX, EN) passage pairs. NP sets carry
/// only XX ids.
class PairSet {
 public:
  explicit PairSet(PairKind kind) : kind_(kind) {}

  /// Throws kInvalidArgument on a shape that does not fit the kind and
  /// kDuplicate on a repeated (xx_id, en_id).
  void add(PassagePair pair);

  PairKind kind() const { return kind_; }
  std::span<const PassagePair> pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }

  /// First EN partner recorded for the given XX id.
  std::optional<std::string> partner_of(std::string_view xx_id) const;

  bool operator==(const PairSet&) const = default;

 private:
  PairKind kind_;
  std::vector<PassagePair> pairs_;
  std::map<std::pair<std::string, std::string>, std::size_t> seen_;
};

/// Loads a pair file and resolves every id against the corpora (en_corpus
/// is required for PAR and PSEUDO kinds).
PairSet load_pairs(const std::filesystem::path& path, PairKind kind,
                   const Corpus& xx_corpus, const Corpus* en_corpus = nullptr);
void save_pairs(const PairSet& pairs, const std::filesystem::path& path);

/// Partitions the target-language corpus into the passages named by the
/// parallel split and everything else, both in corpus order.
std::pair<Corpus, Corpus> split_par_np(const Corpus& xx_corpus,
                                       const PairSet& par);

}  // namespace xlkg
