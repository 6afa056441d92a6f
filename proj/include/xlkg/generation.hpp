#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xlkg/corpus.hpp"
#include "xlkg/index.hpp"

namespace xlkg {

// ---------------------------------------------------------------------------
// Code-mixed sequence formats

inline constexpr std::string_view kEnKpsToken = "[ENKPS]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kCtxToken = "[CTX]";

struct CodeMixInput {
  std::vector<std::string> retrieved_kps;  // retrieval-rank order, duplicates kept
  std::string passage_text;
  LangCode lang;
};

/// "[ENKPS] kp1 [SEP] ... [SEP] kpN [CTX] <text> [XX]".
std::string assemble_codemix_input(const CodeMixInput& input);

/// "[XX] kp1 [SEP] ... [SEP] kpn"; throws on an empty list.
std::string assemble_target(std::span<const std::string> keyphrases,
                            const LangCode& lang);

struct ParsedTarget {
  LangCode lang;
  std::vector<std::string> keyphrases;
};

/// Inverse of assemble_target. Empty segments between separators are
/// dropped; a missing leading language token is an error.
ParsedTarget parse_target(std::string_view sequence);

/// True when the text holds one of the control tokens ([ENKPS], [SEP],
/// [CTX]) or a bracketed two-letter language tag.
bool contains_control_token(std::string_view text);

// ---------------------------------------------------------------------------
// Retrieved knowledge

/// Keyphrases of the m retrieved English passages, grouped by rank.
struct RetrievedKnowledge {
  std::vector<std::string> passage_ids;
  std::vector<std::vector<std::string>> keyphrases;

  bool empty() const { return passage_ids.empty(); }
  /// Concatenation in rank order, duplicates kept.
  std::vector<std::string> flat() const;
};

RetrievedKnowledge knowledge_from_hits(const SearchResult& hits,
                                       const Corpus& en_corpus, std::size_t m);

// ---------------------------------------------------------------------------
// Desk-scale generators

struct ScoredPhrase {
  std::string phrase;
  double score = 0.0;
  std::size_t tokens = 0;
  std::size_t first_position = 0;
};

/// Every candidate 1-4 token phrase of the passage with its
/// count x 1 / (1 + first_position / num_tokens) score, best first.
std::vector<ScoredPhrase> extractive_candidates(std::string_view text);

/// Top max_kps extractive candidates (ties: longer phrase, earlier
/// position, then lexicographic).
std::vector<std::string> extractive_generate(const Passage& passage,
                                             std::size_t max_kps);

/// EN keyphrase -> co-occurring XX keyphrases with counts, all normalized.
class PhraseLexicon {
 public:
  void add(std::string_view en_kp, std::string_view xx_kp, std::size_t count = 1);
  /// Cross product of the two lists, each distinct pair counted once.
  void add_cooccurrence(std::span<const std::string> en_kps,
                        std::span<const std::string> xx_kps);

  const std::map<std::string, std::size_t>* projections(std::string_view en_kp) const;
  const std::map<std::string, std::map<std::string, std::size_t>>& entries() const {
    return entries_;
  }
  std::size_t size() const;  // number of (en, xx) entries
  bool empty() const { return entries_.empty(); }

  bool operator==(const PhraseLexicon&) const = default;

 private:
  std::map<std::string, std::map<std::string, std::size_t>> entries_;
};

struct LexiconStats {
  std::size_t pairs_used = 0;
  std::size_t pairs_skipped = 0;  // a side without keyphrases
};

PhraseLexicon build_lexicon(const PairSet& par, const Corpus& xx_corpus,
                            const Corpus& en_corpus, LexiconStats* stats = nullptr);

/// Extractive candidates of the passage merged with lexicon projections of
/// the retrieved EN keyphrases (count x 1 / (1 + rank), summed over
/// duplicates). With no knowledge or an empty lexicon this is exactly
/// extractive_generate.
std::vector<std::string> augmented_generate(const Passage& passage,
                                            const RetrievedKnowledge& knowledge,
                                            const PhraseLexicon& lexicon,
                                            std::size_t max_kps);

enum class GeneratorKind { kExtractiveBase, kLexiconAugmented, kExternalFile };

std::string_view to_string(GeneratorKind kind);
GeneratorKind parse_generator_kind(std::string_view text);

struct GenerationRequest {
  const Passage* passage = nullptr;
  RetrievedKnowledge knowledge;
};

/// Batch keyphrase predictor; implementations are deterministic.
class KeyphraseGenerator {
 public:
  virtual ~KeyphraseGenerator() = default;
  virtual GeneratorKind kind() const = 0;
  virtual std::vector<std::vector<std::string>> predict(
      std::span<const GenerationRequest> requests, std::size_t threads = 1) const = 0;
};

class ExtractiveGenerator final : public KeyphraseGenerator {
 public:
  explicit ExtractiveGenerator(std::size_t max_kps) : max_kps_(max_kps) {}
  GeneratorKind kind() const override { return GeneratorKind::kExtractiveBase; }
  std::vector<std::vector<std::string>> predict(
      std::span<const GenerationRequest> requests, std::size_t threads) const override;

 private:
  std::size_t max_kps_;
};

class LexiconGenerator final : public KeyphraseGenerator {
 public:
  LexiconGenerator(PhraseLexicon lexicon, std::size_t max_kps)
      : lexicon_(std::move(lexicon)), max_kps_(max_kps) {}
  GeneratorKind kind() const override { return GeneratorKind::kLexiconAugmented; }
  std::vector<std::vector<std::string>> predict(
      std::span<const GenerationRequest> requests, std::size_t threads) const override;
  const PhraseLexicon& lexicon() const { return lexicon_; }

 private:
  PhraseLexicon lexicon_;
  std::size_t max_kps_;
};

/// Predictions produced outside this process. When the predictions file
/// is absent, predict() writes the requests as a code-mix file and throws
/// ErrorCode::kPending; rerunning after the file appears resumes.
class ExternalFileGenerator final : public KeyphraseGenerator {
 public:
  ExternalFileGenerator(std::filesystem::path predictions,
                        std::filesystem::path requests_out)
      : predictions_(std::move(predictions)), requests_out_(std::move(requests_out)) {}
  GeneratorKind kind() const override { return GeneratorKind::kExternalFile; }
  std::vector<std::vector<std::string>> predict(
      std::span<const GenerationRequest> requests, std::size_t threads) const override;

 private:
  std::filesystem::path predictions_;
  std::filesystem::path requests_out_;
};

// ---------------------------------------------------------------------------
// Exchange protocol with external (neural) generators

/// One record per example: {"id", "source", "target"}; "target" is omitted
/// for passages without gold keyphrases. Throws kInvalidArgument when a
/// keyphrase contains a control token.
void export_codemix_dataset(std::span<const Passage> examples,
                            std::span<const RetrievedKnowledge> knowledge,
                            const std::filesystem::path& path);

/// Reads {"id", "keyphrases": [...]} records, normalizing phrases. When
/// `known_ids` is given, an id outside it is an error.
std::map<std::string, std::vector<std::string>> import_predictions(
    const std::filesystem::path& path, const Corpus* known_ids = nullptr);

void save_predictions(const std::vector<std::string>& ids,
                      const std::vector<std::vector<std::string>>& predictions,
                      const std::filesystem::path& path);

}  // namespace xlkg
