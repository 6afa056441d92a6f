#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xlkg/corpus.hpp"
#include "xlkg/encoder.hpp"
#include "xlkg/generation.hpp"
#include "xlkg/index.hpp"
#include "xlkg/trainer.hpp"

namespace xlkg {

struct RgitConfig {
  std::size_t max_iterations = 6;  // T
  double tau = 5.0;                // F1 gain in percentage points
  std::size_t m = 5;               // retrieved EN passages per query
  bool early_stop_on_recall = true;
  std::size_t max_kps = 5;         // generator output size
  std::size_t threads = 1;
  TrainConfig train;               // retriever settings, seed included

  void validate() const;
};

/// Admission criterion: strictly more than tau points of F1 gained.
bool usefulness_gate(double f1_aug, double f1_base, double tau);

/// True when the latest recall@5 does not beat the best earlier value.
bool recall_early_stop(std::span<const double> history);

/// Fraction of pseudo pairs whose EN partner matches the gold one, over the
/// pseudo pairs whose XX id the gold set covers. Zero overlap is an error.
double pseudo_label_accuracy(const PairSet& pseudo, const PairSet& gold);

struct ParallelExample {
  const Passage* xx = nullptr;
  const Passage* en = nullptr;
};

/// Produces the base generator once and a retrieval-augmented generator per
/// iteration. Implementations decide what "training" means.
class GeneratorTrainer {
 public:
  virtual ~GeneratorTrainer() = default;
  virtual std::unique_ptr<KeyphraseGenerator> train_base(
      std::span<const ParallelExample> par) = 0;
  virtual std::unique_ptr<KeyphraseGenerator> train_augmented(
      std::span<const ParallelExample> par,
      std::span<const RetrievedKnowledge> retrieved, std::size_t iteration) = 0;
};

/// Extractive base generator; the augmented generator's lexicon is rebuilt
/// from scratch from gold EN/XX keyphrase co-occurrence in the parallel
/// pairs plus co-occurrence of each pair's retrieved EN keyphrases with its
/// XX keyphrases.
class LexiconTrainer final : public GeneratorTrainer {
 public:
  explicit LexiconTrainer(std::size_t max_kps) : max_kps_(max_kps) {}
  std::unique_ptr<KeyphraseGenerator> train_base(
      std::span<const ParallelExample> par) override;
  std::unique_ptr<KeyphraseGenerator> train_augmented(
      std::span<const ParallelExample> par,
      std::span<const RetrievedKnowledge> retrieved, std::size_t iteration) override;

 private:
  std::size_t max_kps_;
};

/// File handshake with generators trained elsewhere. Training data goes to
/// <run_dir>/base/train.jsonl and <run_dir>/iter_<t>/generator_train.jsonl;
/// predictions are read from predictions.jsonl next to them, and requests
/// are written to requests.jsonl when predictions are still missing.
class ExternalTrainer final : public GeneratorTrainer {
 public:
  explicit ExternalTrainer(std::filesystem::path run_dir) : run_dir_(std::move(run_dir)) {}
  std::unique_ptr<KeyphraseGenerator> train_base(
      std::span<const ParallelExample> par) override;
  std::unique_ptr<KeyphraseGenerator> train_augmented(
      std::span<const ParallelExample> par,
      std::span<const RetrievedKnowledge> retrieved, std::size_t iteration) override;

 private:
  std::filesystem::path run_dir_;
};

struct Admission {
  std::string xx_id;
  std::string en_id;
  double f1_aug = 0.0;   // percentage points
  double f1_base = 0.0;  // percentage points
  std::vector<std::string> alternates;  // retrieved ranks 2..m
};

struct MiningOutcome {
  PairSet pseudo{PairKind::kPseudo};  // sorted by xx_id, score = F1 gain
  std::vector<Admission> admissions;  // same order as pseudo
  std::size_t evaluated = 0;
};

/// One pass of pseudo-pair creation: for each NP passage retrieve m EN
/// passages with the current retriever, compare base and augmented
/// predictions against the passage's gold keyphrases, and admit the top
/// retrieved passage when the gate opens. A pure function of its inputs.
MiningOutcome mine_pseudo_pairs(const DenseIndex& en_index,
                                const EncoderModel& retriever,
                                const KeyphraseGenerator& augmented,
                                const KeyphraseGenerator& base,
                                const Corpus& np_examples, const Corpus& en_corpus,
                                const RgitConfig& cfg);

struct RgitData {
  const Corpus* xx = nullptr;        // holds every PAR and NP passage
  const Corpus* en = nullptr;        // large English corpus with keyphrases
  const PairSet* par = nullptr;      // seed parallel pairs
  const Corpus* np = nullptr;        // non-parallel examples (gold kps needed)
  const PairSet* dev = nullptr;      // optional: dev pairs for recall@k
  const Corpus* dev_xx = nullptr;    // corpus holding the dev XX passages
  const PairSet* np_gold = nullptr;  // optional: hidden partners of NP
};

struct IterationLog {
  std::size_t t = 0;
  std::size_t train_pairs = 0;
  std::map<std::size_t, double> recall;  // of R_t, when dev pairs are given
  std::size_t evaluated = 0;
  std::size_t pseudo_count = 0;          // |D_PSEUDO^{t+1}|
  std::optional<double> label_accuracy;  // of D_PSEUDO^{t+1}
  bool stopped = false;                  // loop ended at this iteration
  std::string stop_reason;
};

struct RgitOptions {
  std::optional<std::filesystem::path> run_dir;
  std::function<void(const IterationLog&)> on_iteration;
  /// Called in iteration t after R_t and G_t exist, before mining.
  std::function<void(std::size_t t)> before_mining;
};

enum class RgitStatus { kCompleted, kPaused };

struct RgitResult {
  RgitStatus status = RgitStatus::kCompleted;
  std::string message;
  std::optional<EncoderModel> final_model;
  PairSet final_pseudo{PairKind::kPseudo};   // set the final retriever used
  std::vector<PairSet> pseudo_history;       // D_PSEUDO^1, D_PSEUDO^2, ...
  std::vector<std::vector<Admission>> admissions;
  std::vector<IterationLog> logs;
  std::map<std::size_t, double> final_recall;
  std::vector<std::string> warnings;
};

/// Turns pairs into retriever training examples (XX text -> EN text).
std::vector<TrainingPair> training_pairs(const PairSet& pairs, const Corpus& xx,
                                         const Corpus& en);

/// The iterative loop: train R_t on D_PSEUDO^t plus D_PAR, train G_t with
/// R_t's retrieved keyphrases, mine D_PSEUDO^{t+1} through the usefulness
/// gate; finally train on the pseudo set and fine-tune on D_PAR.
RgitResult run_rgit(const RgitData& data, const RgitConfig& cfg,
                    GeneratorTrainer& generators, const RgitOptions& options = {});

}  // namespace xlkg
