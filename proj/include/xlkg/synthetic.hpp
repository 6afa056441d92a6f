#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "xlkg/corpus.hpp"

namespace xlkg {

/// Deterministic bilingual fixture: pseudo-word EN passages with keyphrases
/// drawn from a small inventory, and XX passages that are word-by-word
/// translations through a fixed dictionary.
struct SyntheticConfig {
  std::size_t en_passages = 2000;
  std::size_t par_pairs = 200;    // seed parallel pairs
  std::size_t dev_pairs = 200;    // held-out pairs
  std::size_t np_passages = 0;    // XX passages whose partner is hidden
  std::size_t vocabulary = 500;
  std::size_t keyphrases = 48;    // inventory size
  std::size_t min_words = 8;
  std::size_t max_words = 16;
  std::size_t min_kps = 3;
  std::size_t max_kps = 5;
  double zipf_exponent = 1.0;
  double cognate_fraction = 0.5;  // XX words sharing a stem with EN
  double word_dropout = 0.05;     // per-token chance of being dropped in XX
  std::string lang = "DE";
  std::uint64_t seed = 7;

  void validate() const;
};

struct SyntheticData {
  Corpus en;
  Corpus xx;                                  // PAR, dev and NP passages
  Corpus np;                                  // NP passages only
  PairSet par{PairKind::kParallel};
  PairSet dev{PairKind::kParallel};
  PairSet np_gold{PairKind::kParallel};       // hidden NP partners
};

SyntheticData make_synthetic(const SyntheticConfig& cfg);

/// Writes en.jsonl, xx.jsonl, np.jsonl, par.jsonl, dev.jsonl, np_gold.jsonl
/// and np_pairs.jsonl (NP kind) under dir.
void save_synthetic(const SyntheticData& data, const std::filesystem::path& dir);

}  // namespace xlkg
