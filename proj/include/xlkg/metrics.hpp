#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "xlkg/corpus.hpp"

namespace xlkg {

struct ExampleScore {
  std::string id;
  LangCode lang;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t num_gold = 0;
  std::size_t num_pred = 0;
  std::size_t num_matched = 0;
  // Degenerate input: empty gold, or predictions missing for the example.
  bool flagged = false;
};

/// Exact-match P@M, R@M and F1@M over normalized, deduplicated sets.
/// Empty predictions with non-empty gold score 0; empty gold with
/// predictions scores 0 (flagged); both empty scores 1 (flagged).
ExampleScore prf_at_m(std::span<const std::string> gold,
                      std::span<const std::string> pred);

struct LanguageScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t count = 0;
  std::size_t flagged = 0;
};

struct EvalReport {
  std::map<LangCode, LanguageScore> per_language;
  LanguageScore overall;  // unweighted mean over languages, count = total
  std::map<std::size_t, double> recall_at_k;  // optional retrieval section
};

/// Per-language means over examples, then an unweighted mean across
/// languages. Order of `scores` does not affect the result.
EvalReport aggregate(std::span<const ExampleScore> scores);

/// Scores every gold passage against its prediction; ids without a
/// prediction are scored as empty and flagged. Predictions for ids outside
/// the gold corpus are an error.
std::vector<ExampleScore> score_predictions(
    const Corpus& gold,
    const std::map<std::string, std::vector<std::string>>& predictions);

/// Table with per-language P/R/F1 x100 at two decimals.
std::string render_report(const EvalReport& report);
void save_report(const EvalReport& report, std::span<const ExampleScore> scores,
                 const std::filesystem::path& path);

}  // namespace xlkg
