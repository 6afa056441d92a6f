#include "xlkg/corpus.hpp"

#include <algorithm>
#include <array>
#include <unordered_set>

#include "xlkg/error.hpp"
#include "xlkg/jsonl.hpp"
#include "xlkg/text.hpp"

namespace xlkg {

namespace {

constexpr std::array<std::string_view, 7> kKnownLangs = {
    "EN", "DE", "ES", "FR", "IT", "KO", "ZH"};

std::string line_prefix(const std::filesystem::path& path,
                        std::size_t line_no) {
  return path.filename().string() + ":" + std::to_string(line_no) + ": ";
}

}  // namespace

LangCode LangCode::parse(std::string_view text) {
  if (text.size() != 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "language code must be two letters: '" + std::string(text) +
                    "'");
  }
  std::string code;
  for (char c : text) {
    if (!((c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z'))) {
      throw Error(ErrorCode::kInvalidArgument,
                  "language code must be two letters: '" + std::string(text) +
                      "'");
    }
    code.push_back(static_cast<char>(c & ~0x20));
  }
  return LangCode(std::move(code));
}

bool LangCode::known() const {
  return std::find(kKnownLangs.begin(), kKnownLangs.end(), code_) !=
         kKnownLangs.end();
}

std::size_t canonicalize_keyphrases(std::vector<std::string>& keyphrases) {
  std::vector<std::string> kept;
  std::unordered_set<std::string> seen;
  std::size_t removed = 0;
  for (const auto& raw : keyphrases) {
    std::string norm = normalize_phrase(raw);
    if (norm.empty() || !seen.insert(norm).second) {
      ++removed;
      continue;
    }
    kept.push_back(std::move(norm));
  }
  keyphrases = std::move(kept);
  return removed;
}

void Corpus::add(Passage passage) {
  if (passage.id.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "passage id is empty");
  }
  if (is_blank(passage.text)) {
    throw Error(ErrorCode::kInvalidArgument,
                "passage '" + passage.id + "' has blank text");
  }
  if (by_id_.contains(passage.id)) {
    throw Error(ErrorCode::kDuplicate, "duplicate passage id '" + passage.id + "'");
  }
  by_id_.emplace(passage.id, passages_.size());
  ++histogram_[passage.lang];
  passages_.push_back(std::move(passage));
}

const Passage* Corpus::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &passages_[it->second];
}

const Passage& Corpus::at(std::string_view id) const {
  const Passage* p = find(id);
  if (p == nullptr) {
    throw Error(ErrorCode::kNotFound, "unknown passage id '" + std::string(id) + "'");
  }
  return *p;
}

std::size_t Corpus::index_of(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) {
    throw Error(ErrorCode::kNotFound, "unknown passage id '" + std::string(id) + "'");
  }
  return it->second;
}

Corpus load_corpus(const std::filesystem::path& path,
                   std::optional<LangCode> expected_lang, LoadStats* stats) {
  Corpus corpus;
  LoadStats local;
  local.blank_lines = for_each_json_line(
      path, [&](const Json& rec, std::size_t line_no) {
        Passage p;
        p.id = require_string(rec, "id", line_no);
        p.text = require_string(rec, "text", line_no);
        try {
          p.lang = LangCode::parse(require_string(rec, "lang", line_no));
        } catch (const Error& e) {
          throw_parse_error(path, line_no, e.what());
        }
        if (auto it = rec.find("keyphrases"); it != rec.end()) {
          if (!it->is_array()) {
            throw_parse_error(path, line_no, "'keyphrases' must be an array");
          }
          for (const auto& kp : *it) {
            if (!kp.is_string()) {
              throw_parse_error(path, line_no, "keyphrase must be a string");
            }
            p.keyphrases.push_back(kp.get<std::string>());
          }
        }
        local.deduplicated_keyphrases += canonicalize_keyphrases(p.keyphrases);
        if (!p.lang.known()) ++local.unknown_langs;
        if (expected_lang && p.lang != *expected_lang) ++local.lang_mismatches;
        try {
          corpus.add(std::move(p));
        } catch (const Error& e) {
          throw Error(e.code(), line_prefix(path, line_no) + e.what());
        }
        ++local.records;
      });
  if (stats != nullptr) *stats = local;
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  JsonlWriter out(path);
  for (const auto& p : corpus.passages()) {
    out.write(Json{{"id", p.id},
                   {"lang", p.lang.str()},
                   {"text", p.text},
                   {"keyphrases", p.keyphrases}});
  }
  out.close();
}

std::string_view to_string(PairKind kind) {
  switch (kind) {
    case PairKind::kParallel: return "PAR";
    case PairKind::kNonParallel: return "NP";
    case PairKind::kPseudo: return "PSEUDO";
  }
  return "?";
}

PairKind parse_pair_kind(std::string_view text) {
  if (text == "PAR") return PairKind::kParallel;
  if (text == "NP") return PairKind::kNonParallel;
  if (text == "PSEUDO") return PairKind::kPseudo;
  throw Error(ErrorCode::kInvalidArgument,
              "pair kind must be PAR, NP or PSEUDO: '" + std::string(text) + "'");
}

void PairSet::add(PassagePair pair) {
  if (kind_ == PairKind::kNonParallel) {
    if (pair.en_id) {
      throw Error(ErrorCode::kInvalidArgument,
                  "NP pair for '" + pair.xx_id + "' must not carry en_id");
    }
  } else if (!pair.en_id) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(to_string(kind_)) + " pair for '" + pair.xx_id +
                    "' lacks en_id");
  }
  if (kind_ == PairKind::kParallel && pair.score) {
    throw Error(ErrorCode::kInvalidArgument, "only PSEUDO pairs carry a score");
  }
  auto key = std::make_pair(pair.xx_id, pair.en_id.value_or(""));
  if (!seen_.emplace(key, pairs_.size()).second) {
    throw Error(ErrorCode::kDuplicate,
                "duplicate pair (" + key.first + ", " + key.second + ")");
  }
  pairs_.push_back(std::move(pair));
}

std::optional<std::string> PairSet::partner_of(std::string_view xx_id) const {
  auto it = seen_.lower_bound(std::make_pair(std::string(xx_id), std::string()));
  if (it == seen_.end() || it->first.first != xx_id) return std::nullopt;
  return pairs_[it->second].en_id;
}

PairSet load_pairs(const std::filesystem::path& path, PairKind kind,
                   const Corpus& xx_corpus, const Corpus* en_corpus) {
  if (kind != PairKind::kNonParallel && en_corpus == nullptr) {
    throw Error(ErrorCode::kInvalidArgument,
                "an English corpus is required to resolve " +
                    std::string(to_string(kind)) + " pairs");
  }
  PairSet set(kind);
  for_each_json_line(path, [&](const Json& rec, std::size_t line_no) {
    PassagePair pair;
    pair.xx_id = require_string(rec, "xx_id", line_no);
    if (!xx_corpus.contains(pair.xx_id)) {
      throw Error(ErrorCode::kNotFound, line_prefix(path, line_no) +
                                            "dangling xx_id '" + pair.xx_id + "'");
    }
    if (rec.contains("en_id")) {
      pair.en_id = require_string(rec, "en_id", line_no);
      if (en_corpus != nullptr && !en_corpus->contains(*pair.en_id)) {
        throw Error(ErrorCode::kNotFound, line_prefix(path, line_no) +
                                              "dangling en_id '" + *pair.en_id + "'");
      }
    }
    if (kind == PairKind::kPseudo) {
      if (auto it = rec.find("score"); it != rec.end()) {
        if (!it->is_number()) {
          throw_parse_error(path, line_no, "'score' must be a number");
        }
        pair.score = it->get<double>();
      }
    }
    try {
      set.add(std::move(pair));
    } catch (const Error& e) {
      throw Error(e.code(), line_prefix(path, line_no) + e.what());
    }
  });
  return set;
}

void save_pairs(const PairSet& pairs, const std::filesystem::path& path) {
  JsonlWriter out(path);
  for (const auto& p : pairs.pairs()) {
    Json rec{{"xx_id", p.xx_id}};
    if (p.en_id) rec["en_id"] = *p.en_id;
    if (p.score) rec["score"] = *p.score;
    out.write(rec);
  }
  out.close();
}

std::pair<Corpus, Corpus> split_par_np(const Corpus& xx_corpus,
                                       const PairSet& par) {
  if (par.kind() != PairKind::kParallel) {
    throw Error(ErrorCode::kInvalidArgument, "split_par_np expects a PAR set");
  }
  std::unordered_set<std::string> par_ids;
  for (const auto& p : par.pairs()) {
    if (!xx_corpus.contains(p.xx_id)) {
      throw Error(ErrorCode::kNotFound, "PAR pair names unknown xx_id '" + p.xx_id + "'");
    }
    par_ids.insert(p.xx_id);
  }
  Corpus par_part;
  Corpus np_part;
  for (const auto& passage : xx_corpus.passages()) {
    (par_ids.contains(passage.id) ? par_part : np_part).add(passage);
  }
  return {std::move(par_part), std::move(np_part)};
}

}  // namespace xlkg
