#include "xlkg/generation.hpp"

#include <algorithm>
#include <cctype>
#include <unicode/uchar.h>

#include "xlkg/error.hpp"
#include "xlkg/jsonl.hpp"
#include "xlkg/parallel.hpp"
#include "xlkg/text.hpp"

namespace xlkg {

namespace {

// Edge tokens of a candidate need this many code points to count as
// noun-like; filters short function words in space-delimited languages.
constexpr std::size_t kMinEdgeTokenLength = 3;
constexpr std::size_t kMaxCandidateTokens = 4;

bool is_lang_tag(std::string_view s) {
  return s.size() == 4 && s[0] == '[' && s[3] == ']' &&
         std::isalpha(static_cast<unsigned char>(s[1])) &&
         std::isalpha(static_cast<unsigned char>(s[2]));
}

std::string_view trim_spaces(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  return s;
}

void check_target_phrase(std::string_view kp) {
  if (kp.empty() || kp.front() == ' ' || kp.back() == ' ') {
    throw Error(ErrorCode::kInvalidArgument,
                "keyphrase '" + std::string(kp) +
                    "' is empty or has surrounding spaces");
  }
  if (contains_control_token(kp)) {
    throw Error(ErrorCode::kInvalidArgument,
                "keyphrase '" + std::string(kp) + "' contains a control token");
  }
}

std::string join(std::span<const std::string> parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

// Lowercased tokens with edge punctuation removed.
std::vector<std::string> candidate_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& raw : split_whitespace(normalize_phrase(text))) {
    std::u32string cps = utf8_to_codepoints(raw);
    auto punct = [](char32_t c) { return u_ispunct(static_cast<UChar32>(c)) != 0; };
    while (!cps.empty() && punct(cps.front())) cps.erase(cps.begin());
    while (!cps.empty() && punct(cps.back())) cps.pop_back();
    if (!cps.empty()) out.push_back(codepoints_to_utf8(cps));
  }
  return out;
}

bool noun_like_edge(const std::string& token) {
  return contains_letter(token) &&
         utf8_to_codepoints(token).size() >= kMinEdgeTokenLength;
}

bool better_phrase(const ScoredPhrase& a, const ScoredPhrase& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.tokens != b.tokens) return a.tokens > b.tokens;
  if (a.first_position != b.first_position) {
    return a.first_position < b.first_position;
  }
  return a.phrase < b.phrase;
}

}  // namespace

bool contains_control_token(std::string_view text) {
  for (auto tok : {kEnKpsToken, kSepToken, kCtxToken}) {
    if (text.find(tok) != std::string_view::npos) return true;
  }
  for (std::size_t i = 0; i + 4 <= text.size(); ++i) {
    if (is_lang_tag(text.substr(i, 4))) return true;
  }
  return false;
}

std::string assemble_codemix_input(const CodeMixInput& input) {
  std::string out(kEnKpsToken);
  if (!input.retrieved_kps.empty()) {
    out += ' ';
    out += join(input.retrieved_kps, " [SEP] ");
  }
  out += " [CTX] ";
  out += input.passage_text;
  out += " [" + input.lang.str() + "]";
  return out;
}

std::string assemble_target(std::span<const std::string> keyphrases,
                            const LangCode& lang) {
  if (keyphrases.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "target sequence needs >= 1 keyphrase");
  }
  for (const auto& kp : keyphrases) check_target_phrase(kp);
  return "[" + lang.str() + "] " + join(keyphrases, " [SEP] ");
}

ParsedTarget parse_target(std::string_view sequence) {
  if (sequence.size() < 4 || !is_lang_tag(sequence.substr(0, 4)) ||
      (sequence.size() > 4 && sequence[4] != ' ')) {
    throw Error(ErrorCode::kParse, "target sequence must start with a [XX] language token");
  }
  ParsedTarget parsed{LangCode::parse(sequence.substr(1, 2)), {}};
  std::string_view rest = sequence.substr(4);
  while (true) {
    const auto at = rest.find(kSepToken);
    const auto segment = trim_spaces(rest.substr(0, at));
    if (!segment.empty()) parsed.keyphrases.emplace_back(segment);
    if (at == std::string_view::npos) break;
    rest.remove_prefix(at + kSepToken.size());
  }
  return parsed;
}

std::vector<std::string> RetrievedKnowledge::flat() const {
  std::vector<std::string> out;
  for (const auto& kps : keyphrases) out.insert(out.end(), kps.begin(), kps.end());
  return out;
}

RetrievedKnowledge knowledge_from_hits(const SearchResult& hits,
                                       const Corpus& en_corpus, std::size_t m) {
  RetrievedKnowledge k;
  for (std::size_t r = 0; r < hits.hits.size() && r < m; ++r) {
    const Passage& p = en_corpus.at(hits.hits[r].id);
    k.passage_ids.push_back(p.id);
    k.keyphrases.push_back(p.keyphrases);
  }
  return k;
}

std::vector<ScoredPhrase> extractive_candidates(std::string_view text) {
  const auto tokens = candidate_tokens(text);
  const double n = static_cast<double>(tokens.size());
  struct Stat {
    std::size_t count = 0;
    std::size_t first = 0;
    std::size_t tokens = 0;
  };
  std::map<std::string, Stat> stats;
  auto collect = [&](bool filtered) {
    for (std::size_t len = 1; len <= kMaxCandidateTokens; ++len) {
      for (std::size_t start = 0; start + len <= tokens.size(); ++start) {
        if (filtered && !(noun_like_edge(tokens[start]) &&
                          noun_like_edge(tokens[start + len - 1]))) {
          continue;
        }
        std::string phrase = tokens[start];
        for (std::size_t i = start + 1; i < start + len; ++i) {
          phrase += ' ';
          phrase += tokens[i];
        }
        auto [it, inserted] = stats.try_emplace(std::move(phrase));
        if (inserted) {
          it->second.first = start;
          it->second.tokens = len;
        }
        ++it->second.count;
      }
    }
  };
  collect(true);
  if (stats.empty()) collect(false);

  std::vector<ScoredPhrase> out;
  out.reserve(stats.size());
  for (auto& [phrase, s] : stats) {
    const double score = static_cast<double>(s.count) *
                         (1.0 / (1.0 + static_cast<double>(s.first) / n));
    out.push_back({phrase, score, s.tokens, s.first});
  }
  std::sort(out.begin(), out.end(), better_phrase);
  return out;
}

std::vector<std::string> extractive_generate(const Passage& passage,
                                             std::size_t max_kps) {
  if (max_kps < 1) throw Error(ErrorCode::kInvalidArgument, "max_kps must be >= 1");
  std::vector<std::string> out;
  for (const auto& c : extractive_candidates(passage.text)) {
    if (out.size() == max_kps) break;
    out.push_back(c.phrase);
  }
  return out;
}

void PhraseLexicon::add(std::string_view en_kp, std::string_view xx_kp,
                        std::size_t count) {
  if (count == 0) return;
  std::string en = normalize_phrase(en_kp);
  std::string xx = normalize_phrase(xx_kp);
  if (en.empty() || xx.empty()) return;
  entries_[std::move(en)][std::move(xx)] += count;
}

void PhraseLexicon::add_cooccurrence(std::span<const std::string> en_kps,
                                     std::span<const std::string> xx_kps) {
  std::vector<std::string> en(en_kps.begin(), en_kps.end());
  std::vector<std::string> xx(xx_kps.begin(), xx_kps.end());
  canonicalize_keyphrases(en);
  canonicalize_keyphrases(xx);
  for (const auto& e : en) {
    for (const auto& x : xx) add(e, x);
  }
}

const std::map<std::string, std::size_t>* PhraseLexicon::projections(
    std::string_view en_kp) const {
  auto it = entries_.find(std::string(en_kp));
  return it == entries_.end() ? nullptr : &it->second;
}

std::size_t PhraseLexicon::size() const {
  std::size_t n = 0;
  for (const auto& [_, m] : entries_) n += m.size();
  return n;
}

PhraseLexicon build_lexicon(const PairSet& par, const Corpus& xx_corpus,
                            const Corpus& en_corpus, LexiconStats* stats) {
  PhraseLexicon lex;
  LexiconStats local;
  for (const auto& pair : par.pairs()) {
    if (!pair.en_id) continue;
    const Passage& xx = xx_corpus.at(pair.xx_id);
    const Passage& en = en_corpus.at(*pair.en_id);
    if (xx.keyphrases.empty() || en.keyphrases.empty()) {
      ++local.pairs_skipped;
      continue;
    }
    lex.add_cooccurrence(en.keyphrases, xx.keyphrases);
    ++local.pairs_used;
  }
  if (stats != nullptr) *stats = local;
  return lex;
}

std::vector<std::string> augmented_generate(const Passage& passage,
                                            const RetrievedKnowledge& knowledge,
                                            const PhraseLexicon& lexicon,
                                            std::size_t max_kps) {
  if (max_kps < 1) throw Error(ErrorCode::kInvalidArgument, "max_kps must be >= 1");
  std::map<std::string, ScoredPhrase> merged;
  for (auto& c : extractive_candidates(passage.text)) {
    merged.emplace(c.phrase, c);
  }
  constexpr std::size_t kProjected = static_cast<std::size_t>(-1);
  for (std::size_t rank = 0; rank < knowledge.keyphrases.size(); ++rank) {
    const double weight = 1.0 / (1.0 + static_cast<double>(rank));
    for (const auto& en_kp : knowledge.keyphrases[rank]) {
      const auto* proj = lexicon.projections(normalize_phrase(en_kp));
      if (proj == nullptr) continue;
      for (const auto& [xx_kp, count] : *proj) {
        auto [it, inserted] = merged.try_emplace(xx_kp);
        if (inserted) {
          it->second.phrase = xx_kp;
          it->second.tokens = split_whitespace(xx_kp).size();
          it->second.first_position = kProjected;
        }
        it->second.score += static_cast<double>(count) * weight;
      }
    }
  }
  std::vector<ScoredPhrase> ranked;
  ranked.reserve(merged.size());
  for (auto& [_, c] : merged) ranked.push_back(std::move(c));
  const std::size_t keep = std::min(max_kps, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep),
                    ranked.end(), better_phrase);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < keep; ++i) out.push_back(ranked[i].phrase);
  return out;
}

std::string_view to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::kExtractiveBase: return "extractive";
    case GeneratorKind::kLexiconAugmented: return "augmented";
    case GeneratorKind::kExternalFile: return "external";
  }
  return "?";
}

GeneratorKind parse_generator_kind(std::string_view text) {
  if (text == "extractive") return GeneratorKind::kExtractiveBase;
  if (text == "augmented") return GeneratorKind::kLexiconAugmented;
  if (text == "external") return GeneratorKind::kExternalFile;
  throw Error(ErrorCode::kInvalidArgument,
              "generator must be extractive, augmented or external: '" +
                  std::string(text) + "'");
}

std::vector<std::vector<std::string>> ExtractiveGenerator::predict(
    std::span<const GenerationRequest> requests, std::size_t threads) const {
  std::vector<std::vector<std::string>> out(requests.size());
  parallel_for(requests.size(), threads, [&](std::size_t i) {
    out[i] = extractive_generate(*requests[i].passage, max_kps_);
  });
  return out;
}

std::vector<std::vector<std::string>> LexiconGenerator::predict(
    std::span<const GenerationRequest> requests, std::size_t threads) const {
  std::vector<std::vector<std::string>> out(requests.size());
  parallel_for(requests.size(), threads, [&](std::size_t i) {
    out[i] = augmented_generate(*requests[i].passage, requests[i].knowledge,
                                lexicon_, max_kps_);
  });
  return out;
}

std::vector<std::vector<std::string>> ExternalFileGenerator::predict(
    std::span<const GenerationRequest> requests, std::size_t) const {
  if (!std::filesystem::exists(predictions_)) {
    std::vector<Passage> passages;
    std::vector<RetrievedKnowledge> knowledge;
    for (const auto& r : requests) {
      Passage p = *r.passage;
      p.keyphrases.clear();  // requests carry no targets
      passages.push_back(std::move(p));
      knowledge.push_back(r.knowledge);
    }
    export_codemix_dataset(passages, knowledge, requests_out_);
    throw Error(ErrorCode::kPending,
                "awaiting external predictions at " + predictions_.string() +
                    " for requests in " + requests_out_.string());
  }
  const auto preds = import_predictions(predictions_);
  std::vector<std::vector<std::string>> out;
  out.reserve(requests.size());
  for (const auto& r : requests) {
    auto it = preds.find(r.passage->id);
    out.push_back(it == preds.end() ? std::vector<std::string>{} : it->second);
  }
  return out;
}

void export_codemix_dataset(std::span<const Passage> examples,
                            std::span<const RetrievedKnowledge> knowledge,
                            const std::filesystem::path& path) {
  if (examples.size() != knowledge.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "export needs one retrieval result per example");
  }
  std::vector<Json> records;
  records.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const Passage& p = examples[i];
    CodeMixInput input{knowledge[i].flat(), p.text, p.lang};
    for (const auto& kp : input.retrieved_kps) {
      if (contains_control_token(kp)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "retrieved keyphrase '" + kp + "' contains a control token");
      }
    }
    Json rec{{"id", p.id}, {"source", assemble_codemix_input(input)}};
    if (!p.keyphrases.empty()) rec["target"] = assemble_target(p.keyphrases, p.lang);
    records.push_back(std::move(rec));
  }
  // Validate everything before creating the file.
  JsonlWriter out(path);
  for (const auto& rec : records) out.write(rec);
  out.close();
}

std::map<std::string, std::vector<std::string>> import_predictions(
    const std::filesystem::path& path, const Corpus* known_ids) {
  std::map<std::string, std::vector<std::string>> out;
  for_each_json_line(path, [&](const Json& rec, std::size_t line_no) {
    const std::string& id = require_string(rec, "id", line_no);
    if (known_ids != nullptr && !known_ids->contains(id)) {
      throw_parse_error(path, line_no, "prediction for unknown id '" + id + "'");
    }
    auto it = rec.find("keyphrases");
    if (it == rec.end() || !it->is_array()) {
      throw_parse_error(path, line_no, "missing 'keyphrases' array");
    }
    std::vector<std::string> kps;
    for (const auto& kp : *it) {
      if (!kp.is_string()) throw_parse_error(path, line_no, "keyphrase must be a string");
      kps.push_back(kp.get<std::string>());
    }
    canonicalize_keyphrases(kps);
    if (!out.emplace(id, std::move(kps)).second) {
      throw_parse_error(path, line_no, "duplicate prediction id '" + id + "'");
    }
  });
  return out;
}

void save_predictions(const std::vector<std::string>& ids,
                      const std::vector<std::vector<std::string>>& predictions,
                      const std::filesystem::path& path) {
  if (ids.size() != predictions.size()) {
    throw Error(ErrorCode::kInvalidArgument, "ids and predictions differ in length");
  }
  JsonlWriter out(path);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out.write(Json{{"id", ids[i]}, {"keyphrases", predictions[i]}});
  }
  out.close();
}

}  // namespace xlkg
