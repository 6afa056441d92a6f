#include "xlkg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "xlkg/error.hpp"

namespace xlkg {

namespace {

constexpr std::string_view kEnOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n",
                                          "p", "r", "s", "t", "v", "br", "st", "tr"};
constexpr std::string_view kEnVowels[] = {"a", "e", "i", "o", "u", "ea", "ou"};
constexpr std::string_view kXxOnsets[] = {"sch", "w", "z", "h", "pf", "kr", "gl",
                                          "j", "ch", "fl", "sp", "dr"};
constexpr std::string_view kXxVowels[] = {"ä", "ö", "ü", "ei", "au", "ie", "a", "o"};
constexpr std::string_view kXxEndings[] = {"en", "ung", "lich", "er", "keit", "chen"};

template <std::size_t N>
std::string_view pick(std::mt19937_64& rng, const std::string_view (&items)[N]) {
  return items[std::uniform_int_distribution<std::size_t>(0, N - 1)(rng)];
}

std::string make_word(std::mt19937_64& rng, bool xx_style) {
  const std::size_t syllables = std::uniform_int_distribution<std::size_t>(2, 3)(rng);
  std::string w;
  for (std::size_t s = 0; s < syllables; ++s) {
    w += xx_style ? pick(rng, kXxOnsets) : pick(rng, kEnOnsets);
    w += xx_style ? pick(rng, kXxVowels) : pick(rng, kEnVowels);
  }
  return w;
}

// Unique words; the set guards against collisions across both languages.
std::vector<std::string> make_lexicon(std::mt19937_64& rng, std::size_t n, bool xx_style,
                                      std::set<std::string>& taken) {
  std::vector<std::string> out;
  while (out.size() < n) {
    std::string w = make_word(rng, xx_style);
    if (taken.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

class ZipfSampler {
 public:
  ZipfSampler(std::size_t n, double s) : cdf_(n) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      total += 1.0 / std::pow(static_cast<double>(i + 1), s);
      cdf_[i] = total;
    }
    for (auto& c : cdf_) c /= total;
  }
  std::size_t operator()(std::mt19937_64& rng) const {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()),
                                 cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::string make_id(std::string_view prefix, std::size_t i) {
  std::string n = std::to_string(i);
  return std::string(prefix) + std::string(5 - std::min<std::size_t>(5, n.size()), '0') + n;
}

}  // namespace

void SyntheticConfig::validate() const {
  if (par_pairs + dev_pairs + np_passages > en_passages) {
    throw Error(ErrorCode::kInvalidArgument,
                "more XX passages requested than EN passages to translate");
  }
  if (vocabulary < 10 || keyphrases < 1) {
    throw Error(ErrorCode::kInvalidArgument, "vocabulary and keyphrase inventory too small");
  }
  if (min_words < 1 || min_words > max_words || min_kps < 1 || min_kps > max_kps ||
      max_kps > keyphrases) {
    throw Error(ErrorCode::kInvalidArgument, "inconsistent length bounds");
  }
  if (!(cognate_fraction >= 0.0 && cognate_fraction <= 1.0) ||
      !(word_dropout >= 0.0 && word_dropout < 1.0) || !(zipf_exponent > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "probabilities out of range");
  }
  LangCode::parse(lang);
}

SyntheticData make_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::set<std::string> taken;

  const auto en_words = make_lexicon(rng, cfg.vocabulary, false, taken);
  std::vector<std::string> xx_words;
  xx_words.reserve(cfg.vocabulary);
  std::bernoulli_distribution cognate(cfg.cognate_fraction);
  for (const auto& w : en_words) {
    std::string candidate;
    do {
      candidate = cognate(rng) ? w + std::string(pick(rng, kXxEndings))
                               : make_word(rng, true);
    } while (!taken.insert(candidate).second);
    xx_words.push_back(std::move(candidate));
  }

  // Keyphrases are 1-3 words from the less frequent half of the vocabulary.
  std::vector<std::vector<std::size_t>> inventory;
  std::set<std::vector<std::size_t>> seen;
  std::uniform_int_distribution<std::size_t> kp_len(1, 3);
  std::uniform_int_distribution<std::size_t> rare(cfg.vocabulary / 2, cfg.vocabulary - 1);
  while (inventory.size() < cfg.keyphrases) {
    std::vector<std::size_t> kp(kp_len(rng));
    for (auto& w : kp) w = rare(rng);
    if (seen.insert(kp).second) inventory.push_back(std::move(kp));
  }
  auto render = [&](const std::vector<std::size_t>& ws, const std::vector<std::string>& dict) {
    std::vector<std::string> out;
    for (auto w : ws) out.push_back(dict[w]);
    return join(out);
  };

  const ZipfSampler zipf(cfg.vocabulary, cfg.zipf_exponent);
  std::uniform_int_distribution<std::size_t> length(cfg.min_words, cfg.max_words);
  std::uniform_int_distribution<std::size_t> n_kps(cfg.min_kps, cfg.max_kps);
  std::bernoulli_distribution repeat(0.5);
  std::bernoulli_distribution drop(cfg.word_dropout);

  const LangCode en_lang = LangCode::parse("EN");
  const LangCode xx_lang = LangCode::parse(cfg.lang);
  const std::size_t n_xx = cfg.par_pairs + cfg.dev_pairs + cfg.np_passages;

  SyntheticData data;
  // EN passages are numbered in a shuffled order so ids carry no pairing.
  std::vector<std::size_t> en_order(cfg.en_passages);
  for (std::size_t i = 0; i < en_order.size(); ++i) en_order[i] = i;
  std::shuffle(en_order.begin(), en_order.end(), rng);

  std::vector<Passage> en_passages(cfg.en_passages);
  for (std::size_t i = 0; i < cfg.en_passages; ++i) {
    std::vector<std::size_t> kp_ids;
    const std::size_t count = n_kps(rng);
    while (kp_ids.size() < count) {
      const std::size_t k =
          std::uniform_int_distribution<std::size_t>(0, inventory.size() - 1)(rng);
      if (std::find(kp_ids.begin(), kp_ids.end(), k) == kp_ids.end()) kp_ids.push_back(k);
    }
    std::vector<std::vector<std::size_t>> chunks;
    const std::size_t len = length(rng);
    for (std::size_t j = 0; j < len; ++j) chunks.push_back({zipf(rng)});
    for (auto k : kp_ids) {
      const std::size_t copies = repeat(rng) ? 2 : 1;
      for (std::size_t c = 0; c < copies; ++c) {
        const std::size_t at =
            std::uniform_int_distribution<std::size_t>(0, chunks.size())(rng);
        chunks.insert(chunks.begin() + static_cast<std::ptrdiff_t>(at), inventory[k]);
      }
    }
    std::vector<std::size_t> en_tokens;
    for (const auto& c : chunks) en_tokens.insert(en_tokens.end(), c.begin(), c.end());

    Passage en;
    en.id = make_id("en-", en_order[i]);
    en.lang = en_lang;
    en.text = render(en_tokens, en_words);
    for (auto k : kp_ids) en.keyphrases.push_back(render(inventory[k], en_words));

    if (i < n_xx) {
      // Keyphrase tokens survive dropout so the XX gold stays in the text.
      std::vector<std::size_t> xx_tokens;
      for (const auto& c : chunks) {
        if (c.size() == 1 && drop(rng)) continue;
        xx_tokens.insert(xx_tokens.end(), c.begin(), c.end());
      }
      Passage xx;
      xx.id = make_id("xx-", i);
      xx.lang = xx_lang;
      xx.text = render(xx_tokens, xx_words);
      for (auto k : kp_ids) xx.keyphrases.push_back(render(inventory[k], xx_words));
      canonicalize_keyphrases(xx.keyphrases);
      PassagePair pair{xx.id, en.id, std::nullopt};
      if (i < cfg.par_pairs) {
        data.par.add(pair);
      } else if (i < cfg.par_pairs + cfg.dev_pairs) {
        data.dev.add(pair);
      } else {
        data.np_gold.add(pair);
        data.np.add(xx);
      }
      data.xx.add(std::move(xx));
    }
    canonicalize_keyphrases(en.keyphrases);
    en_passages[i] = std::move(en);
  }
  std::sort(en_passages.begin(), en_passages.end(),
            [](const Passage& a, const Passage& b) { return a.id < b.id; });
  for (auto& p : en_passages) data.en.add(std::move(p));
  return data;
}

void save_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_corpus(data.en, dir / "en.jsonl");
  save_corpus(data.xx, dir / "xx.jsonl");
  save_corpus(data.np, dir / "np.jsonl");
  save_pairs(data.par, dir / "par.jsonl");
  save_pairs(data.dev, dir / "dev.jsonl");
  save_pairs(data.np_gold, dir / "np_gold.jsonl");
  PairSet np_pairs(PairKind::kNonParallel);
  for (const auto& p : data.np.passages()) np_pairs.add({p.id, std::nullopt, std::nullopt});
  save_pairs(np_pairs, dir / "np_pairs.jsonl");
}

}  // namespace xlkg
