// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "xlkg/encoder.hpp"
#include "xlkg/generation.hpp"
#include "xlkg/index.hpp"
#include "xlkg/metrics.hpp"
#include "xlkg/mining.hpp"
#include "xlkg/rgit.hpp"
#include "xlkg/synthetic.hpp"
#include "xlkg/trainer.hpp"

namespace fs = std::filesystem;
using namespace xlkg;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

int failures = 0;

void criterion(const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs >= budget_s) {
    o.ok = false;
    o.detail += " (over time budget)";
  }
  if (!o.ok) ++failures;
  std::printf("%s %-20s %7.2fs (budget %.0fs) %s\n", o.ok ? "PASS" : "FAIL", name, secs, budget_s,
              o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome metric_oracle() {
  std::mt19937_64 rng(1);
  const std::vector<std::string> alphabet = {"a", "b", "c", "d", "e", "f", "g", "h",
                                             "A", "B", "d  e", "D E", "ü", "Ü", ""};
  std::uniform_int_distribution<std::size_t> size(0, 12), pick(0, alphabet.size() - 1);
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<std::string> g(size(rng)), p(size(rng));
    for (auto& x : g) x = alphabet[pick(rng)];
    for (auto& x : p) x = alphabet[pick(rng)];
    const ExampleScore s = prf_at_m(g, p);
    const oracle::Prf o = oracle::prf(g, p);
    if (s.precision != o.precision || s.recall != o.recall || s.f1 != o.f1) ++mismatches;
  }
  const ExampleScore w = prf_at_m(std::vector<std::string>{"a", "b", "c"},
                                  std::vector<std::string>{"a", "b", "d", "e"});
  const bool worked = std::abs(w.f1 - 4.0 / 7.0) <= std::numeric_limits<double>::epsilon();
  return {mismatches == 0 && worked,
          std::to_string(mismatches) + " mismatches / 1000; worked example F1 " +
              fmt("%.17g", w.f1)};
}

Outcome knn_exactness() {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> n_dist(1, 5000), d_dist(1, 128), k_dist(1, 50);
  std::normal_distribution<float> g(0.0f, 1.0f);
  int bad = 0;
  std::size_t ties = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = n_dist(rng), d = d_dist(rng), k = k_dist(rng);
    DenseIndex index(d, TargetMode::kP2P);
    std::vector<std::string> ids;
    std::vector<std::vector<float>> vecs;
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<float> v(d);
      if (i > 0 && i % 4 == 0) {
        v = vecs[rng() % i];  // duplicated vector: guaranteed tie
        ++ties;
      } else {
        for (auto& x : v) x = g(rng);
      }
      ids.push_back("p" + std::to_string(perm[i]));
      vecs.push_back(v);
      index.add(ids.back(), std::span<const float>(v));
    }
    std::vector<double> q(d);
    if (t % 10 == 0) {
      std::fill(q.begin(), q.end(), 0.0);  // all scores tie
    } else {
      for (auto& x : q) x = g(rng);
    }
    const SearchResult got = search(index, q, k);
    const auto want = oracle::knn(ids, vecs, q, k);
    bool same = got.hits.size() == want.size() && got.truncated == (k > n);
    for (std::size_t i = 0; same && i < want.size(); ++i) {
      same = got.hits[i].id == want[i].first && got.hits[i].score == want[i].second;
    }
    if (!same) ++bad;
  }
  return {bad == 0, std::to_string(bad) + " mismatching instances / 200 (" +
                        std::to_string(ties) + " duplicated vectors)"};
}

std::string random_text(std::mt19937_64& rng) {
  static const char* words[] = {"ab", "cab", "bad", "dab", "abba", "cd", "dc", "bcd", "a", "d",
                                "teddy", "bär", "plüsch"};
  std::uniform_int_distribution<int> n(1, 5);
  std::uniform_int_distribution<std::size_t> w(0, 12);
  std::string out;
  const int k = n(rng);
  for (int i = 0; i < k; ++i) {
    if (!out.empty()) out += ' ';
    out += words[w(rng)];
  }
  return out;
}

Outcome gradient_check() {
  std::mt19937_64 rng(3);
  FeaturizerConfig cfg;
  cfg.num_buckets = 64;
  double worst = 0.0;
  std::size_t checked = 0;
  for (int draw = 0; draw < 50; ++draw) {
    const double scale = draw % 2 == 0 ? 10.0 : 0.0;
    const EncoderModel m = EncoderModel::random(cfg, 8, rng(), 0.7, scale);
    const std::string q = random_text(rng), pos = random_text(rng);
    std::vector<std::string> negs;
    for (int i = 0; i < 5; ++i) negs.push_back(random_text(rng));
    const ProjectionGradient grad = grad_nll(m, q, pos, negs);
    const SparseVec fq = featurize(cfg, q);
    std::vector<SparseVec> cand{featurize(cfg, pos)};
    for (const auto& n : negs) cand.push_back(featurize(cfg, n));
    for (std::size_t b = 0; b < 64; ++b) {
      for (std::size_t r = 0; r < 8; ++r) {
        const double fd = oracle::finite_difference(m, r, b, fq, cand, 1e-3);
        const double a = grad.at(r, b);
        worst = std::max(worst, std::abs(a - fd) / (std::abs(a) + 1e-8));
        ++checked;
      }
    }
  }
  return {worst < 1e-5, std::to_string(checked) + " entries, worst relative error " +
                            fmt("%.2e", worst) + " (bar 1e-5)"};
}

TrainConfig default_train() { return TrainConfig{}; }

Outcome synthetic_retrieval() {
  SyntheticConfig sc;  // 2000 EN, 200 train pairs, 200 held-out pairs
  const SyntheticData d = make_synthetic(sc);
  const TrainResult r = train_retriever(training_pairs(d.par, d.xx, d.en), d.en, default_train());
  const DenseIndex index = build_index(d.en, r.model, TargetMode::kP2P);
  const std::vector<std::size_t> ks = {1, 5};
  const auto rec = recall_at_k(index, r.model, d.xx, d.dev, ks);
  return {rec.at(5) >= 0.80, "dev recall@5 " + fmt("%.3f", rec.at(5)) + " (bar 0.80), recall@1 " +
                                 fmt("%.3f", rec.at(1))};
}

SyntheticConfig rgit_fixture(std::uint64_t seed) {
  SyntheticConfig sc;
  sc.par_pairs = 20;
  sc.np_passages = 500;
  sc.seed = seed;
  return sc;
}

RgitConfig rgit_config() {
  RgitConfig cfg;
  cfg.max_iterations = 3;
  cfg.tau = 5.0;
  return cfg;
}

RgitData rgit_data(const SyntheticData& d) {
  RgitData data;
  data.xx = &d.xx;
  data.en = &d.en;
  data.par = &d.par;
  data.np = &d.np;
  data.dev = &d.dev;
  data.dev_xx = &d.xx;
  data.np_gold = &d.np_gold;
  return data;
}

Outcome rgit_improvement() {
  int gains = 0, monotone = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    const SyntheticData d = make_synthetic(rgit_fixture(seed));
    const RgitConfig cfg = rgit_config();
    const EncoderModel seed_only =
        train_retriever(training_pairs(d.par, d.xx, d.en), d.en, cfg.train).model;
    const std::vector<std::size_t> ks = {5};
    const double before =
        recall_at_k(build_index(d.en, seed_only, TargetMode::kP2P), seed_only, d.xx, d.dev, ks)
            .at(5);
    LexiconTrainer gens(cfg.max_kps);
    const RgitResult r = run_rgit(rgit_data(d), cfg, gens);
    const double after = r.final_recall.at(5);
    if (after - before >= 0.05) ++gains;
    bool mono = true;
    std::string acc;
    std::optional<double> prev;
    for (const auto& log : r.logs) {
      if (!log.label_accuracy) continue;
      if (prev && *log.label_accuracy < *prev) mono = false;
      prev = log.label_accuracy;
      acc += (acc.empty() ? "" : ">") + fmt("%.3f", *log.label_accuracy);
    }
    if (mono && !acc.empty()) ++monotone;
    detail += "seed " + std::to_string(seed) + ": r@5 " + fmt("%.3f", before) + "->" +
              fmt("%.3f", after) + " acc " + acc + "; ";
  }
  detail += "gain>=5pts on " + std::to_string(gains) + "/3, accuracy non-decreasing on " +
            std::to_string(monotone) + "/3";
  return {gains == 3 && monotone >= 2, detail};
}

std::set<std::string> pair_keys(const PairSet& s) {
  std::set<std::string> out;
  for (const auto& p : s.pairs()) out.insert(p.xx_id + "|" + p.en_id.value_or(""));
  return out;
}

Outcome gate_and_loop() {
  const SyntheticData d = make_synthetic(rgit_fixture(7));
  std::vector<std::string> problems;

  // Closed gate.
  RgitConfig closed = rgit_config();
  closed.tau = 101.0;
  LexiconTrainer g1(closed.max_kps);
  const RgitResult rc = run_rgit(rgit_data(d), closed, g1);
  const EncoderModel par_only =
      train_retriever(training_pairs(d.par, d.xx, d.en), d.en, closed.train).model;
  std::size_t admitted = 0;
  for (const auto& s : rc.pseudo_history) admitted += s.size();
  if (admitted != 0) problems.push_back("tau=101 admitted pairs");
  if (!rc.final_model || serialize_model(*rc.final_model) != serialize_model(par_only)) {
    problems.push_back("tau=101 final model differs from PAR-only");
  }

  // Tau monotonicity on iteration 1, same R_0 and G_0.
  const RgitConfig cfg = rgit_config();
  const DenseIndex index0 = build_index(d.en, par_only, TargetMode::kP2P);
  std::vector<ParallelExample> par;
  std::vector<RetrievedKnowledge> knowledge;
  for (const auto& p : d.par.pairs()) {
    par.push_back({&d.xx.at(p.xx_id), &d.en.at(*p.en_id)});
    knowledge.push_back(knowledge_from_hits(
        search(index0, d.xx.at(p.xx_id).text, par_only, cfg.m), d.en, cfg.m));
  }
  LexiconTrainer g2(cfg.max_kps);
  const auto base = g2.train_base(par);
  const auto aug = g2.train_augmented(par, knowledge, 0);
  std::set<std::string> prev;
  bool first = true;
  std::string sizes;
  for (double tau : {0.0, 5.0, 10.0, 15.0, 25.0, 50.0}) {
    RgitConfig c = cfg;
    c.tau = tau;
    const auto now = pair_keys(mine_pseudo_pairs(index0, par_only, *aug, *base, d.np, d.en, c).pseudo);
    sizes += (sizes.empty() ? "" : ">=") + std::to_string(now.size());
    if (!first && !std::includes(prev.begin(), prev.end(), now.begin(), now.end())) {
      problems.push_back("tau " + fmt("%.0f", tau) + " enlarged the pseudo set");
    }
    prev = now;
    first = false;
  }

  // Fresh rebuild: remove the previous iteration's files before mining.
  const fs::path dir = fs::temp_directory_path() / "xlkg_acceptance_rebuild";
  fs::remove_all(dir);
  RgitConfig two = cfg;
  two.max_iterations = 2;
  two.early_stop_on_recall = false;
  RgitOptions opts;
  opts.run_dir = dir;
  opts.before_mining = [&](std::size_t t) {
    if (t > 0) fs::remove_all(dir / ("iter_" + std::to_string(t - 1)));
  };
  LexiconTrainer g3(two.max_kps), g4(two.max_kps);
  const RgitResult deleted = run_rgit(rgit_data(d), two, g3, opts);
  const RgitResult kept = run_rgit(rgit_data(d), two, g4);
  fs::remove_all(dir);
  if (deleted.pseudo_history != kept.pseudo_history ||
      serialize_model(*deleted.final_model) != serialize_model(*kept.final_model)) {
    problems.push_back("deleting iteration files changed the result");
  }

  std::string detail = "tau=101 pairs " + std::to_string(admitted) +
                       ", iteration-1 pseudo sizes " + sizes + ", rebuild sets " +
                       std::to_string(kept.pseudo_history.size());
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

std::string random_phrase(std::mt19937_64& rng) {
  static const std::vector<std::string> atoms = {"a", "teddy", "bär", "[", "]", "[SE", "P]",
                                                 "SEP", "熊", "곰", "-", "  ", " ", "[d", "e]",
                                                 "CTX", "ENKPS", "[x"};
  std::uniform_int_distribution<std::size_t> n(1, 6), pick(0, atoms.size() - 1);
  while (true) {
    std::string s;
    const std::size_t k = n(rng);
    for (std::size_t i = 0; i < k; ++i) s += atoms[pick(rng)];
    while (!s.empty() && s.front() == ' ') s.erase(s.begin());
    while (!s.empty() && s.back() == ' ') s.pop_back();
    if (!s.empty() && !contains_control_token(s)) return s;
  }
}

Outcome format_exactness() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> len(1, 10);
  const std::vector<LangCode> langs = {LangCode::parse("DE"), LangCode::parse("FR"),
                                       LangCode::parse("ZH"), LangCode::parse("KO")};
  int bad = 0;
  for (int t = 0; t < 10000; ++t) {
    std::vector<std::string> kps(len(rng));
    for (auto& kp : kps) kp = random_phrase(rng);
    const ParsedTarget back = parse_target(assemble_target(kps, langs[t % 4]));
    if (back.keyphrases != kps || !(back.lang == langs[t % 4])) ++bad;
  }
  const LangCode de = LangCode::parse("DE"), fr = LangCode::parse("FR"),
                 zh = LangCode::parse("ZH");
  const std::vector<std::pair<std::string, std::string>> layouts = {
      {assemble_codemix_input({{"a", "b"}, "x", de}), "[ENKPS] a [SEP] b [CTX] x [DE]"},
      {assemble_codemix_input({{}, "x", fr}), "[ENKPS] [CTX] x [FR]"},
      {assemble_codemix_input({{"steiff teddy bear"}, "x", de}),
       "[ENKPS] steiff teddy bear [CTX] x [DE]"},
      {assemble_target(std::vector<std::string>{"a", "b"}, de), "[DE] a [SEP] b"},
      {assemble_target(std::vector<std::string>{"kp"}, zh), "[ZH] kp"},
  };
  int layout_bad = 0;
  for (const auto& [got, want] : layouts) layout_bad += got == want ? 0 : 1;
  const auto ko = parse_target("[KO] a [SEP] [SEP] b");
  if (ko.keyphrases != std::vector<std::string>{"a", "b"}) ++layout_bad;
  return {bad == 0 && layout_bad == 0, std::to_string(bad) + " round-trip failures / 10000, " +
                                           std::to_string(layout_bad) + " layout mismatches"};
}

Outcome margin_properties() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> c(1e-3, 1e3);
  const std::size_t n_xx = 150, n_en = 200, d = 16;
  std::vector<std::string> xx_ids, en_ids;
  std::vector<DenseVec> xx, en;
  for (std::size_t i = 0; i < n_en; ++i) {
    DenseVec v(d);
    for (auto& x : v) x = g(rng);
    en_ids.push_back("e" + std::to_string(i));
    en.push_back(v);
  }
  for (std::size_t i = 0; i < n_xx; ++i) {
    DenseVec v = en[(i * 13) % n_en];
    for (auto& x : v) x += 0.7 * g(rng);
    xx_ids.push_back("x" + std::to_string(i));
    xx.push_back(v);
  }
  MarginConfig cfg;
  cfg.threshold = 1.0;
  const PairSet reference = mine_bitext(xx_ids, xx, en_ids, en, cfg);
  double worst = 0.0;
  for (int s = 0; s < 100; ++s) {
    auto xs = xx;
    auto es = en;
    for (auto& v : xs) {
      const double f = c(rng);
      for (auto& x : v) x *= f;
    }
    for (auto& v : es) {
      const double f = c(rng);
      for (auto& x : v) x *= f;
    }
    const PairSet scaled = mine_bitext(xx_ids, xs, en_ids, es, cfg);
    if (pair_keys(scaled) != pair_keys(reference)) {
      worst = std::numeric_limits<double>::infinity();
      continue;
    }
    for (std::size_t i = 0; i < scaled.size(); ++i) {
      const double a = *reference.pairs()[i].score, b = *scaled.pairs()[i].score;
      worst = std::max(worst, std::abs(a - b) / std::abs(a));
    }
  }
  // Descending sweep: each lower threshold must keep every earlier pair.
  std::set<std::string> prev;
  bool nested = true;
  std::string sizes;
  for (double th : {2.0, 1.5, 1.2, 1.1, 1.03, 1.0, 0.9, 0.5}) {
    MarginConfig t = cfg;
    t.threshold = th;
    const auto now = pair_keys(mine_bitext(xx_ids, xx, en_ids, en, t));
    if (!std::includes(now.begin(), now.end(), prev.begin(), prev.end())) nested = false;
    sizes += (sizes.empty() ? "" : "<=") + std::to_string(now.size());
    prev = now;
  }
  return {worst < 1e-9 && nested, "worst relative deviation " + fmt("%.1e", worst) +
                                      " over 100 scalings; sweep sizes " + sizes};
}

Outcome headline_numbers() {
  // Exported code-mix file for the bundled fixture with gold-partner
  // knowledge, against the checked-in golden copy.
  const fs::path data = XLKG_TEST_DATA;
  const Corpus xx = load_corpus(data / "fixture" / "xx.jsonl");
  const Corpus en = load_corpus(data / "fixture" / "en.jsonl");
  const Corpus np = load_corpus(data / "fixture" / "np.jsonl");
  const PairSet gold = load_pairs(data / "fixture" / "np_gold.jsonl", PairKind::kParallel, xx, &en);
  std::vector<RetrievedKnowledge> knowledge;
  for (const auto& p : np.passages()) {
    SearchResult hit{{{*gold.partner_of(p.id), 1.0}}, false};
    knowledge.push_back(knowledge_from_hits(hit, en, 1));
  }
  const fs::path out = fs::temp_directory_path() / "xlkg_acceptance_codemix.jsonl";
  export_codemix_dataset(np.passages(), knowledge, out);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  const bool same = slurp(out) == slurp(data / "golden_codemix.jsonl");
  fs::remove(out);
  return {same, std::string("benchmark F1 and human accuracy figures need the original "
                            "corpora and neural models, not reproduced here; code-mix export ") +
                    (same ? "matches" : "differs from") + " golden file"};
}

}  // namespace

int main() {
  criterion("metric-oracle", 1, metric_oracle);
  criterion("knn-exactness", 30, knn_exactness);
  criterion("gradient-check", 10, gradient_check);
  criterion("synthetic-retrieval", 120, synthetic_retrieval);
  criterion("rgit-improvement", 300, rgit_improvement);
  criterion("gate-and-loop", 60, gate_and_loop);
  criterion("format-exactness", 5, format_exactness);
  criterion("margin-properties", 30, margin_properties);
  criterion("headline-numbers", 5, headline_numbers);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
