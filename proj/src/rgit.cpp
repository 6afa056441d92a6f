#include "xlkg/rgit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "xlkg/error.hpp"
#include "xlkg/jsonl.hpp"
#include "xlkg/metrics.hpp"
#include "xlkg/parallel.hpp"

namespace xlkg {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kEarlyStopK = 5;
const std::vector<std::size_t> kRecallKs = {1, 2, 5, 10, 20};

Json recall_json(const std::map<std::size_t, double>& recall) {
  Json r = Json::object();
  for (const auto& [k, v] : recall) r[std::to_string(k)] = v;
  return r;
}

Json log_json(const IterationLog& log) {
  Json rec{{"t", log.t},
           {"train_pairs", log.train_pairs},
           {"evaluated", log.evaluated},
           {"pseudo_count", log.pseudo_count},
           {"recall", recall_json(log.recall)}};
  if (log.label_accuracy) rec["label_accuracy"] = *log.label_accuracy;
  if (log.stopped) rec["stop_reason"] = log.stop_reason;
  return rec;
}

void write_admissions(const std::vector<Admission>& admissions, const fs::path& path) {
  JsonlWriter out(path);
  for (const auto& a : admissions) {
    out.write(Json{{"xx_id", a.xx_id},
                   {"en_id", a.en_id},
                   {"score", a.f1_aug - a.f1_base},
                   {"f1_aug", a.f1_aug},
                   {"f1_base", a.f1_base},
                   {"alternates", a.alternates}});
  }
  out.close();
}

std::vector<ParallelExample> parallel_examples(const PairSet& par, const Corpus& xx,
                                               const Corpus& en) {
  std::vector<ParallelExample> out;
  for (const auto& p : par.pairs()) out.push_back({&xx.at(p.xx_id), &en.at(*p.en_id)});
  return out;
}

fs::path iteration_dir(const fs::path& run_dir, std::size_t t) {
  return run_dir / ("iter_" + std::to_string(t));
}

}  // namespace

void RgitConfig::validate() const {
  if (max_iterations < 1) throw Error(ErrorCode::kInvalidArgument, "T must be >= 1");
  if (!(tau >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "tau must be >= 0");
  if (m < 1) throw Error(ErrorCode::kInvalidArgument, "m must be >= 1");
  if (max_kps < 1) throw Error(ErrorCode::kInvalidArgument, "max_kps must be >= 1");
  train.validate();
}

bool usefulness_gate(double f1_aug, double f1_base, double tau) {
  return f1_aug - f1_base > tau;
}

bool recall_early_stop(std::span<const double> history) {
  if (history.size() < 2) return false;
  const double best = *std::max_element(history.begin(), history.end() - 1);
  return history.back() <= best;
}

double pseudo_label_accuracy(const PairSet& pseudo, const PairSet& gold) {
  std::size_t covered = 0;
  std::size_t correct = 0;
  for (const auto& p : pseudo.pairs()) {
    const auto partner = gold.partner_of(p.xx_id);
    if (!partner) continue;
    ++covered;
    if (p.en_id && *p.en_id == *partner) ++correct;
  }
  if (covered == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "no pseudo pair has a gold partner to check against");
  }
  return static_cast<double>(correct) / static_cast<double>(covered);
}

std::unique_ptr<KeyphraseGenerator> LexiconTrainer::train_base(
    std::span<const ParallelExample>) {
  return std::make_unique<ExtractiveGenerator>(max_kps_);
}

std::unique_ptr<KeyphraseGenerator> LexiconTrainer::train_augmented(
    std::span<const ParallelExample> par, std::span<const RetrievedKnowledge> retrieved,
    std::size_t) {
  PhraseLexicon lexicon;
  for (std::size_t i = 0; i < par.size(); ++i) {
    const auto& xx_kps = par[i].xx->keyphrases;
    if (xx_kps.empty()) continue;
    lexicon.add_cooccurrence(par[i].en->keyphrases, xx_kps);
    if (i < retrieved.size()) lexicon.add_cooccurrence(retrieved[i].flat(), xx_kps);
  }
  return std::make_unique<LexiconGenerator>(std::move(lexicon), max_kps_);
}

std::unique_ptr<KeyphraseGenerator> ExternalTrainer::train_base(
    std::span<const ParallelExample> par) {
  const fs::path dir = run_dir_ / "base";
  fs::create_directories(dir);
  std::vector<Passage> examples;
  for (const auto& ex : par) examples.push_back(*ex.xx);
  std::vector<RetrievedKnowledge> none(examples.size());
  export_codemix_dataset(examples, none, dir / "train.jsonl");
  return std::make_unique<ExternalFileGenerator>(dir / "predictions.jsonl",
                                                 dir / "requests.jsonl");
}

std::unique_ptr<KeyphraseGenerator> ExternalTrainer::train_augmented(
    std::span<const ParallelExample> par, std::span<const RetrievedKnowledge> retrieved,
    std::size_t iteration) {
  const fs::path dir = iteration_dir(run_dir_, iteration);
  fs::create_directories(dir);
  std::vector<Passage> examples;
  for (const auto& ex : par) examples.push_back(*ex.xx);
  export_codemix_dataset(examples, retrieved, dir / "generator_train.jsonl");
  return std::make_unique<ExternalFileGenerator>(dir / "predictions.jsonl",
                                                 dir / "requests.jsonl");
}

MiningOutcome mine_pseudo_pairs(const DenseIndex& en_index, const EncoderModel& retriever,
                                const KeyphraseGenerator& augmented,
                                const KeyphraseGenerator& base,
                                const Corpus& np_examples, const Corpus& en_corpus,
                                const RgitConfig& cfg) {
  const auto passages = np_examples.passages();
  std::vector<std::string> texts;
  for (const auto& p : passages) texts.push_back(p.text);
  const auto hits = search_batch(en_index, retriever, texts, cfg.m, cfg.threads);

  std::vector<GenerationRequest> base_requests(passages.size());
  std::vector<GenerationRequest> aug_requests(passages.size());
  for (std::size_t i = 0; i < passages.size(); ++i) {
    base_requests[i].passage = &passages[i];
    aug_requests[i].passage = &passages[i];
    aug_requests[i].knowledge = knowledge_from_hits(hits[i], en_corpus, cfg.m);
  }
  const auto base_pred = base.predict(base_requests, cfg.threads);
  const auto aug_pred = augmented.predict(aug_requests, cfg.threads);

  std::vector<std::size_t> order(passages.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return passages[a].id < passages[b].id;
  });

  MiningOutcome out;
  for (std::size_t i : order) {
    const Passage& p = passages[i];
    if (p.keyphrases.empty() || hits[i].hits.empty()) continue;
    ++out.evaluated;
    const double f1_base = 100.0 * prf_at_m(p.keyphrases, base_pred[i]).f1;
    const double f1_aug = 100.0 * prf_at_m(p.keyphrases, aug_pred[i]).f1;
    if (!usefulness_gate(f1_aug, f1_base, cfg.tau)) continue;
    Admission a{p.id, hits[i].hits[0].id, f1_aug, f1_base, {}};
    for (std::size_t r = 1; r < hits[i].hits.size(); ++r) {
      a.alternates.push_back(hits[i].hits[r].id);
    }
    out.pseudo.add({a.xx_id, a.en_id, f1_aug - f1_base});
    out.admissions.push_back(std::move(a));
  }
  return out;
}

std::vector<TrainingPair> training_pairs(const PairSet& pairs, const Corpus& xx,
                                         const Corpus& en) {
  std::vector<TrainingPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs.pairs()) {
    if (!p.en_id) {
      throw Error(ErrorCode::kInvalidArgument, "training pair lacks an EN partner");
    }
    out.push_back({xx.at(p.xx_id).text, en.at(*p.en_id).text, *p.en_id});
  }
  return out;
}

RgitResult run_rgit(const RgitData& data, const RgitConfig& cfg,
                    GeneratorTrainer& generators, const RgitOptions& options) {
  cfg.validate();
  if (data.xx == nullptr || data.en == nullptr || data.par == nullptr ||
      data.np == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "RGIT needs XX, EN, PAR and NP data");
  }
  if (data.par->empty()) throw Error(ErrorCode::kInvalidArgument, "D_PAR is empty");
  const Corpus& xx = *data.xx;
  const Corpus& en = *data.en;
  const Corpus& dev_xx = data.dev_xx != nullptr ? *data.dev_xx : xx;
  const bool have_dev = data.dev != nullptr && !data.dev->empty();

  std::optional<fs::path> run_dir = options.run_dir;
  std::ofstream log_file;
  if (run_dir) {
    fs::create_directories(*run_dir);
    log_file.open(*run_dir / "log.jsonl", std::ios::trunc);
    if (!log_file) throw Error(ErrorCode::kIo, "cannot write run log");
  }

  RgitResult result;
  const auto par_examples = parallel_examples(*data.par, xx, en);
  const auto par_pairs = training_pairs(*data.par, xx, en);

  try {
    // G_B: trained once on D_PAR without retrieved knowledge.
    auto base = generators.train_base(par_examples);

    PairSet pseudo(PairKind::kPseudo);  // D_PSEUDO^t
    std::vector<double> recall_history;
    std::vector<PairSet> evaluated_sets;  // D_PSEUDO^t behind each R_t
    bool ended_early = false;

    for (std::size_t t = 0; t < cfg.max_iterations; ++t) {
      IterationLog log;
      log.t = t;

      std::vector<TrainingPair> pairs = training_pairs(pseudo, xx, en);
      pairs.insert(pairs.end(), par_pairs.begin(), par_pairs.end());
      log.train_pairs = pairs.size();
      const EncoderModel retriever = train_retriever(pairs, en, cfg.train).model;
      const DenseIndex index = build_index(en, retriever, TargetMode::kP2P);
      if (run_dir) {
        fs::create_directories(iteration_dir(*run_dir, t));
        save_model(retriever, iteration_dir(*run_dir, t) / "retriever.bin");
      }

      if (have_dev) {
        log.recall = recall_at_k(index, retriever, dev_xx, *data.dev, kRecallKs, cfg.threads);
        recall_history.push_back(log.recall.at(kEarlyStopK));
        evaluated_sets.push_back(pseudo);
        if (cfg.early_stop_on_recall && recall_early_stop(recall_history)) {
          log.stopped = true;
          log.stop_reason = "dev recall@5 did not improve";
        }
      }

      if (!log.stopped) {
        std::vector<std::string> queries;
        for (const auto& ex : par_examples) queries.push_back(ex.xx->text);
        const auto par_hits = search_batch(index, retriever, queries, cfg.m, cfg.threads);
        std::vector<RetrievedKnowledge> par_knowledge;
        for (const auto& h : par_hits) par_knowledge.push_back(knowledge_from_hits(h, en, cfg.m));
        auto augmented = generators.train_augmented(par_examples, par_knowledge, t);

        if (options.before_mining) options.before_mining(t);
        MiningOutcome mined =
            mine_pseudo_pairs(index, retriever, *augmented, *base, *data.np, en, cfg);
        log.evaluated = mined.evaluated;
        log.pseudo_count = mined.pseudo.size();
        if (data.np_gold != nullptr && !mined.pseudo.empty()) {
          try {
            log.label_accuracy = pseudo_label_accuracy(mined.pseudo, *data.np_gold);
          } catch (const Error&) {
            // No admitted pair has a known partner.
          }
        }
        if (run_dir) {
          write_admissions(mined.admissions,
                           iteration_dir(*run_dir, t) / "pseudo_pairs.jsonl");
        }
        pseudo = mined.pseudo;
        result.pseudo_history.push_back(mined.pseudo);
        result.admissions.push_back(std::move(mined.admissions));
        if (pseudo.empty()) {
          log.stopped = true;
          log.stop_reason = "no pseudo pairs admitted";
          result.warnings.push_back("iteration " + std::to_string(t) +
                                    " admitted no pseudo pairs; loop terminated");
        }
      }

      result.logs.push_back(log);
      if (log_file) log_file << log_json(log).dump() << '\n' << std::flush;
      if (options.on_iteration) options.on_iteration(log);
      if (log.stopped) {
        ended_early = true;
        break;
      }
    }

    // Early termination falls back to the pseudo set behind the best
    // retriever seen (the empty set when nothing was evaluated).
    if (ended_early) {
      if (!recall_history.empty()) {
        const auto best = static_cast<std::size_t>(
            std::max_element(recall_history.begin(), recall_history.end()) -
            recall_history.begin());
        pseudo = evaluated_sets[best];
      } else {
        pseudo = PairSet(PairKind::kPseudo);
      }
    }
    result.final_pseudo = pseudo;

    if (pseudo.empty()) {
      result.warnings.push_back("final retriever trained on D_PAR only");
      result.final_model = train_retriever(par_pairs, en, cfg.train).model;
    } else {
      const auto pseudo_pairs = training_pairs(pseudo, xx, en);
      const EncoderModel warm = train_retriever(pseudo_pairs, en, cfg.train).model;
      result.final_model = train_retriever(par_pairs, en, cfg.train, &warm).model;
    }
    if (have_dev) {
      const DenseIndex index = build_index(en, *result.final_model, TargetMode::kP2P);
      result.final_recall = recall_at_k(index, *result.final_model, dev_xx, *data.dev,
                                        kRecallKs, cfg.threads);
    }
    if (run_dir) {
      save_model(*result.final_model, *run_dir / "final_retriever.bin");
      save_pairs(result.final_pseudo, *run_dir / "final_pseudo_pairs.jsonl");
      std::ofstream summary(*run_dir / "summary.json", std::ios::trunc);
      Json s{{"iterations", result.logs.size()},
             {"final_pseudo_count", result.final_pseudo.size()},
             {"final_recall", recall_json(result.final_recall)},
             {"warnings", result.warnings}};
      summary << s.dump(2) << '\n';
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kPending) throw;
    result.status = RgitStatus::kPaused;
    result.message = e.what();
    result.final_model.reset();
  }
  return result;
}

}  // namespace xlkg
