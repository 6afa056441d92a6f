// xlkg: command-line front end for cross-lingual keyphrase generation.
//
// Every subcommand accepts --config FILE (or XLKG_CONFIG) holding a JSON
// object. Top-level keys set options of any subcommand that has them; a key
// named after a subcommand holds an object of options for that subcommand
// only. Flags on the command line override both. The merged configuration
// is written next to the primary output as <output>.config.json.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xlkg/corpus.hpp"
#include "xlkg/encoder.hpp"
#include "xlkg/error.hpp"
#include "xlkg/generation.hpp"
#include "xlkg/index.hpp"
#include "xlkg/jsonl.hpp"
#include "xlkg/metrics.hpp"
#include "xlkg/mining.hpp"
#include "xlkg/rgit.hpp"
#include "xlkg/trainer.hpp"

namespace fs = std::filesystem;
using namespace xlkg;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitPaused = 75;

const std::vector<std::size_t> kRecallKs = {1, 2, 5, 10, 20};

void print_error(std::string_view code, std::string_view message) {
  std::cerr << Json{{"error", code}, {"message", message}}.dump() << std::endl;
}

std::string config_value_string(const Json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw Error(ErrorCode::kInvalidArgument,
              "config key '" + key + "' must be a string, number or boolean");
}

std::string long_name(const CLI::Option* opt) {
  const auto& names = opt->get_lnames();
  return names.empty() ? std::string() : names.front();
}

// Applies config values as option defaults so explicit flags still win.
void apply_config(CLI::App& app, const Json& cfg) {
  if (!cfg.is_object()) {
    throw Error(ErrorCode::kInvalidArgument, "config file must hold a JSON object");
  }
  std::map<std::string, CLI::App*> subs;
  for (auto* sub : app.get_subcommands({})) subs[sub->get_name()] = sub;

  auto set_on = [](CLI::App* target, const std::string& key, const Json& v) {
    for (auto* opt : target->get_options()) {
      if (long_name(opt) == key) {
        opt->default_val(config_value_string(v, key));
        return true;
      }
    }
    return false;
  };

  for (const auto& [key, value] : cfg.items()) {
    if (subs.count(key) != 0) continue;
    bool known = set_on(&app, key, value);
    for (auto& [_, sub] : subs) known = set_on(sub, key, value) || known;
    if (!known) throw Error(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
  }
  for (const auto& [name, sub] : subs) {
    const auto it = cfg.find(name);
    if (it == cfg.end()) continue;
    if (!it->is_object()) {
      throw Error(ErrorCode::kInvalidArgument, "config section '" + name + "' must be an object");
    }
    for (const auto& [key, value] : it->items()) {
      if (!set_on(sub, key, value)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "unknown option '" + key + "' in config section '" + name + "'");
      }
    }
  }
}

Json effective_options(const CLI::App& app) {
  Json out = Json::object();
  for (const auto* opt : app.get_options()) {
    const std::string name = long_name(opt);
    if (name.empty() || name == "help" || name == "help-all" || name == "config") continue;
    if (opt->get_expected_min() == 0) {
      const std::string d = opt->get_default_str();
      out[name] = opt->count() > 0 || d == "true" || d == "1";
    } else if (opt->count() > 0) {
      const auto& r = opt->results();
      out[name] = r.empty() ? std::string("true") : r.back();
    } else {
      out[name] = opt->get_default_str();
    }
  }
  return out;
}

void write_effective_config(const CLI::App& root, const CLI::App& sub, const fs::path& out) {
  Json cfg{{"command", sub.get_name()},
           {"global", effective_options(root)},
           {"options", effective_options(sub)}};
  fs::path path = out;
  if (fs::is_directory(out)) {
    path = out / "config.json";
  } else {
    path += ".config.json";
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  f << cfg.dump(2) << '\n';
}

void ensure_parent(const fs::path& out) {
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
}

void print_json(const Json& j) { std::cout << j.dump() << std::endl; }

// ---------------------------------------------------------------------------

struct TrainFlags {
  TrainConfig cfg;
  std::uint32_t ngram_min = 2;
  std::uint32_t ngram_max = 4;
  std::uint32_t buckets = 32768;
  std::uint64_t hash_seed = 0;

  void add_to(CLI::App* sub) {
    sub->add_option("--dim", cfg.dim, "Encoder dimension");
    sub->add_option("--epochs", cfg.epochs, "Training epochs");
    sub->add_option("--batch-size", cfg.batch_size, "Mini-batch size");
    sub->add_option("--negatives", cfg.negatives, "Sampled EN negatives per positive");
    sub->add_option("--learning-rate", cfg.learning_rate, "Gradient descent step size");
    sub->add_option("--score-scale", cfg.score_scale,
                    "Similarity is scale x cosine; 0 uses the raw projection");
    sub->add_option("--seed", cfg.seed, "Training seed");
    sub->add_flag("--in-batch-negatives", cfg.in_batch_negatives,
                  "Also use the other positives of the batch as negatives");
    sub->add_option("--ngram-min", ngram_min, "Shortest character n-gram");
    sub->add_option("--ngram-max", ngram_max, "Longest character n-gram");
    sub->add_option("--buckets", buckets, "Hash buckets (power of two)");
    sub->add_option("--hash-seed", hash_seed, "Feature hash seed");
  }

  TrainConfig resolve() const {
    TrainConfig out = cfg;
    out.featurizer.ngram_min = ngram_min;
    out.featurizer.ngram_max = ngram_max;
    out.featurizer.num_buckets = buckets;
    out.featurizer.hash_seed = hash_seed;
    out.validate();
    return out;
  }
};

Corpus subset(const Corpus& corpus, const PairSet& pairs) {
  Corpus out;
  for (const auto& p : pairs.pairs()) {
    if (!out.contains(p.xx_id)) out.add(corpus.at(p.xx_id));
  }
  return out;
}

std::map<std::string, const SearchResult*> index_hits(const std::vector<QueryHits>& hits) {
  std::map<std::string, const SearchResult*> out;
  for (const auto& q : hits) out[q.xx_id] = &q.result;
  return out;
}

std::vector<RetrievedKnowledge> knowledge_for(const Corpus& examples,
                                              const std::vector<QueryHits>* hits,
                                              const Corpus* en, std::size_t m) {
  std::vector<RetrievedKnowledge> out(examples.size());
  if (hits == nullptr) return out;
  const auto by_id = index_hits(*hits);
  const auto passages = examples.passages();
  for (std::size_t i = 0; i < passages.size(); ++i) {
    const auto it = by_id.find(passages[i].id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::kNotFound, "no retrieval hits for '" + passages[i].id + "'");
    }
    out[i] = knowledge_from_hits(*it->second, *en, m);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-lingual keyphrase generation: retrieval, mining and the "
               "retriever-generator iterative loop"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::string config_path;
  std::size_t threads = 1;
  app.add_option("--config", config_path,
                 "JSON config file (default: $XLKG_CONFIG when set)");
  app.add_option("--threads", threads, "Worker threads; results do not depend on it")
      ->check(CLI::PositiveNumber);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate and canonicalize a passage corpus");
  std::string ingest_in, ingest_out, ingest_lang;
  ingest->add_option("--input", ingest_in, "Input JSONL corpus")->required();
  ingest->add_option("--out", ingest_out, "Canonical JSONL output")->required();
  ingest->add_option("--lang", ingest_lang, "Expected language code (empty: any)");

  // train-retriever
  auto* train = app.add_subcommand("train-retriever", "Train the dual-encoder retriever");
  std::string tr_xx, tr_en, tr_pairs, tr_pseudo, tr_init, tr_out;
  TrainFlags tr_flags;
  train->add_option("--xx", tr_xx, "Target-language corpus")->required();
  train->add_option("--en", tr_en, "English corpus (also the negative pool)")->required();
  train->add_option("--pairs", tr_pairs, "Parallel pairs (PAR)");
  train->add_option("--pseudo", tr_pseudo, "Pseudo pairs (PSEUDO), trained on with --pairs");
  train->add_option("--init", tr_init, "Start from this model instead of a random one");
  train->add_option("--out", tr_out, "Model file")->required();
  tr_flags.add_to(train);

  // build-index
  auto* bindex = app.add_subcommand("build-index", "Encode English passages into an index");
  std::string bi_model, bi_en, bi_vectors, bi_mode = "P2P", bi_out;
  bindex->add_option("--model", bi_model, "Retriever model");
  bindex->add_option("--en", bi_en, "English corpus");
  bindex->add_option("--vectors", bi_vectors, "Precomputed vectors instead of --model/--en");
  bindex->add_option("--mode", bi_mode, "Retrieval target: P2P, P2K or P2PK");
  bindex->add_option("--out", bi_out, "Index file")->required();

  // retrieve
  auto* retrieve = app.add_subcommand("retrieve", "Top-k English passages per query");
  std::string rt_model, rt_index, rt_queries, rt_out;
  std::size_t rt_k = 5;
  retrieve->add_option("--model", rt_model, "Retriever model")->required();
  retrieve->add_option("--index", rt_index, "Index file")->required();
  retrieve->add_option("--queries", rt_queries, "Target-language corpus to query with")->required();
  retrieve->add_option("--k", rt_k, "Hits per query")->check(CLI::PositiveNumber);
  retrieve->add_option("--out", rt_out, "Hits JSONL")->required();

  // mine
  auto* mine = app.add_subcommand("mine", "Margin-based mining of parallel passage pairs");
  std::string mn_model, mn_xx, mn_en, mn_out;
  MarginConfig mn_cfg;
  mine->add_option("--model", mn_model, "Encoder model")->required();
  mine->add_option("--xx", mn_xx, "Target-language corpus")->required();
  mine->add_option("--en", mn_en, "English corpus")->required();
  mine->add_option("--k-neighbors,--k", mn_cfg.k_neighbors, "Neighbourhood size of the margin");
  mine->add_option("--threshold", mn_cfg.threshold, "Minimum ratio margin");
  mine->add_flag("--bidirectional", mn_cfg.bidirectional, "Keep mutual best matches only");
  mine->add_option("--out", mn_out, "Mined pairs JSONL (PSEUDO, score = margin)")->required();

  // format-codemix
  auto* fmt = app.add_subcommand("format-codemix",
                                 "Write code-mixed generator inputs and targets");
  std::string fm_xx, fm_en, fm_hits, fm_model, fm_index, fm_mode = "P2P", fm_out;
  std::size_t fm_m = 5;
  fmt->add_option("--xx", fm_xx, "Target-language examples")->required();
  fmt->add_option("--en", fm_en, "English corpus the hits refer to");
  fmt->add_option("--hits", fm_hits, "Retrieval hits; omit for no retrieved knowledge");
  fmt->add_option("--model", fm_model, "Retrieve with this model instead of --hits");
  fmt->add_option("--index", fm_index, "Index searched with --model");
  fmt->add_option("--retrieval-mode", fm_mode, "P2P, P2K or P2PK; must match --index");
  fmt->add_option("--m", fm_m, "Retrieved passages used (1 academic, 5 e-commerce)")
      ->check(CLI::PositiveNumber);
  fmt->add_option("--out", fm_out, "Code-mix JSONL")->required();

  // generate
  auto* gen = app.add_subcommand("generate", "Predict keyphrases for target-language passages");
  std::string gn_xx, gn_kind = "extractive", gn_en, gn_hits, gn_par, gn_par_xx, gn_ext_pred,
                     gn_ext_req, gn_out;
  std::size_t gn_m = 5, gn_max = 5;
  gen->add_option("--xx", gn_xx, "Passages to predict for")->required();
  gen->add_option("--generator", gn_kind, "extractive, augmented or external");
  gen->add_option("--en", gn_en, "English corpus (augmented)");
  gen->add_option("--hits", gn_hits, "Retrieval hits for the passages (augmented)");
  gen->add_option("--par", gn_par, "Parallel pairs for the phrase lexicon (augmented)");
  gen->add_option("--par-xx", gn_par_xx, "Corpus holding the PAR passages (default --xx)");
  gen->add_option("--m", gn_m, "Retrieved passages used")->check(CLI::PositiveNumber);
  gen->add_option("--max-kps", gn_max, "Keyphrases per passage")->check(CLI::PositiveNumber);
  gen->add_option("--external-predictions", gn_ext_pred, "Predictions file (external)");
  gen->add_option("--external-requests", gn_ext_req,
                  "Where to write requests when predictions are missing (external)");
  gen->add_option("--out", gn_out, "Predictions JSONL")->required();

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Score predictions: P@M, R@M, F1@M");
  std::string ev_gold, ev_pred, ev_out, ev_table, ev_hits, ev_pairs, ev_en;
  eval->add_option("--gold", ev_gold, "Gold corpus")->required();
  eval->add_option("--pred", ev_pred, "Predictions JSONL")->required();
  eval->add_option("--out", ev_out, "Report JSON");
  eval->add_option("--table", ev_table, "Also write the text table here");
  eval->add_option("--hits", ev_hits, "Retrieval hits for a recall@k section");
  eval->add_option("--pairs", ev_pairs, "Gold pairs for the recall@k section");
  eval->add_option("--en", ev_en, "English corpus the gold pairs refer to");

  // rgit
  auto* rgit = app.add_subcommand("rgit", "Retriever-generator iterative training");
  std::string rg_xx, rg_en, rg_par, rg_np, rg_dev, rg_dev_xx, rg_np_gold, rg_kind = "lexicon",
                     rg_dir;
  RgitConfig rg_cfg;
  bool rg_no_early = false;
  TrainFlags rg_flags;
  rgit->add_option("--xx", rg_xx, "Target-language corpus (PAR and NP passages)")->required();
  rgit->add_option("--en", rg_en, "English corpus with keyphrases")->required();
  rgit->add_option("--par", rg_par, "Seed parallel pairs")->required();
  rgit->add_option("--np", rg_np, "Non-parallel passage ids (NP pairs file)")->required();
  rgit->add_option("--dev", rg_dev, "Dev pairs for recall@k and early stopping");
  rgit->add_option("--dev-xx", rg_dev_xx, "Corpus with the dev passages (default --xx)");
  rgit->add_option("--np-gold", rg_np_gold, "Hidden NP partners, for label accuracy");
  rgit->add_option("--iterations", rg_cfg.max_iterations, "T (6 e-commerce, 3 academic)")
      ->check(CLI::PositiveNumber);
  rgit->add_option("--tau", rg_cfg.tau, "Usefulness gate in F1 points");
  rgit->add_option("--m", rg_cfg.m, "Retrieved passages (1 academic, 5 e-commerce)")
      ->check(CLI::PositiveNumber);
  rgit->add_option("--max-kps", rg_cfg.max_kps, "Generator output size")
      ->check(CLI::PositiveNumber);
  rgit->add_flag("--no-early-stop", rg_no_early, "Ignore dev recall@5 for stopping");
  rgit->add_option("--generator", rg_kind, "lexicon or external");
  rgit->add_option("--run-dir,--out", rg_dir, "Output directory")->required();
  rg_flags.add_to(rgit);

  int exit_code = 0;
  try {
    // The config file must be known before parsing so its values can act as
    // defaults; a cheap scan finds it.
    std::string pre_config;
    for (int i = 1; i < argc; ++i) {
      const std::string a = argv[i];
      if (a == "--config" && i + 1 < argc) pre_config = argv[i + 1];
      if (a.rfind("--config=", 0) == 0) pre_config = a.substr(9);
    }
    if (pre_config.empty()) {
      if (const char* env = std::getenv("XLKG_CONFIG"); env != nullptr && *env != '\0') {
        pre_config = env;
      }
    }
    if (!pre_config.empty()) {
      std::ifstream in(pre_config);
      if (!in) throw Error(ErrorCode::kIo, "cannot open config " + pre_config);
      Json cfg;
      try {
        cfg = Json::parse(in);
      } catch (const Json::exception& e) {
        throw Error(ErrorCode::kParse, "config " + pre_config + ": " + e.what());
      }
      apply_config(app, cfg);
    }

    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      print_error("usage", e.what());
      return kExitUsage;
    }

    if (*ingest) {
      LoadStats stats;
      std::optional<LangCode> lang;
      if (!ingest_lang.empty()) lang = LangCode::parse(ingest_lang);
      const Corpus corpus = load_corpus(ingest_in, lang, &stats);
      ensure_parent(ingest_out);
      save_corpus(corpus, ingest_out);
      write_effective_config(app, *ingest, ingest_out);
      Json langs = Json::object();
      for (const auto& [code, n] : corpus.lang_histogram()) langs[code.str()] = n;
      print_json({{"records", stats.records},
                  {"blank_lines", stats.blank_lines},
                  {"deduplicated_keyphrases", stats.deduplicated_keyphrases},
                  {"lang_mismatches", stats.lang_mismatches},
                  {"unknown_langs", stats.unknown_langs},
                  {"languages", langs}});
    } else if (*train) {
      if (tr_pairs.empty() && tr_pseudo.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "train-retriever needs --pairs or --pseudo");
      }
      const TrainConfig cfg = tr_flags.resolve();
      const Corpus xx = load_corpus(tr_xx);
      const Corpus en = load_corpus(tr_en);
      std::vector<TrainingPair> pairs;
      if (!tr_pseudo.empty()) {
        const auto p = training_pairs(load_pairs(tr_pseudo, PairKind::kPseudo, xx, &en), xx, en);
        pairs.insert(pairs.end(), p.begin(), p.end());
      }
      if (!tr_pairs.empty()) {
        const auto p = training_pairs(load_pairs(tr_pairs, PairKind::kParallel, xx, &en), xx, en);
        pairs.insert(pairs.end(), p.begin(), p.end());
      }
      std::optional<EncoderModel> init;
      if (!tr_init.empty()) init = load_model(tr_init);
      const TrainResult result = train_retriever(pairs, en, cfg, init ? &*init : nullptr);
      ensure_parent(tr_out);
      save_model(result.model, tr_out);
      write_effective_config(app, *train, tr_out);
      print_json({{"pairs", pairs.size()}, {"epoch_loss", result.epoch_loss}});
    } else if (*bindex) {
      const TargetMode mode = parse_target_mode(bi_mode);
      std::optional<DenseIndex> index;
      if (!bi_vectors.empty()) {
        index = load_vector_file(bi_vectors, mode);
      } else {
        if (bi_model.empty() || bi_en.empty()) {
          throw Error(ErrorCode::kInvalidArgument, "build-index needs --model and --en, or --vectors");
        }
        index = build_index(load_corpus(bi_en), load_model(bi_model), mode);
      }
      ensure_parent(bi_out);
      save_index(*index, bi_out);
      write_effective_config(app, *bindex, bi_out);
      print_json({{"passages", index->size()}, {"dim", index->dim()}});
    } else if (*retrieve) {
      const EncoderModel model = load_model(rt_model);
      const DenseIndex index = load_index(rt_index);
      if (index.dim() != model.dim()) {
        throw Error(ErrorCode::kInvalidArgument, "model and index dimensions differ");
      }
      const Corpus queries = load_corpus(rt_queries);
      std::vector<std::string> texts;
      for (const auto& p : queries.passages()) texts.push_back(p.text);
      const auto results = search_batch(index, model, texts, rt_k, threads);
      std::vector<QueryHits> hits;
      std::size_t truncated = 0;
      for (std::size_t i = 0; i < results.size(); ++i) {
        hits.push_back({queries.passages()[i].id, results[i]});
        if (results[i].truncated) ++truncated;
      }
      ensure_parent(rt_out);
      save_hits(hits, rt_out);
      write_effective_config(app, *retrieve, rt_out);
      print_json({{"queries", hits.size()}, {"truncated", truncated}});
    } else if (*mine) {
      mn_cfg.validate();
      const PairSet mined =
          mine_bitext(load_corpus(mn_xx), load_corpus(mn_en), load_model(mn_model), mn_cfg, threads);
      ensure_parent(mn_out);
      save_pairs(mined, mn_out);
      write_effective_config(app, *mine, mn_out);
      print_json({{"pairs", mined.size()}});
    } else if (*fmt) {
      const Corpus examples = load_corpus(fm_xx);
      std::optional<Corpus> en;
      std::optional<std::vector<QueryHits>> hits;
      const TargetMode mode = parse_target_mode(fm_mode);
      if (!fm_hits.empty() && !fm_index.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "give either --hits or --model/--index");
      }
      if (!fm_hits.empty() || !fm_index.empty()) {
        if (fm_en.empty()) throw Error(ErrorCode::kInvalidArgument, "retrieval needs --en");
        en = load_corpus(fm_en);
      }
      if (!fm_hits.empty()) {
        hits = load_hits(fm_hits);
      } else if (!fm_index.empty()) {
        if (fm_model.empty()) throw Error(ErrorCode::kInvalidArgument, "--index needs --model");
        const EncoderModel model = load_model(fm_model);
        const DenseIndex index = load_index(fm_index);
        if (index.mode() != mode) {
          throw Error(ErrorCode::kInvalidArgument,
                      "index was built in " + std::string(to_string(index.mode())) +
                          " mode, not " + std::string(to_string(mode)));
        }
        std::vector<std::string> queries;
        for (const auto& p : examples.passages()) queries.push_back(p.text);
        const auto results = search_batch(index, model, queries, fm_m, threads);
        hits.emplace();
        for (std::size_t i = 0; i < results.size(); ++i) {
          hits->push_back({examples.passages()[i].id, results[i]});
        }
      }
      const auto knowledge = knowledge_for(examples, hits ? &*hits : nullptr, en ? &*en : nullptr, fm_m);
      ensure_parent(fm_out);
      export_codemix_dataset(examples.passages(), knowledge, fm_out);
      write_effective_config(app, *fmt, fm_out);
      print_json({{"examples", examples.size()}});
    } else if (*gen) {
      const Corpus passages = load_corpus(gn_xx);
      const GeneratorKind kind = parse_generator_kind(gn_kind);
      std::vector<RetrievedKnowledge> knowledge(passages.size());
      std::unique_ptr<KeyphraseGenerator> generator;
      if (kind == GeneratorKind::kExtractiveBase) {
        generator = std::make_unique<ExtractiveGenerator>(gn_max);
      } else if (kind == GeneratorKind::kLexiconAugmented) {
        if (gn_en.empty() || gn_hits.empty() || gn_par.empty()) {
          throw Error(ErrorCode::kInvalidArgument,
                      "the augmented generator needs --en, --hits and --par");
        }
        const Corpus en = load_corpus(gn_en);
        const Corpus par_xx = gn_par_xx.empty() ? passages : load_corpus(gn_par_xx);
        const PairSet par = load_pairs(gn_par, PairKind::kParallel, par_xx, &en);
        const auto hits = load_hits(gn_hits);
        knowledge = knowledge_for(passages, &hits, &en, gn_m);
        generator = std::make_unique<LexiconGenerator>(build_lexicon(par, par_xx, en), gn_max);
      } else {
        if (gn_ext_pred.empty()) {
          throw Error(ErrorCode::kInvalidArgument, "the external generator needs --external-predictions");
        }
        const fs::path requests =
            gn_ext_req.empty() ? fs::path(gn_out).concat(".requests.jsonl") : fs::path(gn_ext_req);
        generator = std::make_unique<ExternalFileGenerator>(gn_ext_pred, requests);
      }
      std::vector<GenerationRequest> requests(passages.size());
      std::vector<std::string> ids;
      for (std::size_t i = 0; i < passages.size(); ++i) {
        requests[i].passage = &passages.passages()[i];
        requests[i].knowledge = knowledge[i];
        ids.push_back(passages.passages()[i].id);
      }
      const auto preds = generator->predict(requests, threads);
      ensure_parent(gn_out);
      save_predictions(ids, preds, gn_out);
      write_effective_config(app, *gen, gn_out);
      print_json({{"passages", ids.size()}, {"generator", to_string(kind)}});
    } else if (*eval) {
      const Corpus gold = load_corpus(ev_gold);
      const auto preds = import_predictions(ev_pred, &gold);
      const auto scores = score_predictions(gold, preds);
      EvalReport report = aggregate(scores);
      if (!ev_hits.empty() || !ev_pairs.empty()) {
        if (ev_hits.empty() || ev_pairs.empty() || ev_en.empty()) {
          throw Error(ErrorCode::kInvalidArgument, "recall@k needs --hits, --pairs and --en");
        }
        const Corpus en = load_corpus(ev_en);
        const PairSet pairs = load_pairs(ev_pairs, PairKind::kParallel, gold, &en);
        report.recall_at_k = recall_from_hits(load_hits(ev_hits), pairs, kRecallKs);
      }
      const std::string table = render_report(report);
      std::cout << table;
      if (!ev_table.empty()) {
        ensure_parent(ev_table);
        std::ofstream t(ev_table, std::ios::trunc);
        if (!t) throw Error(ErrorCode::kIo, "cannot write " + ev_table);
        t << table;
      }
      if (!ev_out.empty()) {
        ensure_parent(ev_out);
        save_report(report, scores, ev_out);
        write_effective_config(app, *eval, ev_out);
      }
    } else if (*rgit) {
      rg_cfg.early_stop_on_recall = !rg_no_early;
      rg_cfg.threads = threads;
      rg_cfg.train = rg_flags.resolve();
      rg_cfg.validate();
      const Corpus xx = load_corpus(rg_xx);
      const Corpus en = load_corpus(rg_en);
      const PairSet par = load_pairs(rg_par, PairKind::kParallel, xx, &en);
      const PairSet np_ids = load_pairs(rg_np, PairKind::kNonParallel, xx);
      const Corpus np = subset(xx, np_ids);
      std::optional<Corpus> dev_xx;
      if (!rg_dev_xx.empty()) dev_xx = load_corpus(rg_dev_xx);
      const Corpus& dev_corpus = dev_xx ? *dev_xx : xx;
      std::optional<PairSet> dev;
      if (!rg_dev.empty()) dev = load_pairs(rg_dev, PairKind::kParallel, dev_corpus, &en);
      std::optional<PairSet> np_gold;
      if (!rg_np_gold.empty()) np_gold = load_pairs(rg_np_gold, PairKind::kParallel, xx, &en);

      fs::create_directories(rg_dir);
      write_effective_config(app, *rgit, rg_dir);
      RgitData data{&xx, &en, &par, &np, dev ? &*dev : nullptr, &dev_corpus,
                    np_gold ? &*np_gold : nullptr};
      std::unique_ptr<GeneratorTrainer> trainer;
      if (rg_kind == "lexicon") {
        trainer = std::make_unique<LexiconTrainer>(rg_cfg.max_kps);
      } else if (rg_kind == "external") {
        trainer = std::make_unique<ExternalTrainer>(rg_dir);
      } else {
        throw Error(ErrorCode::kInvalidArgument, "unknown generator '" + rg_kind + "'");
      }
      RgitOptions options;
      options.run_dir = fs::path(rg_dir);
      options.on_iteration = [](const IterationLog& log) {
        Json rec{{"t", log.t}, {"train_pairs", log.train_pairs}, {"pseudo_count", log.pseudo_count}};
        if (log.recall.count(5) != 0) rec["recall@5"] = log.recall.at(5);
        if (log.label_accuracy) rec["label_accuracy"] = *log.label_accuracy;
        if (log.stopped) rec["stop_reason"] = log.stop_reason;
        std::cerr << rec.dump() << std::endl;
      };
      const RgitResult result = run_rgit(data, rg_cfg, *trainer, options);
      if (result.status == RgitStatus::kPaused) {
        print_json({{"status", "paused"}, {"message", result.message}});
        exit_code = kExitPaused;
      } else {
        Json recall = Json::object();
        for (const auto& [k, v] : result.final_recall) recall[std::to_string(k)] = v;
        print_json({{"status", "completed"},
                    {"iterations", result.logs.size()},
                    {"final_pseudo_pairs", result.final_pseudo.size()},
                    {"final_recall", recall},
                    {"warnings", result.warnings}});
      }
    }
  } catch (const Error& e) {
    print_error(to_string(e.code()), e.what());
    return kExitError;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return kExitError;
  }
  return exit_code;
}
