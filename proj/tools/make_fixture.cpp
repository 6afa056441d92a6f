// Writes the deterministic synthetic bilingual fixture as JSONL files.

#include <iostream>

#include <CLI11.hpp>

#include "xlkg/error.hpp"
#include "xlkg/jsonl.hpp"
#include "xlkg/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic EN/XX fixture"};
  app.option_defaults()->always_capture_default();
  xlkg::SyntheticConfig cfg;
  std::string out;
  app.add_option("--out", out, "Output directory")->required();
  app.add_option("--en", cfg.en_passages, "English passages");
  app.add_option("--par", cfg.par_pairs, "Seed parallel pairs");
  app.add_option("--dev", cfg.dev_pairs, "Held-out pairs");
  app.add_option("--np", cfg.np_passages, "Non-parallel XX passages");
  app.add_option("--vocabulary", cfg.vocabulary, "Word types");
  app.add_option("--keyphrases", cfg.keyphrases, "Keyphrase inventory size");
  app.add_option("--min-words", cfg.min_words, "Shortest filler length");
  app.add_option("--max-words", cfg.max_words, "Longest filler length");
  app.add_option("--lang", cfg.lang, "XX language code");
  app.add_option("--seed", cfg.seed, "Generator seed");
  CLI11_PARSE(app, argc, argv);
  try {
    const auto data = xlkg::make_synthetic(cfg);
    xlkg::save_synthetic(data, out);
    std::cout << xlkg::Json{{"en", data.en.size()}, {"xx", data.xx.size()},
                            {"par", data.par.size()}, {"dev", data.dev.size()},
                            {"np", data.np.size()}}.dump()
              << std::endl;
  } catch (const xlkg::Error& e) {
    std::cerr << xlkg::Json{{"error", xlkg::to_string(e.code())}, {"message", e.what()}}.dump()
              << std::endl;
    return 1;
  }
  return 0;
}
