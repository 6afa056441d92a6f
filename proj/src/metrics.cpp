#include "xlkg/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "xlkg/error.hpp"
#include "xlkg/jsonl.hpp"
#include "xlkg/text.hpp"

namespace xlkg {

namespace {

std::set<std::string> normalized_set(std::span<const std::string> phrases) {
  std::set<std::string> out;
  for (const auto& p : phrases) {
    std::string n = normalize_phrase(p);
    if (!n.empty()) out.insert(std::move(n));
  }
  return out;
}

// Sorting before summation makes the mean independent of input order.
double order_free_mean(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v * 100.0);
  return buf;
}

}  // namespace

ExampleScore prf_at_m(std::span<const std::string> gold,
                      std::span<const std::string> pred) {
  const auto g = normalized_set(gold);
  const auto p = normalized_set(pred);
  ExampleScore s;
  s.num_gold = g.size();
  s.num_pred = p.size();
  for (const auto& x : p) s.num_matched += g.count(x);

  if (g.empty()) {
    s.flagged = true;
    const double v = p.empty() ? 1.0 : 0.0;
    s.precision = s.recall = s.f1 = v;
    return s;
  }
  if (p.empty()) return s;
  s.precision = static_cast<double>(s.num_matched) / static_cast<double>(s.num_pred);
  s.recall = static_cast<double>(s.num_matched) / static_cast<double>(s.num_gold);
  // 2PR / (P + R) reduces to 2|match| / (|gold| + |pred|): one rounding.
  if (s.num_matched > 0) {
    s.f1 = 2.0 * static_cast<double>(s.num_matched) /
           static_cast<double>(s.num_gold + s.num_pred);
  }
  return s;
}

EvalReport aggregate(std::span<const ExampleScore> scores) {
  if (scores.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "cannot aggregate zero scores");
  }
  struct Acc {
    std::vector<double> p, r, f;
    std::size_t flagged = 0;
  };
  std::map<LangCode, Acc> by_lang;
  for (const auto& s : scores) {
    auto& a = by_lang[s.lang];
    a.p.push_back(s.precision);
    a.r.push_back(s.recall);
    a.f.push_back(s.f1);
    a.flagged += s.flagged ? 1 : 0;
  }
  EvalReport report;
  std::vector<double> lp, lr, lf;
  for (auto& [lang, a] : by_lang) {
    LanguageScore ls{order_free_mean(a.p), order_free_mean(a.r),
                     order_free_mean(a.f), a.p.size(), a.flagged};
    lp.push_back(ls.precision);
    lr.push_back(ls.recall);
    lf.push_back(ls.f1);
    report.overall.flagged += a.flagged;
    report.per_language.emplace(lang, ls);
  }
  report.overall.precision = order_free_mean(lp);
  report.overall.recall = order_free_mean(lr);
  report.overall.f1 = order_free_mean(lf);
  report.overall.count = scores.size();
  return report;
}

std::vector<ExampleScore> score_predictions(
    const Corpus& gold,
    const std::map<std::string, std::vector<std::string>>& predictions) {
  for (const auto& [id, _] : predictions) {
    if (!gold.contains(id)) {
      throw Error(ErrorCode::kNotFound, "prediction for unknown id '" + id + "'");
    }
  }
  std::vector<ExampleScore> out;
  out.reserve(gold.size());
  for (const auto& p : gold.passages()) {
    auto it = predictions.find(p.id);
    const std::vector<std::string> none;
    ExampleScore s = prf_at_m(p.keyphrases, it == predictions.end() ? none : it->second);
    s.id = p.id;
    s.lang = p.lang;
    if (it == predictions.end()) s.flagged = true;
    out.push_back(std::move(s));
  }
  return out;
}

std::string render_report(const EvalReport& report) {
  std::string out = "lang      n       P       R      F1\n";
  auto row = [&](const std::string& name, const LanguageScore& s) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-6s %4zu %7s %7s %7s\n", name.c_str(), s.count,
                  pct(s.precision).c_str(), pct(s.recall).c_str(), pct(s.f1).c_str());
    out += buf;
  };
  for (const auto& [lang, s] : report.per_language) row(lang.str(), s);
  row("AVG", report.overall);
  for (const auto& [k, v] : report.recall_at_k) {
    out += "recall@" + std::to_string(k) + " " + pct(v) + "\n";
  }
  return out;
}

void save_report(const EvalReport& report, std::span<const ExampleScore> scores,
                 const std::filesystem::path& path) {
  auto lang_json = [](const LanguageScore& s) {
    return Json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
                {"count", s.count},         {"flagged", s.flagged}};
  };
  Json per_lang = Json::object();
  for (const auto& [lang, s] : report.per_language) per_lang[lang.str()] = lang_json(s);
  Json examples = Json::array();
  for (const auto& s : scores) {
    examples.push_back({{"id", s.id}, {"lang", s.lang.str()}, {"precision", s.precision},
                        {"recall", s.recall}, {"f1", s.f1}, {"num_gold", s.num_gold},
                        {"num_pred", s.num_pred}, {"num_matched", s.num_matched},
                        {"flagged", s.flagged}});
  }
  Json rec{{"per_language", per_lang}, {"overall", lang_json(report.overall)},
           {"examples", examples}};
  if (!report.recall_at_k.empty()) {
    Json r = Json::object();
    for (const auto& [k, v] : report.recall_at_k) r[std::to_string(k)] = v;
    rec["recall_at_k"] = r;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << rec.dump(2) << '\n';
}

}  // namespace xlkg
