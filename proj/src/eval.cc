#include "explattack/eval.h"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "explattack/errors.h"

namespace explattack {

RunSummary Aggregate(std::span<const AttackRecord> records) {
  RunSummary s;
  s.total = records.size();
  std::uint64_t queries_all = 0, queries_attempted = 0;
  for (const auto& r : records) {
    switch (r.status) {
      case AttackStatus::kSuccess:
        ++s.successes;
        [[fallthrough]];
      case AttackStatus::kFailed:
        ++s.attempted;
        queries_attempted += r.queries;
        queries_all += r.queries;
        break;
      case AttackStatus::kSkipped:
        ++s.skipped;
        queries_all += r.queries;
        break;
      case AttackStatus::kErrored:
        ++s.errored;
        break;
    }
  }
  const auto frac = [](std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  s.original_accuracy = frac(s.attempted, s.total);
  s.attack_success_rate = frac(s.successes, s.attempted);
  s.after_attack_accuracy = frac(s.attempted - s.successes, s.total);
  s.avg_queries_all = frac(queries_all, s.total - s.errored);
  s.avg_queries_attempted = frac(queries_attempted, s.attempted);
  return s;
}

double IdentityAfterAttack(const RunSummary& s) {
  return s.original_accuracy * (1.0 - s.attack_success_rate);
}

// ---------------------------------------------------------------------------
// JSON

Json OutputToJson(const ClassifierOutput& out) {
  Json probs = Json::object();
  for (Label l : kAllLabels) probs[std::string(LabelName(l))] = out.prob(l);
  return Json{{"label", LabelName(out.label)}, {"probs", probs}};
}

ClassifierOutput OutputFromJson(const Json& j) {
  ClassifierOutput out;
  for (Label l : kAllLabels) {
    out.probs[LabelIndex(l)] = j.at("probs").at(std::string(LabelName(l))).get<double>();
  }
  const auto label = ParseLabel(j.at("label").get<std::string>());
  if (!label) throw ParseError("unknown label in record");
  out.label = *label;
  return out;
}

namespace {

Json OptionalString(const std::optional<std::string>& s) {
  return s ? Json(*s) : Json(nullptr);
}

std::optional<std::string> OptionalFromJson(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

}  // namespace

Json RecordToJson(const AttackRecord& rec) {
  Json subs = Json::array();
  for (const auto& s : rec.substitutions) {
    subs.push_back(
        {{"position", s.position}, {"original", s.original}, {"replacement", s.replacement}});
  }
  Json j = {{"example_id", rec.example_id},
            {"status", StatusName(rec.status)},
            {"original_text", rec.original_text},
            {"perturbed_text", rec.perturbed_text},
            {"substitutions", subs},
            {"queries", rec.queries},
            {"sentence_similarity", rec.sentence_similarity},
            {"orig_output", OutputToJson(rec.orig_output)},
            {"final_output", OutputToJson(rec.final_output)},
            {"orig_explanation", OptionalString(rec.orig_explanation)},
            {"final_explanation", OptionalString(rec.final_explanation)}};
  if (rec.error) j["error"] = *rec.error;
  return j;
}

AttackRecord RecordFromJson(const Json& j) {
  AttackRecord rec;
  try {
    rec.example_id = j.at("example_id").get<std::string>();
    const auto status = ParseStatus(j.at("status").get<std::string>());
    if (!status) throw ParseError("unknown status in record");
    rec.status = *status;
    rec.original_text = j.at("original_text").get<std::string>();
    rec.perturbed_text = j.at("perturbed_text").get<std::string>();
    for (const auto& s : j.at("substitutions")) {
      rec.substitutions.push_back({s.at("position").get<std::size_t>(),
                                   s.at("original").get<std::string>(),
                                   s.at("replacement").get<std::string>()});
    }
    rec.queries = j.at("queries").get<std::uint64_t>();
    rec.sentence_similarity = j.at("sentence_similarity").get<double>();
    rec.orig_output = OutputFromJson(j.at("orig_output"));
    rec.final_output = OutputFromJson(j.at("final_output"));
    rec.orig_explanation = OptionalFromJson(j, "orig_explanation");
    rec.final_explanation = OptionalFromJson(j, "final_explanation");
    rec.error = OptionalFromJson(j, "error");
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed attack record: ") + e.what());
  }
  return rec;
}

std::vector<AttackRecord> ReadRecordsJsonl(const std::string& path) {
  std::vector<AttackRecord> records;
  std::istringstream in(ReadFile(path));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      records.push_back(RecordFromJson(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw ParseError(path + ": line " + std::to_string(n) + ": " + e.what());
    }
  }
  return records;
}

Json SummaryToJson(const RunSummary& s, const std::string& timestamp) {
  return Json{{"total", s.total},
              {"attempted", s.attempted},
              {"skipped", s.skipped},
              {"errored", s.errored},
              {"successes", s.successes},
              {"original_accuracy", s.original_accuracy},
              {"after_attack_accuracy", s.after_attack_accuracy},
              {"attack_success_rate", s.attack_success_rate},
              {"avg_queries_all", s.avg_queries_all},
              {"avg_queries_attempted", s.avg_queries_attempted},
              {"timestamp", timestamp},
              {"config", s.config}};
}

RunSummary SummaryFromJson(const Json& j) {
  RunSummary s;
  try {
    s.total = j.value("total", std::uint64_t{0});
    s.attempted = j.value("attempted", std::uint64_t{0});
    s.skipped = j.value("skipped", std::uint64_t{0});
    s.errored = j.value("errored", std::uint64_t{0});
    s.successes = j.value("successes", std::uint64_t{0});
    s.original_accuracy = j.at("original_accuracy").get<double>();
    s.after_attack_accuracy = j.at("after_attack_accuracy").get<double>();
    s.attack_success_rate = j.at("attack_success_rate").get<double>();
    s.avg_queries_all = j.value("avg_queries_all", 0.0);
    s.avg_queries_attempted = j.value("avg_queries_attempted", 0.0);
    if (j.contains("config")) s.config = j.at("config");
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed summary: ") + e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Victims

namespace {

std::shared_ptr<const LexicalRules> MakeRules(const VictimResources& r) {
  return std::make_shared<LexicalRules>(r.embeddings, r.stopwords, r.word_sim_floor);
}

bool StartsWith(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

}  // namespace

BuiltVictim BuildVictim(const std::string& spec, const VictimResources& resources) {
  if (spec == "rule") {
    return {std::make_shared<RulePairClassifier>(MakeRules(resources)), false};
  }
  if (StartsWith(spec, "linear:")) {
    if (!resources.embeddings) throw UsageError("linear victim needs an embedding table");
    return {std::make_shared<LinearPairClassifier>(LoadLinearModel(spec.substr(7)),
                                                   resources.embeddings),
            false};
  }
  if (StartsWith(spec, "remote:")) {
    return {std::make_shared<RemotePairClassifier>(spec.substr(7), resources.remote), false};
  }
  if (StartsWith(spec, "pipeline:")) {
    const std::string rest = spec.substr(9);
    const auto comma = rest.find(',');
    if (comma == std::string::npos) {
      throw UsageError("pipeline victim spec must be pipeline:<explainer>,<expl2label>");
    }
    const std::string e_spec = rest.substr(0, comma);
    const std::string c_spec = rest.substr(comma + 1);
    std::shared_ptr<const Explainer> explainer;
    if (e_spec == "template") {
      explainer = std::make_shared<TemplateExplainer>(MakeRules(resources));
    } else if (StartsWith(e_spec, "constant:")) {
      if (e_spec.size() == 9) throw UsageError("constant explainer needs non-empty text");
      explainer = std::make_shared<ConstantExplainer>(e_spec.substr(9));
    } else if (StartsWith(e_spec, "remote:")) {
      explainer = std::make_shared<RemoteExplainer>(e_spec.substr(7), resources.remote);
    } else {
      throw UsageError("unknown explainer spec '" + e_spec + "'");
    }
    std::shared_ptr<const ExplanationClassifier> clf;
    if (c_spec == "keyword") {
      clf = std::make_shared<KeywordExplanationClassifier>();
    } else if (StartsWith(c_spec, "remote:")) {
      clf = std::make_shared<RemoteExplanationClassifier>(c_spec.substr(7), resources.remote);
    } else {
      throw UsageError("unknown expl2label spec '" + c_spec + "'");
    }
    return {std::make_shared<ExplainThenPredictClassifier>(explainer, clf), true};
  }
  throw UsageError("unknown victim spec '" + spec +
                   "' (expected rule | linear:<path> | pipeline:<e>,<c> | remote:<url>)");
}

// ---------------------------------------------------------------------------
// Campaigns

std::string CurrentTimestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

CampaignResult RunCampaign(std::span<const NliExample> dataset, const BuiltVictim& victim,
                           const AttackConfig& config, const AttackResources& resources,
                           const CampaignOptions& options) {
  config.Validate();
  if (!victim.classifier) throw UsageError("no victim");
  std::shared_ptr<const PairClassifier> clf = victim.classifier;
  if (!clf->concurrent()) clf = std::make_shared<SerializedClassifier>(clf);

  std::filesystem::path dir(options.output_dir.empty() ? "." : options.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());

  CampaignResult result;
  result.records.resize(dataset.size());
  const int workers =
      std::max(1, std::min<int>(options.workers, static_cast<int>(std::max<std::size_t>(dataset.size(), 1))));

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex log_mu;
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto work = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= dataset.size()) return;
      {
        std::lock_guard lock(failure_mu);
        if (failure) return;
      }
      try {
        result.records[i] = victim.is_pipeline
                                ? AttackExplainThenPredict(dataset[i], *clf, config, resources)
                                : GreedyAttack(dataset[i], *clf, config, resources);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        return;
      }
      const std::size_t n = done.fetch_add(1) + 1;
      if (options.log && (n % 100 == 0 || n == dataset.size())) {
        std::lock_guard lock(log_mu);
        options.log("attacked " + std::to_string(n) + "/" + std::to_string(dataset.size()) +
                    " examples");
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w) threads.emplace_back(work);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::string jsonl;
  for (const auto& rec : result.records) {
    jsonl += RecordToJson(rec).dump();
    jsonl += '\n';
  }
  result.records_path = (dir / "records.jsonl").string();
  WriteFile(result.records_path, jsonl);

  result.summary = Aggregate(result.records);
  result.summary.config = options.config_echo;
  result.summary_path = (dir / "summary.json").string();
  const std::string ts = options.timestamp.empty() ? CurrentTimestamp() : options.timestamp;
  WriteFile(result.summary_path, SummaryToJson(result.summary, ts).dump(2) + "\n");
  return result;
}

// ---------------------------------------------------------------------------
// Explanation scoring

std::map<std::string, std::string> ParseGeneratedExplanations(std::string_view csv_text) {
  const auto rows = ParseCsv(csv_text);
  std::map<std::string, std::string> out;
  if (rows.empty()) return out;
  std::optional<std::size_t> id_col, expl_col;
  for (std::size_t c = 0; c < rows[0].size(); ++c) {
    if (rows[0][c] == "id") id_col = c;
    if (rows[0][c] == "explanation") expl_col = c;
  }
  if (!id_col || !expl_col) {
    throw ParseError("generated explanations: header must contain 'id' and 'explanation'");
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) {
      throw ParseError("generated explanations: row " + std::to_string(r) +
                       ": wrong column count");
    }
    if (!out.emplace(rows[r][*id_col], rows[r][*expl_col]).second) {
      throw ValidationError("generated explanations: duplicate id '" + rows[r][*id_col] + "'");
    }
  }
  return out;
}

ExplanationScores ScoreExplanationFile(const std::map<std::string, std::string>& generated,
                                       std::span<const NliExample> dataset,
                                       const TokenEmbedder& embedder) {
  std::vector<std::string> missing, unknown;
  std::set<std::string> dataset_ids;
  for (const auto& ex : dataset) {
    dataset_ids.insert(ex.id);
    if (generated.count(ex.id) == 0) missing.push_back(ex.id);
  }
  for (const auto& [id, text] : generated) {
    if (dataset_ids.count(id) == 0) unknown.push_back(id);
  }
  if (!missing.empty() || !unknown.empty()) {
    std::string msg = "explanation ids do not match the dataset";
    auto list = [](const std::vector<std::string>& ids) {
      std::string s;
      for (const auto& id : ids) s += (s.empty() ? "" : ", ") + id;
      return s;
    };
    if (!missing.empty()) msg += "; missing: " + list(missing);
    if (!unknown.empty()) msg += "; not in dataset: " + list(unknown);
    std::vector<std::string> all = missing;
    all.insert(all.end(), unknown.begin(), unknown.end());
    throw IdMismatchError(msg, all);
  }

  ExplanationScores scores;
  scores.metrics = {{"bleu", {}, 0.0}, {"rouge", {}, 0.0}, {"meteor", {}, 0.0},
                    {"bert-score", {}, 0.0}};
  for (const auto& ex : dataset) {
    scores.ids.push_back(ex.id);
    const auto cand = Tokenize(generated.at(ex.id));
    std::vector<Tokens> refs;
    for (const auto& r : ex.reference_explanations) refs.push_back(Tokenize(r));
    scores.metrics[0].per_sample.push_back(Bleu(cand, refs));
    scores.metrics[1].per_sample.push_back(RougeL(cand, refs));
    scores.metrics[2].per_sample.push_back(Meteor(cand, refs));
    scores.metrics[3].per_sample.push_back(BertScore(cand, refs, embedder).f1);
  }
  for (auto& m : scores.metrics) {
    double sum = 0.0;
    for (double v : m.per_sample) sum += v;
    m.corpus = m.per_sample.empty() ? 0.0 : sum / static_cast<double>(m.per_sample.size());
  }
  return scores;
}

namespace {

std::string FullPrecision(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string Fixed2(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::string ScoresToCsv(const ExplanationScores& scores) {
  std::string out = "metric,example_id,value\n";
  for (const auto& m : scores.metrics) {
    for (std::size_t i = 0; i < scores.ids.size(); ++i) {
      out += m.metric + "," + CsvEscape(scores.ids[i]) + "," + FullPrecision(m.per_sample[i]) +
             "\n";
    }
  }
  return out;
}

Json ScoresToJson(const ExplanationScores& scores) {
  Json j = Json::object();
  for (const char* name : {"meteor", "bert-score", "rouge", "bleu"}) {
    for (const auto& m : scores.metrics) {
      if (m.metric == name) j[name] = m.corpus;
    }
  }
  j["examples"] = scores.ids.size();
  j["% correct explanations"] = nullptr;
  j["notes"] = {
      {"rouge", "ROUGE-L F1, maximum over references"},
      {"bleu", "mean of add-one smoothed sentence BLEU-4, references clipped jointly"},
      {"meteor", "exact and Porter-stem stages only, maximum over references"},
      {"bert-score", "greedy static-embedding matching F1, no baseline rescaling"},
      {"% correct explanations", "manual annotation; fill in by hand"}};
  return j;
}

// ---------------------------------------------------------------------------
// Reports

double PctDecrease(double baseline_asr, double variant_asr) {
  if (baseline_asr == 0.0) throw UsageError("percentage decrease undefined for a zero baseline");
  return 100.0 * (baseline_asr - variant_asr) / baseline_asr;
}

Report RenderReport(std::span<const LabeledSummary> summaries,
                    const std::optional<std::string>& baseline) {
  if (summaries.empty()) throw UsageError("report needs at least one summary");
  std::set<std::string> labels;
  for (const auto& s : summaries) {
    if (!labels.insert(s.label).second) throw UsageError("duplicate label '" + s.label + "'");
  }
  std::optional<std::size_t> base;
  if (baseline) {
    for (std::size_t i = 0; i < summaries.size(); ++i) {
      if (summaries[i].label == *baseline) base = i;
    }
    if (!base) throw UsageError("baseline label '" + *baseline + "' not among the summaries");
  } else if (summaries.size() >= 2) {
    base = 0;
  }

  struct Row {
    const char* title;
    const char* key;
    bool percent;
    double (*get)(const RunSummary&);
  };
  const Row rows[] = {
      {"Original accuracy (\xE2\x86\x91)", "original_accuracy", true,
       [](const RunSummary& s) { return s.original_accuracy; }},
      {"After-attack accuracy (\xE2\x86\x91)", "after_attack_accuracy", true,
       [](const RunSummary& s) { return s.after_attack_accuracy; }},
      {"Attack success rate (\xE2\x86\x93)", "attack_success_rate", true,
       [](const RunSummary& s) { return s.attack_success_rate; }},
      {"Avg num queries (\xE2\x86\x91)", "avg_queries_attempted", false,
       [](const RunSummary& s) { return s.avg_queries_attempted; }},
      {"Avg num queries, all inputs (\xE2\x86\x91)", "avg_queries_all", false,
       [](const RunSummary& s) { return s.avg_queries_all; }},
      {"Orig. accuracy \xC3\x97 (1 \xE2\x88\x92 ASR)", "after_attack_identity", true,
       [](const RunSummary& s) { return IdentityAfterAttack(s); }},
  };

  std::ostringstream md;
  std::string csv = "row_metric,variant_label,value\n";
  md << "| Metric |";
  for (const auto& s : summaries) md << ' ' << s.label << " |";
  md << "\n|---|";
  for (std::size_t i = 0; i < summaries.size(); ++i) md << "---:|";
  md << '\n';
  for (const auto& row : rows) {
    md << "| " << row.title << " |";
    for (const auto& s : summaries) {
      const double v = row.get(s.summary);
      md << ' ' << (row.percent ? Fixed2(100.0 * v) + "%" : Fixed2(v)) << " |";
      csv += std::string(row.key) + "," + CsvEscape(s.label) + "," + FullPrecision(v) + "\n";
    }
    md << '\n';
  }

  // Summaries imported from elsewhere may not satisfy the identity.
  for (const auto& s : summaries) {
    const double gap_pp =
        100.0 * (IdentityAfterAttack(s.summary) - s.summary.after_attack_accuracy);
    if (std::abs(gap_pp) >= 0.005) {
      md << "\nNote: " << s.label << " after-attack accuracy "
         << Fixed2(100.0 * s.summary.after_attack_accuracy)
         << "% differs from original accuracy \xC3\x97 (1 \xE2\x88\x92 ASR) = "
         << Fixed2(100.0 * IdentityAfterAttack(s.summary)) << "% by "
         << Fixed2(std::abs(gap_pp)) << " pp.\n";
    }
  }

  if (base) {
    const auto& b = summaries[*base];
    md << "\n% attack success rate decrease vs " << b.label << "\n\n";
    md << "| Variant | ASR decrease (%) |\n|---|---:|\n";
    for (std::size_t i = 0; i < summaries.size(); ++i) {
      if (i == *base) continue;
      const auto& s = summaries[i];
      if (b.summary.attack_success_rate == 0.0) {
        md << "| " << s.label << " | n/a |\n";
        continue;
      }
      const double d = PctDecrease(b.summary.attack_success_rate, s.summary.attack_success_rate);
      md << "| " << s.label << " | " << Fixed2(d) << " |\n";
      csv += "asr_pct_decrease," + CsvEscape(s.label) + "," + FullPrecision(d) + "\n";
    }
  }
  return {md.str(), csv};
}

}  // namespace explattack
