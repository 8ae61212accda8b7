#include "explattack/workflows.h"

#include <cstdlib>
#include <ctime>
#include <filesystem>

#include "explattack/errors.h"

namespace explattack {
namespace {

bool StartsWith(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

std::shared_ptr<const EmbeddingTable> OptionalEmbeddings(const Config& config) {
  if (config.Get("embeddings").empty()) return nullptr;
  return std::make_shared<EmbeddingTable>(
      LoadEmbeddings(RequireExistingPath(config, "embeddings")));
}

std::vector<NliExample> LoadDataset(const Config& config) {
  return LoadEsnli(RequireExistingPath(config, "dataset"), ToColumnMap(config));
}

}  // namespace

std::string ResolveTimestamp(const Config& config) {
  if (auto ts = config.Get("timestamp"); !ts.empty()) return ts;
  const char* epoch = std::getenv("SOURCE_DATE_EPOCH");
  if (epoch == nullptr || *epoch == '\0') return "";
  char* end = nullptr;
  const long long secs = std::strtoll(epoch, &end, 10);
  if (*end != '\0' || secs < 0) throw UsageError("SOURCE_DATE_EPOCH must be a non-negative integer");
  const std::time_t t = static_cast<std::time_t>(secs);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

CampaignResult AttackWorkflow(const Config& config, const LogFn& log) {
  const AttackConfig attack = ToAttackConfig(config);
  const RemoteOptions remote = ToRemoteOptions(config);
  const long long workers = config.GetInt("workers");
  if (workers < 1 || workers > 1024) throw UsageError("workers must be in [1, 1024]");
  const std::string victim_spec = config.Get("victim");
  if (StartsWith(victim_spec, "linear:")) {
    const std::string model = victim_spec.substr(7);
    if (!std::filesystem::exists(model)) {
      throw UsageError("victim: model file '" + model + "' does not exist");
    }
  }
  const std::string encoder_spec = config.Get("encoder");
  const std::string mlm_spec = config.Get("mlm-provider");
  if (encoder_spec != "mean-embedding" && !StartsWith(encoder_spec, "remote:")) {
    throw UsageError("encoder must be mean-embedding or remote:<url>");
  }
  if (mlm_spec != "embedding" && !StartsWith(mlm_spec, "remote:")) {
    throw UsageError("mlm-provider must be embedding or remote:<url>");
  }
  const bool needs_table =
      encoder_spec == "mean-embedding" || attack.recipe == Recipe::kTextFoolerStyle ||
      (attack.recipe == Recipe::kBertAttackStyle && mlm_spec == "embedding") ||
      StartsWith(victim_spec, "linear:");
  if (needs_table && config.Get("embeddings").empty()) {
    throw UsageError("--embeddings is required for this recipe, encoder or victim");
  }
  const auto dataset = LoadDataset(config);

  AttackResources resources;
  resources.embeddings = OptionalEmbeddings(config);
  if (!config.Get("stopwords").empty()) {
    resources.stopwords = LoadWordList(RequireExistingPath(config, "stopwords"));
  }
  if (!config.Get("pos-lexicon").empty()) {
    resources.pos_lexicon = LoadPosLexicon(RequireExistingPath(config, "pos-lexicon"));
  }
  if (encoder_spec == "mean-embedding") {
    resources.encoder = std::make_shared<MeanEmbeddingEncoder>(resources.embeddings);
  } else {
    resources.encoder = std::make_shared<RemoteSentenceEncoder>(encoder_spec.substr(7), remote);
  }
  if (attack.recipe == Recipe::kBertAttackStyle) {
    if (mlm_spec == "embedding") {
      resources.mlm_provider =
          std::make_shared<EmbeddingNeighborProvider>(resources.embeddings, attack.word_sim_floor);
    } else {
      resources.mlm_provider = std::make_shared<RemoteCandidateProvider>(mlm_spec.substr(7), remote);
    }
  }

  VictimResources vr;
  vr.embeddings = resources.embeddings;
  vr.stopwords = resources.stopwords;
  vr.word_sim_floor = attack.word_sim_floor;
  vr.remote = remote;
  const BuiltVictim victim = BuildVictim(victim_spec, vr);

  CampaignOptions options;
  options.output_dir = config.Get("output-dir");
  options.workers = static_cast<int>(workers);
  options.timestamp = ResolveTimestamp(config);
  options.config_echo = config.Echo();
  options.log = log;
  return RunCampaign(dataset, victim, attack, resources, options);
}

Json TrainWorkflow(const Config& config) {
  const TrainOptions options = ToTrainOptions(config);
  const std::string embeddings_path = RequireExistingPath(config, "embeddings");
  const auto dataset = LoadDataset(config);
  const EmbeddingTable table = LoadEmbeddings(embeddings_path);
  const std::string out = config.Get("model-out");
  if (out.empty()) throw UsageError("--model-out is required");
  const TrainResult result = TrainLinear(dataset, table, options);
  SaveLinearModel(out, result.model);
  Json j = {{"model", out},
            {"examples", dataset.size()},
            {"epochs", options.epochs},
            {"final_loss", result.loss_trace.empty() ? Json(nullptr) : Json(result.loss_trace.back())},
            {"train_accuracy", result.train_accuracy},
            {"warnings", result.warnings}};
  return j;
}

Json ScoreExplanationsWorkflow(const Config& config) {
  const std::string generated_path = RequireExistingPath(config, "generated");
  const auto dataset = LoadDataset(config);
  const auto generated = ParseGeneratedExplanations(ReadFile(generated_path));
  const std::string embedder_spec = config.Get("embedder");
  std::unique_ptr<TokenEmbedder> embedder;
  EmbeddingTable table;
  if (embedder_spec == "embeddings") {
    table = LoadEmbeddings(RequireExistingPath(config, "embeddings"));
    embedder = std::make_unique<StaticTokenEmbedder>(table);
  } else if (StartsWith(embedder_spec, "remote:")) {
    embedder = std::make_unique<RemoteTokenEmbedder>(embedder_spec.substr(7), ToRemoteOptions(config));
  } else {
    throw UsageError("embedder must be embeddings or remote:<url>");
  }
  const auto scores = ScoreExplanationFile(generated, dataset, *embedder);
  const std::string prefix = config.Get("scores-out");
  Json j = ScoresToJson(scores);
  j["csv"] = prefix + ".csv";
  j["json"] = prefix + ".json";
  WriteFile(prefix + ".csv", ScoresToCsv(scores));
  WriteFile(prefix + ".json", ScoresToJson(scores).dump(2) + "\n");
  return j;
}

std::vector<std::pair<std::string, std::string>> ParseSummaryList(std::string_view list) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    auto end = list.find(',', start);
    if (end == std::string_view::npos) end = list.size();
    std::string item(list.substr(start, end - start));
    start = end + 1;
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    } else {
      const std::filesystem::path p(item);
      std::string label = p.parent_path().filename().string();
      if (label.empty() || label == "." || label == "..") label = p.stem().string();
      out.emplace_back(label, item);
    }
  }
  return out;
}

std::string ReportWorkflow(const Config& config) {
  const auto entries = ParseSummaryList(config.Get("summaries"));
  if (entries.empty()) throw UsageError("--summaries needs at least one summary file");
  std::vector<LabeledSummary> summaries;
  for (const auto& [label, path] : entries) {
    if (label.empty()) throw UsageError("empty label for summary '" + path + "'");
    if (!std::filesystem::exists(path)) {
      throw UsageError("summary file '" + path + "' does not exist");
    }
    Json j;
    try {
      j = Json::parse(ReadFile(path));
    } catch (const Json::exception& e) {
      throw ParseError(path + ": " + e.what());
    }
    summaries.push_back({label, SummaryFromJson(j)});
  }
  std::optional<std::string> baseline;
  if (auto b = config.Get("baseline"); !b.empty()) baseline = b;
  const Report report = RenderReport(summaries, baseline);
  const std::string prefix = config.Get("report-out");
  WriteFile(prefix + ".md", report.markdown);
  WriteFile(prefix + ".csv", report.csv);
  return report.markdown;
}

}  // namespace explattack
