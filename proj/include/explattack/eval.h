#ifndef EXPLATTACK_EVAL_H_
#define EXPLATTACK_EVAL_H_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "explattack/attack.h"
#include "explattack/corpus.h"
#include "explattack/nlgmetrics.h"
#include "explattack/remote.h"
#include "explattack/victim.h"
#include "json.hpp"

namespace explattack {

using Json = nlohmann::ordered_json;

// Rates are fractions in [0, 1]; reports multiply by 100.
struct RunSummary {
  std::uint64_t total = 0;
  std::uint64_t attempted = 0;  // originally correct, attack ran to completion
  std::uint64_t skipped = 0;    // originally misclassified
  std::uint64_t errored = 0;
  std::uint64_t successes = 0;
  double original_accuracy = 0.0;
  double after_attack_accuracy = 0.0;
  double attack_success_rate = 0.0;
  double avg_queries_all = 0.0;        // over non-errored records
  double avg_queries_attempted = 0.0;  // over attempted records
  Json config = Json::object();

  bool operator==(const RunSummary&) const = default;
};

RunSummary Aggregate(std::span<const AttackRecord> records);

// orig * (1 - ASR); equals after_attack_accuracy for every harness-produced
// summary.
double IdentityAfterAttack(const RunSummary& s);

Json OutputToJson(const ClassifierOutput& out);
ClassifierOutput OutputFromJson(const Json& j);
Json RecordToJson(const AttackRecord& rec);
AttackRecord RecordFromJson(const Json& j);
std::vector<AttackRecord> ReadRecordsJsonl(const std::string& path);

// RunSummary fields plus "timestamp" and "config".
Json SummaryToJson(const RunSummary& s, const std::string& timestamp);
// Accepts summaries from other sources; the identity is not enforced.
RunSummary SummaryFromJson(const Json& j);

// ---------------------------------------------------------------------------
// Victim construction

struct VictimResources {
  std::shared_ptr<const EmbeddingTable> embeddings;
  WordSet stopwords;
  double word_sim_floor = 0.7;
  RemoteOptions remote;
};

struct BuiltVictim {
  std::shared_ptr<const PairClassifier> classifier;
  bool is_pipeline = false;
};

// "rule" | "linear:<model path>" | "pipeline:<explainer>,<expl2label>" |
// "remote:<url>". Explainer specs: "template", "constant:<text>",
// "remote:<url>". Expl2Label specs: "keyword", "remote:<url>".
BuiltVictim BuildVictim(const std::string& spec, const VictimResources& resources);

// ---------------------------------------------------------------------------
// Campaigns

struct CampaignOptions {
  std::string output_dir;
  int workers = 1;
  std::string timestamp;  // empty = current UTC time
  Json config_echo = Json::object();
  std::function<void(const std::string&)> log;
};

struct CampaignResult {
  RunSummary summary;
  std::vector<AttackRecord> records;
  std::string records_path;
  std::string summary_path;
};

// Writes <output_dir>/records.jsonl (dataset order) and
// <output_dir>/summary.json. Per-example victim failures become Errored
// records; I/O failures throw.
CampaignResult RunCampaign(std::span<const NliExample> dataset, const BuiltVictim& victim,
                           const AttackConfig& config, const AttackResources& resources,
                           const CampaignOptions& options);

std::string CurrentTimestamp();

// ---------------------------------------------------------------------------
// Explanation scoring

struct MetricScore {
  std::string metric;  // "bleu" | "rouge" | "meteor" | "bert-score"
  std::vector<double> per_sample;
  double corpus = 0.0;
};

struct ExplanationScores {
  std::vector<std::string> ids;  // dataset order
  std::vector<MetricScore> metrics;
};

// CSV with header columns "id" and "explanation".
std::map<std::string, std::string> ParseGeneratedExplanations(std::string_view csv_text);

// Throws IdMismatchError listing ids present on only one side.
ExplanationScores ScoreExplanationFile(const std::map<std::string, std::string>& generated,
                                       std::span<const NliExample> dataset,
                                       const TokenEmbedder& embedder);

// Rows (metric, example_id, value).
std::string ScoresToCsv(const ExplanationScores& scores);
// {"meteor", "bert-score", "rouge", "bleu"} corpus values plus notes.
Json ScoresToJson(const ExplanationScores& scores);

// ---------------------------------------------------------------------------
// Reports

// 100 * (baseline - variant) / baseline. Throws UsageError if baseline is 0.
double PctDecrease(double baseline_asr, double variant_asr);

struct LabeledSummary {
  std::string label;
  RunSummary summary;
};

struct Report {
  std::string markdown;
  std::string csv;  // row_metric,variant_label,value
};

// Without an explicit baseline, the first summary is the baseline whenever
// there are at least two.
Report RenderReport(std::span<const LabeledSummary> summaries,
                    const std::optional<std::string>& baseline = std::nullopt);

}  // namespace explattack

#endif  // EXPLATTACK_EVAL_H_
