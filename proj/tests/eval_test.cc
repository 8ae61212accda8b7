#include <gtest/gtest.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "explattack/errors.h"
#include "explattack/eval.h"
#include "metric_goldens.h"
#include "toy_world.h"

namespace explattack {
namespace {

namespace fs = std::filesystem;

AttackRecord Rec(AttackStatus status, std::uint64_t queries) {
  AttackRecord r;
  r.status = status;
  r.queries = queries;
  return r;
}

std::string Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            ("explattack_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

TEST(Aggregate, CountsAndRates) {
  std::vector<AttackRecord> recs;
  for (int i = 0; i < 600; ++i) recs.push_back(Rec(AttackStatus::kSuccess, 10));
  for (int i = 0; i < 200; ++i) recs.push_back(Rec(AttackStatus::kFailed, 10));
  for (int i = 0; i < 200; ++i) recs.push_back(Rec(AttackStatus::kSkipped, 1));
  const auto s = Aggregate(recs);
  EXPECT_EQ(s.total, 1000u);
  EXPECT_EQ(s.attempted, 800u);
  EXPECT_EQ(s.successes, 600u);
  EXPECT_DOUBLE_EQ(s.attack_success_rate, 0.75);
  EXPECT_DOUBLE_EQ(s.original_accuracy, 0.80);
  EXPECT_DOUBLE_EQ(s.after_attack_accuracy, 0.20);
  EXPECT_NEAR(IdentityAfterAttack(s), s.after_attack_accuracy, 1e-12);
}

TEST(Aggregate, QueryAverages) {
  const std::vector<AttackRecord> recs = {
      Rec(AttackStatus::kSuccess, 10), Rec(AttackStatus::kFailed, 20),
      Rec(AttackStatus::kSuccess, 30), Rec(AttackStatus::kSkipped, 1),
      Rec(AttackStatus::kErrored, 99)};
  const auto s = Aggregate(recs);
  EXPECT_DOUBLE_EQ(s.avg_queries_attempted, 20.0);
  EXPECT_DOUBLE_EQ(s.avg_queries_all, 61.0 / 4.0);
  EXPECT_EQ(s.errored, 1u);
  EXPECT_EQ(s.attempted + s.skipped + s.errored, s.total);
}

TEST(Aggregate, EmptyAndAllSkipped) {
  const auto empty = Aggregate({});
  EXPECT_EQ(empty, RunSummary{});
  const std::vector<AttackRecord> skipped(5, Rec(AttackStatus::kSkipped, 1));
  const auto s = Aggregate(skipped);
  EXPECT_EQ(s.attempted, 0u);
  EXPECT_EQ(s.attack_success_rate, 0.0);
  EXPECT_EQ(s.after_attack_accuracy, 0.0);
}

TEST(Aggregate, IdentityHoldsOnRandomRecordSets) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<AttackRecord> recs(rng() % 50);
    for (auto& r : recs) r = Rec(static_cast<AttackStatus>(rng() % 4), rng() % 100);
    const auto s = Aggregate(recs);
    EXPECT_EQ(s.attempted + s.skipped + s.errored, s.total);
    EXPECT_NEAR(IdentityAfterAttack(s), s.after_attack_accuracy, 1e-12);
  }
}

TEST(Json, RecordRoundTrip) {
  AttackRecord r;
  r.example_id = "x1";
  r.status = AttackStatus::kSuccess;
  r.original_text = "a dog runs";
  r.perturbed_text = "a puppy runs";
  r.substitutions = {{1, "dog", "puppy"}};
  r.queries = 7;
  r.sentence_similarity = 0.91234567890123;
  r.orig_output = ConfidentOutput(Label::kEntailment);
  r.final_output = ConfidentOutput(Label::kNeutral);
  r.orig_explanation = "a dog is a dog";
  r.final_explanation = "not necessarily";
  EXPECT_EQ(RecordFromJson(RecordToJson(r)), r);
  const auto j = RecordToJson(r);
  EXPECT_EQ(j["status"], "success");
  EXPECT_EQ(j["orig_output"]["label"], "entailment");
  EXPECT_FALSE(j.contains("error"));

  AttackRecord e = Rec(AttackStatus::kErrored, 2);
  e.error = "boom";
  EXPECT_EQ(RecordFromJson(RecordToJson(e)), e);
  EXPECT_TRUE(RecordToJson(e)["orig_explanation"].is_null());
  EXPECT_THROW(RecordFromJson(Json::parse(R"({"example_id": 3})")), ParseError);
}

TEST(Json, SummaryRoundTrip) {
  std::vector<AttackRecord> recs = {Rec(AttackStatus::kSuccess, 4), Rec(AttackStatus::kFailed, 9),
                                    Rec(AttackStatus::kSkipped, 1)};
  auto s = Aggregate(recs);
  s.config = {{"delta", "0.7"}};
  const auto j = SummaryToJson(s, "2020-01-01T00:00:00Z");
  EXPECT_EQ(j["timestamp"], "2020-01-01T00:00:00Z");
  EXPECT_EQ(SummaryFromJson(j), s);
}

// ---------------------------------------------------------------------------
// Campaigns

struct CampaignSetup {
  testing::ToyWorld world = testing::LoadToyWorld();
  BuiltVictim victim{world.rule_victim, false};
};

CampaignResult RunToy(const CampaignSetup& setup, std::span<const NliExample> data,
                   const std::string& dir, int workers, AttackConfig config = {}) {
  CampaignOptions opt;
  opt.output_dir = dir;
  opt.workers = workers;
  opt.timestamp = "2000-01-01T00:00:00Z";
  return RunCampaign(data, setup.victim, config, setup.world.resources, opt);
}

TEST(RunCampaign, EmptyDataset) {
  TempDir tmp;
  CampaignSetup setup;
  const auto r = RunToy(setup, {}, tmp / "run", 1);
  EXPECT_EQ(r.summary.total, 0u);
  EXPECT_EQ(r.summary.attack_success_rate, 0.0);
  EXPECT_EQ(Slurp(r.records_path), "");
}

TEST(RunCampaign, MisclassifiesEverything) {
  TempDir tmp;
  CampaignSetup setup;
  auto data = testing::RandomToyCorpus(20, 3);
  // Negated hypotheses labelled entailment are always wrong for the rule victim.
  for (auto& ex : data) {
    ex.hypothesis = "A dog is not running.";
    ex.gold_label = Label::kEntailment;
  }
  const auto r = RunToy(setup, data, tmp / "run", 2);
  EXPECT_EQ(r.summary.attempted, 0u);
  EXPECT_EQ(r.summary.skipped, 20u);
  EXPECT_EQ(r.summary.attack_success_rate, 0.0);
  EXPECT_EQ(r.summary.after_attack_accuracy, 0.0);
}

TEST(RunCampaign, ByteIdenticalAcrossWorkerCounts) {
  TempDir tmp;
  CampaignSetup setup;
  const auto data = testing::RandomToyCorpus(100, 11);
  const auto a = RunToy(setup, data, tmp / "a", 1);
  const auto b = RunToy(setup, data, tmp / "b", 4);
  const auto c = RunToy(setup, data, tmp / "c", 4);
  EXPECT_EQ(Slurp(a.records_path), Slurp(b.records_path));
  EXPECT_EQ(Slurp(b.records_path), Slurp(c.records_path));
  EXPECT_EQ(Slurp(a.summary_path), Slurp(b.summary_path));
  EXPECT_EQ(Slurp(b.summary_path), Slurp(c.summary_path));
}

TEST(RunCampaign, PersistedSummaryMatchesRecords) {
  TempDir tmp;
  CampaignSetup setup;
  const auto data = testing::RandomToyCorpus(100, 12);
  const auto r = RunToy(setup, data, tmp / "run", 3);
  const auto recs = ReadRecordsJsonl(r.records_path);
  ASSERT_EQ(recs.size(), data.size());
  for (std::size_t i = 0; i < recs.size(); ++i) EXPECT_EQ(recs[i].example_id, data[i].id);
  EXPECT_EQ(recs, r.records);
  auto recomputed = Aggregate(recs);
  const auto persisted = SummaryFromJson(Json::parse(Slurp(r.summary_path)));
  recomputed.config = persisted.config;
  EXPECT_EQ(recomputed, persisted);
  EXPECT_NEAR(IdentityAfterAttack(persisted), persisted.after_attack_accuracy, 1e-12);
  EXPECT_EQ(persisted.attempted + persisted.skipped + persisted.errored, persisted.total);
}

TEST(RunCampaign, TighterDeltaOnlyRemovesSuccesses) {
  TempDir tmp;
  CampaignSetup setup;
  const auto data = testing::RandomToyCorpus(100, 13);
  AttackConfig tight;
  tight.sentence_sim_threshold = 0.75;
  const auto loose = RunToy(setup, data, tmp / "loose", 2);
  const auto strict = RunToy(setup, data, tmp / "strict", 2, tight);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (strict.records[i].status == AttackStatus::kSuccess) {
      EXPECT_EQ(loose.records[i].status, AttackStatus::kSuccess) << data[i].id;
    }
  }
  EXPECT_LE(strict.summary.attack_success_rate, loose.summary.attack_success_rate);
}

TEST(RunCampaign, UnwritableOutputIsIoError) {
  TempDir tmp;
  CampaignSetup setup;
  std::ofstream(tmp / "file") << "x";
  const auto data = testing::RandomToyCorpus(2, 1);
  EXPECT_THROW(RunToy(setup, data, tmp / "file", 1), IoError);
}

// ---------------------------------------------------------------------------
// Victim specs

TEST(BuildVictim, Specs) {
  const auto world = testing::LoadToyWorld();
  VictimResources res;
  res.embeddings = world.table;
  res.stopwords = world.stopwords;
  EXPECT_FALSE(BuildVictim("rule", res).is_pipeline);
  EXPECT_TRUE(BuildVictim("pipeline:template,keyword", res).is_pipeline);
  const auto constant = BuildVictim("pipeline:constant:a dog is not a cat,keyword", res);
  const auto probe = constant.classifier->ProbePair("x", "y");
  EXPECT_EQ(probe.explanation, "a dog is not a cat");
  EXPECT_EQ(probe.output.label, Label::kContradiction);
  EXPECT_THROW(BuildVictim("bogus", res), UsageError);
  EXPECT_THROW(BuildVictim("pipeline:template", res), UsageError);
  EXPECT_THROW(BuildVictim("pipeline:constant:,keyword", res), UsageError);
  EXPECT_THROW(BuildVictim("linear:/nonexistent/model.txt", res), Error);
}

// ---------------------------------------------------------------------------
// Explanation scoring

TEST(ScoreExplanations, CorpusIsMeanOfGoldenSamples) {
  // Five single-reference examples whose metric values are known goldens.
  const auto bleu = testing::BleuGoldens();
  std::vector<NliExample> data;
  std::map<std::string, std::string> generated;
  const testing::MetricGolden picks[] = {bleu[0], bleu[1], bleu[4], bleu[6], bleu[10]};
  double bleu_sum = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    NliExample ex;
    ex.id = "g" + std::to_string(i);
    ex.reference_explanations = picks[i].references;
    data.push_back(ex);
    generated[ex.id] = picks[i].candidate;
    bleu_sum += picks[i].expected;
  }
  const auto table = ParseEmbeddings(testing::kBertScoreTable);
  StaticTokenEmbedder embedder(table);
  const auto scores = ScoreExplanationFile(generated, data, embedder);
  ASSERT_EQ(scores.metrics.size(), 4u);
  EXPECT_EQ(scores.metrics[0].metric, "bleu");
  EXPECT_NEAR(scores.metrics[0].corpus, bleu_sum / 5, 1e-4);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_NEAR(scores.metrics[0].per_sample[i], picks[i].expected, 1e-4);
  }
}

TEST(ScoreExplanations, FirstReferenceGivesPerfectRouge) {
  const auto data = LoadEsnli(testing::DataPath("toy_esnli.csv"));
  std::map<std::string, std::string> generated;
  for (const auto& ex : data) generated[ex.id] = ex.reference_explanations.front();
  const auto table = testing::LoadToyWorld().table;
  StaticTokenEmbedder embedder(*table);
  const auto scores = ScoreExplanationFile(generated, data, embedder);
  EXPECT_DOUBLE_EQ(scores.metrics[1].corpus, 1.0);
  const auto j = ScoresToJson(scores);
  EXPECT_DOUBLE_EQ(j["rouge"].get<double>(), 1.0);
  EXPECT_TRUE(j["% correct explanations"].is_null());
  const auto csv = ScoresToCsv(scores);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "metric,example_id,value");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 4 * 10);
}

TEST(ScoreExplanations, IdMismatchListsIds) {
  const auto data = LoadEsnli(testing::DataPath("toy_esnli.csv"));
  const auto table = testing::LoadToyWorld().table;
  StaticTokenEmbedder embedder(*table);
  try {
    ScoreExplanationFile({}, data, embedder);
    FAIL();
  } catch (const IdMismatchError& e) {
    EXPECT_EQ(e.ids().size(), 10u);
    EXPECT_NE(std::string(e.what()).find("missing: t0, t1"), std::string::npos);
  }
  std::map<std::string, std::string> generated;
  for (const auto& ex : data) generated[ex.id] = "x";
  generated["zz"] = "y";
  try {
    ScoreExplanationFile(generated, data, embedder);
    FAIL();
  } catch (const IdMismatchError& e) {
    EXPECT_EQ(e.ids(), std::vector<std::string>{"zz"});
  }
}

TEST(ScoreExplanations, ParseGenerated) {
  const auto m = ParseGeneratedExplanations("id,explanation\na,\"x, y\"\nb,z\n");
  EXPECT_EQ(m.at("a"), "x, y");
  EXPECT_EQ(m.size(), 2u);
  EXPECT_THROW(ParseGeneratedExplanations("key,text\na,b\n"), ParseError);
  EXPECT_THROW(ParseGeneratedExplanations("id,explanation\na,b\na,c\n"), ValidationError);
}

// ---------------------------------------------------------------------------
// Reports

RunSummary FromRates(double orig, double asr, double after) {
  RunSummary s;
  s.original_accuracy = orig;
  s.attack_success_rate = asr;
  s.after_attack_accuracy = after;
  return s;
}

TEST(PctDecrease, Values) {
  EXPECT_NEAR(PctDecrease(72.16, 67.33), 6.69, 0.01);
  EXPECT_NEAR(PctDecrease(89.77, 81.68), 9.01, 0.01);
  EXPECT_EQ(PctDecrease(0.5, 0.5), 0.0);
  EXPECT_THROW(PctDecrease(0.0, 0.1), UsageError);
}

TEST(RenderReport, SingleSummaryHasNoDecreaseTable) {
  const std::vector<LabeledSummary> s = {{"only", FromRates(0.8, 0.5, 0.4)}};
  const auto r = RenderReport(s);
  EXPECT_NE(r.markdown.find("| Metric | only |"), std::string::npos);
  EXPECT_NE(r.markdown.find("|---|---:|"), std::string::npos);
  EXPECT_NE(r.markdown.find("| 80.00% |"), std::string::npos);
  EXPECT_EQ(r.markdown.find("decrease"), std::string::npos);
  EXPECT_EQ(r.csv.find("asr_pct_decrease"), std::string::npos);
}

TEST(RenderReport, TableRowsAreWellFormed) {
  const std::vector<LabeledSummary> s = {{"a", FromRates(0.8, 0.5, 0.4)},
                                         {"b", FromRates(0.9, 0.25, 0.675)}};
  const auto r = RenderReport(s);
  std::istringstream in(r.markdown);
  std::string line;
  std::getline(in, line);
  const auto pipes = std::count(line.begin(), line.end(), '|');
  while (std::getline(in, line) && !line.empty()) {
    EXPECT_EQ(std::count(line.begin(), line.end(), '|'), pipes) << line;
  }
}

TEST(RenderReport, DecreaseMatchesDirectCall) {
  const std::vector<LabeledSummary> s = {{"baseline", FromRates(0.9, 0.7216, 0.9 * 0.2784)},
                                         {"pipeline", FromRates(0.9, 0.6733, 0.9 * 0.3267)}};
  const auto r = RenderReport(s);
  EXPECT_NE(r.markdown.find("| pipeline | 6.69 |"), std::string::npos) << r.markdown;
  std::ostringstream expected;
  expected.precision(17);
  expected << "asr_pct_decrease,pipeline," << PctDecrease(0.7216, 0.6733) << "\n";
  EXPECT_NE(r.csv.find(expected.str()), std::string::npos) << r.csv;
  const auto explicit_base = RenderReport(s, std::string("pipeline"));
  EXPECT_NE(explicit_base.markdown.find("| baseline |"), std::string::npos);
}

TEST(RenderReport, ImportedSummaryGapNote) {
  const std::vector<LabeledSummary> s = {{"Baseline", FromRates(0.9013, 0.7216, 0.2493)}};
  const auto r = RenderReport(s);
  EXPECT_NE(r.markdown.find("| 24.93% |"), std::string::npos);
  EXPECT_NE(r.markdown.find("| 25.09% |"), std::string::npos);
  EXPECT_NE(r.markdown.find("by 0.16 pp"), std::string::npos) << r.markdown;
}

TEST(RenderReport, Errors) {
  EXPECT_THROW(RenderReport({}), UsageError);
  const std::vector<LabeledSummary> dup = {{"x", {}}, {"x", {}}};
  EXPECT_THROW(RenderReport(dup), UsageError);
  const std::vector<LabeledSummary> one = {{"x", {}}};
  EXPECT_THROW(RenderReport(one, std::string("y")), UsageError);
}

}  // namespace
}  // namespace explattack
