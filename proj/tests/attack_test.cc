#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "explattack/attack.h"
#include "explattack/errors.h"
#include "toy_world.h"

namespace explattack {
namespace {

using testing::LoadToyWorld;
using testing::ToyWorld;

constexpr const char* kSmallTable =
    "good 1 0\n"
    "great 0.9 0.1\n"
    "nice 0.8 0.2\n"
    "bad -1 0\n"
    "movie 0 1\n"
    "film 0.1 0.99\n";

class ScriptedProvider : public CandidateProvider {
 public:
  explicit ScriptedProvider(std::vector<std::string> words) : words_(std::move(words)) {}
  std::vector<std::string> Candidates(std::span<const std::string>, std::size_t,
                                      int) const override {
    return words_;
  }

 private:
  std::vector<std::string> words_;
};

class ThrowingClassifier : public PairClassifier {
 public:
  explicit ThrowingClassifier(int ok_calls) : ok_calls_(ok_calls) {}
  ClassifierOutput Classify(std::string_view, std::string_view) const override {
    if (calls_++ >= ok_calls_) throw VictimError("backend went away");
    return ConfidentOutput(Label::kEntailment);
  }

 private:
  int ok_calls_;
  mutable int calls_ = 0;
};

TEST(EmbeddingCandidates, NearestFirstAboveFloor) {
  const auto table = ParseEmbeddings(kSmallTable);
  EXPECT_EQ(EmbeddingCandidates("good", table, 50, 0.7),
            (std::vector<std::string>{"great", "nice"}));
  EXPECT_EQ(EmbeddingCandidates("good", table, 1, 0.7), (std::vector<std::string>{"great"}));
  EXPECT_TRUE(EmbeddingCandidates("unseen", table, 50, 0.7).empty());
  // Lowering the floor admits the orthogonal and opposite words, still ordered.
  const auto all = EmbeddingCandidates("good", table, 50, -1.0);
  ASSERT_EQ(all.size(), 5u);
  EXPECT_EQ(all.back(), "bad");
}

TEST(EmbeddingCandidates, MatchesBruteForceOnToyTable) {
  const auto world = LoadToyWorld();
  for (std::size_t i = 0; i < world.table->size(); ++i) {
    const std::string w = world.table->word(i);
    for (int n : {1, 3, 50}) {
      for (double floor : {0.0, 0.7, 0.95}) {
        EXPECT_EQ(EmbeddingCandidates(w, *world.table, n, floor),
                  testing::OracleNeighbors(w, *world.table, n, floor))
            << w << " n=" << n << " floor=" << floor;
      }
    }
  }
}

TEST(MlmCandidates, TruncatesAndFilters) {
  const std::vector<std::string> tokens = {"a", "car", "drives"};
  ScriptedProvider p({"vehicle", "car", "truck"});
  EXPECT_EQ(MlmCandidates(tokens, 1, 2, p), (std::vector<std::string>{"vehicle", "truck"}));
  ScriptedProvider noisy({"Car", "##ck", ".", "two words", "", "Bus", "bus", "van"});
  EXPECT_EQ(MlmCandidates(tokens, 1, 6, noisy), (std::vector<std::string>{"bus", "van"}));
  EXPECT_THROW(MlmCandidates(tokens, 5, 2, p), UsageError);
  EXPECT_THROW(MlmCandidates(tokens, 1, 0, p), UsageError);
}

TEST(MlmCandidates, EmbeddingFallbackEqualsNeighbours) {
  auto table = std::make_shared<EmbeddingTable>(ParseEmbeddings(kSmallTable));
  EmbeddingNeighborProvider provider(table, 0.7);
  const std::vector<std::string> tokens = {"a", "good", "movie"};
  for (int k : {1, 2, 6}) {
    EXPECT_EQ(MlmCandidates(tokens, 1, k, provider), EmbeddingCandidates("good", *table, k, 0.7));
  }
}

TEST(MlmCandidates, LargerKExtendsSmallerK) {
  ScriptedProvider p({"a1", "a2", "a3", "a4", "a5", "a6", "a7", "a8", "a9"});
  const std::vector<std::string> tokens = {"x"};
  const auto k6 = MlmCandidates(tokens, 0, 6, p);
  const auto k8 = MlmCandidates(tokens, 0, 8, p);
  ASSERT_EQ(k6.size(), 6u);
  EXPECT_TRUE(std::equal(k6.begin(), k6.end(), k8.begin()));
}

TEST(PosConsistent, Cases) {
  const auto lex = ParsePosLexicon("run\tVERB,NOUN\nwalk\tVERB\nblue\tADJ\ntable\tNOUN\n");
  EXPECT_TRUE(PosConsistent("run", "walk", lex));
  EXPECT_TRUE(PosConsistent("run", "table", lex));
  EXPECT_FALSE(PosConsistent("walk", "table", lex));
  EXPECT_FALSE(PosConsistent("blue", "walk", lex));
  EXPECT_TRUE(PosConsistent("blue", "zebra", lex));
  EXPECT_TRUE(PosConsistent("zebra", "blue", lex));
}

TEST(SentenceSimilarity, HandValues) {
  auto table = std::make_shared<EmbeddingTable>(ParseEmbeddings(kSmallTable));
  MeanEmbeddingEncoder enc(table);
  EXPECT_NEAR(SentenceSimilarity("a good movie", "a good movie", enc), 1.0, 1e-12);
  EXPECT_NEAR(SentenceSimilarity("good", "bad", enc), -1.0, 1e-12);
  const std::string a = "this is good movie", b = "this is great movie";
  EXPECT_NEAR(SentenceSimilarity(a, b, enc), *testing::OracleSimilarity(a, b, *table), 1e-12);
  EXPECT_THROW(SentenceSimilarity("zzz", "good", enc), SimilarityError);
}

TEST(RankWordImportance, NegationRanksFirst) {
  const auto world = LoadToyWorld();
  const auto tokens = Tokenize("A woman is not running.");
  const std::string premise = JoinTokens(Tokenize("A woman is sitting in the park."));
  ASSERT_EQ(world.rule_victim->Classify(premise, JoinTokens(tokens)).label, Label::kContradiction);
  const auto ranked = RankWordImportance(tokens, *world.rule_victim, premise,
                                         TargetField::kHypothesis, Label::kContradiction,
                                         world.stopwords, ImportanceMode::kDeletion);
  // a / is and the period are skipped.
  ASSERT_EQ(ranked.size(), 3u);
  EXPECT_EQ(tokens[ranked[0].index], "not");
  EXPECT_GT(ranked[0].score, ranked[1].score);
}

TEST(RankWordImportance, AllStopwordsGivesEmptyRanking) {
  const auto world = LoadToyWorld();
  const auto tokens = Tokenize("a the is .");
  EXPECT_TRUE(RankWordImportance(tokens, *world.rule_victim, "a dog", TargetField::kHypothesis,
                                 Label::kEntailment, world.stopwords, ImportanceMode::kMasking)
                  .empty());
}

NliExample Example(std::string id, std::string p, std::string h, Label gold) {
  NliExample ex;
  ex.id = std::move(id);
  ex.premise = std::move(p);
  ex.hypothesis = std::move(h);
  ex.gold_label = gold;
  return ex;
}

TEST(GreedyAttack, MisclassifiedIsSkippedWithOneQuery) {
  const auto world = LoadToyWorld();
  const auto ex = Example("s", "A dog is running.", "A dog is not running.", Label::kEntailment);
  const auto rec = GreedyAttack(ex, *world.rule_victim, AttackConfig{}, world.resources);
  EXPECT_EQ(rec.status, AttackStatus::kSkipped);
  EXPECT_EQ(rec.queries, 1u);
  EXPECT_EQ(rec.perturbed_text, rec.original_text);
}

TEST(GreedyAttack, NoSurvivingCandidatesFails) {
  const auto world = LoadToyWorld();
  AttackConfig config;
  config.sentence_sim_threshold = 1.0;
  const auto ex = Example("f", "A woman is in the park.", "A woman is in the park.",
                          Label::kEntailment);
  const auto rec = GreedyAttack(ex, *world.rule_victim, config, world.resources);
  EXPECT_EQ(rec.status, AttackStatus::kFailed);
  EXPECT_EQ(rec.perturbed_text, rec.original_text);
  EXPECT_TRUE(rec.substitutions.empty());
}

TEST(GreedyAttack, VictimErrorKeepsPartialRecord) {
  const auto world = LoadToyWorld();
  ThrowingClassifier victim(2);
  const auto ex = Example("e", "A woman is in the park.", "A person is in the park.",
                          Label::kEntailment);
  const auto rec = GreedyAttack(ex, victim, AttackConfig{}, world.resources);
  EXPECT_EQ(rec.status, AttackStatus::kErrored);
  ASSERT_TRUE(rec.error.has_value());
  EXPECT_NE(rec.error->find("backend went away"), std::string::npos);
  EXPECT_EQ(rec.queries, 3u);
  EXPECT_EQ(rec.orig_output.label, Label::kEntailment);
}

TEST(GreedyAttack, QueriesEqualCounterDelta) {
  const auto world = LoadToyWorld();
  const auto corpus = testing::RandomToyCorpus(60, 5);
  auto counted = WithQueryCounter(world.rule_victim);
  for (auto recipe : {Recipe::kTextFoolerStyle, Recipe::kBertAttackStyle}) {
    AttackConfig config;
    config.recipe = recipe;
    auto res = world.resources;
    res.mlm_provider = std::make_shared<EmbeddingNeighborProvider>(world.table, 0.0);
    for (const auto& ex : corpus) {
      const auto before = counted.counter->count();
      const auto rec = GreedyAttack(ex, *counted.victim, config, res);
      EXPECT_EQ(rec.queries, counted.counter->count() - before) << ex.id;
    }
  }
}

TEST(GreedyAttack, SuccessesRevalidateAndReconstruct) {
  const auto world = LoadToyWorld();
  const auto corpus = testing::RandomToyCorpus(120, 17);
  auto provider = std::make_shared<EmbeddingNeighborProvider>(world.table, 0.0);
  int successes = 0;
  for (auto recipe : {Recipe::kTextFoolerStyle, Recipe::kBertAttackStyle}) {
    for (auto target : {TargetField::kHypothesis, TargetField::kPremise}) {
      AttackConfig config;
      config.recipe = recipe;
      config.target_field = target;
      auto res = world.resources;
      res.mlm_provider = provider;
      for (const auto& ex : corpus) {
        const auto rec = GreedyAttack(ex, *world.rule_victim, config, res);
        EXPECT_EQ(ApplySubstitutions(rec.original_text, rec.substitutions), rec.perturbed_text);
        if (rec.status != AttackStatus::kSuccess) continue;
        ++successes;
        EXPECT_EQ(testing::RevalidateSuccess(rec, ex, config, world, provider.get()), "")
            << ex.id << " " << RecipeName(recipe) << " " << TargetName(target);
      }
    }
  }
  EXPECT_GT(successes, 0);
}

TEST(GreedyAttack, DeterministicAcrossCalls) {
  const auto world = LoadToyWorld();
  for (const auto& ex : testing::RandomToyCorpus(40, 2)) {
    EXPECT_EQ(GreedyAttack(ex, *world.rule_victim, AttackConfig{}, world.resources),
              GreedyAttack(ex, *world.rule_victim, AttackConfig{}, world.resources));
  }
}

TEST(GreedyAttack, TighterDeltaShrinksCandidateSets) {
  const auto world = LoadToyWorld();
  AttackConfig loose, tight;
  tight.sentence_sim_threshold = 0.75;
  for (const auto& ex : testing::RandomToyCorpus(80, 9)) {
    AttackTrace tl, tt;
    const auto rl = GreedyAttack(ex, *world.rule_victim, loose, world.resources, &tl);
    const auto rt = GreedyAttack(ex, *world.rule_victim, tight, world.resources, &tt);
    // The rule victim commits only on flips, so both runs visit the same
    // positions with the same state until one of them succeeds.
    const std::size_t shared = std::min(tl.decisions.size(), tt.decisions.size());
    for (std::size_t i = 0; i < shared; ++i) {
      ASSERT_EQ(tl.decisions[i].position, tt.decisions[i].position);
      EXPECT_EQ(tl.decisions[i].generated, tt.decisions[i].generated);
      const std::set<std::string> l(tl.decisions[i].surviving.begin(),
                                    tl.decisions[i].surviving.end());
      for (const auto& w : tt.decisions[i].surviving) EXPECT_EQ(l.count(w), 1u) << ex.id;
    }
    if (rt.status == AttackStatus::kSuccess) EXPECT_EQ(rl.status, AttackStatus::kSuccess) << ex.id;
  }
}

TEST(GreedyAttack, LargerKExtendsCandidateSets) {
  const auto world = LoadToyWorld();
  auto res = world.resources;
  res.mlm_provider = std::make_shared<testing::PrefixStableProvider>(world.table);
  AttackConfig k6, k8;
  k6.recipe = k8.recipe = Recipe::kBertAttackStyle;
  k6.mlm_top_k = 6;
  k8.mlm_top_k = 8;
  for (const auto& ex : testing::RandomToyCorpus(80, 21)) {
    AttackTrace t6, t8;
    const auto r6 = GreedyAttack(ex, *world.rule_victim, k6, res, &t6);
    const auto r8 = GreedyAttack(ex, *world.rule_victim, k8, res, &t8);
    const std::size_t shared = std::min(t6.decisions.size(), t8.decisions.size());
    for (std::size_t i = 0; i < shared; ++i) {
      ASSERT_EQ(t6.decisions[i].position, t8.decisions[i].position);
      const auto& g6 = t6.decisions[i].generated;
      const auto& g8 = t8.decisions[i].generated;
      ASSERT_LE(g6.size(), g8.size());
      EXPECT_TRUE(std::equal(g6.begin(), g6.end(), g8.begin())) << ex.id;
    }
    if (r6.status == AttackStatus::kSuccess) EXPECT_EQ(r8.status, AttackStatus::kSuccess) << ex.id;
  }
}

TEST(GreedyAttack, PerturbFractionCapsSubstitutions) {
  const auto world = LoadToyWorld();
  AttackConfig config;
  config.max_perturb_fraction = 0.01;
  for (const auto& ex : testing::RandomToyCorpus(30, 4)) {
    const auto rec = GreedyAttack(ex, *world.rule_victim, config, world.resources);
    EXPECT_TRUE(rec.substitutions.empty());
    EXPECT_NE(rec.status, AttackStatus::kSuccess);
  }
}

TEST(GreedyAttack, MissingResourcesAreUsageErrors) {
  const auto world = LoadToyWorld();
  const auto ex = Example("m", "A dog.", "A dog.", Label::kEntailment);
  AttackResources none;
  EXPECT_THROW(GreedyAttack(ex, *world.rule_victim, AttackConfig{}, none), UsageError);
  AttackConfig bert;
  bert.recipe = Recipe::kBertAttackStyle;
  EXPECT_THROW(GreedyAttack(ex, *world.rule_victim, bert, world.resources), UsageError);
  AttackConfig bad;
  bad.sentence_sim_threshold = 1.5;
  EXPECT_THROW(GreedyAttack(ex, *world.rule_victim, bad, world.resources), UsageError);
}

// ---------------------------------------------------------------------------
// Explain-then-predict

std::shared_ptr<const PairClassifier> TemplatePipeline(const ToyWorld& w) {
  return std::make_shared<ExplainThenPredictClassifier>(
      std::make_shared<TemplateExplainer>(w.rules),
      std::make_shared<KeywordExplanationClassifier>());
}

TEST(ExplainThenPredict, ConstantExplainerNeverSucceeds) {
  const auto world = LoadToyWorld();
  auto pipeline = std::make_shared<ExplainThenPredictClassifier>(
      std::make_shared<ConstantExplainer>("a person is a person"),
      std::make_shared<KeywordExplanationClassifier>());
  for (const auto& ex : testing::RandomToyCorpus(40, 8)) {
    const auto rec = AttackExplainThenPredict(ex, *pipeline, AttackConfig{}, world.resources);
    EXPECT_TRUE(rec.status == AttackStatus::kFailed || rec.status == AttackStatus::kSkipped);
  }
}

TEST(ExplainThenPredict, PremiseSwapShiftsExplanationToNeutral) {
  const auto world = LoadToyWorld();
  const auto pipeline = TemplatePipeline(world);
  AttackConfig config;
  config.target_field = TargetField::kPremise;
  const auto ex = Example("w", "A woman is in the park.", "A woman is in the garden.",
                          Label::kEntailment);
  const auto rec = AttackExplainThenPredict(ex, *pipeline, config, world.resources);
  ASSERT_EQ(rec.status, AttackStatus::kSuccess) << rec.perturbed_text;
  EXPECT_EQ(rec.final_output.label, Label::kNeutral);
  ASSERT_TRUE(rec.orig_explanation && rec.final_explanation);
  EXPECT_NE(rec.orig_explanation->find(" is a "), std::string::npos) << *rec.orig_explanation;
  EXPECT_NE(rec.final_explanation->find("not necessarily"), std::string::npos)
      << *rec.final_explanation;
}

TEST(ExplainThenPredict, SuccessesChangeTheExplanation) {
  const auto world = LoadToyWorld();
  const auto pipeline = TemplatePipeline(world);
  int successes = 0;
  for (auto target : {TargetField::kHypothesis, TargetField::kPremise}) {
    AttackConfig config;
    config.target_field = target;
    for (const auto& ex : testing::RandomToyCorpus(20, 13)) {
      const auto rec = AttackExplainThenPredict(ex, *pipeline, config, world.resources);
      ASSERT_TRUE(rec.orig_explanation && rec.final_explanation);
      if (*rec.orig_explanation == *rec.final_explanation) {
        EXPECT_EQ(rec.orig_output.label, rec.final_output.label);
      }
      if (rec.status == AttackStatus::kSuccess) {
        ++successes;
        EXPECT_NE(*rec.orig_explanation, *rec.final_explanation);
      }
    }
  }
  EXPECT_GT(successes, 0);
}

// A pipeline that lies: its label moves without the explanation moving.
class LeakyPipeline : public PairClassifier {
 public:
  explicit LeakyPipeline(std::shared_ptr<const PairClassifier> inner) : inner_(std::move(inner)) {}
  ClassifierOutput Classify(std::string_view p, std::string_view h) const override {
    return inner_->Classify(p, h);
  }
  Probe ProbePair(std::string_view p, std::string_view h) const override {
    return {inner_->Classify(p, h), std::string("fixed")};
  }

 private:
  std::shared_ptr<const PairClassifier> inner_;
};

TEST(ExplainThenPredict, MediationViolationThrows) {
  const auto world = LoadToyWorld();
  LeakyPipeline leaky(world.rule_victim);
  bool threw = false;
  for (const auto& ex : testing::RandomToyCorpus(40, 3)) {
    try {
      AttackExplainThenPredict(ex, leaky, AttackConfig{}, world.resources);
    } catch (const Error& e) {
      threw = true;
      EXPECT_NE(std::string(e.what()).find("mediation"), std::string::npos);
    }
  }
  EXPECT_TRUE(threw);
}

TEST(ExplainThenPredict, PlainVictimIsRejected) {
  const auto world = LoadToyWorld();
  const auto ex = Example("p", "A woman is in the park.", "A person is in the park.",
                          Label::kEntailment);
  EXPECT_THROW(AttackExplainThenPredict(ex, *world.rule_victim, AttackConfig{}, world.resources),
               UsageError);
}

}  // namespace
}  // namespace explattack
