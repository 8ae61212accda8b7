#include <gtest/gtest.h>

#include <cstdlib>
#include <set>

#include "explattack/config.h"
#include "explattack/errors.h"
#include "toy_world.h"

namespace explattack {
namespace {

TEST(Config, DefaultsMatchAttackConfig) {
  const auto a = ToAttackConfig(Config{});
  const AttackConfig d;
  EXPECT_EQ(a.recipe, d.recipe);
  EXPECT_EQ(a.target_field, d.target_field);
  EXPECT_EQ(a.max_candidates, 50);
  EXPECT_EQ(a.mlm_top_k, 6);
  EXPECT_DOUBLE_EQ(a.sentence_sim_threshold, 0.7);
  EXPECT_DOUBLE_EQ(a.word_sim_floor, d.word_sim_floor);
  EXPECT_DOUBLE_EQ(a.max_perturb_fraction, d.max_perturb_fraction);
  EXPECT_EQ(a.seed, 0u);
}

TEST(Config, LayersOverrideInOrder) {
  Config c;
  c.Set("seed", "1", ConfigLayer::kEnvironment);
  EXPECT_EQ(c.Get("seed"), "1");
  c.LoadText("# comment\nseed = 2\n\ndelta=0.8  # trailing\n");
  EXPECT_EQ(c.Get("seed"), "2");
  EXPECT_EQ(c.LayerOf("seed"), ConfigLayer::kFile);
  c.Set("seed", "3");
  EXPECT_EQ(c.Get("seed"), "3");
  EXPECT_EQ(c.LayerOf("seed"), ConfigLayer::kFlag);
  // A later lower-layer write does not displace the flag.
  c.Set("seed", "4", ConfigLayer::kEnvironment);
  EXPECT_EQ(c.Get("seed"), "3");
  EXPECT_DOUBLE_EQ(c.GetDouble("delta"), 0.8);
  EXPECT_EQ(c.LayerOf("recipe"), ConfigLayer::kDefault);
}

TEST(Config, EnvironmentSeed) {
  ::setenv("EXPLATTACK_SEED", "42", 1);
  const auto c = Config::WithEnvironment();
  ::unsetenv("EXPLATTACK_SEED");
  EXPECT_EQ(c.GetUint("seed"), 42u);
  EXPECT_EQ(c.LayerOf("seed"), ConfigLayer::kEnvironment);
}

TEST(Config, UnknownKeysAndBadValues) {
  Config c;
  EXPECT_THROW(c.Set("nope", "1"), UsageError);
  EXPECT_THROW(c.LoadText("delta 0.7\n"), UsageError);
  EXPECT_THROW(c.LoadText("bogus=1\n"), UsageError);
  EXPECT_THROW(c.Get("bogus"), UsageError);
  EXPECT_THROW(c.LoadFile("/nonexistent/explattack.conf"), UsageError);
  c.Set("delta", "abc");
  EXPECT_THROW(ToAttackConfig(c), UsageError);
  c.Set("delta", "1.5");
  try {
    ToAttackConfig(c);
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("delta must be in [0, 1]"), std::string::npos);
  }
  Config d;
  d.Set("recipe", "fgsm");
  EXPECT_THROW(ToAttackConfig(d), UsageError);
  Config e;
  e.Set("seed", "-1");
  EXPECT_THROW(e.GetUint("seed"), UsageError);
  Config f;
  f.Set("learning-rate", "0");
  EXPECT_THROW(ToTrainOptions(f), UsageError);
  Config g;
  g.Set("timeout", "0");
  EXPECT_THROW(ToRemoteOptions(g), UsageError);
}

TEST(Config, RegistryIsConsistent) {
  std::set<std::string> names;
  for (const auto& k : ConfigKeys()) {
    EXPECT_TRUE(names.insert(k.name).second) << k.name;
    EXPECT_FALSE(k.help.empty()) << k.name;
    EXPECT_FALSE(k.commands.empty()) << k.name;
    EXPECT_EQ(FindConfigKey(k.name), &k);
  }
  const auto echo = Config{}.Echo();
  EXPECT_EQ(echo.size(), ConfigKeys().size());
  EXPECT_EQ(echo.begin().key(), ConfigKeys().front().name);
}

TEST(Config, RequireExistingPath) {
  Config c;
  EXPECT_THROW(RequireExistingPath(c, "dataset"), UsageError);
  c.Set("dataset", "/nonexistent.csv");
  EXPECT_THROW(RequireExistingPath(c, "dataset"), UsageError);
  c.Set("dataset", testing::DataPath("toy_esnli.csv"));
  EXPECT_EQ(RequireExistingPath(c, "dataset"), testing::DataPath("toy_esnli.csv"));
}

TEST(Config, ColumnMapFromKeys) {
  Config c;
  c.Set("col-premise", "Sentence1");
  const auto m = ToColumnMap(c);
  EXPECT_EQ(m.premise, "Sentence1");
  EXPECT_EQ(m.id, "id");
}

}  // namespace
}  // namespace explattack
