#include "explattack/config.h"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "explattack/errors.h"

namespace explattack {
namespace {

std::string_view Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<ConfigKey> BuildRegistry() {
  const std::vector<std::string> attack = {"attack"};
  const std::vector<std::string> data = {"attack", "train", "score-explanations"};
  const std::vector<std::string> emb = {"attack", "train", "score-explanations"};
  return {
      {"recipe", "textfooler", "attack recipe: textfooler | bertattack", attack},
      {"target", "hypothesis", "field to perturb: premise | hypothesis", attack},
      {"max-candidates", "50", "embedding neighbours per word (N), >= 1", attack},
      {"delta", "0.7", "sentence similarity threshold, in [0, 1]", attack},
      {"mlm-k", "6", "masked-LM candidates per word (K), >= 1", attack},
      {"word-sim-floor", "0.7", "minimum word cosine for neighbours, in [-1, 1]", attack},
      {"max-perturb-fraction", "1.0", "maximum fraction of words substituted, in (0, 1]",
       attack},
      {"seed", "0", "seed for training shuffles (also read from EXPLATTACK_SEED)",
       {"attack", "train"}},
      {"dataset", "", "e-SNLI style CSV", data},
      {"embeddings", "", "word vectors, one 'word v1 ... vd' per line", emb},
      {"stopwords", "", "stopword list, one per line (optional)", {"attack"}},
      {"pos-lexicon", "", "POS lexicon 'word<TAB>TAG[,TAG]' (optional)", attack},
      {"victim", "rule",
       "rule | linear:<model> | pipeline:<template|constant:<text>|remote:<url>>,"
       "<keyword|remote:<url>> | remote:<url>",
       attack},
      {"encoder", "mean-embedding", "sentence encoder: mean-embedding | remote:<url>", attack},
      {"mlm-provider", "embedding",
       "bertattack candidates: embedding | remote:<url>", attack},
      {"output-dir", "explattack-run", "directory for records.jsonl and summary.json", attack},
      {"workers", "1", "attack worker threads, >= 1", attack},
      {"timestamp", "", "summary timestamp override (default: SOURCE_DATE_EPOCH or now)",
       attack},
      {"timeout", "30", "remote request timeout in seconds", {"attack", "score-explanations"}},
      {"col-id", "id", "dataset id column (row index when absent)", data},
      {"col-premise", "premise", "dataset premise column", data},
      {"col-hypothesis", "hypothesis", "dataset hypothesis column", data},
      {"col-label", "label", "dataset label column", data},
      {"col-explanation", "explanation", "prefix of dataset explanation columns", data},
      {"epochs", "50", "training epochs, >= 0", {"train"}},
      {"learning-rate", "0.1", "gradient step size, > 0", {"train"}},
      {"batch-size", "32", "mini-batch size, 0 = full batch", {"train"}},
      {"model-out", "linear_model.txt", "trained model path", {"train"}},
      {"generated", "", "CSV of generated explanations (id,explanation)",
       {"score-explanations"}},
      {"embedder", "embeddings", "token embedder: embeddings | remote:<url>",
       {"score-explanations"}},
      {"scores-out", "explanation-scores", "output prefix for .csv and .json",
       {"score-explanations"}},
      {"summaries", "", "comma-separated summary files, each [label=]path", {"report"}},
      {"baseline", "", "label of the baseline column", {"report"}},
      {"report-out", "report", "output prefix for .md and .csv", {"report"}},
  };
}

}  // namespace

const std::vector<ConfigKey>& ConfigKeys() {
  static const std::vector<ConfigKey> keys = BuildRegistry();
  return keys;
}

const ConfigKey* FindConfigKey(std::string_view name) {
  for (const auto& k : ConfigKeys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

Config Config::WithEnvironment() {
  Config c;
  if (const char* seed = std::getenv("EXPLATTACK_SEED"); seed != nullptr && *seed != '\0') {
    c.Set("seed", seed, ConfigLayer::kEnvironment);
  }
  return c;
}

void Config::Set(std::string_view key, std::string_view value, ConfigLayer layer) {
  if (FindConfigKey(key) == nullptr) throw UsageError("unknown config key '" + std::string(key) + "'");
  layers_[static_cast<int>(layer)].insert_or_assign(std::string(key), std::string(value));
}

void Config::LoadText(std::string_view text) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    const auto key = Trim(line.substr(0, eq));
    if (FindConfigKey(key) == nullptr) {
      throw UsageError("config line " + std::to_string(line_no) + ": unknown key '" +
                       std::string(key) + "'");
    }
    Set(key, Trim(line.substr(eq + 1)), ConfigLayer::kFile);
  }
}

void Config::LoadFile(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw UsageError("config file '" + path + "' does not exist");
  }
  LoadText(ReadFile(path));
}

std::string Config::Get(std::string_view key) const {
  const ConfigKey* k = FindConfigKey(key);
  if (k == nullptr) throw UsageError("unknown config key '" + std::string(key) + "'");
  for (int layer = 3; layer >= 1; --layer) {
    const auto it = layers_[layer].find(key);
    if (it != layers_[layer].end()) return it->second;
  }
  return k->default_value;
}

ConfigLayer Config::LayerOf(std::string_view key) const {
  for (int layer = 3; layer >= 1; --layer) {
    if (layers_[layer].count(key) != 0) return static_cast<ConfigLayer>(layer);
  }
  return ConfigLayer::kDefault;
}

double Config::GetDouble(std::string_view key) const {
  const std::string v = Get(key);
  char* end = nullptr;
  errno = 0;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno != 0 || !std::isfinite(d)) {
    throw UsageError(std::string(key) + ": '" + v + "' is not a number");
  }
  return d;
}

long long Config::GetInt(std::string_view key) const {
  const std::string v = Get(key);
  char* end = nullptr;
  errno = 0;
  const long long n = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno != 0) {
    throw UsageError(std::string(key) + ": '" + v + "' is not an integer");
  }
  return n;
}

std::uint64_t Config::GetUint(std::string_view key) const {
  const std::string v = Get(key);
  char* end = nullptr;
  errno = 0;
  const unsigned long long n = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || v[0] == '-' || *end != '\0' || errno != 0) {
    throw UsageError(std::string(key) + ": '" + v + "' is not a non-negative integer");
  }
  return n;
}

Json Config::Echo() const {
  Json j = Json::object();
  for (const auto& k : ConfigKeys()) j[k.name] = Get(k.name);
  return j;
}

AttackConfig ToAttackConfig(const Config& config) {
  AttackConfig c;
  const auto recipe = ParseRecipe(config.Get("recipe"));
  if (!recipe) throw UsageError("recipe must be textfooler or bertattack");
  c.recipe = *recipe;
  const auto target = ParseTarget(config.Get("target"));
  if (!target) throw UsageError("target must be premise or hypothesis");
  c.target_field = *target;
  const auto int_in_range = [&](const char* key) {
    const long long v = config.GetInt(key);
    if (v < 1 || v > 1000000) throw UsageError(std::string(key) + " must be in [1, 1000000]");
    return static_cast<int>(v);
  };
  c.max_candidates = int_in_range("max-candidates");
  c.mlm_top_k = int_in_range("mlm-k");
  c.sentence_sim_threshold = config.GetDouble("delta");
  c.word_sim_floor = config.GetDouble("word-sim-floor");
  c.max_perturb_fraction = config.GetDouble("max-perturb-fraction");
  c.seed = config.GetUint("seed");
  c.Validate();
  return c;
}

ColumnMap ToColumnMap(const Config& config) {
  ColumnMap m;
  m.id = config.Get("col-id");
  m.premise = config.Get("col-premise");
  m.hypothesis = config.Get("col-hypothesis");
  m.label = config.Get("col-label");
  m.explanation_prefix = config.Get("col-explanation");
  return m;
}

TrainOptions ToTrainOptions(const Config& config) {
  TrainOptions t;
  const long long epochs = config.GetInt("epochs");
  if (epochs < 0 || epochs > 1000000) throw UsageError("epochs must be in [0, 1000000]");
  t.epochs = static_cast<int>(epochs);
  t.learning_rate = config.GetDouble("learning-rate");
  if (!(t.learning_rate > 0.0)) throw UsageError("learning-rate must be > 0");
  t.batch_size = config.GetUint("batch-size");
  t.seed = config.GetUint("seed");
  return t;
}

RemoteOptions ToRemoteOptions(const Config& config) {
  RemoteOptions r;
  const long long t = config.GetInt("timeout");
  if (t < 1 || t > 86400) throw UsageError("timeout must be in [1, 86400] seconds");
  r.timeout_seconds = static_cast<int>(t);
  return r;
}

std::string RequireExistingPath(const Config& config, std::string_view key) {
  const std::string path = config.Get(key);
  if (path.empty()) throw UsageError("--" + std::string(key) + " is required");
  if (!std::filesystem::exists(path)) {
    throw UsageError(std::string(key) + ": '" + path + "' does not exist");
  }
  return path;
}

}  // namespace explattack
