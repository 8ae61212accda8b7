#ifndef EXPLATTACK_ATTACK_H_
#define EXPLATTACK_ATTACK_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "explattack/corpus.h"
#include "explattack/victim.h"

namespace explattack {

enum class Recipe { kTextFoolerStyle, kBertAttackStyle };
enum class TargetField { kPremise, kHypothesis };
enum class ImportanceMode { kDeletion, kMasking };

std::string_view RecipeName(Recipe r);          // "textfooler" | "bertattack"
std::optional<Recipe> ParseRecipe(std::string_view s);
std::string_view TargetName(TargetField t);     // "premise" | "hypothesis"
std::optional<TargetField> ParseTarget(std::string_view s);

struct AttackConfig {
  Recipe recipe = Recipe::kTextFoolerStyle;
  TargetField target_field = TargetField::kHypothesis;
  int max_candidates = 50;               // N, embedding-neighbour recipe
  double sentence_sim_threshold = 0.7;   // delta
  int mlm_top_k = 6;                     // K, masked-LM recipe
  double word_sim_floor = 0.7;
  double max_perturb_fraction = 1.0;
  std::uint64_t seed = 0;

  // Throws UsageError naming the offending field and its valid range.
  void Validate() const;
};

struct Substitution {
  std::size_t position = 0;
  std::string original;
  std::string replacement;
  bool operator==(const Substitution&) const = default;
};

enum class AttackStatus { kSuccess, kFailed, kSkipped, kErrored };
std::string_view StatusName(AttackStatus s);
std::optional<AttackStatus> ParseStatus(std::string_view s);

struct AttackRecord {
  std::string example_id;
  AttackStatus status = AttackStatus::kFailed;
  // Targeted field as the attack saw it: tokens joined by single spaces.
  std::string original_text;
  std::string perturbed_text;
  std::vector<Substitution> substitutions;
  std::uint64_t queries = 0;
  double sentence_similarity = 1.0;
  ClassifierOutput orig_output;
  ClassifierOutput final_output;
  std::optional<std::string> orig_explanation;
  std::optional<std::string> final_explanation;
  std::optional<std::string> error;  // Errored only

  bool operator==(const AttackRecord&) const = default;
};

// Applies `subs` to the tokens of `original_text` and rejoins them.
std::string ApplySubstitutions(std::string_view original_text,
                               std::span<const Substitution> subs);

// ---------------------------------------------------------------------------
// Resources

// Sentence vectors for the similarity constraint. Throws SimilarityError when
// a text has nothing to encode.
class SentenceEncoder {
 public:
  virtual ~SentenceEncoder() = default;
  virtual std::vector<double> Encode(std::string_view text) const = 0;
};

// Mean of the in-vocabulary token vectors.
class MeanEmbeddingEncoder : public SentenceEncoder {
 public:
  explicit MeanEmbeddingEncoder(std::shared_ptr<const EmbeddingTable> table)
      : table_(std::move(table)) {}
  std::vector<double> Encode(std::string_view text) const override;

 private:
  std::shared_ptr<const EmbeddingTable> table_;
};

// Cosine of the two sentence vectors, in [-1, 1].
double SentenceSimilarity(std::string_view a, std::string_view b, const SentenceEncoder& encoder);

// Replacement words for tokens[position], best first. May return more than
// `k` entries; callers filter and truncate.
class CandidateProvider {
 public:
  virtual ~CandidateProvider() = default;
  virtual std::vector<std::string> Candidates(std::span<const std::string> tokens,
                                              std::size_t position, int k) const = 0;
};

// Top-N vocabulary words by cosine to `word`, excluding the word itself and
// anything below `word_sim_floor`; ties alphabetical. OOV word -> empty.
std::vector<std::string> EmbeddingCandidates(std::string_view word, const EmbeddingTable& table,
                                             int n, double word_sim_floor);

// Fallback masked-LM provider: embedding neighbours of the masked word.
class EmbeddingNeighborProvider : public CandidateProvider {
 public:
  EmbeddingNeighborProvider(std::shared_ptr<const EmbeddingTable> table, double word_sim_floor)
      : table_(std::move(table)), floor_(word_sim_floor) {}
  std::vector<std::string> Candidates(std::span<const std::string> tokens, std::size_t position,
                                      int k) const override;

 private:
  std::shared_ptr<const EmbeddingTable> table_;
  double floor_;
};

// At most `k` provider candidates after dropping the original word,
// punctuation, sub-word pieces ("##"), empty or multi-word entries and
// duplicates. Candidates are lowercased.
std::vector<std::string> MlmCandidates(std::span<const std::string> tokens, std::size_t position,
                                       int k, const CandidateProvider& provider);

// Tag sets intersect; a word missing from the lexicon passes.
bool PosConsistent(std::string_view original, std::string_view candidate,
                   const PosLexicon& lexicon);

struct AttackResources {
  std::shared_ptr<const EmbeddingTable> embeddings;
  WordSet stopwords;
  PosLexicon pos_lexicon;
  std::shared_ptr<const SentenceEncoder> encoder;
  // Masked-LM candidates for the BERT-Attack-style recipe.
  std::shared_ptr<const CandidateProvider> mlm_provider;
};

// ---------------------------------------------------------------------------
// Search

struct RankedPosition {
  std::size_t index;
  double score;
};

// Probe-based word importance: P_gold(original) - P_gold(probe), plus
// P_new(probe) - P_new(original) for the new top label when the probe leaves
// the gold label. Stopwords and punctuation are skipped. Costs one query for
// the original and one per eligible position.
std::vector<RankedPosition> RankWordImportance(std::span<const std::string> tokens,
                                               const PairClassifier& victim,
                                               std::string_view other_field,
                                               TargetField target, Label gold,
                                               const WordSet& stopwords, ImportanceMode mode);

// One decision point of the greedy search, for instrumentation.
struct DecisionTrace {
  std::size_t position;
  std::vector<std::string> generated;  // after recipe filters, before delta
  std::vector<std::string> surviving;  // after the similarity threshold
};

struct AttackTrace {
  std::vector<DecisionTrace> decisions;
};

// Greedy word-substitution attack on the configured field. Victim errors
// produce an Errored record carrying the partial state.
AttackRecord GreedyAttack(const NliExample& example, const PairClassifier& victim,
                          const AttackConfig& config, const AttackResources& resources,
                          AttackTrace* trace = nullptr);

// GreedyAttack against an explain-then-predict victim (any PairClassifier
// whose probes carry explanations). Throws Error if a record breaks
// explanation mediation: same explanation, different label.
AttackRecord AttackExplainThenPredict(const NliExample& example, const PairClassifier& pipeline,
                                      const AttackConfig& config,
                                      const AttackResources& resources,
                                      AttackTrace* trace = nullptr);

}  // namespace explattack

#endif  // EXPLATTACK_ATTACK_H_
