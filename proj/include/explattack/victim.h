#ifndef EXPLATTACK_VICTIM_H_
#define EXPLATTACK_VICTIM_H_

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "explattack/corpus.h"

namespace explattack {

// Predicted label plus its 3-way distribution, indexed by LabelIndex.
struct ClassifierOutput {
  Label label = Label::kEntailment;
  std::array<double, 3> probs = {1.0 / 3, 1.0 / 3, 1.0 / 3};

  double prob(Label l) const { return probs[LabelIndex(l)]; }
  bool operator==(const ClassifierOutput&) const = default;
};

// Label is the argmax with ties going to the earlier label (E < N < C).
ClassifierOutput MakeOutput(const std::array<double, 3>& probs);

// Stable softmax over three logits.
ClassifierOutput SoftmaxOutput(const std::array<double, 3>& logits);

// `confidence` on `label`, the remainder split equally over the other two.
ClassifierOutput ConfidentOutput(Label label, double confidence = 0.9);

// One victim invocation. Pipelines also report the intermediate explanation.
struct Probe {
  ClassifierOutput output;
  std::optional<std::string> explanation;
};

class PairClassifier {
 public:
  virtual ~PairClassifier() = default;
  virtual ClassifierOutput Classify(std::string_view premise,
                                    std::string_view hypothesis) const = 0;
  // Same as Classify, exposing any intermediate explanation. Counts as a
  // single query.
  virtual Probe ProbePair(std::string_view premise, std::string_view hypothesis) const {
    return {Classify(premise, hypothesis), std::nullopt};
  }
  // Implementations that cannot take concurrent calls return false; the
  // campaign runner then serializes access.
  virtual bool concurrent() const { return true; }
};

class Explainer {
 public:
  virtual ~Explainer() = default;
  virtual std::string Explain(std::string_view premise, std::string_view hypothesis) const = 0;
  virtual bool concurrent() const { return true; }
};

class ExplanationClassifier {
 public:
  virtual ~ExplanationClassifier() = default;
  virtual ClassifierOutput ClassifyExplanation(std::string_view explanation) const = 0;
  virtual bool concurrent() const { return true; }
};

struct ExplainedOutput {
  std::string explanation;
  ClassifierOutput output;
};

// Two independently built stages joined only at inference: the explainer
// writes e from (P, H) and the explanation classifier labels e alone.
ExplainedOutput ExplainThenPredict(const Explainer& explainer,
                                   const ExplanationClassifier& expl_clf,
                                   std::string_view premise, std::string_view hypothesis);

class ExplainThenPredictClassifier : public PairClassifier {
 public:
  ExplainThenPredictClassifier(std::shared_ptr<const Explainer> explainer,
                               std::shared_ptr<const ExplanationClassifier> expl_clf);

  ClassifierOutput Classify(std::string_view premise,
                            std::string_view hypothesis) const override;
  Probe ProbePair(std::string_view premise, std::string_view hypothesis) const override;
  bool concurrent() const override;

  ExplainedOutput Run(std::string_view premise, std::string_view hypothesis) const;

 private:
  std::shared_ptr<const Explainer> explainer_;
  std::shared_ptr<const ExplanationClassifier> expl_clf_;
};

// ---------------------------------------------------------------------------
// Query counting

class QueryCounter {
 public:
  void Increment() { count_.fetch_add(1, std::memory_order_relaxed); }
  std::uint64_t count() const { return count_.load(std::memory_order_relaxed); }
  void Reset() { count_.store(0, std::memory_order_relaxed); }

 private:
  std::atomic<std::uint64_t> count_{0};
};

class CountingClassifier : public PairClassifier {
 public:
  CountingClassifier(std::shared_ptr<const PairClassifier> inner,
                     std::shared_ptr<QueryCounter> counter)
      : inner_(std::move(inner)), counter_(std::move(counter)) {}

  ClassifierOutput Classify(std::string_view premise,
                            std::string_view hypothesis) const override {
    counter_->Increment();
    return inner_->Classify(premise, hypothesis);
  }
  Probe ProbePair(std::string_view premise, std::string_view hypothesis) const override {
    counter_->Increment();
    return inner_->ProbePair(premise, hypothesis);
  }
  bool concurrent() const override { return inner_->concurrent(); }

 private:
  std::shared_ptr<const PairClassifier> inner_;
  std::shared_ptr<QueryCounter> counter_;
};

struct CountedVictim {
  std::shared_ptr<const PairClassifier> victim;
  std::shared_ptr<QueryCounter> counter;
};

CountedVictim WithQueryCounter(std::shared_ptr<const PairClassifier> victim);

// Serializes every call into a victim that declared itself non-concurrent.
class SerializedClassifier : public PairClassifier {
 public:
  explicit SerializedClassifier(std::shared_ptr<const PairClassifier> inner)
      : inner_(std::move(inner)) {}

  ClassifierOutput Classify(std::string_view premise,
                            std::string_view hypothesis) const override {
    std::lock_guard lock(mu_);
    return inner_->Classify(premise, hypothesis);
  }
  Probe ProbePair(std::string_view premise, std::string_view hypothesis) const override {
    std::lock_guard lock(mu_);
    return inner_->ProbePair(premise, hypothesis);
  }

 private:
  std::shared_ptr<const PairClassifier> inner_;
  mutable std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Linear victim

// [mean(P); mean(H); |mean(P) - mean(H)|; mean(P) * mean(H)] over in-vocabulary
// tokens. Throws FeaturizationError if either side has no known token.
std::vector<double> Featurize(std::span<const std::string> premise_tokens,
                              std::span<const std::string> hypothesis_tokens,
                              const EmbeddingTable& table);

struct LinearModel {
  std::size_t feature_dim = 0;
  std::vector<double> weights;  // row-major, 3 x feature_dim
  std::array<double, 3> bias = {0.0, 0.0, 0.0};

  static LinearModel Zeros(std::size_t feature_dim);
  double& w(std::size_t label, std::size_t f) { return weights[label * feature_dim + f]; }
  double w(std::size_t label, std::size_t f) const { return weights[label * feature_dim + f]; }
  bool operator==(const LinearModel&) const = default;
};

std::array<double, 3> LinearLogits(const LinearModel& model, std::span<const double> features);
ClassifierOutput LinearClassify(const LinearModel& model, std::span<const double> features);

// Text format: a header line "3 <feature_dim>", then one line per label in
// E, N, C order holding the bias followed by feature_dim weights.
std::string FormatLinearModel(const LinearModel& model);
LinearModel ParseLinearModel(std::string_view text);
void SaveLinearModel(const std::string& path, const LinearModel& model);
LinearModel LoadLinearModel(const std::string& path);

class LinearPairClassifier : public PairClassifier {
 public:
  // Throws ValidationError unless model.feature_dim == 4 * table dim.
  LinearPairClassifier(LinearModel model, std::shared_ptr<const EmbeddingTable> table);

  // A side with no in-vocabulary token contributes a zero feature vector, so
  // the output falls back to softmax(bias).
  ClassifierOutput Classify(std::string_view premise,
                            std::string_view hypothesis) const override;

 private:
  LinearModel model_;
  std::shared_ptr<const EmbeddingTable> table_;
};

struct TrainOptions {
  int epochs = 50;
  double learning_rate = 0.1;
  std::size_t batch_size = 32;  // 0 = full batch
  std::uint64_t seed = 0;
};

struct TrainResult {
  LinearModel model;
  std::vector<double> loss_trace;  // mean cross-entropy after each epoch
  double train_accuracy = 0.0;
  std::vector<std::string> warnings;
};

struct LabeledFeatures {
  std::vector<double> features;
  Label label;
};

// Mean cross-entropy over `batch` and its gradient (same layout as model).
double LossAndGradient(const LinearModel& model, std::span<const LabeledFeatures> batch,
                       LinearModel* gradient);

TrainResult TrainLinearOnFeatures(std::span<const LabeledFeatures> data,
                                  std::size_t feature_dim, const TrainOptions& options);

// Examples whose featurization fails are skipped with a warning.
TrainResult TrainLinear(std::span<const NliExample> examples, const EmbeddingTable& table,
                        const TrainOptions& options);

// ---------------------------------------------------------------------------
// Rule-based desk victims

inline constexpr std::array<std::string_view, 4> kNegationTokens = {"no", "not", "never",
                                                                    "cannot"};
bool IsNegationToken(std::string_view token);

// Shared lexical analysis behind the rule classifier and template explainer.
class LexicalRules {
 public:
  LexicalRules(std::shared_ptr<const EmbeddingTable> table, WordSet stopwords,
               double word_sim_floor);

  struct Analysis {
    Label label;
    std::vector<std::string> premise_content;
    std::vector<std::string> hypothesis_content;
    // Hypothesis content tokens not covered by the premise.
    std::vector<std::string> uncovered;
    // (premise word, hypothesis word) covered through a nearest neighbour.
    std::vector<std::pair<std::string, std::string>> aligned;
  };

  Analysis Analyze(std::string_view premise, std::string_view hypothesis) const;

  bool IsContent(const std::string& token) const;
  // Top-1 neighbour of `word` if its cosine reaches the floor.
  std::optional<std::string> TopNeighbor(const std::string& word) const;
  double Similarity(const std::string& a, const std::string& b) const;

 private:
  std::shared_ptr<const EmbeddingTable> table_;
  WordSet stopwords_;
  double floor_;
};

class RulePairClassifier : public PairClassifier {
 public:
  explicit RulePairClassifier(std::shared_ptr<const LexicalRules> rules)
      : rules_(std::move(rules)) {}
  ClassifierOutput Classify(std::string_view premise,
                            std::string_view hypothesis) const override;

 private:
  std::shared_ptr<const LexicalRules> rules_;
};

class TemplateExplainer : public Explainer {
 public:
  explicit TemplateExplainer(std::shared_ptr<const LexicalRules> rules)
      : rules_(std::move(rules)) {}
  std::string Explain(std::string_view premise, std::string_view hypothesis) const override;

 private:
  std::shared_ptr<const LexicalRules> rules_;
};

class ConstantExplainer : public Explainer {
 public:
  explicit ConstantExplainer(std::string text) : text_(std::move(text)) {}
  std::string Explain(std::string_view, std::string_view) const override { return text_; }

 private:
  std::string text_;
};

// "not necessarily" -> Neutral, else any of {not, cannot, no} as a token ->
// Contradiction, else Entailment.
ClassifierOutput KeywordExpl2Label(std::string_view explanation);

class KeywordExplanationClassifier : public ExplanationClassifier {
 public:
  ClassifierOutput ClassifyExplanation(std::string_view explanation) const override {
    return KeywordExpl2Label(explanation);
  }
};

}  // namespace explattack

#endif  // EXPLATTACK_VICTIM_H_
