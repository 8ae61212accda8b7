#include "explattack/victim.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "explattack/errors.h"

namespace explattack {

ClassifierOutput MakeOutput(const std::array<double, 3>& probs) {
  ClassifierOutput out;
  out.probs = probs;
  std::size_t best = 0;
  for (std::size_t i = 1; i < 3; ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  out.label = kAllLabels[best];
  return out;
}

ClassifierOutput SoftmaxOutput(const std::array<double, 3>& logits) {
  const double m = std::max({logits[0], logits[1], logits[2]});
  std::array<double, 3> p;
  double z = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return MakeOutput(p);
}

ClassifierOutput ConfidentOutput(Label label, double confidence) {
  const double rest = (1.0 - confidence) / 2.0;
  std::array<double, 3> p = {rest, rest, rest};
  p[LabelIndex(label)] = confidence;
  return MakeOutput(p);
}

// ---------------------------------------------------------------------------
// ExplainThenPredict

ExplainedOutput ExplainThenPredict(const Explainer& explainer,
                                   const ExplanationClassifier& expl_clf,
                                   std::string_view premise, std::string_view hypothesis) {
  ExplainedOutput result;
  result.explanation = explainer.Explain(premise, hypothesis);
  if (result.explanation.empty()) throw VictimError("explainer returned an empty explanation");
  result.output = expl_clf.ClassifyExplanation(result.explanation);
  return result;
}

ExplainThenPredictClassifier::ExplainThenPredictClassifier(
    std::shared_ptr<const Explainer> explainer,
    std::shared_ptr<const ExplanationClassifier> expl_clf)
    : explainer_(std::move(explainer)), expl_clf_(std::move(expl_clf)) {
  if (!explainer_ || !expl_clf_) throw UsageError("pipeline needs both stages");
}

ExplainedOutput ExplainThenPredictClassifier::Run(std::string_view premise,
                                                  std::string_view hypothesis) const {
  return ExplainThenPredict(*explainer_, *expl_clf_, premise, hypothesis);
}

ClassifierOutput ExplainThenPredictClassifier::Classify(std::string_view premise,
                                                        std::string_view hypothesis) const {
  return Run(premise, hypothesis).output;
}

Probe ExplainThenPredictClassifier::ProbePair(std::string_view premise,
                                              std::string_view hypothesis) const {
  auto r = Run(premise, hypothesis);
  return {r.output, std::move(r.explanation)};
}

bool ExplainThenPredictClassifier::concurrent() const {
  return explainer_->concurrent() && expl_clf_->concurrent();
}

CountedVictim WithQueryCounter(std::shared_ptr<const PairClassifier> victim) {
  auto counter = std::make_shared<QueryCounter>();
  return {std::make_shared<CountingClassifier>(std::move(victim), counter), counter};
}

// ---------------------------------------------------------------------------
// Linear victim

namespace {

// Returns false if no token is in the table.
bool MeanVector(std::span<const std::string> tokens, const EmbeddingTable& table,
                std::vector<double>* mean) {
  mean->assign(table.dim(), 0.0);
  std::size_t known = 0;
  for (const auto& t : tokens) {
    auto v = table.Lookup(t);
    if (!v) continue;
    for (std::size_t i = 0; i < table.dim(); ++i) (*mean)[i] += (*v)[i];
    ++known;
  }
  if (known == 0) return false;
  for (double& x : *mean) x /= static_cast<double>(known);
  return true;
}

std::vector<double> CombineFeatures(const std::vector<double>& p, const std::vector<double>& h) {
  const std::size_t d = p.size();
  std::vector<double> f(4 * d);
  for (std::size_t i = 0; i < d; ++i) {
    f[i] = p[i];
    f[d + i] = h[i];
    f[2 * d + i] = std::abs(p[i] - h[i]);
    f[3 * d + i] = p[i] * h[i];
  }
  return f;
}

}  // namespace

std::vector<double> Featurize(std::span<const std::string> premise_tokens,
                              std::span<const std::string> hypothesis_tokens,
                              const EmbeddingTable& table) {
  std::vector<double> p, h;
  if (!MeanVector(premise_tokens, table, &p)) {
    throw FeaturizationError("premise has no in-vocabulary token");
  }
  if (!MeanVector(hypothesis_tokens, table, &h)) {
    throw FeaturizationError("hypothesis has no in-vocabulary token");
  }
  return CombineFeatures(p, h);
}

LinearModel LinearModel::Zeros(std::size_t feature_dim) {
  LinearModel m;
  m.feature_dim = feature_dim;
  m.weights.assign(3 * feature_dim, 0.0);
  return m;
}

std::array<double, 3> LinearLogits(const LinearModel& model, std::span<const double> features) {
  if (features.size() != model.feature_dim) {
    throw ValidationError("feature length " + std::to_string(features.size()) +
                          " does not match model dimension " +
                          std::to_string(model.feature_dim));
  }
  std::array<double, 3> logits = model.bias;
  for (std::size_t k = 0; k < 3; ++k) {
    const double* row = model.weights.data() + k * model.feature_dim;
    for (std::size_t f = 0; f < model.feature_dim; ++f) logits[k] += row[f] * features[f];
  }
  return logits;
}

ClassifierOutput LinearClassify(const LinearModel& model, std::span<const double> features) {
  return SoftmaxOutput(LinearLogits(model, features));
}

std::string FormatLinearModel(const LinearModel& model) {
  std::ostringstream out;
  out.precision(17);
  out << 3 << ' ' << model.feature_dim << '\n';
  for (std::size_t k = 0; k < 3; ++k) {
    out << model.bias[k];
    for (std::size_t f = 0; f < model.feature_dim; ++f) out << ' ' << model.w(k, f);
    out << '\n';
  }
  return out.str();
}

LinearModel ParseLinearModel(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::size_t classes = 0, dim = 0;
  if (!(in >> classes >> dim) || classes != 3 || dim == 0) {
    throw ParseError("linear model: header must be '3 <feature_dim>'");
  }
  LinearModel m = LinearModel::Zeros(dim);
  for (std::size_t k = 0; k < 3; ++k) {
    if (!(in >> m.bias[k])) throw ParseError("linear model: truncated row " + std::to_string(k));
    for (std::size_t f = 0; f < dim; ++f) {
      if (!(in >> m.w(k, f))) {
        throw ParseError("linear model: truncated row " + std::to_string(k));
      }
    }
  }
  std::string extra;
  if (in >> extra) throw ParseError("linear model: trailing data after 3 rows");
  for (double v : m.weights) {
    if (!std::isfinite(v)) throw ParseError("linear model: non-finite weight");
  }
  return m;
}

void SaveLinearModel(const std::string& path, const LinearModel& model) {
  WriteFile(path, FormatLinearModel(model));
}

LinearModel LoadLinearModel(const std::string& path) { return ParseLinearModel(ReadFile(path)); }

LinearPairClassifier::LinearPairClassifier(LinearModel model,
                                           std::shared_ptr<const EmbeddingTable> table)
    : model_(std::move(model)), table_(std::move(table)) {
  if (model_.feature_dim != 4 * table_->dim()) {
    throw ValidationError("linear model feature dimension " +
                          std::to_string(model_.feature_dim) + " does not match 4 x " +
                          std::to_string(table_->dim()) + " embedding dimension");
  }
}

ClassifierOutput LinearPairClassifier::Classify(std::string_view premise,
                                                std::string_view hypothesis) const {
  std::vector<double> p, h;
  const auto pt = Tokenize(premise);
  const auto ht = Tokenize(hypothesis);
  MeanVector(pt, *table_, &p);
  MeanVector(ht, *table_, &h);
  return LinearClassify(model_, CombineFeatures(p, h));
}

// ---------------------------------------------------------------------------
// Rule victims

bool IsNegationToken(std::string_view token) {
  return std::find(kNegationTokens.begin(), kNegationTokens.end(), token) !=
         kNegationTokens.end();
}

LexicalRules::LexicalRules(std::shared_ptr<const EmbeddingTable> table, WordSet stopwords,
                           double word_sim_floor)
    : table_(std::move(table)), stopwords_(std::move(stopwords)), floor_(word_sim_floor) {}

bool LexicalRules::IsContent(const std::string& token) const {
  return !IsPunctuation(token) && stopwords_.count(token) == 0;
}

std::optional<std::string> LexicalRules::TopNeighbor(const std::string& word) const {
  if (!table_) return std::nullopt;
  const auto self = table_->IndexOf(word);
  if (!self) return std::nullopt;
  const auto v = table_->vector(*self);
  std::optional<std::size_t> best;
  double best_sim = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < table_->size(); ++i) {
    if (i == *self) continue;
    const double s = Cosine(v, table_->vector(i));
    if (s > best_sim || (s == best_sim && best && table_->word(i) < table_->word(*best))) {
      best_sim = s;
      best = i;
    }
  }
  if (!best || best_sim < floor_) return std::nullopt;
  return table_->word(*best);
}

double LexicalRules::Similarity(const std::string& a, const std::string& b) const {
  if (!table_) return -2.0;
  auto va = table_->Lookup(a);
  auto vb = table_->Lookup(b);
  if (!va || !vb) return -2.0;
  return Cosine(*va, *vb);
}

LexicalRules::Analysis LexicalRules::Analyze(std::string_view premise,
                                             std::string_view hypothesis) const {
  const auto pt = Tokenize(premise);
  const auto ht = Tokenize(hypothesis);
  const std::set<std::string> premise_set(pt.begin(), pt.end());

  Analysis a;
  for (const auto& t : pt) {
    if (IsContent(t)) a.premise_content.push_back(t);
  }
  for (const auto& t : ht) {
    if (IsContent(t)) a.hypothesis_content.push_back(t);
  }

  for (const auto& t : ht) {
    if (IsNegationToken(t) && premise_set.count(t) == 0) {
      a.label = Label::kContradiction;
      for (const auto& h : a.hypothesis_content) {
        if (premise_set.count(h) == 0) a.uncovered.push_back(h);
      }
      return a;
    }
  }

  // Premise content words and their nearest neighbours.
  std::vector<std::pair<std::string, std::string>> neighbors;
  for (const auto& p : a.premise_content) {
    if (auto n = TopNeighbor(p)) neighbors.emplace_back(p, *n);
  }
  for (const auto& h : a.hypothesis_content) {
    if (premise_set.count(h) != 0) continue;
    auto it = std::find_if(neighbors.begin(), neighbors.end(),
                           [&](const auto& pn) { return pn.second == h; });
    if (it == neighbors.end()) {
      a.uncovered.push_back(h);
    } else if (std::find(a.aligned.begin(), a.aligned.end(), *it) == a.aligned.end()) {
      a.aligned.push_back(*it);
    }
  }
  a.label = a.uncovered.empty() ? Label::kEntailment : Label::kNeutral;
  return a;
}

ClassifierOutput RulePairClassifier::Classify(std::string_view premise,
                                              std::string_view hypothesis) const {
  return ConfidentOutput(rules_->Analyze(premise, hypothesis).label);
}

namespace {

// Words that would change the keyword reading of a templated explanation.
bool Reserved(const std::string& w) { return IsNegationToken(w) || w == "necessarily"; }

std::vector<std::string> Usable(const std::vector<std::string>& words) {
  std::vector<std::string> out;
  for (const auto& w : words) {
    if (!Reserved(w)) out.push_back(w);
  }
  return out;
}

}  // namespace

std::string TemplateExplainer::Explain(std::string_view premise,
                                       std::string_view hypothesis) const {
  const auto a = rules_->Analyze(premise, hypothesis);
  if (a.label == Label::kEntailment) {
    std::string text;
    for (const auto& [p, h] : a.aligned) {
      if (Reserved(p)) continue;
      if (!text.empty()) text += " and ";
      text += p + " is a " + h;
    }
    if (text.empty()) {
      const auto words = Usable(a.hypothesis_content);
      const std::string w = words.empty() ? "it" : words.front();
      text = w + " is a " + w;
    }
    return text;
  }

  // Highest-similarity pair of an unmatched premise word and an uncovered
  // hypothesis word.
  const auto hyp_tokens = Tokenize(hypothesis);
  const std::set<std::string> hyp_set(hyp_tokens.begin(), hyp_tokens.end());
  std::vector<std::string> xs;
  for (const auto& p : Usable(a.premise_content)) {
    if (hyp_set.count(p) == 0) xs.push_back(p);
  }
  if (xs.empty()) xs = Usable(a.premise_content);
  if (xs.empty()) xs = {"it"};
  std::vector<std::string> ys = Usable(a.uncovered);
  if (ys.empty()) ys = Usable(a.hypothesis_content);
  if (ys.empty()) ys = {"it"};

  std::string best_x = xs.front(), best_y = ys.front();
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& x : xs) {
    for (const auto& y : ys) {
      const double s = rules_->Similarity(x, y);
      if (s > best) {
        best = s;
        best_x = x;
        best_y = y;
      }
    }
  }
  if (a.label == Label::kContradiction) return best_x + " is not " + best_y;
  return best_x + " is not necessarily " + best_y;
}

ClassifierOutput KeywordExpl2Label(std::string_view explanation) {
  const auto tokens = Tokenize(explanation);
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    if (tokens[i] == "not" && tokens[i + 1] == "necessarily") {
      return ConfidentOutput(Label::kNeutral);
    }
  }
  for (const auto& t : tokens) {
    if (t == "not" || t == "cannot" || t == "no") return ConfidentOutput(Label::kContradiction);
  }
  return ConfidentOutput(Label::kEntailment);
}

}  // namespace explattack
