#include "explattack/attack.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>

#include "explattack/errors.h"

namespace explattack {

std::string_view RecipeName(Recipe r) {
  return r == Recipe::kTextFoolerStyle ? "textfooler" : "bertattack";
}

std::optional<Recipe> ParseRecipe(std::string_view s) {
  if (s == "textfooler") return Recipe::kTextFoolerStyle;
  if (s == "bertattack" || s == "bert-attack") return Recipe::kBertAttackStyle;
  return std::nullopt;
}

std::string_view TargetName(TargetField t) {
  return t == TargetField::kPremise ? "premise" : "hypothesis";
}

std::optional<TargetField> ParseTarget(std::string_view s) {
  if (s == "premise" || s == "p" || s == "P") return TargetField::kPremise;
  if (s == "hypothesis" || s == "h" || s == "H") return TargetField::kHypothesis;
  return std::nullopt;
}

std::string_view StatusName(AttackStatus s) {
  switch (s) {
    case AttackStatus::kSuccess: return "success";
    case AttackStatus::kFailed: return "failed";
    case AttackStatus::kSkipped: return "skipped";
    case AttackStatus::kErrored: return "errored";
  }
  return "failed";
}

std::optional<AttackStatus> ParseStatus(std::string_view s) {
  if (s == "success") return AttackStatus::kSuccess;
  if (s == "failed") return AttackStatus::kFailed;
  if (s == "skipped") return AttackStatus::kSkipped;
  if (s == "errored") return AttackStatus::kErrored;
  return std::nullopt;
}

void AttackConfig::Validate() const {
  if (max_candidates < 1) throw UsageError("max-candidates must be >= 1");
  if (mlm_top_k < 1) throw UsageError("mlm-k must be >= 1");
  if (!(sentence_sim_threshold >= 0.0 && sentence_sim_threshold <= 1.0)) {
    throw UsageError("delta must be in [0, 1]");
  }
  if (!(word_sim_floor >= -1.0 && word_sim_floor <= 1.0)) {
    throw UsageError("word-sim-floor must be in [-1, 1]");
  }
  if (!(max_perturb_fraction > 0.0 && max_perturb_fraction <= 1.0)) {
    throw UsageError("max-perturb-fraction must be in (0, 1]");
  }
}

std::string ApplySubstitutions(std::string_view original_text,
                               std::span<const Substitution> subs) {
  auto tokens = Tokenize(original_text);
  for (const auto& s : subs) {
    if (s.position >= tokens.size()) throw ValidationError("substitution position out of range");
    tokens[s.position] = s.replacement;
  }
  return JoinTokens(tokens);
}

// ---------------------------------------------------------------------------
// Resources

std::vector<double> MeanEmbeddingEncoder::Encode(std::string_view text) const {
  std::vector<double> mean(table_->dim(), 0.0);
  std::size_t known = 0;
  for (const auto& t : Tokenize(text)) {
    auto v = table_->Lookup(t);
    if (!v) continue;
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += (*v)[i];
    ++known;
  }
  if (known == 0) throw SimilarityError("no in-vocabulary token in '" + std::string(text) + "'");
  for (double& x : mean) x /= static_cast<double>(known);
  return mean;
}

double SentenceSimilarity(std::string_view a, std::string_view b, const SentenceEncoder& encoder) {
  const auto va = encoder.Encode(a);
  const auto vb = encoder.Encode(b);
  if (va.size() != vb.size()) throw SimilarityError("encoder returned vectors of different sizes");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    dot += va[i] * vb[i];
    na += va[i] * va[i];
    nb += vb[i] * vb[i];
  }
  if (na == 0.0 || nb == 0.0) throw SimilarityError("zero sentence vector");
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

std::vector<std::string> EmbeddingCandidates(std::string_view word, const EmbeddingTable& table,
                                             int n, double word_sim_floor) {
  const auto self = table.IndexOf(word);
  if (!self || n <= 0) return {};
  const auto v = table.vector(*self);
  const double vn = table.norm(*self);
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (i == *self) continue;
    double cos = 0.0;
    if (vn > 0.0 && table.norm(i) > 0.0) {
      const auto u = table.vector(i);
      double dot = 0.0;
      for (std::size_t d = 0; d < u.size(); ++d) dot += v[d] * u[d];
      cos = std::clamp(dot / (vn * table.norm(i)), -1.0, 1.0);
    }
    if (cos >= word_sim_floor) scored.emplace_back(cos, i);
  }
  std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return table.word(a.second) < table.word(b.second);
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scored.size() && out.size() < static_cast<std::size_t>(n); ++i) {
    out.push_back(table.word(scored[i].second));
  }
  return out;
}

std::vector<std::string> EmbeddingNeighborProvider::Candidates(
    std::span<const std::string> tokens, std::size_t position, int k) const {
  if (position >= tokens.size()) return {};
  return EmbeddingCandidates(tokens[position], *table_, k, floor_);
}

std::vector<std::string> MlmCandidates(std::span<const std::string> tokens, std::size_t position,
                                       int k, const CandidateProvider& provider) {
  if (k < 1) throw UsageError("mlm-k must be >= 1");
  if (position >= tokens.size()) throw UsageError("mask position out of range");
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (auto c : provider.Candidates(tokens, position, k)) {
    for (char& ch : c) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (c.empty() || c == tokens[position] || IsPunctuation(c)) continue;
    if (c.find("##") != std::string::npos) continue;
    if (std::any_of(c.begin(), c.end(), [](char ch) {
          return std::isspace(static_cast<unsigned char>(ch)) != 0;
        })) {
      continue;
    }
    if (!seen.insert(c).second) continue;
    out.push_back(std::move(c));
    if (out.size() == static_cast<std::size_t>(k)) break;
  }
  return out;
}

bool PosConsistent(std::string_view original, std::string_view candidate,
                   const PosLexicon& lexicon) {
  const auto* a = lexicon.Find(original);
  const auto* b = lexicon.Find(candidate);
  if (a == nullptr || b == nullptr) return true;
  return std::any_of(a->begin(), a->end(), [b](PosTag t) { return b->count(t) != 0; });
}

// ---------------------------------------------------------------------------
// Search

namespace {

using ProbeFn = std::function<Probe(const std::string& target_text)>;

bool Eligible(const std::string& token, const WordSet& stopwords) {
  return !IsPunctuation(token) && stopwords.count(token) == 0;
}

std::vector<RankedPosition> RankFromOriginal(std::span<const std::string> tokens,
                                             const ProbeFn& probe,
                                             const ClassifierOutput& original, Label gold,
                                             const WordSet& stopwords, ImportanceMode mode) {
  std::vector<RankedPosition> ranked;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!Eligible(tokens[i], stopwords)) continue;
    std::vector<std::string> probe_tokens(tokens.begin(), tokens.end());
    if (mode == ImportanceMode::kDeletion) {
      probe_tokens.erase(probe_tokens.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      probe_tokens[i] = std::string(kMaskToken);
    }
    const auto out = probe(JoinTokens(probe_tokens)).output;
    double score = original.prob(gold) - out.prob(gold);
    if (out.label != gold) score += out.prob(out.label) - original.prob(out.label);
    ranked.push_back({i, score});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedPosition& a, const RankedPosition& b) {
                     return a.score > b.score;
                   });
  return ranked;
}

struct Trial {
  std::string word;
  std::string text;
  double similarity;
  Probe probe;
};

}  // namespace

std::vector<RankedPosition> RankWordImportance(std::span<const std::string> tokens,
                                               const PairClassifier& victim,
                                               std::string_view other_field,
                                               TargetField target, Label gold,
                                               const WordSet& stopwords, ImportanceMode mode) {
  if (tokens.empty()) throw UsageError("cannot rank an empty token sequence");
  const std::string other(other_field);
  ProbeFn probe = [&](const std::string& text) {
    return target == TargetField::kPremise ? victim.ProbePair(text, other)
                                           : victim.ProbePair(other, text);
  };
  const auto original = probe(JoinTokens(tokens)).output;
  return RankFromOriginal(tokens, probe, original, gold, stopwords, mode);
}

AttackRecord GreedyAttack(const NliExample& example, const PairClassifier& victim,
                          const AttackConfig& config, const AttackResources& resources,
                          AttackTrace* trace) {
  config.Validate();
  if (!resources.encoder) throw UsageError("attack needs a sentence encoder");
  if (config.recipe == Recipe::kTextFoolerStyle && !resources.embeddings) {
    throw UsageError("textfooler recipe needs an embedding table");
  }
  if (config.recipe == Recipe::kBertAttackStyle && !resources.mlm_provider) {
    throw UsageError("bertattack recipe needs a candidate provider");
  }
  const bool on_premise = config.target_field == TargetField::kPremise;
  const auto tokens = Tokenize(on_premise ? example.premise : example.hypothesis);
  const std::string other = JoinTokens(Tokenize(on_premise ? example.hypothesis : example.premise));
  const Label gold = example.gold_label;

  AttackRecord rec;
  rec.example_id = example.id;
  rec.original_text = JoinTokens(tokens);
  rec.perturbed_text = rec.original_text;

  ProbeFn probe = [&](const std::string& text) {
    ++rec.queries;
    return on_premise ? victim.ProbePair(text, other) : victim.ProbePair(other, text);
  };

  try {
    const Probe original = probe(rec.original_text);
    rec.orig_output = rec.final_output = original.output;
    rec.orig_explanation = rec.final_explanation = original.explanation;
    if (original.output.label != gold) {
      rec.status = AttackStatus::kSkipped;
      return rec;
    }

    const auto mode = config.recipe == Recipe::kTextFoolerStyle ? ImportanceMode::kDeletion
                                                                : ImportanceMode::kMasking;
    const auto ranking =
        RankFromOriginal(tokens, probe, original.output, gold, resources.stopwords, mode);

    const auto max_subs = static_cast<std::size_t>(
        std::floor(config.max_perturb_fraction * static_cast<double>(tokens.size()) + 1e-9));
    std::vector<std::string> current = tokens;
    double current_pgold = original.output.prob(gold);
    bool flipped = false;

    for (const auto& ranked : ranking) {
      if (rec.substitutions.size() >= max_subs) break;
      const std::size_t pos = ranked.index;
      const std::string& word = current[pos];

      std::vector<std::string> generated;
      if (config.recipe == Recipe::kTextFoolerStyle) {
        for (auto& c : EmbeddingCandidates(word, *resources.embeddings, config.max_candidates,
                                           config.word_sim_floor)) {
          if (PosConsistent(word, c, resources.pos_lexicon)) generated.push_back(std::move(c));
        }
      } else {
        generated = MlmCandidates(current, pos, config.mlm_top_k, *resources.mlm_provider);
      }

      std::vector<Trial> trials;
      for (const auto& c : generated) {
        std::vector<std::string> trial_tokens = current;
        trial_tokens[pos] = c;
        std::string text = JoinTokens(trial_tokens);
        double sim;
        try {
          sim = SentenceSimilarity(rec.original_text, text, *resources.encoder);
        } catch (const SimilarityError&) {
          continue;
        }
        if (sim >= config.sentence_sim_threshold) trials.push_back({c, std::move(text), sim, {}});
      }
      if (trace != nullptr) {
        DecisionTrace d{pos, generated, {}};
        for (const auto& t : trials) d.surviving.push_back(t.word);
        trace->decisions.push_back(std::move(d));
      }
      if (trials.empty()) continue;

      for (auto& t : trials) t.probe = probe(t.text);

      const Trial* chosen = nullptr;
      for (const auto& t : trials) {
        if (t.probe.output.label == gold) continue;
        if (chosen == nullptr || t.similarity > chosen->similarity ||
            (t.similarity == chosen->similarity && t.word < chosen->word)) {
          chosen = &t;
        }
      }
      if (chosen != nullptr) {
        flipped = true;
      } else {
        for (const auto& t : trials) {
          const double p = t.probe.output.prob(gold);
          if (chosen == nullptr || p < chosen->probe.output.prob(gold) ||
              (p == chosen->probe.output.prob(gold) &&
               (t.similarity > chosen->similarity ||
                (t.similarity == chosen->similarity && t.word < chosen->word)))) {
            chosen = &t;
          }
        }
        if (!(chosen->probe.output.prob(gold) < current_pgold)) continue;
      }

      rec.substitutions.push_back({pos, word, chosen->word});
      current[pos] = chosen->word;
      current_pgold = chosen->probe.output.prob(gold);
      rec.perturbed_text = chosen->text;
      rec.sentence_similarity = chosen->similarity;
      rec.final_output = chosen->probe.output;
      rec.final_explanation = chosen->probe.explanation;
      if (flipped) break;
    }
    rec.status = flipped ? AttackStatus::kSuccess : AttackStatus::kFailed;
  } catch (const std::exception& e) {
    rec.status = AttackStatus::kErrored;
    rec.error = e.what();
  }
  return rec;
}

AttackRecord AttackExplainThenPredict(const NliExample& example, const PairClassifier& pipeline,
                                      const AttackConfig& config,
                                      const AttackResources& resources, AttackTrace* trace) {
  AttackRecord rec = GreedyAttack(example, pipeline, config, resources, trace);
  if (rec.status == AttackStatus::kErrored) return rec;
  if (!rec.orig_explanation || !rec.final_explanation) {
    throw UsageError("victim does not expose explanations; not an explain-then-predict pipeline");
  }
  if (*rec.orig_explanation == *rec.final_explanation &&
      rec.orig_output.label != rec.final_output.label) {
    throw Error("explanation mediation violated for example " + rec.example_id +
                ": unchanged explanation but label changed");
  }
  return rec;
}

}  // namespace explattack
