#ifndef EXPLATTACK_NLGMETRICS_H_
#define EXPLATTACK_NLGMETRICS_H_

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "explattack/corpus.h"

namespace explattack {

// Explanation-quality metrics. String overloads tokenize with Tokenize();
// token overloads take pre-tokenized text. Every score lies in [0, 1].

using Tokens = std::vector<std::string>;

// Sentence BLEU: clipped n-gram precisions against the per-n-gram maximum
// reference count, add-one smoothing for n >= 2 when the raw match count is
// zero, brevity penalty against the closest reference length (shorter wins
// ties). Throws UsageError on an empty reference set.
double Bleu(std::span<const std::string> candidate, std::span<const Tokens> references,
            int max_n = 4);
double Bleu(std::string_view candidate, std::span<const std::string> references, int max_n = 4);

std::size_t LcsLength(std::span<const std::string> a, std::span<const std::string> b);

// ROUGE-L F1, maximum over references.
double RougeL(std::span<const std::string> candidate, std::span<const Tokens> references);
double RougeL(std::string_view candidate, std::span<const std::string> references);

// Porter (1980) suffix-stripping stemmer over lowercase ASCII words.
std::string PorterStem(std::string_view word);

struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t exact_matches = 0;
  std::size_t chunks = 0;
  // (candidate index, reference index), sorted by candidate index.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

// Exact stage then stem stage: maximizes exact matches, then total matches,
// then minimizes chunks. Search is exhaustive up to `node_budget` DFS nodes,
// after which the best alignment found so far is returned.
MeteorAlignment MeteorAlign(std::span<const std::string> candidate,
                            std::span<const std::string> reference,
                            std::size_t node_budget = 200000);

double MeteorScore(std::size_t matches, std::size_t chunks, std::size_t candidate_len,
                   std::size_t reference_len);

double Meteor(std::span<const std::string> candidate, std::span<const Tokens> references);
double Meteor(std::string_view candidate, std::span<const std::string> references);

// Maps tokens to vectors; std::nullopt marks an out-of-vocabulary token.
class TokenEmbedder {
 public:
  virtual ~TokenEmbedder() = default;
  virtual std::vector<std::optional<std::vector<double>>> EmbedTokens(
      std::span<const std::string> tokens) const = 0;
};

class StaticTokenEmbedder : public TokenEmbedder {
 public:
  explicit StaticTokenEmbedder(const EmbeddingTable& table) : table_(table) {}
  std::vector<std::optional<std::vector<double>>> EmbedTokens(
      std::span<const std::string> tokens) const override;

 private:
  const EmbeddingTable& table_;
};

struct BertScoreResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Greedy cosine matching; OOV tokens contribute 0 and each token's best
// similarity is clamped to [0, 1]. Multi-reference: the reference with the
// highest F1 (first wins ties) supplies P and R.
BertScoreResult BertScore(std::span<const std::string> candidate,
                          std::span<const Tokens> references, const TokenEmbedder& embedder);
BertScoreResult BertScore(std::string_view candidate, std::span<const std::string> references,
                          const TokenEmbedder& embedder);

}  // namespace explattack

#endif  // EXPLATTACK_NLGMETRICS_H_
