#include "explattack/nlgmetrics.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "explattack/errors.h"

namespace explattack {
namespace {

std::vector<Tokens> TokenizeAll(std::span<const std::string> texts) {
  std::vector<Tokens> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(Tokenize(t));
  return out;
}

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts CountNgrams(std::span<const std::string> tokens, std::size_t n) {
  NgramCounts counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
  }
  return counts;
}

}  // namespace

// ---------------------------------------------------------------------------
// BLEU

double Bleu(std::span<const std::string> candidate, std::span<const Tokens> references,
            int max_n) {
  if (references.empty()) throw UsageError("bleu: at least one reference required");
  if (max_n < 1) throw UsageError("bleu: max_n must be >= 1");
  const std::size_t c = candidate.size();
  if (c == 0) return 0.0;

  double log_sum = 0.0;
  for (std::size_t n = 1; n <= static_cast<std::size_t>(max_n); ++n) {
    const auto cand_counts = CountNgrams(candidate, n);
    NgramCounts max_ref;
    for (const auto& ref : references) {
      for (const auto& [gram, count] : CountNgrams(ref, n)) {
        auto& slot = max_ref[gram];
        slot = std::max(slot, count);
      }
    }
    std::size_t clipped = 0;
    for (const auto& [gram, count] : cand_counts) {
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) clipped += std::min(count, it->second);
    }
    const std::size_t total = c >= n ? c - n + 1 : 0;
    double p;
    if (clipped == 0) {
      if (n == 1) return 0.0;
      p = 1.0 / static_cast<double>(total + 1);
    } else {
      p = static_cast<double>(clipped) / static_cast<double>(total);
    }
    log_sum += std::log(p) / max_n;
  }

  // Closest reference length, shorter on ties.
  std::size_t r = references[0].size();
  for (const auto& ref : references) {
    const auto d = [c](std::size_t len) { return len > c ? len - c : c - len; };
    if (d(ref.size()) < d(r) || (d(ref.size()) == d(r) && ref.size() < r)) r = ref.size();
  }
  const double bp =
      c < r ? std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c)) : 1.0;
  return std::clamp(bp * std::exp(log_sum), 0.0, 1.0);
}

double Bleu(std::string_view candidate, std::span<const std::string> references, int max_n) {
  const auto refs = TokenizeAll(references);
  return Bleu(Tokenize(candidate), refs, max_n);
}

// ---------------------------------------------------------------------------
// ROUGE-L

std::size_t LcsLength(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double RougeL(std::span<const std::string> candidate, std::span<const Tokens> references) {
  if (references.empty()) throw UsageError("rouge-l: at least one reference required");
  if (candidate.empty()) return 0.0;
  double best = 0.0;
  for (const auto& ref : references) {
    if (ref.empty()) continue;
    const auto lcs = static_cast<double>(LcsLength(candidate, ref));
    if (lcs == 0.0) continue;
    const double p = lcs / static_cast<double>(candidate.size());
    const double r = lcs / static_cast<double>(ref.size());
    best = std::max(best, 2.0 * p * r / (p + r));
  }
  return best;
}

double RougeL(std::string_view candidate, std::span<const std::string> references) {
  const auto refs = TokenizeAll(references);
  return RougeL(Tokenize(candidate), refs);
}

// ---------------------------------------------------------------------------
// METEOR

namespace {

class MeteorSearch {
 public:
  MeteorSearch(std::span<const std::string> cand, std::span<const std::string> ref,
               std::size_t budget)
      : cand_(cand), ref_(ref), budget_(budget), ref_used_(ref.size(), false) {
    for (const auto& t : cand) cand_stem_.push_back(PorterStem(t));
    for (const auto& t : ref) ref_stem_.push_back(PorterStem(t));
  }

  MeteorAlignment Run() {
    Dfs(0);
    MeteorAlignment out;
    out.pairs = best_pairs_;
    out.matches = best_pairs_.size();
    out.exact_matches = best_exact_;
    out.chunks = best_chunks_;
    return out;
  }

 private:
  bool Exact(std::size_t i, std::size_t j) const { return cand_[i] == ref_[j]; }
  bool Stem(std::size_t i, std::size_t j) const { return cand_stem_[i] == ref_stem_[j]; }

  // Optimistic bounds: every remaining candidate token with a free partner
  // gets matched.
  void Bounds(std::size_t from, std::size_t* exact, std::size_t* total) const {
    *exact = exact_;
    *total = pairs_.size();
    for (std::size_t i = from; i < cand_.size(); ++i) {
      bool any_exact = false, any = false;
      for (std::size_t j = 0; j < ref_.size(); ++j) {
        if (ref_used_[j]) continue;
        if (Exact(i, j)) any_exact = any = true;
        else if (Stem(i, j)) any = true;
      }
      *exact += any_exact ? 1 : 0;
      *total += any ? 1 : 0;
    }
  }

  bool Better(std::size_t exact, std::size_t total, std::size_t chunks) const {
    if (!have_best_) return true;
    if (exact != best_exact_) return exact > best_exact_;
    if (total != best_pairs_.size()) return total > best_pairs_.size();
    return chunks < best_chunks_;
  }

  void Dfs(std::size_t i) {
    if (nodes_++ >= budget_ && have_best_) return;
    if (i == cand_.size()) {
      if (Better(exact_, pairs_.size(), chunks_)) {
        have_best_ = true;
        best_exact_ = exact_;
        best_chunks_ = chunks_;
        best_pairs_ = pairs_;
      }
      return;
    }
    if (have_best_) {
      std::size_t ub_exact, ub_total;
      Bounds(i, &ub_exact, &ub_total);
      if (ub_exact < best_exact_) return;
      if (ub_exact == best_exact_ && ub_total < best_pairs_.size()) return;
      if (ub_exact == best_exact_ && ub_total == best_pairs_.size() && chunks_ >= best_chunks_) {
        return;
      }
    }
    for (int stage = 0; stage < 2; ++stage) {
      for (std::size_t j = 0; j < ref_.size(); ++j) {
        if (ref_used_[j]) continue;
        const bool exact = Exact(i, j);
        if (stage == 0 ? !exact : (exact || !Stem(i, j))) continue;
        const bool extends = !pairs_.empty() && pairs_.back().first + 1 == i &&
                             pairs_.back().second + 1 == j;
        ref_used_[j] = true;
        pairs_.emplace_back(i, j);
        exact_ += exact ? 1 : 0;
        chunks_ += extends ? 0 : 1;
        Dfs(i + 1);
        chunks_ -= extends ? 0 : 1;
        exact_ -= exact ? 1 : 0;
        pairs_.pop_back();
        ref_used_[j] = false;
      }
    }
    Dfs(i + 1);
  }

  std::span<const std::string> cand_, ref_;
  std::vector<std::string> cand_stem_, ref_stem_;
  std::size_t budget_;
  std::size_t nodes_ = 0;

  std::vector<bool> ref_used_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  std::size_t exact_ = 0;
  std::size_t chunks_ = 0;

  bool have_best_ = false;
  std::vector<std::pair<std::size_t, std::size_t>> best_pairs_;
  std::size_t best_exact_ = 0;
  std::size_t best_chunks_ = 0;
};

}  // namespace

MeteorAlignment MeteorAlign(std::span<const std::string> candidate,
                            std::span<const std::string> reference, std::size_t node_budget) {
  return MeteorSearch(candidate, reference, node_budget).Run();
}

double MeteorScore(std::size_t matches, std::size_t chunks, std::size_t candidate_len,
                   std::size_t reference_len) {
  if (matches == 0 || candidate_len == 0 || reference_len == 0) return 0.0;
  const double m = static_cast<double>(matches);
  const double p = m / static_cast<double>(candidate_len);
  const double r = m / static_cast<double>(reference_len);
  const double fmean = 10.0 * p * r / (r + 9.0 * p);
  const double frag = static_cast<double>(chunks) / m;
  const double penalty = 0.5 * frag * frag * frag;
  return std::clamp(fmean * (1.0 - penalty), 0.0, 1.0);
}

double Meteor(std::span<const std::string> candidate, std::span<const Tokens> references) {
  if (references.empty()) throw UsageError("meteor: at least one reference required");
  if (candidate.empty()) return 0.0;
  double best = 0.0;
  for (const auto& ref : references) {
    const auto a = MeteorAlign(candidate, ref);
    best = std::max(best, MeteorScore(a.matches, a.chunks, candidate.size(), ref.size()));
  }
  return best;
}

double Meteor(std::string_view candidate, std::span<const std::string> references) {
  const auto refs = TokenizeAll(references);
  return Meteor(Tokenize(candidate), refs);
}

// ---------------------------------------------------------------------------
// BERTScore

std::vector<std::optional<std::vector<double>>> StaticTokenEmbedder::EmbedTokens(
    std::span<const std::string> tokens) const {
  std::vector<std::optional<std::vector<double>>> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (auto v = table_.Lookup(t)) {
      out.emplace_back(std::vector<double>(v->begin(), v->end()));
    } else {
      out.emplace_back(std::nullopt);
    }
  }
  return out;
}

namespace {

using Embedded = std::vector<std::optional<std::vector<double>>>;

// Mean over `from` of the best clamped cosine against `to`.
double GreedyMatch(const Embedded& from, const Embedded& to) {
  if (from.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& a : from) {
    double best = 0.0;
    if (a) {
      for (const auto& b : to) {
        if (b) best = std::max(best, Cosine(*a, *b));
      }
    }
    sum += std::min(best, 1.0);
  }
  return sum / static_cast<double>(from.size());
}

}  // namespace

BertScoreResult BertScore(std::span<const std::string> candidate,
                          std::span<const Tokens> references, const TokenEmbedder& embedder) {
  BertScoreResult best;
  if (candidate.empty()) return best;
  const auto cand = embedder.EmbedTokens(candidate);
  bool first = true;
  for (const auto& ref_tokens : references) {
    if (ref_tokens.empty()) continue;
    const auto ref = embedder.EmbedTokens(ref_tokens);
    BertScoreResult r;
    r.precision = GreedyMatch(cand, ref);
    r.recall = GreedyMatch(ref, cand);
    r.f1 = r.precision + r.recall > 0.0
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    if (first || r.f1 > best.f1) best = r;
    first = false;
  }
  return best;
}

BertScoreResult BertScore(std::string_view candidate, std::span<const std::string> references,
                          const TokenEmbedder& embedder) {
  const auto refs = TokenizeAll(references);
  return BertScore(Tokenize(candidate), refs, embedder);
}

}  // namespace explattack
