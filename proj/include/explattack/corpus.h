#ifndef EXPLATTACK_CORPUS_H_
#define EXPLATTACK_CORPUS_H_

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace explattack {

// Ordinal order doubles as the argmax tie-break order.
enum class Label { kEntailment = 0, kNeutral = 1, kContradiction = 2 };

inline constexpr std::array<Label, 3> kAllLabels = {
    Label::kEntailment, Label::kNeutral, Label::kContradiction};

inline constexpr std::size_t LabelIndex(Label l) {
  return static_cast<std::size_t>(l);
}

// Lowercase full name: "entailment", "neutral", "contradiction".
std::string_view LabelName(Label l);

// Case-insensitive over the full names and the initials E/N/C.
std::optional<Label> ParseLabel(std::string_view text);

struct NliExample {
  std::string id;
  std::string premise;
  std::string hypothesis;
  Label gold_label = Label::kEntailment;
  std::vector<std::string> reference_explanations;  // 1..3 entries

  bool operator==(const NliExample&) const = default;
};

// Header names used to locate e-SNLI fields. Matching is case-insensitive.
// Every column whose name starts with `explanation_prefix` is an explanation
// column, in header order.
struct ColumnMap {
  std::string id = "id";
  std::string premise = "premise";
  std::string hypothesis = "hypothesis";
  std::string label = "label";
  std::string explanation_prefix = "explanation";
};

inline constexpr std::size_t kMaxReferences = 3;

// Comma-separated, double-quote escaped (RFC 4180). Fields may contain
// embedded newlines when quoted.
std::vector<std::vector<std::string>> ParseCsv(std::string_view text);
std::string CsvEscape(std::string_view field);

std::vector<NliExample> LoadEsnli(const std::string& path,
                                  const ColumnMap& columns = {});
std::vector<NliExample> ParseEsnli(std::string_view text,
                                   const ColumnMap& columns = {});
// Writes id, premise, hypothesis, label, explanation_1..3 under the names in
// `columns` (explanation columns are prefix + "_" + index).
std::string FormatEsnli(std::span<const NliExample> examples,
                        const ColumnMap& columns = {});
void WriteEsnli(const std::string& path, std::span<const NliExample> examples,
                const ColumnMap& columns = {});

// Lowercases ASCII, splits on whitespace and peels leading and trailing
// punctuation off each chunk, one token per punctuation character.
// Apostrophes and other punctuation strictly inside a chunk stay in place
// ("don't", "u.s.a"). The literal mask token "[MASK]" is kept intact.
std::vector<std::string> Tokenize(std::string_view text);

std::string JoinTokens(std::span<const std::string> tokens);

// True if the token is non-empty and consists only of ASCII punctuation.
bool IsPunctuation(std::string_view token);

inline constexpr std::string_view kMaskToken = "[MASK]";

class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  // Throws ValidationError on dimension mismatch or duplicate word.
  void Add(std::string word, std::span<const double> vector);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }

  // Absent words yield std::nullopt, never a zero vector.
  std::optional<std::span<const double>> Lookup(std::string_view word) const;
  bool Contains(std::string_view word) const;

  const std::string& word(std::size_t i) const { return words_[i]; }
  std::span<const double> vector(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  double norm(std::size_t i) const { return norms_[i]; }
  std::optional<std::size_t> IndexOf(std::string_view word) const;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> words_;
  std::vector<double> data_;
  std::vector<double> norms_;
  std::unordered_map<std::string, std::size_t> index_;
};

EmbeddingTable LoadEmbeddings(const std::string& path);
EmbeddingTable ParseEmbeddings(std::string_view text);

double Cosine(std::span<const double> a, std::span<const double> b);

using WordSet = std::unordered_set<std::string>;

// One word per line; blank lines ignored, surrounding whitespace trimmed.
WordSet LoadWordList(const std::string& path);
WordSet ParseWordList(std::string_view text);

enum class PosTag { kNoun, kVerb, kAdj, kAdv, kOther };

std::optional<PosTag> ParsePosTag(std::string_view text);

class PosLexicon {
 public:
  // Repeated words merge their tag sets.
  void Add(const std::string& word, const std::set<PosTag>& tags);
  const std::set<PosTag>* Find(std::string_view word) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, std::set<PosTag>, std::less<>> entries_;
};

// "word<TAB>TAG[,TAG...]" per line.
PosLexicon LoadPosLexicon(const std::string& path);
PosLexicon ParsePosLexicon(std::string_view text);

std::string ReadFile(const std::string& path);
void WriteFile(const std::string& path, std::string_view content);

}  // namespace explattack

#endif  // EXPLATTACK_CORPUS_H_
