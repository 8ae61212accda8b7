#include "explattack/corpus.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "explattack/errors.h"

namespace explattack {
namespace {

std::string Lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool IsSpace(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool IsPunct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::string_view Trim(std::string_view s) {
  while (!s.empty() && IsSpace(s.front())) s.remove_prefix(1);
  while (!s.empty() && IsSpace(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> SplitLines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

bool ParseDouble(std::string_view s, double* out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), *out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(*out);
}

}  // namespace

std::string_view LabelName(Label l) {
  switch (l) {
    case Label::kEntailment: return "entailment";
    case Label::kNeutral: return "neutral";
    case Label::kContradiction: return "contradiction";
  }
  return "entailment";
}

std::optional<Label> ParseLabel(std::string_view text) {
  const std::string s = Lower(Trim(text));
  if (s == "entailment" || s == "e") return Label::kEntailment;
  if (s == "neutral" || s == "n") return Label::kNeutral;
  if (s == "contradiction" || s == "c") return Label::kContradiction;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// CSV

std::vector<std::vector<std::string>> ParseCsv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;

  auto end_row = [&] {
    row.push_back(std::move(field));
    field.clear();
    // A bare empty line is not a record.
    if (!(row.size() == 1 && row[0].empty() && !field_started)) {
      rows.push_back(std::move(row));
    }
    row.clear();
    field_started = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        end_row();
        break;
      case '\n':
        end_row();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw ParseError("csv: unterminated quoted field at end of input");
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

std::string CsvEscape(std::string_view field) {
  const bool needs_quotes =
      field.find_first_of(",\"\r\n") != std::string_view::npos ||
      (!field.empty() && (IsSpace(field.front()) || IsSpace(field.back())));
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// ---------------------------------------------------------------------------
// e-SNLI

std::vector<NliExample> ParseEsnli(std::string_view text, const ColumnMap& columns) {
  const auto rows = ParseCsv(text);
  if (rows.empty()) throw ParseError("esnli: missing header row");
  const auto& header = rows[0];

  std::optional<std::size_t> id_col, premise_col, hypothesis_col, label_col;
  std::vector<std::size_t> expl_cols;
  const std::string prefix = Lower(columns.explanation_prefix);
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name = Lower(Trim(header[c]));
    if (name == Lower(columns.id)) id_col = c;
    else if (name == Lower(columns.premise)) premise_col = c;
    else if (name == Lower(columns.hypothesis)) hypothesis_col = c;
    else if (name == Lower(columns.label)) label_col = c;
    else if (!prefix.empty() && name.rfind(prefix, 0) == 0) expl_cols.push_back(c);
  }
  if (!premise_col || !hypothesis_col || !label_col || expl_cols.empty()) {
    throw ParseError("esnli: header must declare columns '" + columns.premise + "', '" +
                     columns.hypothesis + "', '" + columns.label +
                     "' and at least one '" + columns.explanation_prefix + "*' column");
  }

  std::vector<NliExample> examples;
  examples.reserve(rows.size() - 1);
  std::set<std::string> seen_ids;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = "esnli: row " + std::to_string(r);
    if (row.size() != header.size()) {
      throw ParseError(where + ": expected " + std::to_string(header.size()) +
                       " columns, found " + std::to_string(row.size()));
    }
    NliExample ex;
    ex.id = id_col ? std::string(Trim(row[*id_col])) : std::to_string(r - 1);
    if (ex.id.empty()) throw ValidationError(where + ": empty id");
    if (!seen_ids.insert(ex.id).second) {
      throw ValidationError(where + ": duplicate id '" + ex.id + "'");
    }
    ex.premise = row[*premise_col];
    ex.hypothesis = row[*hypothesis_col];
    const auto label = ParseLabel(row[*label_col]);
    if (!label) {
      throw ValidationError(where + ": unknown label '" + row[*label_col] + "'");
    }
    ex.gold_label = *label;
    if (Tokenize(ex.premise).empty()) throw ValidationError(where + ": empty premise");
    if (Tokenize(ex.hypothesis).empty()) throw ValidationError(where + ": empty hypothesis");
    for (std::size_t c : expl_cols) {
      if (!Trim(row[c]).empty()) ex.reference_explanations.push_back(row[c]);
    }
    if (ex.reference_explanations.empty()) {
      throw ValidationError(where + ": no reference explanation");
    }
    if (ex.reference_explanations.size() > kMaxReferences) {
      throw ValidationError(where + ": more than 3 reference explanations");
    }
    examples.push_back(std::move(ex));
  }
  return examples;
}

std::vector<NliExample> LoadEsnli(const std::string& path, const ColumnMap& columns) {
  return ParseEsnli(ReadFile(path), columns);
}

std::string FormatEsnli(std::span<const NliExample> examples, const ColumnMap& columns) {
  std::ostringstream out;
  out << CsvEscape(columns.id) << ',' << CsvEscape(columns.premise) << ','
      << CsvEscape(columns.hypothesis) << ',' << CsvEscape(columns.label);
  for (std::size_t i = 1; i <= kMaxReferences; ++i) {
    out << ',' << CsvEscape(columns.explanation_prefix + "_" + std::to_string(i));
  }
  out << '\n';
  for (const auto& ex : examples) {
    out << CsvEscape(ex.id) << ',' << CsvEscape(ex.premise) << ','
        << CsvEscape(ex.hypothesis) << ',' << LabelName(ex.gold_label);
    for (std::size_t i = 0; i < kMaxReferences; ++i) {
      out << ',';
      if (i < ex.reference_explanations.size()) out << CsvEscape(ex.reference_explanations[i]);
    }
    out << '\n';
  }
  return out.str();
}

void WriteEsnli(const std::string& path, std::span<const NliExample> examples,
                const ColumnMap& columns) {
  WriteFile(path, FormatEsnli(examples, columns));
}

// ---------------------------------------------------------------------------
// Tokenization

bool IsPunctuation(std::string_view token) {
  return !token.empty() && std::all_of(token.begin(), token.end(), IsPunct);
}

std::vector<std::string> Tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && IsSpace(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !IsSpace(text[j])) ++j;
    std::string_view chunk = text.substr(i, j - i);
    i = j;
    if (chunk.empty()) continue;
    if (chunk == kMaskToken) {
      tokens.emplace_back(kMaskToken);
      continue;
    }
    std::size_t lead = 0;
    while (lead < chunk.size() && IsPunct(chunk[lead])) ++lead;
    std::size_t trail = chunk.size();
    while (trail > lead && IsPunct(chunk[trail - 1])) --trail;
    for (std::size_t k = 0; k < lead; ++k) tokens.emplace_back(1, chunk[k]);
    if (trail > lead) tokens.push_back(Lower(chunk.substr(lead, trail - lead)));
    for (std::size_t k = trail; k < chunk.size(); ++k) tokens.emplace_back(1, chunk[k]);
  }
  return tokens;
}

std::string JoinTokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Embeddings

void EmbeddingTable::Add(std::string word, std::span<const double> vector) {
  if (vector.empty()) throw ValidationError("embedding for '" + word + "' is empty");
  if (words_.empty()) {
    dim_ = vector.size();
  } else if (vector.size() != dim_) {
    throw ValidationError("embedding for '" + word + "' has length " +
                          std::to_string(vector.size()) + ", expected " +
                          std::to_string(dim_));
  }
  if (index_.count(word) != 0) {
    throw ValidationError("duplicate embedding for '" + word + "'");
  }
  double sq = 0.0;
  for (double v : vector) sq += v * v;
  index_.emplace(word, words_.size());
  words_.push_back(std::move(word));
  data_.insert(data_.end(), vector.begin(), vector.end());
  norms_.push_back(std::sqrt(sq));
}

std::optional<std::size_t> EmbeddingTable::IndexOf(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::span<const double>> EmbeddingTable::Lookup(std::string_view word) const {
  auto i = IndexOf(word);
  if (!i) return std::nullopt;
  return vector(*i);
}

bool EmbeddingTable::Contains(std::string_view word) const {
  return IndexOf(word).has_value();
}

EmbeddingTable ParseEmbeddings(std::string_view text) {
  EmbeddingTable table;
  const auto lines = SplitLines(text);
  std::vector<double> values;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::string where = "embeddings: line " + std::to_string(n + 1);
    std::string_view line = Trim(lines[n]);
    if (line.empty()) continue;
    std::size_t pos = 0;
    auto next_field = [&]() -> std::string_view {
      while (pos < line.size() && IsSpace(line[pos])) ++pos;
      std::size_t start = pos;
      while (pos < line.size() && !IsSpace(line[pos])) ++pos;
      return line.substr(start, pos - start);
    };
    const std::string word(next_field());
    values.clear();
    for (std::string_view f = next_field(); !f.empty(); f = next_field()) {
      double v = 0.0;
      if (!ParseDouble(f, &v)) {
        throw ParseError(where + ": '" + std::string(f) + "' is not a finite real");
      }
      values.push_back(v);
    }
    if (values.empty()) throw ParseError(where + ": word without vector");
    if (!table.empty() && values.size() != table.dim()) {
      throw ParseError(where + ": vector length " + std::to_string(values.size()) +
                       " differs from dimension " + std::to_string(table.dim()));
    }
    if (table.Contains(word)) throw ParseError(where + ": duplicate word '" + word + "'");
    table.Add(word, values);
  }
  if (table.empty()) throw ParseError("embeddings: no entries");
  return table;
}

EmbeddingTable LoadEmbeddings(const std::string& path) {
  return ParseEmbeddings(ReadFile(path));
}

double Cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Word lists and POS lexicon

WordSet ParseWordList(std::string_view text) {
  WordSet words;
  for (auto line : SplitLines(text)) {
    auto w = Trim(line);
    if (!w.empty()) words.emplace(w);
  }
  return words;
}

WordSet LoadWordList(const std::string& path) { return ParseWordList(ReadFile(path)); }

std::optional<PosTag> ParsePosTag(std::string_view text) {
  std::string s(Trim(text));
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (s == "NOUN") return PosTag::kNoun;
  if (s == "VERB") return PosTag::kVerb;
  if (s == "ADJ") return PosTag::kAdj;
  if (s == "ADV") return PosTag::kAdv;
  if (s == "OTHER") return PosTag::kOther;
  return std::nullopt;
}

void PosLexicon::Add(const std::string& word, const std::set<PosTag>& tags) {
  if (tags.empty()) throw ValidationError("pos lexicon: empty tag set for '" + word + "'");
  entries_[word].insert(tags.begin(), tags.end());
}

const std::set<PosTag>* PosLexicon::Find(std::string_view word) const {
  auto it = entries_.find(word);
  return it == entries_.end() ? nullptr : &it->second;
}

PosLexicon ParsePosLexicon(std::string_view text) {
  PosLexicon lexicon;
  const auto lines = SplitLines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::string where = "pos lexicon: line " + std::to_string(n + 1);
    std::string_view line = lines[n];
    if (Trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw ParseError(where + ": missing TAB separator");
    const std::string word(Trim(line.substr(0, tab)));
    if (word.empty()) throw ParseError(where + ": empty word");
    std::set<PosTag> tags;
    std::string_view rest = line.substr(tab + 1);
    while (true) {
      const auto comma = rest.find(',');
      auto piece = Trim(rest.substr(0, comma));
      if (!piece.empty()) {
        auto tag = ParsePosTag(piece);
        if (!tag) throw ParseError(where + ": unknown tag '" + std::string(piece) + "'");
        tags.insert(*tag);
      }
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (tags.empty()) throw ParseError(where + ": no tags for '" + word + "'");
    lexicon.Add(word, tags);
  }
  return lexicon;
}

PosLexicon LoadPosLexicon(const std::string& path) {
  return ParsePosLexicon(ReadFile(path));
}

// ---------------------------------------------------------------------------
// File helpers

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return buf.str();
}

void WriteFile(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("error writing '" + path + "'");
}

}  // namespace explattack
