#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mmtm/error.hpp"
#include "mmtm/expr.hpp"
#include "mmtm/rational.hpp"

namespace mmtm {

/// One corpus line before validation.
struct RawRecord {
  std::string id;
  std::string question;
  std::string equation;
  Rational answer;
};

struct MwpRecord {
  std::string id;
  std::string question;
  std::string masked_question;
  /// Infix over placeholders (raw numbers already aligned).
  std::string equation;
  Rational answer;
  std::vector<Rational> quantities;
  std::size_t op_count = 0;
  std::set<Op> op_types;
};

/// Gold tree of a validated record.
ExprTree gold_tree(const MwpRecord& record);

struct MaskedText {
  std::string text;
  std::vector<Rational> quantities;
};

/// Lowercases and replaces each numeric literal, left to right, by number0,
/// number1, ... Comma-grouped literals ("1,000") are read without commas; a
/// leading sign is never part of a literal.
MaskedText extract_numbers(std::string_view text);

/// Lowercase whitespace split with . , ? ! as standalone tokens.
std::vector<std::string> tokenize(std::string_view masked_text);

/// Rewrites raw numbers in an equation as placeholders. The k-th occurrence of
/// a value maps to the k-th quantity with that value (or its first one when
/// the question has fewer); values absent from the question stay constants.
/// A leading "x =" is removed.
std::string align_equation(std::string_view equation, std::span<const Rational> quantities);

/// Masks, aligns, parses and checks the gold answer. Throws AnswerMismatch or
/// the parse error of the equation.
MwpRecord make_record(const RawRecord& raw);

struct QuarantineEntry {
  std::size_t line = 0;
  std::string id;
  ErrorKind kind = ErrorKind::MalformedRecord;
  std::string message;
};

struct CorpusLoad {
  std::vector<MwpRecord> records;
  std::vector<QuarantineEntry> quarantine;
};

/// Reads a JSONL corpus with fields id, question, equation, answer (and an
/// optional body that is prepended to the question). Bad lines are
/// quarantined. Throws Error(Io) when the file cannot be read.
CorpusLoad load_corpus(const std::filesystem::path& path);
CorpusLoad load_corpus_text(std::string_view jsonl);

void write_corpus(const std::filesystem::path& path, std::span<const RawRecord> records);
void write_quarantine(const std::filesystem::path& path, std::span<const QuarantineEntry> entries);

/// Token <-> id table with PAD, BOS, EOS, UNK at ids 0..3.
class TokenTable {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kReserved = 4;

  TokenTable();
  explicit TokenTable(std::vector<std::string> tokens);

  int add(const std::string& token);
  std::optional<int> find(std::string_view token) const;
  /// UNK for unknown tokens.
  int id(std::string_view token) const;
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  static bool is_reserved(std::string_view token);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

struct Vocab {
  TokenTable source;
  TokenTable target;

  /// FNV-1a over both token lists; identifies the vocab in checkpoints.
  std::uint64_t hash() const;
  std::string to_json() const;
  static Vocab from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);
};

Vocab build_vocab(std::span<const MwpRecord> records, std::size_t min_count = 1);

struct TaskExample {
  std::vector<int> source_ids;
  /// BOS-prefixed and EOS-terminated.
  std::vector<int> target_ids;
  Traversal task = Traversal::PreOrder;
  std::string record_id;
};

struct LabeledExample {
  std::string record_id;
  Traversal task = Traversal::PreOrder;
  std::vector<std::string> source;
  std::vector<std::string> target;
};

using TaskDatasets = std::array<std::vector<TaskExample>, 3>;
using LabeledDatasets = std::array<std::vector<LabeledExample>, 3>;

inline std::vector<TaskExample>& dataset_for(TaskDatasets& d, Traversal t) { return d[static_cast<int>(t)]; }
inline const std::vector<TaskExample>& dataset_for(const TaskDatasets& d, Traversal t) {
  return d[static_cast<int>(t)];
}

/// One example per record per traversal, in record order.
LabeledDatasets augment_labels(std::span<const MwpRecord> records);
TaskDatasets augment_corpus(std::span<const MwpRecord> records, const Vocab& vocab);

std::vector<int> encode_source(const Vocab& vocab, std::span<const std::string> tokens);
std::vector<int> encode_target(const Vocab& vocab, std::span<const std::string> labels);
/// Label tokens of a target id sequence without BOS and anything from EOS on.
std::vector<std::string> decode_target(const Vocab& vocab, std::span<const int> ids);

/// Writes pre.jsonl, in.jsonl and post.jsonl into dir.
void write_task_datasets(const std::filesystem::path& dir, const LabeledDatasets& datasets);
std::string task_dataset_jsonl(std::span<const LabeledExample> examples);

}  // namespace mmtm
