#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mmtm/dataset.hpp"
#include "mmtm/model.hpp"

namespace mmtm {

enum class FailureReason {
  None,
  /// Decoded labels do not form a pre-order tree.
  DecodeMalformed,
  /// Tree evaluation failed (division by zero, placeholder range, overflow).
  EvalError,
  /// Source could not be encoded (e.g. empty question).
  InputError,
  WrongAnswer,
};

inline constexpr std::array<FailureReason, 5> kAllFailureReasons = {
    FailureReason::None, FailureReason::DecodeMalformed, FailureReason::EvalError, FailureReason::InputError,
    FailureReason::WrongAnswer};

std::string_view to_string(FailureReason reason);

struct RecordVerdict {
  std::string record_id;
  std::vector<std::string> predicted_tokens;
  bool reconstructed = false;
  std::optional<Rational> predicted_answer;
  Rational gold_answer;
  bool correct = false;
  FailureReason reason = FailureReason::None;
  std::string detail;
  std::size_t op_count = 0;
  std::set<Op> op_types;
};

/// Reconstructs a pre-order label sequence against a record and checks the
/// answer. Never throws for malformed predictions.
RecordVerdict judge_prediction(const MwpRecord& record, std::vector<std::string> predicted_tokens);

/// Greedy pre-order decode, reconstruction and evaluation for one record.
RecordVerdict predict_answer(const Model& model, const Vocab& vocab, const MwpRecord& record);

struct CohortRow {
  std::string label;
  std::size_t total = 0;
  std::size_t correct = 0;
  /// nullopt for an empty cohort.
  std::optional<double> accuracy() const;
};

struct EvalReport {
  std::vector<RecordVerdict> verdicts;

  std::size_t total() const { return verdicts.size(); }
  std::size_t correct() const;
  /// correct / total as an exact fraction (0 for an empty set).
  Rational accuracy_exact() const;

  /// Full Set, One-Op, Two-Op, ADD, SUB, MUL, DIV. Operator cohorts count a
  /// record under every operator its gold equation uses.
  std::vector<CohortRow> table_rows() const;
  /// Records with three or more operators (not a table row).
  CohortRow higher_op() const;
  std::map<FailureReason, std::size_t> failure_counts() const;

  std::string to_json() const;
  /// Reads back what to_json wrote (cohort membership is not stored per
  /// record, so only ids, predictions and correctness survive).
  static EvalReport from_json(std::string_view text);
  std::string render_table() const;
};

EvalReport score(const Model& model, const Vocab& vocab, std::span<const MwpRecord> records);

enum class ComparisonClass { RR, WR, RW, WW };
std::string_view to_string(ComparisonClass c);

struct Comparison {
  std::vector<std::pair<std::string, ComparisonClass>> records;
  std::array<std::size_t, 4> counts{};

  std::size_t count(ComparisonClass c) const { return counts[static_cast<int>(c)]; }
  std::string to_json() const;
};

/// Classes by (first correct?, second correct?): RR, WR (first wrong, second
/// right), RW, WW. Both reports must cover the same record ids.
Comparison compare_models(const EvalReport& first, const EvalReport& second);

struct AttentionReport {
  std::string record_id;
  Traversal task = Traversal::PreOrder;
  std::vector<std::string> tokens;
  /// Cross-attention mass per source token, averaged over heads and layers
  /// and summed over decode steps.
  std::vector<double> weights;
  std::vector<std::string> predicted;
  std::size_t steps = 0;

  std::string to_json() const;
};

AttentionReport export_attention(const Model& model, const Vocab& vocab, const MwpRecord& record, Traversal task);
void write_attention_report(const std::filesystem::path& path, const AttentionReport& report);

}  // namespace mmtm
