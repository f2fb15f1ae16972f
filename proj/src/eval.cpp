#include "mmtm/eval.hpp"

#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <unordered_map>

#include "mmtm/error.hpp"

namespace mmtm {
namespace {

using ordered_json = nlohmann::ordered_json;

std::vector<int> source_ids_for(const Model& model, const Vocab& vocab, const MwpRecord& record) {
  auto tokens = tokenize(record.masked_question);
  auto ids = encode_source(vocab, tokens);
  if (ids.size() > static_cast<std::size_t>(model.config.max_src_len)) {
    ids.resize(static_cast<std::size_t>(model.config.max_src_len));
  }
  return ids;
}

std::string format_accuracy(const CohortRow& row) {
  auto acc = row.accuracy();
  if (!acc) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", *acc * 100.0);
  return buf;
}

}  // namespace

std::string_view to_string(FailureReason reason) {
  switch (reason) {
    case FailureReason::None: return "none";
    case FailureReason::DecodeMalformed: return "decode_malformed";
    case FailureReason::EvalError: return "eval_error";
    case FailureReason::InputError: return "input_error";
    case FailureReason::WrongAnswer: return "wrong_answer";
  }
  return "?";
}

std::string_view to_string(ComparisonClass c) {
  switch (c) {
    case ComparisonClass::RR: return "RR";
    case ComparisonClass::WR: return "WR";
    case ComparisonClass::RW: return "RW";
    case ComparisonClass::WW: return "WW";
  }
  return "?";
}

RecordVerdict judge_prediction(const MwpRecord& record, std::vector<std::string> predicted_tokens) {
  RecordVerdict v;
  v.record_id = record.id;
  v.gold_answer = record.answer;
  v.op_count = record.op_count;
  v.op_types = record.op_types;
  v.predicted_tokens = std::move(predicted_tokens);
  std::optional<ExprTree> tree;
  try {
    tree = tree_from_preorder(v.predicted_tokens);
  } catch (const Error& e) {
    v.reason = FailureReason::DecodeMalformed;
    v.detail = e.what();
    return v;
  }
  v.reconstructed = true;
  try {
    v.predicted_answer = evaluate(*tree, record.quantities);
  } catch (const Error& e) {
    v.reason = FailureReason::EvalError;
    v.detail = e.what();
    return v;
  }
  v.correct = answers_match(*v.predicted_answer, record.answer);
  v.reason = v.correct ? FailureReason::None : FailureReason::WrongAnswer;
  return v;
}

RecordVerdict predict_answer(const Model& model, const Vocab& vocab, const MwpRecord& record) {
  std::vector<int> decoded;
  try {
    decoded = greedy_decode(model, Traversal::PreOrder, source_ids_for(model, vocab, record),
                            static_cast<std::size_t>(model.config.max_tgt_len));
  } catch (const Error& e) {
    RecordVerdict v = judge_prediction(record, {});
    v.reason = FailureReason::InputError;
    v.reconstructed = false;
    v.detail = e.what();
    return v;
  }
  return judge_prediction(record, decode_target(vocab, decoded));
}

std::optional<double> CohortRow::accuracy() const {
  if (total == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(total);
}

std::size_t EvalReport::correct() const {
  std::size_t n = 0;
  for (const auto& v : verdicts) n += v.correct;
  return n;
}

Rational EvalReport::accuracy_exact() const {
  if (verdicts.empty()) return Rational(0);
  return Rational(static_cast<std::int64_t>(correct()), static_cast<std::int64_t>(total()));
}

std::vector<CohortRow> EvalReport::table_rows() const {
  std::vector<CohortRow> rows = {{"Full Set"}, {"One-Op"}, {"Two-Op"}, {"ADD"}, {"SUB"}, {"MUL"}, {"DIV"}};
  auto tally = [](CohortRow& row, bool ok) {
    ++row.total;
    row.correct += ok;
  };
  for (const auto& v : verdicts) {
    tally(rows[0], v.correct);
    if (v.op_count == 1) tally(rows[1], v.correct);
    if (v.op_count == 2) tally(rows[2], v.correct);
    for (std::size_t i = 0; i < kAllOps.size(); ++i) {
      if (v.op_types.contains(kAllOps[i])) tally(rows[3 + i], v.correct);
    }
  }
  return rows;
}

CohortRow EvalReport::higher_op() const {
  CohortRow row{"Higher-Op"};
  for (const auto& v : verdicts) {
    if (v.op_count >= 3 || v.op_count == 0) {
      ++row.total;
      row.correct += v.correct;
    }
  }
  return row;
}

std::map<FailureReason, std::size_t> EvalReport::failure_counts() const {
  std::map<FailureReason, std::size_t> counts;
  for (FailureReason r : kAllFailureReasons) counts[r] = 0;
  for (const auto& v : verdicts) ++counts[v.reason];
  return counts;
}

std::string EvalReport::to_json() const {
  ordered_json j;
  j["total"] = total();
  j["correct"] = correct();
  j["accuracy"] = total() ? ordered_json(static_cast<double>(correct()) / static_cast<double>(total()))
                          : ordered_json("n/a");
  j["operator_cohorts"] = "inclusion";
  auto rows = ordered_json::array();
  auto row_json = [](const CohortRow& r) {
    ordered_json o;
    o["label"] = r.label;
    o["total"] = r.total;
    o["correct"] = r.correct;
    auto acc = r.accuracy();
    o["accuracy"] = acc ? ordered_json(*acc) : ordered_json("n/a");
    return o;
  };
  for (const auto& r : table_rows()) rows.push_back(row_json(r));
  j["cohorts"] = std::move(rows);
  j["higher_op"] = row_json(higher_op());
  ordered_json failures;
  for (const auto& [reason, n] : failure_counts()) failures[std::string(to_string(reason))] = n;
  j["failures"] = std::move(failures);
  auto records = ordered_json::array();
  for (const auto& v : verdicts) {
    ordered_json o;
    o["id"] = v.record_id;
    o["predicted"] = v.predicted_tokens;
    o["reconstructed"] = v.reconstructed;
    o["predicted_answer"] = v.predicted_answer ? ordered_json(v.predicted_answer->to_string()) : ordered_json(nullptr);
    o["gold_answer"] = v.gold_answer.to_string();
    o["correct"] = v.correct;
    o["reason"] = std::string(to_string(v.reason));
    if (!v.detail.empty()) o["detail"] = v.detail;
    records.push_back(std::move(o));
  }
  j["records"] = std::move(records);
  return j.dump(1) + "\n";
}

EvalReport EvalReport::from_json(std::string_view text) {
  EvalReport report;
  try {
    auto j = nlohmann::json::parse(text);
    for (const auto& o : j.at("records")) {
      RecordVerdict v;
      v.record_id = o.at("id").get<std::string>();
      v.predicted_tokens = o.value("predicted", std::vector<std::string>{});
      v.reconstructed = o.value("reconstructed", false);
      if (o.contains("predicted_answer") && o["predicted_answer"].is_string()) {
        v.predicted_answer = Rational::parse(o["predicted_answer"].get<std::string>());
      }
      if (auto gold = Rational::parse(o.value("gold_answer", "0"))) v.gold_answer = *gold;
      v.correct = o.at("correct").get<bool>();
      for (FailureReason r : kAllFailureReasons) {
        if (o.value("reason", "") == to_string(r)) v.reason = r;
      }
      v.detail = o.value("detail", "");
      report.verdicts.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, std::string("bad report: ") + e.what());
  }
  return report;
}

std::string EvalReport::render_table() const {
  std::string out;
  char line[96];
  std::snprintf(line, sizeof(line), "%-10s %8s %8s %9s\n", "Cohort", "Records", "Correct", "Accuracy");
  out += line;
  out += std::string(38, '-') + "\n";
  for (const auto& row : table_rows()) {
    std::snprintf(line, sizeof(line), "%-10s %8zu %8zu %9s\n", row.label.c_str(), row.total, row.correct,
                  format_accuracy(row).c_str());
    out += line;
  }
  out += "(ADD/SUB/MUL/DIV count every record whose equation uses the operator)\n";
  return out;
}

EvalReport score(const Model& model, const Vocab& vocab, std::span<const MwpRecord> records) {
  EvalReport report;
  report.verdicts.reserve(records.size());
  for (const auto& r : records) report.verdicts.push_back(predict_answer(model, vocab, r));
  return report;
}

std::string Comparison::to_json() const {
  ordered_json j;
  ordered_json counts_json;
  for (ComparisonClass c : {ComparisonClass::RR, ComparisonClass::WR, ComparisonClass::RW, ComparisonClass::WW}) {
    counts_json[std::string(to_string(c))] = count(c);
  }
  j["counts"] = std::move(counts_json);
  auto recs = ordered_json::array();
  for (const auto& [id, c] : records) recs.push_back({{"id", id}, {"class", std::string(to_string(c))}});
  j["records"] = std::move(recs);
  return j.dump(1) + "\n";
}

Comparison compare_models(const EvalReport& first, const EvalReport& second) {
  if (first.total() != second.total()) {
    throw Error(ErrorKind::ShapeMismatch, "reports cover different numbers of records");
  }
  std::unordered_map<std::string, bool> second_correct;
  for (const auto& v : second.verdicts) second_correct[v.record_id] = v.correct;
  Comparison out;
  for (const auto& v : first.verdicts) {
    auto it = second_correct.find(v.record_id);
    if (it == second_correct.end()) {
      throw Error(ErrorKind::ShapeMismatch, "record '" + v.record_id + "' missing from second report");
    }
    ComparisonClass c = v.correct ? (it->second ? ComparisonClass::RR : ComparisonClass::RW)
                                   : (it->second ? ComparisonClass::WR : ComparisonClass::WW);
    out.records.emplace_back(v.record_id, c);
    ++out.counts[static_cast<int>(c)];
  }
  return out;
}

std::string AttentionReport::to_json() const {
  ordered_json j;
  j["record_id"] = record_id;
  j["task"] = std::string(traversal_tag(task));
  j["tokens"] = tokens;
  j["weights"] = weights;
  j["predicted"] = predicted;
  j["steps"] = steps;
  return j.dump(1) + "\n";
}

AttentionReport export_attention(const Model& model, const Vocab& vocab, const MwpRecord& record, Traversal task) {
  AttentionReport report;
  report.record_id = record.id;
  report.task = task;
  report.tokens = tokenize(record.masked_question);
  auto ids = source_ids_for(model, vocab, record);
  report.tokens.resize(ids.size());

  const auto max_len = static_cast<std::size_t>(model.config.max_tgt_len);
  std::vector<int> generated = greedy_decode(model, task, ids, max_len);
  const bool hit_eos = generated.size() < max_len;
  report.predicted = decode_target(vocab, generated);

  // With causal self-attention, row t of one pass over the final prefix equals
  // the last row of decode step t.
  std::vector<int> prefix{TokenTable::kBos};
  prefix.insert(prefix.end(), generated.begin(), generated.end());
  if (!hit_eos) prefix.pop_back();
  report.steps = prefix.size();

  Encoded enc = encode(model, ids);
  DecodeOutput out = decode_step(model, task, enc, prefix, true);
  report.weights.assign(ids.size(), 0.0);
  const auto& cross = out.trace->decoder_cross;
  double norm = 0.0;
  for (const auto& layer : cross) norm += static_cast<double>(layer.size());
  for (const auto& layer : cross) {
    for (const auto& head : layer) {
      for (Eigen::Index r = 0; r < head.rows(); ++r) {
        for (Eigen::Index c = 0; c < head.cols(); ++c) report.weights[static_cast<std::size_t>(c)] += head(r, c) / norm;
      }
    }
  }
  return report;
}

void write_attention_report(const std::filesystem::path& path, const AttentionReport& report) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << report.to_json();
}

}  // namespace mmtm
