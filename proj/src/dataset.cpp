#include "mmtm/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

namespace mmtm {
namespace {

using ordered_json = nlohmann::ordered_json;

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_split_punct(char c) { return c == '.' || c == ',' || c == '?' || c == '!'; }

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Length of the numeric literal starting at s[i], with comma groups stripped
// into `digits`. Returns 0 when s[i] does not start a literal.
std::size_t scan_literal(std::string_view s, std::size_t i, std::string& digits) {
  if (i >= s.size() || !is_digit(s[i])) return 0;
  if (i > 0 && is_word_char(s[i - 1])) return 0;
  std::size_t j = i;
  while (j < s.size() && is_digit(s[j])) ++j;
  digits.assign(s.substr(i, j - i));
  if (j - i <= 3) {
    // "1,000,000": every group exactly three digits
    while (j + 3 < s.size() && s[j] == ',' && is_digit(s[j + 1]) && is_digit(s[j + 2]) && is_digit(s[j + 3]) &&
           (j + 4 >= s.size() || !is_digit(s[j + 4]))) {
      digits.append(s.substr(j + 1, 3));
      j += 4;
    }
  }
  if (j + 1 < s.size() && s[j] == '.' && is_digit(s[j + 1])) {
    std::size_t k = j + 1;
    while (k < s.size() && is_digit(s[k])) ++k;
    digits.append(s.substr(j, k - j));
    j = k;
  }
  return j - i;
}

std::uint64_t fnv1a(std::uint64_t h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

Rational json_answer(const nlohmann::json& v) {
  if (v.is_number_integer()) return Rational(v.get<std::int64_t>());
  if (v.is_number_float()) return Rational::from_double(v.get<double>());
  if (v.is_string()) {
    if (auto r = Rational::parse(v.get<std::string>())) return *r;
  }
  throw Error(ErrorKind::MalformedRecord, "answer is not a number");
}

std::string json_string(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorKind::MalformedRecord, std::string("missing field '") + key + "'");
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<std::int64_t>());
  throw Error(ErrorKind::MalformedRecord, std::string("field '") + key + "' is not a string");
}

}  // namespace

ExprTree gold_tree(const MwpRecord& record) { return parse_infix(record.equation, record.quantities.size()); }

MaskedText extract_numbers(std::string_view input) {
  std::string text = lowercase(input);
  MaskedText out;
  std::string digits;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t len = scan_literal(text, i, digits);
    if (len == 0) {
      out.text.push_back(text[i++]);
      continue;
    }
    std::string placeholder = "number" + std::to_string(out.quantities.size());
    out.quantities.push_back(*Rational::parse(digits));
    if (!out.text.empty() && !std::isspace(static_cast<unsigned char>(out.text.back())) &&
        !is_split_punct(out.text.back())) {
      out.text.push_back(' ');
    }
    out.text += placeholder;
    i += len;
    if (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])) && !is_split_punct(text[i])) {
      out.text.push_back(' ');
    }
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view masked_text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char raw : masked_text) {
    char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (is_split_punct(c)) {
      flush();
      tokens.emplace_back(1, c);
    } else {
      current.push_back(c);
    }
  }
  flush();
  return tokens;
}

std::string align_equation(std::string_view equation, std::span<const Rational> quantities) {
  std::string_view eq = equation;
  if (auto eqpos = eq.find('='); eqpos != std::string_view::npos) {
    auto lhs = eq.substr(0, eqpos);
    auto rhs = eq.substr(eqpos + 1);
    auto trimmed = [](std::string_view s) {
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
      return s;
    };
    eq = (trimmed(lhs) == "x" || trimmed(lhs) == "X") ? rhs : lhs;
  }

  std::map<Rational, std::size_t> seen;
  std::string out;
  std::size_t i = 0;
  auto emit = [&](std::string_view token) {
    if (!out.empty()) out.push_back(' ');
    out.append(token);
  };
  while (i < eq.size()) {
    char c = eq[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_') {
      std::size_t j = i;
      while (j < eq.size() && (std::isalnum(static_cast<unsigned char>(eq[j])) || eq[j] == '.' || eq[j] == '_')) ++j;
      std::string_view word = eq.substr(i, j - i);
      i = j;
      auto value = placeholder_index(word) ? std::nullopt : Rational::parse(word);
      if (!value) {
        emit(word);
        continue;
      }
      std::size_t occurrence = seen[*value]++;
      std::optional<std::size_t> first;
      std::optional<std::size_t> chosen;
      std::size_t matched = 0;
      for (std::size_t q = 0; q < quantities.size(); ++q) {
        if (quantities[q] != *value) continue;
        if (!first) first = q;
        if (matched++ == occurrence) {
          chosen = q;
          break;
        }
      }
      if (!chosen) chosen = first;
      emit(chosen ? "number" + std::to_string(*chosen) : value->to_decimal());
      continue;
    }
    emit(std::string_view(&eq[i], 1));
    ++i;
  }
  return out;
}

MwpRecord make_record(const RawRecord& raw) {
  MwpRecord record;
  record.id = raw.id;
  record.question = raw.question;
  auto masked = extract_numbers(raw.question);
  record.masked_question = std::move(masked.text);
  record.quantities = std::move(masked.quantities);
  record.equation = align_equation(raw.equation, record.quantities);
  record.answer = raw.answer;

  ExprTree tree = parse_infix(record.equation, record.quantities.size());
  Rational value = evaluate(tree, record.quantities);
  if (!answers_match(value, record.answer)) {
    throw Error(ErrorKind::AnswerMismatch, "record '" + raw.id + "': equation gives " + value.to_decimal() +
                                               ", answer is " + record.answer.to_decimal());
  }
  record.op_count = tree.op_count();
  for (const auto& token : traverse(tree, Traversal::PreOrder)) {
    if (auto op = op_from_symbol(token)) record.op_types.insert(*op);
  }
  return record;
}

CorpusLoad load_corpus_text(std::string_view jsonl) {
  CorpusLoad load;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= jsonl.size()) {
    std::size_t end = jsonl.find('\n', start);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (end == jsonl.size()) break;
      continue;
    }
    QuarantineEntry entry;
    entry.line = line_no;
    try {
      auto obj = nlohmann::json::parse(line);
      if (!obj.is_object()) throw Error(ErrorKind::MalformedRecord, "line is not a JSON object");
      RawRecord raw;
      raw.id = json_string(obj, "id");
      entry.id = raw.id;
      raw.question = json_string(obj, "question");
      if (auto body = obj.find("body"); body != obj.end() && body->is_string()) {
        raw.question = body->get<std::string>() + " " + raw.question;
      }
      raw.equation = json_string(obj, "equation");
      auto answer = obj.find("answer");
      if (answer == obj.end()) throw Error(ErrorKind::MalformedRecord, "missing field 'answer'");
      raw.answer = json_answer(*answer);
      load.records.push_back(make_record(raw));
    } catch (const nlohmann::json::exception& e) {
      entry.kind = ErrorKind::MalformedRecord;
      entry.message = e.what();
      load.quarantine.push_back(std::move(entry));
    } catch (const Error& e) {
      // equation grammar errors are reported under the record, not the line
      entry.kind = e.kind();
      entry.message = e.what();
      load.quarantine.push_back(std::move(entry));
    }
    if (end == jsonl.size()) break;
  }
  return load;
}

CorpusLoad load_corpus(const std::filesystem::path& path) { return load_corpus_text(read_file(path)); }

void write_corpus(const std::filesystem::path& path, std::span<const RawRecord> records) {
  std::string out;
  for (const auto& r : records) {
    ordered_json obj;
    obj["id"] = r.id;
    obj["question"] = r.question;
    obj["equation"] = r.equation;
    if (r.answer.is_integer()) {
      obj["answer"] = r.answer.num();
    } else {
      obj["answer"] = r.answer.to_double();
    }
    out += obj.dump() + "\n";
  }
  write_file(path, out);
}

void write_quarantine(const std::filesystem::path& path, std::span<const QuarantineEntry> entries) {
  std::string out;
  for (const auto& q : entries) {
    ordered_json obj;
    obj["line"] = q.line;
    obj["id"] = q.id;
    obj["error"] = std::string(to_string(q.kind));
    obj["message"] = q.message;
    out += obj.dump() + "\n";
  }
  write_file(path, out);
}

// ---------------------------------------------------------------------------
// Vocabulary

namespace {
const std::array<std::string, 4> kReservedTokens = {"<pad>", "<bos>", "<eos>", "<unk>"};
}

TokenTable::TokenTable() {
  for (const auto& t : kReservedTokens) add(t);
}

TokenTable::TokenTable(std::vector<std::string> tokens) {
  if (tokens.size() < kReserved || !std::equal(kReservedTokens.begin(), kReservedTokens.end(), tokens.begin())) {
    throw Error(ErrorKind::BadConfig, "token table must start with the reserved tokens");
  }
  for (const auto& t : tokens) {
    if (ids_.contains(t)) throw Error(ErrorKind::BadConfig, "duplicate token '" + t + "'");
    add(t);
  }
}

int TokenTable::add(const std::string& token) {
  if (auto it = ids_.find(token); it != ids_.end()) return it->second;
  int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  ids_.emplace(token, id);
  return id;
}

std::optional<int> TokenTable::find(std::string_view token) const {
  if (auto it = ids_.find(std::string(token)); it != ids_.end()) return it->second;
  return std::nullopt;
}

int TokenTable::id(std::string_view token) const { return find(token).value_or(kUnk); }

const std::string& TokenTable::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw Error(ErrorKind::IdOutOfRange, "token id " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

bool TokenTable::is_reserved(std::string_view token) {
  return std::find(kReservedTokens.begin(), kReservedTokens.end(), token) != kReservedTokens.end();
}

std::uint64_t Vocab::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto* table : {&source, &target}) {
    for (const auto& t : table->tokens()) {
      h = fnv1a(h, t);
      h = fnv1a(h, std::string_view("\0", 1));
    }
    h = fnv1a(h, "\x1e");
  }
  return h;
}

std::string Vocab::to_json() const {
  ordered_json obj;
  obj["source"] = source.tokens();
  obj["target"] = target.tokens();
  return obj.dump(1) + "\n";
}

Vocab Vocab::from_json(std::string_view text) {
  try {
    auto obj = nlohmann::json::parse(text);
    Vocab v;
    v.source = TokenTable(obj.at("source").get<std::vector<std::string>>());
    v.target = TokenTable(obj.at("target").get<std::vector<std::string>>());
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, std::string("bad vocab file: ") + e.what());
  }
}

void Vocab::save(const std::filesystem::path& path) const { write_file(path, to_json()); }
Vocab Vocab::load(const std::filesystem::path& path) { return from_json(read_file(path)); }

Vocab build_vocab(std::span<const MwpRecord> records, std::size_t min_count) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::size_t> counts;
  std::size_t max_quantities = 0;
  std::set<Op> ops;
  std::vector<std::string> constants;
  for (const auto& r : records) {
    for (auto& t : tokenize(r.masked_question)) {
      if (counts[t]++ == 0) order.push_back(t);
    }
    max_quantities = std::max(max_quantities, r.quantities.size());
    for (const auto& label : traverse(gold_tree(r), Traversal::PreOrder)) {
      auto parsed = parse_label_token(label);
      if (auto* op = std::get_if<Op>(&parsed)) {
        ops.insert(*op);
      } else if (std::holds_alternative<Rational>(std::get<Operand>(parsed)) &&
                 std::find(constants.begin(), constants.end(), label) == constants.end()) {
        constants.push_back(label);
      }
    }
  }

  Vocab vocab;
  for (std::size_t k = 0; k < max_quantities; ++k) vocab.source.add("number" + std::to_string(k));
  for (const auto& t : order) {
    if (counts[t] >= min_count && !TokenTable::is_reserved(t)) vocab.source.add(t);
  }
  for (Op op : kAllOps) {
    if (ops.contains(op)) vocab.target.add(std::string(1, op_symbol(op)));
  }
  for (std::size_t k = 0; k < max_quantities; ++k) vocab.target.add("number" + std::to_string(k));
  for (const auto& c : constants) vocab.target.add(c);
  return vocab;
}

// ---------------------------------------------------------------------------
// Task datasets

LabeledDatasets augment_labels(std::span<const MwpRecord> records) {
  LabeledDatasets out;
  for (auto& d : out) d.reserve(records.size());
  for (const auto& r : records) {
    ExprTree tree = gold_tree(r);
    auto source = tokenize(r.masked_question);
    for (Traversal t : kAllTraversals) {
      out[static_cast<int>(t)].push_back({r.id, t, source, traverse(tree, t)});
    }
  }
  return out;
}

std::vector<int> encode_source(const Vocab& vocab, std::span<const std::string> tokens) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.source.id(t));
  return ids;
}

std::vector<int> encode_target(const Vocab& vocab, std::span<const std::string> labels) {
  std::vector<int> ids;
  ids.reserve(labels.size() + 2);
  ids.push_back(TokenTable::kBos);
  for (const auto& t : labels) ids.push_back(vocab.target.id(t));
  ids.push_back(TokenTable::kEos);
  return ids;
}

std::vector<std::string> decode_target(const Vocab& vocab, std::span<const int> ids) {
  std::vector<std::string> out;
  std::size_t i = (!ids.empty() && ids[0] == TokenTable::kBos) ? 1 : 0;
  for (; i < ids.size() && ids[i] != TokenTable::kEos; ++i) out.push_back(vocab.target.token(ids[i]));
  return out;
}

TaskDatasets augment_corpus(std::span<const MwpRecord> records, const Vocab& vocab) {
  LabeledDatasets labeled = augment_labels(records);
  TaskDatasets out;
  for (std::size_t v = 0; v < labeled.size(); ++v) {
    out[v].reserve(labeled[v].size());
    for (const auto& ex : labeled[v]) {
      out[v].push_back({encode_source(vocab, ex.source), encode_target(vocab, ex.target), ex.task, ex.record_id});
    }
  }
  return out;
}

std::string task_dataset_jsonl(std::span<const LabeledExample> examples) {
  std::string out;
  for (const auto& ex : examples) {
    ordered_json obj;
    obj["record_id"] = ex.record_id;
    obj["task"] = std::string(traversal_tag(ex.task));
    obj["source"] = ex.source;
    obj["target"] = ex.target;
    out += obj.dump() + "\n";
  }
  return out;
}

void write_task_datasets(const std::filesystem::path& dir, const LabeledDatasets& datasets) {
  std::filesystem::create_directories(dir);
  for (Traversal t : kAllTraversals) {
    write_file(dir / (std::string(traversal_tag(t)) + ".jsonl"), task_dataset_jsonl(datasets[static_cast<int>(t)]));
  }
}

}  // namespace mmtm
