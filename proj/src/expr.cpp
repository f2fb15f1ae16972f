#include "mmtm/expr.hpp"

#include <algorithm>
#include <cctype>

#include "mmtm/error.hpp"

namespace mmtm {

struct ExprTree::Node {
  Operand operand;
  Op op = Op::Add;
  std::optional<ExprTree> left;
  std::optional<ExprTree> right;
  std::size_t count = 1;
  std::size_t depth = 1;
};

char op_symbol(Op op) { return static_cast<char>(op); }

std::optional<Op> op_from_symbol(std::string_view token) {
  if (token.size() != 1) return std::nullopt;
  switch (token[0]) {
    case '+': return Op::Add;
    case '-': return Op::Sub;
    case '*': return Op::Mul;
    case '/': return Op::Div;
    default: return std::nullopt;
  }
}

std::string_view traversal_tag(Traversal t) {
  switch (t) {
    case Traversal::PreOrder: return "pre";
    case Traversal::InOrder: return "in";
    case Traversal::PostOrder: return "post";
  }
  return "?";
}

std::optional<Traversal> traversal_from_tag(std::string_view tag) {
  if (tag == "pre") return Traversal::PreOrder;
  if (tag == "in") return Traversal::InOrder;
  if (tag == "post") return Traversal::PostOrder;
  return std::nullopt;
}

std::string operand_token(const Operand& operand) {
  if (const auto* p = std::get_if<Placeholder>(&operand)) return "number" + std::to_string(p->index);
  return std::get<Rational>(operand).to_decimal();
}

std::optional<std::size_t> placeholder_index(std::string_view token) {
  constexpr std::string_view kPrefix = "number";
  if (token.size() <= kPrefix.size() || token.substr(0, kPrefix.size()) != kPrefix) return std::nullopt;
  auto digits = token.substr(kPrefix.size());
  if (digits.size() > 1 && digits[0] == '0') return std::nullopt;
  std::size_t value = 0;
  for (char c : digits) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    if (value > 1'000'000) return std::nullopt;
    value = value * 10 + static_cast<std::size_t>(c - '0');
  }
  return value;
}

ExprTree ExprTree::leaf(Operand operand) {
  auto node = std::make_shared<Node>();
  node->operand = std::move(operand);
  return ExprTree(std::move(node));
}

ExprTree ExprTree::node(Op op, ExprTree left, ExprTree right) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->count = 1 + left.node_count() + right.node_count();
  node->depth = 1 + std::max(left.depth(), right.depth());
  node->left = std::move(left);
  node->right = std::move(right);
  return ExprTree(std::move(node));
}

bool ExprTree::is_leaf() const { return !node_->left.has_value(); }
Op ExprTree::op() const { return node_->op; }
const ExprTree& ExprTree::left() const { return *node_->left; }
const ExprTree& ExprTree::right() const { return *node_->right; }
const Operand& ExprTree::operand() const { return node_->operand; }
std::size_t ExprTree::node_count() const { return node_->count; }
std::size_t ExprTree::depth() const { return node_->depth; }

std::string ExprTree::to_infix() const {
  if (is_leaf()) return operand_token(operand());
  return "(" + left().to_infix() + " " + op_symbol(op()) + " " + right().to_infix() + ")";
}

bool operator==(const ExprTree& a, const ExprTree& b) {
  if (a.node_ == b.node_) return true;
  if (a.is_leaf() != b.is_leaf()) return false;
  if (a.is_leaf()) return a.operand() == b.operand();
  return a.op() == b.op() && a.left() == b.left() && a.right() == b.right();
}

// ---------------------------------------------------------------------------
// Infix parsing

namespace {

struct Lexeme {
  enum Kind { Operand, Operator, Open, Close } kind;
  std::string text;
};

std::vector<Lexeme> lex_infix(std::string_view s) {
  std::vector<Lexeme> out;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '(' || c == ')') {
      out.push_back({c == '(' ? Lexeme::Open : Lexeme::Close, std::string(1, c)});
      ++i;
    } else if (c == '+' || c == '-' || c == '*' || c == '/') {
      out.push_back({Lexeme::Operator, std::string(1, c)});
      ++i;
    } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '.' || s[j] == '_')) ++j;
      out.push_back({Lexeme::Operand, std::string(s.substr(i, j - i))});
      i = j;
    } else {
      throw Error(ErrorKind::UnknownToken, "unexpected character '" + std::string(1, c) + "'");
    }
  }
  return out;
}

class InfixParser {
 public:
  InfixParser(std::vector<Lexeme> lexemes, std::size_t n_quantities)
      : lex_(std::move(lexemes)), n_quantities_(n_quantities) {}

  ExprTree parse() {
    if (lex_.empty()) throw Error(ErrorKind::EmptyExpression, "empty equation");
    ExprTree tree = expression();
    if (pos_ < lex_.size()) {
      if (lex_[pos_].kind == Lexeme::Close) throw Error(ErrorKind::UnbalancedParens, "unmatched ')'");
      throw Error(ErrorKind::TrailingTokens, "unexpected '" + lex_[pos_].text + "'");
    }
    return tree;
  }

 private:
  const Lexeme* peek() const { return pos_ < lex_.size() ? &lex_[pos_] : nullptr; }

  bool peek_operator(char a, char b) const {
    const Lexeme* l = peek();
    return l && l->kind == Lexeme::Operator && (l->text[0] == a || l->text[0] == b);
  }

  ExprTree expression() {
    ExprTree lhs = term();
    while (peek_operator('+', '-')) {
      Op op = *op_from_symbol(lex_[pos_++].text);
      lhs = ExprTree::node(op, lhs, term());
    }
    return lhs;
  }

  ExprTree term() {
    ExprTree lhs = factor();
    while (peek_operator('*', '/')) {
      Op op = *op_from_symbol(lex_[pos_++].text);
      lhs = ExprTree::node(op, lhs, factor());
    }
    return lhs;
  }

  ExprTree factor() {
    const Lexeme* l = peek();
    if (!l) throw Error(ErrorKind::EmptyExpression, "missing operand at end of equation");
    switch (l->kind) {
      case Lexeme::Open: {
        ++pos_;
        const Lexeme* next = peek();
        if (next && next->kind == Lexeme::Close) throw Error(ErrorKind::EmptyExpression, "empty parentheses");
        ExprTree inner = expression();
        const Lexeme* close = peek();
        if (!close || close->kind != Lexeme::Close) throw Error(ErrorKind::UnbalancedParens, "missing ')'");
        ++pos_;
        return inner;
      }
      case Lexeme::Close:
        throw Error(ErrorKind::UnbalancedParens, "unexpected ')'");
      case Lexeme::Operator:
        throw Error(ErrorKind::EmptyExpression, "missing operand before '" + l->text + "'");
      case Lexeme::Operand:
        ++pos_;
        return operand(l->text);
    }
    throw Error(ErrorKind::UnknownToken, l->text);
  }

  ExprTree operand(const std::string& text) {
    if (auto index = placeholder_index(text)) {
      if (*index >= n_quantities_) {
        throw Error(ErrorKind::PlaceholderOutOfRange,
                    text + " with only " + std::to_string(n_quantities_) + " quantities");
      }
      return ExprTree::placeholder(*index);
    }
    if (auto value = Rational::parse(text)) return ExprTree::constant(*value);
    throw Error(ErrorKind::UnknownToken, "'" + text + "'");
  }

  std::vector<Lexeme> lex_;
  std::size_t n_quantities_;
  std::size_t pos_ = 0;
};

}  // namespace

ExprTree parse_infix(std::string_view equation, std::size_t n_quantities) {
  return InfixParser(lex_infix(equation), n_quantities).parse();
}

// ---------------------------------------------------------------------------
// Traversal and reconstruction

namespace {

void walk(const ExprTree& t, Traversal variant, std::vector<std::string>& out) {
  if (t.is_leaf()) {
    out.push_back(operand_token(t.operand()));
    return;
  }
  std::string sym(1, op_symbol(t.op()));
  if (variant == Traversal::PreOrder) out.push_back(sym);
  walk(t.left(), variant, out);
  if (variant == Traversal::InOrder) out.push_back(sym);
  walk(t.right(), variant, out);
  if (variant == Traversal::PostOrder) out.push_back(sym);
}

ExprTree build_preorder(std::span<const std::string> tokens, std::size_t& pos) {
  if (pos >= tokens.size()) throw Error(ErrorKind::TruncatedSequence, "operator lacks operands");
  auto parsed = parse_label_token(tokens[pos++]);
  if (auto* operand = std::get_if<Operand>(&parsed)) return ExprTree::leaf(*operand);
  Op op = std::get<Op>(parsed);
  ExprTree left = build_preorder(tokens, pos);
  ExprTree right = build_preorder(tokens, pos);
  return ExprTree::node(op, std::move(left), std::move(right));
}

}  // namespace

std::variant<Op, Operand> parse_label_token(std::string_view token) {
  if (auto op = op_from_symbol(token)) return *op;
  if (auto index = placeholder_index(token)) return Operand{Placeholder{*index}};
  if (auto value = Rational::parse(token); value && token[0] != '+' && token[0] != '-') {
    return Operand{*value};
  }
  throw Error(ErrorKind::UnknownToken, "'" + std::string(token) + "'");
}

std::vector<std::string> traverse(const ExprTree& tree, Traversal variant) {
  std::vector<std::string> out;
  out.reserve(tree.node_count());
  walk(tree, variant, out);
  return out;
}

ExprTree tree_from_preorder(std::span<const std::string> tokens) {
  if (tokens.empty()) throw Error(ErrorKind::TruncatedSequence, "empty label sequence");
  std::size_t pos = 0;
  ExprTree tree = build_preorder(tokens, pos);
  if (pos != tokens.size()) {
    throw Error(ErrorKind::TrailingTokens, std::to_string(tokens.size() - pos) + " tokens after a complete tree");
  }
  return tree;
}

ExprTree tree_from_postorder(std::span<const std::string> tokens) {
  if (tokens.empty()) throw Error(ErrorKind::TruncatedSequence, "empty label sequence");
  std::vector<ExprTree> stack;
  for (const auto& token : tokens) {
    auto parsed = parse_label_token(token);
    if (auto* operand = std::get_if<Operand>(&parsed)) {
      stack.push_back(ExprTree::leaf(*operand));
      continue;
    }
    if (stack.size() < 2) throw Error(ErrorKind::TruncatedSequence, "operator '" + token + "' lacks operands");
    ExprTree right = std::move(stack.back());
    stack.pop_back();
    ExprTree left = std::move(stack.back());
    stack.pop_back();
    stack.push_back(ExprTree::node(std::get<Op>(parsed), std::move(left), std::move(right)));
  }
  if (stack.size() != 1) {
    throw Error(ErrorKind::TrailingTokens, std::to_string(stack.size()) + " disconnected subtrees");
  }
  return stack.front();
}

Rational evaluate(const ExprTree& tree, std::span<const Rational> quantities) {
  if (tree.is_leaf()) {
    const Operand& operand = tree.operand();
    if (const auto* p = std::get_if<Placeholder>(&operand)) {
      if (p->index >= quantities.size()) {
        throw Error(ErrorKind::PlaceholderOutOfRange, "number" + std::to_string(p->index) + " with only " +
                                                          std::to_string(quantities.size()) + " quantities");
      }
      return quantities[p->index];
    }
    return std::get<Rational>(operand);
  }
  Rational lhs = evaluate(tree.left(), quantities);
  Rational rhs = evaluate(tree.right(), quantities);
  switch (tree.op()) {
    case Op::Add: return lhs + rhs;
    case Op::Sub: return lhs - rhs;
    case Op::Mul: return lhs * rhs;
    case Op::Div: return lhs / rhs;
  }
  return lhs;
}

}  // namespace mmtm
