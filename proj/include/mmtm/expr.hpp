#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mmtm/rational.hpp"

namespace mmtm {

enum class Op : char { Add = '+', Sub = '-', Mul = '*', Div = '/' };

inline constexpr std::array<Op, 4> kAllOps = {Op::Add, Op::Sub, Op::Mul, Op::Div};

char op_symbol(Op op);
std::optional<Op> op_from_symbol(std::string_view token);

/// Label order used to linearize an expression tree. Each variant owns one
/// decoder in the model.
enum class Traversal { PreOrder = 0, InOrder = 1, PostOrder = 2 };

inline constexpr std::array<Traversal, 3> kAllTraversals = {Traversal::PreOrder, Traversal::InOrder,
                                                            Traversal::PostOrder};

/// Short tag used in files and parameter names: "pre", "in", "post".
std::string_view traversal_tag(Traversal t);
std::optional<Traversal> traversal_from_tag(std::string_view tag);

struct Placeholder {
  std::size_t index = 0;
  friend bool operator==(const Placeholder&, const Placeholder&) = default;
};

using Operand = std::variant<Placeholder, Rational>;

/// Label token for an operand: "number3" or the shortest decimal of a constant.
std::string operand_token(const Operand& operand);

/// Immutable binary expression tree. Copies share structure.
class ExprTree {
 public:
  static ExprTree leaf(Operand operand);
  static ExprTree placeholder(std::size_t index) { return leaf(Placeholder{index}); }
  static ExprTree constant(Rational value) { return leaf(value); }
  static ExprTree node(Op op, ExprTree left, ExprTree right);

  bool is_leaf() const;
  /// Valid only when !is_leaf().
  Op op() const;
  const ExprTree& left() const;
  const ExprTree& right() const;
  /// Valid only when is_leaf().
  const Operand& operand() const;

  std::size_t node_count() const;
  std::size_t op_count() const { return (node_count() - 1) / 2; }
  std::size_t depth() const;

  /// Fully parenthesized infix, e.g. "(number0 * (number1 + number2))".
  std::string to_infix() const;

  friend bool operator==(const ExprTree& a, const ExprTree& b);

 private:
  struct Node;
  explicit ExprTree(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

/// Parses an infix equation over placeholders ("number0"), decimal constants,
/// + - * / and parentheses with the usual precedence and left associativity.
ExprTree parse_infix(std::string_view equation, std::size_t n_quantities);

std::vector<std::string> traverse(const ExprTree& tree, Traversal variant);

ExprTree tree_from_preorder(std::span<const std::string> tokens);
ExprTree tree_from_postorder(std::span<const std::string> tokens);

/// Exact bottom-up evaluation. Throws DivisionByZero, PlaceholderOutOfRange, Overflow.
Rational evaluate(const ExprTree& tree, std::span<const Rational> quantities);

/// Parses one label token into an operator or operand. Throws UnknownToken.
std::variant<Op, Operand> parse_label_token(std::string_view token);

/// Whether a token is a "number<k>" placeholder; returns k.
std::optional<std::size_t> placeholder_index(std::string_view token);

}  // namespace mmtm
