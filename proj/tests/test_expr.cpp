#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "mmtm/error.hpp"
#include "mmtm/expr.hpp"
#include "oracles.hpp"

using mmtm::ErrorKind;
using mmtm::ExprTree;
using mmtm::Op;
using mmtm::Rational;
using mmtm::Traversal;
using Tokens = std::vector<std::string>;

namespace {

ExprTree P(std::size_t i) { return ExprTree::placeholder(i); }
ExprTree N(Op op, ExprTree l, ExprTree r) { return ExprTree::node(op, std::move(l), std::move(r)); }

template <typename F>
ErrorKind error_of(F&& f) {
  try {
    f();
  } catch (const mmtm::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an mmtm::Error";
  return ErrorKind::Io;
}

}  // namespace

TEST(ParseInfix, TwoLeafSum) { EXPECT_EQ(mmtm::parse_infix("number0 + number1", 2), N(Op::Add, P(0), P(1))); }

TEST(ParseInfix, ParenthesizedProduct) {
  EXPECT_EQ(mmtm::parse_infix("number0 * ( number1 + number2 )", 3), N(Op::Mul, P(0), N(Op::Add, P(1), P(2))));
}

TEST(ParseInfix, Precedence) {
  EXPECT_EQ(mmtm::parse_infix("number0 + number1 * number2", 3), N(Op::Add, P(0), N(Op::Mul, P(1), P(2))));
}

TEST(ParseInfix, LeftAssociative) {
  EXPECT_EQ(mmtm::parse_infix("number0 - number1 - number2", 3), N(Op::Sub, N(Op::Sub, P(0), P(1)), P(2)));
  EXPECT_EQ(mmtm::parse_infix("number0 / number1 * number2", 3), N(Op::Mul, N(Op::Div, P(0), P(1)), P(2)));
}

TEST(ParseInfix, ConstantsAndCompactSpacing) {
  auto t = mmtm::parse_infix("(number0+2.5)*100", 1);
  EXPECT_EQ(t, N(Op::Mul, N(Op::Add, P(0), ExprTree::constant(Rational(5, 2))), ExprTree::constant(100)));
  EXPECT_EQ(mmtm::traverse(t, Traversal::PreOrder), (Tokens{"*", "+", "number0", "2.5", "100"}));
}

TEST(ParseInfix, Errors) {
  EXPECT_EQ(error_of([] { mmtm::parse_infix("( number0 + number1", 2); }), ErrorKind::UnbalancedParens);
  EXPECT_EQ(error_of([] { mmtm::parse_infix("number0 + number1 )", 2); }), ErrorKind::UnbalancedParens);
  EXPECT_EQ(error_of([] { mmtm::parse_infix("number0 ^ number1", 2); }), ErrorKind::UnknownToken);
  EXPECT_EQ(error_of([] { mmtm::parse_infix("number0 + apples", 1); }), ErrorKind::UnknownToken);
  EXPECT_EQ(error_of([] { mmtm::parse_infix("number0 + number2", 2); }), ErrorKind::PlaceholderOutOfRange);
  EXPECT_EQ(error_of([] { mmtm::parse_infix("", 0); }), ErrorKind::EmptyExpression);
  EXPECT_EQ(error_of([] { mmtm::parse_infix("   ", 0); }), ErrorKind::EmptyExpression);
  EXPECT_EQ(error_of([] { mmtm::parse_infix("()", 0); }), ErrorKind::EmptyExpression);
}

TEST(Traverse, Examples) {
  auto sub = N(Op::Sub, P(0), P(1));
  EXPECT_EQ(mmtm::traverse(sub, Traversal::PreOrder), (Tokens{"-", "number0", "number1"}));
  EXPECT_EQ(mmtm::traverse(sub, Traversal::PostOrder), (Tokens{"number0", "number1", "-"}));
  auto prod = N(Op::Mul, P(0), N(Op::Add, P(1), P(2)));
  EXPECT_EQ(mmtm::traverse(prod, Traversal::InOrder), (Tokens{"number0", "*", "number1", "+", "number2"}));
  EXPECT_EQ(mmtm::traverse(prod, Traversal::PreOrder), (Tokens{"*", "number0", "+", "number1", "number2"}));
}

TEST(TreeFromPreorder, Examples) {
  EXPECT_EQ(mmtm::tree_from_preorder(Tokens{"-", "+", "number0", "number2", "number1"}),
            N(Op::Sub, N(Op::Add, P(0), P(2)), P(1)));
  EXPECT_EQ(mmtm::tree_from_preorder(Tokens{"number0"}), P(0));
  EXPECT_EQ(error_of([] { mmtm::tree_from_preorder(Tokens{"+", "number0"}); }), ErrorKind::TruncatedSequence);
  EXPECT_EQ(error_of([] { mmtm::tree_from_preorder(Tokens{}); }), ErrorKind::TruncatedSequence);
  EXPECT_EQ(error_of([] { mmtm::tree_from_preorder(Tokens{"number0", "number1"}); }), ErrorKind::TrailingTokens);
  EXPECT_EQ(error_of([] { mmtm::tree_from_preorder(Tokens{"+", "number0", "apple"}); }), ErrorKind::UnknownToken);
  EXPECT_EQ(error_of([] { mmtm::tree_from_preorder(Tokens{"<eos>"}); }), ErrorKind::UnknownToken);
}

TEST(TreeFromPostorder, Examples) {
  EXPECT_EQ(mmtm::tree_from_postorder(Tokens{"number0", "number1", "-"}), N(Op::Sub, P(0), P(1)));
  auto table_tree = N(Op::Sub, N(Op::Add, P(0), P(2)), P(1));
  EXPECT_EQ(mmtm::traverse(table_tree, Traversal::PostOrder), (Tokens{"number0", "number2", "+", "number1", "-"}));
  EXPECT_EQ(mmtm::tree_from_postorder(Tokens{"number0", "number2", "+", "number1", "-"}), table_tree);
  EXPECT_EQ(error_of([] { mmtm::tree_from_postorder(Tokens{"-"}); }), ErrorKind::TruncatedSequence);
  EXPECT_EQ(error_of([] { mmtm::tree_from_postorder(Tokens{}); }), ErrorKind::TruncatedSequence);
  EXPECT_EQ(error_of([] { mmtm::tree_from_postorder(Tokens{"number0", "number1"}); }), ErrorKind::TrailingTokens);
  EXPECT_EQ(error_of([] { mmtm::tree_from_postorder(Tokens{"number0", "x", "+"}); }), ErrorKind::UnknownToken);
}

TEST(Evaluate, Examples) {
  std::vector<Rational> q53 = {5, 3};
  EXPECT_EQ(mmtm::evaluate(N(Op::Sub, P(0), P(1)), q53), Rational(2));
  std::vector<Rational> q234 = {2, 3, 4};
  EXPECT_EQ(mmtm::evaluate(N(Op::Mul, P(0), N(Op::Add, P(1), P(2))), q234), Rational(14));
  std::vector<Rational> q10 = {1, 0};
  EXPECT_EQ(error_of([&] { mmtm::evaluate(N(Op::Div, P(0), P(1)), q10); }), ErrorKind::DivisionByZero);
  EXPECT_EQ(error_of([&] { mmtm::evaluate(N(Op::Add, P(0), P(2)), q53); }), ErrorKind::PlaceholderOutOfRange);
}

TEST(Evaluate, ExactFractions) {
  std::vector<Rational> q = {1, 3};
  EXPECT_EQ(mmtm::evaluate(N(Op::Div, P(0), P(1)), q), Rational(1, 3));
  EXPECT_EQ(mmtm::evaluate(N(Op::Mul, N(Op::Div, P(0), P(1)), P(1)), q), Rational(1));
}

TEST(ExprTree, Queries) {
  auto t = N(Op::Sub, N(Op::Add, P(0), P(2)), P(1));
  EXPECT_EQ(t.node_count(), 5u);
  EXPECT_EQ(t.op_count(), 2u);
  EXPECT_EQ(t.depth(), 3u);
  EXPECT_EQ(t.to_infix(), "((number0 + number2) - number1)");
  EXPECT_FALSE(t.is_leaf());
  EXPECT_TRUE(t.left().right().is_leaf());
}

TEST(ExprTree, LabelAlphabet) {
  EXPECT_EQ(mmtm::placeholder_index("number12"), 12u);
  EXPECT_FALSE(mmtm::placeholder_index("number"));
  EXPECT_FALSE(mmtm::placeholder_index("number01"));
  EXPECT_FALSE(mmtm::placeholder_index("numberx"));
  EXPECT_EQ(mmtm::operand_token(Rational(1, 4)), "0.25");
  EXPECT_EQ(mmtm::operand_token(Rational(3)), "3");
}

// Pre- and post-order are invertible; in-order is not, so distinct trees can
// share a token multiset while differing in pre-order.
TEST(Traverse, InOrderAmbiguity) {
  auto a = N(Op::Sub, N(Op::Sub, P(0), P(1)), P(2));
  auto b = N(Op::Sub, P(0), N(Op::Sub, P(1), P(2)));
  ASSERT_FALSE(a == b);
  EXPECT_EQ(mmtm::traverse(a, Traversal::InOrder), mmtm::traverse(b, Traversal::InOrder));
  EXPECT_NE(mmtm::traverse(a, Traversal::PreOrder), mmtm::traverse(b, Traversal::PreOrder));
  auto ma = mmtm::traverse(a, Traversal::PreOrder), mb = mmtm::traverse(b, Traversal::PreOrder);
  std::sort(ma.begin(), ma.end());
  std::sort(mb.begin(), mb.end());
  EXPECT_EQ(ma, mb);
}

TEST(TraversalProperty, RoundTripAndTokenCount) {
  std::mt19937_64 rng(20240601);
  for (int i = 0; i < 1000; ++i) {
    auto t = oracle::random_tree(rng, 6);
    ASSERT_LE(t.depth(), 6u);
    auto pre = mmtm::traverse(t, Traversal::PreOrder);
    auto post = mmtm::traverse(t, Traversal::PostOrder);
    auto in = mmtm::traverse(t, Traversal::InOrder);
    ASSERT_EQ(mmtm::tree_from_preorder(pre), t) << t.to_infix();
    ASSERT_EQ(mmtm::tree_from_postorder(post), t) << t.to_infix();
    ASSERT_EQ(pre.size(), t.node_count());
    ASSERT_EQ(post.size(), t.node_count());
    ASSERT_EQ(in.size(), t.node_count());
  }
}

TEST(TraversalProperty, InfixRoundTrip) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 300; ++i) {
    auto t = oracle::random_tree(rng, 5);
    ASSERT_EQ(mmtm::parse_infix(t.to_infix(), 6), t) << t.to_infix();
  }
}

TEST(EvaluateProperty, MatchesInfixOracleOnRandomTrees) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> qd(0, 40);
  int compared = 0, skipped = 0;
  for (int i = 0; i < 500; ++i) {
    auto t = oracle::random_tree(rng, 4);
    std::vector<Rational> q;
    for (int k = 0; k < 6; ++k) q.emplace_back(qd(rng), 1 + qd(rng) % 4);
    try {
      auto expected = oracle::eval_infix(t.to_infix(), q);
      auto got = mmtm::evaluate(t, q);
      ASSERT_EQ(oracle::to_big(got), expected) << t.to_infix();
      ++compared;
    } catch (const oracle::DivideByZero&) {
      EXPECT_EQ(error_of([&] { mmtm::evaluate(t, q); }), ErrorKind::DivisionByZero);
      ++skipped;
    }
  }
  EXPECT_GT(compared, 400);
  (void)skipped;
}

TEST(Rational, ReducedPositiveDenominator) {
  Rational r(6, -4);
  EXPECT_EQ(r.num(), -3);
  EXPECT_EQ(r.den(), 2);
  EXPECT_EQ(Rational(0, -5).den(), 1);
  EXPECT_EQ(error_of([] { Rational(1, 0); }), ErrorKind::DivisionByZero);
}

TEST(Rational, ParseAndRender) {
  EXPECT_EQ(Rational::parse("2.5"), Rational(5, 2));
  EXPECT_EQ(Rational::parse("-0.75"), Rational(-3, 4));
  EXPECT_EQ(Rational::parse("3/4"), Rational(3, 4));
  EXPECT_EQ(Rational::parse("12"), Rational(12));
  EXPECT_FALSE(Rational::parse("1.2.3"));
  EXPECT_FALSE(Rational::parse("abc"));
  EXPECT_FALSE(Rational::parse(""));
  EXPECT_EQ(Rational(5, 2).to_string(), "5/2");
  EXPECT_EQ(Rational(5, 2).to_decimal(), "2.5");
  EXPECT_EQ(Rational(1, 8).to_decimal(), "0.125");
  EXPECT_EQ(Rational(100).to_decimal(), "100");
  EXPECT_EQ(Rational::from_double(0.1), Rational(1, 10));
}

TEST(Rational, Arithmetic) {
  EXPECT_EQ(Rational(1, 2) + Rational(1, 3), Rational(5, 6));
  EXPECT_EQ(Rational(1, 2) - Rational(1, 3), Rational(1, 6));
  EXPECT_EQ(Rational(2, 3) * Rational(3, 4), Rational(1, 2));
  EXPECT_EQ(Rational(2, 3) / Rational(4, 3), Rational(1, 2));
  EXPECT_EQ(error_of([] { (void)(Rational(1) / Rational(0)); }), ErrorKind::DivisionByZero);
  EXPECT_LT(Rational(1, 3), Rational(1, 2));
  EXPECT_EQ(error_of([] { (void)(Rational(INT64_MAX) * Rational(3)); }), ErrorKind::Overflow);
}

TEST(Rational, AnswerTolerance) {
  EXPECT_TRUE(mmtm::answers_match(Rational(1, 3), Rational::from_double(0.33333)));
  EXPECT_FALSE(mmtm::answers_match(Rational(1, 3), Rational::from_double(0.3332)));
  EXPECT_TRUE(mmtm::answers_match(Rational(100000), Rational(100001)));
  EXPECT_FALSE(mmtm::answers_match(Rational(1000), Rational(1001)));
  EXPECT_TRUE(mmtm::answers_match(Rational(0), Rational(1, 100000)));
}
