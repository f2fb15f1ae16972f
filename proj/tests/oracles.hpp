#pragma once

// Independent reference implementations used by the tests. Nothing here
// calls into the library code under test except to read its data types.

#include <algorithm>
#include <boost/multiprecision/cpp_int.hpp>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmtm/expr.hpp"
#include "mmtm/model.hpp"
#include "mmtm/rational.hpp"

namespace oracle {

using BigQ = boost::multiprecision::cpp_rational;

inline BigQ to_big(const mmtm::Rational& r) { return BigQ(r.num()) / BigQ(r.den()); }

struct DivideByZero : std::runtime_error {
  DivideByZero() : std::runtime_error("divide by zero") {}
};

// Recursive-descent evaluator for fully or partially parenthesized infix over
// "number<k>", decimal literals and + - * /, in arbitrary precision.
class InfixEvaluator {
 public:
  InfixEvaluator(std::string text, std::vector<BigQ> quantities) : s_(std::move(text)), q_(std::move(quantities)) {}

  BigQ run() {
    BigQ v = expr();
    skip();
    if (i_ != s_.size()) throw std::runtime_error("trailing input in oracle: " + s_);
    return v;
  }

 private:
  void skip() {
    while (i_ < s_.size() && s_[i_] == ' ') ++i_;
  }
  BigQ expr() {
    BigQ v = term();
    for (;;) {
      skip();
      if (i_ < s_.size() && (s_[i_] == '+' || s_[i_] == '-')) {
        char c = s_[i_++];
        BigQ r = term();
        v = c == '+' ? BigQ(v + r) : BigQ(v - r);
      } else {
        return v;
      }
    }
  }
  BigQ term() {
    BigQ v = factor();
    for (;;) {
      skip();
      if (i_ < s_.size() && (s_[i_] == '*' || s_[i_] == '/')) {
        char c = s_[i_++];
        BigQ r = factor();
        if (c == '*') {
          v = v * r;
        } else {
          if (r == 0) throw DivideByZero();
          v = v / r;
        }
      } else {
        return v;
      }
    }
  }
  BigQ factor() {
    skip();
    if (i_ >= s_.size()) throw std::runtime_error("oracle: unexpected end");
    if (s_[i_] == '(') {
      ++i_;
      BigQ v = expr();
      skip();
      if (i_ >= s_.size() || s_[i_] != ')') throw std::runtime_error("oracle: missing )");
      ++i_;
      return v;
    }
    if (s_.compare(i_, 6, "number") == 0) {
      i_ += 6;
      std::size_t k = 0;
      while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) k = k * 10 + (s_[i_++] - '0');
      return q_.at(k);
    }
    // decimal literal: digits [. digits], optional leading '-'
    bool neg = false;
    if (s_[i_] == '-') {
      neg = true;
      ++i_;
    }
    BigQ v = 0;
    while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) v = v * 10 + (s_[i_++] - '0');
    if (i_ < s_.size() && s_[i_] == '.') {
      ++i_;
      BigQ scale = 1;
      while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) {
        scale /= 10;
        v += scale * (s_[i_++] - '0');
      }
    }
    return neg ? BigQ(-v) : v;
  }

  std::string s_;
  std::vector<BigQ> q_;
  std::size_t i_ = 0;
};

inline BigQ eval_infix(const std::string& text, const std::vector<mmtm::Rational>& quantities) {
  std::vector<BigQ> q;
  for (const auto& r : quantities) q.push_back(to_big(r));
  return InfixEvaluator(text, q).run();
}

// Random tree with depth <= max_depth (a leaf has depth 1).
inline mmtm::ExprTree random_tree(std::mt19937_64& rng, int max_depth, std::size_t n_placeholders = 6) {
  std::uniform_int_distribution<int> coin(0, 99);
  if (max_depth <= 1 || coin(rng) < 30) {
    if (coin(rng) < 15) {
      static const int kConst[] = {1, 2, 3, 10, 100};
      std::int64_t v = kConst[coin(rng) % 5];
      return coin(rng) < 30 ? mmtm::ExprTree::constant(mmtm::Rational(v, 2)) : mmtm::ExprTree::constant(v);
    }
    return mmtm::ExprTree::placeholder(static_cast<std::size_t>(coin(rng)) % n_placeholders);
  }
  auto op = mmtm::kAllOps[static_cast<std::size_t>(coin(rng)) % 4];
  auto left = random_tree(rng, max_depth - 1, n_placeholders);
  auto right = random_tree(rng, max_depth - 1, n_placeholders);
  return mmtm::ExprTree::node(op, left, right);
}

// Every tree with exactly n_ops operators whose leaves come from `leaves`.
inline void enumerate_trees(int n_ops, const std::vector<mmtm::ExprTree>& leaves,
                            const std::function<void(const mmtm::ExprTree&)>& visit) {
  if (n_ops == 0) {
    for (const auto& l : leaves) visit(l);
    return;
  }
  for (int left_ops = 0; left_ops < n_ops; ++left_ops) {
    enumerate_trees(left_ops, leaves, [&](const mmtm::ExprTree& l) {
      enumerate_trees(n_ops - 1 - left_ops, leaves, [&](const mmtm::ExprTree& r) {
        for (auto op : mmtm::kAllOps) visit(mmtm::ExprTree::node(op, l, r));
      });
    });
  }
}

// Symmetric eigen-decomposition by cyclic Jacobi rotations. Returns
// eigenvalues sorted descending; columns of `vectors` match.
struct EigenPairs {
  std::vector<double> values;
  std::vector<std::vector<double>> vectors;  // vectors[k] is the k-th eigenvector
};

inline EigenPairs jacobi_eigen(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });
  EigenPairs out;
  for (std::size_t k : order) {
    out.values.push_back(a[k][k]);
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = v[i][k];
    out.vectors.push_back(col);
  }
  return out;
}

// Sample covariance (divisor M-1) of the rows of x.
inline std::vector<std::vector<double>> sample_covariance(const std::vector<std::vector<double>>& x) {
  const std::size_t m = x.size(), d = x[0].size();
  std::vector<double> mean(d, 0.0);
  for (const auto& row : x)
    for (std::size_t j = 0; j < d; ++j) mean[j] += row[j] / static_cast<double>(m);
  std::vector<std::vector<double>> c(d, std::vector<double>(d, 0.0));
  for (const auto& row : x)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) c[i][j] += (row[i] - mean[i]) * (row[j] - mean[j]) / static_cast<double>(m - 1);
  return c;
}

// Scalars in a pre-norm encoder-decoder with the given sizes.
//   layer norm: 2d; attention (no bias): 4 d^2; FFN: 2 d f + f + d
//   encoder layer: 2 LN + attention + FFN; decoder layer: 3 LN + 2 attention + FFN
//   encoder: V_src d + L_enc layers + final LN
//   decoder: V_tgt d + L_dec layers + final LN + output projection d V_tgt + V_tgt
inline std::size_t expected_parameter_count(std::size_t d, std::size_t f, std::size_t l_enc, std::size_t l_dec,
                                            std::size_t v_src, std::size_t v_tgt, std::size_t n_decoders) {
  const std::size_t ln = 2 * d, attn = 4 * d * d, ffn = 2 * d * f + f + d;
  const std::size_t encoder = v_src * d + l_enc * (2 * ln + attn + ffn) + ln;
  const std::size_t decoder = v_tgt * d + l_dec * (3 * ln + 2 * attn + ffn) + ln + d * v_tgt + v_tgt;
  return encoder + n_decoders * decoder;
}

}  // namespace oracle
