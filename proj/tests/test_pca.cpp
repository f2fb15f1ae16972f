#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "mmtm/error.hpp"
#include "mmtm/pca.hpp"
#include "oracles.hpp"

using mmtm::Matrix;

namespace {

Matrix random_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

std::vector<std::vector<double>> to_rows(const Matrix& m) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)].push_back(m(i, j));
  return out;
}

mmtm::ErrorKind error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const mmtm::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an mmtm::Error";
  return mmtm::ErrorKind::Io;
}

}  // namespace

TEST(Pca, AxisAlignedExample) {
  Matrix x(4, 2);
  x << 1, 0, -1, 0, 2, 0, -2, 0;
  auto r = mmtm::pca_project(x, 1);
  EXPECT_NEAR(r.components(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(r.components(1, 0), 0.0, 1e-12);
  const double expected[] = {1, -1, 2, -2};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(r.projected(i, 0), expected[i], 1e-12);
  // sample variance along axis 0: (1 + 1 + 4 + 4) / 3
  ASSERT_EQ(r.explained_variance.size(), 1u);
  EXPECT_NEAR(r.explained_variance[0], 10.0 / 3.0, 1e-12);
  EXPECT_FALSE(r.rank_deficient);
}

TEST(Pca, FullRankReconstruction) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Matrix x = random_matrix(9, 4, seed);
    auto r = mmtm::pca_project(x, 4);
    Matrix back = r.projected * r.components.transpose();
    back.rowwise() += r.mean;
    EXPECT_LT((back - x).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Pca, MatchesCovarianceEigenOracle) {
  Matrix x = random_matrix(10, 5, 2024);
  auto r = mmtm::pca_project(x, 2);
  auto eig = oracle::jacobi_eigen(oracle::sample_covariance(to_rows(x)));
  // sanity of the oracle itself: C v = lambda v
  auto cov = oracle::sample_covariance(to_rows(x));
  for (std::size_t k = 0; k < 5; ++k)
    for (std::size_t i = 0; i < 5; ++i) {
      double cv = 0;
      for (std::size_t j = 0; j < 5; ++j) cv += cov[i][j] * eig.vectors[k][j];
      ASSERT_NEAR(cv, eig.values[k] * eig.vectors[k][i], 1e-10);
    }
  for (int k = 0; k < 2; ++k) {
    EXPECT_NEAR(r.explained_variance[static_cast<std::size_t>(k)], eig.values[static_cast<std::size_t>(k)], 1e-8);
    double cos = 0;
    for (int i = 0; i < 5; ++i) cos += r.components(i, k) * eig.vectors[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
    EXPECT_GT(std::abs(cos), 1 - 1e-8);
  }
}

TEST(Pca, Invariants) {
  Matrix x = random_matrix(12, 6, 77);
  auto r = mmtm::pca_project(x, 6);
  Matrix gram = r.components.transpose() * r.components;
  EXPECT_LT((gram - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-8);
  for (std::size_t k = 1; k < r.explained_variance.size(); ++k) {
    EXPECT_LE(r.explained_variance[k], r.explained_variance[k - 1]);
    EXPECT_GE(r.explained_variance[k], 0.0);
  }
  double previous = std::numeric_limits<double>::infinity();
  for (int d = 1; d <= 6; ++d) {
    auto p = mmtm::pca_project(x, d);
    Matrix back = p.projected * p.components.transpose();
    back.rowwise() += p.mean;
    const double err = (back - x).squaredNorm();
    EXPECT_LE(err, previous + 1e-9);
    previous = err;
  }
  // sign convention: largest-magnitude entry of every component is positive
  for (int k = 0; k < 6; ++k) {
    Eigen::Index at;
    r.components.col(k).cwiseAbs().maxCoeff(&at);
    EXPECT_GT(r.components(at, k), 0.0);
  }
}

TEST(Pca, RowOrderInvariance) {
  Matrix x = random_matrix(8, 4, 5);
  std::vector<int> perm = {3, 7, 0, 5, 1, 6, 2, 4};
  Matrix y(8, 4);
  for (int i = 0; i < 8; ++i) y.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
  auto a = mmtm::pca_project(x, 3);
  auto b = mmtm::pca_project(y, 3);
  for (int i = 0; i < 8; ++i) {
    EXPECT_LT((b.projected.row(i) - a.projected.row(perm[static_cast<std::size_t>(i)])).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Pca, RankDeficientCompletion) {
  Matrix x(4, 3);
  x << 1, 2, 0, 2, 4, 0, 3, 6, 0, 4, 8, 0;
  auto r = mmtm::pca_project(x, 3);
  EXPECT_TRUE(r.rank_deficient);
  EXPECT_NEAR(r.explained_variance[1], 0.0, 1e-12);
  EXPECT_NEAR(r.explained_variance[2], 0.0, 1e-12);
  Matrix gram = r.components.transpose() * r.components;
  EXPECT_LT((gram - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Pca, BadDim) {
  Matrix x = random_matrix(4, 3, 1);
  EXPECT_EQ(error_of([&] { mmtm::pca_project(x, 4); }), mmtm::ErrorKind::BadDim);
  EXPECT_EQ(error_of([&] { mmtm::pca_project(x, 0); }), mmtm::ErrorKind::BadDim);
  EXPECT_EQ(error_of([&] { mmtm::pca_project(random_matrix(1, 3, 1), 1); }), mmtm::ErrorKind::BadDim);
  EXPECT_EQ(error_of([&] { mmtm::pca_project(random_matrix(3, 6, 1), 4); }), mmtm::ErrorKind::BadDim);
  EXPECT_NO_THROW(mmtm::pca_project_completed(random_matrix(3, 6, 1), 4));
}

TEST(Embeddings, TsvRoundTrip) {
  auto text = std::string("D=3\napple\t1\t2\t3\npear\t-0.5\t0\t1e-3\n");
  auto e = mmtm::parse_embeddings_tsv(text);
  ASSERT_EQ(e.width(), 3);
  ASSERT_EQ(e.tokens.size(), 2u);
  EXPECT_EQ(e.vectors(1, 2), 1e-3);
  EXPECT_EQ(e.row_of("pear"), 1);
  EXPECT_FALSE(e.row_of("plum"));
  auto dir = fixture::scratch_dir("tsv");
  mmtm::write_embeddings_tsv(dir / "e.tsv", e);
  auto back = mmtm::load_embeddings_tsv(dir / "e.tsv");
  EXPECT_EQ(back.tokens, e.tokens);
  EXPECT_TRUE(back.vectors == e.vectors);
  EXPECT_EQ(error_of([] { mmtm::parse_embeddings_tsv("D=3\napple\t1\t2\n"); }), mmtm::ErrorKind::Io);
  EXPECT_EQ(error_of([] { mmtm::parse_embeddings_tsv("apple\t1\t2\n"); }), mmtm::ErrorKind::Io);
  EXPECT_EQ(error_of([] { mmtm::parse_embeddings_tsv("D=1\na\t1\na\t2\n"); }), mmtm::ErrorKind::Io);
}

TEST(InitVocabEmbeddings, FullCoverage) {
  mmtm::TokenTable table(std::vector<std::string>{"<pad>", "<bos>", "<eos>", "<unk>", "a", "b", "c", "d", "e"});
  std::vector<std::string> words = {"a", "b", "c", "d", "e", "zzz"};
  auto pre = mmtm::synthetic_embeddings(words, 16, 4);
  mmtm::EmbeddingInitStats stats;
  auto m = mmtm::init_vocab_embeddings(table, pre, 3, 9, stats);
  EXPECT_EQ(m.rows(), 9);
  EXPECT_EQ(m.cols(), 3);
  EXPECT_EQ(stats.matched, 5u);
  EXPECT_EQ(stats.random, 4u);  // only the reserved rows
  // matched rows equal the PCA of exactly the matched vectors
  Matrix fit(5, 16);
  for (int i = 0; i < 5; ++i) fit.row(i) = pre.vectors.row(i);
  auto pca = mmtm::pca_project(fit, 3);
  EXPECT_LT((m.bottomRows(5) - pca.projected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(InitVocabEmbeddings, NoOverlapAndBadDim) {
  mmtm::TokenTable table(std::vector<std::string>{"<pad>", "<bos>", "<eos>", "<unk>", "number0", "number1"});
  std::vector<std::string> words = {"apple", "pear"};
  auto pre = mmtm::synthetic_embeddings(words, 4, 1);
  EXPECT_EQ(error_of([&] { mmtm::init_vocab_embeddings(table, pre, 2, 0); }), mmtm::ErrorKind::NoOverlap);
  mmtm::TokenTable t2(std::vector<std::string>{"<pad>", "<bos>", "<eos>", "<unk>", "apple", "pear"});
  EXPECT_EQ(error_of([&] { mmtm::init_vocab_embeddings(t2, pre, 5, 0); }), mmtm::ErrorKind::BadDim);
  // fewer matched tokens than d: basis completion, still the right shape
  auto m = mmtm::init_vocab_embeddings(t2, pre, 4, 0);
  EXPECT_EQ(m.cols(), 4);
}

TEST(InitVocabEmbeddings, RandomRowNormsTrackProjectedNorms) {
  std::vector<std::string> tokens = {"<pad>", "<bos>", "<eos>", "<unk>"};
  std::vector<std::string> known;
  for (int i = 0; i < 40; ++i) {
    tokens.push_back("w" + std::to_string(i));
    known.push_back("w" + std::to_string(i));
  }
  for (int i = 0; i < 1000; ++i) tokens.push_back("oov" + std::to_string(i));
  mmtm::TokenTable table(tokens);
  auto pre = mmtm::synthetic_embeddings(known, 32, 3);
  mmtm::EmbeddingInitStats stats;
  auto m = mmtm::init_vocab_embeddings(table, pre, 8, 17, stats);
  EXPECT_EQ(stats.matched, 40u);
  EXPECT_EQ(stats.random, 1004u);
  double projected = 0, random = 0;
  for (int i = 4; i < 44; ++i) projected += m.row(i).norm() / 40.0;
  for (int i = 44; i < m.rows(); ++i) random += m.row(i).norm() / 1000.0;
  EXPECT_NEAR(random / projected, 1.0, 0.10);
  // seeded
  EXPECT_TRUE(m == mmtm::init_vocab_embeddings(table, pre, 8, 17));
  EXPECT_FALSE(m == mmtm::init_vocab_embeddings(table, pre, 8, 18));
}
