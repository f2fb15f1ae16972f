#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "mmtm/dataset.hpp"
#include "mmtm/tensor.hpp"

namespace mmtm {

struct PretrainedEmbeddings {
  std::vector<std::string> tokens;
  Matrix vectors;  // tokens.size() x width
  std::string provenance;

  int width() const { return static_cast<int>(vectors.cols()); }
  std::optional<Eigen::Index> row_of(std::string_view token) const;

  std::unordered_map<std::string, Eigen::Index> index;
};

/// Reads "D=<width>" followed by token<TAB>v1<TAB>...<TAB>vD lines.
/// Throws Error(Io) on unreadable or malformed files.
PretrainedEmbeddings load_embeddings_tsv(const std::filesystem::path& path);
PretrainedEmbeddings parse_embeddings_tsv(std::string_view text, std::string provenance = "<memory>");
void write_embeddings_tsv(const std::filesystem::path& path, const PretrainedEmbeddings& embeddings);

struct PcaResult {
  Matrix projected;   // M x d
  Matrix components;  // D x d, orthonormal columns
  Eigen::RowVectorXd mean;
  std::vector<double> explained_variance;
  /// Fewer than d non-zero singular values; trailing components complete the
  /// basis and report zero variance.
  bool rank_deficient = false;
};

/// Projects the column-centered matrix onto its top-d principal directions
/// (decreasing singular value). Each component is signed so its
/// largest-magnitude entry is positive. Requires M >= 2 and 1 <= d <= min(M, D);
/// throws BadDim otherwise.
PcaResult pca_project(const Matrix& matrix, int d);

/// Same as pca_project but accepts any d <= D, completing the basis past the
/// data rank.
PcaResult pca_project_completed(const Matrix& matrix, int d);

/// Source embedding table of shape source.size() x d. Tokens present in the
/// pretrained map get their PCA projection; the rest get seeded Gaussian rows
/// rescaled to the mean norm of the projected rows. Throws NoOverlap or BadDim.
Matrix init_vocab_embeddings(const TokenTable& source, const PretrainedEmbeddings& pretrained, int d,
                             std::uint64_t seed);

struct EmbeddingInitStats {
  std::size_t matched = 0;
  std::size_t random = 0;
};

Matrix init_vocab_embeddings(const TokenTable& source, const PretrainedEmbeddings& pretrained, int d,
                             std::uint64_t seed, EmbeddingInitStats& stats);

}  // namespace mmtm
