#include "mmtm/pca.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mmtm/error.hpp"

namespace mmtm {
namespace {

void fix_signs(Matrix& components) {
  for (Eigen::Index c = 0; c < components.cols(); ++c) {
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < components.rows(); ++r) {
      if (std::abs(components(r, c)) > std::abs(components(best, c))) best = r;
    }
    if (components(best, c) < 0) components.col(c) *= -1.0;
  }
}

PcaResult fit(const Matrix& matrix, int d, bool allow_completion) {
  const Eigen::Index m = matrix.rows();
  const Eigen::Index width = matrix.cols();
  if (d < 1 || d > width) throw Error(ErrorKind::BadDim, "d=" + std::to_string(d) + " with width " + std::to_string(width));
  if (!allow_completion && (m < 2 || d > std::min(m, width))) {
    throw Error(ErrorKind::BadDim, "d=" + std::to_string(d) + " needs at least d rows and M >= 2, got M=" +
                                       std::to_string(m));
  }
  if (m < 1) throw Error(ErrorKind::BadDim, "empty matrix");

  PcaResult out;
  out.mean = matrix.colwise().mean();
  Matrix centered = matrix.rowwise() - out.mean;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(centered), Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const Eigen::MatrixXd& v = svd.matrixV();
  const double tol = static_cast<double>(std::max(m, width)) * std::numeric_limits<double>::epsilon() *
                     (sv.size() > 0 ? sv(0) : 0.0);
  const double denom = m > 1 ? static_cast<double>(m - 1) : 1.0;

  out.components = Matrix::Zero(width, d);
  Eigen::Index kept = 0;
  for (; kept < d && kept < sv.size() && sv(kept) > tol; ++kept) {
    out.components.col(kept) = v.col(kept);
    out.explained_variance.push_back(sv(kept) * sv(kept) / denom);
  }
  if (kept < d) {
    out.rank_deficient = true;
    // Complete with the standard basis, orthogonalized twice against what is kept.
    for (Eigen::Index e = 0; e < width && kept < d; ++e) {
      Eigen::VectorXd cand = Eigen::VectorXd::Unit(width, e);
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index c = 0; c < kept; ++c) cand -= out.components.col(c).dot(cand) * out.components.col(c);
      }
      double norm = cand.norm();
      if (norm < 1e-3) continue;
      out.components.col(kept++) = cand / norm;
      out.explained_variance.push_back(0.0);
    }
  }
  fix_signs(out.components);
  out.projected = centered * out.components;
  return out;
}

}  // namespace

std::optional<Eigen::Index> PretrainedEmbeddings::row_of(std::string_view token) const {
  if (auto it = index.find(std::string(token)); it != index.end()) return it->second;
  return std::nullopt;
}

PretrainedEmbeddings parse_embeddings_tsv(std::string_view text, std::string provenance) {
  auto bad = [&](std::size_t line, const std::string& msg) {
    return Error(ErrorKind::Io, provenance + ":" + std::to_string(line) + ": " + msg);
  };
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line.rfind("D=", 0) != 0) throw bad(1, "expected 'D=<width>' header");
  int width = 0;
  {
    auto [p, ec] = std::from_chars(line.data() + 2, line.data() + line.size(), width);
    if (ec != std::errc() || width < 1) throw bad(1, "bad width");
  }

  PretrainedEmbeddings out;
  out.provenance = std::move(provenance);
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos) throw bad(line_no, "missing vector");
    std::string token = line.substr(0, tab);
    if (out.index.contains(token)) throw bad(line_no, "duplicate token '" + token + "'");
    int count = 0;
    std::size_t pos = tab + 1;
    while (pos <= line.size()) {
      std::size_t next = line.find('\t', pos);
      if (next == std::string::npos) next = line.size();
      double value = 0.0;
      auto [p, ec] = std::from_chars(line.data() + pos, line.data() + next, value);
      if (ec != std::errc() || p != line.data() + next) throw bad(line_no, "bad number");
      values.push_back(value);
      ++count;
      pos = next + 1;
    }
    if (count != width) throw bad(line_no, "expected " + std::to_string(width) + " values, got " + std::to_string(count));
    out.index.emplace(token, static_cast<Eigen::Index>(out.tokens.size()));
    out.tokens.push_back(std::move(token));
  }
  out.vectors = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(out.tokens.size()), width);
  return out;
}

PretrainedEmbeddings load_embeddings_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_embeddings_tsv(ss.str(), path.string());
}

void write_embeddings_tsv(const std::filesystem::path& path, const PretrainedEmbeddings& embeddings) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "D=" << embeddings.width() << "\n";
  char buf[32];
  for (std::size_t i = 0; i < embeddings.tokens.size(); ++i) {
    out << embeddings.tokens[i];
    for (Eigen::Index c = 0; c < embeddings.vectors.cols(); ++c) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), embeddings.vectors(static_cast<Eigen::Index>(i), c));
      out << '\t' << std::string_view(buf, static_cast<std::size_t>(p - buf));
    }
    out << '\n';
  }
}

PcaResult pca_project(const Matrix& matrix, int d) { return fit(matrix, d, false); }

PcaResult pca_project_completed(const Matrix& matrix, int d) { return fit(matrix, d, true); }

Matrix init_vocab_embeddings(const TokenTable& source, const PretrainedEmbeddings& pretrained, int d,
                             std::uint64_t seed, EmbeddingInitStats& stats) {
  if (d < 1 || d > pretrained.width()) {
    throw Error(ErrorKind::BadDim, "d=" + std::to_string(d) + " exceeds pretrained width " +
                                       std::to_string(pretrained.width()));
  }
  std::vector<Eigen::Index> vocab_rows;
  std::vector<Eigen::Index> pretrained_rows;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const auto& token = source.tokens()[i];
    if (TokenTable::is_reserved(token)) continue;
    if (auto row = pretrained.row_of(token)) {
      vocab_rows.push_back(static_cast<Eigen::Index>(i));
      pretrained_rows.push_back(*row);
    }
  }
  if (vocab_rows.empty()) throw Error(ErrorKind::NoOverlap, "no vocabulary token has a pretrained vector");

  Matrix fit_rows(static_cast<Eigen::Index>(pretrained_rows.size()), pretrained.width());
  for (std::size_t i = 0; i < pretrained_rows.size(); ++i) {
    fit_rows.row(static_cast<Eigen::Index>(i)) = pretrained.vectors.row(pretrained_rows[i]);
  }
  const bool enough_rows = fit_rows.rows() >= 2 && d <= std::min<Eigen::Index>(fit_rows.rows(), fit_rows.cols());
  PcaResult pca = enough_rows ? pca_project(fit_rows, d) : pca_project_completed(fit_rows, d);

  Matrix out(static_cast<Eigen::Index>(source.size()), d);
  std::vector<char> filled(source.size(), 0);
  double norm_sum = 0.0;
  for (std::size_t i = 0; i < vocab_rows.size(); ++i) {
    out.row(vocab_rows[i]) = pca.projected.row(static_cast<Eigen::Index>(i));
    filled[static_cast<std::size_t>(vocab_rows[i])] = 1;
    norm_sum += pca.projected.row(static_cast<Eigen::Index>(i)).norm();
  }
  double target_norm = norm_sum / static_cast<double>(vocab_rows.size());
  if (!(target_norm > 1e-12)) target_norm = 1.0;

  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  stats = {vocab_rows.size(), 0};
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (filled[i]) continue;
    Eigen::RowVectorXd g(d);
    for (int c = 0; c < d; ++c) g(c) = gauss(rng);
    out.row(static_cast<Eigen::Index>(i)) = g * (target_norm / g.norm());
    ++stats.random;
  }
  return out;
}

Matrix init_vocab_embeddings(const TokenTable& source, const PretrainedEmbeddings& pretrained, int d,
                             std::uint64_t seed) {
  EmbeddingInitStats stats;
  return init_vocab_embeddings(source, pretrained, d, seed, stats);
}

}  // namespace mmtm
