#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mmtm {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Rng = std::mt19937_64;

/// Named dense tensors in insertion order. Names are unique.
class ParamStore {
 public:
  Matrix& add(std::string name, Matrix value);

  bool contains(std::string_view name) const;
  Matrix& at(std::string_view name);
  const Matrix& at(std::string_view name) const;

  std::size_t tensor_count() const { return entries_.size(); }
  /// Total number of scalars.
  std::size_t scalar_count() const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  /// Same names and shapes, all zeros.
  ParamStore zeros_like() const;
  void set_zero();

  /// FNV-1a over the raw bytes of every tensor whose name starts with prefix.
  std::uint64_t checksum(std::string_view prefix = {}) const;

 private:
  std::vector<std::pair<std::string, Matrix>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace mmtm
