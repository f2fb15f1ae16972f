#include "mmtm/tensor.hpp"

#include "mmtm/error.hpp"

namespace mmtm {

Matrix& ParamStore::add(std::string name, Matrix value) {
  if (index_.contains(name)) throw Error(ErrorKind::BadConfig, "duplicate parameter '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(value));
  return entries_.back().second;
}

bool ParamStore::contains(std::string_view name) const { return index_.contains(std::string(name)); }

Matrix& ParamStore::at(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw Error(ErrorKind::BadConfig, "no parameter '" + std::string(name) + "'");
  return entries_[it->second].second;
}

const Matrix& ParamStore::at(std::string_view name) const { return const_cast<ParamStore*>(this)->at(name); }

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, m] : entries_) n += static_cast<std::size_t>(m.size());
  return n;
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  for (const auto& [name, m] : entries_) out.add(name, Matrix::Zero(m.rows(), m.cols()));
  return out;
}

void ParamStore::set_zero() {
  for (auto& [name, m] : entries_) m.setZero();
}

std::uint64_t ParamStore::checksum(std::string_view prefix) const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, m] : entries_) {
    if (name.compare(0, prefix.size(), prefix) != 0) continue;
    const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(m.size()) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace mmtm
