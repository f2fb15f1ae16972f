#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmtm/dataset.hpp"
#include "mmtm/pca.hpp"

namespace mmtm {

/// Templated one- and two-operator word problems with distinct quantities
/// and exact answers. Record i uses template i modulo the template count, so
/// every template appears once n reaches it. Equations use raw numbers.
std::vector<RawRecord> synthetic_corpus(std::size_t n, std::uint64_t seed);

std::size_t synthetic_template_count();

/// Random vectors for the given tokens, for exercising the embedding path
/// without a real pretrained model.
PretrainedEmbeddings synthetic_embeddings(std::span<const std::string> tokens, int width, std::uint64_t seed);

}  // namespace mmtm
