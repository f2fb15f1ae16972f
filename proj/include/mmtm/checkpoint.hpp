#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "mmtm/model.hpp"

namespace mmtm {

/// On-disk layout:
///   8 bytes   magic "MMTMCKPT"
///   8 bytes   header length N, unsigned little-endian
///   N bytes   JSON header {format_version, config, vocab_hash, dtype,
///             params: [{name, shape, offset}]}
///   payload   float64 little-endian, row-major, in manifest order; offsets
///             are byte offsets from the start of the payload
struct Checkpoint {
  Model model;
  std::uint64_t vocab_hash = 0;
};

inline constexpr int kCheckpointFormatVersion = 1;

std::string serialize_checkpoint(const Model& model, std::uint64_t vocab_hash);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Model& model, std::uint64_t vocab_hash);
/// Throws Error(Io) or Error(BadCheckpoint).
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string hash_hex(std::uint64_t hash);

}  // namespace mmtm
