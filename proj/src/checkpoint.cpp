#include "mmtm/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "mmtm/error.hpp"

namespace mmtm {
namespace {

constexpr std::string_view kMagic = "MMTMCKPT";

template <typename T>
void put_le(std::string& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(const char* data) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, data, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

std::string serialize_checkpoint(const Model& model, std::uint64_t vocab_hash) {
  nlohmann::ordered_json header;
  header["format_version"] = kCheckpointFormatVersion;
  header["config"] = nlohmann::ordered_json::parse(model.config.to_json());
  header["vocab_hash"] = hash_hex(vocab_hash);
  header["dtype"] = "f64";
  auto manifest = nlohmann::ordered_json::array();
  std::size_t offset = 0;
  for (const auto& [name, m] : model.params) {
    manifest.push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}, {"offset", offset}});
    offset += static_cast<std::size_t>(m.size()) * sizeof(double);
  }
  header["params"] = std::move(manifest);
  const std::string text = header.dump();

  std::string out;
  out.reserve(kMagic.size() + 8 + text.size() + offset);
  out.append(kMagic);
  put_le<std::uint64_t>(out, text.size());
  out.append(text);
  for (const auto& [name, m] : model.params) {
    for (Eigen::Index i = 0; i < m.size(); ++i) put_le<double>(out, m.data()[i]);
  }
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  auto bad = [](const std::string& msg) { return Error(ErrorKind::BadCheckpoint, msg); };
  if (bytes.size() < kMagic.size() + 8 || bytes.substr(0, kMagic.size()) != kMagic) throw bad("missing magic");
  const auto header_len = get_le<std::uint64_t>(bytes.data() + kMagic.size());
  const std::size_t payload_start = kMagic.size() + 8 + header_len;
  if (payload_start > bytes.size()) throw bad("truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(kMagic.size() + 8, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw bad(std::string("header: ") + e.what());
  }
  if (header.value("format_version", 0) != kCheckpointFormatVersion) throw bad("unsupported format_version");
  if (header.value("dtype", "") != "f64") throw bad("unsupported dtype");

  Checkpoint ckpt;
  ckpt.model.config = ModelConfig::from_json(header.at("config").dump());
  ckpt.vocab_hash = std::stoull(header.at("vocab_hash").get<std::string>(), nullptr, 16);
  const std::string_view payload = bytes.substr(payload_start);
  for (const auto& entry : header.at("params")) {
    const auto rows = entry.at("shape").at(0).get<Eigen::Index>();
    const auto cols = entry.at("shape").at(1).get<Eigen::Index>();
    const auto offset = entry.at("offset").get<std::size_t>();
    const std::size_t n = static_cast<std::size_t>(rows * cols);
    if (offset + n * sizeof(double) > payload.size()) throw bad("payload truncated at " + entry.at("name").dump());
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < n; ++i) m.data()[i] = get_le<double>(payload.data() + offset + i * sizeof(double));
    ckpt.model.params.add(entry.at("name").get<std::string>(), std::move(m));
  }

  // Shapes must agree with what the stored config would build.
  Model reference = init_model(ckpt.model.config, std::nullopt, ckpt.model.decoders());
  if (reference.params.tensor_count() != ckpt.model.params.tensor_count()) throw bad("parameter set does not match config");
  for (const auto& [name, m] : reference.params) {
    if (!ckpt.model.params.contains(name)) throw bad("missing parameter " + name);
    const Matrix& got = ckpt.model.params.at(name);
    if (got.rows() != m.rows() || got.cols() != m.cols()) throw bad("shape mismatch for " + name);
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, std::uint64_t vocab_hash) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  const std::string bytes = serialize_checkpoint(model, vocab_hash);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace mmtm
