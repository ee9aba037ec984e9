#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "common.hpp"
#include "trainer.hpp"

namespace tabdar {

// Layout: "TDAR" | u32 version | u64 header length | JSON header | f32 payload,
// all little-endian. The header's tensor directory gives name, shape and
// byte offset into the payload for every parameter tensor.
inline constexpr char kCheckpointMagic[4] = {'T', 'D', 'A', 'R'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public Error {
 public:
  enum class Kind { Io, Truncated, BadMagic, UnsupportedVersion, ShapeMismatch, Malformed };

  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename U>
void put(std::string& out, U value) {
  char buf[sizeof(U)];
  std::memcpy(buf, &value, sizeof(U));
  out.append(buf, sizeof(U));
}

template <typename U>
U get(const std::string& in, std::size_t& pos) {
  if (in.size() < pos + sizeof(U)) throw CheckpointError(CheckpointError::Kind::Truncated, "checkpoint truncated");
  U value;
  std::memcpy(&value, in.data() + pos, sizeof(U));
  pos += sizeof(U);
  return value;
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ckpt) {
  Model<float> model = ckpt.model;
  auto params = model.params();
  nlohmann::json tensors = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& p : params) {
    tensors.push_back({{"name", p.name}, {"shape", {p.tensor->rows(), p.tensor->cols()}}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(p.tensor->size()) * sizeof(float);
  }
  nlohmann::json transforms = nlohmann::json::array();
  for (const auto& t : ckpt.transforms) transforms.push_back(to_json(t));
  const nlohmann::json header = {{"schema", to_json(ckpt.schema)},
                                 {"transforms", std::move(transforms)},
                                 {"config", to_json(ckpt.config)},
                                 {"final_epoch", ckpt.final_epoch},
                                 {"seed", ckpt.config.seed},
                                 {"tensors", std::move(tensors)},
                                 {"payload_bytes", offset}};
  const std::string text = header.dump();
  std::string out(kCheckpointMagic, 4);
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  detail::put<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& p : params)
    out.append(reinterpret_cast<const char*>(p.tensor->data()), static_cast<std::size_t>(p.tensor->size()) * sizeof(float));
  return out;
}

inline Checkpoint deserialize_checkpoint(const std::string& bytes) {
  using Kind = CheckpointError::Kind;
  if (bytes.size() < 4) throw CheckpointError(Kind::Truncated, "checkpoint truncated before magic");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) throw CheckpointError(Kind::BadMagic, "not a tabdar checkpoint (bad magic)");
  std::size_t pos = 4;
  const auto version = detail::get<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion)
    throw CheckpointError(Kind::UnsupportedVersion, "unsupported checkpoint version " + std::to_string(version));
  const auto header_len = detail::get<std::uint64_t>(bytes, pos);
  if (bytes.size() - pos < header_len) throw CheckpointError(Kind::Truncated, "checkpoint truncated in header");
  nlohmann::json header;
  Checkpoint ckpt;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, header_len));
    ckpt.schema = schema_from_json(header.at("schema"));
    ckpt.schema.validate();
    for (const auto& t : header.at("transforms")) ckpt.transforms.push_back(transform_from_json(t));
    ckpt.config = train_config_from_json(header.at("config"));
    ckpt.final_epoch = header.at("final_epoch").get<int>();
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(Kind::Malformed, std::string("malformed checkpoint header: ") + e.what());
  }
  if (ckpt.transforms.size() != ckpt.schema.size())
    throw CheckpointError(Kind::ShapeMismatch, "transform count does not match schema");
  pos += header_len;

  Rng rng(0);
  ckpt.model = Model<float>::make(ckpt.schema, ckpt.config.model(), rng);
  auto params = ckpt.model.params();
  const auto& dir = header.at("tensors");
  if (dir.size() != params.size())
    throw CheckpointError(Kind::ShapeMismatch, "checkpoint has " + std::to_string(dir.size()) + " tensors, model expects " +
                                                   std::to_string(params.size()));
  const std::uint64_t payload = header.value("payload_bytes", std::uint64_t{0});
  if (bytes.size() - pos < payload) throw CheckpointError(Kind::Truncated, "checkpoint truncated in tensor payload");
  if (bytes.size() - pos > payload) throw CheckpointError(Kind::Malformed, "trailing bytes after tensor payload");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& entry = dir[i];
    Mat<float>& t = *params[i].tensor;
    const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
    if (entry.at("name").get<std::string>() != params[i].name || shape.size() != 2 || shape[0] != t.rows() ||
        shape[1] != t.cols())
      throw CheckpointError(Kind::ShapeMismatch, "tensor '" + entry.at("name").get<std::string>() +
                                                     "' does not match model parameter '" + params[i].name + "'");
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const std::uint64_t len = static_cast<std::uint64_t>(t.size()) * sizeof(float);
    if (offset + len > payload) throw CheckpointError(Kind::Truncated, "tensor '" + params[i].name + "' exceeds payload");
    std::memcpy(t.data(), bytes.data() + pos + offset, len);
  }
  return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointError::Kind::Io, "cannot write checkpoint " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(CheckpointError::Kind::Io, "failed writing checkpoint " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::Io, "cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace tabdar
