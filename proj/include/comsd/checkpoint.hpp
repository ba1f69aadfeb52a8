#pragma once

// Checkpoint directory layout:
//
//   <dir>/manifest.json   human-readable: format version, kind, step, config
//                         snapshot, and every network's layers and tensors
//   <dir>/params.bin      all tensors back to back, little-endian float32,
//                         each tensor row-major, in manifest order
//
// Parameters are trained in double precision and stored in single precision.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "comsd/errors.hpp"
#include "comsd/ndmath.hpp"

namespace comsd {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "comsd-checkpoint";

struct Checkpoint {
  std::string kind;  // pretrain | finetune | combine | scratch
  std::int64_t step = 0;
  nlohmann::json config;
  std::vector<std::pair<std::string, DenseNet>> nets;

  const DenseNet& net(const std::string& name) const {
    for (const auto& [n, d] : nets)
      if (n == name) return d;
    throw CheckpointError("checkpoint has no network named '" + name + "'");
  }
  bool has(const std::string& name) const {
    for (const auto& [n, d] : nets)
      if (n == name) return true;
    return false;
  }
};

namespace detail {

inline Activation ParseActivation(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  if (s == "layernorm_tanh") return Activation::kLayerNormTanh;
  if (s == "identity") return Activation::kIdentity;
  throw CheckpointError("checkpoint: unknown activation '" + s + "'");
}

inline void PutF32(std::string& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

inline float GetF32(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return std::bit_cast<float>(bits);
}

}  // namespace detail

inline void SaveCheckpoint(const std::filesystem::path& dir, const Checkpoint& ck) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = kCheckpointFormat;
  manifest["format_version"] = kCheckpointVersion;
  manifest["kind"] = ck.kind;
  manifest["step"] = ck.step;
  manifest["config"] = ck.config;

  std::string payload;
  nlohmann::json nets = nlohmann::json::array();
  for (const auto& [name, net] : ck.nets) {
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      const auto& s = net.layer(l);
      layers.push_back({{"in", s.in}, {"out", s.out}, {"activation", ToString(s.act)}});
    }
    nlohmann::json tensors = nlohmann::json::array();
    for (const Matrix& t : net.params()) {
      tensors.push_back({{"rows", t.rows()}, {"cols", t.cols()}, {"offset", payload.size()}});
      for (Eigen::Index r = 0; r < t.rows(); ++r)
        for (Eigen::Index c = 0; c < t.cols(); ++c)
          detail::PutF32(payload, static_cast<float>(t(r, c)));
    }
    nets.push_back({{"name", name}, {"layers", layers}, {"tensors", tensors}});
  }
  manifest["nets"] = nets;
  manifest["payload"] = {{"file", "params.bin"},
                         {"dtype", "float32"},
                         {"byte_order", "little"},
                         {"layout", "row-major"},
                         {"bytes", payload.size()}};

  {
    std::ofstream out(dir / "params.bin", std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + (dir / "params.bin").string());
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

inline Checkpoint LoadCheckpoint(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path))
    throw CheckpointError("missing checkpoint: no manifest at " + manifest_path.string());
  nlohmann::json m;
  try {
    std::ifstream in(manifest_path);
    in >> m;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("unreadable manifest: ") + e.what());
  }
  if (m.value("format", std::string()) != kCheckpointFormat)
    throw CheckpointError("not a comsd checkpoint: " + manifest_path.string());
  const int version = m.value("format_version", -1);
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint format_version " + std::to_string(version) +
                          " unsupported (expected " + std::to_string(kCheckpointVersion) + ")");

  const fs::path payload_path = dir / m["payload"].value("file", std::string("params.bin"));
  if (!fs::exists(payload_path)) throw CheckpointError("missing payload " + payload_path.string());
  std::ifstream pin(payload_path, std::ios::binary);
  std::vector<unsigned char> payload((std::istreambuf_iterator<char>(pin)),
                                     std::istreambuf_iterator<char>());
  const auto declared = m["payload"].value("bytes", std::uint64_t{0});
  if (payload.size() != declared)
    throw CheckpointError("payload is " + std::to_string(payload.size()) +
                          " bytes, manifest declares " + std::to_string(declared));

  Checkpoint ck;
  ck.kind = m.value("kind", std::string());
  ck.step = m.value("step", std::int64_t{0});
  ck.config = m.value("config", nlohmann::json::object());
  std::uint64_t expected_end = 0;
  for (const auto& jn : m["nets"]) {
    std::vector<int> dims;
    std::vector<Activation> acts;
    for (const auto& jl : jn["layers"]) {
      if (dims.empty()) dims.push_back(jl["in"].get<int>());
      else if (dims.back() != jl["in"].get<int>())
        throw CheckpointError("net '" + jn["name"].get<std::string>() + "': layer dims do not chain");
      dims.push_back(jl["out"].get<int>());
      acts.push_back(detail::ParseActivation(jl["activation"].get<std::string>()));
    }
    DenseNet net;
    try {
      net = DenseNet(dims, acts);
    } catch (const ShapeError& e) {
      throw CheckpointError(std::string("bad architecture: ") + e.what());
    }
    const auto& jt = jn["tensors"];
    if (jt.size() != net.params().size())
      throw CheckpointError("net '" + jn["name"].get<std::string>() + "': tensor count mismatch");
    for (std::size_t i = 0; i < jt.size(); ++i) {
      Matrix& t = net.params()[i];
      if (jt[i]["rows"].get<Eigen::Index>() != t.rows() ||
          jt[i]["cols"].get<Eigen::Index>() != t.cols())
        throw CheckpointError("net '" + jn["name"].get<std::string>() + "': tensor " +
                              std::to_string(i) + " shape disagrees with its layers");
      const auto offset = jt[i]["offset"].get<std::uint64_t>();
      const std::uint64_t bytes = 4ull * static_cast<std::uint64_t>(t.size());
      if (offset != expected_end || offset + bytes > payload.size())
        throw CheckpointError("payload truncated or misaligned at tensor " + std::to_string(i));
      const unsigned char* p = payload.data() + offset;
      for (Eigen::Index r = 0; r < t.rows(); ++r)
        for (Eigen::Index c = 0; c < t.cols(); ++c, p += 4) t(r, c) = detail::GetF32(p);
      expected_end = offset + bytes;
    }
    ck.nets.emplace_back(jn["name"].get<std::string>(), std::move(net));
  }
  if (expected_end != payload.size())
    throw CheckpointError("payload has " + std::to_string(payload.size() - expected_end) +
                          " trailing bytes");
  return ck;
}

// FNV-1a over the raw double bits; used to prove parameters were not touched.
inline std::uint64_t ParamChecksum(const DenseNet& net) {
  std::uint64_t h = 1469598103934665603ull;
  for (const Matrix& t : net.params()) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const auto bits = std::bit_cast<std::uint64_t>(t.data()[i]);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xffu;
        h *= 1099511628211ull;
      }
    }
  }
  return h;
}

}  // namespace comsd
