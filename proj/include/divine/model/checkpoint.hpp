#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "divine/data/container.hpp"
#include "divine/model/baselines.hpp"
#include "divine/model/divine_model.hpp"

namespace divine {

inline constexpr int kCheckpointVersion = 1;

// Builds an untrained network from the "network" object of a checkpoint
// header or an experiment record.
inline std::unique_ptr<Network> make_network(const nlohmann::json& cfg, std::uint64_t init_seed = 0) {
  const std::string kind = cfg.value("kind", std::string());
  const LossConfig loss = cfg.value("loss", LossConfig{});
  if (cfg.contains("model")) return std::make_unique<DivineModel>(cfg.at("model").get<ModelConfig>(), loss, init_seed);
  if (cfg.contains("baseline")) return std::make_unique<BaselineNetwork>(cfg.at("baseline").get<BaselineConfig>(), loss, init_seed);
  throw ConfigError("network config of kind '" + kind + "' has neither a model nor a baseline section");
}

struct Checkpoint {
  nlohmann::json network;  // config_json() of the saved network
  nlohmann::json meta;     // free-form: fold, seed, test subjects, ...
};

inline std::string encode_checkpoint(const Network& net, const nlohmann::json& meta = nlohmann::json::object()) {
  nlohmann::json header;
  header["format_version"] = kCheckpointVersion;
  header["network"] = net.config_json();
  header["meta"] = meta;
  nlohmann::json groups = nlohmann::json::array();
  for (const Param& p : net.params()) groups.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  header["groups"] = groups;

  std::string out = header.dump() + "\n";
  static_assert(sizeof(double) == 8);
  for (const Param& p : net.params()) {
    const std::size_t n = static_cast<std::size_t>(p.value.size());
    const std::size_t at = out.size();
    out.resize(at + 8 * n);
    char* dst = out.data() + at;
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, p.value.data() + i, 8);
      for (int b = 0; b < 8; ++b) dst[8 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
    }
  }
  return out;
}

// Restores parameter values into `net`, which must have been built from
// the same configuration (see make_network).
inline Checkpoint decode_checkpoint(std::string_view bytes, Network& net) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw ParseError(ParseError::Kind::truncated, 0, "checkpoint header is not terminated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ParseError::Kind::bad_magic, 0, std::string("checkpoint header: ") + e.what());
  }
  if (header.value("format_version", -1) != kCheckpointVersion) {
    throw ParseError(ParseError::Kind::bad_version, 0, "unsupported checkpoint version " + header.value("format_version", nlohmann::json()).dump());
  }
  const auto& groups = header.at("groups");
  if (groups.size() != net.params().size()) {
    throw ConfigError("checkpoint has " + std::to_string(groups.size()) + " parameter groups, network expects " +
                      std::to_string(net.params().size()));
  }
  std::size_t offset = nl + 1;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    Param& p = net.params()[g];
    const std::string name = groups[g].at("name").get<std::string>();
    const Index rows = groups[g].at("rows").get<Index>();
    const Index cols = groups[g].at("cols").get<Index>();
    if (name != p.name || rows != p.value.rows() || cols != p.value.cols()) {
      throw ConfigError("checkpoint group " + name + " [" + std::to_string(rows) + "x" + std::to_string(cols) +
                        "] does not match network group " + p.name + " " + shape_str(p.value));
    }
    const std::size_t n = static_cast<std::size_t>(rows * cols);
    if (offset + 8 * n > bytes.size()) throw ParseError(ParseError::Kind::truncated, offset, "checkpoint payload truncated in " + name);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + 8 * i + b])) << (8 * b);
      std::memcpy(p.value.data() + i, &bits, 8);
    }
    offset += 8 * n;
  }
  if (offset != bytes.size()) throw ParseError(ParseError::Kind::trailing_bytes, offset, "trailing bytes after checkpoint payload");
  return Checkpoint{header.at("network"), header.value("meta", nlohmann::json::object())};
}

inline void save_checkpoint(const std::filesystem::path& path, const Network& net, const nlohmann::json& meta = nlohmann::json::object()) {
  const std::string bytes = encode_checkpoint(net, meta);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

inline nlohmann::json read_checkpoint_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint not found: " + path.string());
  std::string line;
  std::getline(in, line);
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ParseError::Kind::bad_magic, 0, std::string("checkpoint header: ") + e.what());
  }
}

struct LoadedNetwork {
  std::unique_ptr<Network> net;
  Checkpoint checkpoint;
};

inline LoadedNetwork load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("checkpoint not found: " + path.string());
  const std::string bytes = read_file_bytes(path);
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw ParseError(ParseError::Kind::truncated, 0, "checkpoint header is not terminated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(std::string_view(bytes).substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ParseError::Kind::bad_magic, 0, std::string("checkpoint header: ") + e.what());
  }
  LoadedNetwork out;
  out.net = make_network(header.at("network"));
  out.checkpoint = decode_checkpoint(bytes, *out.net);
  return out;
}

}  // namespace divine
