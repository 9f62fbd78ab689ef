#pragma once

#include <map>
#include <memory>
#include <string>

#include <json.hpp>

#include "signet/nn/layers.hpp"

namespace signet::nn {

/// A set of named networks plus free-form metadata, stored as "SGNM":
///   magic "SGNM", u16 version, u32 descriptor length, descriptor JSON,
///   u32 tensor count, then per tensor: u16 name length, name, 4 x u32 dims,
///   f32 data. All integers little-endian.
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, std::unique_ptr<Sequential>> nets;

  Sequential& net(const std::string& name);
  const Sequential& net(const std::string& name) const;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(Checkpoint& ckpt);
/// Throws FormatError on a malformed or mismatched payload.
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(Checkpoint& ckpt, const std::string& path);
/// A missing or unreadable file is a StartupError: models are loaded before
/// any document is touched.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace signet::nn
