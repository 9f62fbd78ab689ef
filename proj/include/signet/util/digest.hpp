#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace signet {

/// FNV-1a 64-bit content digest. Used to key stage outputs by their inputs,
/// not for integrity against tampering.
class Digest {
 public:
  Digest& update(std::span<const std::uint8_t> bytes) noexcept;
  Digest& update(std::string_view text) noexcept;
  std::uint64_t value() const noexcept { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace signet
