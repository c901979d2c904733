#pragma once

#include <cstddef>
#include <cstdint>

namespace pcv2 {

inline std::uint32_t fnv1a32(const void* data, std::size_t len, std::uint32_t h = 0x811c9dc5u) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x01000193u;
  }
  return h;
}

inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace pcv2
