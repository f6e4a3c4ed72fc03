// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>

namespace pillarstat::detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

inline std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
  return v;
}

inline void put_f32(std::string& buf, float f) {
  const std::uint32_t bits = to_little(std::bit_cast<std::uint32_t>(f));
  char b[4];
  std::memcpy(b, &bits, 4);
  buf.append(b, 4);
}

inline float get_f32(const char* p) {
  std::uint32_t bits;
  std::memcpy(&bits, p, 4);
  return std::bit_cast<float>(to_little(bits));
}

}  // namespace pillarstat::detail
