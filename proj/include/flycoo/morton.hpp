#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>

namespace flycoo::morton {

// Z-order over coordinate vectors of unequal bit widths. The interleaving is
// truncated: at bit level l only modes whose width exceeds l contribute a
// bit, and within a level mode 0 is most significant.

constexpr unsigned bit_width_for(std::uint64_t extent) {
  return extent <= 1 ? 0u : static_cast<unsigned>(std::bit_width(extent - 1));
}

/// Z-order comparison: the coordinate pair that differs at the highest bit
/// level decides; ties at a level go to the lowest mode. Works for any widths
/// since no key is materialised.
template <class T>
constexpr bool less(std::span<const T> a, std::span<const T> b) {
  std::size_t decisive = 0;
  std::uint64_t decisive_xor = 0;
  for (std::size_t m = 0; m < a.size(); ++m) {
    const std::uint64_t x = static_cast<std::uint64_t>(a[m]) ^ static_cast<std::uint64_t>(b[m]);
    // Strictly greater keeps the earlier mode on equal levels.
    if (std::bit_width(x) > std::bit_width(decisive_xor)) {
      decisive = m;
      decisive_xor = x;
    }
  }
  return a[decisive] < b[decisive];
}

/// Materialised truncated-interleave key. `widths[m]` bits of coordinate m
/// are used; throws if the total exceeds 64 bits.
template <class T>
std::uint64_t encode(std::span<const T> coords, std::span<const unsigned> widths) {
  unsigned total = 0, top = 0;
  for (auto w : widths) {
    total += w;
    if (w > top) top = w;
  }
  if (total > 64) throw std::length_error("morton key wider than 64 bits");
  std::uint64_t key = 0;
  for (unsigned level = top; level-- > 0;)
    for (std::size_t m = 0; m < coords.size(); ++m)
      if (level < widths[m])
        key = (key << 1) | ((static_cast<std::uint64_t>(coords[m]) >> level) & 1u);
  return key;
}

}  // namespace flycoo::morton
