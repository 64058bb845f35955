#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace splag {

/// Borough-Block-Lot tax lot identifier. Canonical text form is
/// "{borough}_{block}_{lot}", e.g. "1_829_16".
struct BblKey {
  int borough = 0;
  std::int64_t block = 0;
  std::int64_t lot = 0;

  auto operator<=>(const BblKey&) const = default;

  std::string str() const;

  /// Inverse of str(). Throws InvalidKeyError on malformed input.
  static BblKey parse(std::string_view text);
};

/// Builds a validated key: borough must be 1..5, block and lot non-negative.
BblKey make_bbl(int borough, std::int64_t block, std::int64_t lot);

struct BblHash {
  std::size_t operator()(const BblKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(k.borough);
    h = h * 1000003ULL ^ static_cast<std::uint64_t>(k.block);
    h = h * 1000003ULL ^ static_cast<std::uint64_t>(k.lot);
    return std::hash<std::uint64_t>{}(h);
  }
};

}  // namespace splag
