#include "splag/bbl.hpp"

#include <charconv>

#include "splag/common.hpp"

namespace splag {

std::string BblKey::str() const {
  return std::to_string(borough) + "_" + std::to_string(block) + "_" + std::to_string(lot);
}

namespace {

std::int64_t parse_part(std::string_view part, std::string_view whole) {
  std::int64_t v = 0;
  auto res = std::from_chars(part.data(), part.data() + part.size(), v);
  if (part.empty() || res.ec != std::errc() || res.ptr != part.data() + part.size()) {
    throw InvalidKeyError("malformed BBL '" + std::string(whole) + "'");
  }
  return v;
}

}  // namespace

BblKey BblKey::parse(std::string_view text) {
  auto first = text.find('_');
  auto second = first == std::string_view::npos ? first : text.find('_', first + 1);
  if (second == std::string_view::npos) {
    throw InvalidKeyError("malformed BBL '" + std::string(text) + "'");
  }
  auto borough = parse_part(text.substr(0, first), text);
  auto block = parse_part(text.substr(first + 1, second - first - 1), text);
  auto lot = parse_part(text.substr(second + 1), text);
  return make_bbl(static_cast<int>(borough), block, lot);
}

BblKey make_bbl(int borough, std::int64_t block, std::int64_t lot) {
  if (borough < 1 || borough > 5) {
    throw InvalidKeyError("borough code " + std::to_string(borough) + " outside 1..5");
  }
  if (block < 0 || lot < 0) {
    throw InvalidKeyError("negative block or lot in BBL");
  }
  return BblKey{borough, block, lot};
}

}  // namespace splag
