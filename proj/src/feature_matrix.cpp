#include "splag/feature_matrix.hpp"

#include <bit>
#include <fstream>

#include <nlohmann/json.hpp>

#include "splag/common.hpp"
#include "splag/csv_io.hpp"

namespace splag {

std::string to_string(FeatureSetKind kind) {
  switch (kind) {
    case FeatureSetKind::base:
      return "base";
    case FeatureSetKind::zone:
      return "zone";
    case FeatureSetKind::spatial:
      return "spatial";
  }
  return "?";
}

FeatureSetKind parse_feature_set_kind(std::string_view text) {
  if (text == "base") return FeatureSetKind::base;
  if (text == "zone" || text == "zip") return FeatureSetKind::zone;
  if (text == "spatial") return FeatureSetKind::spatial;
  throw Error("unknown feature set '" + std::string(text) + "' (expected base, zone or spatial)");
}

FeatureMatrix::FeatureMatrix(FeatureSetKind kind, std::vector<RowKey> keys) : kind_(kind), keys_(std::move(keys)) {}

std::vector<std::string> FeatureMatrix::names() const {
  std::vector<std::string> out;
  out.reserve(info_.size());
  for (const auto& c : info_) out.push_back(c.name);
  return out;
}

void FeatureMatrix::add_column(std::string name, std::vector<double> values, FeatureSetKind origin,
                               std::string formula) {
  if (values.size() != keys_.size()) {
    throw Error("column '" + name + "' has " + std::to_string(values.size()) + " cells for " +
                std::to_string(keys_.size()) + " rows");
  }
  if (find(name)) throw Error("duplicate column '" + name + "'");
  info_.push_back({std::move(name), origin, std::move(formula)});
  columns_.push_back(std::move(values));
}

std::optional<std::size_t> FeatureMatrix::find(std::string_view name) const {
  for (std::size_t c = 0; c < info_.size(); ++c) {
    if (info_[c].name == name) return c;
  }
  return std::nullopt;
}

std::span<const double> FeatureMatrix::column(std::string_view name) const {
  auto c = find(name);
  if (!c) throw Error("no column '" + std::string(name) + "'");
  return columns_[*c];
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> rows) const {
  std::vector<RowKey> keys;
  keys.reserve(rows.size());
  for (std::size_t r : rows) keys.push_back(keys_.at(r));
  FeatureMatrix out(kind_, std::move(keys));
  out.info_ = info_;
  out.columns_.resize(columns_.size());
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    auto& dst = out.columns_[c];
    dst.reserve(rows.size());
    for (std::size_t r : rows) dst.push_back(columns_[c][r]);
  }
  return out;
}

FeatureMatrix FeatureMatrix::select_columns(std::span<const std::string> names) const {
  FeatureMatrix out(kind_, keys_);
  for (const auto& n : names) {
    auto c = find(n);
    if (!c) throw Error("no column '" + n + "'");
    out.info_.push_back(info_[*c]);
    out.columns_.push_back(columns_[*c]);
  }
  return out;
}

std::uint64_t FeatureMatrix::fingerprint() const {
  std::string buf;
  buf.reserve(64 + rows() * 16);
  for (const auto& k : keys_) buf += k.bbl.str() + ":" + std::to_string(k.year) + ";";
  std::uint64_t h = fnv1a(buf);
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    h ^= fnv1a(info_[c].name) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    std::string cells;
    cells.reserve(columns_[c].size() * 8);
    for (double v : columns_[c]) {
      // All NaNs hash alike so missing is a single value.
      std::uint64_t bits = is_missing(v) ? 0x7ff8000000000000ULL : std::bit_cast<std::uint64_t>(v);
      cells.append(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
    h ^= fnv1a(cells) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

bool operator==(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.kind_ != b.kind_ || a.keys_ != b.keys_ || a.names() != b.names()) return false;
  for (std::size_t c = 0; c < a.columns_.size(); ++c) {
    for (std::size_t r = 0; r < a.rows(); ++r) {
      double x = a.columns_[c][r], y = b.columns_[c][r];
      if (is_missing(x) != is_missing(y)) return false;
      if (!is_missing(x) && x != y) return false;
    }
  }
  return true;
}

void write_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& m, const std::string& config_hash,
                          std::uint64_t seed) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  std::vector<std::string> header{"bbl", "year"};
  for (const auto& c : m.column_info()) header.push_back(c.name);
  write_csv_row(out, header);
  std::vector<std::string> fields(header.size());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    fields[0] = m.keys()[r].bbl.str();
    fields[1] = std::to_string(m.keys()[r].year);
    for (std::size_t c = 0; c < m.cols(); ++c) fields[c + 2] = format_double(m.at(r, c));
    write_csv_row(out, fields);
  }

  nlohmann::json manifest;
  manifest["kind"] = to_string(m.kind());
  manifest["rows"] = m.rows();
  manifest["config_hash"] = config_hash;
  manifest["seed"] = seed;
  auto& cols = manifest["columns"] = nlohmann::json::array();
  for (const auto& c : m.column_info()) {
    cols.push_back({{"name", c.name}, {"kind", to_string(c.origin)}, {"formula", c.formula}});
  }
  std::ofstream side(path.string() + ".manifest.json", std::ios::binary);
  side << manifest.dump(2) << '\n';
}

FeatureMatrix read_feature_matrix(const std::filesystem::path& path) {
  std::ifstream side(path.string() + ".manifest.json");
  if (!side) throw Error("missing feature manifest " + path.string() + ".manifest.json");
  nlohmann::json manifest = nlohmann::json::parse(side);

  CsvTable t = read_csv(path, ',');
  if (t.header.size() < 2 || t.header[0] != "bbl" || t.header[1] != "year") {
    throw Error(path.string() + ": feature CSV must start with bbl,year");
  }
  const auto& cols = manifest.at("columns");
  if (cols.size() + 2 != t.header.size()) throw Error(path.string() + ": manifest and CSV disagree on columns");

  std::vector<RowKey> keys;
  keys.reserve(t.rows.size());
  for (const auto& row : t.rows) keys.push_back({BblKey::parse(row[0]), static_cast<int>(parse_double(row[1]))});
  FeatureMatrix m(parse_feature_set_kind(manifest.at("kind").get<std::string>()), std::move(keys));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    std::string name = cols[c].at("name").get<std::string>();
    if (t.header[c + 2] != name) throw Error(path.string() + ": column order differs from manifest at " + name);
    std::vector<double> values;
    values.reserve(t.rows.size());
    for (const auto& row : t.rows) values.push_back(parse_double(row[c + 2]));
    m.add_column(std::move(name), std::move(values), parse_feature_set_kind(cols[c].at("kind").get<std::string>()),
                 cols[c].at("formula").get<std::string>());
  }
  return m;
}

}  // namespace splag
