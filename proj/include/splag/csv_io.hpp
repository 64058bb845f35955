#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "splag/records.hpp"

namespace splag {

/// In-memory delimited table. Fields are kept as text.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header name; throws Error naming the column when absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

/// RFC 4180 style reader (quoted fields, embedded delimiters and quotes).
/// A delimiter of '\0' picks tab for *.tsv files and comma otherwise.
CsvTable read_csv(const std::filesystem::path& path, char delimiter = '\0');
CsvTable parse_csv(std::istream& in, char delimiter = ',');

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields, char delimiter = ',');
void write_csv(const std::filesystem::path& path, const CsvTable& table, char delimiter = ',');

/// Column-mapping sidecar: for each logical table ("parcels", "sales") a map
/// from canonical field name to the header used in the source file. Fields not
/// listed keep their canonical name.
struct ColumnMapping {
  std::map<std::string, std::map<std::string, std::string>> tables;
  char delimiter = '\0';

  std::string source(const std::string& table, const std::string& field) const;
  static ColumnMapping load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

const std::vector<std::string>& parcel_fields();
const std::vector<std::string>& sale_fields();
const std::vector<std::string>& panel_fields();

std::vector<ParcelRecord> read_parcels(const std::filesystem::path& path, const ColumnMapping& mapping = {});
std::vector<SaleRecord> read_sales(const std::filesystem::path& path, const ColumnMapping& mapping = {});
AliasTable read_aliases(const std::filesystem::path& path);

void write_parcels(const std::filesystem::path& path, const std::vector<ParcelRecord>& parcels);
void write_sales(const std::filesystem::path& path, const std::vector<SaleRecord>& sales);
void write_aliases(const std::filesystem::path& path, const AliasTable& aliases);

/// Panel persistence with the fixed header order of panel_fields().
void write_panel(const std::filesystem::path& path, const std::vector<PropertyYearRecord>& panel);
std::vector<PropertyYearRecord> read_panel(const std::filesystem::path& path);

}  // namespace splag
