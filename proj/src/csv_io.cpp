#include "splag/csv_io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "splag/common.hpp"

namespace splag {

namespace fs = std::filesystem;

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw Error("missing column '" + std::string(name) + "'");
}

bool CsvTable::has_column(std::string_view name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

CsvTable parse_csv(std::istream& in, char delimiter) {
  CsvTable table;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  bool first = true;

  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
    bool blank = record.size() == 1 && record[0].empty();
    if (!blank) {
      if (first) {
        table.header = std::move(record);
        first = false;
      } else {
        if (record.size() != table.header.size()) {
          throw Error("row " + std::to_string(table.rows.size() + 2) + " has " +
                      std::to_string(record.size()) + " fields, expected " +
                      std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(record));
      }
    }
    record.clear();
  };

  char c;
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == delimiter) {
      record.push_back(std::move(field));
      field.clear();
      field_started = false;
    } else if (c == '\n') {
      end_record();
    } else if (c != '\r') {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw Error("unterminated quoted field");
  if (field_started || !record.empty()) end_record();
  return table;
}

CsvTable read_csv(const fs::path& path, char delimiter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  if (delimiter == '\0') delimiter = path.extension() == ".tsv" ? '\t' : ',';
  try {
    return parse_csv(in, delimiter);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields, char delimiter) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.put(delimiter);
    const std::string& f = fields[i];
    bool quote = f.find_first_of(std::string{delimiter, '"', '\n', '\r'}) != std::string::npos;
    if (!quote) {
      out << f;
      continue;
    }
    out.put('"');
    for (char c : f) {
      if (c == '"') out.put('"');
      out.put(c);
    }
    out.put('"');
  }
  out.put('\n');
}

void write_csv(const fs::path& path, const CsvTable& table, char delimiter) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_csv_row(out, table.header, delimiter);
  for (const auto& row : table.rows) write_csv_row(out, row, delimiter);
}

std::string ColumnMapping::source(const std::string& table, const std::string& field) const {
  auto t = tables.find(table);
  if (t == tables.end()) return field;
  auto f = t->second.find(field);
  return f == t->second.end() ? field : f->second;
}

ColumnMapping ColumnMapping::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  nlohmann::json doc = nlohmann::json::parse(in);
  ColumnMapping m;
  for (auto& [key, value] : doc.items()) {
    if (key == "delimiter") {
      auto d = value.get<std::string>();
      if (d.size() != 1 && d != "\\t") throw Error("mapping delimiter must be one character");
      m.delimiter = d == "\\t" ? '\t' : d[0];
    } else if (value.is_object()) {
      for (auto& [field, src] : value.items()) m.tables[key][field] = src.get<std::string>();
    } else {
      throw Error("mapping key '" + key + "' must be an object of field -> column");
    }
  }
  return m;
}

void ColumnMapping::save(const fs::path& path) const {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [table, fields] : tables) doc[table] = fields;
  if (delimiter) doc["delimiter"] = std::string(1, delimiter);
  std::ofstream out(path);
  out << doc.dump(2) << '\n';
}

const std::vector<std::string>& parcel_fields() {
  static const std::vector<std::string> f{
      "bbl",          "year",        "lat",          "lon",         "building_class", "borough",
      "zip",          "num_bldgs",   "bldg_area",    "com_area",    "res_area",       "office_area",
      "retail_area",  "garage_area", "storage_area", "factory_area", "other_area",    "assess_total",
      "year_built",   "num_floors",  "units_res",    "units_total"};
  return f;
}

const std::vector<std::string>& sale_fields() {
  static const std::vector<std::string> f{"bbl", "sale_year", "sale_price", "gross_square_feet"};
  return f;
}

const std::vector<std::string>& panel_fields() {
  static const std::vector<std::string> f = [] {
    auto v = parcel_fields();
    v.insert(v.end(), {"sold", "sale_price_total", "sale_psf"});
    return v;
  }();
  return f;
}

namespace {

int to_int(std::string_view s, std::string_view what) {
  double v = parse_double(s);
  if (is_missing(v)) throw Error("missing required integer field '" + std::string(what) + "'");
  return static_cast<int>(v);
}

double to_num(std::string_view s) {
  double v = parse_double(s);
  return is_missing(v) ? 0.0 : v;
}

std::optional<double> to_opt(std::string_view s) {
  double v = parse_double(s);
  if (is_missing(v)) return std::nullopt;
  return v;
}

std::string opt_str(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

/// Resolves canonical field names to column indices for one table.
class FieldIndex {
 public:
  FieldIndex(const CsvTable& t, const ColumnMapping& m, std::string table) : t_(t), m_(m), table_(std::move(table)) {}
  std::size_t operator()(const std::string& field) const { return t_.column(m_.source(table_, field)); }
  bool has(const std::string& field) const { return t_.has_column(m_.source(table_, field)); }

 private:
  const CsvTable& t_;
  const ColumnMapping& m_;
  std::string table_;
};

ParcelRecord parcel_from_row(const std::vector<std::string>& row, const FieldIndex& col, bool has_bbl) {
  ParcelRecord p;
  p.borough = to_int(row[col("borough")], "borough");
  if (has_bbl) {
    p.bbl = BblKey::parse(row[col("bbl")]);
  } else {
    p.bbl = make_bbl(p.borough, to_int(row[col("block")], "block"), to_int(row[col("lot")], "lot"));
  }
  p.year = to_int(row[col("year")], "year");
  p.lat = to_opt(row[col("lat")]);
  p.lon = to_opt(row[col("lon")]);
  p.building_class = row[col("building_class")];
  p.zip = row[col("zip")];
  p.num_bldgs = static_cast<int>(to_num(row[col("num_bldgs")]));
  p.area.total = to_num(row[col("bldg_area")]);
  p.area.commercial = to_num(row[col("com_area")]);
  p.area.residential = to_num(row[col("res_area")]);
  p.area.office = to_num(row[col("office_area")]);
  p.area.retail = to_num(row[col("retail_area")]);
  p.area.garage = to_num(row[col("garage_area")]);
  p.area.storage = to_num(row[col("storage_area")]);
  p.area.factory = to_num(row[col("factory_area")]);
  p.area.other = to_num(row[col("other_area")]);
  p.assessed_total = to_num(row[col("assess_total")]);
  p.year_built = static_cast<int>(to_num(row[col("year_built")]));
  p.floors = to_num(row[col("num_floors")]);
  p.units_res = to_num(row[col("units_res")]);
  p.units_total = to_num(row[col("units_total")]);
  return p;
}

std::vector<std::string> parcel_to_fields(const ParcelRecord& p) {
  const auto& a = p.area;
  return {p.bbl.str(),
          std::to_string(p.year),
          opt_str(p.lat),
          opt_str(p.lon),
          p.building_class,
          std::to_string(p.borough),
          p.zip,
          std::to_string(p.num_bldgs),
          format_double(a.total),
          format_double(a.commercial),
          format_double(a.residential),
          format_double(a.office),
          format_double(a.retail),
          format_double(a.garage),
          format_double(a.storage),
          format_double(a.factory),
          format_double(a.other),
          format_double(p.assessed_total),
          std::to_string(p.year_built),
          format_double(p.floors),
          format_double(p.units_res),
          format_double(p.units_total)};
}

}  // namespace

std::vector<ParcelRecord> read_parcels(const fs::path& path, const ColumnMapping& mapping) {
  CsvTable t = read_csv(path, mapping.delimiter);
  FieldIndex col(t, mapping, "parcels");
  bool has_bbl = col.has("bbl");
  std::vector<ParcelRecord> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) out.push_back(parcel_from_row(row, col, has_bbl));
  return out;
}

std::vector<SaleRecord> read_sales(const fs::path& path, const ColumnMapping& mapping) {
  CsvTable t = read_csv(path, mapping.delimiter);
  FieldIndex col(t, mapping, "sales");
  bool has_bbl = col.has("bbl");
  std::vector<SaleRecord> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    SaleRecord s;
    if (has_bbl) {
      s.bbl = BblKey::parse(row[col("bbl")]);
    } else {
      s.bbl = make_bbl(to_int(row[col("borough")], "borough"), to_int(row[col("block")], "block"),
                       to_int(row[col("lot")], "lot"));
    }
    s.sale_year = to_int(row[col("sale_year")], "sale_year");
    s.sale_price_total = to_num(row[col("sale_price")]);
    s.gross_square_feet = to_num(row[col("gross_square_feet")]);
    out.push_back(s);
  }
  return out;
}

AliasTable read_aliases(const fs::path& path) {
  CsvTable t = read_csv(path);
  auto rep = t.column("reported_bbl");
  auto can = t.column("canonical_bbl");
  AliasTable aliases;
  for (const auto& row : t.rows) aliases.add(BblKey::parse(row[rep]), BblKey::parse(row[can]));
  return aliases;
}

void write_parcels(const fs::path& path, const std::vector<ParcelRecord>& parcels) {
  CsvTable t{parcel_fields(), {}};
  t.rows.reserve(parcels.size());
  for (const auto& p : parcels) t.rows.push_back(parcel_to_fields(p));
  write_csv(path, t);
}

void write_sales(const fs::path& path, const std::vector<SaleRecord>& sales) {
  CsvTable t{sale_fields(), {}};
  for (const auto& s : sales) {
    t.rows.push_back({s.bbl.str(), std::to_string(s.sale_year), format_double(s.sale_price_total),
                      format_double(s.gross_square_feet)});
  }
  write_csv(path, t);
}

void write_aliases(const fs::path& path, const AliasTable& aliases) {
  CsvTable t{{"reported_bbl", "canonical_bbl"}, {}};
  for (const auto& [rep, can] : aliases.entries()) t.rows.push_back({rep.str(), can.str()});
  write_csv(path, t);
}

void write_panel(const fs::path& path, const std::vector<PropertyYearRecord>& panel) {
  CsvTable t{panel_fields(), {}};
  t.rows.reserve(panel.size());
  for (const auto& r : panel) {
    auto fields = parcel_to_fields(r.parcel);
    fields.push_back(r.sold ? "1" : "0");
    fields.push_back(opt_str(r.sale_price_total));
    fields.push_back(opt_str(r.sale_psf));
    t.rows.push_back(std::move(fields));
  }
  write_csv(path, t);
}

std::vector<PropertyYearRecord> read_panel(const fs::path& path) {
  CsvTable t = read_csv(path, ',');
  if (t.header != panel_fields()) throw Error(path.string() + ": panel header does not match the fixed layout");
  ColumnMapping identity;
  FieldIndex col(t, identity, "panel");
  std::vector<PropertyYearRecord> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    PropertyYearRecord r;
    r.parcel = parcel_from_row(row, col, true);
    r.sold = row[col("sold")] == "1";
    r.sale_price_total = to_opt(row[col("sale_price_total")]);
    r.sale_psf = to_opt(row[col("sale_psf")]);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace splag
