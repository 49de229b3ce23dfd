#include "posiv/dataset_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "posiv/error.hpp"
#include "posiv/hashing.hpp"

namespace posiv {

using nlohmann::json;

std::optional<std::uint64_t> parse_id(std::string_view text) {
  if (text.empty()) return std::nullopt;
  std::uint64_t value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec == std::errc() && ptr == end) return value;
  return fnv1a64(text);
}

std::string format_real(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    // a bare blank line is not a record
    if (!(record.size() == 1 && record.front().empty() && !field_started)) {
      records.push_back(std::move(record));
    }
    record.clear();
    field_started = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        record.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (in_quotes) throw Error(ErrorCode::ParseError, "unterminated quoted CSV field");
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

namespace {

template <typename Int>
std::optional<Int> parse_int(std::string_view text) {
  Int value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) return std::nullopt;
  return value;
}

std::optional<double> parse_double(std::string_view text) {
  double value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) return std::nullopt;
  return value;
}

// Raw text cells for one record keyed by canonical field; nullopt = absent.
using RawRecord = std::array<std::optional<std::string>, 9>;

enum Field { kRequest, kUser, kItem, kPosition, kOutcome, kArm, kReason, kRelevance, kDepth };

std::optional<EdgeObservation> convert(const RawRecord& raw, const Schema& schema) {
  auto get = [&](Field f) -> std::string_view {
    return raw[f] ? std::string_view(*raw[f]) : std::string_view();
  };
  EdgeObservation row;
  auto request = parse_id(get(kRequest));
  auto user = parse_id(get(kUser));
  auto item = parse_id(get(kItem));
  auto position = parse_int<std::int32_t>(get(kPosition));
  auto outcome = parse_int<std::int32_t>(get(kOutcome));
  if (!request || !user || !item || !position || !outcome) return std::nullopt;
  row.request_id = *request;
  row.user_id = *user;
  row.item_id = *item;
  row.position = *position;
  row.outcome = *outcome;
  row.arm = std::string(get(kArm));
  if (schema.has_reason && !get(kReason).empty()) row.reason = std::string(get(kReason));
  if (schema.has_relevance_score && !get(kRelevance).empty()) {
    auto v = parse_double(get(kRelevance));
    if (!v) return std::nullopt;
    row.relevance_score = *v;
  }
  if (schema.has_session_depth && !get(kDepth).empty()) {
    auto v = parse_int<std::int32_t>(get(kDepth));
    if (!v) return std::nullopt;
    row.session_depth = *v;
  }
  if (!is_valid_row(row)) return std::nullopt;
  return row;
}

std::string source_name(const SchemaMap& schema_map, const std::string& canonical) {
  auto it = schema_map.find(canonical);
  return it == schema_map.end() ? canonical : it->second;
}

void check_schema_map(const SchemaMap& schema_map) {
  const auto& names = canonical_columns();
  for (const auto& [key, value] : schema_map) {
    if (std::ranges::find(names, key) == names.end()) {
      throw Error(ErrorCode::InvalidConfig, "schema_map names unknown field '" + key + "'");
    }
  }
}

// Maps canonical field index -> position in `columns`, or -1.
std::array<int, 9> resolve_columns(const std::vector<std::string>& columns,
                                   const SchemaMap& schema_map, Schema& schema) {
  std::array<int, 9> index{};
  const auto& names = canonical_columns();
  for (std::size_t f = 0; f < names.size(); ++f) {
    const auto source = source_name(schema_map, names[f]);
    auto it = std::ranges::find(columns, source);
    index[f] = it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
    if (f <= kArm && index[f] < 0) {
      throw Error(ErrorCode::MissingColumn, "required field '" + names[f] +
                                                "' (source column '" + source + "') not found");
    }
  }
  schema.has_reason = index[kReason] >= 0;
  schema.has_relevance_score = index[kRelevance] >= 0;
  schema.has_session_depth = index[kDepth] >= 0;
  return index;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

bool is_json_lines(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return ext == ".jsonl" || ext == ".ndjson";
}

std::optional<std::string> json_cell(const json& value) {
  if (value.is_null()) return std::nullopt;
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_unsigned()) return std::to_string(value.get<std::uint64_t>());
  if (value.is_number_integer()) return std::to_string(value.get<std::int64_t>());
  if (value.is_number_float()) return format_real(value.get<double>());
  if (value.is_boolean()) return value.get<bool>() ? "1" : "0";
  return value.dump();
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, const SchemaMap& schema_map) {
  check_schema_map(schema_map);
  const std::string text = read_file(path);
  Schema schema;
  std::vector<EdgeObservation> rows;
  std::size_t dropped = 0;

  if (is_json_lines(path)) {
    std::vector<json> records;
    std::vector<std::string> columns;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json record;
      try {
        record = json::parse(line);
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, e.what());
      }
      if (!record.is_object()) throw Error(ErrorCode::ParseError, "JSON line is not an object");
      for (const auto& [key, value] : record.items()) {
        if (std::ranges::find(columns, key) == columns.end()) columns.push_back(key);
      }
      records.push_back(std::move(record));
    }
    const auto index = resolve_columns(columns, schema_map, schema);
    for (const auto& record : records) {
      RawRecord raw;
      for (std::size_t f = 0; f < raw.size(); ++f) {
        if (index[f] < 0) continue;
        auto it = record.find(columns[index[f]]);
        if (it != record.end()) raw[f] = json_cell(*it);
      }
      if (auto row = convert(raw, schema)) {
        rows.push_back(std::move(*row));
      } else {
        ++dropped;
      }
    }
  } else {
    auto records = parse_csv(text);
    if (records.empty()) throw Error(ErrorCode::EmptyDataset, "'" + path.string() + "' has no header");
    const auto& header = records.front();
    const auto index = resolve_columns(header, schema_map, schema);
    for (std::size_t r = 1; r < records.size(); ++r) {
      const auto& cells = records[r];
      if (cells.size() != header.size()) {
        ++dropped;
        continue;
      }
      RawRecord raw;
      for (std::size_t f = 0; f < raw.size(); ++f) {
        if (index[f] >= 0) raw[f] = cells[index[f]];
      }
      if (auto row = convert(raw, schema)) {
        rows.push_back(std::move(*row));
      } else {
        ++dropped;
      }
    }
  }

  if (rows.empty()) {
    throw Error(ErrorCode::EmptyDataset, "'" + path.string() + "' has no valid rows (" +
                                             std::to_string(dropped) + " dropped)");
  }
  std::string provenance = "file:" + path.string() + ";dropped=" + std::to_string(dropped);
  return Dataset(std::move(rows), schema, std::move(provenance), dropped);
}

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.empty()) throw Error(ErrorCode::IoFailure, "empty output path");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write '" + path.string() + "'");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write to '" + path.string() + "' failed");
}

}  // namespace

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  const auto& schema = ds.schema();
  const auto columns = schema.column_names();
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << '\n';
  std::string line;
  for (const auto& r : ds.rows()) {
    line.clear();
    line += std::to_string(r.request_id);
    line += ',';
    line += std::to_string(r.user_id);
    line += ',';
    line += std::to_string(r.item_id);
    line += ',';
    line += std::to_string(r.position);
    line += ',';
    line += std::to_string(r.outcome);
    line += ',';
    line += csv_field(r.arm);
    if (schema.has_reason) {
      line += ',';
      if (r.reason) line += csv_field(*r.reason);
    }
    if (schema.has_relevance_score) {
      line += ',';
      if (r.relevance_score) line += format_real(*r.relevance_score);
    }
    if (schema.has_session_depth) {
      line += ',';
      if (r.session_depth) line += std::to_string(*r.session_depth);
    }
    line += '\n';
    out << line;
  }
  finish(out, path);
}

void write_sessions(const SessionDataset& sessions, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << "request_id,user_id,arm,reason_mode,n_top_spot,n_bottom_spot,invite_total\n";
  for (const auto& s : sessions.rows) {
    out << s.request_id << ',' << s.user_id << ',' << csv_field(s.arm) << ','
        << (s.reason_mode ? csv_field(*s.reason_mode) : std::string()) << ',' << s.n_top_spot
        << ',' << s.n_bottom_spot << ',' << s.invite_total << '\n';
  }
  finish(out, path);
}

}  // namespace posiv
