#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "posiv/dataset.hpp"

namespace posiv {

// Canonical field name -> source column name. Unmapped fields use their
// canonical name.
using SchemaMap = std::map<std::string, std::string>;

inline const std::vector<std::string>& canonical_columns() {
  static const std::vector<std::string> names{
      "request_id", "user_id", "item_id",         "position",     "outcome",
      "arm",        "reason",  "relevance_score", "session_depth"};
  return names;
}

// Reads a header-bearing CSV file, or JSON lines when the extension is
// .jsonl / .ndjson. Rows failing validation are dropped and counted.
Dataset load_dataset(const std::filesystem::path& path, const SchemaMap& schema_map = {});

void write_dataset(const Dataset& ds, const std::filesystem::path& path);
void write_sessions(const SessionDataset& sessions, const std::filesystem::path& path);

// Unsigned decimal ids parse as-is; anything else is FNV-1a hashed.
std::optional<std::uint64_t> parse_id(std::string_view text);

// Shortest text that parses back to the same double.
std::string format_real(double value);

// Quotes a CSV field when it contains a delimiter, quote or newline.
std::string csv_field(std::string_view text);

// Splits CSV text into records of fields (RFC 4180 quoting).
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace posiv
