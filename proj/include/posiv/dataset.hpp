#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace posiv {

// One (item, request, position) impression.
struct EdgeObservation {
  std::uint64_t request_id = 0;
  std::uint64_t user_id = 0;  // viewer; the clustering unit
  std::uint64_t item_id = 0;
  std::int32_t position = 1;
  std::int32_t outcome = 0;
  std::string arm;
  std::optional<std::string> reason;
  std::optional<double> relevance_score;
  std::optional<std::int32_t> session_depth;

  bool operator==(const EdgeObservation&) const = default;
};

// True when the row satisfies the per-row invariants.
bool is_valid_row(const EdgeObservation& row);

// Which optional columns a dataset carries.
struct Schema {
  bool has_reason = false;
  bool has_relevance_score = false;
  bool has_session_depth = false;

  std::vector<std::string> column_names() const;
  bool operator==(const Schema&) const = default;
};

// Immutable table of edge observations. Copies share the same row storage.
class Dataset {
 public:
  // Throws Error(MixedArmsWithinUser) if any user has more than one arm and
  // std::invalid_argument if a row violates its own invariants or carries an
  // optional field the schema does not declare.
  Dataset(std::vector<EdgeObservation> rows, Schema schema, std::string provenance,
          std::size_t dropped_rows = 0);

  std::span<const EdgeObservation> rows() const { return *rows_; }
  std::size_t size() const { return rows_->size(); }
  bool empty() const { return rows_->empty(); }
  const EdgeObservation& operator[](std::size_t i) const { return (*rows_)[i]; }

  const Schema& schema() const { return schema_; }
  const std::string& provenance() const { return provenance_; }
  std::size_t dropped_rows() const { return dropped_rows_; }
  // Rows that repeat an earlier row field-for-field.
  std::size_t duplicate_rows() const { return duplicate_rows_; }

  // A new dataset over `rows` with this schema and an extended lineage tag.
  Dataset derive(std::vector<EdgeObservation> rows, const std::string& step) const;

 private:
  std::shared_ptr<const std::vector<EdgeObservation>> rows_;
  Schema schema_;
  std::string provenance_;
  std::size_t dropped_rows_ = 0;
  std::size_t duplicate_rows_ = 0;
};

bool same_rows(const Dataset& a, const Dataset& b);

// One request aggregated into top/bottom spot counts.
struct SessionObservation {
  std::uint64_t request_id = 0;
  std::uint64_t user_id = 0;
  std::string arm;
  std::optional<std::string> reason_mode;
  std::int32_t n_top_spot = 0;
  std::int32_t n_bottom_spot = 0;
  std::int32_t invite_total = 0;

  bool operator==(const SessionObservation&) const = default;
};

struct SessionDataset {
  std::vector<SessionObservation> rows;
  std::int32_t top_cut = 4;
  std::string provenance;
};

}  // namespace posiv
