#include "posiv/dataset.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "posiv/error.hpp"
#include "posiv/hashing.hpp"

namespace posiv {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::MixedArmsWithinUser: return "MixedArmsWithinUser";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::UnknownItem: return "UnknownItem";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::Underdetermined: return "Underdetermined";
    case ErrorCode::Underidentified: return "Underidentified";
    case ErrorCode::ConstantColumn: return "ConstantColumn";
    case ErrorCode::Collinear: return "Collinear";
    case ErrorCode::NotJustIdentified: return "NotJustIdentified";
    case ErrorCode::ZeroFirstStage: return "ZeroFirstStage";
    case ErrorCode::TooFewClusters: return "TooFewClusters";
  }
  return "Unknown";
}

bool is_input_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn:
    case ErrorCode::EmptyDataset:
    case ErrorCode::MixedArmsWithinUser:
    case ErrorCode::IoFailure:
    case ErrorCode::InvalidConfig:
    case ErrorCode::UnknownItem:
    case ErrorCode::ParseError:
    case ErrorCode::InvalidSpec:
    case ErrorCode::EmptyInput:
      return true;
    default:
      return false;
  }
}

bool is_valid_row(const EdgeObservation& row) {
  if (row.position < 1) return false;
  if (row.outcome != 0 && row.outcome != 1) return false;
  if (row.arm.empty()) return false;
  if (row.reason && row.reason->empty()) return false;
  if (row.relevance_score &&
      !(*row.relevance_score >= 0.0 && *row.relevance_score <= 1.0)) {
    return false;
  }
  if (row.session_depth && (*row.session_depth < 1 || *row.session_depth < row.position)) {
    return false;
  }
  return true;
}

std::vector<std::string> Schema::column_names() const {
  std::vector<std::string> names{"request_id", "user_id", "item_id", "position",
                                 "outcome",    "arm"};
  if (has_reason) names.emplace_back("reason");
  if (has_relevance_score) names.emplace_back("relevance_score");
  if (has_session_depth) names.emplace_back("session_depth");
  return names;
}

namespace {

struct RowHash {
  std::size_t operator()(const EdgeObservation* r) const noexcept {
    std::uint64_t h = hash_words(r->request_id, r->user_id, r->item_id,
                                 static_cast<std::uint64_t>(r->position),
                                 static_cast<std::uint64_t>(r->outcome), fnv1a64(r->arm));
    if (r->reason) h = hash_combine(h, fnv1a64(*r->reason));
    return static_cast<std::size_t>(h);
  }
};

struct RowEq {
  bool operator()(const EdgeObservation* a, const EdgeObservation* b) const noexcept {
    return *a == *b;
  }
};

}  // namespace

Dataset::Dataset(std::vector<EdgeObservation> rows, Schema schema, std::string provenance,
                 std::size_t dropped_rows)
    : schema_(schema), provenance_(std::move(provenance)), dropped_rows_(dropped_rows) {
  std::unordered_map<std::uint64_t, const std::string*> arm_of_user;
  std::unordered_set<const EdgeObservation*, RowHash, RowEq> seen;
  seen.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (!is_valid_row(r)) {
      throw std::invalid_argument("row " + std::to_string(i) + " violates row invariants");
    }
    if ((r.reason && !schema.has_reason) ||
        (r.relevance_score && !schema.has_relevance_score) ||
        (r.session_depth && !schema.has_session_depth)) {
      throw std::invalid_argument("row " + std::to_string(i) +
                                  " carries a column the schema does not declare");
    }
    auto [it, inserted] = arm_of_user.try_emplace(r.user_id, &r.arm);
    if (!inserted && *it->second != r.arm) {
      throw Error(ErrorCode::MixedArmsWithinUser,
                  "user " + std::to_string(r.user_id) + " appears in arms '" + *it->second +
                      "' and '" + r.arm + "'");
    }
    if (!seen.insert(&r).second) ++duplicate_rows_;
  }
  rows_ = std::make_shared<const std::vector<EdgeObservation>>(std::move(rows));
}

Dataset Dataset::derive(std::vector<EdgeObservation> rows, const std::string& step) const {
  return Dataset(std::move(rows), schema_, provenance_ + "|" + step, 0);
}

bool same_rows(const Dataset& a, const Dataset& b) {
  return a.schema() == b.schema() && std::ranges::equal(a.rows(), b.rows());
}

}  // namespace posiv
