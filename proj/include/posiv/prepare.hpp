#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "posiv/dataset.hpp"
#include "posiv/model_spec.hpp"

namespace posiv {

// Estimation-ready matrices. The last control column is always the constant.
struct DesignMatrix {
  Eigen::VectorXd outcome;
  Eigen::MatrixXd endogenous;
  Eigen::MatrixXd instruments;
  Eigen::MatrixXd controls;
  std::vector<std::uint64_t> clusters;
  std::vector<std::size_t> source_rows;

  std::string outcome_name;
  std::vector<std::string> endogenous_names;
  std::vector<std::string> instrument_names;
  std::vector<std::string> control_names;
  std::size_t dropped_rows = 0;

  Eigen::Index rows() const { return outcome.size(); }
};

inline constexpr const char* kConstantName = "Constant";

// Keeps one row per request, chosen by the smallest hash(seed, request_id,
// ordinal) where ordinal ranks the request's rows in canonical field order.
Dataset sample_one_per_request(const Dataset& ds, std::uint64_t seed);

// Rows of one item, at most one per request (same hash rule).
Dataset slice_by_item(const Dataset& ds, std::uint64_t item_id, std::uint64_t seed = 0);

// Items by descending row count, ties by ascending id, truncated to n.
std::vector<std::uint64_t> top_items(const Dataset& ds, std::size_t n);

DesignMatrix build_design(const Dataset& ds, const ModelSpec& spec);
DesignMatrix build_design(const SessionDataset& sessions, const ModelSpec& spec);

SessionDataset aggregate_sessions(const Dataset& ds, std::int32_t top_cut = 4);

}  // namespace posiv
