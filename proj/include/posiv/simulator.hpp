#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "posiv/dataset.hpp"

namespace posiv {

enum class MarketplaceMode { Ads, Pymk };

// Parameters of the synthetic marketplace. Per impression the click/invite
// probability is
//   base_rate + confound_strength * relevance + slope_i * (position - 1)
// clipped to [0, 1], so slope_i is the per-position-increment effect and is
// what the position coefficient of a correctly specified IV fit recovers.
struct SimConfig {
  std::int64_t n_users = 1000;
  std::int64_t n_items = 50;
  std::int64_t requests_per_user = 1;
  std::int64_t slots_per_request = 10;
  // pymk only: sessions show between min_slots and slots_per_request items;
  // 0 means every session is full.
  std::int64_t min_slots_per_request = 0;
  double effect_slope_mean = -0.04;
  double effect_slope_sd = 0.0;
  // Weight of true relevance in the response. Relevance also drives rank, so
  // this is the confounding channel; a negative value flips its sign.
  double confound_strength = 0.5;
  double instrument_strength = 1.0;
  double instrument_share_negative = 0.5;
  double instrument_share_null = 0.0;
  double base_rate = 0.4;
  double ranking_noise_sd = 0.2;
  double relevance_noise_sd = 0.1;
  MarketplaceMode marketplace_mode = MarketplaceMode::Pymk;
  std::int64_t n_reasons = 22;
  std::uint64_t seed = 0;
  // Rows whose potential-outcome curves are kept in SimTruth::audit.
  std::int64_t audit_rows = 32;
  // Worker threads; has no effect on the output.
  int threads = 1;
};

void validate(const SimConfig& config);

SimConfig sim_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SimConfig& config);

// Potential-outcome probabilities of one impression at every position,
// before clipping.
struct AuditRow {
  std::uint64_t request_id = 0;
  std::uint64_t item_id = 0;
  std::vector<double> probability_at_position;  // index k-1
};

struct SimTruth {
  std::vector<double> slopes;               // by item_id - 1
  std::vector<int> item_direction;          // +1 rank improves under treatment, 0, -1
  std::vector<int> reason_direction;        // pymk: same, by reason index
  std::size_t clip_count = 0;
  std::size_t n_probabilities = 0;
  std::vector<AuditRow> audit;

  double clip_rate() const {
    return n_probabilities ? static_cast<double>(clip_count) / n_probabilities : 0.0;
  }
  double mean_slope() const;
};

std::pair<Dataset, SimTruth> simulate(const SimConfig& config);

// Expected response change when an item moves from position k1 to k2,
// averaged over items: mean_i slope_i * (k2 - k1).
double ground_truth_tau(const SimTruth& truth, int k1, int k2);

nlohmann::json truth_to_json(const SimTruth& truth, const SimConfig& config);

std::string reason_label(std::int64_t index, std::int64_t n_reasons);

inline constexpr const char* kControlArm = "control";
inline constexpr const char* kTreatmentArm = "treatment";

}  // namespace posiv
