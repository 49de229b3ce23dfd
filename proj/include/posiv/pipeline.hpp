#pragma once

#include <cstdint>
#include <vector>

#include "posiv/dataset.hpp"
#include "posiv/estimator.hpp"
#include "posiv/model_spec.hpp"

namespace posiv {

// prepare -> estimate for one spec. Session-level specs aggregate the edge
// data first.
FitResult estimate(const Dataset& ds, const ModelSpec& spec, std::int32_t top_cut = 4);

struct ItemFirstStage {
  std::uint64_t item_id = 0;
  FirstStageReport report;
};

// One fit per item on its one-per-request slice. Fits run on `threads`
// workers; results come back ordered by item id.
std::vector<ItemFit> estimate_per_item(const Dataset& ds, const ModelSpec& spec,
                                       std::vector<std::uint64_t> items,
                                       std::uint64_t sample_seed = 0, int threads = 1);

std::vector<ItemFirstStage> first_stage_per_item(const Dataset& ds, const ModelSpec& spec,
                                                 std::vector<std::uint64_t> items,
                                                 std::uint64_t sample_seed = 0, int threads = 1);

}  // namespace posiv
