#include "posiv/pipeline.hpp"

#include <algorithm>
#include <exception>
#include <thread>

#include "posiv/error.hpp"
#include "posiv/prepare.hpp"

namespace posiv {

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers and rethrows the
// exception of the lowest failing index.
template <typename Result, typename Fn>
std::vector<Result> parallel_map(std::size_t n, int threads, Fn fn) {
  std::vector<Result> results(n);
  std::vector<std::exception_ptr> errors(n);
  const auto workers = static_cast<std::size_t>(std::clamp(threads, 1, 64));
  auto work = [&](std::size_t w) {
    for (std::size_t i = w; i < n; i += workers) {
      try {
        results[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1 || n < 2) {
    for (std::size_t w = 0; w < workers; ++w) work(w);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w) pool.emplace_back(work, w);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

void sort_unique(std::vector<std::uint64_t>& items) {
  std::ranges::sort(items);
  items.erase(std::unique(items.begin(), items.end()), items.end());
}

}  // namespace

FitResult estimate(const Dataset& ds, const ModelSpec& spec, std::int32_t top_cut) {
  validate(spec);
  FitResult result;
  if (spec.level == Level::Session) {
    result = fit(build_design(aggregate_sessions(ds, top_cut), spec), spec.method);
  } else {
    result = fit(build_design(ds, spec), spec.method);
  }
  result.spec_name = spec.name;
  return result;
}

std::vector<ItemFit> estimate_per_item(const Dataset& ds, const ModelSpec& spec,
                                       std::vector<std::uint64_t> items,
                                       std::uint64_t sample_seed, int threads) {
  validate(spec);
  if (spec.level != Level::Edge) {
    throw Error(ErrorCode::InvalidSpec, "per-item fits need an edge-level spec");
  }
  sort_unique(items);
  return parallel_map<ItemFit>(items.size(), threads, [&](std::size_t i) {
    auto design = build_design(slice_by_item(ds, items[i], sample_seed), spec);
    ItemFit out{items[i], fit(design, spec.method)};
    out.fit.spec_name = spec.name;
    return out;
  });
}

std::vector<ItemFirstStage> first_stage_per_item(const Dataset& ds, const ModelSpec& spec,
                                                 std::vector<std::uint64_t> items,
                                                 std::uint64_t sample_seed, int threads) {
  validate(spec);
  if (spec.level != Level::Edge || spec.method == Method::OLS) {
    throw Error(ErrorCode::InvalidSpec, "first-stage diagnostics need an edge-level IV spec");
  }
  sort_unique(items);
  return parallel_map<ItemFirstStage>(items.size(), threads, [&](std::size_t i) {
    return ItemFirstStage{items[i], first_stage(build_design(slice_by_item(ds, items[i], sample_seed), spec))};
  });
}

}  // namespace posiv
