#include "posiv/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "posiv/error.hpp"
#include "posiv/rng.hpp"

namespace posiv {

using nlohmann::json;

namespace {

// Stream tags keep the per-entity streams disjoint.
enum StreamTag : std::uint64_t {
  kItemStream = 1,
  kReasonStream = 2,
  kUserStream = 3,
  kRequestStream = 4,
  kPairStream = 5,
  kImpressionStream = 6,
};

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorCode::InvalidConfig, message);
}

int draw_direction(CounterRng& rng, double share_negative, double share_null) {
  const double u = rng.uniform();
  if (u < share_negative) return +1;
  if (u < share_negative + share_null) return 0;
  return -1;
}

// Direction weights centred so that an average impression's score is not
// shifted by treatment; only relative rank moves.
std::vector<double> centred(const std::vector<int>& directions) {
  std::vector<double> out(directions.begin(), directions.end());
  if (out.empty()) return out;
  const double mean = std::accumulate(out.begin(), out.end(), 0.0) / out.size();
  for (auto& w : out) w -= mean;
  return out;
}

struct Impression {
  std::uint64_t item_id;
  double relevance;
  double score;
  double observed_relevance;
  double outcome_draw;
  std::int64_t reason;
};

struct ChunkResult {
  std::vector<EdgeObservation> rows;
  std::size_t clip_count = 0;
  std::size_t n_probabilities = 0;
};

}  // namespace

void validate(const SimConfig& c) {
  require(c.n_users >= 1 && c.n_items >= 1 && c.requests_per_user >= 1 &&
              c.slots_per_request >= 1 && c.n_reasons >= 1,
          "all counts must be >= 1");
  require(c.slots_per_request <= c.n_items, "slots_per_request exceeds n_items");
  require(c.min_slots_per_request >= 0 && c.min_slots_per_request <= c.slots_per_request,
          "min_slots_per_request must lie in [0, slots_per_request]");
  require(c.base_rate > 0.0 && c.base_rate < 1.0, "base_rate must lie in (0, 1)");
  require(c.effect_slope_sd >= 0.0 && c.ranking_noise_sd >= 0.0 && c.relevance_noise_sd >= 0.0,
          "standard deviations must be >= 0");
  require(c.instrument_share_negative >= 0.0 && c.instrument_share_null >= 0.0 &&
              c.instrument_share_negative + c.instrument_share_null <= 1.0,
          "instrument shares must be in [0, 1] and sum to at most 1");
  require(std::isfinite(c.effect_slope_mean) && std::isfinite(c.confound_strength) &&
              std::isfinite(c.instrument_strength),
          "non-finite parameter");
  require(c.audit_rows >= 0, "audit_rows must be >= 0");
  require(c.threads >= 1, "threads must be >= 1");
}

double SimTruth::mean_slope() const {
  if (slopes.empty()) return 0.0;
  return std::accumulate(slopes.begin(), slopes.end(), 0.0) / slopes.size();
}

std::string reason_label(std::int64_t index, std::int64_t n_reasons) {
  const auto width = std::to_string(n_reasons).size();
  auto digits = std::to_string(index + 1);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return "reason_" + digits;
}

std::pair<Dataset, SimTruth> simulate(const SimConfig& config) {
  validate(config);
  const bool pymk = config.marketplace_mode == MarketplaceMode::Pymk;
  const std::uint64_t seed = config.seed;
  const auto slots = config.slots_per_request;
  const auto min_slots =
      pymk && config.min_slots_per_request > 0 ? config.min_slots_per_request : slots;

  SimTruth truth;
  truth.slopes.resize(config.n_items);
  truth.item_direction.resize(config.n_items);
  for (std::int64_t i = 0; i < config.n_items; ++i) {
    auto rng = CounterRng::stream(seed, kItemStream, i + 1);
    truth.slopes[i] = config.effect_slope_mean + config.effect_slope_sd * rng.normal();
    truth.item_direction[i] =
        draw_direction(rng, config.instrument_share_negative, config.instrument_share_null);
  }
  std::vector<std::string> reasons;
  if (pymk) {
    truth.reason_direction.resize(config.n_reasons);
    for (std::int64_t r = 0; r < config.n_reasons; ++r) {
      auto rng = CounterRng::stream(seed, kReasonStream, r + 1);
      truth.reason_direction[r] =
          draw_direction(rng, config.instrument_share_negative, config.instrument_share_null);
      reasons.push_back(reason_label(r, config.n_reasons));
    }
  }
  // Ads: the experiment moves campaigns. PYMK: it moves candidates according
  // to the section (reason) they are recommended under.
  const auto item_weight = centred(truth.item_direction);
  const auto reason_weight = centred(truth.reason_direction);

  auto simulate_users = [&](std::int64_t first_user, std::int64_t last_user) {
    ChunkResult out;
    std::vector<std::uint64_t> chosen;
    std::vector<Impression> shown;
    for (std::int64_t u = first_user; u < last_user; ++u) {
      const auto user_id = static_cast<std::uint64_t>(u + 1);
      auto user_rng = CounterRng::stream(seed, kUserStream, user_id);
      const bool treated = user_rng.bernoulli(0.5);
      const double z = treated ? 1.0 : 0.0;
      for (std::int64_t q = 0; q < config.requests_per_user; ++q) {
        const auto request_id = static_cast<std::uint64_t>(u * config.requests_per_user + q + 1);
        auto request_rng = CounterRng::stream(seed, kRequestStream, request_id);
        auto depth = min_slots +
                     static_cast<std::int64_t>(request_rng.below(slots - min_slots + 1));
        // Treated sessions sometimes run one slot deeper.
        const double p_deeper = std::clamp(0.5 * config.instrument_strength, 0.0, 1.0);
        if (pymk && treated && depth < slots && request_rng.bernoulli(p_deeper)) ++depth;

        // Floyd's algorithm: `depth` distinct items out of n_items.
        chosen.clear();
        for (auto j = config.n_items - depth; j < config.n_items; ++j) {
          const auto t = static_cast<std::uint64_t>(request_rng.below(j + 1)) + 1;
          if (std::ranges::find(chosen, t) == chosen.end()) {
            chosen.push_back(t);
          } else {
            chosen.push_back(static_cast<std::uint64_t>(j + 1));
          }
        }
        std::ranges::sort(chosen);

        shown.clear();
        for (auto item_id : chosen) {
          auto pair_rng = CounterRng::stream(seed, kPairStream, user_id, item_id);
          Impression imp{};
          imp.item_id = item_id;
          imp.relevance = pair_rng.uniform();
          imp.reason = pymk ? static_cast<std::int64_t>(pair_rng.below(config.n_reasons)) : -1;
          auto imp_rng = CounterRng::stream(seed, kImpressionStream, request_id, item_id);
          const double weight = pymk ? reason_weight[imp.reason] : item_weight[item_id - 1];
          imp.score = imp.relevance + config.ranking_noise_sd * imp_rng.normal() +
                      config.instrument_strength * z * weight;
          imp.observed_relevance = std::clamp(
              imp.relevance + config.relevance_noise_sd * imp_rng.normal(), 0.0, 1.0);
          imp.outcome_draw = imp_rng.uniform();
          shown.push_back(imp);
        }
        std::ranges::sort(shown, [](const Impression& a, const Impression& b) {
          return a.score != b.score ? a.score > b.score : a.item_id < b.item_id;
        });

        bool clicked = false;
        for (std::size_t k = 0; k < shown.size(); ++k) {
          const auto& imp = shown[k];
          const auto position = static_cast<std::int32_t>(k + 1);
          double p = config.base_rate + config.confound_strength * imp.relevance +
                     truth.slopes[imp.item_id - 1] * (position - 1);
          ++out.n_probabilities;
          if (p < 0.0 || p > 1.0) {
            ++out.clip_count;
            p = std::clamp(p, 0.0, 1.0);
          }
          int outcome = imp.outcome_draw < p ? 1 : 0;
          // Ads: at most one click per request; the best-placed success wins.
          if (!pymk) {
            if (clicked) outcome = 0;
            clicked = clicked || outcome == 1;
          }
          EdgeObservation row;
          row.request_id = request_id;
          row.user_id = user_id;
          row.item_id = imp.item_id;
          row.position = position;
          row.outcome = outcome;
          row.arm = treated ? kTreatmentArm : kControlArm;
          row.relevance_score = imp.observed_relevance;
          if (pymk) {
            row.reason = reasons[imp.reason];
            row.session_depth = static_cast<std::int32_t>(depth);
          }
          out.rows.push_back(std::move(row));
        }
      }
    }
    return out;
  };

  std::vector<ChunkResult> chunks(config.threads);
  if (config.threads == 1) {
    chunks[0] = simulate_users(0, config.n_users);
  } else {
    std::vector<std::jthread> workers;
    const auto per = (config.n_users + config.threads - 1) / config.threads;
    for (int t = 0; t < config.threads; ++t) {
      const auto first = std::min<std::int64_t>(config.n_users, t * per);
      const auto last = std::min<std::int64_t>(config.n_users, first + per);
      workers.emplace_back([&, t, first, last] { chunks[t] = simulate_users(first, last); });
    }
  }

  std::vector<EdgeObservation> rows;
  for (auto& chunk : chunks) {
    truth.clip_count += chunk.clip_count;
    truth.n_probabilities += chunk.n_probabilities;
    if (rows.empty()) {
      rows = std::move(chunk.rows);
    } else {
      rows.insert(rows.end(), std::make_move_iterator(chunk.rows.begin()),
                  std::make_move_iterator(chunk.rows.end()));
    }
  }

  // Audit curves are recomputed from the same streams as the data.
  const auto n_audit = std::min<std::size_t>(config.audit_rows, rows.size());
  for (std::size_t r = 0; r < n_audit; ++r) {
    const auto& row = rows[r];
    auto pair_rng = CounterRng::stream(seed, kPairStream, row.user_id, row.item_id);
    const double relevance = pair_rng.uniform();
    AuditRow audit{row.request_id, row.item_id, {}};
    for (std::int64_t k = 1; k <= slots; ++k) {
      audit.probability_at_position.push_back(config.base_rate +
                                              config.confound_strength * relevance +
                                              truth.slopes[row.item_id - 1] * (k - 1));
    }
    truth.audit.push_back(std::move(audit));
  }

  Schema schema;
  schema.has_relevance_score = true;
  schema.has_reason = pymk;
  schema.has_session_depth = pymk;
  std::string provenance = std::string("simulator:") + (pymk ? "pymk" : "ads") +
                           ";seed=" + std::to_string(seed);
  return {Dataset(std::move(rows), schema, std::move(provenance)), std::move(truth)};
}

double ground_truth_tau(const SimTruth& truth, int k1, int k2) {
  if (k1 < 1 || k2 < 1) throw std::invalid_argument("positions must be >= 1");
  return truth.mean_slope() * static_cast<double>(k2 - k1);
}

namespace {

const char* mode_name(MarketplaceMode m) { return m == MarketplaceMode::Ads ? "ads" : "pymk"; }

}  // namespace

json to_json(const SimConfig& c) {
  return json{{"n_users", c.n_users},
              {"n_items", c.n_items},
              {"requests_per_user", c.requests_per_user},
              {"slots_per_request", c.slots_per_request},
              {"min_slots_per_request", c.min_slots_per_request},
              {"effect_slope_mean", c.effect_slope_mean},
              {"effect_slope_sd", c.effect_slope_sd},
              {"confound_strength", c.confound_strength},
              {"instrument_strength", c.instrument_strength},
              {"instrument_share_negative", c.instrument_share_negative},
              {"instrument_share_null", c.instrument_share_null},
              {"base_rate", c.base_rate},
              {"ranking_noise_sd", c.ranking_noise_sd},
              {"relevance_noise_sd", c.relevance_noise_sd},
              {"marketplace_mode", mode_name(c.marketplace_mode)},
              {"n_reasons", c.n_reasons},
              {"seed", c.seed},
              {"audit_rows", c.audit_rows}};
}

SimConfig sim_config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "simulator config must be an object");
  SimConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "n_users") c.n_users = value.get<std::int64_t>();
      else if (key == "n_items") c.n_items = value.get<std::int64_t>();
      else if (key == "requests_per_user") c.requests_per_user = value.get<std::int64_t>();
      else if (key == "slots_per_request") c.slots_per_request = value.get<std::int64_t>();
      else if (key == "min_slots_per_request") c.min_slots_per_request = value.get<std::int64_t>();
      else if (key == "effect_slope_mean") c.effect_slope_mean = value.get<double>();
      else if (key == "effect_slope_sd") c.effect_slope_sd = value.get<double>();
      else if (key == "confound_strength") c.confound_strength = value.get<double>();
      else if (key == "instrument_strength") c.instrument_strength = value.get<double>();
      else if (key == "instrument_share_negative") c.instrument_share_negative = value.get<double>();
      else if (key == "instrument_share_null") c.instrument_share_null = value.get<double>();
      else if (key == "base_rate") c.base_rate = value.get<double>();
      else if (key == "ranking_noise_sd") c.ranking_noise_sd = value.get<double>();
      else if (key == "relevance_noise_sd") c.relevance_noise_sd = value.get<double>();
      else if (key == "n_reasons") c.n_reasons = value.get<std::int64_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "audit_rows") c.audit_rows = value.get<std::int64_t>();
      else if (key == "threads") c.threads = value.get<int>();
      else if (key == "marketplace_mode") {
        const auto mode = value.get<std::string>();
        if (mode == "ads") c.marketplace_mode = MarketplaceMode::Ads;
        else if (mode == "pymk") c.marketplace_mode = MarketplaceMode::Pymk;
        else throw Error(ErrorCode::InvalidConfig, "unknown marketplace_mode '" + mode + "'");
      } else if (key == "schema_map") {
        // shared config file; consumed by the loader
      } else {
        throw Error(ErrorCode::InvalidConfig, "unknown simulator field '" + key + "'");
      }
    }
  } catch (const json::type_error& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  validate(c);
  return c;
}

json truth_to_json(const SimTruth& truth, const SimConfig& config) {
  json j;
  j["seed"] = config.seed;
  j["marketplace_mode"] = mode_name(config.marketplace_mode);
  j["slopes"] = truth.slopes;
  j["mean_slope"] = truth.mean_slope();
  j["tau_one_rank_up"] = ground_truth_tau(truth, 2, 1);
  j["item_first_stage_direction"] = truth.item_direction;
  if (!truth.reason_direction.empty()) j["reason_first_stage_direction"] = truth.reason_direction;
  j["clip_count"] = truth.clip_count;
  j["clip_rate"] = truth.clip_rate();
  j["n_rows"] = truth.n_probabilities;
  return j;
}

}  // namespace posiv
