#include "posiv/prepare.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>

#include "posiv/error.hpp"
#include "posiv/hashing.hpp"

namespace posiv {

namespace {

auto canonical_key(const EdgeObservation& r) {
  return std::tie(r.item_id, r.position, r.outcome, r.user_id, r.arm, r.reason,
                  r.relevance_score, r.session_depth);
}

// Index of the kept row within `group` (indices into rows).
std::size_t pick_row(std::span<const EdgeObservation> rows, std::vector<std::size_t>& group,
                     std::uint64_t seed, std::uint64_t request_id) {
  if (group.size() == 1) return group.front();
  std::ranges::sort(group, [&](std::size_t a, std::size_t b) {
    const auto ka = canonical_key(rows[a]);
    const auto kb = canonical_key(rows[b]);
    return ka != kb ? ka < kb : a < b;
  });
  std::size_t best = 0;
  std::uint64_t best_hash = hash_words(seed, request_id, std::uint64_t{0});
  for (std::size_t ordinal = 1; ordinal < group.size(); ++ordinal) {
    const auto h = hash_words(seed, request_id, ordinal);
    if (h < best_hash) {
      best_hash = h;
      best = ordinal;
    }
  }
  return group[best];
}

std::vector<EdgeObservation> one_per_request(std::span<const EdgeObservation> rows,
                                             std::uint64_t seed) {
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> groups;
  groups.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) groups[rows[i].request_id].push_back(i);
  std::vector<char> keep(rows.size(), 0);
  for (auto& [request_id, group] : groups) keep[pick_row(rows, group, seed, request_id)] = 1;
  std::vector<EdgeObservation> out;
  out.reserve(groups.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (keep[i]) out.push_back(rows[i]);
  }
  return out;
}

// Columns of either observation level, materialized for design assembly.
struct ColumnSet {
  std::size_t n = 0;
  std::map<std::string, std::vector<std::optional<double>>> numeric;
  std::vector<const std::string*> arm;
  std::vector<const std::string*> reason;  // nullptr = absent
  std::vector<std::uint64_t> cluster;
};

std::vector<std::string> needed_numeric(const ModelSpec& spec) {
  std::vector<std::string> cols{spec.outcome};
  cols.insert(cols.end(), spec.endogenous.begin(), spec.endogenous.end());
  cols.insert(cols.end(), spec.controls.begin(), spec.controls.end());
  return cols;
}

ColumnSet edge_columns_for(const Dataset& ds, const ModelSpec& spec) {
  if (spec.level != Level::Edge) {
    throw Error(ErrorCode::InvalidSpec, "'" + spec.name + "' is a session-level spec");
  }
  const auto& schema = ds.schema();
  ColumnSet cs;
  cs.n = ds.size();
  for (const auto& name : needed_numeric(spec)) {
    if ((name == "relevance_score" && !schema.has_relevance_score) ||
        (name == "session_depth" && !schema.has_session_depth)) {
      throw Error(ErrorCode::MissingColumn, "spec '" + spec.name + "' needs column '" + name +
                                                "' which the dataset lacks");
    }
    auto& col = cs.numeric[name];
    col.reserve(cs.n);
    for (const auto& r : ds.rows()) {
      if (name == "outcome") col.emplace_back(r.outcome);
      else if (name == "position") col.emplace_back(r.position);
      else if (name == "relevance_score") col.push_back(r.relevance_score);
      else col.push_back(r.session_depth ? std::optional<double>(*r.session_depth) : std::nullopt);
    }
  }
  if (spec.instruments == InstrumentExpr::ArmByReason && !schema.has_reason) {
    throw Error(ErrorCode::MissingColumn,
                "spec '" + spec.name + "' interacts arm with reason but the dataset has no reason");
  }
  for (const auto& r : ds.rows()) {
    cs.arm.push_back(&r.arm);
    cs.reason.push_back(r.reason ? &*r.reason : nullptr);
    cs.cluster.push_back(r.user_id);
  }
  return cs;
}

ColumnSet session_columns_for(const SessionDataset& sessions, const ModelSpec& spec) {
  if (spec.level != Level::Session) {
    throw Error(ErrorCode::InvalidSpec, "'" + spec.name + "' is an edge-level spec");
  }
  ColumnSet cs;
  cs.n = sessions.rows.size();
  for (const auto& name : needed_numeric(spec)) {
    auto& col = cs.numeric[name];
    for (const auto& s : sessions.rows) {
      if (name == "invite_total") col.emplace_back(s.invite_total);
      else if (name == "n_top_spot") col.emplace_back(s.n_top_spot);
      else col.emplace_back(s.n_bottom_spot);
    }
  }
  for (const auto& s : sessions.rows) {
    cs.arm.push_back(&s.arm);
    cs.reason.push_back(s.reason_mode ? &*s.reason_mode : nullptr);
    cs.cluster.push_back(s.user_id);
  }
  return cs;
}

bool has_variance(const Eigen::Ref<const Eigen::VectorXd>& col) {
  return col.size() > 0 && (col.array() != col(0)).any();
}

DesignMatrix assemble(const ColumnSet& cs, const ModelSpec& spec) {
  validate(spec);
  const bool needs_reason = spec.instruments == InstrumentExpr::ArmByReason;

  std::vector<std::size_t> kept;
  kept.reserve(cs.n);
  for (std::size_t i = 0; i < cs.n; ++i) {
    bool ok = !needs_reason || cs.reason[i] != nullptr;
    for (const auto& [name, col] : cs.numeric) ok = ok && col[i].has_value();
    if (ok) kept.push_back(i);
  }

  DesignMatrix d;
  d.dropped_rows = cs.n - kept.size();
  d.source_rows = kept;
  d.outcome_name = spec.outcome;
  d.endogenous_names = spec.endogenous;
  d.control_names = spec.controls;
  d.control_names.emplace_back(kConstantName);

  // Instrument columns: indicators for each non-reference arm (the smallest
  // label is the reference), optionally interacted with every observed reason.
  std::set<std::string> arm_levels;
  std::set<std::string> reason_levels;
  for (auto i : kept) {
    arm_levels.insert(*cs.arm[i]);
    if (needs_reason) reason_levels.insert(*cs.reason[i]);
  }
  std::vector<std::pair<std::string, std::optional<std::string>>> instrument_cells;
  if (spec.instruments != InstrumentExpr::None) {
    if (arm_levels.size() < 2) {
      throw Error(ErrorCode::ConstantColumn,
                  "arm takes a single value; the instrument has no variation");
    }
    for (auto a = std::next(arm_levels.begin()); a != arm_levels.end(); ++a) {
      if (needs_reason) {
        for (const auto& r : reason_levels) {
          instrument_cells.emplace_back(*a, r);
          d.instrument_names.push_back("arm=" + *a + " x reason=" + r);
        }
      } else {
        instrument_cells.emplace_back(*a, std::nullopt);
        d.instrument_names.push_back("arm=" + *a);
      }
    }
  }

  const auto n = static_cast<Eigen::Index>(kept.size());
  const auto p = static_cast<Eigen::Index>(spec.endogenous.size());
  const auto q = static_cast<Eigen::Index>(instrument_cells.size());
  const auto c = static_cast<Eigen::Index>(spec.controls.size()) + 1;
  if (spec.method != Method::OLS && q < p) {
    throw Error(ErrorCode::Underidentified, std::to_string(q) + " instruments for " +
                                                std::to_string(p) + " endogenous columns");
  }
  if (n < std::max(p, q) + c) {
    throw Error(ErrorCode::Underdetermined,
                std::to_string(n) + " rows for " + std::to_string(std::max(p, q) + c) + " columns");
  }

  d.outcome.resize(n);
  d.endogenous.resize(n, p);
  d.instruments.resize(n, q);
  d.controls.resize(n, c);
  d.clusters.resize(n);
  const auto& y = cs.numeric.at(spec.outcome);
  for (Eigen::Index row = 0; row < n; ++row) {
    const auto i = kept[row];
    d.outcome(row) = *y[i];
    for (Eigen::Index j = 0; j < p; ++j) d.endogenous(row, j) = *cs.numeric.at(spec.endogenous[j])[i];
    for (Eigen::Index j = 0; j < q; ++j) {
      const auto& [arm, reason] = instrument_cells[j];
      const bool on = *cs.arm[i] == arm && (!reason || *cs.reason[i] == *reason);
      d.instruments(row, j) = on ? 1.0 : 0.0;
    }
    for (Eigen::Index j = 0; j + 1 < c; ++j) d.controls(row, j) = *cs.numeric.at(spec.controls[j])[i];
    d.controls(row, c - 1) = 1.0;
    d.clusters[row] = cs.cluster[i];
  }

  for (Eigen::Index j = 0; j < p; ++j) {
    if (!has_variance(d.endogenous.col(j))) {
      throw Error(ErrorCode::ConstantColumn, "endogenous column '" + d.endogenous_names[j] +
                                                 "' has zero variance");
    }
  }
  for (Eigen::Index j = 0; j < q; ++j) {
    if (!has_variance(d.instruments.col(j))) {
      throw Error(ErrorCode::ConstantColumn,
                  "instrument '" + d.instrument_names[j] + "' has zero variance");
    }
  }
  return d;
}

}  // namespace

Dataset sample_one_per_request(const Dataset& ds, std::uint64_t seed) {
  return ds.derive(one_per_request(ds.rows(), seed), "sample_one_per_request:seed=" +
                                                          std::to_string(seed));
}

Dataset slice_by_item(const Dataset& ds, std::uint64_t item_id, std::uint64_t seed) {
  std::vector<EdgeObservation> rows;
  for (const auto& r : ds.rows()) {
    if (r.item_id == item_id) rows.push_back(r);
  }
  if (rows.empty()) {
    throw Error(ErrorCode::UnknownItem, "item " + std::to_string(item_id) + " not in dataset");
  }
  return ds.derive(one_per_request(rows, seed), "item=" + std::to_string(item_id));
}

std::vector<std::uint64_t> top_items(const Dataset& ds, std::size_t n) {
  std::unordered_map<std::uint64_t, std::size_t> counts;
  for (const auto& r : ds.rows()) ++counts[r.item_id];
  std::vector<std::pair<std::uint64_t, std::size_t>> ranked(counts.begin(), counts.end());
  std::ranges::sort(ranked, [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < ranked.size() && i < n; ++i) out.push_back(ranked[i].first);
  return out;
}

DesignMatrix build_design(const Dataset& ds, const ModelSpec& spec) {
  return assemble(edge_columns_for(ds, spec), spec);
}

DesignMatrix build_design(const SessionDataset& sessions, const ModelSpec& spec) {
  return assemble(session_columns_for(sessions, spec), spec);
}

SessionDataset aggregate_sessions(const Dataset& ds, std::int32_t top_cut) {
  if (top_cut < 1) throw Error(ErrorCode::InvalidConfig, "top_cut must be >= 1");
  SessionDataset out;
  out.top_cut = top_cut;
  out.provenance = ds.provenance() + "|sessions:top_cut=" + std::to_string(top_cut);
  std::unordered_map<std::uint64_t, std::size_t> index;
  std::vector<std::map<std::string, std::size_t>> reason_counts;
  for (const auto& r : ds.rows()) {
    auto [it, inserted] = index.try_emplace(r.request_id, out.rows.size());
    if (inserted) {
      SessionObservation s;
      s.request_id = r.request_id;
      s.user_id = r.user_id;
      s.arm = r.arm;
      out.rows.push_back(std::move(s));
      reason_counts.emplace_back();
    }
    auto& s = out.rows[it->second];
    if (r.position <= top_cut) ++s.n_top_spot;
    else ++s.n_bottom_spot;
    s.invite_total += r.outcome;
    if (r.reason) ++reason_counts[it->second][*r.reason];
  }
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    // most frequent reason; std::map order breaks ties towards the smallest label
    std::size_t best = 0;
    for (const auto& [reason, count] : reason_counts[i]) {
      if (count > best) {
        best = count;
        out.rows[i].reason_mode = reason;
      }
    }
  }
  return out;
}

}  // namespace posiv
