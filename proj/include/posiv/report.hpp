#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "posiv/estimator.hpp"

namespace posiv::report {

// Display rule shared by text tables and JSON: four significant digits with
// trailing zeros trimmed; magnitudes below 1e-4 switch to three-digit
// scientific notation ("2.07×10⁻⁵"). Negative numbers use U+2212.
std::string format_number(double value);

// 402358 -> "402,358".
std::string format_count(std::size_t value);

// Fixed three decimals with U+2212 for negatives ("−0.520").
std::string format_fixed3(double value);

struct TableColumn {
  FitResult fit;
  std::string label;  // "IV", "OLS", ...
};

inline constexpr const char* kStarNote = "*p<0.1; **p<0.05; ***p<0.01";

// Plain-text regression table: coefficient rows with stars, standard errors in
// parentheses underneath, then Observations, R², Adjusted R², Residual Std.
// Error and the significance note.
std::string render_table(const std::vector<TableColumn>& columns);

// Machine-readable FitResult. "display" holds the exact strings the table uses.
nlohmann::json fit_to_json(const FitResult& fit);
nlohmann::json first_stage_to_json(const FirstStageReport& report);

// Display width in terminal columns (UTF-8 code points).
std::size_t display_width(const std::string& text);

struct ForestRow {
  std::uint64_t item_id = 0;
  double coefficient = 0.0;
  double std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  FirstStageClass classification = FirstStageClass::Null;
};

ForestRow forest_row(std::uint64_t item_id, const FirstStageEquation& eq);

// First-stage forest plot: one point and 95% interval per item, a zero line,
// red / black / blue for negative / null / positive.
std::string forest_svg(const std::vector<ForestRow>& rows, const std::string& title);
std::string forest_csv(const std::vector<ForestRow>& rows);

struct EffectBar {
  std::uint64_t item_id = 0;
  std::string spec;
  double coefficient = 0.0;
  double std_error = 0.0;
};

// Grouped bars: one group per item, one bar per spec.
std::string effects_svg(const std::vector<EffectBar>& bars, const std::string& title);
std::string effects_csv(const std::vector<EffectBar>& bars);
std::vector<EffectBar> read_effects_csv(const std::string& text);

}  // namespace posiv::report
