#include "posiv/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "posiv/dataset_io.hpp"
#include "posiv/error.hpp"

namespace posiv::report {

using nlohmann::json;

namespace {

constexpr const char* kMinus = "−";

std::string with_unicode_minus(std::string text) {
  if (!text.empty() && text.front() == '-') text.replace(0, 1, kMinus);
  return text;
}

void trim_trailing_zeros(std::string& text) {
  if (text.find('.') == std::string::npos) return;
  while (!text.empty() && text.back() == '0') text.pop_back();
  if (!text.empty() && text.back() == '.') text.pop_back();
}

std::string superscript(int value) {
  static const char* digits[] = {"⁰", "¹", "²", "³", "⁴",
                                 "⁵", "⁶", "⁷", "⁸", "⁹"};
  std::string out = value < 0 ? "⁻" : "";
  for (char c : std::to_string(std::abs(value))) out += digits[c - '0'];
  return out;
}

std::string printf_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return buf;
}

std::string center(const std::string& text, std::size_t width) {
  const auto w = display_width(text);
  if (w >= width) return text;
  const auto left = (width - w) / 2;
  return std::string(left, ' ') + text + std::string(width - w - left, ' ');
}

std::string pad_right(const std::string& text, std::size_t width) {
  const auto w = display_width(text);
  return w >= width ? text : text + std::string(width - w, ' ');
}

std::string pad_left(const std::string& text, std::size_t width) {
  const auto w = display_width(text);
  return w >= width ? text : std::string(width - w, ' ') + text;
}

std::string repeat(const char* unit, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) out += unit;
  return out;
}

std::string fixed2(double v) { return printf_fixed(v, 2); }

}  // namespace

std::size_t display_width(const std::string& text) {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "NaN";
  if (std::isinf(value)) return value > 0 ? "Inf" : std::string(kMinus) + "Inf";
  if (value == 0.0) return "0";
  const double magnitude = std::abs(value);
  if (magnitude < 1e-4) {
    int exponent = static_cast<int>(std::floor(std::log10(magnitude)));
    double mantissa = value / std::pow(10.0, exponent);
    std::string m = printf_fixed(mantissa, 2);
    if (m == "10.00" || m == "-10.00") {
      ++exponent;
      m = printf_fixed(value / std::pow(10.0, exponent), 2);
    }
    trim_trailing_zeros(m);
    return with_unicode_minus(m) + "×10" + superscript(exponent);
  }
  const int leading = static_cast<int>(std::floor(std::log10(magnitude)));
  std::string text = printf_fixed(value, std::max(0, 3 - leading));
  trim_trailing_zeros(text);
  return with_unicode_minus(text);
}

std::string format_count(std::size_t value) {
  auto digits = std::to_string(value);
  std::string out;
  const auto n = digits.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && (n - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

std::string format_fixed3(double value) {
  std::string text = printf_fixed(value, 3);
  if (text == "-0.000") text = "0.000";
  return with_unicode_minus(text);
}

std::string render_table(const std::vector<TableColumn>& columns) {
  if (columns.empty()) throw Error(ErrorCode::EmptyInput, "no fits to render");

  // variables in order of first appearance; the constant goes last
  std::vector<std::string> variables;
  for (const auto& col : columns) {
    for (const auto& name : col.fit.names) {
      if (name != kConstantName && std::ranges::find(variables, name) == variables.end()) {
        variables.push_back(name);
      }
    }
  }
  variables.emplace_back(kConstantName);

  struct Cells {
    std::vector<std::string> coef;
    std::vector<std::string> se;
  };
  std::vector<Cells> body(variables.size());
  std::vector<std::string> obs, r2, adj, rse, label, number;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const auto& f = columns[c].fit;
    for (std::size_t v = 0; v < variables.size(); ++v) {
      auto idx = f.index_of(variables[v]);
      if (idx) {
        const auto i = static_cast<Eigen::Index>(*idx);
        body[v].coef.push_back(format_number(f.coefficients(i)) + f.stars[*idx]);
        body[v].se.push_back("(" + format_number(f.std_errors(i)) + ")");
      } else {
        body[v].coef.emplace_back();
        body[v].se.emplace_back();
      }
    }
    obs.push_back(format_count(f.n_obs));
    r2.push_back(format_fixed3(f.r_squared));
    adj.push_back(format_fixed3(f.adj_r_squared));
    rse.push_back(format_fixed3(f.residual_std_error) + " (df = " + std::to_string(f.df_residual) +
                  ")");
    label.push_back(columns[c].label);
    number.push_back("(" + std::to_string(c + 1) + ")");
  }

  const std::vector<std::string> footer_labels{"Observations", "R²", "Adjusted R²",
                                               "Residual Std. Error", "Note:"};
  std::size_t label_width = 0;
  for (const auto& v : variables) label_width = std::max(label_width, display_width(v));
  for (const auto& l : footer_labels) label_width = std::max(label_width, display_width(l));
  label_width += 2;

  std::vector<std::size_t> widths(columns.size(), 12);
  auto widen = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      widths[c] = std::max(widths[c], display_width(cells[c]) + 4);
    }
  };
  for (const auto& b : body) {
    widen(b.coef);
    widen(b.se);
  }
  widen(obs);
  widen(r2);
  widen(rse);
  widen(label);
  std::size_t data_width = 0;
  for (auto w : widths) data_width += w;
  const std::string dependent = columns.front().fit.outcome_name;
  data_width = std::max(data_width, display_width(dependent) + 4);
  const std::size_t total = label_width + data_width;

  std::ostringstream out;
  auto row = [&](const std::string& head, const std::vector<std::string>& cells) {
    std::string line = pad_right(head, label_width);
    for (std::size_t c = 0; c < cells.size(); ++c) line += center(cells[c], widths[c]);
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  };
  auto spanning = [&](const std::string& text) {
    std::string line = std::string(label_width, ' ') + center(text, data_width);
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  };

  out << repeat("=", total) << '\n';
  spanning("Dependent variable:");
  out << std::string(label_width, ' ') << repeat("-", data_width) << '\n';
  spanning(dependent);
  row("", label);
  row("", number);
  out << repeat("-", total) << '\n';
  for (std::size_t v = 0; v < variables.size(); ++v) {
    if (v > 0) out << '\n';
    row(variables[v], body[v].coef);
    row("", body[v].se);
  }
  out << repeat("-", total) << '\n';
  row("Observations", obs);
  row("R²", r2);
  row("Adjusted R²", adj);
  row("Residual Std. Error", rse);
  out << repeat("=", total) << '\n';
  out << pad_right("Note:", label_width) << pad_left(kStarNote, data_width) << '\n';
  return out.str();
}

namespace {

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_json(m.row(r).transpose()));
  return out;
}

}  // namespace

json fit_to_json(const FitResult& f) {
  json display;
  json coef = json::array(), se = json::array();
  for (Eigen::Index i = 0; i < f.coefficients.size(); ++i) {
    coef.push_back(format_number(f.coefficients(i)));
    se.push_back(format_number(f.std_errors(i)));
  }
  display["coefficients"] = coef;
  display["std_errors"] = se;
  display["observations"] = format_count(f.n_obs);
  display["r_squared"] = format_fixed3(f.r_squared);
  display["adj_r_squared"] = format_fixed3(f.adj_r_squared);
  display["residual_std_error"] = format_fixed3(f.residual_std_error);

  json j;
  j["spec"] = f.spec_name;
  j["method"] = to_string(f.method);
  j["outcome"] = f.outcome_name;
  j["names"] = f.names;
  j["coefficients"] = vector_json(f.coefficients);
  j["std_errors"] = vector_json(f.std_errors);
  j["t_stats"] = vector_json(f.t_stats);
  j["p_values"] = vector_json(f.p_values);
  j["stars"] = f.stars;
  j["covariance"] = matrix_json(f.covariance);
  j["n_obs"] = f.n_obs;
  j["n_clusters"] = f.n_clusters;
  j["dropped_rows"] = f.dropped_rows;
  j["r_squared"] = f.r_squared;
  j["adj_r_squared"] = f.adj_r_squared;
  j["residual_std_error"] = f.residual_std_error;
  j["df_residual"] = f.df_residual;
  j["first_stage_f"] = f.first_stage_f;
  j["warnings"] = f.warnings;
  j["display"] = display;
  return j;
}

json first_stage_to_json(const FirstStageReport& report) {
  json eqs = json::array();
  for (const auto& eq : report.equations) {
    eqs.push_back({{"endogenous", eq.endogenous},
                   {"instruments", eq.instrument_names},
                   {"coefficients", vector_json(eq.coefficients)},
                   {"std_errors", vector_json(eq.std_errors)},
                   {"f_stat", eq.f_stat},
                   {"f_p_value", eq.f_p_value},
                   {"df_num", eq.df_num},
                   {"df_den", eq.df_den},
                   {"ci_low", eq.ci_low},
                   {"ci_high", eq.ci_high},
                   {"classification", to_string(eq.classification)}});
  }
  return {{"n_obs", report.n_obs}, {"n_clusters", report.n_clusters}, {"equations", eqs}};
}

ForestRow forest_row(std::uint64_t item_id, const FirstStageEquation& eq) {
  return {item_id, eq.coefficients(0), eq.std_errors(0), eq.ci_low, eq.ci_high, eq.classification};
}

namespace {

constexpr double kWidth = 1600.0;
constexpr double kHeight = 900.0;

const char* class_color(FirstStageClass c) {
  switch (c) {
    case FirstStageClass::Negative: return "#d62728";
    case FirstStageClass::Positive: return "#1f77b4";
    case FirstStageClass::Null: return "#000000";
  }
  return "#000000";
}

std::string svg_header(const std::string& title) {
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 1600 900\" width=\"1600\" "
         "height=\"900\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"1600\" height=\"900\" fill=\"#ffffff\"/>\n";
  out << "<text x=\"800\" y=\"40\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"24\">"
      << title << "</text>\n";
  return out.str();
}

struct Range {
  double lo;
  double hi;
};

Range padded(double lo, double hi) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace

std::string forest_svg(const std::vector<ForestRow>& rows, const std::string& title) {
  const double left = 220.0, right = 1550.0, top = 80.0, bottom = 840.0;
  double lo = 0.0, hi = 0.0;
  for (const auto& r : rows) {
    lo = std::min(lo, r.ci_low);
    hi = std::max(hi, r.ci_high);
  }
  const auto range = padded(lo, hi);
  auto x_of = [&](double v) { return left + (v - range.lo) / (range.hi - range.lo) * (right - left); };
  const double step = rows.empty() ? 0.0 : (bottom - top) / static_cast<double>(rows.size());

  std::ostringstream out;
  out << svg_header(title);
  out << "<line class=\"zero\" x1=\"" << fixed2(x_of(0.0)) << "\" y1=\"" << fixed2(top)
      << "\" x2=\"" << fixed2(x_of(0.0)) << "\" y2=\"" << fixed2(bottom)
      << "\" stroke=\"#888888\" stroke-dasharray=\"6,4\"/>\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const double y = top + step * (static_cast<double>(i) + 0.5);
    const char* color = class_color(r.classification);
    out << "<text x=\"" << fixed2(left - 12) << "\" y=\"" << fixed2(y + 5)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"14\">item "
        << r.item_id << "</text>\n";
    out << "<line class=\"ci\" x1=\"" << fixed2(x_of(r.ci_low)) << "\" y1=\"" << fixed2(y)
        << "\" x2=\"" << fixed2(x_of(r.ci_high)) << "\" y2=\"" << fixed2(y) << "\" stroke=\""
        << color << "\" stroke-width=\"2\"/>\n";
    out << "<circle class=\"point " << to_string(r.classification) << "\" cx=\""
        << fixed2(x_of(r.coefficient)) << "\" cy=\"" << fixed2(y) << "\" r=\"5\" fill=\"" << color
        << "\"/>\n";
  }
  out << "<text x=\"" << fixed2((left + right) / 2) << "\" y=\"880\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">first-stage coefficient (95% CI)</text>\n";
  out << "</svg>\n";
  return out.str();
}

std::string forest_csv(const std::vector<ForestRow>& rows) {
  std::ostringstream out;
  out << "item_id,coef,se,ci_low,ci_high,class\n";
  for (const auto& r : rows) {
    out << r.item_id << ',' << format_real(r.coefficient) << ',' << format_real(r.std_error) << ','
        << format_real(r.ci_low) << ',' << format_real(r.ci_high) << ','
        << to_string(r.classification) << '\n';
  }
  return out.str();
}

std::string effects_svg(const std::vector<EffectBar>& bars, const std::string& title) {
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22"};
  std::vector<std::uint64_t> items;
  std::vector<std::string> specs;
  for (const auto& b : bars) {
    if (std::ranges::find(items, b.item_id) == items.end()) items.push_back(b.item_id);
    if (std::ranges::find(specs, b.spec) == specs.end()) specs.push_back(b.spec);
  }
  const double left = 120.0, right = 1550.0, top = 80.0, bottom = 800.0;
  double lo = 0.0, hi = 0.0;
  for (const auto& b : bars) {
    lo = std::min(lo, b.coefficient - 1.96 * b.std_error);
    hi = std::max(hi, b.coefficient + 1.96 * b.std_error);
  }
  const auto range = padded(lo, hi);
  auto y_of = [&](double v) { return bottom - (v - range.lo) / (range.hi - range.lo) * (bottom - top); };
  const double group = items.empty() ? 0.0 : (right - left) / static_cast<double>(items.size());
  const double bar = specs.empty() ? 0.0 : 0.8 * group / static_cast<double>(specs.size());

  std::ostringstream out;
  out << svg_header(title);
  out << "<line class=\"zero\" x1=\"" << fixed2(left) << "\" y1=\"" << fixed2(y_of(0.0))
      << "\" x2=\"" << fixed2(right) << "\" y2=\"" << fixed2(y_of(0.0))
      << "\" stroke=\"#444444\"/>\n";
  for (std::size_t g = 0; g < items.size(); ++g) {
    const double gx = left + group * static_cast<double>(g) + 0.1 * group;
    out << "<text x=\"" << fixed2(gx + 0.4 * group) << "\" y=\"830\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"14\">item " << items[g] << "</text>\n";
    for (std::size_t s = 0; s < specs.size(); ++s) {
      auto it = std::ranges::find_if(bars, [&](const EffectBar& b) {
        return b.item_id == items[g] && b.spec == specs[s];
      });
      if (it == bars.end()) continue;
      const double x = gx + bar * static_cast<double>(s);
      const double y0 = y_of(0.0), y1 = y_of(it->coefficient);
      out << "<rect class=\"bar\" x=\"" << fixed2(x) << "\" y=\"" << fixed2(std::min(y0, y1))
          << "\" width=\"" << fixed2(bar * 0.9) << "\" height=\"" << fixed2(std::abs(y1 - y0))
          << "\" fill=\"" << palette[s % 8] << "\"/>\n";
      const double cx = x + bar * 0.45;
      out << "<line class=\"whisker\" x1=\"" << fixed2(cx) << "\" y1=\""
          << fixed2(y_of(it->coefficient - 1.96 * it->std_error)) << "\" x2=\"" << fixed2(cx)
          << "\" y2=\"" << fixed2(y_of(it->coefficient + 1.96 * it->std_error))
          << "\" stroke=\"#000000\"/>\n";
    }
  }
  for (std::size_t s = 0; s < specs.size(); ++s) {
    const double ly = 70.0 + 24.0 * static_cast<double>(s);
    out << "<rect class=\"legend\" x=\"1380\" y=\"" << fixed2(ly) << "\" width=\"16\" "
        << "height=\"16\" fill=\"" << palette[s % 8] << "\"/>\n";
    out << "<text x=\"1404\" y=\"" << fixed2(ly + 13) << "\" font-family=\"sans-serif\" "
        << "font-size=\"14\">" << specs[s] << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string effects_csv(const std::vector<EffectBar>& bars) {
  std::ostringstream out;
  out << "item_id,spec,coef,se\n";
  for (const auto& b : bars) {
    out << b.item_id << ',' << csv_field(b.spec) << ',' << format_real(b.coefficient) << ','
        << format_real(b.std_error) << '\n';
  }
  return out.str();
}

std::vector<EffectBar> read_effects_csv(const std::string& text) {
  const auto records = parse_csv(text);
  if (records.empty()) throw Error(ErrorCode::EmptyInput, "effects file is empty");
  const auto& header = records.front();
  auto column = [&](const char* name) {
    auto it = std::ranges::find(header, name);
    if (it == header.end()) {
      throw Error(ErrorCode::MissingColumn, std::string("effects file lacks column '") + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto item = column("item_id"), spec = column("spec"), coef = column("coef"),
             se = column("se");
  std::vector<EffectBar> bars;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& cells = records[r];
    if (cells.size() != header.size()) throw Error(ErrorCode::ParseError, "ragged effects row");
    EffectBar b;
    auto id = parse_id(cells[item]);
    if (!id) throw Error(ErrorCode::ParseError, "bad item_id in effects file");
    b.item_id = *id;
    b.spec = cells[spec];
    try {
      b.coefficient = std::stod(cells[coef]);
      b.std_error = std::stod(cells[se]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError, "bad number in effects file row " + std::to_string(r));
    }
    bars.push_back(std::move(b));
  }
  if (bars.empty()) throw Error(ErrorCode::EmptyInput, "effects file has no rows");
  return bars;
}

}  // namespace posiv::report
