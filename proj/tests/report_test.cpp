#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <regex>

#include "posiv/error.hpp"
#include "posiv/report.hpp"
#include "support.hpp"

namespace posiv::report {
namespace {

FitResult make_fit(const std::string& spec, Method method, std::vector<std::string> names,
                   std::vector<double> coef, std::vector<double> se, std::vector<double> p) {
  FitResult f;
  f.spec_name = spec;
  f.method = method;
  f.outcome_name = "Ad click (1 or 0)";
  f.names = std::move(names);
  const auto k = static_cast<Eigen::Index>(coef.size());
  f.coefficients = Eigen::Map<Eigen::VectorXd>(coef.data(), k);
  f.std_errors = Eigen::Map<Eigen::VectorXd>(se.data(), k);
  f.covariance = f.std_errors.array().square().matrix().asDiagonal();
  f.t_stats = f.coefficients.cwiseQuotient(f.std_errors);
  f.p_values = Eigen::Map<Eigen::VectorXd>(p.data(), k);
  for (double pv : p) f.stars.push_back(significance_stars(pv));
  f.n_obs = 402358;
  f.n_clusters = 390000;
  f.df_residual = f.n_obs - static_cast<std::size_t>(k);
  f.r_squared = method == Method::OLS ? 0.0123 : -0.52;
  f.adj_r_squared = f.r_squared - 1e-5;
  f.residual_std_error = 0.0891;
  return f;
}

std::vector<TableColumn> ads_columns() {
  return {
      {make_fit("spec1", Method::TwoSLS, {"position", kConstantName}, {-0.0012, 0.016},
                {0.0003, 0.003}, {0.0001, 0.0002}),
       "IV"},
      {make_fit("spec2", Method::TwoSLS, {"position", "relevance_score", kConstantName},
                {-0.0007, 0.70, 0.0058}, {0.0003, 0.032, 0.002}, {0.02, 1e-9, 0.004}),
       "IV"},
      {make_fit("spec3", Method::OLS, {"position", "relevance_score", kConstantName},
                {-0.0004, 0.72, 0.0035}, {2.07e-5, 0.024, 0.0003}, {1e-12, 1e-10, 1e-8}),
       "OLS"},
  };
}

TEST(FormatNumber, DisplayRule) {
  EXPECT_EQ(format_number(-0.0007), "−0.0007");
  EXPECT_EQ(format_number(0.0003), "0.0003");
  EXPECT_EQ(format_number(2.07e-5), "2.07×10⁻⁵");
  EXPECT_EQ(format_number(-3.1e-7), "−3.1×10⁻⁷");
  EXPECT_EQ(format_number(9.996e-5), "1×10⁻⁴");
  EXPECT_EQ(format_number(0.72), "0.72");
  EXPECT_EQ(format_number(0.016), "0.016");
  EXPECT_EQ(format_number(0.0035), "0.0035");
  EXPECT_EQ(format_number(-0.038123), "−0.03812");
  EXPECT_EQ(format_number(123.456), "123.5");
  EXPECT_EQ(format_number(12345.6), "12346");
  EXPECT_EQ(format_number(0.0), "0");
  EXPECT_EQ(format_count(402358), "402,358");
  EXPECT_EQ(format_count(7083918), "7,083,918");
  EXPECT_EQ(format_count(12), "12");
  EXPECT_EQ(format_fixed3(-0.52), "−0.520");
  EXPECT_EQ(format_fixed3(0.158), "0.158");
}

TEST(RenderTable, PaperLayout) {
  const auto text = render_table(ads_columns());
  EXPECT_NE(text.find("*p<0.1; **p<0.05; ***p<0.01"), std::string::npos);
  EXPECT_NE(text.find("Dependent variable:"), std::string::npos);
  EXPECT_NE(text.find("Observations"), std::string::npos);
  EXPECT_NE(text.find("R²"), std::string::npos);
  EXPECT_NE(text.find("Residual Std. Error"), std::string::npos);
  EXPECT_NE(text.find("0.089 (df = 402356)"), std::string::npos);
  EXPECT_NE(text.find("402,358"), std::string::npos);
  EXPECT_NE(text.find("(2.07×10⁻⁵)"), std::string::npos);

  // "−0.0007**" sits directly above "(0.0003)" in the same column
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto end = text.find('\n', start);
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  auto row = std::ranges::find_if(lines, [](const std::string& l) { return l.starts_with("position"); });
  ASSERT_NE(row, lines.end());
  const auto coef_at = row->find("−0.0007**");
  ASSERT_NE(coef_at, std::string::npos);
  const auto& below = *(row + 1);
  const auto se_at = below.find("(0.0003)", display_width(row->substr(0, coef_at)) - 2);
  ASSERT_NE(se_at, std::string::npos);
  const auto coef_mid = display_width(row->substr(0, coef_at)) + display_width("−0.0007**") / 2.0;
  const auto se_mid = display_width(below.substr(0, se_at)) + display_width("(0.0003)") / 2.0;
  EXPECT_NEAR(coef_mid, se_mid, 1.0);
  // the constant is the last coefficient row
  auto constant = std::ranges::find_if(lines, [](const std::string& l) { return l.starts_with("Constant"); });
  ASSERT_NE(constant, lines.end());
  EXPECT_TRUE((constant + 2)->starts_with("---"));
}

TEST(RenderTable, MatchesGoldenFile) {
  const auto text = render_table(ads_columns());
  const auto golden = testing::data_path("ads_table.txt");
  if (std::getenv("POSIV_UPDATE_GOLDEN")) testing::write_text(golden, text);
  EXPECT_EQ(text, testing::read_text(golden)) << text;
}

TEST(RenderTable, StarsAtExactThresholds) {
  auto fit = make_fit("s", Method::OLS, {"position", kConstantName}, {0.5, 0.25}, {0.1, 0.1},
                      {0.049999, 0.05});
  const auto text = render_table({{fit, "OLS"}});
  EXPECT_NE(text.find("0.5**"), std::string::npos);
  EXPECT_EQ(text.find("0.5***"), std::string::npos);
  EXPECT_NE(text.find("0.25*"), std::string::npos);
  EXPECT_EQ(text.find("0.25**"), std::string::npos);
}

TEST(FitJson, AgreesWithText) {
  const auto columns = ads_columns();
  const auto text = render_table(columns);
  for (const auto& c : columns) {
    const auto j = fit_to_json(c.fit);
    const auto& display = j.at("display");
    for (std::size_t i = 0; i < c.fit.names.size(); ++i) {
      const auto coef = display.at("coefficients")[i].get<std::string>() + j.at("stars")[i].get<std::string>();
      const auto se = "(" + display.at("std_errors")[i].get<std::string>() + ")";
      EXPECT_NE(text.find(coef), std::string::npos) << coef;
      EXPECT_NE(text.find(se), std::string::npos) << se;
      EXPECT_DOUBLE_EQ(j.at("coefficients")[i].get<double>(), c.fit.coefficients(static_cast<Eigen::Index>(i)));
    }
    EXPECT_NE(text.find(display.at("observations").get<std::string>()), std::string::npos);
    EXPECT_NE(text.find(display.at("r_squared").get<std::string>()), std::string::npos);
    EXPECT_NE(text.find(display.at("residual_std_error").get<std::string>() + " (df = " +
                        std::to_string(j.at("df_residual").get<std::size_t>()) + ")"),
              std::string::npos);
    EXPECT_EQ(j.at("method"), to_string(c.fit.method));
    EXPECT_EQ(j.at("covariance").size(), c.fit.names.size());
  }
}

TEST(ForestPlot, NullClassAndCsvRows) {
  std::vector<ForestRow> rows{{3, 0.1, 0.2, -0.3, 0.5, FirstStageClass::Null},
                              {1, -0.1, 0.2, -0.5, 0.3, FirstStageClass::Null}};
  const auto svg = forest_svg(rows, "t");
  EXPECT_NE(svg.find("viewBox=\"0 0 1600 900\""), std::string::npos);
  EXPECT_EQ(svg.find("#d62728"), std::string::npos);
  EXPECT_EQ(svg.find("#1f77b4"), std::string::npos);
  EXPECT_NE(svg.find("class=\"zero\""), std::string::npos);
  const auto csv = forest_csv(rows);
  EXPECT_EQ(std::ranges::count(csv, '\n'), 3);
  EXPECT_EQ(forest_svg(rows, "t"), svg);
}

TEST(EffectsPlot, OneBarPerItemAndSpec) {
  std::vector<EffectBar> bars;
  for (std::uint64_t item = 1; item <= 5; ++item) {
    for (const char* spec : {"spec1", "spec2", "spec3"}) {
      bars.push_back({item, spec, -0.001 * static_cast<double>(item), 0.0003});
    }
  }
  const auto svg = effects_svg(bars, "effects");
  std::size_t n = 0;
  for (auto at = svg.find("class=\"bar\""); at != std::string::npos; at = svg.find("class=\"bar\"", at + 1)) ++n;
  EXPECT_EQ(n, 15u);
  const auto back = read_effects_csv(effects_csv(bars));
  ASSERT_EQ(back.size(), bars.size());
  EXPECT_EQ(back[4].spec, bars[4].spec);
  EXPECT_EQ(back[4].coefficient, bars[4].coefficient);
  EXPECT_THROW(read_effects_csv("item_id,spec,coef,se\n"), Error);
}

}  // namespace
}  // namespace posiv::report
