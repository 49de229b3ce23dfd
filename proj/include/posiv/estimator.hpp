#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "posiv/model_spec.hpp"
#include "posiv/prepare.hpp"

namespace posiv {

// One fitted model. Coefficients are ordered endogenous, controls, constant.
struct FitResult {
  std::string spec_name;
  Method method = Method::OLS;
  std::string outcome_name;
  std::vector<std::string> names;
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;  // CR1 cluster-robust
  Eigen::VectorXd std_errors;
  Eigen::VectorXd t_stats;
  Eigen::VectorXd p_values;    // Student-t with G-1 df
  std::vector<std::string> stars;
  std::size_t n_obs = 0;
  std::size_t n_clusters = 0;
  std::size_t dropped_rows = 0;
  // IV fits use structural residuals y - W b_W - X b_X, so R^2 can be < 0.
  double r_squared = 0.0;
  double adj_r_squared = 0.0;
  double residual_std_error = 0.0;
  std::size_t df_residual = 0;
  std::vector<double> first_stage_f;  // per endogenous column, IV fits only
  std::vector<std::string> warnings;

  std::optional<std::size_t> index_of(const std::string& name) const;
};

enum class FirstStageClass { Negative, Null, Positive };

std::string to_string(FirstStageClass c);

struct FirstStageEquation {
  std::string endogenous;
  std::vector<std::string> instrument_names;
  Eigen::VectorXd coefficients;  // on the excluded instruments
  Eigen::VectorXd std_errors;
  double f_stat = 0.0;           // cluster-robust Wald F on the instruments
  double f_p_value = 1.0;
  double df_num = 0.0;
  double df_den = 0.0;
  // 95% interval of the first instrument coefficient and its sign class.
  double ci_low = 0.0;
  double ci_high = 0.0;
  FirstStageClass classification = FirstStageClass::Null;
};

struct FirstStageReport {
  std::vector<FirstStageEquation> equations;
  std::size_t n_obs = 0;
  std::size_t n_clusters = 0;
};

// Per-item fit for effect aggregation.
struct ItemFit {
  std::uint64_t item_id = 0;
  FitResult fit;
};

struct EffectEstimate {
  double tau_hat = 0.0;
  std::optional<double> se;  // absent for a single item
  std::size_t n_items = 0;
  std::vector<std::pair<std::uint64_t, double>> per_item;  // (item, tau_i) by item id
};

FitResult fit_ols(const DesignMatrix& d);
FitResult fit_2sls(const DesignMatrix& d);
FitResult fit_ils(const DesignMatrix& d);
FitResult fit(const DesignMatrix& d, Method method);

FirstStageReport first_stage(const DesignMatrix& d);

// CR1 sandwich for regressors M and residuals u clustered by `clusters`.
Eigen::MatrixXd cluster_cov(const Eigen::MatrixXd& regressors, const Eigen::VectorXd& residuals,
                            std::span<const std::uint64_t> clusters);

// tau_i = c_i (k2 - k1) from each item's position coefficient; tau = mean,
// se = sd / sqrt(N).
EffectEstimate aggregate_effect(std::vector<ItemFit> item_fits, int k1, int k2);

// Coefficient on "position", or the first coefficient when absent.
double position_coefficient(const FitResult& fit);
double position_std_error(const FitResult& fit);

double two_sided_t_p_value(double t, double df);
double t_critical(double level, double df);
double f_upper_p_value(double f, double df1, double df2);

// "***" p < 0.01, "**" p < 0.05, "*" p < 0.1.
std::string significance_stars(double p);

}  // namespace posiv
