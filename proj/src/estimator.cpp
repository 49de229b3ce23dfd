#include "posiv/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "posiv/error.hpp"
#include "posiv/linalg.hpp"

namespace posiv {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kWeakInstrumentF = 10.0;

MatrixXd hcat(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

double total_sum_of_squares(const VectorXd& y) {
  return (y.array() - y.mean()).square().sum();
}

// Fills inference, fit statistics and stars from coefficients and residuals.
// `scores` is the regressor matrix the sandwich is built on.
FitResult finish_fit(const DesignMatrix& d, Method method, VectorXd coef, const VectorXd& residuals,
                     const MatrixXd& scores) {
  FitResult f;
  f.method = method;
  f.outcome_name = d.outcome_name;
  f.names = d.endogenous_names;
  f.names.insert(f.names.end(), d.control_names.begin(), d.control_names.end());
  f.coefficients = std::move(coef);
  f.n_obs = static_cast<std::size_t>(d.rows());
  f.dropped_rows = d.dropped_rows;

  Index g = 0;
  f.covariance = linalg::cluster_cov(scores, residuals, d.clusters, &g);
  f.n_clusters = static_cast<std::size_t>(g);

  const auto k = f.coefficients.size();
  const double df_t = static_cast<double>(g - 1);
  f.std_errors = f.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  f.t_stats.resize(k);
  f.p_values.resize(k);
  for (Index j = 0; j < k; ++j) {
    const double b = f.coefficients(j);
    const double se = f.std_errors(j);
    if (se > 0.0) {
      f.t_stats(j) = b / se;
      f.p_values(j) = two_sided_t_p_value(f.t_stats(j), df_t);
    } else {
      f.t_stats(j) = b == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), b);
      f.p_values(j) = b == 0.0 ? 1.0 : 0.0;
    }
    f.stars.push_back(significance_stars(f.p_values(j)));
  }

  const double n = static_cast<double>(f.n_obs);
  const double ssr = residuals.squaredNorm();
  const double sst = total_sum_of_squares(d.outcome);
  f.df_residual = f.n_obs - static_cast<std::size_t>(k);
  f.r_squared = sst > 0.0 ? 1.0 - ssr / sst : 0.0;
  f.adj_r_squared = 1.0 - (1.0 - f.r_squared) * (n - 1.0) / static_cast<double>(f.df_residual);
  f.residual_std_error = std::sqrt(ssr / static_cast<double>(f.df_residual));
  return f;
}

FirstStageEquation first_stage_equation(const DesignMatrix& d, const MatrixXd& exog,
                                        const linalg::LeastSquares<double>& ls, Index e,
                                        VectorXd* fitted) {
  const VectorXd w = d.endogenous.col(e);
  const VectorXd pi = ls.solve(w);
  const VectorXd w_hat = exog * pi;
  const VectorXd resid = w - w_hat;
  Index g = 0;
  const MatrixXd cov = linalg::cluster_cov(exog, resid, d.clusters, &g);
  const Index q = d.instruments.cols();

  FirstStageEquation eq;
  eq.endogenous = d.endogenous_names[e];
  eq.instrument_names = d.instrument_names;
  eq.coefficients = pi.head(q);
  eq.std_errors = cov.diagonal().head(q).cwiseMax(0.0).cwiseSqrt();
  eq.df_num = static_cast<double>(q);
  eq.df_den = static_cast<double>(g - 1);
  const MatrixXd v = cov.topLeftCorner(q, q);
  const double wald = eq.coefficients.dot(v.ldlt().solve(eq.coefficients));
  eq.f_stat = wald / static_cast<double>(q);
  eq.f_p_value = f_upper_p_value(eq.f_stat, eq.df_num, eq.df_den);
  const double crit = t_critical(0.95, eq.df_den);
  eq.ci_low = eq.coefficients(0) - crit * eq.std_errors(0);
  eq.ci_high = eq.coefficients(0) + crit * eq.std_errors(0);
  if (eq.ci_high < 0.0) eq.classification = FirstStageClass::Negative;
  else if (eq.ci_low > 0.0) eq.classification = FirstStageClass::Positive;
  else eq.classification = FirstStageClass::Null;
  if (fitted) *fitted = w_hat;
  return eq;
}

void require_instruments(const DesignMatrix& d) {
  if (d.endogenous.cols() == 0) {
    throw Error(ErrorCode::Underidentified, "IV fit needs at least one endogenous column");
  }
  if (d.instruments.cols() < d.endogenous.cols()) {
    throw Error(ErrorCode::Underidentified,
                std::to_string(d.instruments.cols()) + " instruments for " +
                    std::to_string(d.endogenous.cols()) + " endogenous columns");
  }
}

void add_weak_instrument_warnings(FitResult& f, const std::vector<FirstStageEquation>& eqs) {
  for (const auto& eq : eqs) {
    f.first_stage_f.push_back(eq.f_stat);
    if (eq.f_stat < kWeakInstrumentF) {
      std::ostringstream msg;
      msg << "WeakInstrumentWarning: first-stage F for '" << eq.endogenous << "' is " << eq.f_stat
          << " (< " << kWeakInstrumentF << ")";
      f.warnings.push_back(msg.str());
    }
  }
}

}  // namespace

std::optional<std::size_t> FitResult::index_of(const std::string& name) const {
  auto it = std::ranges::find(names, name);
  if (it == names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names.begin());
}

std::string to_string(FirstStageClass c) {
  switch (c) {
    case FirstStageClass::Negative: return "negative";
    case FirstStageClass::Null: return "null";
    case FirstStageClass::Positive: return "positive";
  }
  return "null";
}

double two_sided_t_p_value(double t, double df) {
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

double t_critical(double level, double df) {
  boost::math::students_t dist(df);
  return boost::math::quantile(boost::math::complement(dist, (1.0 - level) / 2.0));
}

double f_upper_p_value(double f, double df1, double df2) {
  if (!(f >= 0.0)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(f)) return 0.0;
  boost::math::fisher_f dist(df1, df2);
  return boost::math::cdf(boost::math::complement(dist, f));
}

std::string significance_stars(double p) {
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.1) return "*";
  return "";
}

MatrixXd cluster_cov(const MatrixXd& regressors, const VectorXd& residuals,
                     std::span<const std::uint64_t> clusters) {
  return linalg::cluster_cov(regressors, residuals, clusters);
}

FitResult fit_ols(const DesignMatrix& d) {
  const MatrixXd m = hcat(d.endogenous, d.controls);
  const linalg::LeastSquares<double> ls(m);
  VectorXd coef = ls.solve(d.outcome);
  const VectorXd resid = d.outcome - m * coef;
  return finish_fit(d, Method::OLS, std::move(coef), resid, m);
}

FitResult fit_2sls(const DesignMatrix& d) {
  require_instruments(d);
  const MatrixXd exog = hcat(d.instruments, d.controls);
  const linalg::LeastSquares<double> first(exog);
  const Index p = d.endogenous.cols();

  MatrixXd w_hat(d.rows(), p);
  std::vector<FirstStageEquation> eqs;
  for (Index e = 0; e < p; ++e) {
    VectorXd fitted;
    eqs.push_back(first_stage_equation(d, exog, first, e, &fitted));
    w_hat.col(e) = fitted;
  }

  const MatrixXd projected = hcat(w_hat, d.controls);
  const linalg::LeastSquares<double> second(projected);
  VectorXd coef = second.solve(d.outcome);
  // structural residuals use the observed endogenous columns
  const VectorXd resid = d.outcome - hcat(d.endogenous, d.controls) * coef;
  auto f = finish_fit(d, Method::TwoSLS, std::move(coef), resid, projected);
  add_weak_instrument_warnings(f, eqs);
  return f;
}

FitResult fit_ils(const DesignMatrix& d) {
  if (d.endogenous.cols() != 1 || d.instruments.cols() != 1) {
    throw Error(ErrorCode::NotJustIdentified,
                "ILS needs exactly one endogenous column and one excluded instrument, got " +
                    std::to_string(d.endogenous.cols()) + " and " +
                    std::to_string(d.instruments.cols()));
  }
  const MatrixXd exog = hcat(d.instruments, d.controls);
  const linalg::LeastSquares<double> ls(exog);
  const VectorXd w = d.endogenous.col(0);
  const VectorXd reduced = ls.solve(d.outcome);
  const VectorXd stage1 = ls.solve(w);

  const auto sd = [](const VectorXd& v) {
    return std::sqrt((v.array() - v.mean()).square().sum() / static_cast<double>(v.size()));
  };
  const double z_sd = sd(d.instruments.col(0));
  const double scale = z_sd > 0.0 ? sd(w) / z_sd : 0.0;
  if (!(std::abs(stage1(0)) > 1e-10 * scale)) {
    throw Error(ErrorCode::ZeroFirstStage,
                "first-stage coefficient " + std::to_string(stage1(0)) + " is numerically zero");
  }

  const Index c = d.controls.cols();
  VectorXd coef(1 + c);
  coef(0) = reduced(0) / stage1(0);
  coef.tail(c) = reduced.tail(c) - coef(0) * stage1.tail(c);

  MatrixXd projected(d.rows(), 1 + c);
  projected << exog * stage1, d.controls;
  const VectorXd resid = d.outcome - hcat(d.endogenous, d.controls) * coef;
  auto f = finish_fit(d, Method::ILS, std::move(coef), resid, projected);
  add_weak_instrument_warnings(f, {first_stage_equation(d, exog, ls, 0, nullptr)});
  return f;
}

FitResult fit(const DesignMatrix& d, Method method) {
  switch (method) {
    case Method::OLS: return fit_ols(d);
    case Method::TwoSLS: return fit_2sls(d);
    case Method::ILS: return fit_ils(d);
  }
  return fit_ols(d);
}

FirstStageReport first_stage(const DesignMatrix& d) {
  require_instruments(d);
  const MatrixXd exog = hcat(d.instruments, d.controls);
  const linalg::LeastSquares<double> ls(exog);
  FirstStageReport report;
  report.n_obs = static_cast<std::size_t>(d.rows());
  for (Index e = 0; e < d.endogenous.cols(); ++e) {
    report.equations.push_back(first_stage_equation(d, exog, ls, e, nullptr));
  }
  report.n_clusters = static_cast<std::size_t>(report.equations.front().df_den) + 1;
  return report;
}

double position_coefficient(const FitResult& fit) {
  return fit.coefficients(static_cast<Index>(fit.index_of("position").value_or(0)));
}

double position_std_error(const FitResult& fit) {
  return fit.std_errors(static_cast<Index>(fit.index_of("position").value_or(0)));
}

EffectEstimate aggregate_effect(std::vector<ItemFit> item_fits, int k1, int k2) {
  if (item_fits.empty()) throw Error(ErrorCode::EmptyInput, "no item fits to aggregate");
  std::ranges::sort(item_fits, {}, &ItemFit::item_id);
  EffectEstimate est;
  est.n_items = item_fits.size();
  const double shift = static_cast<double>(k2 - k1);
  for (const auto& item : item_fits) {
    est.per_item.emplace_back(item.item_id, position_coefficient(item.fit) * shift);
  }
  // shifted two-pass moments so identical estimates give exactly zero spread
  const double origin = est.per_item.front().second;
  const double n = static_cast<double>(est.n_items);
  double mean_shift = 0.0;
  for (const auto& [id, tau] : est.per_item) mean_shift += tau - origin;
  mean_shift /= n;
  est.tau_hat = origin + mean_shift;
  if (est.n_items > 1) {
    double ss = 0.0;
    for (const auto& [id, tau] : est.per_item) {
      const double dev = (tau - origin) - mean_shift;
      ss += dev * dev;
    }
    est.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return est;
}

}  // namespace posiv
