#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "posiv/dataset.hpp"
#include "posiv/prepare.hpp"

namespace posiv::testing {

inline EdgeObservation row(std::uint64_t request, std::uint64_t user, std::uint64_t item,
                           std::int32_t position, std::int32_t outcome, std::string arm,
                           std::optional<std::string> reason = std::nullopt,
                           std::optional<double> relevance = std::nullopt,
                           std::optional<std::int32_t> depth = std::nullopt) {
  EdgeObservation r;
  r.request_id = request;
  r.user_id = user;
  r.item_id = item;
  r.position = position;
  r.outcome = outcome;
  r.arm = std::move(arm);
  r.reason = std::move(reason);
  r.relevance_score = relevance;
  r.session_depth = depth;
  return r;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("posiv_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(POSIV_TEST_DATA) / name;
}

// Design with one endogenous column, one binary instrument and a constant;
// w depends on z and a confounder that also enters y.
inline DesignMatrix random_iv_design(int n, int n_clusters, std::uint32_t seed,
                                     int extra_controls = 0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin(0.5);
  DesignMatrix d;
  d.outcome.resize(n);
  d.endogenous.resize(n, 1);
  d.instruments.resize(n, 1);
  d.controls.resize(n, extra_controls + 1);
  for (int i = 0; i < n; ++i) {
    const double z = coin(gen) ? 1.0 : 0.0;
    const double u = normal(gen);
    for (int c = 0; c < extra_controls; ++c) d.controls(i, c) = normal(gen);
    const double x = extra_controls > 0 ? d.controls(i, 0) : 0.0;
    const double w = 1.0 + 0.8 * z + 0.5 * u + 0.3 * x + 0.3 * normal(gen);
    d.instruments(i, 0) = z;
    d.endogenous(i, 0) = w;
    d.controls(i, extra_controls) = 1.0;
    d.outcome(i) = 0.5 - 0.2 * w + 0.4 * u + 0.1 * x + 0.2 * normal(gen);
    d.clusters.push_back(static_cast<std::uint64_t>(i % n_clusters));
    d.source_rows.push_back(static_cast<std::size_t>(i));
  }
  d.outcome_name = "y";
  d.endogenous_names = {"w"};
  d.instrument_names = {"z"};
  for (int c = 0; c < extra_controls; ++c) d.control_names.push_back("x" + std::to_string(c));
  d.control_names.emplace_back(kConstantName);
  return d;
}

// Moore-Penrose pseudo-inverse through the SVD.
inline Eigen::MatrixXd pinv(const Eigen::MatrixXd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double tol = 1e-13 * s(0) * static_cast<double>(std::max(a.rows(), a.cols()));
  Eigen::VectorXd inv = s;
  for (Eigen::Index i = 0; i < s.size(); ++i) inv(i) = s(i) > tol ? 1.0 / s(i) : 0.0;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

inline double max_rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace posiv::testing
