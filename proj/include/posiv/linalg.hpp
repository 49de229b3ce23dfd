#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "posiv/error.hpp"

namespace posiv::linalg {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr double kMaxCondition = 1e12;

// Least squares through a column-pivoting Householder QR; the normal
// equations are never formed. Construction throws Error(Collinear) when the
// design is rank deficient or its condition estimate |R_00| / |R_kk|
// reaches max_condition.
template <typename Scalar>
class LeastSquares {
 public:
  template <typename Derived>
  explicit LeastSquares(const Eigen::MatrixBase<Derived>& a,
                        Scalar max_condition = Scalar(kMaxCondition))
      : qr_(a) {
    const auto k = qr_.cols();
    if (qr_.rows() < k) {
      throw Error(ErrorCode::Underdetermined, std::to_string(qr_.rows()) + " rows for " +
                                                  std::to_string(k) + " columns");
    }
    if (k == 0) return;
    const auto& r = qr_.matrixR();
    const Scalar largest = std::abs(r(0, 0));
    const Scalar smallest = std::abs(r(k - 1, k - 1));
    condition_ = smallest > Scalar(0) ? largest / smallest : std::numeric_limits<Scalar>::infinity();
    if (qr_.rank() < k || !(condition_ < max_condition)) {
      throw Error(ErrorCode::Collinear, "design has rank " + std::to_string(qr_.rank()) + " of " +
                                            std::to_string(k) + " (condition estimate " +
                                            std::to_string(static_cast<double>(condition_)) + ")");
    }
  }

  template <typename Rhs>
  Matrix<Scalar> solve(const Eigen::MatrixBase<Rhs>& b) const {
    return qr_.solve(b);
  }

  // (A'A)^{-1} = P R^{-1} R^{-T} P'.
  Matrix<Scalar> inverse_gram() const {
    const auto k = qr_.cols();
    const Matrix<Scalar> r = qr_.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
    const Matrix<Scalar> r_inv = r.template triangularView<Eigen::Upper>().solve(
        Matrix<Scalar>::Identity(k, k));
    const Matrix<Scalar> g = r_inv * r_inv.transpose();
    return qr_.colsPermutation() * g * qr_.colsPermutation().transpose();
  }

  Scalar condition_estimate() const { return condition_; }
  Eigen::Index cols() const { return qr_.cols(); }

 private:
  Eigen::ColPivHouseholderQR<Matrix<Scalar>> qr_;
  Scalar condition_ = Scalar(1);
};

template <typename Derived>
LeastSquares(const Eigen::MatrixBase<Derived>&) -> LeastSquares<typename Derived::Scalar>;

// Dense cluster index (0..G-1) in ascending id order.
inline std::vector<Eigen::Index> cluster_index(std::span<const std::uint64_t> ids,
                                               Eigen::Index* n_clusters) {
  std::vector<std::uint64_t> unique(ids.begin(), ids.end());
  std::ranges::sort(unique);
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  std::vector<Eigen::Index> index(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    index[i] = std::lower_bound(unique.begin(), unique.end(), ids[i]) - unique.begin();
  }
  *n_clusters = static_cast<Eigen::Index>(unique.size());
  return index;
}

// Sum over clusters g of (M_g' u_g)(M_g' u_g)'.
template <typename DerivedM, typename DerivedU>
Matrix<typename DerivedM::Scalar> cluster_meat(const Eigen::MatrixBase<DerivedM>& m,
                                               const Eigen::MatrixBase<DerivedU>& u,
                                               std::span<const std::uint64_t> clusters,
                                               Eigen::Index* n_clusters = nullptr) {
  using Scalar = typename DerivedM::Scalar;
  Eigen::Index g = 0;
  const auto index = cluster_index(clusters, &g);
  Matrix<Scalar> scores = Matrix<Scalar>::Zero(g, m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) scores.row(index[i]) += u(i) * m.row(i);
  if (n_clusters) *n_clusters = g;
  return scores.transpose() * scores;
}

// CR1 cluster-robust sandwich for the regressor matrix M and residuals u:
//   (G/(G-1)) ((N-1)/(N-k)) (M'M)^{-1} meat (M'M)^{-1}.
template <typename DerivedM, typename DerivedU>
Matrix<typename DerivedM::Scalar> cluster_cov(const Eigen::MatrixBase<DerivedM>& m,
                                              const Eigen::MatrixBase<DerivedU>& u,
                                              std::span<const std::uint64_t> clusters,
                                              Eigen::Index* n_clusters = nullptr) {
  using Scalar = typename DerivedM::Scalar;
  Eigen::Index g = 0;
  const auto meat = cluster_meat(m, u, clusters, &g);
  if (g < 2) {
    throw Error(ErrorCode::TooFewClusters, std::to_string(g) + " cluster(s); need at least 2");
  }
  const Scalar n = static_cast<Scalar>(m.rows());
  const Scalar k = static_cast<Scalar>(m.cols());
  if (!(n > k)) {
    throw Error(ErrorCode::Underdetermined, "no residual degrees of freedom");
  }
  const Scalar scale = (Scalar(g) / Scalar(g - 1)) * ((n - 1) / (n - k));
  const auto bread = LeastSquares<Scalar>(m).inverse_gram();
  Matrix<Scalar> cov = scale * bread * meat * bread;
  if (n_clusters) *n_clusters = g;
  return (cov + cov.transpose()) / Scalar(2);
}

}  // namespace posiv::linalg
