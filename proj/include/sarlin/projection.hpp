#pragma once

#include <Eigen/Dense>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <string>

#include "sarlin/error.hpp"
#include "sarlin/weights.hpp"

namespace sarlin {

inline constexpr double kRankTolerance = 1e-10;

/// Orthogonal projection onto the column space of an instrument matrix.
///
/// Holds a thin orthonormal basis Q (n x m) from a column-pivoted QR of Z,
/// so P_Z v = Q (Q' v) costs O(nm) and the n x n projector is never formed.
class Projector {
 public:
  explicit Projector(const Eigen::Ref<const Matrix>& Z) {
    const Index n = Z.rows(), m = Z.cols();
    detail::require(m >= 1 && n >= m, "instrument matrix must have n >= m >= 1");
    Eigen::ColPivHouseholderQR<Matrix> qr(Z);
    const auto rdiag = qr.matrixR().diagonal().cwiseAbs();
    const double rmax = rdiag.maxCoeff();
    for (Index j = 0; j < m; ++j)
      if (!(rdiag(j) > kRankTolerance * rmax))
        throw NumericalError("instrument matrix is rank deficient (pivot " + std::to_string(j + 1) +
                             " of " + std::to_string(m) + ")");
    q_ = qr.householderQ() * Matrix::Identity(n, m);
    r_ = qr.matrixR().topLeftCorner(m, m).template triangularView<Eigen::Upper>();
  }

  Index n() const { return q_.rows(); }
  Index m() const { return q_.cols(); }
  const Matrix& Q() const { return q_; }

  // Coordinates in the instrument basis: Q' A.
  template <class Derived>
  auto coords(const Eigen::MatrixBase<Derived>& a) const {
    detail::require(a.rows() == n(), "projection: row count mismatch");
    return (q_.transpose() * a.derived()).eval();
  }

  template <class Derived>
  auto project(const Eigen::MatrixBase<Derived>& a) const {
    return (q_ * coords(a)).eval();
  }

  // Condition number of Z'Z/n (the square of cond(Z)).
  double condition_number_M() const {
    Eigen::JacobiSVD<Matrix> svd(r_);
    const auto& s = svd.singularValues();
    const double c = s(0) / s(s.size() - 1);
    return c * c;
  }

 private:
  Matrix q_;
  Matrix r_;
};

}  // namespace sarlin
