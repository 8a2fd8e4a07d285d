#pragma once

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <cmath>
#include <string>
#include <vector>

#include "sarlin/error.hpp"
#include "sarlin/instruments.hpp"
#include "sarlin/projection.hpp"
#include "sarlin/weights.hpp"

namespace sarlin {

/// 2SLS fit of y = lambda W y + X beta + e, theta = (lambda, beta')'.
struct Sar2slsFit {
  double lambda_hat = 0.0;
  Vector beta_hat;
  Vector theta_hat;
  Vector residuals;
  Vector robust_se;  // White sandwich on the projected regressors
  Vector t_stats;
  std::vector<std::string> warnings;
};

namespace detail {

// Core solve given the endogenous block [Wy, X] and a factorized projector.
inline Sar2slsFit fit_2sls_projected(const Eigen::Ref<const Vector>& y,
                                     const Eigen::Ref<const Matrix>& regressors,
                                     const Projector& proj) {
  const Index n = y.size(), q = regressors.cols();
  require(regressors.rows() == n && proj.n() == n, "fit_2sls: dimension mismatch");
  require(proj.m() >= q, "fit_2sls: need at least k+1 instruments");

  const Matrix a = proj.coords(regressors);  // Q' XX, m x (k+1)
  const Vector b = proj.coords(y);           // Q' y
  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  qr.setThreshold(1e-12);
  if (qr.rank() < q)
    throw NumericalError("X'P_Z X is singular: instruments do not identify (lambda, beta)");

  Sar2slsFit fit;
  fit.theta_hat = qr.solve(b);
  fit.lambda_hat = fit.theta_hat(0);
  fit.beta_hat = fit.theta_hat.tail(q - 1);
  fit.residuals = y - regressors * fit.theta_hat;

  // Var(theta) = (A'A)^{-1} (Xh' diag(e^2) Xh) (A'A)^{-1}, Xh = Q A = P_Z XX.
  const Matrix xh = proj.Q() * a;
  const Matrix meat = (xh.array().colwise() * fit.residuals.array()).matrix();
  const Matrix bread = (a.transpose() * a).ldlt().solve(Matrix::Identity(q, q));
  const Matrix cov = bread * (meat.transpose() * meat) * bread;
  fit.robust_se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.t_stats = fit.theta_hat.cwiseQuotient(fit.robust_se);
  return fit;
}

}  // namespace detail

/// Two-stage least squares for the linear SAR model under the null.
/// theta = (XX' P_Z XX)^{-1} XX' P_Z y with XX = (W y, X), computed by
/// least squares in the orthonormal instrument coordinates.
inline Sar2slsFit fit_2sls(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Matrix>& X,
                           const WeightMatrix& W, const InstrumentMatrix& Z) {
  const Index n = y.size();
  detail::require(X.rows() == n && W.n() == n && Z.n() == n, "fit_2sls: dimension mismatch");
  detail::require(Z.m() >= X.cols() + 1, "fit_2sls: need m >= k+1 instruments");

  Matrix regressors(n, X.cols() + 1);
  regressors.col(0) = spatial_lag(W, y);
  regressors.rightCols(X.cols()) = X;
  const Projector proj(Z.Z);
  Sar2slsFit fit = detail::fit_2sls_projected(y, regressors, proj);

  const double wnorm = spectral_norm(W);
  if (std::abs(fit.lambda_hat) * wnorm >= 1.0)
    fit.warnings.push_back("|lambda_hat| * ||W|| >= 1: I - lambda W may not be invertible");
  return fit;
}

/// Diagonal of Sigma_hat: squared residuals.
inline Vector residual_variance_matrix(const Sar2slsFit& fit) {
  return fit.residuals.array().square().matrix();
}

}  // namespace sarlin
