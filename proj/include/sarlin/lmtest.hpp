#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <json.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sarlin/distributions.hpp"
#include "sarlin/error.hpp"
#include "sarlin/estimator.hpp"
#include "sarlin/instruments.hpp"
#include "sarlin/projection.hpp"
#include "sarlin/sieve.hpp"
#include "sarlin/weights.hpp"

namespace sarlin {

struct LinearityTestResult {
  int p = 0;
  Index n = 0;
  double quad_form = 0.0;  // n d' H^{-1} d
  double t_stat = 0.0;     // (quad_form - p) / sqrt(2p)
  double crit_normal = 0.0;
  double crit_chi2_std = 0.0;
  double pval_normal = 1.0;
  double pval_chi2 = 1.0;
  bool reject_normal = false;
  bool reject_chi2 = false;
  double alpha = 0.05;
  double cond_M = 0.0;
  double cond_H = 0.0;
  double lambda_hat = 0.0;
  std::vector<std::string> warnings;

  friend bool operator==(const LinearityTestResult&, const LinearityTestResult&) = default;
};

// ---------------------------------------------------------------------------
// Gradient and its covariance.
// ---------------------------------------------------------------------------

namespace detail {

inline Vector gradient_dhat(const Matrix& u_coords, const Vector& e_coords, Index n) {
  return (-2.0 / static_cast<double>(n)) * (u_coords.transpose() * e_coords);
}

// 4 J' M^{-1} Omega M^{-1} J written in the orthonormal instrument basis:
// with A = Q'U and C = diag(e) Q it equals (4/n) A' (C'C) A.
inline Matrix covariance_Hhat(const Projector& proj, const Matrix& u_coords,
                              const Eigen::Ref<const Vector>& eps) {
  const Index n = proj.n();
  const Matrix c = (proj.Q().array().colwise() * eps.array()).matrix();
  const Matrix ca = c * u_coords;
  Matrix h = (4.0 / static_cast<double>(n)) * (ca.transpose() * ca);
  return 0.5 * (h + h.transpose());
}

struct SpdSolve {
  Vector solution;
  double condition = 0.0;
};

// Solves H x = d for symmetric positive definite H after Jacobi scaling.
// Throws NumericalError naming the smallest pivot when H is not PD.
inline SpdSolve spd_solve(const Eigen::Ref<const Matrix>& h, const Eigen::Ref<const Vector>& d) {
  const Index q = h.rows();
  require(h.cols() == q && d.size() == q, "statistic: dimension mismatch between d and H");
  const Vector diag = h.diagonal();
  for (Index j = 0; j < q; ++j)
    if (!(diag(j) > 0.0))
      throw NumericalError("H_hat is not positive definite: diagonal entry " +
                           std::to_string(j + 1) + " is " + std::to_string(diag(j)));
  const Vector s = diag.cwiseSqrt().cwiseInverse();
  const Matrix hs = s.asDiagonal() * h * s.asDiagonal();
  Eigen::LLT<Matrix> llt(hs);
  const Vector piv = llt.matrixLLT().diagonal().array().square();
  const double min_pivot = llt.info() == Eigen::Success ? piv.minCoeff() : 0.0;
  if (llt.info() != Eigen::Success || !(min_pivot > 64.0 * std::numeric_limits<double>::epsilon())) {
    Index arg = 0;
    if (llt.info() == Eigen::Success) piv.minCoeff(&arg);
    std::ostringstream os;
    os << "H_hat is not positive definite: smallest Cholesky pivot " << min_pivot
       << " at position " << arg + 1
       << " (rank-deficient regressors U or instruments)";
    throw NumericalError(os.str());
  }
  SpdSolve out;
  out.solution = s.asDiagonal() * llt.solve(s.asDiagonal() * d);
  Eigen::SelfAdjointEigenSolver<Matrix> es(hs, Eigen::EigenvaluesOnly);
  out.condition = es.eigenvalues()(q - 1) / es.eigenvalues()(0);
  return out;
}

}  // namespace detail

/// d_hat = -(2/n) U' P_Z e_hat.
inline Vector gradient_dhat(const Eigen::Ref<const Matrix>& U, const InstrumentMatrix& Z,
                            const Eigen::Ref<const Vector>& eps) {
  const Index n = U.rows();
  detail::require(Z.n() == n && eps.size() == n, "gradient_dhat: dimension mismatch");
  const Projector proj(Z.Z);
  return detail::gradient_dhat(proj.coords(U), proj.coords(eps), n);
}

/// H_hat = 4 J' M^{-1} Omega M^{-1} J with J = Z'U/n, M = Z'Z/n,
/// Omega = Z' diag(e^2) Z / n.
inline Matrix covariance_Hhat(const Eigen::Ref<const Matrix>& U, const InstrumentMatrix& Z,
                              const Eigen::Ref<const Vector>& eps) {
  const Index n = U.rows();
  detail::require(Z.n() == n && eps.size() == n, "covariance_Hhat: dimension mismatch");
  const Projector proj(Z.Z);
  return detail::covariance_Hhat(proj, proj.coords(U), eps);
}

/// Fills quad_form, t_stat, p, n and cond_H.
inline LinearityTestResult statistic(const Eigen::Ref<const Vector>& d_hat,
                                     const Eigen::Ref<const Matrix>& H_hat, Index n, int p) {
  detail::require(p >= 1 && n >= 1, "statistic: need p >= 1 and n >= 1");
  LinearityTestResult r;
  r.p = p;
  r.n = n;
  if (d_hat.isZero(0.0)) {
    r.quad_form = 0.0;
  } else {
    const detail::SpdSolve sol = detail::spd_solve(H_hat, d_hat);
    r.quad_form = static_cast<double>(n) * d_hat.dot(sol.solution);
    r.cond_H = sol.condition;
  }
  r.t_stat = (r.quad_form - p) / std::sqrt(2.0 * p);
  return r;
}

/// n d_p' H^{11} d_p, with H^{11} the leading p x p block of H^{-1} obtained
/// from the Schur complement H11 - H12 H22^{-1} H21. Equals the full
/// quadratic form whenever the trailing block of d vanishes (2SLS FOC).
inline double quad_form_partitioned(const Eigen::Ref<const Vector>& d_hat,
                                    const Eigen::Ref<const Matrix>& H_hat, Index n, int p) {
  const Index q = H_hat.rows();
  detail::require(p >= 1 && p < q && d_hat.size() == q, "quad_form_partitioned: bad dimensions");
  const Index r = q - p;
  const Matrix h12 = H_hat.topRightCorner(p, r);
  const Matrix h22 = H_hat.bottomRightCorner(r, r);
  const Matrix schur = H_hat.topLeftCorner(p, p) - h12 * h22.ldlt().solve(h12.transpose());
  const detail::SpdSolve sol = detail::spd_solve(schur, d_hat.head(p));
  return static_cast<double>(n) * d_hat.head(p).dot(sol.solution);
}

/// floor(n^{1/3}), exact at perfect cubes.
inline int choose_p(Index n) {
  detail::require(n >= 8, "choose_p needs n >= 8");
  auto p = static_cast<Index>(std::cbrt(static_cast<double>(n)));
  while ((p + 1) * (p + 1) * (p + 1) <= n) ++p;
  while (p * p * p > n) --p;
  return static_cast<int>(p);
}

inline void apply_decisions(LinearityTestResult& r, double alpha) {
  detail::require_level(alpha);
  r.alpha = alpha;
  r.crit_normal = normal_critical(alpha);
  r.crit_chi2_std = chi2_standardized_critical(r.p, alpha);
  r.pval_normal = normal_upper_tail(r.t_stat);
  r.pval_chi2 = chi2_upper_tail(r.p, r.quad_form);
  r.reject_normal = r.t_stat > r.crit_normal;
  r.reject_chi2 = r.t_stat > r.crit_chi2_std;
}

struct TestOptions {
  // Replace U by an orthonormal basis of its column space (regressors
  // (Wy, X) first) before forming d and H. The statistic is invariant under
  // invertible column transformations of U; this only improves conditioning
  // when raw Hermite columns span many orders of magnitude.
  bool orthonormalize_regressors = true;
  bool warn_on_rate = true;
};

/// Everything computed along the way, for callers that need more than the
/// decision (the empirical tables, verification code).
struct LinearityAnalysis {
  Sar2slsFit fit;
  RegressorBlocks blocks;
  Vector d_hat;   // on the original U = [Upsilon, Wy, X]
  Matrix H_hat;   // on the original U
  Vector d_work;  // on the basis actually used for the statistic
  Matrix H_work;  // (same column order: test block first)
  LinearityTestResult result;
};

inline LinearityAnalysis analyze(const Eigen::Ref<const Vector>& y,
                                 const Eigen::Ref<const Matrix>& X, const WeightMatrix& W,
                                 const InstrumentMatrix& Z, const BasisSpec& spec, double alpha,
                                 const TestOptions& opts = {}) {
  spec.validate();
  const Index n = y.size(), k = X.cols();
  detail::require(X.rows() == n && W.n() == n && Z.n() == n, "run_test: dimension mismatch");
  if (Z.m() < spec.p + k + 1)
    throw PreconditionError("instrument matrix has " + std::to_string(Z.m()) +
                            " columns, needs at least p+k+1 = " + std::to_string(spec.p + k + 1));

  LinearityAnalysis out;
  const Projector proj(Z.Z);
  out.blocks = build_blocks(y, X, W, spec);
  const Matrix regressors = out.blocks.U.rightCols(k + 1);
  out.fit = detail::fit_2sls_projected(y, regressors, proj);
  if (std::abs(out.fit.lambda_hat) * spectral_norm(W) >= 1.0)
    out.fit.warnings.push_back("|lambda_hat| * ||W|| >= 1: I - lambda W may not be invertible");

  const Vector e_coords = proj.coords(out.fit.residuals);
  const Matrix u_coords = proj.coords(out.blocks.U);
  out.d_hat = detail::gradient_dhat(u_coords, e_coords, n);
  out.H_hat = detail::covariance_Hhat(proj, u_coords, out.fit.residuals);

  if (opts.orthonormalize_regressors) {
    // Orthonormal basis of span(Wy, X) followed by its completion over
    // Upsilon, stored test block first to keep the U column order.
    const Index q = out.blocks.U.cols();
    Matrix reordered(n, q);
    reordered.leftCols(k + 1) = regressors;
    reordered.rightCols(spec.p) = out.blocks.upsilon;
    Eigen::HouseholderQR<Matrix> qr(reordered);
    const Matrix basis = qr.householderQ() * Matrix::Identity(n, q);
    Matrix work(n, q);
    work.leftCols(spec.p) = basis.rightCols(spec.p);
    work.rightCols(k + 1) = basis.leftCols(k + 1);
    const Matrix w_coords = proj.coords(work);
    out.d_work = detail::gradient_dhat(w_coords, e_coords, n);
    out.H_work = detail::covariance_Hhat(proj, w_coords, out.fit.residuals);
  } else {
    out.d_work = out.d_hat;
    out.H_work = out.H_hat;
  }
  out.result = statistic(out.d_work, out.H_work, n, spec.p);
  apply_decisions(out.result, alpha);
  out.result.cond_M = proj.condition_number_M();
  out.result.lambda_hat = out.fit.lambda_hat;
  out.result.warnings = out.fit.warnings;
  if (opts.warn_on_rate && static_cast<double>(spec.p) * spec.p * spec.p > static_cast<double>(n))
    out.result.warnings.push_back("p^3 / n > 1: outside the regime where N(0,1) is a good guide");
  return out;
}

/// End-to-end test of linearity of the spatial interaction.
///
/// Defaults: p = choose_p(n); instruments from build_mc_instruments when X
/// has the three-column simulation shape (intercept first). Any other X
/// requires explicit instruments.
inline LinearityTestResult run_test(const Eigen::Ref<const Vector>& y,
                                    const Eigen::Ref<const Matrix>& X, const WeightMatrix& W,
                                    const std::optional<InstrumentMatrix>& Z = std::nullopt,
                                    const std::optional<BasisSpec>& spec = std::nullopt,
                                    double alpha = 0.05, const TestOptions& opts = {}) {
  const Index n = y.size();
  BasisSpec basis;
  if (spec) {
    basis = *spec;
  } else {
    basis.p = choose_p(n);
  }
  if (Z) return analyze(y, X, W, *Z, basis, alpha, opts).result;
  const bool mc_shape = X.cols() == 3 && (X.col(0).array() == 1.0).all();
  if (!mc_shape)
    throw PreconditionError("instruments are required unless X is [1, x2, x3]");
  return analyze(y, X, W, build_mc_instruments(X, W, basis), basis, alpha, opts).result;
}

// ---------------------------------------------------------------------------
// JSON: flat object with every result field.
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const LinearityTestResult& r) {
  j = nlohmann::json{{"p", r.p},
                     {"n", r.n},
                     {"quad_form", r.quad_form},
                     {"t_stat", r.t_stat},
                     {"crit_normal", r.crit_normal},
                     {"crit_chi2_std", r.crit_chi2_std},
                     {"pval_normal", r.pval_normal},
                     {"pval_chi2", r.pval_chi2},
                     {"reject_normal", r.reject_normal},
                     {"reject_chi2", r.reject_chi2},
                     {"alpha", r.alpha},
                     {"cond_M", r.cond_M},
                     {"cond_H", r.cond_H},
                     {"lambda_hat", r.lambda_hat},
                     {"warnings", r.warnings}};
}

inline void from_json(const nlohmann::json& j, LinearityTestResult& r) {
  j.at("p").get_to(r.p);
  j.at("n").get_to(r.n);
  j.at("quad_form").get_to(r.quad_form);
  j.at("t_stat").get_to(r.t_stat);
  j.at("crit_normal").get_to(r.crit_normal);
  j.at("crit_chi2_std").get_to(r.crit_chi2_std);
  j.at("pval_normal").get_to(r.pval_normal);
  j.at("pval_chi2").get_to(r.pval_chi2);
  j.at("reject_normal").get_to(r.reject_normal);
  j.at("reject_chi2").get_to(r.reject_chi2);
  j.at("alpha").get_to(r.alpha);
  j.at("cond_M").get_to(r.cond_M);
  j.at("cond_H").get_to(r.cond_H);
  j.at("lambda_hat").get_to(r.lambda_hat);
  r.warnings = j.value("warnings", std::vector<std::string>{});
}

}  // namespace sarlin
