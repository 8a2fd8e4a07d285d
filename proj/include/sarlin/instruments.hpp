#pragma once

#include <Eigen/SVD>

#include <limits>
#include <string>
#include <vector>

#include "sarlin/error.hpp"
#include "sarlin/projection.hpp"
#include "sarlin/sieve.hpp"
#include "sarlin/weights.hpp"

namespace sarlin {

struct InstrumentMatrix {
  Matrix Z;
  std::vector<std::string> labels;

  InstrumentMatrix() = default;
  InstrumentMatrix(Matrix z, std::vector<std::string> l) : Z(std::move(z)), labels(std::move(l)) {
    if (labels.empty())
      for (Index j = 0; j < Z.cols(); ++j) labels.push_back("z" + std::to_string(j + 1));
    detail::require(static_cast<Index>(labels.size()) == Z.cols(),
                    "instrument labels do not match column count");
  }

  Index n() const { return Z.rows(); }
  Index m() const { return Z.cols(); }
};

struct InstrumentDiagnostics {
  Index m = 0;
  Index required = 0;          // p + k + 1
  double condition_number = 0; // of Z'Z / n
  double min_sv_ratio = 0;     // smallest / largest singular value of Z
  bool enough_columns = false;
  bool full_rank = false;

  bool pass() const { return enough_columns && full_rank; }
};

inline InstrumentDiagnostics validate_instruments(const InstrumentMatrix& z, int p, int k) {
  InstrumentDiagnostics d;
  d.m = z.m();
  d.required = static_cast<Index>(p) + k + 1;
  d.enough_columns = d.m >= d.required;
  if (z.m() == 0 || z.n() < z.m()) return d;
  Eigen::BDCSVD<Matrix> svd(z.Z);
  const auto& s = svd.singularValues();
  const double smax = s(0), smin = s(s.size() - 1);
  d.min_sv_ratio = smax > 0.0 ? smin / smax : 0.0;
  d.full_rank = smax > 0.0 && d.min_sv_ratio > kRankTolerance;
  d.condition_number = smin > 0.0 ? (smax / smin) * (smax / smin)
                                   : std::numeric_limits<double>::infinity();
  return d;
}

namespace detail {

inline void require_admissible(const InstrumentMatrix& z, int p, int k) {
  const InstrumentDiagnostics d = validate_instruments(z, p, k);
  if (!d.enough_columns)
    throw PreconditionError("instrument matrix has " + std::to_string(d.m) +
                            " columns, needs at least p+k+1 = " + std::to_string(d.required));
  if (!d.full_rank)
    throw NumericalError("instrument matrix is not of full column rank (sv ratio " +
                         std::to_string(d.min_sv_ratio) + ")");
}

}  // namespace detail

/// Covariate used inside the q-th basis instrument (q = 1-based, result
/// 0-based among `count` candidates): forward then backward sweeps, which for
/// two covariates gives the pattern 1,2,2,1,1,2,2,1,...
inline int alternating_covariate(int q, int count) {
  detail::require(q >= 1 && count >= 1, "alternating_covariate: bad arguments");
  const int t = (q - 1) % (2 * count);
  return t < count ? t : 2 * count - 1 - t;
}

/// Simulation instruments, row i:
/// (1, x_i2, x_i3, w_i'x_2, w_i'x_3, psi_1(w_i'x_l1), ..., psi_p(w_i'x_lp)).
inline InstrumentMatrix build_mc_instruments(const Eigen::Ref<const Matrix>& X,
                                             const WeightMatrix& W, const BasisSpec& spec) {
  spec.validate();
  detail::require(X.cols() == 3, "simulation instruments need X with 3 columns");
  detail::require((X.col(0).array() == 1.0).all(), "first column of X must be the intercept");
  detail::require(W.n() == X.rows(), "W dimension does not match X");

  const Index n = X.rows();
  const Matrix wx = spatial_lag(W, X.rightCols(2));
  Matrix z(n, 5 + spec.p);
  std::vector<std::string> labels{"const", "x2", "x3", "Wx2", "Wx3"};
  z.col(0).setOnes();
  z.middleCols(1, 2) = X.rightCols(2);
  z.middleCols(3, 2) = wx;
  for (int j = 1; j <= spec.p; ++j) {
    const int c = alternating_covariate(j, 2);
    z.col(4 + j) = psi_column(j, wx.col(c), spec);
    labels.push_back("psi" + std::to_string(j) + "(Wx" + std::to_string(c + 2) + ")");
  }
  InstrumentMatrix out(std::move(z), std::move(labels));
  detail::require_admissible(out, spec.p, 3);
  return out;
}

struct EmpiricalInstrumentOptions {
  bool spatial_policy = true;   // include W P and W M
  bool basis_on_spatial = true; // include psi_q of the columns of W dX
};

/// Empirical instruments: intercept, dX, P, M, W dX, optionally W P and W M,
/// and optionally p basis transforms of the W dX columns.
inline InstrumentMatrix build_empirical_instruments(const Eigen::Ref<const Matrix>& dX,
                                                    const Eigen::Ref<const Vector>& P,
                                                    const Eigen::Ref<const Vector>& M,
                                                    const WeightMatrix& W, const BasisSpec& spec,
                                                    EmpiricalInstrumentOptions opts = {},
                                                    std::vector<std::string> names = {}) {
  spec.validate();
  const Index n = dX.rows(), K = dX.cols();
  detail::require(K >= 1, "empirical instruments need at least one covariate");
  detail::require(P.size() == n && M.size() == n && W.n() == n,
                  "empirical instruments: dimension mismatch");
  if (names.empty())
    for (Index c = 0; c < K; ++c) names.push_back("x" + std::to_string(c + 1));
  detail::require(static_cast<Index>(names.size()) == K, "covariate names do not match dX");

  const Matrix wx = spatial_lag(W, dX);
  std::vector<Vector> cols;
  std::vector<std::string> labels;
  auto add = [&](Vector v, std::string label) {
    cols.push_back(std::move(v));
    labels.push_back(std::move(label));
  };
  add(Vector::Ones(n), "const");
  for (Index c = 0; c < K; ++c) add(dX.col(c), names[c]);
  add(P, "P");
  add(M, "M");
  for (Index c = 0; c < K; ++c) add(wx.col(c), "W" + names[c]);
  if (opts.spatial_policy) {
    add(spatial_lag(W, P), "WP");
    add(spatial_lag(W, M), "WM");
  }
  if (opts.basis_on_spatial)
    for (int q = 1; q <= spec.p; ++q) {
      const int c = alternating_covariate(q, static_cast<int>(K));
      add(psi_column(q, wx.col(c), spec), "psi" + std::to_string(q) + "(W" + names[c] + ")");
    }

  Matrix z(n, static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) z.col(static_cast<Index>(j)) = cols[j];
  InstrumentMatrix out(std::move(z), std::move(labels));
  detail::require_admissible(out, spec.p, static_cast<int>(K) + 3);
  return out;
}

}  // namespace sarlin
