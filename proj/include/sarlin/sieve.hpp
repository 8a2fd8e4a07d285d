#pragma once

#include <cmath>
#include <string>

#include "sarlin/error.hpp"
#include "sarlin/weights.hpp"

namespace sarlin {

enum class BasisFamily { hermite_probabilists };

/// Sieve basis: psi_j(z) = He_{j + degree_offset}(z), j = 1..p.
///
/// With the default offset psi_1 is quadratic, so no basis column duplicates
/// the linear spatial lag already present in U. Any offset >= 1 spans the
/// same polynomial space {z^2, ..., z^{p+1}} modulo lower-order terms, so the
/// test statistic does not depend on the Hermite normalization; the
/// standardize flag only changes conditioning.
struct BasisSpec {
  int p = 1;
  BasisFamily family = BasisFamily::hermite_probabilists;
  int degree_offset = 1;
  bool standardize_argument = false;

  void validate() const {
    detail::require(p >= 1, "basis needs p >= 1");
    detail::require(degree_offset >= 0, "degree_offset must be non-negative");
  }
};

inline constexpr int kMaxHermiteDegree = 50;

/// Probabilists' Hermite polynomial He_degree(z) by the three-term recurrence.
inline double hermite_eval(int degree, double z) {
  if (degree < 0 || degree > kMaxHermiteDegree)
    throw PreconditionError("Hermite degree " + std::to_string(degree) + " outside [0, 50]");
  if (degree == 0) return 1.0;
  double prev = 1.0, cur = z;
  for (int m = 1; m < degree; ++m) {
    const double next = z * cur - m * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

// Affine map applied to the argument before evaluation when
// standardize_argument is set; identity otherwise.
struct ArgumentScaling {
  double center = 0.0;
  double scale = 1.0;

  static ArgumentScaling from_sample(const Eigen::Ref<const Vector>& v) {
    const double mean = v.mean();
    const double var = v.size() > 1 ? (v.array() - mean).square().sum() / (v.size() - 1) : 0.0;
    return {mean, var > 0.0 ? std::sqrt(var) : 1.0};
  }
};

inline double psi(int j, double z, const BasisSpec& spec, ArgumentScaling scaling = {}) {
  if (j < 1 || j > spec.p)
    throw PreconditionError("basis index " + std::to_string(j) + " outside 1.." +
                            std::to_string(spec.p));
  const double arg = spec.standardize_argument ? (z - scaling.center) / scaling.scale : z;
  return hermite_eval(j + spec.degree_offset, arg);
}

/// Evaluates psi_j elementwise over v; throws NumericalError on overflow.
inline Vector psi_column(int j, const Eigen::Ref<const Vector>& v, const BasisSpec& spec) {
  const ArgumentScaling scaling =
      spec.standardize_argument ? ArgumentScaling::from_sample(v) : ArgumentScaling{};
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) out(i) = psi(j, v(i), spec, scaling);
  if (!out.allFinite())
    throw NumericalError("basis function " + std::to_string(j) +
                         " produced non-finite values; consider standardize_argument");
  return out;
}

struct RegressorBlocks {
  Vector wy;        // W y
  Matrix upsilon;   // n x p, column j = psi_j(W y)
  Matrix U;         // n x (p + k + 1) = [upsilon, W y, X]
};

inline RegressorBlocks build_blocks(const Eigen::Ref<const Vector>& y,
                                    const Eigen::Ref<const Matrix>& X, const WeightMatrix& W,
                                    const BasisSpec& spec) {
  spec.validate();
  const Index n = y.size();
  detail::require(W.n() == n, "build_blocks: W dimension does not match y");
  detail::require(X.rows() == n, "build_blocks: X row count does not match y");

  RegressorBlocks b;
  b.wy = spatial_lag(W, y);
  b.upsilon.resize(n, spec.p);
  for (int j = 1; j <= spec.p; ++j) b.upsilon.col(j - 1) = psi_column(j, b.wy, spec);

  const Index k = X.cols();
  b.U.resize(n, spec.p + k + 1);
  b.U.leftCols(spec.p) = b.upsilon;
  b.U.col(spec.p) = b.wy;
  b.U.rightCols(k) = X;
  return b;
}

}  // namespace sarlin
