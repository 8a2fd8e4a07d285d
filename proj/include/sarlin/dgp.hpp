#pragma once

#include <Eigen/SparseLU>

#include <cmath>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>

#include "sarlin/error.hpp"
#include "sarlin/instruments.hpp"
#include "sarlin/rng.hpp"
#include "sarlin/weights.hpp"

namespace sarlin {

enum class ErrorFamily { gaussian, student_t5 };
enum class HeteroScheme { a_degree, b_chisq2, c_conditional };
enum class Link { null_linear, arctan, log_quadratic };

inline std::string_view to_string(ErrorFamily f) {
  return f == ErrorFamily::gaussian ? "gaussian" : "student_t5";
}
inline std::string_view to_string(HeteroScheme s) {
  switch (s) {
    case HeteroScheme::a_degree: return "a";
    case HeteroScheme::b_chisq2: return "b";
    case HeteroScheme::c_conditional: return "c";
  }
  return "a";
}
inline std::string_view to_string(Link l) {
  switch (l) {
    case Link::null_linear: return "null_linear";
    case Link::arctan: return "arctan";
    case Link::log_quadratic: return "log_quadratic";
  }
  return "null_linear";
}

inline std::optional<ErrorFamily> parse_family(std::string_view s) {
  if (s == "gaussian") return ErrorFamily::gaussian;
  if (s == "student_t5" || s == "t5") return ErrorFamily::student_t5;
  return std::nullopt;
}
inline std::optional<HeteroScheme> parse_scheme(std::string_view s) {
  if (s == "a" || s == "a_degree") return HeteroScheme::a_degree;
  if (s == "b" || s == "b_chisq2") return HeteroScheme::b_chisq2;
  if (s == "c" || s == "c_conditional") return HeteroScheme::c_conditional;
  return std::nullopt;
}
inline std::optional<Link> parse_link(std::string_view s) {
  if (s == "null_linear" || s == "null") return Link::null_linear;
  if (s == "arctan") return Link::arctan;
  if (s == "log_quadratic" || s == "log") return Link::log_quadratic;
  return std::nullopt;
}

inline Vector default_beta0() { return (Vector(3) << 0.5, -2.0, 1.0).finished(); }

struct DgpConfig {
  double lambda0 = 0.4;
  Vector beta0 = default_beta0();
  ErrorFamily family = ErrorFamily::gaussian;
  HeteroScheme scheme = HeteroScheme::a_degree;
  Link link = Link::null_linear;
  std::variant<Index, LatticeDims> dims = Index{100};
  std::uint64_t seed = 0;

  Index n() const {
    return std::holds_alternative<Index>(dims) ? std::get<Index>(dims)
                                               : std::get<LatticeDims>(dims).n();
  }

  void validate() const {
    detail::require(n() >= 1, "DgpConfig: n must be positive");
    detail::require(link == Link::null_linear || std::holds_alternative<LatticeDims>(dims),
                    "nonlinear links require lattice dimensions");
    detail::require(beta0.size() == 3, "DgpConfig: beta0 must have 3 entries for X = [1, x2, x3]");
  }
};

struct SarDataset {
  Vector y;
  Matrix X;
  WeightMatrix W;
  Vector sigma;
  std::optional<InstrumentMatrix> Z;
};

/// n x 3 regressors: ones, U[-2, 2], U[-2.5, 2.5], drawn row by row.
inline Matrix gen_X(Index n, Engine& rng) {
  detail::require(n >= 1, "gen_X: n must be positive");
  std::uniform_real_distribution<double> u2(-2.0, 2.0), u3(-2.5, 2.5);
  Matrix x(n, 3);
  for (Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = u2(rng);
    x(i, 2) = u3(rng);
  }
  return x;
}

enum class IsolatedUnits { reject, allow };

/// Scale parameters sigma_i.
///  a) d_i / mean(d), d_i the neighbour count under W.
///  b) sqrt of i.i.d. chi2(2) draws (consumes rng).
///  c) sqrt(x_i2^2 + x_i3^2) / 2.
/// Under a), a unit without neighbours gets sigma_i = 0, which is rejected
/// unless `isolated` is allow.
inline Vector gen_sigma(HeteroScheme scheme, const WeightMatrix& W,
                        const Eigen::Ref<const Matrix>& X, Engine& rng,
                        IsolatedUnits isolated = IsolatedUnits::reject) {
  switch (scheme) {
    case HeteroScheme::a_degree: {
      const Index n = W.n();
      Vector d(n);
      for (Index i = 0; i < n; ++i) d(i) = static_cast<double>(degree(W, i));
      const double mean = d.sum() / static_cast<double>(n);
      detail::require(mean > 0.0, "scheme a: W has no neighbours at all");
      if (isolated == IsolatedUnits::reject)
        for (Index i = 0; i < n; ++i)
          if (d(i) == 0.0)
            throw PreconditionError("scheme a: unit " + std::to_string(i + 1) +
                                    " has no neighbours, sigma would be zero");
      return d / mean;
    }
    case HeteroScheme::b_chisq2: {
      const Index n = X.rows() > 0 ? X.rows() : W.n();
      std::chi_squared_distribution<double> chi2(2.0);
      Vector s(n);
      for (Index i = 0; i < n; ++i) s(i) = std::sqrt(chi2(rng));
      return s;
    }
    case HeteroScheme::c_conditional: {
      detail::require(X.cols() >= 3, "scheme c needs X = [1, x2, x3]");
      return (X.col(1).array().square() + X.col(2).array().square()).sqrt().matrix() / 2.0;
    }
  }
  return {};
}

/// e_i = sigma_i * zeta_i, zeta i.i.d. N(0,1) or t(5) (not rescaled).
inline Vector gen_errors(ErrorFamily family, const Eigen::Ref<const Vector>& sigma, Engine& rng) {
  detail::require(sigma.allFinite() && (sigma.array() >= 0.0).all(),
                  "gen_errors: sigma must be finite and non-negative");
  detail::require((sigma.array() > 0.0).any(), "gen_errors: sigma is identically zero");
  Vector e(sigma.size());
  if (family == ErrorFamily::gaussian) {
    std::normal_distribution<double> z(0.0, 1.0);
    for (Index i = 0; i < e.size(); ++i) e(i) = sigma(i) * z(rng);
  } else {
    std::student_t_distribution<double> t(5.0);
    for (Index i = 0; i < e.size(); ++i) e(i) = sigma(i) * t(rng);
  }
  return e;
}

inline constexpr double kSingularGrowth = 1e12;

/// Sparse LU of (I - lambda W), reusable across replications with a fixed W.
class NullSolver {
 public:
  NullSolver(const WeightMatrix& W, double lambda0) : n_(W.n()) {
    Eigen::SparseMatrix<double> a(n_, n_);
    a.setIdentity();
    a -= lambda0 * Eigen::SparseMatrix<double>(W.values());
    a.makeCompressed();
    lu_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
    lu_->analyzePattern(a);
    lu_->factorize(a);
    if (lu_->info() != Eigen::Success)
      throw NumericalError("I - lambda W is singular: " + lu_->lastErrorMessage());
  }

  Vector solve(const Eigen::Ref<const Vector>& rhs) const {
    detail::require(rhs.size() == n_, "NullSolver: length mismatch");
    Vector y = lu_->solve(Vector(rhs));
    if (!y.allFinite()) throw NumericalError("I - lambda W solve produced non-finite values");
    // A near-zero pivot passes factorize() but blows the solution up.
    if (y.norm() > kSingularGrowth * rhs.norm())
      throw NumericalError("I - lambda W is numerically singular");
    return y;
  }

 private:
  Index n_;
  std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu_;
};

/// Solves (I - lambda0 W) y = X beta0 + eps.
inline Vector gen_null_y(const Eigen::Ref<const Matrix>& X, const WeightMatrix& W,
                         const Eigen::Ref<const Vector>& beta0, double lambda0,
                         const Eigen::Ref<const Vector>& eps) {
  detail::require(X.rows() == W.n() && eps.size() == W.n() && beta0.size() == X.cols(),
                  "gen_null_y: dimension mismatch");
  const Vector rhs = X * beta0 + eps;
  if (lambda0 == 0.0 || W.is_zero()) return rhs;
  return NullSolver(W, lambda0).solve(rhs);
}

inline double link_value(Link link, double s) {
  switch (link) {
    case Link::arctan: return std::atan(s);
    case Link::log_quadratic: return std::log1p(0.25 * s * s);
    case Link::null_linear: break;
  }
  throw PreconditionError("link_value: null_linear is not a lattice recursion link");
}

/// y_{k,j} = f(y_{k-1,j} + y_{k,j-1}) + x_{k,j}'beta + e_{k,j} with zero
/// boundary, filled row-major; unit i = m2(k-1)+j as in gen_lattice.
inline Vector gen_lattice_nonlinear_y(Link link, LatticeDims dims,
                                      const Eigen::Ref<const Matrix>& X,
                                      const Eigen::Ref<const Vector>& beta0,
                                      const Eigen::Ref<const Vector>& eps) {
  detail::require(link != Link::null_linear, "gen_lattice_nonlinear_y needs a nonlinear link");
  detail::require(dims.m1 >= 1 && dims.m2 >= 1, "lattice dims must be positive");
  const Index n = dims.n();
  detail::require(X.rows() == n && eps.size() == n && beta0.size() == X.cols(),
                  "gen_lattice_nonlinear_y: dimension mismatch");
  const Vector xb = X * beta0;
  Vector y(n);
  const Index m2 = dims.m2;
  for (Index k = 0; k < dims.m1; ++k)
    for (Index j = 0; j < m2; ++j) {
      const Index i = m2 * k + j;
      const double up = k > 0 ? y(i - m2) : 0.0;
      const double left = j > 0 ? y(i - 1) : 0.0;
      y(i) = link_value(link, up + left) + xb(i) + eps(i);
    }
  return y;
}

inline Vector gen_lattice_nonlinear_y(const DgpConfig& config, const Eigen::Ref<const Matrix>& X,
                                      const Eigen::Ref<const Vector>& eps) {
  config.validate();
  return gen_lattice_nonlinear_y(config.link, std::get<LatticeDims>(config.dims), X, config.beta0,
                                 eps);
}

/// One dataset from a config: X, sigma, e and y drawn from the config seed.
/// Nonlinear links use the lattice W of the config dims and ignore `W`
/// unless it is supplied with matching dimension.
inline SarDataset generate_dataset(const DgpConfig& config, std::optional<WeightMatrix> W = {}) {
  config.validate();
  Engine rng = make_stream(config.seed, StreamTag::dataset);
  SarDataset ds;
  if (W) {
    detail::require(W->n() == config.n(), "generate_dataset: W dimension mismatch");
    ds.W = *W;
  } else {
    detail::require(std::holds_alternative<LatticeDims>(config.dims),
                    "generate_dataset: supply W unless dims are a lattice");
    const auto dims = std::get<LatticeDims>(config.dims);
    ds.W = gen_lattice(dims.m1, dims.m2);
  }
  ds.X = gen_X(config.n(), rng);
  ds.sigma = gen_sigma(config.scheme, ds.W, ds.X, rng, IsolatedUnits::allow);
  const Vector eps = gen_errors(config.family, ds.sigma, rng);
  if (config.link == Link::null_linear)
    ds.y = gen_null_y(ds.X, ds.W, config.beta0, config.lambda0, eps);
  else
    ds.y = gen_lattice_nonlinear_y(config, ds.X, eps);
  return ds;
}

}  // namespace sarlin
