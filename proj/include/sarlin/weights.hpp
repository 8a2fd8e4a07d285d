#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sarlin/error.hpp"
#include "sarlin/rng.hpp"

namespace sarlin {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class Normalization { none, spectral, row, cutoff_scaled };
enum class Design { exponential, cutoff, circulant, random_contiguity, lattice, custom };

struct LatticeDims {
  int m1 = 0;
  int m2 = 0;
  Index n() const { return static_cast<Index>(m1) * m2; }
  friend bool operator==(const LatticeDims&, const LatticeDims&) = default;
};

inline std::string_view to_string(Design d) {
  switch (d) {
    case Design::exponential: return "exponential";
    case Design::cutoff: return "cutoff";
    case Design::circulant: return "circulant";
    case Design::random_contiguity: return "random_contiguity";
    case Design::lattice: return "lattice";
    case Design::custom: return "custom";
  }
  return "custom";
}

inline std::optional<Design> parse_design(std::string_view s) {
  for (Design d : {Design::exponential, Design::cutoff, Design::circulant,
                   Design::random_contiguity, Design::lattice, Design::custom})
    if (s == to_string(d)) return d;
  return std::nullopt;
}

inline std::string_view to_string(Normalization z) {
  switch (z) {
    case Normalization::none: return "none";
    case Normalization::spectral: return "spectral";
    case Normalization::row: return "row";
    case Normalization::cutoff_scaled: return "cutoff_scaled";
  }
  return "none";
}

/// Square spatial weight matrix with zero diagonal.
///
/// Values are stored sparse (row-major) and are immutable after
/// construction, so one instance may be shared freely between threads.
/// Generators record the design that produced the matrix and, where the
/// construction pins it, the spectral norm (`known_norm`) so downstream
/// code does not need to recompute it.
class WeightMatrix {
 public:
  WeightMatrix() = default;

  explicit WeightMatrix(SparseMatrix values, Design design = Design::custom,
                        Normalization normalization = Normalization::none,
                        std::optional<double> known_norm = std::nullopt,
                        std::optional<LatticeDims> lattice = std::nullopt)
      : values_(std::move(values)),
        design_(design),
        normalization_(normalization),
        known_norm_(known_norm),
        lattice_(lattice) {
    detail::require(values_.rows() == values_.cols(), "weight matrix must be square");
    values_.prune(0.0);
    values_.makeCompressed();
    for (Index i = 0; i < values_.outerSize(); ++i)
      for (SparseMatrix::InnerIterator it(values_, i); it; ++it) {
        detail::require(it.col() != i, "weight matrix must have a zero diagonal (row " +
                                           std::to_string(i + 1) + ")");
        detail::require(std::isfinite(it.value()), "weight matrix has a non-finite entry");
      }
    if (lattice_) detail::require(lattice_->n() == values_.rows(), "lattice dims do not match n");
  }

  static WeightMatrix from_dense(const Matrix& dense, Design design = Design::custom,
                                 Normalization normalization = Normalization::none) {
    return WeightMatrix(SparseMatrix(dense.sparseView()), design, normalization);
  }

  Index n() const { return values_.rows(); }
  Index nnz() const { return values_.nonZeros(); }
  const SparseMatrix& values() const { return values_; }
  Matrix dense() const { return Matrix(values_); }
  Design design() const { return design_; }
  Normalization normalization() const { return normalization_; }
  std::optional<double> known_norm() const { return known_norm_; }
  std::optional<LatticeDims> lattice() const { return lattice_; }
  bool is_zero() const { return values_.nonZeros() == 0; }
  double operator()(Index i, Index j) const { return values_.coeff(i, j); }

  bool is_symmetric(double tol = 0.0) const {
    const SparseMatrix t = values_.transpose();
    return (values_ - t).cwiseAbs().sum() <= tol;
  }

 private:
  SparseMatrix values_;
  Design design_ = Design::custom;
  Normalization normalization_ = Normalization::none;
  std::optional<double> known_norm_;
  std::optional<LatticeDims> lattice_;
};

namespace detail {

inline SparseMatrix from_triplets(Index n, const std::vector<Eigen::Triplet<double>>& trips) {
  SparseMatrix m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

}  // namespace detail

inline constexpr Index kDenseNormCutoff = 500;

// Largest singular value. Below kDenseNormCutoff a dense SVD is used;
// otherwise power iteration on W'W started from the ones vector, stopped
// when the eigen-residual falls below 1e-12 relative or after 10000 steps.
inline double spectral_norm(const SparseMatrix& w) {
  if (w.nonZeros() == 0) return 0.0;
  const Index n = w.rows();
  if (n < kDenseNormCutoff) {
    const Matrix dense(w);
    Eigen::BDCSVD<Matrix> svd(dense);
    return svd.singularValues()(0);
  }
  const SparseMatrix wt = w.transpose();
  Vector v = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
  double mu = 0.0;
  for (int it = 0; it < 10000; ++it) {
    const Vector u = w * v;
    const Vector z = wt * u;
    mu = v.dot(z);
    const double zn = z.norm();
    if (zn == 0.0) {
      // Start vector in the null space; restart from a basis vector.
      v.setZero();
      v((it + 1) % n) = 1.0;
      continue;
    }
    const double resid = (z - mu * v).norm();
    v = z / zn;
    if (resid <= 1e-12 * mu) break;
  }
  return std::sqrt(std::max(mu, 0.0));
}

inline double spectral_norm(const WeightMatrix& w) {
  if (auto k = w.known_norm()) return *k;
  return spectral_norm(w.values());
}

/// W / ||W||_2. Throws on the zero matrix.
/// Copy of `w` carrying its spectral norm, for repeated use.
inline WeightMatrix with_known_norm(const WeightMatrix& w) {
  if (w.known_norm()) return w;
  return WeightMatrix(w.values(), w.design(), w.normalization(), spectral_norm(w), w.lattice());
}

inline WeightMatrix spectral_normalize(const WeightMatrix& w) {
  if (w.is_zero()) throw PreconditionError("cannot spectrally normalize the zero matrix");
  const double s = spectral_norm(w.values());
  SparseMatrix v = w.values() / s;
  return WeightMatrix(std::move(v), w.design(), Normalization::spectral, 1.0, w.lattice());
}

/// Divides every nonzero row by its sum; zero rows stay zero.
inline WeightMatrix row_normalize(const WeightMatrix& w) {
  SparseMatrix v = w.values();
  for (Index i = 0; i < v.outerSize(); ++i) {
    double sum = 0.0;
    Index count = 0;
    for (SparseMatrix::InnerIterator it(v, i); it; ++it) {
      sum += it.value();
      ++count;
    }
    if (count == 0) continue;
    if (sum == 0.0)
      throw PreconditionError("row " + std::to_string(i + 1) + " is nonzero but sums to zero");
    for (SparseMatrix::InnerIterator it(v, i); it; ++it) it.valueRef() /= sum;
  }
  return WeightMatrix(std::move(v), w.design(), Normalization::row, std::nullopt, w.lattice());
}

/// Number of neighbours of unit i (0-based): card{j != i : w_ij != 0}.
inline Index degree(const WeightMatrix& w, Index i) {
  if (i < 0 || i >= w.n())
    throw PreconditionError("unit index " + std::to_string(i) + " out of range");
  Index d = 0;
  for (SparseMatrix::InnerIterator it(w.values(), i); it; ++it)
    if (it.col() != i && it.value() != 0.0) ++d;
  return d;
}

/// W v for a vector or each column of a matrix.
template <class Derived>
auto spatial_lag(const WeightMatrix& w, const Eigen::MatrixBase<Derived>& v) {
  if (v.rows() != w.n())
    throw PreconditionError("spatial_lag: argument has " + std::to_string(v.rows()) +
                            " rows, expected " + std::to_string(w.n()));
  return (w.values() * v.derived()).eval();
}

// ---------------------------------------------------------------------------
// Generators for the five simulation designs.
// ---------------------------------------------------------------------------

/// Exponential-distance weights from given locations, before normalization
/// is applied by gen_exponential. The cutoff uses the natural log of n.
inline SparseMatrix exponential_kernel(const std::vector<double>& loc) {
  const Index n = static_cast<Index>(loc.size());
  const double cut = std::log(static_cast<double>(n));
  std::vector<Eigen::Triplet<double>> trips;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dist = std::abs(loc[i] - loc[j]);
      if (dist < cut) trips.emplace_back(i, j, std::exp(-dist));
    }
  return detail::from_triplets(n, trips);
}

inline WeightMatrix exponential_from_locations(const std::vector<double>& loc) {
  detail::require(loc.size() >= 2, "exponential design needs n >= 2");
  WeightMatrix raw(exponential_kernel(loc), Design::exponential);
  if (raw.is_zero()) return raw;  // every pair beyond the cutoff; left unnormalized
  return spectral_normalize(raw);
}

/// Design 1. Locations are i.i.d. U[0, n]. A zero result (possible only for
/// tiny n) is returned unnormalized; check is_zero().
inline WeightMatrix gen_exponential(Index n, Engine& rng) {
  detail::require(n >= 2, "exponential design needs n >= 2");
  std::uniform_real_distribution<double> unif(0.0, static_cast<double>(n));
  std::vector<double> loc(static_cast<std::size_t>(n));
  for (auto& l : loc) l = unif(rng);
  return exponential_from_locations(loc);
}

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Design 2 from explicit draws: d(i,j) ~ U[-3,3], c(i,j) ~ U[0,1] for
/// ordered pairs; diagonals of d and c are ignored.
inline WeightMatrix cutoff_from_draws(const Matrix& d, const Matrix& c) {
  const Index n = d.rows();
  detail::require(n >= 2 && d.cols() == n && c.rows() == n && c.cols() == n,
                  "cutoff draws must be n x n with n >= 2");
  const double threshold = std::pow(static_cast<double>(n), -2.0 / 3.0);
  std::vector<Eigen::Triplet<double>> trips;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (i != j && c(i, j) < threshold) trips.emplace_back(i, j, std_normal_cdf(-d(i, j)));
  WeightMatrix raw(detail::from_triplets(n, trips), Design::cutoff);
  if (raw.is_zero()) return raw;
  const double s = 1.1 * spectral_norm(raw.values());
  return WeightMatrix(SparseMatrix(raw.values() / s), Design::cutoff,
                      Normalization::cutoff_scaled, 1.0 / 1.1);
}

/// Design 2: W = W* / (1.1 ||W*||). Draws are taken per ordered pair in
/// row-major order, d before c. If every indicator fails the zero matrix is
/// returned (is_zero()); the caller decides whether to redraw.
inline WeightMatrix gen_cutoff(Index n, Engine& rng) {
  detail::require(n >= 2, "cutoff design needs n >= 2");
  std::uniform_real_distribution<double> ud(-3.0, 3.0);
  std::uniform_real_distribution<double> uc(0.0, 1.0);
  Matrix d = Matrix::Zero(n, n), c = Matrix::Ones(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      d(i, j) = ud(rng);
      c(i, j) = uc(rng);
    }
  return cutoff_from_draws(d, c);
}

/// Design 3: W(i,i-1) = W(i,i+1) = 0.5 with wraparound.
inline WeightMatrix gen_circulant(Index n) {
  detail::require(n >= 3, "circulant design needs n >= 3");
  std::vector<Eigen::Triplet<double>> trips;
  for (Index i = 0; i < n; ++i) {
    trips.emplace_back(i, (i + n - 1) % n, 0.5);
    trips.emplace_back(i, (i + 1) % n, 0.5);
  }
  return spectral_normalize(WeightMatrix(detail::from_triplets(n, trips), Design::circulant));
}

/// Number of unordered pairs set to one by the random contiguity design:
/// half of floor(2 n^{6/5}), rounded down so the matrix stays symmetric.
inline Index contiguity_pairs(Index n) {
  const auto ones = static_cast<Index>(std::floor(2.0 * std::pow(static_cast<double>(n), 1.2)));
  return ones / 2;
}

/// Design 4: symmetric 0/1 matrix built from uniformly sampled distinct
/// unordered pairs, then spectrally normalized.
inline WeightMatrix gen_random_contiguity(Index n, Engine& rng) {
  detail::require(n >= 2, "random contiguity design needs n >= 2");
  const auto ones = static_cast<Index>(std::floor(2.0 * std::pow(static_cast<double>(n), 1.2)));
  detail::require(ones <= n * (n - 1), "random contiguity: requested ones exceed n(n-1)");
  const Index pairs = contiguity_pairs(n);
  const Index total = n * (n - 1) / 2;

  std::vector<Index> all(static_cast<std::size_t>(total));
  std::iota(all.begin(), all.end(), Index{0});
  std::vector<Index> chosen;
  chosen.reserve(static_cast<std::size_t>(pairs));
  std::sample(all.begin(), all.end(), std::back_inserter(chosen), pairs, rng);

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * chosen.size());
  // chosen is sorted; walk the upper triangle once to decode pair indices.
  Index row = 0, row_start = 0;
  for (Index idx : chosen) {
    while (idx >= row_start + (n - 1 - row)) {
      row_start += n - 1 - row;
      ++row;
    }
    const Index col = row + 1 + (idx - row_start);
    trips.emplace_back(row, col, 1.0);
    trips.emplace_back(col, row, 1.0);
  }
  return spectral_normalize(
      WeightMatrix(detail::from_triplets(n, trips), Design::random_contiguity));
}

/// Design 5: unit i = m2(k-1)+j (1-based) is linked to i-m2 when k >= 2 and
/// to i-1 when j >= 2. Strictly lower triangular.
inline WeightMatrix gen_lattice(int m1, int m2) {
  detail::require(m1 >= 2 && m2 >= 2, "lattice design needs m1, m2 >= 2");
  const LatticeDims dims{m1, m2};
  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 1; k <= m1; ++k)
    for (int j = 1; j <= m2; ++j) {
      const Index i = static_cast<Index>(m2) * (k - 1) + j - 1;  // 0-based
      if (k >= 2) trips.emplace_back(i, i - m2, 1.0);
      if (j >= 2) trips.emplace_back(i, i - 1, 1.0);
    }
  WeightMatrix raw(detail::from_triplets(dims.n(), trips), Design::lattice,
                   Normalization::none, std::nullopt, dims);
  return spectral_normalize(raw);
}

}  // namespace sarlin
