#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include "sarlin/sieve.hpp"

using namespace sarlin;
using Catch::Approx;

TEST_CASE("hermite recurrence", "[sieve]") {
  CHECK(hermite_eval(0, 3.7) == 1.0);
  CHECK(hermite_eval(1, -2.5) == -2.5);
  CHECK(hermite_eval(2, 1.5) == Approx(1.25).epsilon(1e-15));
  const double z = 0.7;
  CHECK(std::abs(hermite_eval(5, z) - (std::pow(z, 5) - 10 * std::pow(z, 3) + 15 * z)) <= 1e-10);
  CHECK_THROWS_AS(hermite_eval(kMaxHermiteDegree + 1, 1.0), PreconditionError);
  CHECK_THROWS_AS(hermite_eval(-1, 1.0), PreconditionError);
}

TEST_CASE("recurrence matches the closed form on a grid", "[sieve]") {
  for (int d = 0; d <= 8; ++d)
    for (double z = -3.0; z <= 3.0 + 1e-12; z += 0.25) {
      const double ref = oracle::hermite(d, z);
      const double got = hermite_eval(d, z);
      CHECK(std::abs(got - ref) <= 1e-9 * std::max(1.0, std::abs(ref)));
    }
}

TEST_CASE("psi indexing", "[sieve]") {
  BasisSpec s;
  s.p = 3;
  CHECK(psi(1, 2.0, s) == Approx(3.0));
  CHECK(psi(3, 0.0, s) == Approx(3.0));
  BasisSpec s0;
  s0.p = 1;
  s0.degree_offset = 0;
  CHECK(psi(1, 5.0, s0) == 5.0);
  CHECK_THROWS_AS(psi(0, 1.0, s), PreconditionError);
  CHECK_THROWS_AS(psi(4, 1.0, s), PreconditionError);

  BasisSpec st = s;
  st.standardize_argument = true;
  const ArgumentScaling sc{1.0, 2.0};
  CHECK(psi(1, 5.0, st, sc) == Approx(hermite_eval(2, 2.0)));
}

TEST_CASE("build_blocks layout", "[sieve]") {
  SECTION("zero W gives constant He_2(0) column") {
    BasisSpec s;
    s.p = 1;
    const Vector y = Vector::LinSpaced(5, -1, 1);
    const Matrix X = Matrix::Ones(5, 1);
    const RegressorBlocks b = build_blocks(y, X, WeightMatrix(SparseMatrix(5, 5)), s);
    CHECK(b.upsilon.col(0).isApprox(Vector::Constant(5, -1.0)));
    CHECK(b.wy.isZero(0.0));
  }
  SECTION("k=3, p=4 gives 8 columns with (Wy, X) last") {
    BasisSpec s;
    s.p = 4;
    Engine rng = make_stream(1, StreamTag::fixture);
    const Matrix X = oracle::gaussian(rng, 12, 3);
    const Vector y = oracle::gaussian(rng, 12, 1);
    const WeightMatrix W = gen_circulant(12);
    const RegressorBlocks b = build_blocks(y, X, W, s);
    REQUIRE(b.U.cols() == 8);
    CHECK(b.U.rightCols(3) == X);
    const Vector wy = oracle::naive_lag(W.dense(), y);
    CHECK((b.U.col(4) - wy).cwiseAbs().maxCoeff() <= 1e-14);
    for (int j = 1; j <= 4; ++j)
      for (Index i = 0; i < 12; ++i)
        CHECK(std::abs(b.U(i, j - 1) - oracle::hermite(j + 1, wy(i))) <= 1e-12 * std::max(1.0, std::abs(b.U(i, j - 1))));
    // pure: same inputs, same output
    CHECK(build_blocks(y, X, W, s).U == b.U);
  }
  SECTION("n=3 hand fixture") {
    BasisSpec s;
    s.p = 2;
    Matrix w = Matrix::Zero(3, 3);
    w(0, 1) = 1.0;
    w(1, 2) = 0.5;
    w(2, 0) = 0.25;
    const Vector y = (Vector(3) << 2.0, 4.0, -2.0).finished();
    // Wy = (4, -1, 0.5)
    const RegressorBlocks b = build_blocks(y, Matrix::Ones(3, 1), WeightMatrix::from_dense(w), s);
    const Vector wy = (Vector(3) << 4.0, -1.0, 0.5).finished();
    CHECK((b.wy - wy).cwiseAbs().maxCoeff() <= 1e-12);
    const Vector he2 = (Vector(3) << 15.0, 0.0, -0.75).finished();
    const Vector he3 = (Vector(3) << 52.0, 2.0, 0.125 - 1.5).finished();
    CHECK((b.U.col(0) - he2).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((b.U.col(1) - he3).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SECTION("offset one keeps Upsilon independent of Wy") {
    BasisSpec s;
    s.p = 5;
    Engine rng = make_stream(2, StreamTag::fixture);
    const WeightMatrix W = gen_circulant(60);
    const Vector y = oracle::gaussian(rng, 60, 1);
    const RegressorBlocks b = build_blocks(y, Matrix::Ones(60, 1), W, s);
    Eigen::ColPivHouseholderQR<Matrix> qr(b.U);
    CHECK(qr.rank() == b.U.cols());
  }
  SECTION("overflow is reported") {
    BasisSpec s;
    s.p = 40;
    const Vector y = Vector::Constant(4, 1e12);
    CHECK_THROWS_AS(build_blocks(y, Matrix::Ones(4, 1), gen_circulant(4), s), NumericalError);
  }
  SECTION("dimension mismatch") {
    BasisSpec s;
    CHECK_THROWS_AS(build_blocks(Vector::Ones(4), Matrix::Ones(3, 1), gen_circulant(4), s),
                    PreconditionError);
  }
}
