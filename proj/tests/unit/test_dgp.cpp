#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include "sarlin/dgp.hpp"

using namespace sarlin;
using Catch::Approx;

TEST_CASE("regressors", "[dgp]") {
  Engine a = make_stream(1, StreamTag::fixture), b = make_stream(1, StreamTag::fixture);
  const Matrix X = gen_X(100000, a);
  CHECK((X.col(0).array() == 1.0).all());
  CHECK(std::abs(X.col(1).mean()) <= 0.02);
  CHECK(X.col(1).cwiseAbs().maxCoeff() <= 2.0);
  CHECK(X.col(2).cwiseAbs().maxCoeff() <= 2.5);
  CHECK(X.col(2).cwiseAbs().maxCoeff() > 2.0);
  CHECK(gen_X(100000, b) == X);
  CHECK_THROWS_AS(gen_X(0, b), PreconditionError);
}

TEST_CASE("heteroskedasticity schemes", "[dgp]") {
  Engine rng = make_stream(2, StreamTag::fixture);
  SECTION("a: equal degrees give unit scale") {
    const Vector s = gen_sigma(HeteroScheme::a_degree, gen_circulant(30), Matrix(), rng);
    CHECK(s.isApprox(Vector::Ones(30), 1e-15));
  }
  SECTION("a: degree ratio on the lattice") {
    const WeightMatrix W = gen_lattice(3, 3);
    // degrees: corner 0, edges 1, interior 2; mean 12/9
    const Vector s = gen_sigma(HeteroScheme::a_degree, W, Matrix(), rng, IsolatedUnits::allow);
    CHECK(s(0) == 0.0);
    CHECK(s(1) == Approx(0.75));
    CHECK(s(4) == Approx(1.5));
    CHECK_THROWS_AS(gen_sigma(HeteroScheme::a_degree, W, Matrix(), rng), PreconditionError);
  }
  SECTION("b: chi-square(2) moments") {
    const Vector s = gen_sigma(HeteroScheme::b_chisq2, gen_circulant(100000), Matrix(), rng);
    CHECK((s.array() > 0.0).all());
    CHECK(s.array().square().mean() == Approx(2.0).margin(0.05));
  }
  SECTION("c: conditional on X") {
    Matrix X(2, 3);
    X << 1, 0, 2, 1, 3, 4;
    const Vector s = gen_sigma(HeteroScheme::c_conditional, gen_circulant(3), X, rng);
    CHECK(s(0) == 1.0);
    CHECK(s(1) == 2.5);
  }
}

TEST_CASE("error draws", "[dgp]") {
  Engine rng = make_stream(3, StreamTag::fixture);
  CHECK_THROWS_AS(gen_errors(ErrorFamily::gaussian, Vector::Zero(5), rng), PreconditionError);
  CHECK_THROWS_AS(gen_errors(ErrorFamily::gaussian, Vector::Constant(5, -1.0), rng),
                  PreconditionError);
  const Index n = 100000;
  const Vector g = gen_errors(ErrorFamily::gaussian, Vector::Constant(n, 2.0), rng);
  const double gm = g.mean();
  const double gv = (g.array() - gm).square().sum() / (n - 1);
  CHECK(gv == Approx(4.0).margin(0.1));

  const Vector t = gen_errors(ErrorFamily::student_t5, Vector::Ones(n), rng);
  const double tm = t.mean();
  const double m2 = (t.array() - tm).square().mean();
  const double m4 = (t.array() - tm).pow(4).mean();
  CHECK(m4 / (m2 * m2) > 3.0);
  // unscaled t5 has variance 5/3
  CHECK(m2 == Approx(5.0 / 3.0).margin(0.1));
}

TEST_CASE("null outcome", "[dgp]") {
  Engine rng = make_stream(4, StreamTag::fixture);
  const Vector beta = default_beta0();
  SECTION("W = 0 or lambda = 0") {
    const Matrix X = gen_X(10, rng);
    const Vector e = oracle::gaussian(rng, 10, 1);
    const Vector direct = X * beta + e;
    CHECK(gen_null_y(X, WeightMatrix(SparseMatrix(10, 10)), beta, 0.4, e) == direct);
    CHECK(gen_null_y(X, gen_circulant(10), beta, 0.0, e) == direct);
  }
  SECTION("circulant eigenvector") {
    const Matrix X = Matrix::Ones(4, 1);
    const Vector y = gen_null_y(X, gen_circulant(4), Vector::Ones(1), 0.4, Vector::Zero(4));
    CHECK((y - Vector::Constant(4, 1.0 / 0.6)).cwiseAbs().maxCoeff() <= 1e-14);
  }
  SECTION("residual identity") {
    for (std::uint64_t s : {1, 2, 3}) {
      Engine r = make_stream(s, StreamTag::weights);
      const WeightMatrix W = gen_random_contiguity(200, r);
      const Matrix X = gen_X(200, r);
      const Vector e = oracle::gaussian(r, 200, 1);
      const Vector y = gen_null_y(X, W, beta, 0.4, e);
      const Vector back = y - 0.4 * oracle::naive_lag(W.dense(), y) - X * beta;
      CHECK(oracle::rel(back, e) <= 1e-10);
    }
  }
  SECTION("singular system") {
    CHECK_THROWS_AS(gen_null_y(Matrix::Ones(4, 1), gen_circulant(4), Vector::Ones(1), 1.0,
                               Vector::Zero(4)),
                    NumericalError);
  }
}

TEST_CASE("lattice recursion", "[dgp]") {
  const Vector beta = default_beta0();
  SECTION("zero input is a fixed point") {
    for (Link l : {Link::arctan, Link::log_quadratic}) {
      const Vector y = gen_lattice_nonlinear_y(l, {5, 6}, Matrix::Zero(30, 3), beta, Vector::Zero(30));
      CHECK(y.isZero(0.0));
    }
  }
  SECTION("single cell") {
    Matrix X(1, 3);
    X << 1, 0.3, -0.7;
    const Vector e = Vector::Constant(1, 0.25);
    for (Link l : {Link::arctan, Link::log_quadratic})
      CHECK(gen_lattice_nonlinear_y(l, {1, 1}, X, beta, e)(0) == Approx(X.row(0).dot(beta) + 0.25));
  }
  SECTION("2x2 by hand") {
    Matrix X(4, 3);
    X << 1, 0.5, 1.0, 1, -1.0, 0.2, 1, 1.5, -0.5, 1, 0.0, 2.0;
    const Vector e = (Vector(4) << 0.1, -0.2, 0.3, -0.4).finished();
    const Vector xb = X * beta;
    auto f = [](double s) { return std::atan(s); };
    const double y11 = xb(0) + e(0);
    const double y12 = f(y11) + xb(1) + e(1);
    const double y21 = f(y11) + xb(2) + e(2);
    const double y22 = f(y12 + y21) + xb(3) + e(3);
    const Vector y = gen_lattice_nonlinear_y(Link::arctan, {2, 2}, X, beta, e);
    CHECK(std::abs(y(0) - y11) <= 1e-14);
    CHECK(std::abs(y(1) - y12) <= 1e-14);
    CHECK(std::abs(y(2) - y21) <= 1e-14);
    CHECK(std::abs(y(3) - y22) <= 1e-14);

    auto g = [](double s) { return std::log(1.0 + 0.25 * s * s); };
    const double z12 = g(y11) + xb(1) + e(1);
    const double z21 = g(y11) + xb(2) + e(2);
    const Vector z = gen_lattice_nonlinear_y(Link::log_quadratic, {2, 2}, X, beta, e);
    CHECK(std::abs(z(3) - (g(z12 + z21) + xb(3) + e(3))) <= 1e-14);
  }
  SECTION("locality") {
    Engine rng = make_stream(5, StreamTag::fixture);
    const LatticeDims d{6, 7};
    const Matrix X = gen_X(42, rng);
    const Vector e = oracle::gaussian(rng, 42, 1);
    const Vector y = gen_lattice_nonlinear_y(Link::log_quadratic, d, X, beta, e);
    const int pk = 2, pj = 3;  // perturbed cell, 0-based
    Vector e2 = e;
    e2(d.m2 * pk + pj) += 1.0;
    const Vector y2 = gen_lattice_nonlinear_y(Link::log_quadratic, d, X, beta, e2);
    for (int k = 0; k < d.m1; ++k)
      for (int j = 0; j < d.m2; ++j) {
        const Index i = d.m2 * k + j;
        if (k < pk || j < pj) CHECK(y2(i) == y(i));
        else CHECK(y2(i) != y(i));
      }
  }
  SECTION("null link rejected") {
    CHECK_THROWS_AS(gen_lattice_nonlinear_y(Link::null_linear, {2, 2}, Matrix::Ones(4, 3), beta,
                                            Vector::Zero(4)),
                    PreconditionError);
  }
}

TEST_CASE("config and dataset", "[dgp]") {
  DgpConfig cfg;
  cfg.link = Link::arctan;
  cfg.dims = Index{100};
  CHECK_THROWS_AS(cfg.validate(), PreconditionError);
  cfg.dims = LatticeDims{10, 10};
  cfg.seed = 7;
  const SarDataset a = generate_dataset(cfg), b = generate_dataset(cfg);
  CHECK(a.y == b.y);
  CHECK(a.X == b.X);
  CHECK(a.W.n() == 100);
  CHECK(a.sigma.size() == 100);
  cfg.seed = 8;
  CHECK(generate_dataset(cfg).y != a.y);

  CHECK(parse_family("t5") == ErrorFamily::student_t5);
  CHECK(parse_scheme("b") == HeteroScheme::b_chisq2);
  CHECK(parse_link("log") == Link::log_quadratic);
  CHECK_FALSE(parse_link("cubic").has_value());
}
