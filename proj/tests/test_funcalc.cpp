#include <doctest.h>

#include <cmath>
#include <complex>

#include <unsupported/Eigen/MatrixFunctions>

#include "ncrough/funcalc.hpp"
#include "test_support.hpp"

using namespace ncrough;
using testsupport::max_abs_diff;
using testsupport::random_element;
using testsupport::random_self_adjoint;

namespace {

const Complex kI{0.0, 1.0};

double tensor2_gap(const TensorElement2& a, const TensorElement2& b) {
  return max_abs_diff(flatten(a), flatten(b));
}

// Action of a rank-3 element squeezed by the same perturbation on both slots.
AlgebraElement squeeze(const TensorElement3& t, const AlgebraElement& y) {
  return sharp_apply(tri_sharp(y, t, Side::Left), y);
}

// Taylor coefficients of exp(i xi x) through the given order.
FunctionSpec taylor_exp(double xi, int order) {
  std::vector<Complex> coeffs(static_cast<std::size_t>(order) + 1);
  Complex c = 1.0;
  for (int k = 0; k <= order; ++k) {
    coeffs[static_cast<std::size_t>(k)] = c;
    c *= kI * xi / static_cast<double>(k + 1);
  }
  return FunctionSpec::polynomial(std::move(coeffs));
}

}  // namespace

TEST_SUITE("funcalc") {

TEST_CASE("scalar evaluation and derivatives match hand values") {
  const auto p = FunctionSpec::polynomial({1.0, 2.0, 0.0, 3.0});  // 1 + 2x + 3x^3
  CHECK(std::abs(evaluate_scalar(p, 2.0) - Complex(29.0)) < 1e-14);
  CHECK(std::abs(evaluate_scalar_derivative(p, 2.0) - Complex(38.0)) < 1e-13);

  const auto f = FunctionSpec::fourier({{1.5, Complex(2.0, 0.0)}});
  const Complex at = evaluate_scalar(f, 0.4);
  CHECK(std::abs(at - 2.0 * std::exp(kI * 0.6)) < 1e-14);
  CHECK(std::abs(evaluate_scalar_derivative(f, 0.4) - kI * 1.5 * at) < 1e-13);
}

TEST_CASE("polynomial bookkeeping: trimming, degree, monomial") {
  const auto p = FunctionSpec::polynomial({1.0, 2.0, 0.0, 0.0});
  CHECK(p.degree() == 1);
  CHECK(p.coeffs().size() == 2);
  CHECK(FunctionSpec::constant(5.0).degree() == 0);
  CHECK(FunctionSpec::identity().degree() == 1);

  const auto m = FunctionSpec::monomial(3, Complex(0.0, 2.0));
  REQUIRE(m.coeffs().size() == 4);
  CHECK(m.coeffs()[3] == Complex(0.0, 2.0));
  CHECK_THROWS_AS((void)FunctionSpec::monomial(-1), UsageError);

  const auto f = FunctionSpec::fourier({{1.0, 1.0}});
  CHECK_THROWS_AS((void)f.degree(), UsageError);
  CHECK_THROWS_AS((void)f.coeffs(), UsageError);
}

TEST_CASE("star conjugates values on the real line") {
  const auto p = FunctionSpec::polynomial({Complex(1.0, 2.0), Complex(0.0, -1.0)});
  const auto f = FunctionSpec::fourier({{0.7, Complex(1.0, 3.0)}, {-2.0, Complex(0.5, 0.0)}});
  for (double x : {-1.3, 0.0, 2.2}) {
    CHECK(std::abs(evaluate_scalar(star(p), x) - std::conj(evaluate_scalar(p, x))) < 1e-14);
    CHECK(std::abs(evaluate_scalar(star(f), x) - std::conj(evaluate_scalar(f, x))) < 1e-14);
  }

  // On a self-adjoint element, star of the function gives the adjoint element.
  const auto x = random_self_adjoint(5, 77);
  CHECK(max_abs_diff(apply_function(star(f), x), apply_function(f, x).adjoint()) < 1e-12);
}

TEST_CASE("weighted atom norms") {
  const auto f = FunctionSpec::fourier({{2.0, Complex(0.0, 3.0)}});
  CHECK(function_norm(f, 0) == doctest::Approx(3.0));
  CHECK(function_norm(f, 1) == doctest::Approx(6.0));
  CHECK(function_norm(f, 2) == doctest::Approx(12.0));
  const auto two = FunctionSpec::fourier({{2.0, 1.0}, {-1.0, Complex(0.0, 1.0)}});
  CHECK(function_norm(two, 2) == doctest::Approx(5.0));
  CHECK_THROWS_AS((void)function_norm(FunctionSpec::identity(), 1), UsageError);
  CHECK_THROWS_AS((void)function_norm(f, -1), UsageError);
}

TEST_CASE("json round trip and malformed input") {
  const auto p = FunctionSpec::polynomial({Complex(1.0, 0.0), Complex(0.25, -2.0)});
  const auto p2 = function_from_json(function_to_json(p));
  REQUIRE(p2.kind() == FunctionSpec::Kind::Polynomial);
  REQUIRE(p2.coeffs().size() == 2);
  CHECK(p2.coeffs()[0] == p.coeffs()[0]);
  CHECK(p2.coeffs()[1] == p.coeffs()[1]);

  const auto f = FunctionSpec::fourier({{1.5, Complex(2.0, -0.5)}, {-0.25, Complex(0.0, 1.0)}});
  const auto f2 = function_from_json(function_to_json(f));
  REQUIRE(f2.kind() == FunctionSpec::Kind::Fourier);
  REQUIRE(f2.atoms().size() == 2);
  CHECK(f2.atoms()[0].xi == f.atoms()[0].xi);
  CHECK(f2.atoms()[1].w == f.atoms()[1].w);

  CHECK_THROWS_AS((void)function_from_json(nlohmann::json::array()), UsageError);
  CHECK_THROWS_AS((void)function_from_json({{"kind", "spline"}}), UsageError);
  CHECK_THROWS_AS((void)function_from_json({{"kind", "poly"}}), UsageError);
  CHECK_THROWS_AS((void)function_from_json({{"kind", "fourier"}, {"atoms", {{1.0, 2.0}}}}),
                  UsageError);
}

TEST_CASE("gauss-legendre nodes integrate polynomials exactly") {
  const auto [x, w] = gauss_legendre(5);
  REQUIRE(x.size() == 5);
  double wsum = 0.0, x9 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    wsum += w[i];
    x9 += w[i] * std::pow(x[i], 9);
  }
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(x9 == doctest::Approx(0.1).epsilon(1e-13));  // degree 2n-1 = 9 is exact
  CHECK_THROWS_AS((void)gauss_legendre(0), UsageError);
}

TEST_CASE("applying functions to elements") {
  Matrix d = Matrix::Zero(3, 3);
  d.diagonal() << 1.0, 2.0, 3.0;
  const AlgebraElement x{Matrix(d)};

  const auto sq = apply_function(FunctionSpec::monomial(2), x);
  Matrix want = Matrix::Zero(3, 3);
  want.diagonal() << 1.0, 4.0, 9.0;
  CHECK(max_abs_diff(sq.matrix(), want) < 1e-14);

  CHECK(max_abs_diff(apply_function(FunctionSpec::identity(), x), x) < 1e-15);

  // Mixed polynomial on a random (non-normal) element against direct powers.
  const auto g = random_element(4, 5);
  const auto p = FunctionSpec::polynomial({1.0, -2.0, Complex(0.0, 1.0), 0.5});
  const Matrix gm = g.matrix();
  const Matrix direct = Matrix::Identity(4, 4) - 2.0 * gm + kI * (gm * gm) +
                        0.5 * (gm * gm * gm);
  CHECK(max_abs_diff(apply_function(p, g).matrix(), direct) < 1e-12);

  // A single unit-weight atom produces a unitary.
  const auto h = random_self_adjoint(6, 11);
  const auto u = apply_function(FunctionSpec::fourier({{1.3, 1.0}}), h);
  CHECK(max_abs_diff(Matrix(u.matrix() * u.matrix().adjoint()), Matrix(Matrix::Identity(6, 6))) <
        1e-12);

  // Atoms refuse a non-self-adjoint argument.
  CHECK_THROWS_AS((void)apply_function(FunctionSpec::fourier({{1.0, 1.0}}), g), UsageError);
}

TEST_CASE("atom calculus agrees with a truncated power series") {
  const auto h = 0.7 * random_self_adjoint(5, 21);  // keep the spectrum small
  const double xi = 0.9;
  const auto atom = FunctionSpec::fourier({{xi, Complex(0.4, 0.2)}});
  auto series = taylor_exp(xi, 14);
  {
    // scale the series weight to match the atom
    std::vector<Complex> c = series.coeffs();
    for (auto& a : c) a *= Complex(0.4, 0.2);
    series = FunctionSpec::polynomial(std::move(c));
  }
  CHECK(max_abs_diff(apply_function(atom, h), apply_function(series, h)) < 1e-9);
  CHECK(tensor2_gap(tensor_derivative(atom, h), tensor_derivative(series, h)) < 1e-8);
}

TEST_CASE("first tensor derivative of small polynomials is exact") {
  const auto x = random_element(4, 31);

  SUBCASE("x^2 gives 1(x)x + x(x)1") {
    const auto d = tensor_derivative(FunctionSpec::monomial(2), x);
    CHECK(d.config() == TensorConfig::Config2);
    CHECK(d.term_count() == 2);
    TensorElement2 want(d.space(), TensorConfig::Config2);
    want.add_term(AlgebraElement::identity(d.space()), x);
    want.add_term(x, AlgebraElement::identity(d.space()));
    CHECK(tensor2_gap(d, want) < 1e-15);
  }

  SUBCASE("constants differentiate to zero") {
    CHECK(tensor_derivative(FunctionSpec::constant(4.2), x).is_zero());
    CHECK(tensor_derivative(FunctionSpec::polynomial({}), x).is_zero());
  }

  SUBCASE("x^3 action is h x^2 + x h x + x^2 h") {
    const auto d = tensor_derivative(FunctionSpec::monomial(3), x);
    const auto h = random_element(4, 32);
    const Matrix xm = x.matrix(), hm = h.matrix();
    const Matrix want = hm * xm * xm + xm * hm * xm + xm * xm * hm;
    CHECK(max_abs_diff(sharp_apply(d, h).matrix(), want) < 1e-12);
  }
}

TEST_CASE("derivatives match finite differences of the matrix function") {
  const auto x = random_self_adjoint(5, 41);
  const auto y = random_self_adjoint(5, 42);
  const double eps = 1e-5;

  const auto check_fd = [&](const FunctionSpec& f, double tol) {
    const auto plus = apply_function(f, x + eps * y);
    const auto minus = apply_function(f, x - eps * y);
    const Matrix fd = (plus.matrix() - minus.matrix()) / (2.0 * eps);
    CHECK(max_abs_diff(sharp_apply(tensor_derivative(f, x), y).matrix(), fd) < tol);
  };
  check_fd(FunctionSpec::polynomial({0.0, 1.0, 2.0, -0.5, 0.25}), 1e-8);
  check_fd(FunctionSpec::fourier({{1.1, Complex(0.3, -0.6)}, {-0.4, 1.0}}), 1e-8);
}

TEST_CASE("frechet application cross-checks the tensor derivative") {
  const auto x = random_self_adjoint(6, 51);
  const auto y = random_element(6, 52);

  CHECK(max_abs_diff(frechet_sharp(FunctionSpec::identity(), x, y), y) < 1e-12);

  const Matrix want = x.matrix() * y.matrix() + y.matrix() * x.matrix();
  CHECK(max_abs_diff(frechet_sharp(FunctionSpec::monomial(2), x, y).matrix(), want) < 1e-12);

  // Divided differences and the quadrature representation are independent routes.
  const auto f = FunctionSpec::fourier({{0.8, Complex(1.0, 0.5)}, {-1.7, Complex(0.0, 2.0)}});
  CHECK(max_abs_diff(frechet_sharp(f, x, y), sharp_apply(tensor_derivative(f, x), y)) < 1e-10);

  CHECK_THROWS_AS((void)frechet_sharp(f, random_element(6, 53), y), UsageError);
}

TEST_CASE("frechet handles eigenvalue collisions") {
  Matrix d = Matrix::Zero(3, 3);
  d.diagonal() << 1.0, 1.0, 2.0;  // exact double eigenvalue
  const AlgebraElement x{Matrix(d)};
  const auto y = random_self_adjoint(3, 61);
  const auto f = FunctionSpec::fourier({{1.2, 1.0}});

  const double eps = 1e-5;
  const auto plus = apply_function(f, x + eps * y);
  const auto minus = apply_function(f, x - eps * y);
  const Matrix fd = (plus.matrix() - minus.matrix()) / (2.0 * eps);
  CHECK(max_abs_diff(frechet_sharp(f, x, y).matrix(), fd) < 1e-6);
}

TEST_CASE("second derivative of small polynomials is exact") {
  const auto x = random_element(4, 71);
  const auto y = random_element(4, 72);

  SUBCASE("x^2 yields the constant triple tensor") {
    const auto u = second_tensor_derivative(FunctionSpec::monomial(2), x);
    CHECK(u.term_count() == 1);
    CHECK(max_abs_diff(squeeze(u, y).matrix(), Matrix(y.matrix() * y.matrix())) < 1e-14);
  }

  SUBCASE("x^3 squeezed by y") {
    const auto u = second_tensor_derivative(FunctionSpec::monomial(3), x);
    CHECK(u.term_count() == 3);
    const Matrix xm = x.matrix(), ym = y.matrix();
    const Matrix want = xm * ym * ym + ym * xm * ym + ym * ym * xm;
    CHECK(max_abs_diff(squeeze(u, y).matrix(), want) < 1e-12);
  }

  SUBCASE("below quadratic there is nothing") {
    CHECK(second_tensor_derivative(FunctionSpec::identity(), x).is_zero());
    CHECK(second_tensor_derivative(FunctionSpec::constant(1.0), x).is_zero());
  }
}

TEST_CASE("second derivative matches second order differences") {
  const auto x = random_self_adjoint(4, 81);
  const auto y = random_self_adjoint(4, 82);
  const double eps = 1e-3;

  const auto check = [&](const FunctionSpec& f, double tol) {
    const auto plus = apply_function(f, x + eps * y);
    const auto mid = apply_function(f, x);
    const auto minus = apply_function(f, x - eps * y);
    const Matrix fd =
        (plus.matrix() - 2.0 * mid.matrix() + minus.matrix()) / (eps * eps);
    const auto u = second_tensor_derivative(f, x);
    CHECK(max_abs_diff(Matrix(2.0 * squeeze(u, y).matrix()), fd) < tol);
  };
  check(FunctionSpec::polynomial({0.0, 0.0, 1.0, 0.5, -0.25}), 1e-5);
  check(FunctionSpec::fourier({{1.3, Complex(0.5, 0.5)}, {-0.6, 1.0}}), 1e-5);
}

TEST_CASE("quadrature refinement is already converged at the default order") {
  const auto x = random_self_adjoint(4, 91);
  const auto f = FunctionSpec::fourier({{2.0, Complex(1.0, -1.0)}, {-3.1, 0.7}});

  DerivativeOptions coarse, fine;
  fine.quad_nodes = 2 * coarse.quad_nodes;
  CHECK(tensor2_gap(tensor_derivative(f, x, coarse), tensor_derivative(f, x, fine)) < 1e-9);

  coarse.simplex_nodes = 16;
  fine.simplex_nodes = 32;
  const auto y = random_self_adjoint(4, 92);
  const auto a = squeeze(second_tensor_derivative(f, x, coarse), y);
  const auto b = squeeze(second_tensor_derivative(f, x, fine), y);
  CHECK(max_abs_diff(a, b) < 1e-9);
}

TEST_CASE("derivative is lipschitz in the base point") {
  const auto f = FunctionSpec::fourier({{1.4, Complex(0.8, 0.3)}, {-2.2, Complex(0.0, 1.1)}});
  const auto x = random_self_adjoint(6, 101);
  const auto y = x + 0.05 * random_self_adjoint(6, 102);

  const auto diff = tensor_derivative(f, x) - tensor_derivative(f, y);
  const double lhs = spatial_norm(diff);
  const double rhs = function_norm(f, 2) * op_norm(x - y);
  CHECK(lhs <= 1.05 * rhs + 1e-9);
}

TEST_CASE("duhamel difference of exponentials") {
  const auto x = random_self_adjoint(5, 111);

  CHECK(op_norm(duhamel_diff(x, x)) < 1e-12);

  // Strictly upper triangular: exp(n) = 1 + n, so exp(n) - exp(0) = n.
  Matrix nil = Matrix::Zero(2, 2);
  nil(0, 1) = 3.0;
  const AlgebraElement n{Matrix(nil)};
  const auto z = AlgebraElement::zero(Space{2});
  CHECK(max_abs_diff(duhamel_diff(n, z).matrix(), nil) < 1e-12);

  // General pair against directly computed exponentials.
  const auto y = random_self_adjoint(5, 112);
  const Matrix want = x.matrix().exp() - y.matrix().exp();
  CHECK(max_abs_diff(duhamel_diff(x, y).matrix(), want) < 1e-10);
  CHECK_THROWS_AS((void)duhamel_diff(x, AlgebraElement::zero(Space{3})), UsageError);
}

}  // TEST_SUITE
