#pragma once

#include <utility>
#include <vector>

#include "ncrough/algebra.hpp"
#include "ncrough/tensors.hpp"

#include "json.hpp"

namespace ncrough {

// A scalar test function, either a polynomial with complex coefficients or a
// finite combination of oscillating atoms
//   f(x) = sum_k w_k exp(i xi_k x),
// the discrete version of a Fourier-representable function. Atoms require a
// self-adjoint argument; polynomials apply to anything.
struct FourierAtom {
  double xi = 0.0;
  Complex w = 0.0;
  bool operator==(const FourierAtom&) const = default;
};

class FunctionSpec {
 public:
  enum class Kind { Polynomial, Fourier };

  static FunctionSpec polynomial(std::vector<Complex> coeffs);
  static FunctionSpec fourier(std::vector<FourierAtom> atoms);
  static FunctionSpec constant(Complex c) { return polynomial({c}); }
  static FunctionSpec identity() { return polynomial({0.0, 1.0}); }
  static FunctionSpec monomial(int degree, Complex scale = 1.0);

  Kind kind() const { return kind_; }
  // Coefficients a_0..a_n for the polynomial kind (trailing zeros trimmed).
  const std::vector<Complex>& coeffs() const {
    if (kind_ != Kind::Polynomial) throw UsageError("coeffs: not a polynomial");
    return coeffs_;
  }
  const std::vector<FourierAtom>& atoms() const {
    if (kind_ != Kind::Fourier) throw UsageError("atoms: not an atom sum");
    return atoms_;
  }
  int degree() const;  // polynomial kind only

  // Structural equality: same kind and identical coefficient data.
  bool operator==(const FunctionSpec&) const = default;

 private:
  FunctionSpec() = default;
  Kind kind_ = Kind::Polynomial;
  std::vector<Complex> coeffs_;
  std::vector<FourierAtom> atoms_;
};

// f* with f*(X) = f(X)* on self-adjoint X: conjugate coefficients, and for
// atoms conjugate the weight and flip the frequency sign.
FunctionSpec star(const FunctionSpec& f);

// sum |w| |xi|^k over atoms; the summability norm of the atom measure.
// Polynomials are not members of these weighted classes, so they are refused.
double function_norm(const FunctionSpec& f, int k);

Complex evaluate_scalar(const FunctionSpec& f, Complex x);
Complex evaluate_scalar_derivative(const FunctionSpec& f, Complex x);

// JSON forms:
//   {"kind":"poly","coeffs":[1,[0,2],...]}      number or [re,im] per entry
//   {"kind":"fourier","atoms":[[xi,re,im],...]}
nlohmann::json function_to_json(const FunctionSpec& f);
FunctionSpec function_from_json(const nlohmann::json& j);

// Gauss-Legendre nodes and weights on [0,1], cached per order.
std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n);

struct DerivativeOptions {
  int quad_nodes = 32;     // alpha quadrature for atom derivatives
  int simplex_nodes = 32;  // per-axis nodes for the two-variable simplex rule
};

// f(X): Horner for polynomials; spectral calculus for atoms (self-adjoint X).
AlgebraElement apply_function(const FunctionSpec& f, const AlgebraElement& x);

// First tensor derivative as a nested-config rank-2 tensor:
//   polynomials   sum_k a_k sum_{i<k} X^i (x) X^{k-1-i}
//   atoms         i xi w int_0^1 exp(i a xi X) (x) exp(i (1-a) xi X) da
// so that d/de f(X + e Y) = tensor_derivative(f, X) # Y.
TensorElement2 tensor_derivative(const FunctionSpec& f, const AlgebraElement& x,
                                 const DerivativeOptions& opts = {});

// Second tensor derivative as a rank-3 tensor with
//   d^2/de^2 f(X + e Y) = 2 Y # UU # Y
// (contract left leg then right leg). Polynomials expand exactly; atoms
// integrate over the simplex a+b+c = 1 by a product rule collapsed through
// the substitution (a,b,c) = (1-s, s t, s (1-t)) with Jacobian s.
TensorElement3 second_tensor_derivative(const FunctionSpec& f, const AlgebraElement& x,
                                        const DerivativeOptions& opts = {});

// Independent directional-derivative oracle: eigendecompose X, apply first
// divided differences of f entrywise in the eigenbasis, rotate back. Falls
// back to f'(midpoint) for eigenvalue gaps below 1e-8.
AlgebraElement frechet_sharp(const FunctionSpec& f, const AlgebraElement& x,
                             const AlgebraElement& y);

// Quadrature of int_0^1 exp(a X) (X - Y) exp((1-a) Y) da, which telescopes
// to exp(X) - exp(Y).
AlgebraElement duhamel_diff(const AlgebraElement& x, const AlgebraElement& y,
                            int nodes = 32);

}  // namespace ncrough
