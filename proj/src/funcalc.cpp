#include "ncrough/funcalc.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include <unsupported/Eigen/MatrixFunctions>

namespace ncrough {

namespace {

constexpr double kEigGapFloor = 1e-8;  // below this, divided differences use f'

void require_poly(const FunctionSpec& f, const char* what) {
  if (f.kind() != FunctionSpec::Kind::Polynomial)
    throw UsageError(std::string(what) + ": polynomial function required");
}

void require_hermitian(const AlgebraElement& x, const char* what) {
  if (!x.is_self_adjoint(1e-10))
    throw UsageError(std::string(what) + ": self-adjoint argument required (defect " +
                     std::to_string(x.self_adjoint_defect()) + ")");
}

struct Spectral {
  Matrix v;
  Eigen::VectorXd lambda;

  explicit Spectral(const AlgebraElement& x) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(x.matrix());
    if (es.info() != Eigen::Success)
      throw NumericError("eigendecomposition failed");
    v = es.eigenvectors();
    lambda = es.eigenvalues();
  }

  // V diag(exp(i c lambda)) V*
  Matrix unitary_exp(double c) const {
    Eigen::VectorXcd d(lambda.size());
    for (Eigen::Index i = 0; i < lambda.size(); ++i)
      d(i) = std::exp(Complex(0.0, c * lambda(i)));
    return v * d.asDiagonal() * v.adjoint();
  }
};

}  // namespace

FunctionSpec FunctionSpec::polynomial(std::vector<Complex> coeffs) {
  while (!coeffs.empty() && std::abs(coeffs.back()) == 0.0) coeffs.pop_back();
  FunctionSpec f;
  f.kind_ = Kind::Polynomial;
  f.coeffs_ = std::move(coeffs);
  return f;
}

FunctionSpec FunctionSpec::fourier(std::vector<FourierAtom> atoms) {
  FunctionSpec f;
  f.kind_ = Kind::Fourier;
  f.atoms_ = std::move(atoms);
  return f;
}

FunctionSpec FunctionSpec::monomial(int degree, Complex scale) {
  if (degree < 0) throw UsageError("monomial: degree must be nonnegative");
  std::vector<Complex> c(static_cast<std::size_t>(degree) + 1, 0.0);
  c.back() = scale;
  return polynomial(std::move(c));
}

int FunctionSpec::degree() const {
  require_poly(*this, "degree");
  return static_cast<int>(coeffs_.size()) - 1;
}

FunctionSpec star(const FunctionSpec& f) {
  if (f.kind() == FunctionSpec::Kind::Polynomial) {
    std::vector<Complex> c;
    c.reserve(f.coeffs().size());
    for (Complex a : f.coeffs()) c.push_back(std::conj(a));
    return FunctionSpec::polynomial(std::move(c));
  }
  std::vector<FourierAtom> atoms;
  atoms.reserve(f.atoms().size());
  for (const FourierAtom& a : f.atoms())
    atoms.push_back(FourierAtom{-a.xi, std::conj(a.w)});
  return FunctionSpec::fourier(std::move(atoms));
}

double function_norm(const FunctionSpec& f, int k) {
  if (k < 0) throw UsageError("function_norm: order must be nonnegative");
  if (f.kind() != FunctionSpec::Kind::Fourier)
    throw UsageError("function_norm: defined for the atom class only");
  double sum = 0.0;
  for (const FourierAtom& a : f.atoms())
    sum += std::abs(a.w) * std::pow(std::abs(a.xi), k);
  return sum;
}

Complex evaluate_scalar(const FunctionSpec& f, Complex x) {
  if (f.kind() == FunctionSpec::Kind::Polynomial) {
    Complex acc = 0.0;
    for (auto it = f.coeffs().rbegin(); it != f.coeffs().rend(); ++it) acc = acc * x + *it;
    return acc;
  }
  Complex acc = 0.0;
  for (const FourierAtom& a : f.atoms()) acc += a.w * std::exp(Complex(0.0, 1.0) * a.xi * x);
  return acc;
}

Complex evaluate_scalar_derivative(const FunctionSpec& f, Complex x) {
  if (f.kind() == FunctionSpec::Kind::Polynomial) {
    Complex acc = 0.0;
    for (std::size_t k = f.coeffs().size(); k-- > 1;)
      acc = acc * x + static_cast<double>(k) * f.coeffs()[k];
    return acc;
  }
  Complex acc = 0.0;
  for (const FourierAtom& a : f.atoms())
    acc += a.w * Complex(0.0, a.xi) * std::exp(Complex(0.0, 1.0) * a.xi * x);
  return acc;
}

nlohmann::json function_to_json(const FunctionSpec& f) {
  nlohmann::json j;
  if (f.kind() == FunctionSpec::Kind::Polynomial) {
    j["kind"] = "poly";
    nlohmann::json coeffs = nlohmann::json::array();
    for (Complex c : f.coeffs()) {
      if (c.imag() == 0.0)
        coeffs.push_back(c.real());
      else
        coeffs.push_back(nlohmann::json::array({c.real(), c.imag()}));
    }
    j["coeffs"] = std::move(coeffs);
  } else {
    j["kind"] = "fourier";
    nlohmann::json atoms = nlohmann::json::array();
    for (const FourierAtom& a : f.atoms())
      atoms.push_back(nlohmann::json::array({a.xi, a.w.real(), a.w.imag()}));
    j["atoms"] = std::move(atoms);
  }
  return j;
}

namespace {

Complex complex_from_json(const nlohmann::json& v, const char* what) {
  if (v.is_number()) return Complex(v.get<double>(), 0.0);
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return Complex(v[0].get<double>(), v[1].get<double>());
  throw UsageError(std::string(what) + ": expected a number or [re, im] pair");
}

}  // namespace

FunctionSpec function_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    throw UsageError("function spec: expected an object with a \"kind\" string");
  const std::string kind = j["kind"].get<std::string>();
  if (kind == "poly") {
    if (!j.contains("coeffs") || !j["coeffs"].is_array())
      throw UsageError("function spec: \"poly\" needs a \"coeffs\" array");
    std::vector<Complex> coeffs;
    for (const auto& v : j["coeffs"]) coeffs.push_back(complex_from_json(v, "coeffs"));
    return FunctionSpec::polynomial(std::move(coeffs));
  }
  if (kind == "fourier") {
    if (!j.contains("atoms") || !j["atoms"].is_array())
      throw UsageError("function spec: \"fourier\" needs an \"atoms\" array");
    std::vector<FourierAtom> atoms;
    for (const auto& v : j["atoms"]) {
      if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() ||
          !v[2].is_number())
        throw UsageError("function spec: each atom is [xi, re, im]");
      atoms.push_back(FourierAtom{v[0].get<double>(),
                                  Complex(v[1].get<double>(), v[2].get<double>())});
    }
    return FunctionSpec::fourier(std::move(atoms));
  }
  throw UsageError("function spec: unknown kind \"" + kind + "\"");
}

std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
  if (n < 1 || n > 512) throw UsageError("gauss_legendre: order must be in [1, 512]");
  static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  // Golub-Welsch on the Legendre Jacobi matrix, then map [-1,1] to [0,1].
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    jac(k - 1, k) = jac(k, k - 1) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  std::vector<double> nodes(static_cast<std::size_t>(n)), weights(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    nodes[static_cast<std::size_t>(i)] = 0.5 * (es.eigenvalues()(i) + 1.0);
    const double v0 = es.eigenvectors()(0, i);
    weights[static_cast<std::size_t>(i)] = v0 * v0;  // 2 v0^2 on [-1,1], halved by the map
  }
  cache[n] = {nodes, weights};
  return cache[n];
}

AlgebraElement apply_function(const FunctionSpec& f, const AlgebraElement& x) {
  const int n = x.dim();
  if (n == 0) throw UsageError("apply_function: empty element");
  if (f.kind() == FunctionSpec::Kind::Polynomial) {
    Matrix acc = Matrix::Zero(n, n);
    for (auto it = f.coeffs().rbegin(); it != f.coeffs().rend(); ++it) {
      if (it != f.coeffs().rbegin()) acc = acc * x.matrix();
      acc += *it * Matrix::Identity(n, n);
    }
    return AlgebraElement(std::move(acc));
  }
  require_hermitian(x, "apply_function");
  const Spectral spec(x);
  Eigen::VectorXcd d = Eigen::VectorXcd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i)
    d(i) = evaluate_scalar(f, Complex(spec.lambda(i), 0.0));
  return AlgebraElement(spec.v * d.asDiagonal() * spec.v.adjoint());
}

TensorElement2 tensor_derivative(const FunctionSpec& f, const AlgebraElement& x,
                                 const DerivativeOptions& opts) {
  const Space s{x.dim()};
  TensorElement2 out(s, TensorConfig::Config2);
  if (f.kind() == FunctionSpec::Kind::Polynomial) {
    const int deg = f.degree();
    if (deg < 1) return out;
    std::vector<Matrix> pow(static_cast<std::size_t>(deg));
    pow[0] = Matrix::Identity(x.dim(), x.dim());
    for (int i = 1; i < deg; ++i) pow[static_cast<std::size_t>(i)] = pow[static_cast<std::size_t>(i - 1)] * x.matrix();
    for (int k = 1; k <= deg; ++k) {
      const Complex a = f.coeffs()[static_cast<std::size_t>(k)];
      if (std::abs(a) == 0.0) continue;
      for (int i = 0; i < k; ++i)
        out.add_term(AlgebraElement(Matrix(a * pow[static_cast<std::size_t>(i)])),
                     AlgebraElement(pow[static_cast<std::size_t>(k - 1 - i)]));
    }
    return out;
  }
  require_hermitian(x, "tensor_derivative");
  const Spectral spec(x);
  const auto [nodes, weights] = gauss_legendre(opts.quad_nodes);
  for (const FourierAtom& atom : f.atoms()) {
    if (std::abs(atom.w) == 0.0) continue;
    for (std::size_t m = 0; m < nodes.size(); ++m) {
      const Complex scale = Complex(0.0, atom.xi) * atom.w * weights[m];
      out.add_term(AlgebraElement(Matrix(scale * spec.unitary_exp(nodes[m] * atom.xi))),
                   AlgebraElement(spec.unitary_exp((1.0 - nodes[m]) * atom.xi)));
    }
  }
  return out;
}

TensorElement3 second_tensor_derivative(const FunctionSpec& f, const AlgebraElement& x,
                                        const DerivativeOptions& opts) {
  const Space s{x.dim()};
  TensorElement3 out(s, TensorConfig::Config2);
  if (f.kind() == FunctionSpec::Kind::Polynomial) {
    const int deg = f.degree();
    if (deg < 2) return out;
    std::vector<Matrix> pow(static_cast<std::size_t>(deg - 1));
    pow[0] = Matrix::Identity(x.dim(), x.dim());
    for (int i = 1; i + 1 < deg; ++i) pow[static_cast<std::size_t>(i)] = pow[static_cast<std::size_t>(i - 1)] * x.matrix();
    for (int k = 2; k <= deg; ++k) {
      const Complex a = f.coeffs()[static_cast<std::size_t>(k)];
      if (std::abs(a) == 0.0) continue;
      for (int i = 0; i + 2 <= k; ++i)
        for (int j = 0; i + j + 2 <= k; ++j)
          out.add_term(AlgebraElement(Matrix(a * pow[static_cast<std::size_t>(i)])),
                       AlgebraElement(pow[static_cast<std::size_t>(j)]),
                       AlgebraElement(pow[static_cast<std::size_t>(k - 2 - i - j)]));
    }
    return out;
  }
  require_hermitian(x, "second_tensor_derivative");
  const Spectral spec(x);
  const auto [nodes, weights] = gauss_legendre(opts.simplex_nodes);
  for (const FourierAtom& atom : f.atoms()) {
    if (std::abs(atom.w) == 0.0) continue;
    const Complex base = Complex(0.0, atom.xi) * Complex(0.0, atom.xi) * atom.w;
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      const double sn = nodes[a];
      // Precompute the shared first leg for this s node.
      const Matrix leg1 = spec.unitary_exp((1.0 - sn) * atom.xi);
      for (std::size_t b = 0; b < nodes.size(); ++b) {
        const double tn = nodes[b];
        const Complex scale = base * sn * weights[a] * weights[b];
        out.add_term(AlgebraElement(Matrix(scale * leg1)),
                     AlgebraElement(spec.unitary_exp(sn * tn * atom.xi)),
                     AlgebraElement(spec.unitary_exp(sn * (1.0 - tn) * atom.xi)));
      }
    }
  }
  return out;
}

AlgebraElement frechet_sharp(const FunctionSpec& f, const AlgebraElement& x,
                             const AlgebraElement& y) {
  require_hermitian(x, "frechet_sharp");
  if (x.dim() != y.dim()) throw UsageError("frechet_sharp: dimension mismatch");
  const Spectral spec(x);
  const Matrix b = spec.v.adjoint() * y.matrix() * spec.v;
  Matrix c(x.dim(), x.dim());
  for (int i = 0; i < x.dim(); ++i)
    for (int j = 0; j < x.dim(); ++j) {
      const double li = spec.lambda(i), lj = spec.lambda(j);
      Complex dd;
      if (std::abs(li - lj) < kEigGapFloor)
        dd = evaluate_scalar_derivative(f, Complex(0.5 * (li + lj), 0.0));
      else
        dd = (evaluate_scalar(f, Complex(li, 0.0)) - evaluate_scalar(f, Complex(lj, 0.0))) /
             Complex(li - lj, 0.0);
      c(i, j) = dd * b(i, j);
    }
  return AlgebraElement(spec.v * c * spec.v.adjoint());
}

AlgebraElement duhamel_diff(const AlgebraElement& x, const AlgebraElement& y, int nodes) {
  if (x.dim() != y.dim()) throw UsageError("duhamel_diff: dimension mismatch");
  const auto [pts, wts] = gauss_legendre(nodes);
  const Matrix diff = x.matrix() - y.matrix();
  Matrix acc = Matrix::Zero(x.dim(), x.dim());
  for (std::size_t m = 0; m < pts.size(); ++m) {
    const Matrix ex = (pts[m] * x.matrix()).exp();
    const Matrix ey = ((1.0 - pts[m]) * y.matrix()).exp();
    acc += wts[m] * (ex * diff * ey);
  }
  return AlgebraElement(std::move(acc));
}

}  // namespace ncrough
