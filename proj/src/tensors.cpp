#include "ncrough/tensors.hpp"

#include <bit>
#include <cmath>
#include <functional>
#include <utility>

#include <Eigen/QR>
#include <Eigen/SVD>
#include <unsupported/Eigen/KroneckerProduct>

namespace ncrough {

namespace {

void require_dim(const Space& space, const AlgebraElement& a, const char* what) {
  if (a.dim() != space.dim)
    throw UsageError(std::string(what) + ": factor dimension " + std::to_string(a.dim()) +
                     " does not match tensor space dimension " + std::to_string(space.dim));
}

void require_compatible(const TensorElement2& a, const TensorElement2& b, const char* what) {
  if (a.config() != b.config())
    throw UsageError(std::string(what) + ": configuration mismatch");
  if (a.dim() != b.dim())
    throw UsageError(std::string(what) + ": space mismatch (" + std::to_string(a.dim()) +
                     " vs " + std::to_string(b.dim()) + ")");
}

std::uint64_t fold_matrix(std::uint64_t h, const Matrix& m) {
  const Complex* d = m.data();
  const std::ptrdiff_t n = m.size();
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    h = hash_mix64(h ^ std::bit_cast<std::uint64_t>(d[i].real()));
    h = hash_mix64(h ^ std::bit_cast<std::uint64_t>(d[i].imag()));
  }
  return h;
}

}  // namespace

TensorElement2::TensorElement2(Space space, TensorConfig config)
    : space_(space), config_(config) {}

TensorElement2::TensorElement2(Space space, TensorConfig config,
                               std::vector<TensorTerm2> terms)
    : space_(space), config_(config), terms_(std::move(terms)) {
  for (const auto& t : terms_) {
    require_dim(space_, t.u, "TensorElement2");
    require_dim(space_, t.v, "TensorElement2");
  }
}

TensorElement2 TensorElement2::pure(const AlgebraElement& u, const AlgebraElement& v,
                                    TensorConfig config) {
  return TensorElement2(Space{u.dim()}, config, {TensorTerm2{u, v}});
}

TensorElement2 TensorElement2::identity(Space space, TensorConfig config) {
  return pure(AlgebraElement::identity(space), AlgebraElement::identity(space), config);
}

void TensorElement2::add_term(const AlgebraElement& u, const AlgebraElement& v) {
  require_dim(space_, u, "add_term");
  require_dim(space_, v, "add_term");
  terms_.push_back(TensorTerm2{u, v});
  fp_valid_ = false;
}

TensorElement2& TensorElement2::operator+=(const TensorElement2& other) {
  require_compatible(*this, other, "tensor sum");
  terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
  fp_valid_ = false;
  return *this;
}

TensorElement2& TensorElement2::operator-=(const TensorElement2& other) {
  require_compatible(*this, other, "tensor difference");
  for (const auto& t : other.terms_)
    terms_.push_back(TensorTerm2{Complex(-1.0) * t.u, t.v});
  fp_valid_ = false;
  return *this;
}

TensorElement2& TensorElement2::operator*=(Complex c) {
  for (auto& t : terms_) t.u *= c;
  fp_valid_ = false;
  return *this;
}

std::uint64_t TensorElement2::fingerprint() const {
  if (fp_valid_) return fp_;
  std::uint64_t h = 0x243f6a8885a308d3ULL ^ (config_ == TensorConfig::Config1 ? 1u : 2u);
  h = hash_mix64(h ^ static_cast<std::uint64_t>(space_.dim));
  h = hash_mix64(h ^ terms_.size());
  for (const auto& t : terms_) {
    h = fold_matrix(h, t.u.matrix());
    h = fold_matrix(h, t.v.matrix());
  }
  fp_ = h;
  fp_valid_ = true;
  return fp_;
}

TensorElement3::TensorElement3(Space space, TensorConfig config)
    : space_(space), config_(config) {}

TensorElement3::TensorElement3(Space space, TensorConfig config,
                               std::vector<TensorTerm3> terms)
    : space_(space), config_(config), terms_(std::move(terms)) {
  for (const auto& t : terms_) {
    require_dim(space_, t.u, "TensorElement3");
    require_dim(space_, t.v, "TensorElement3");
    require_dim(space_, t.w, "TensorElement3");
  }
}

TensorElement3 TensorElement3::pure(const AlgebraElement& u, const AlgebraElement& v,
                                    const AlgebraElement& w, TensorConfig config) {
  return TensorElement3(Space{u.dim()}, config, {TensorTerm3{u, v, w}});
}

void TensorElement3::add_term(const AlgebraElement& u, const AlgebraElement& v,
                              const AlgebraElement& w) {
  require_dim(space_, u, "add_term");
  require_dim(space_, v, "add_term");
  require_dim(space_, w, "add_term");
  terms_.push_back(TensorTerm3{u, v, w});
  fp_valid_ = false;
}

TensorElement3& TensorElement3::operator+=(const TensorElement3& other) {
  if (config_ != other.config_) throw UsageError("tensor sum: configuration mismatch");
  if (space_.dim != other.space_.dim) throw UsageError("tensor sum: space mismatch");
  terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
  fp_valid_ = false;
  return *this;
}

TensorElement3& TensorElement3::operator-=(const TensorElement3& other) {
  if (config_ != other.config_) throw UsageError("tensor difference: configuration mismatch");
  if (space_.dim != other.space_.dim) throw UsageError("tensor difference: space mismatch");
  for (const auto& t : other.terms_)
    terms_.push_back(TensorTerm3{Complex(-1.0) * t.u, t.v, t.w});
  fp_valid_ = false;
  return *this;
}

TensorElement3& TensorElement3::operator*=(Complex c) {
  for (auto& t : terms_) t.u *= c;
  fp_valid_ = false;
  return *this;
}

std::uint64_t TensorElement3::fingerprint() const {
  if (fp_valid_) return fp_;
  std::uint64_t h = 0x452821e638d01377ULL ^ (config_ == TensorConfig::Config1 ? 1u : 2u);
  h = hash_mix64(h ^ static_cast<std::uint64_t>(space_.dim));
  h = hash_mix64(h ^ terms_.size());
  for (const auto& t : terms_) {
    h = fold_matrix(h, t.u.matrix());
    h = fold_matrix(h, t.v.matrix());
    h = fold_matrix(h, t.w.matrix());
  }
  fp_ = h;
  fp_valid_ = true;
  return fp_;
}

TensorElement2 operator+(TensorElement2 a, const TensorElement2& b) { return a += b; }
TensorElement2 operator-(TensorElement2 a, const TensorElement2& b) { return a -= b; }
TensorElement2 operator*(Complex c, TensorElement2 a) { return a *= c; }
TensorElement2 operator*(TensorElement2 a, Complex c) { return a *= c; }
TensorElement3 operator+(TensorElement3 a, const TensorElement3& b) { return a += b; }
TensorElement3 operator-(TensorElement3 a, const TensorElement3& b) { return a -= b; }
TensorElement3 operator*(Complex c, TensorElement3 a) { return a *= c; }

TensorElement2 tensor_mul(const TensorElement2& a, const TensorElement2& b) {
  require_compatible(a, b, "tensor_mul");
  const std::size_t count = a.term_count() * b.term_count();
  if (count > kTensorTermBudget)
    throw SizeError("tensor_mul: product would have " + std::to_string(count) +
                    " terms (budget " + std::to_string(kTensorTermBudget) +
                    "); compress the factors first");
  std::vector<TensorTerm2> out;
  out.reserve(count);
  for (const auto& s : a.terms()) {
    for (const auto& t : b.terms()) {
      if (a.config() == TensorConfig::Config1)
        out.push_back(TensorTerm2{s.u * t.u, s.v * t.v});
      else
        out.push_back(TensorTerm2{s.u * t.u, t.v * s.v});
    }
  }
  return TensorElement2(a.space(), a.config(), std::move(out));
}

TensorElement2 tensor_adjoint(const TensorElement2& a) {
  std::vector<TensorTerm2> out;
  out.reserve(a.term_count());
  for (const auto& t : a.terms()) {
    if (a.config() == TensorConfig::Config1)
      out.push_back(TensorTerm2{t.u.adjoint(), t.v.adjoint()});
    else
      out.push_back(TensorTerm2{t.v.adjoint(), t.u.adjoint()});
  }
  return TensorElement2(a.space(), a.config(), std::move(out));
}

AlgebraElement sharp_apply(const TensorElement2& u, const AlgebraElement& x) {
  require_dim(u.space(), x, "sharp_apply");
  Matrix acc = Matrix::Zero(u.dim(), u.dim());
  for (const auto& t : u.terms()) acc += t.u.matrix() * x.matrix() * t.v.matrix();
  return AlgebraElement(std::move(acc));
}

TensorElement2 tri_sharp(const AlgebraElement& x, const TensorElement3& t, Side side) {
  require_dim(t.space(), x, "tri_sharp");
  std::vector<TensorTerm2> out;
  out.reserve(t.term_count());
  for (const auto& term : t.terms()) {
    if (side == Side::Left)
      out.push_back(TensorTerm2{
          AlgebraElement(term.u.matrix() * x.matrix() * term.v.matrix()), term.w});
    else
      out.push_back(TensorTerm2{
          term.u, AlgebraElement(term.v.matrix() * x.matrix() * term.w.matrix())});
  }
  return TensorElement2(t.space(), t.config(), std::move(out));
}

AlgebraElement partial_trace(const TensorElement2& u, Side side) {
  Matrix acc = Matrix::Zero(u.dim(), u.dim());
  for (const auto& t : u.terms()) {
    if (side == Side::Left)
      acc += normalized_trace(t.u) * t.v.matrix();
    else
      acc += normalized_trace(t.v) * t.u.matrix();
  }
  return AlgebraElement(std::move(acc));
}

AlgebraElement partial_trace_mid(const TensorElement3& t) {
  Matrix acc = Matrix::Zero(t.dim(), t.dim());
  for (const auto& term : t.terms())
    acc += normalized_trace(term.v) * (term.u.matrix() * term.w.matrix());
  return AlgebraElement(std::move(acc));
}

TensorElement2 psi_map(const TensorElement2& u, const TensorElement2& y) {
  if (u.dim() != y.dim()) throw UsageError("psi_map: space mismatch");
  std::vector<TensorTerm2> out;
  out.reserve(y.term_count());
  for (const auto& t : y.terms())
    out.push_back(TensorTerm2{sharp_apply(u, t.u), t.v});
  return TensorElement2(y.space(), y.config(), std::move(out));
}

Matrix flatten(const TensorElement2& u, int max_dim) {
  if (u.dim() > max_dim)
    throw SizeError("flatten: dimension " + std::to_string(u.dim()) +
                    " exceeds the dense budget " + std::to_string(max_dim));
  const int n2 = u.dim() * u.dim();
  Matrix acc = Matrix::Zero(n2, n2);
  for (const auto& t : u.terms()) {
    if (u.config() == TensorConfig::Config1) {
      acc += Eigen::kroneckerProduct(t.u.matrix(), t.v.matrix());
    } else {
      const Matrix vt = t.v.matrix().transpose();
      acc += Eigen::kroneckerProduct(t.u.matrix(), vt);
    }
  }
  return acc;
}

namespace {

// Largest eigenvalue of a Hermitian positive semidefinite operator on N x N
// matrices, by a Lanczos iteration with full reorthogonalization and simple
// thick-free restarts. Deterministic start vector.
double krylov_top_eigenvalue(int n, const std::function<Matrix(const Matrix&)>& op,
                             const SpatialNormOptions& o) {
  auto inner = [](const Matrix& a, const Matrix& b) {
    return a.conjugate().cwiseProduct(b).sum();
  };

  Matrix v0(n, n);
  Substream rng(0x7a1692c5d34501efULL, 11, 29);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      v0(i, j) = Complex(rng.next_gaussian(), rng.next_gaussian());
  v0 /= std::sqrt(v0.squaredNorm());

  for (int restart = 0; restart <= o.max_restarts; ++restart) {
    std::vector<Matrix> basis{v0};
    std::vector<double> alphas, betas;
    Eigen::VectorXd ritz_vec;
    double theta = 0.0;

    for (int j = 0; j < o.max_basis; ++j) {
      Matrix w = op(basis[static_cast<std::size_t>(j)]);
      const double alpha = inner(basis[static_cast<std::size_t>(j)], w).real();
      w -= alpha * basis[static_cast<std::size_t>(j)];
      if (j > 0) w -= betas.back() * basis[static_cast<std::size_t>(j - 1)];
      for (const auto& q : basis) w -= inner(q, w) * q;
      const double beta = std::sqrt(w.squaredNorm());
      alphas.push_back(alpha);

      const int m = j + 1;
      Eigen::MatrixXd trid = Eigen::MatrixXd::Zero(m, m);
      for (int i = 0; i < m; ++i) trid(i, i) = alphas[static_cast<std::size_t>(i)];
      for (int i = 0; i + 1 < m; ++i)
        trid(i, i + 1) = trid(i + 1, i) = betas[static_cast<std::size_t>(i)];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(trid);
      int top = 0;
      es.eigenvalues().maxCoeff(&top);
      theta = es.eigenvalues()(top);
      ritz_vec = es.eigenvectors().col(top);

      const double resid = beta * std::abs(ritz_vec(m - 1));
      if (resid <= o.tol * std::max(theta, 1e-300)) return std::max(theta, 0.0);

      betas.push_back(beta);
      basis.push_back(w / beta);
    }

    // Restart from the best Ritz vector found so far.
    v0.setZero();
    for (int i = 0; i < ritz_vec.size(); ++i)
      v0 += ritz_vec(i) * basis[static_cast<std::size_t>(i)];
    const double nrm = std::sqrt(v0.squaredNorm());
    if (nrm == 0.0) return std::max(theta, 0.0);
    v0 /= nrm;
  }
  throw NumericError("spatial_norm: Krylov iteration did not reach the requested accuracy");
}

}  // namespace

double spatial_norm(const TensorElement2& u, const SpatialNormOptions& opts) {
  if (u.dim() > opts.dim_limit)
    throw SizeError("spatial_norm: dimension " + std::to_string(u.dim()) +
                    " exceeds the configured limit " + std::to_string(opts.dim_limit));
  if (u.is_zero()) return 0.0;

  if (u.dim() <= opts.dense_dim_limit) {
    const Matrix t = flatten(u, opts.dense_dim_limit);
    const Matrix gram = t.adjoint() * t;
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
  }

  // Matrix-free Gram operator of the flattening, acting on N x N matrices
  // identified with row-major coordinate vectors.
  const bool componentwise = u.config() == TensorConfig::Config1;
  auto gram_op = [&](const Matrix& w) {
    Matrix fwd = Matrix::Zero(u.dim(), u.dim());
    for (const auto& t : u.terms()) {
      if (componentwise)
        fwd += t.u.matrix() * w * t.v.matrix().transpose();
      else
        fwd += t.u.matrix() * w * t.v.matrix();
    }
    Matrix back = Matrix::Zero(u.dim(), u.dim());
    for (const auto& t : u.terms()) {
      if (componentwise)
        back += t.u.matrix().adjoint() * fwd * t.v.matrix().conjugate();
      else
        back += t.u.matrix().adjoint() * fwd * t.v.matrix().adjoint();
    }
    return back;
  };
  return std::sqrt(std::max(0.0, krylov_top_eigenvalue(u.dim(), gram_op, opts)));
}

double proj_ub(const TensorElement2& u) {
  double sum = 0.0;
  for (const auto& t : u.terms()) sum += op_norm(t.u) * op_norm(t.v);
  return sum;
}

TensorElement2 compress(const TensorElement2& u, double tol) {
  const std::size_t k = u.term_count();
  if (k <= 1) return u;
  const int n = u.dim();
  const std::ptrdiff_t n2 = static_cast<std::ptrdiff_t>(n) * n;

  // As a bilinear element the tensor is the rank-k matrix
  //   M = sum_i vec(u_i) vec(v_i)^T,
  // so a thin QR of each factor stack plus an SVD of the small core gives the
  // shortest representation of the same element.
  Matrix left(n2, k), right(n2, k);
  for (std::size_t i = 0; i < k; ++i) {
    left.col(static_cast<std::ptrdiff_t>(i)) =
        Eigen::Map<const Eigen::VectorXcd>(u.terms()[i].u.matrix().data(), n2);
    right.col(static_cast<std::ptrdiff_t>(i)) =
        Eigen::Map<const Eigen::VectorXcd>(u.terms()[i].v.matrix().data(), n2);
  }

  const std::ptrdiff_t ml = std::min<std::ptrdiff_t>(n2, static_cast<std::ptrdiff_t>(k));
  Eigen::HouseholderQR<Matrix> qr_l(left), qr_r(right);
  const Matrix thin_ql = qr_l.householderQ() * Matrix::Identity(n2, ml);
  const Matrix thin_qr = qr_r.householderQ() * Matrix::Identity(n2, ml);
  const Matrix rl = qr_l.matrixQR().topRows(ml).triangularView<Eigen::Upper>();
  const Matrix rr = qr_r.matrixQR().topRows(ml).triangularView<Eigen::Upper>();
  const Matrix core = rl * rr.transpose();

  Eigen::BDCSVD<Matrix> svd(core, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd sig = svd.singularValues();

  // Drop the smallest singular values while their total stays within tol;
  // the sharp action then changes by at most tol in operator norm.
  std::ptrdiff_t r = sig.size();
  double cum = 0.0;
  while (r > 0 && cum + sig(r - 1) <= tol) {
    cum += sig(r - 1);
    --r;
  }
  if (static_cast<std::size_t>(r) >= k) return u;

  std::vector<TensorTerm2> out;
  out.reserve(static_cast<std::size_t>(r));
  for (std::ptrdiff_t j = 0; j < r; ++j) {
    const double s = std::sqrt(sig(j));
    const Eigen::VectorXcd lu = thin_ql * svd.matrixU().col(j) * s;
    const Eigen::VectorXcd rv = thin_qr * svd.matrixV().col(j).conjugate() * s;
    out.push_back(TensorTerm2{AlgebraElement(Eigen::Map<const Matrix>(lu.data(), n, n)),
                              AlgebraElement(Eigen::Map<const Matrix>(rv.data(), n, n))});
  }
  TensorElement2 rebuilt(u.space(), u.config(), std::move(out));
  if (proj_ub(rebuilt) > 2.0 * proj_ub(u)) return u;
  return rebuilt;
}

TensorElement3 outer_right(const TensorElement2& a, const AlgebraElement& g) {
  require_dim(a.space(), g, "outer_right");
  std::vector<TensorTerm3> out;
  out.reserve(a.term_count());
  for (const auto& t : a.terms()) out.push_back(TensorTerm3{t.u, t.v, g});
  return TensorElement3(a.space(), a.config(), std::move(out));
}

TensorElement3 outer_left(const AlgebraElement& f, const TensorElement2& a) {
  require_dim(a.space(), f, "outer_left");
  std::vector<TensorTerm3> out;
  out.reserve(a.term_count());
  for (const auto& t : a.terms()) out.push_back(TensorTerm3{f, t.u, t.v});
  return TensorElement3(a.space(), a.config(), std::move(out));
}

}  // namespace ncrough
