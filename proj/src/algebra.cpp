#include "ncrough/algebra.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

namespace ncrough {

Substream::Substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t step) {
  // Fold the three keys through the mixer so that neighboring triples land in
  // unrelated parts of the state space.
  std::uint64_t s = hash_mix64(seed + 0x9e3779b97f4a7c15ULL);
  s = hash_mix64(s ^ (stream + 0xbf58476d1ce4e5b9ULL));
  s = hash_mix64(s ^ (step + 0x94d049bb133111ebULL));
  state_ = s;
}

std::uint64_t Substream::next_u64() {
  state_ += 0x9e3779b97f4a7c15ULL;
  return hash_mix64(state_);
}

double Substream::next_uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Substream::next_gaussian() {
  if (has_carry_) {
    has_carry_ = false;
    return carry_;
  }
  const double u1 = next_uniform();
  const double u2 = next_uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * M_PI * u2;
  carry_ = r * std::sin(a);
  has_carry_ = true;
  return r * std::cos(a);
}

AlgebraElement AlgebraElement::identity(const Space& s) {
  return AlgebraElement(Matrix::Identity(s.dim, s.dim));
}

AlgebraElement AlgebraElement::zero(const Space& s) {
  return AlgebraElement(Matrix::Zero(s.dim, s.dim));
}

double AlgebraElement::self_adjoint_defect() const {
  return op_norm(AlgebraElement(m_ - m_.adjoint()));
}

bool AlgebraElement::is_self_adjoint(double tol) const {
  // Entrywise check; cheaper than the operator norm and within a factor N of
  // it, which is fine for a yes/no gate.
  return (m_ - m_.adjoint()).cwiseAbs().maxCoeff() <= tol * static_cast<double>(dim());
}

AlgebraElement& AlgebraElement::operator+=(const AlgebraElement& o) {
  if (dim() != o.dim()) throw UsageError("dimension mismatch in addition");
  m_ += o.m_;
  return *this;
}

AlgebraElement& AlgebraElement::operator-=(const AlgebraElement& o) {
  if (dim() != o.dim()) throw UsageError("dimension mismatch in subtraction");
  m_ -= o.m_;
  return *this;
}

AlgebraElement& AlgebraElement::operator*=(Complex c) {
  m_ *= c;
  return *this;
}

AlgebraElement operator+(AlgebraElement a, const AlgebraElement& b) { return a += b; }
AlgebraElement operator-(AlgebraElement a, const AlgebraElement& b) { return a -= b; }
AlgebraElement operator-(const AlgebraElement& a) { return AlgebraElement(-a.matrix()); }

AlgebraElement operator*(const AlgebraElement& a, const AlgebraElement& b) {
  if (a.dim() != b.dim()) throw UsageError("dimension mismatch in product");
  Matrix r;
  r.noalias() = a.matrix() * b.matrix();
  return AlgebraElement(std::move(r));
}

AlgebraElement operator*(Complex c, AlgebraElement a) { return a *= c; }
AlgebraElement operator*(double c, AlgebraElement a) { return a *= Complex(c, 0.0); }

Complex normalized_trace(const AlgebraElement& a) {
  if (a.dim() == 0) throw UsageError("trace of empty element");
  return a.matrix().trace() / static_cast<double>(a.dim());
}

namespace {

Eigen::VectorXd singular_values_squared(const AlgebraElement& a) {
  const Matrix& m = a.matrix();
  Matrix g;
  g.noalias() = m.adjoint() * m;
  Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseMax(0.0);
}

}  // namespace

double op_norm(const AlgebraElement& a) {
  if (a.dim() == 0) return 0.0;
  return std::sqrt(singular_values_squared(a).maxCoeff());
}

double lp_norm(const AlgebraElement& a, double p) {
  if (a.dim() == 0) return 0.0;
  if (!(p >= 1.0)) throw UsageError("lp_norm needs p >= 1");
  if (std::isinf(p)) return op_norm(a);
  const Eigen::VectorXd s2 = singular_values_squared(a);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s2.size(); ++i) acc += std::pow(s2[i], p / 2.0);
  return std::pow(acc / static_cast<double>(a.dim()), 1.0 / p);
}

double l2_norm(const AlgebraElement& a) {
  if (a.dim() == 0) return 0.0;
  return a.matrix().norm() / std::sqrt(static_cast<double>(a.dim()));
}

AlgebraElement herm_square(const AlgebraElement& a) {
  Matrix r = Matrix::Zero(a.dim(), a.dim());
  r.selfadjointView<Eigen::Lower>().rankUpdate(a.matrix(), 1.0);
  return AlgebraElement(Matrix(r.selfadjointView<Eigen::Lower>()));
}

AlgebraElement sample_gue_increment(const Space& s, double dt, std::uint64_t seed,
                                    std::uint64_t path_id, std::uint64_t step_index) {
  if (s.dim <= 0) throw UsageError("space dimension must be positive");
  if (dt < 0) throw UsageError("negative time increment");
  const int n = s.dim;
  Matrix h(n, n);
  Substream rng(seed, path_id, step_index);
  const double diag_scale = std::sqrt(dt / n);
  const double off_scale = std::sqrt(dt / (2.0 * n));
  for (int j = 0; j < n; ++j) {
    h(j, j) = Complex(diag_scale * rng.next_gaussian(), 0.0);
    for (int k = j + 1; k < n; ++k) {
      const double re = off_scale * rng.next_gaussian();
      const double im = off_scale * rng.next_gaussian();
      h(j, k) = Complex(re, im);
      h(k, j) = Complex(re, -im);
    }
  }
  return AlgebraElement(std::move(h));
}

void GridPath::check() const {
  if (times.size() != values.size()) throw UsageError("grid path: times/values size mismatch");
  if (times.empty()) throw UsageError("grid path: empty");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1])) throw UsageError("grid path: times must increase");
  const int n = values.front().dim();
  for (const auto& v : values)
    if (v.dim() != n) throw UsageError("grid path: inconsistent dimensions");
}

std::vector<double> uniform_times(double T, std::size_t steps) {
  if (!(T > 0) || steps == 0) throw UsageError("uniform grid needs T > 0 and steps >= 1");
  std::vector<double> t(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) t[k] = T * static_cast<double>(k) / static_cast<double>(steps);
  return t;
}

GridPath simulate_free_bm(const Space& s, const std::vector<double>& times,
                          std::uint64_t seed, std::uint64_t path_id) {
  if (times.size() < 2) throw UsageError("need at least two grid times");
  GridPath p;
  p.times = times;
  p.values.reserve(times.size());
  p.values.push_back(AlgebraElement::zero(s));
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    const double dt = times[k + 1] - times[k];
    if (!(dt > 0)) throw UsageError("grid times must increase");
    p.values.push_back(p.values.back() + sample_gue_increment(s, dt, seed, path_id, k));
  }
  return p;
}

double holder_norm(const GridPath& p, double gamma) {
  p.check();
  if (p.points() > kHolderNormMaxPoints)
    throw SizeError("holder_norm: grid has " + std::to_string(p.points()) +
                    " points, cap is " + std::to_string(kHolderNormMaxPoints));
  double best = 0.0;
  for (std::size_t i = 0; i + 1 < p.points(); ++i)
    for (std::size_t j = i + 1; j < p.points(); ++j) {
      const double dt = p.times[j] - p.times[i];
      const double v = op_norm(p.values[j] - p.values[i]) / std::pow(dt, gamma);
      best = std::max(best, v);
    }
  return best;
}

GridPath restrict_path(const GridPath& p, const std::vector<std::size_t>& indices) {
  GridPath r;
  r.times.reserve(indices.size());
  r.values.reserve(indices.size());
  for (std::size_t idx : indices) {
    if (idx >= p.points()) throw UsageError("restrict_path: index out of range");
    r.times.push_back(p.times[idx]);
    r.values.push_back(p.values[idx]);
  }
  return r;
}

std::vector<std::size_t> coarse_indices(std::size_t fine_steps, std::size_t coarse_steps) {
  if (coarse_steps == 0 || fine_steps % coarse_steps != 0)
    throw UsageError("coarse grid must divide the fine grid");
  const std::size_t stride = fine_steps / coarse_steps;
  std::vector<std::size_t> idx(coarse_steps + 1);
  for (std::size_t k = 0; k <= coarse_steps; ++k) idx[k] = k * stride;
  return idx;
}

namespace {
constexpr char kPathMagic[8] = {'N', 'C', 'P', 'A', 'T', 'H', '0', '1'};

void put_u64(std::ofstream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::ifstream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ofstream& os, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(os, v);
}

double get_f64(std::ifstream& is) {
  const std::uint64_t v = get_u64(is);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}
}  // namespace

void save_path(const GridPath& p, const std::string& file, std::uint64_t seed) {
  p.check();
  const std::size_t m = p.steps();
  const double T = p.times.back();
  // Only uniform grids fit the fixed header; everything the tool emits is one.
  for (std::size_t k = 0; k < p.points(); ++k) {
    const double expect = T * static_cast<double>(k) / static_cast<double>(m);
    if (std::abs(p.times[k] - expect) > 1e-12 * std::max(1.0, T))
      throw UsageError("save_path: only uniform grids are serializable");
  }
  std::ofstream os(file, std::ios::binary);
  if (!os) throw UsageError("save_path: cannot open " + file);
  os.write(kPathMagic, 8);
  put_u64(os, static_cast<std::uint64_t>(p.dim()));
  put_u64(os, static_cast<std::uint64_t>(m));
  put_f64(os, T);
  put_u64(os, seed);
  const int n = p.dim();
  for (const auto& v : p.values)
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        put_f64(os, v.matrix()(r, c).real());
        put_f64(os, v.matrix()(r, c).imag());
      }
  if (!os) throw UsageError("save_path: write failed for " + file);
}

GridPath load_path(const std::string& file, std::uint64_t* seed_out) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw UsageError("load_path: cannot open " + file);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kPathMagic, 8) != 0)
    throw UsageError("load_path: bad magic in " + file);
  const std::uint64_t n = get_u64(is);
  const std::uint64_t m = get_u64(is);
  const double T = get_f64(is);
  const std::uint64_t seed = get_u64(is);
  if (n == 0 || n > 4096 || m == 0 || m > (1u << 22) || !(T > 0))
    throw UsageError("load_path: implausible header in " + file);
  GridPath p;
  p.times = uniform_times(T, m);
  p.values.reserve(m + 1);
  for (std::uint64_t k = 0; k <= m; ++k) {
    Matrix v(n, n);
    for (std::uint64_t r = 0; r < n; ++r)
      for (std::uint64_t c = 0; c < n; ++c) {
        const double re = get_f64(is);
        const double im = get_f64(is);
        v(r, c) = Complex(re, im);
      }
    p.values.emplace_back(std::move(v));
  }
  if (!is) throw UsageError("load_path: truncated file " + file);
  if (seed_out) *seed_out = seed;
  return p;
}

}  // namespace ncrough
