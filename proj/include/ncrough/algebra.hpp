#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "ncrough/errors.hpp"
#include "ncrough/rng.hpp"

namespace ncrough {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

// Finite-dimensional stand-in for a tracial operator algebra: N x N complex
// matrices, with the normalized trace tr/N playing the role of the state.
struct Space {
  int dim = 0;
};

class AlgebraElement {
 public:
  AlgebraElement() = default;
  explicit AlgebraElement(Matrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) throw UsageError("algebra element must be square");
  }

  static AlgebraElement identity(const Space& s);
  static AlgebraElement zero(const Space& s);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Matrix& matrix() const { return m_; }

  AlgebraElement adjoint() const { return AlgebraElement(m_.adjoint()); }
  double self_adjoint_defect() const;
  bool is_self_adjoint(double tol = 1e-12) const;
  AlgebraElement symmetrized() const { return AlgebraElement(0.5 * (m_ + m_.adjoint())); }

  AlgebraElement& operator+=(const AlgebraElement& o);
  AlgebraElement& operator-=(const AlgebraElement& o);
  AlgebraElement& operator*=(Complex c);

 private:
  Matrix m_;
};

AlgebraElement operator+(AlgebraElement a, const AlgebraElement& b);
AlgebraElement operator-(AlgebraElement a, const AlgebraElement& b);
AlgebraElement operator-(const AlgebraElement& a);
AlgebraElement operator*(const AlgebraElement& a, const AlgebraElement& b);
AlgebraElement operator*(Complex c, AlgebraElement a);
AlgebraElement operator*(double c, AlgebraElement a);

Complex normalized_trace(const AlgebraElement& a);

// Largest singular value.
double op_norm(const AlgebraElement& a);

// Normalized Schatten norm ((1/N) sum sigma_i^p)^(1/p); p may be infinity.
// Nondecreasing in p with op_norm as the limit.
double lp_norm(const AlgebraElement& a, double p);

// sqrt(trace(A* A)/N); cheap special case of lp_norm(2).
double l2_norm(const AlgebraElement& a);

// A*A computed with the Hermitian rank-update kernel; requires A self-adjoint.
AlgebraElement herm_square(const AlgebraElement& a);

// One Hermitian increment of the matrix model: entries scale like sqrt(dt/N),
// so the normalized trace of the square has mean dt and the spectrum at t=1
// fills out [-2, 2] as N grows.
AlgebraElement sample_gue_increment(const Space& s, double dt, std::uint64_t seed,
                                    std::uint64_t path_id, std::uint64_t step_index);

struct GridPath {
  std::vector<double> times;
  std::vector<AlgebraElement> values;

  std::size_t points() const { return times.size(); }
  std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }
  int dim() const { return values.empty() ? 0 : values.front().dim(); }
  void check() const;
};

std::vector<double> uniform_times(double T, std::size_t steps);

// Hermitian random walk with independent increments keyed by
// (seed, path_id, step index); starts at zero.
GridPath simulate_free_bm(const Space& s, const std::vector<double>& times,
                          std::uint64_t seed, std::uint64_t path_id = 0);

inline constexpr std::size_t kHolderNormMaxPoints = 257;

// max over grid pairs s < t of |X_t - X_s| / (t-s)^gamma. Every pair costs an
// eigensolve, hence the hard cap on points; restrict the path first if needed.
double holder_norm(const GridPath& p, double gamma);

GridPath restrict_path(const GridPath& p, const std::vector<std::size_t>& indices);

// Indices 0, step, 2*step, ... for a coarse dyadic sub-grid of a uniform grid.
std::vector<std::size_t> coarse_indices(std::size_t fine_steps, std::size_t coarse_steps);

// Binary path container. Layout (little endian):
//   8 bytes   magic "NCPATH01"
//   u64 N     matrix dimension
//   u64 M     number of steps (M+1 matrices follow)
//   f64 T     horizon; grid times are k*T/M
//   u64 seed  generator seed recorded for provenance
//   (M+1) matrices, row major, each entry as two f64 (re, im)
void save_path(const GridPath& p, const std::string& file, std::uint64_t seed);
GridPath load_path(const std::string& file, std::uint64_t* seed_out = nullptr);

}  // namespace ncrough
