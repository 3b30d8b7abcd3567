#pragma once

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "ncrough/errors.hpp"

namespace ncrough {

// Exact arithmetic for the combinatorial anchors. Arbitrary precision, so
// coefficient sums like (2p-1)!! never overflow.
using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

// A pair partition of {1,...,r}: blocks (a,b) with a < b, listed by
// increasing first element.
struct Pairing {
  std::vector<std::pair<int, int>> blocks;
};

// Enumeration budget. (r-1)!! grows fast; past 20 points nothing desk-scale
// terminates, so we refuse.
inline constexpr int kMaxPairingPoints = 20;

// (r-1)!! for even r, 0 for odd r, 1 for r = 0.
long long pairing_count(int r);

// All pair partitions in the canonical order produced by repeatedly pairing
// the smallest unpaired index. Odd r yields an empty list.
std::vector<Pairing> enumerate_pairings(int r);

// Streaming form of the same enumeration; avoids materializing large lists.
void for_each_pairing(int r, const std::function<void(const Pairing&)>& fn);

// Number of block pairs {a,b}, {c,d} with a < c < b < d.
int crossing_number(const Pairing& p);

// counts[c] = number of pairings of r points with exactly c crossings.
// Cached per r; the top crossing count is r/2 choose 2.
std::vector<long long> crossing_histogram(int r);

struct MomentQuery {
  // Times (t_1,...,t_r); the pair covariance is min(t_i, t_j) unless a Gram
  // matrix is supplied, in which case gram(i,j) is used directly.
  std::vector<double> times;
  std::optional<Eigen::MatrixXd> gram;
  double q = 0.0;
};

// Joint moment of the q-gaussian family: sum over pair partitions of
// q^crossings times the product of pair covariances. Odd r gives 0.
double q_joint_moment(const MomentQuery& query);

// Same sum with exact arithmetic, expanded in powers of q: coeffs[c]
// multiplies q^c. Covariances are min(t_i, t_j).
std::vector<Rational> q_moment_polynomial(const std::vector<Rational>& times);

Rational q_joint_moment_exact(const std::vector<Rational>& times, const Rational& q);

// Moment of the single-variable spectral density on
// [-2/sqrt(1-q), 2/sqrt(1-q)] via adaptive quadrature of the explicit
// density (theta parametrization, infinite product truncated at 1e-14).
// |q| <= 0.9 and order <= 12.
double density_moment(double q, int order);

inline constexpr int kDensityMaxOrder = 12;
inline constexpr double kDensityMaxAbsQ = 0.9;

struct MomentBound {
  double sum = 0.0;    // 2p-th moment of a variance-n q-gaussian
  double bound = 0.0;  // n^p (2/sqrt(1-q))^(2p)
  bool ok() const { return sum >= -1e-9 && sum <= bound * (1.0 + 1e-12); }
};

// Closed moment bound check; n <= 64, 2p <= 16, |q| < 1.
MomentBound moment_bound_check(int n, int p, double q);

}  // namespace ncrough
