#include "ncrough/pairings.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

namespace ncrough {

long long pairing_count(int r) {
  if (r < 0) throw UsageError("pairing_count: negative r");
  if (r % 2 != 0) return 0;
  long long c = 1;
  for (int k = r - 1; k > 1; k -= 2) c *= k;
  return c;
}

namespace {

// Pair the smallest free index with each larger free partner in turn. Stack
// depth is r/2; `used` marks indices already placed in a block.
void recurse_pairings(int r, std::vector<char>& used, Pairing& scratch,
                      const std::function<void(const Pairing&)>& fn) {
  int a = 1;
  while (a <= r && used[a]) ++a;
  if (a > r) {
    fn(scratch);
    return;
  }
  used[a] = 1;
  for (int b = a + 1; b <= r; ++b) {
    if (used[b]) continue;
    used[b] = 1;
    scratch.blocks.emplace_back(a, b);
    recurse_pairings(r, used, scratch, fn);
    scratch.blocks.pop_back();
    used[b] = 0;
  }
  used[a] = 0;
}

}  // namespace

void for_each_pairing(int r, const std::function<void(const Pairing&)>& fn) {
  if (r < 0) throw UsageError("for_each_pairing: negative r");
  if (r > kMaxPairingPoints)
    throw SizeError("for_each_pairing: r = " + std::to_string(r) + " exceeds the budget of " +
                    std::to_string(kMaxPairingPoints));
  if (r % 2 != 0) return;
  if (r == 0) {
    fn(Pairing{});
    return;
  }
  std::vector<char> used(static_cast<std::size_t>(r) + 1, 0);
  Pairing scratch;
  scratch.blocks.reserve(r / 2);
  recurse_pairings(r, used, scratch, fn);
}

std::vector<Pairing> enumerate_pairings(int r) {
  std::vector<Pairing> out;
  if (r > 0 && r % 2 == 0) out.reserve(static_cast<std::size_t>(pairing_count(r)));
  for_each_pairing(r, [&](const Pairing& p) { out.push_back(p); });
  return out;
}

int crossing_number(const Pairing& p) {
  int c = 0;
  const auto& b = p.blocks;
  for (std::size_t i = 0; i < b.size(); ++i)
    for (std::size_t j = i + 1; j < b.size(); ++j) {
      const auto [a1, b1] = b[i];
      const auto [a2, b2] = b[j];
      // Blocks are ordered internally; two blocks cross iff they interleave.
      if ((a1 < a2 && a2 < b1 && b1 < b2) || (a2 < a1 && a1 < b2 && b2 < b1)) ++c;
    }
  return c;
}

std::vector<long long> crossing_histogram(int r) {
  static std::map<int, std::vector<long long>> cache;
  static std::mutex mu;
  {
    std::lock_guard<std::mutex> lk(mu);
    auto it = cache.find(r);
    if (it != cache.end()) return it->second;
  }
  const int pairs = r / 2;
  std::vector<long long> counts(r % 2 == 0 ? pairs * (pairs - 1) / 2 + 1 : 1, 0);
  for_each_pairing(r, [&](const Pairing& p) { ++counts[crossing_number(p)]; });
  std::lock_guard<std::mutex> lk(mu);
  cache[r] = counts;
  return counts;
}

double q_joint_moment(const MomentQuery& query) {
  const int r = static_cast<int>(query.times.size());
  if (query.gram) {
    if (query.gram->rows() != r || query.gram->cols() != r)
      throw UsageError("q_joint_moment: gram matrix shape must match times");
  }
  if (r % 2 != 0) return 0.0;
  const auto cov = [&](int i, int j) -> double {
    if (query.gram) return (*query.gram)(i - 1, j - 1);
    return std::min(query.times[i - 1], query.times[j - 1]);
  };
  double total = 0.0;
  for_each_pairing(r, [&](const Pairing& p) {
    double prod = 1.0;
    for (const auto& [a, b] : p.blocks) prod *= cov(a, b);
    total += std::pow(query.q, crossing_number(p)) * prod;
  });
  return total;
}

std::vector<Rational> q_moment_polynomial(const std::vector<Rational>& times) {
  const int r = static_cast<int>(times.size());
  if (r % 2 != 0) return {};
  const int pairs = r / 2;
  std::vector<Rational> coeffs(r == 0 ? 1 : pairs * (pairs - 1) / 2 + 1, Rational(0));
  if (r == 0) {
    coeffs[0] = 1;
    return coeffs;
  }
  for_each_pairing(r, [&](const Pairing& p) {
    Rational prod(1);
    for (const auto& [a, b] : p.blocks) prod *= std::min(times[a - 1], times[b - 1]);
    coeffs[crossing_number(p)] += prod;
  });
  return coeffs;
}

Rational q_joint_moment_exact(const std::vector<Rational>& times, const Rational& q) {
  if (times.size() % 2 != 0) return Rational(0);
  const auto coeffs = q_moment_polynomial(times);
  Rational acc(0), qp(1);
  for (const auto& c : coeffs) {
    acc += c * qp;
    qp *= q;
  }
  return acc;
}

namespace {

// Truncated infinite product in the density, as a function of theta.
// Factors converge to 1 geometrically in |q|; we stop once the remaining
// factors each deviate from 1 by less than 1e-14.
double density_product(double q, double theta, int n_max) {
  double prod = 1.0;
  const double c2 = std::cos(2.0 * theta);
  double qn = 1.0;
  for (int n = 1; n <= n_max; ++n) {
    qn *= q;
    prod *= (1.0 - qn) * (1.0 - 2.0 * qn * c2 + qn * qn);
  }
  return prod;
}

int density_truncation(double q) {
  const double aq = std::abs(q);
  if (aq == 0.0) return 0;
  // |factor - 1| <= 4 |q|^n in the relevant range; solve 4 |q|^n < 1e-14.
  return static_cast<int>(std::ceil(std::log(2.5e-15) / std::log(aq))) + 1;
}

struct QuadState {
  double tol = 1e-11;
  int max_depth = 30;
  int min_depth = 2;  // forced refinements before the local test may accept
  double achieved = 0.0;
  long evals = 0;
};

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                        double fm, double fb, double whole, int depth, QuadState& st) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  st.evals += 2;
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double err = left + right - whole;
  if (depth <= 0) {
    st.achieved = std::max(st.achieved, std::abs(err));
    if (std::abs(err) > st.tol)
      throw NumericError("adaptive quadrature hit depth limit; local error " +
                         std::to_string(std::abs(err)));
    return left + right + err / 15.0;
  }
  const bool may_accept = st.max_depth - depth >= st.min_depth;
  if (may_accept && std::abs(err) <= 15.0 * st.tol * (b - a)) {
    st.achieved = std::max(st.achieved, std::abs(err) / 15.0);
    return left + right + err / 15.0;
  }
  return adaptive_simpson(f, a, m, fa, flm, fm, left, depth - 1, st) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, depth - 1, st);
}

double integrate_panel(const std::function<double(double)>& f, double a, double b,
                       QuadState& st) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  st.evals += 3;
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, st.max_depth, st);
}

double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          QuadState& st) {
  // Split at an irrational fraction of the interval. Dyadic midpoints of the
  // whole interval can hit symmetry points of trigonometric integrands where
  // the refined Simpson sum reproduces the coarse one exactly while both are
  // wrong; an incommensurate split point removes those coincidences.
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  const double c = a + (b - a) * golden;
  return integrate_panel(f, a, c, st) + integrate_panel(f, c, b, st);
}

}  // namespace

double density_moment(double q, int order) {
  if (order < 0 || order > kDensityMaxOrder)
    throw UsageError("density_moment: order must be in [0, " + std::to_string(kDensityMaxOrder) + "]");
  if (std::abs(q) > kDensityMaxAbsQ)
    throw UsageError("density_moment: |q| <= 0.9 required");
  const int n_max = density_truncation(q);
  const double edge = 2.0 / std::sqrt(1.0 - q);
  // x = edge * cos(theta). The sqrt(1-q) factors of the density and of dx
  // cancel against one power of the edge.
  const auto integrand = [&](double theta) {
    const double x = edge * std::cos(theta);
    const double s = std::sin(theta);
    return std::pow(x, order) * (2.0 / M_PI) * s * s * density_product(q, theta, n_max);
  };
  QuadState st;
  const double value = integrate_adaptive(integrand, 0.0, M_PI, st);
  return value;
}

MomentBound moment_bound_check(int n, int p, double q) {
  if (n < 1 || n > 64) throw SizeError("moment_bound_check: n must be in [1, 64]");
  if (p < 1 || 2 * p > 16) throw SizeError("moment_bound_check: 2p must be in [2, 16]");
  if (!(std::abs(q) < 1.0)) throw UsageError("moment_bound_check: |q| < 1 required");
  const auto counts = crossing_histogram(2 * p);
  double mq = 0.0, qp = 1.0;
  for (long long c : counts) {
    mq += static_cast<double>(c) * qp;
    qp *= q;
  }
  MomentBound out;
  out.sum = std::pow(static_cast<double>(n), p) * mq;
  out.bound = std::pow(static_cast<double>(n), p) *
              std::pow(2.0 / std::sqrt(1.0 - q), 2 * p);
  return out;
}

}  // namespace ncrough
