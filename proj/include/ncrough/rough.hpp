#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

#include "ncrough/algebra.hpp"
#include "ncrough/tensors.hpp"

namespace ncrough {

// Quantities indexed by a pair of grid times s < t: increments, corrected
// sums, integrals, remainders. Storage is dense over the pairs, so grids are
// meant for coarse partitions, not the full simulation grid.
inline constexpr std::size_t kTwoParamMaxPoints = 257;

class TwoParamGrid {
 public:
  TwoParamGrid(std::vector<double> times, const Space& s);

  std::size_t points() const { return times_.size(); }
  const std::vector<double>& times() const { return times_; }
  const Space& space() const { return space_; }

  AlgebraElement& at(std::size_t i, std::size_t j);  // requires i < j
  const AlgebraElement& at(std::size_t i, std::size_t j) const;
  // Like at(), but the diagonal reads as zero instead of failing.
  AlgebraElement value(std::size_t i, std::size_t j) const;

 private:
  std::size_t offset(std::size_t i, std::size_t j) const;

  std::vector<double> times_;
  Space space_;
  std::vector<AlgebraElement> values_;
};

// Rows "s,t,op_norm,trace_re,trace_im", one per pair s < t.
void write_two_param_csv(const TwoParamGrid& g, std::ostream& out);

// First difference of a path: g_{st} = X_t - X_s.
TwoParamGrid delta1(const GridPath& p);

// Second difference h_{sut} = g_{st} - g_{su} - g_{ut}, evaluated on demand.
// Views the grid, so the grid must outlive the evaluator. delta2 of delta1
// vanishes identically.
class Delta2View {
 public:
  explicit Delta2View(const TwoParamGrid& g) : grid_(&g) {}
  const TwoParamGrid& grid() const { return *grid_; }
  AlgebraElement operator()(std::size_t i, std::size_t u, std::size_t j) const;

 private:
  const TwoParamGrid* grid_;
};

inline Delta2View delta2(const TwoParamGrid& g) { return Delta2View(g); }

// Grid suprema of |g_{st}| / (t-s)^alpha, resp. |h_{sut}| / ((t-u)^alpha (u-s)^beta).
// The triple scan is cubic in the point count, hence the tighter cap.
inline constexpr std::size_t kHolder3MaxPoints = 129;
double holder2_norm(const TwoParamGrid& g, double alpha);
double holder3_norm(const Delta2View& h, double alpha, double beta);

// Second-level increment of the path, evaluated against nested-configuration
// rank-2 tensors U: the left-point sum approximates int (U # (X_u - X_s)) dX_u.
//   Ito             left-point sum over the fine cells
//   Stratonovich    Ito plus the trace correction (t-s)/2 * (Id x phi)[U]
//   Interpolated    exact area of the piecewise-linear path through every
//                   stride-th point; defined only at those points
//   SmoothLebesgue  Interpolated with stride 1, the smooth-path reading
// All variants satisfy the multiplicative (Chen) identity
//   X_{st}[U] - X_{su}[U] - X_{ut}[U] = (U # (X_u - X_s)) (X_t - X_u)
// exactly at supported triples s < u < t.
enum class AreaKind { Ito, Stratonovich, Interpolated, SmoothLebesgue };

class LevyArea {
 public:
  // Views the path; the path must outlive the area. stride is meaningful for
  // Interpolated only and must divide the number of fine steps.
  LevyArea(const GridPath& fine, AreaKind kind, std::size_t stride = 1);

  const GridPath& path() const { return *path_; }
  AreaKind kind() const { return kind_; }
  std::size_t stride() const { return stride_; }
  bool supports(std::size_t idx) const;

  // X_{st}[U]. Results are memoized by (s, t, fingerprint); reads share the
  // cache, insertion takes the writer lock.
  AlgebraElement eval(const TensorElement2& u, std::size_t i, std::size_t j) const;
  // The starred area X*_{st}[U] = (X_{st}[U*])*.
  AlgebraElement eval_star(const TensorElement2& u, std::size_t i, std::size_t j) const;

  // [X_{st} x Id] (sum a(x)b(x)c) = sum X_{st}[a(x)b] c
  AlgebraElement contract_left(const TensorElement3& t, std::size_t i, std::size_t j) const;
  // [Id x X*_{st}] (sum a(x)b(x)c) = sum a X*_{st}[b(x)c]
  AlgebraElement contract_right(const TensorElement3& t, std::size_t i, std::size_t j) const;

  std::size_t cache_size() const;

 private:
  struct Key {
    std::uint64_t i, j, fp;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const;
  };

  void require_supported(std::size_t i, std::size_t j) const;
  AlgebraElement eval_uncached(const TensorElement2& u, std::size_t i, std::size_t j) const;

  const GridPath* path_;
  AreaKind kind_;
  std::size_t stride_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<Key, Matrix, KeyHash> cache_;
};

// The plain tensor-valued area sum (X_u - X_s) (x) dX_u over fine cells,
// as a componentwise-product tensor.
TensorElement2 tensor_area(const GridPath& p, std::size_t i, std::size_t j);

// An integrand controlled by the path: the rank-2 value U_s together with the
// two rank-3 remainders that multiply the area on either side. Accessors take
// fine-grid indices and are consulted only at multiples of stride; they are
// expected to be built from path values at times <= s.
struct ControlledBiprocess {
  const GridPath* path = nullptr;
  std::size_t stride = 1;
  std::function<TensorElement2(std::size_t)> value_at;
  std::function<TensorElement3(std::size_t)> left_at;
  std::function<TensorElement3(std::size_t)> right_at;
};

// Biprocess with fixed value and remainders at every grid point.
ControlledBiprocess constant_biprocess(const GridPath& p, TensorElement2 value,
                                       TensorElement3 left, TensorElement3 right);

// Decomposition remainder U_t - U_s - dX # U1_s - U2_s # dX; small in (t-s)
// exactly when the biprocess is controlled by the path.
TensorElement2 biprocess_residual(const ControlledBiprocess& bip, std::size_t i, std::size_t j);

// One corrected Riemann-sum cell:
//   M_{st} = U_s # (X_t - X_s) + [X_{st} x Id](U1_s) + [Id x X*_{st}](U2_s)
AlgebraElement corrected_increment(const ControlledBiprocess& bip, const LevyArea& area,
                                   std::size_t i, std::size_t j);

struct RefineOptions {
  double tol = 1e-9;           // operator-norm gap between successive levels
  std::size_t max_levels = 24;
};

struct RoughIntegralResult {
  TwoParamGrid values;
  double cauchy_gap = 0.0;   // worst achieved gap across pairs
  bool converged = false;    // every pair met tol before running out of points
  std::size_t levels_used = 0;
};

// Refinement limit of corrected sums over dyadic subdivisions of each pair of
// coarse points. coarse holds fine-grid indices, increasing, each supported by
// both the biprocess and the area. Subdivision stops at their strides.
RoughIntegralResult rough_integral(const ControlledBiprocess& bip, const LevyArea& area,
                                   const std::vector<std::size_t>& coarse,
                                   const RefineOptions& opts = {});

// 2 + 2^mu * zeta(mu), the contraction constant of the additive sewing bound.
double c_sewing(double mu);

struct SewingResult {
  TwoParamGrid lambda_part;  // M minus the refinement limit of M-sums
  double c_mu = 0.0;
  double best_alpha = 0.0;   // split of mu minimizing the third-level norm
  double holder3_best = 0.0;
  double max_ratio = 0.0;    // worst |Lambda_{st}| / (c_mu N3 (t-s)^mu)
  bool bound_ok = false;     // max_ratio within slack (or Lambda negligible)
  double cauchy_gap = 0.0;
  bool converged = false;
};

// Splits a two-parameter quantity into its additive part (the limit of
// refinement sums over the grid) and the remainder, then checks the remainder
// against the sewing bound with the best Hoelder split of mu. Requires mu > 1.
SewingResult sewing_residual(const TwoParamGrid& m, double mu,
                             const RefineOptions& opts = {});

}  // namespace ncrough
