#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "ncrough/algebra.hpp"
#include "ncrough/funcalc.hpp"
#include "ncrough/rough.hpp"
#include "ncrough/sde.hpp"

namespace ncrough {

// ---------------------------------------------------------------------------
// Study plumbing: worker budget, tables, manifests.

// Worker count for study loops. Reads NCROUGH_THREADS (a positive integer)
// and falls back to the hardware count. Only independent study items fan out;
// every numerical kernel stays single threaded, so the thread budget changes
// wall time and nothing else.
std::size_t thread_budget();

// Runs fn(0), ..., fn(count-1) on up to thread_budget() workers, joins them
// all, and rethrows the first failure. Items must not share mutable state
// except through their own index.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

// Rectangular numeric table with named columns; the common shape of every
// study result.
struct StudyTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  // Width must match the header.
  void add_row(std::vector<double> row);
};

// RFC 4180 output: CRLF line endings, a header row, '.' decimal point
// regardless of locale. Fields print with enough digits to round trip, so a
// rerun with the same configuration is byte identical.
void write_csv(const StudyTable& t, std::ostream& out);

// Companion metadata written next to each table: schema version, study name,
// configuration echo, seed, build identifier, and wall time. Wall time is the
// one field that varies between reruns.
nlohmann::json run_manifest(const std::string& study, const nlohmann::json& config,
                            std::uint64_t seed, double wall_seconds);

// Least-squares slope diagnostics for log distance against log mesh.
struct RateFit {
  double rate = 0.0;
  double r2 = 0.0;
  bool valid = false;  // false when a distance sits at the noise floor
};

RateFit fit_rate(const std::vector<double>& mesh, const std::vector<double>& distance);

// ---------------------------------------------------------------------------
// Piecewise-linear interpolation and its exact second level.

// The path interpolated linearly (in time) through the selected knots and
// sampled back on the full fine grid. knots are increasing fine indices,
// starting at 0 and ending at the last index; values at knots are bitwise
// the original ones.
GridPath linear_interpolation(const GridPath& fine, const std::vector<std::size_t>& knots);

// Exact second level of the interpolated path against a nested rank-2 tensor:
//   int_s^t (U # (Xn_u - Xn_s)) dXn_u
// integrated in closed form over each linear piece. i <= j are arbitrary fine
// indices, not just knots. Left Riemann sums of the interpolated path
// converge to this value as their partition refines, and at knot strides it
// coincides with the Interpolated area variant.
AlgebraElement interp_area(const GridPath& fine, const std::vector<std::size_t>& knots,
                           const TensorElement2& u, std::size_t i, std::size_t j);

// ---------------------------------------------------------------------------
// Functional identities along a path.

// Operator norm of (t-s) 1 - sum of squared increments over [i, j]: how far
// the grid path is from having the bracket of free Brownian motion. This is
// the exact residual of the change-of-variable identity for f(x) = x^2.
double quadratic_variation_defect(const GridPath& x, std::size_t i, std::size_t j);

struct ItoFormulaReport {
  double strat_residual = 0.0;  // sup |delta f(X) - J^S| over requested pairs
  double ito_residual = 0.0;    // sup |delta f(X) - J^I - int tr2 du|
  double scale = 0.0;           // sup |delta f(X)|, for normalization
};

// Change-of-variable check: integrating the derivative biprocess of f along
// the path (value grad f, remainders grad^2 f on both sides) reproduces
// delta f(X) in the Stratonovich reading, and in the Ito reading after adding
// the time integral of the middle trace of grad^2 f (no 1/2: the second
// derivative convention already carries the factor 2). Integrals are the
// fully refined corrected sums over the fine grid, evaluated by a single
// prefix pass; the time integral uses trapezoid quadrature. Residuals are
// reported as sups over pairs drawn from `coarse` (increasing fine indices).
ItoFormulaReport ito_formula_check(const FunctionSpec& f, const GridPath& x,
                                   const std::vector<std::size_t>& coarse,
                                   const DerivativeOptions& dopts = {});

// Prefix corrected sums of a biprocess over its own grid: result[k] is the
// fully refined integral from 0 to the k-th biprocess point. Fully refined
// sums are exactly additive, so prefixes determine every pair value.
std::vector<AlgebraElement> corrected_prefix(const ControlledBiprocess& bip,
                                             const LevyArea& area);

struct GapReport {
  double residual = 0.0;  // sup |(J^S - J^I) - (1/2) int (Id x phi x Id)[U1 + U2] du|
  double scale = 0.0;     // sup |J^S - J^I|
};

// The two integral readings of a lifted integrand differ by half the time
// integral of the middle trace of the remainder tensors. Compares the exact
// gap of the corrected sums against trapezoid quadrature on the process grid,
// so the residual is the quadrature error of that time integral. fs, gs, y as
// in solve_rough_sde; coarse holds fine indices on the biprocess grid.
GapReport ito_strato_gap_check(const std::vector<FunctionSpec>& fs,
                               const std::vector<FunctionSpec>& gs,
                               const ControlledProcess& y,
                               const std::vector<std::size_t>& coarse,
                               const DerivativeOptions& dopts = {});

// ---------------------------------------------------------------------------
// Moment bound for step integrands and its failure for the diagonal.

struct StepIntegrandBound {
  double lhs = 0.0;  // spatial norm of sum V_k (x) (delta X)_k
  double rhs = 0.0;  // 2 sqrt( sum |V_k|^2 dt_k )
  bool within(double slack = 1.1) const { return lhs <= slack * rhs; }
};

// Second-moment bound for a simple adapted integrand against free Brownian
// increments: v[k] is the integrand value held on [t_k, t_{k+1}), so v must
// have one entry per step of x.
StepIntegrandBound bg_inequality_check(const std::vector<AlgebraElement>& v,
                                       const GridPath& x);

// A deterministic adapted step integrand for studies: at each step a degree-2
// polynomial of the current path value with coefficients drawn once per seed
// from U[-1, 1].
std::vector<AlgebraElement> adapted_step_integrand(const GridPath& x, std::uint64_t seed);

struct IncrementGrowthRow {
  std::size_t n = 0;
  double diagonal = 0.0;  // L2 norm of sum_{i<n} Y_i^2
  double spatial = 0.0;   // spatial norm of sum_{i<n} Y_i (x) Y_i
  double ratio = 0.0;     // diagonal / spatial
};

// Growth comparison for unit-spaced free increments Y_i: the diagonal sum
// grows like n while the spatial norm of the same family grows like sqrt(n),
// so no spatial-norm bound can control the diagonal uniformly. ns must be
// increasing; one row per requested n.
std::vector<IncrementGrowthRow> nonextension_demo(const std::vector<std::size_t>& ns,
                                                  const Space& s, std::uint64_t seed);

StudyTable increment_growth_table(const std::vector<IncrementGrowthRow>& rows);

// ---------------------------------------------------------------------------
// Convergence studies over dyadic interpolation meshes.

struct ConvergenceStudyResult {
  StudyTable table;                   // one row per (path, mesh)
  std::vector<double> mesh;           // mesh size per knot count
  std::vector<double> mean_distance;  // distance averaged over paths
  RateFit fit;                        // fitted on the means
  bool decreasing = false;            // means decrease within noise factor 1.2
};

struct AreaStudyConfig {
  int dim = 16;
  std::size_t fine_steps = 256;
  std::vector<std::size_t> knot_counts = {8, 16, 32, 64};
  double gamma = 0.4;
  double horizon = 1.0;
  std::uint64_t seed = 1;
  std::size_t paths = 2;          // independent drivers, path ids 0..paths-1
  std::size_t compare_steps = 4;  // pairs are drawn from this coarse grid
  std::size_t probes = 2;         // identity probe plus seeded unit-size ones
};

// Distance between the exact area of the interpolated path and the
// Stratonovich area of the underlying free path:
//   sup over probe tensors and comparison pairs of
//     |Xn_{st}[U] - X^S_{st}[U]| / (t-s)^{2 gamma}
// per path and knot count. Meshes halve left to right in knot_counts, so the
// distances should trend down with a positive fitted rate.
ConvergenceStudyResult area_convergence_study(const AreaStudyConfig& cfg);

struct SolutionStudyConfig {
  int dim = 16;
  std::size_t fine_steps = 256;
  std::vector<std::size_t> knot_counts = {4, 8, 16, 32};
  std::size_t solve_steps = 0;  // mesh of both solves; 0 means the fine grid
  // Additive plus resolvent flow. Beware picking coefficients with a first
  // integral (a single f = x turns the equation into an exact resolvent, and
  // the classical leg then matches the rough one at shared grid points for
  // every mesh).
  std::vector<FunctionSpec> fs = {FunctionSpec::constant(1.0),
                                  FunctionSpec::polynomial({0.0, 0.5})};
  std::vector<FunctionSpec> gs;  // empty: reversed adjoint pairing of fs
  double start_scale = 0.25;     // start = scale * identity
  double gamma = 0.4;
  double horizon = 0.5;
  std::uint64_t seed = 1;
  std::size_t paths = 2;
};

// Classical solutions driven by interpolated paths against the rough solution
// driven by the original path with its Stratonovich area. The classical leg
// uses the smooth (Lebesgue) area of the interpolated path; both legs run the
// same scheme on the same solver mesh so their shared discretization error
// cancels in the difference. Distances are gamma-Hoelder norms of the
// difference on the coarsest knot grid, which every finer dyadic mesh
// contains.
ConvergenceStudyResult solution_convergence_study(const SolutionStudyConfig& cfg);

// ---------------------------------------------------------------------------
// Seminorm growth under driver dilation.

struct BoundStudyResult {
  StudyTable table;               // amplitude, driver Hoelder, area proxy, seminorm
  double fitted_exponent = 0.0;   // log-log slope over all but the largest amplitude
  double predicted_factor = 0.0;  // 2^exponent
  double measured_factor = 0.0;   // seminorm ratio across the final doubling
  bool within(double slack = 1.5) const {
    return measured_factor <= slack * predicted_factor;
  }
};

struct BoundStudyConfig {
  int dim = 16;
  std::size_t fine_steps = 256;
  std::size_t solve_steps = 64;
  std::vector<FunctionSpec> fs = {FunctionSpec::identity()};
  std::vector<FunctionSpec> gs;           // empty: reversed adjoint pairing
  double start_scale = 0.25;
  double gamma = 0.4;
  double horizon = 0.25;
  std::uint64_t seed = 1;
  std::vector<double> amplitudes = {0.25, 0.5, 1.0, 2.0};  // increasing, last = 2 * previous
};

// Solves the same equation with the driver scaled by each amplitude and
// records the solution seminorm next to the driver's Hoelder norm and an area
// size proxy. The seminorm is polynomially bounded in those inputs, so the
// growth across the final doubling should stay within the power-law
// prediction fitted on the smaller amplitudes.
BoundStudyResult bound_growth_study(const BoundStudyConfig& cfg);

}  // namespace ncrough
