#pragma once

#include <cstddef>
#include <vector>

#include "ncrough/algebra.hpp"
#include "ncrough/funcalc.hpp"
#include "ncrough/rough.hpp"
#include "ncrough/tensors.hpp"

namespace ncrough {

// A path expanded to first order against a driving path:
//   (delta Y)_{st} = Yx_s # (delta X)_{st} + remainder of order 2 gamma.
// The process lives on a sub-grid of the driver, recorded as driver indices.
// The driver is viewed, not owned, and must outlive the process.
struct ControlledProcess {
  const GridPath* driver = nullptr;
  std::vector<std::size_t> indices;   // increasing positions in the driver grid
  GridPath y;                         // value at each position
  std::vector<TensorElement2> deriv;  // Yx at each position, nested config
  bool self_adjoint = false;          // producer verified the starred shape

  std::size_t points() const { return indices.size(); }

  // remainder (delta Y)_{st} - Yx_i # (delta X)_{st} between positions i < j
  AlgebraElement residual(std::size_t i, std::size_t j) const;

  // max over positions of |Y_k - Y_k^*|; tensor defects are the caller's business
  double self_adjoint_defect() const;
};

// The driver itself as a controlled process on the given positions:
// Y = X with derivative 1 (x) 1.
ControlledProcess controlled_lift_of_driver(const GridPath& driver,
                                            std::vector<std::size_t> indices);

// The two g-lists that keep solutions self-adjoint: entries starred, in the
// same order or reversed.
std::vector<FunctionSpec> adjoint_pairing(const std::vector<FunctionSpec>& fs, bool reversed);

// The controlled biprocess of the integrand sum_i f_i(Y) dX g_i(Y):
//   U_s  = sum_i f_i(Y_s) (x) g_i(Y_s)
//   U1_s = sum_i [d f_i(Y_s) . Yx_s] (x) g_i(Y_s)   contracted against the area
//   U2_s = sum_i f_i(Y_s) (x) [d g_i(Y_s) . Yx_s]   contracted against the starred area
// Term lists are compressed at 1e-10 before the rank-3 assembly. The biprocess
// holds its own copies of the lift data; accessors take driver indices and are
// defined at the process positions, which must be uniformly spaced from index 0.
ControlledBiprocess lift_integrand(const std::vector<FunctionSpec>& fs,
                                   const std::vector<FunctionSpec>& gs,
                                   const ControlledProcess& y,
                                   const DerivativeOptions& dopts = {});

struct SdeScheme {
  enum class Kind { OneStep, Picard };
  Kind kind = Kind::OneStep;
  std::size_t iterations = 16;     // picard cap
  double tol = 1e-10;              // picard fixed-point gap target
  bool check_self_adjoint = true;  // require a self-adjoint start and an adjoint pairing
  DerivativeOptions derivatives;
};

struct SdeResult {
  ControlledProcess solution;
  std::vector<double> gaps;  // picard sup-norm gap per iteration, empty for one-step
  double final_gap = 0.0;
  bool converged = true;     // picard: reached tol before exhausting iterations
};

// Grid solution of dY = sum_i f_i(Y) dX g_i(Y), Y_0 = start, driven by the
// area's path over the coarse positions.
//   one-step   Y_{k+1} = Y_k + U_k # dX + [area x Id](U1_k) + [Id x area*](U2_k)
//   picard     fixed-point iteration of (corrected integral of the lifted
//              integrand) from the constant path, gap history reported
// The two agree within a small multiple of the final picard gap. With
// check_self_adjoint the g-list must be an adjoint pairing of the f-list and
// the start self-adjoint; the computed trajectory is not symmetrized, so its
// defect is an honest quality measure. Three consecutive gap increases abort
// the picard loop with a divergence error carrying the history.
SdeResult solve_rough_sde(const AlgebraElement& start, const std::vector<FunctionSpec>& fs,
                          const std::vector<FunctionSpec>& gs, const LevyArea& area,
                          const std::vector<std::size_t>& coarse, const SdeScheme& scheme = {});

// Grid solution of the trace-coefficient equation dY = phi(f(Y)) dX:
//   Y_{k+1} = Y_k + c_k dX + c_k s_k,  c_k = Re phi(f(Y_k)),
// where s_k realizes the iterated-integral correction
// int phi(df(Y_k) # (X_u - X_s)) dX_u through the componentwise tensor area
// and trace cyclicity. Requires a self-adjoint start and a real f (real
// polynomial coefficients, or atoms closed under (xi, w) -> (-xi, conj w)).
GridPath solve_trace_sde(const AlgebraElement& start, const FunctionSpec& f,
                         const LevyArea& area, const std::vector<std::size_t>& coarse);

// The controlled-process seminorm at exponent gamma: path Hoelder norm, sup
// and Hoelder norm of the derivative (projective upper bound), and the
// two-parameter Hoelder norm of the remainder at 2 gamma.
struct SeminormRecord {
  double gamma = 0.0;
  double path_holder = 0.0;
  double deriv_sup = 0.0;
  double deriv_holder = 0.0;
  double residual_holder2 = 0.0;
  double total = 0.0;  // sum of the four components
};

SeminormRecord controlled_seminorm(const ControlledProcess& y, double gamma);

}  // namespace ncrough
