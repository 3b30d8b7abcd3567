#pragma once

#include <cstdint>
#include <vector>

#include "ncrough/algebra.hpp"

namespace ncrough {

// Two multiplication conventions for formal tensors over the matrix algebra.
//
//   Config1: componentwise product, (u1 (x) u2)(v1 (x) v2) = (u1 v1) (x) (u2 v2),
//            adjoint acts leg by leg.
//   Config2: nested product, (u1 (x) u2)(v1 (x) v2) = (u1 v1) (x) (v2 u2),
//            adjoint swaps the legs, (u (x) v)* = v* (x) u*.  Under this
//            convention the contraction U#[V#X] = (U V)#X holds and the
//            adjoint is multiplicative, (U V)* = U* V*.
enum class TensorConfig { Config1, Config2 };

enum class Side { Left, Right };

struct TensorTerm2 {
  AlgebraElement u, v;
};

struct TensorTerm3 {
  AlgebraElement u, v, w;
};

// Formal sum of elementary tensors u (x) v with a configuration tag.
// An empty term list is the zero tensor.  Values are cheap to copy at desk
// scale and all free operations treat them as immutable.
class TensorElement2 {
 public:
  TensorElement2(Space space, TensorConfig config);
  TensorElement2(Space space, TensorConfig config, std::vector<TensorTerm2> terms);

  static TensorElement2 pure(const AlgebraElement& u, const AlgebraElement& v,
                             TensorConfig config);
  static TensorElement2 identity(Space space, TensorConfig config);  // 1 (x) 1

  Space space() const { return space_; }
  int dim() const { return space_.dim; }
  TensorConfig config() const { return config_; }
  const std::vector<TensorTerm2>& terms() const { return terms_; }
  std::size_t term_count() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }  // structural, not numerical

  void add_term(const AlgebraElement& u, const AlgebraElement& v);

  TensorElement2& operator+=(const TensorElement2& other);
  TensorElement2& operator-=(const TensorElement2& other);
  TensorElement2& operator*=(Complex c);

  // Content hash of (config, dim, all matrix entries); cached until the value
  // is next mutated.  Used as a cache key by the area evaluators.
  std::uint64_t fingerprint() const;

 private:
  Space space_;
  TensorConfig config_;
  std::vector<TensorTerm2> terms_;
  mutable std::uint64_t fp_ = 0;
  mutable bool fp_valid_ = false;
};

// Formal sum of elementary tensors u (x) v (x) w, same conventions.
class TensorElement3 {
 public:
  TensorElement3(Space space, TensorConfig config);
  TensorElement3(Space space, TensorConfig config, std::vector<TensorTerm3> terms);

  static TensorElement3 pure(const AlgebraElement& u, const AlgebraElement& v,
                             const AlgebraElement& w, TensorConfig config);

  Space space() const { return space_; }
  int dim() const { return space_.dim; }
  TensorConfig config() const { return config_; }
  const std::vector<TensorTerm3>& terms() const { return terms_; }
  std::size_t term_count() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }

  void add_term(const AlgebraElement& u, const AlgebraElement& v,
                const AlgebraElement& w);

  TensorElement3& operator+=(const TensorElement3& other);
  TensorElement3& operator-=(const TensorElement3& other);
  TensorElement3& operator*=(Complex c);

  std::uint64_t fingerprint() const;

 private:
  Space space_;
  TensorConfig config_;
  std::vector<TensorTerm3> terms_;
  mutable std::uint64_t fp_ = 0;
  mutable bool fp_valid_ = false;
};

TensorElement2 operator+(TensorElement2 a, const TensorElement2& b);
TensorElement2 operator-(TensorElement2 a, const TensorElement2& b);
TensorElement2 operator*(Complex c, TensorElement2 a);
TensorElement2 operator*(TensorElement2 a, Complex c);
TensorElement3 operator+(TensorElement3 a, const TensorElement3& b);
TensorElement3 operator-(TensorElement3 a, const TensorElement3& b);
TensorElement3 operator*(Complex c, TensorElement3 a);

// Refuses products whose term list would exceed this many terms; compress
// first if a product legitimately needs to be this large.
inline constexpr std::size_t kTensorTermBudget = 1u << 16;

// Product under the tag's convention; bilinear over the term lists.
// Mismatched configs or spaces are usage errors.
TensorElement2 tensor_mul(const TensorElement2& a, const TensorElement2& b);

// Config1: termwise u* (x) v*.  Config2: termwise v* (x) u*.
TensorElement2 tensor_adjoint(const TensorElement2& a);

// (u (x) v)#X = u X v, summed over terms.
AlgebraElement sharp_apply(const TensorElement2& u, const AlgebraElement& x);

// Contractions of a rank-3 tensor against an algebra element:
//   Side::Left   X#(u (x) v (x) w) = (u X v) (x) w
//   Side::Right  (u (x) v (x) w)#X = u (x) (v X w)
// The result keeps the input's configuration tag.
TensorElement2 tri_sharp(const AlgebraElement& x, const TensorElement3& t, Side side);

// Partial traces under the normalized trace phi:
//   Side::Left   sum phi(u) v      Side::Right  sum phi(v) u
AlgebraElement partial_trace(const TensorElement2& u, Side side);

// Middle trace of a rank-3 tensor: sum phi(v) u w.
AlgebraElement partial_trace_mid(const TensorElement3& t);

// Psi_U: acts on Y = sum y (x) z termwise as (U#y) (x) z.  The result keeps
// Y's configuration tag; U's tag is irrelevant because # ignores it.
TensorElement2 psi_map(const TensorElement2& u, const TensorElement2& y);

// Dense N^2 x N^2 matrix of the tensor:
//   Config1 terms map to kron(u, v), Config2 terms to kron(u, v^T).
// Both maps are algebra homomorphisms for their product convention, and the
// Config2 matrix acts on row-major vec(X) as the # action.  Guarded by
// max_dim because the output is dense.
inline constexpr int kFlattenDimLimit = 32;
Matrix flatten(const TensorElement2& u, int max_dim = kFlattenDimLimit);

struct SpatialNormOptions {
  int dense_dim_limit = 16;  // up to here: flatten and take the exact top singular value
  int dim_limit = 128;       // refuse larger algebras unless raised explicitly
  int max_basis = 120;       // Krylov basis size per restart
  int max_restarts = 8;
  double tol = 1e-9;         // relative accuracy of the returned value
};

// Largest singular value of the flattened tensor.  Small algebras go through
// the dense matrix; larger ones use a matrix-free Krylov iteration on the
// Gram operator of the flattening, which never forms the N^2 x N^2 matrix.
double spatial_norm(const TensorElement2& u, const SpatialNormOptions& opts = {});

// Sum of ||u_i|| ||v_i|| over the current representation: an upper bound for
// the projective tensor norm (the infimum over representations is not
// computed).
double proj_ub(const TensorElement2& u);

// Shorter representation of the same tensor: at most min(#terms, N^2) terms,
// acting identically as X -> U#X up to `tol` in operator norm (the dropped
// singular-value mass is at most tol).  Returns the input unchanged when no
// terms can be saved or when the rewrite would more than double proj_ub.
TensorElement2 compress(const TensorElement2& u, double tol);

// Append one algebra factor to a rank-2 tensor:
//   outer_right: (u (x) v, g) -> u (x) v (x) g
//   outer_left:  (f, u (x) v) -> f (x) u (x) v
TensorElement3 outer_right(const TensorElement2& a, const AlgebraElement& g);
TensorElement3 outer_left(const AlgebraElement& f, const TensorElement2& a);

}  // namespace ncrough
