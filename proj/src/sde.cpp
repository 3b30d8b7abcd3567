#include "ncrough/sde.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <string>
#include <utility>

#include "ncrough/errors.hpp"

namespace ncrough {

namespace {

constexpr double kLiftCompressTol = 1e-10;
constexpr double kSelfAdjointTol = 1e-10;

// One grid point of the lifted integrand sum_i f_i(Y) dX g_i(Y).
struct LiftPoint {
  TensorElement2 u;
  TensorElement3 left;
  TensorElement3 right;
};

// Value of the lift alone: sum_i f_i(y) (x) g_i(y), compressed.
TensorElement2 lift_value(const std::vector<FunctionSpec>& fs, const std::vector<FunctionSpec>& gs,
                          const AlgebraElement& y) {
  TensorElement2 u(Space{y.dim()}, TensorConfig::Config2);
  for (std::size_t i = 0; i < fs.size(); ++i)
    u.add_term(apply_function(fs[i], y), apply_function(gs[i], y));
  return compress(u, kLiftCompressTol);
}

// Full lift at one point. When yx is null the point's own lift value serves
// as the controlling derivative, which is the solution's structure.
LiftPoint lift_point(const std::vector<FunctionSpec>& fs, const std::vector<FunctionSpec>& gs,
                     const AlgebraElement& y, const TensorElement2* yx,
                     const DerivativeOptions& dopts) {
  const Space sp{y.dim()};
  LiftPoint out{TensorElement2(sp, TensorConfig::Config2),
                TensorElement3(sp, TensorConfig::Config2),
                TensorElement3(sp, TensorConfig::Config2)};
  std::vector<AlgebraElement> fv, gv;
  fv.reserve(fs.size());
  gv.reserve(gs.size());
  for (std::size_t i = 0; i < fs.size(); ++i) {
    fv.push_back(apply_function(fs[i], y));
    gv.push_back(apply_function(gs[i], y));
    out.u.add_term(fv[i], gv[i]);
  }
  out.u = compress(out.u, kLiftCompressTol);
  const TensorElement2& control = yx ? *yx : out.u;
  if (control.is_zero()) return out;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    TensorElement2 df = tensor_derivative(fs[i], y, dopts);
    if (!df.is_zero())
      out.left += outer_right(compress(tensor_mul(df, control), kLiftCompressTol), gv[i]);
    TensorElement2 dg = tensor_derivative(gs[i], y, dopts);
    if (!dg.is_zero())
      out.right += outer_left(fv[i], compress(tensor_mul(dg, control), kLiftCompressTol));
  }
  return out;
}

// U # dX plus the two area contractions over one coarse cell.
AlgebraElement corrected_step(const LiftPoint& l, const LevyArea& area, std::size_t i,
                              std::size_t j) {
  const GridPath& x = area.path();
  AlgebraElement out = sharp_apply(l.u, x.values[j] - x.values[i]);
  if (!l.left.is_zero()) out = out + area.contract_left(l.left, i, j);
  if (!l.right.is_zero()) out = out + area.contract_right(l.right, i, j);
  return out;
}

void validate_positions(const LevyArea& area, const std::vector<std::size_t>& coarse,
                        const char* who) {
  if (coarse.size() < 2) throw UsageError(std::string(who) + ": need at least two positions");
  const GridPath& x = area.path();
  for (std::size_t k = 0; k < coarse.size(); ++k) {
    if (coarse[k] >= x.points())
      throw UsageError(std::string(who) + ": position beyond the driving path");
    if (k > 0 && coarse[k] <= coarse[k - 1])
      throw UsageError(std::string(who) + ": positions must increase");
    if (!area.supports(coarse[k]))
      throw UsageError(std::string(who) + ": position not supported by the area");
  }
}

bool atoms_symmetric(const std::vector<FourierAtom>& atoms) {
  std::vector<bool> used(atoms.size(), false);
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (used[i]) continue;
    bool matched = false;
    for (std::size_t j = i; j < atoms.size(); ++j) {
      if (used[j]) continue;
      const bool xi_ok =
          std::abs(atoms[j].xi + atoms[i].xi) <= 1e-12 * (1.0 + std::abs(atoms[i].xi));
      const bool w_ok =
          std::abs(atoms[j].w - std::conj(atoms[i].w)) <= 1e-12 * (1.0 + std::abs(atoms[i].w));
      if (xi_ok && w_ok) {
        used[i] = used[j] = true;
        matched = true;
        break;
      }
    }
    if (!matched) return false;
  }
  return true;
}

}  // namespace

AlgebraElement ControlledProcess::residual(std::size_t i, std::size_t j) const {
  if (driver == nullptr) throw UsageError("residual: process has no driver");
  if (j >= points() || i >= j) throw UsageError("residual: need positions i < j in range");
  const AlgebraElement dx = driver->values[indices[j]] - driver->values[indices[i]];
  return y.values[j] - y.values[i] - sharp_apply(deriv[i], dx);
}

double ControlledProcess::self_adjoint_defect() const {
  double worst = 0.0;
  for (const AlgebraElement& v : y.values) worst = std::max(worst, op_norm(v - v.adjoint()));
  return worst;
}

ControlledProcess controlled_lift_of_driver(const GridPath& driver,
                                            std::vector<std::size_t> indices) {
  driver.check();
  if (indices.empty()) throw UsageError("controlled_lift_of_driver: empty position list");
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= driver.points())
      throw UsageError("controlled_lift_of_driver: position beyond the path");
    if (k > 0 && indices[k] <= indices[k - 1])
      throw UsageError("controlled_lift_of_driver: positions must increase");
  }
  ControlledProcess out;
  out.driver = &driver;
  out.indices = std::move(indices);
  out.y = restrict_path(driver, out.indices);
  const Space sp{driver.dim()};
  out.deriv.assign(out.points(), TensorElement2::identity(sp, TensorConfig::Config2));
  out.self_adjoint = out.self_adjoint_defect() <= 1e-12;
  return out;
}

std::vector<FunctionSpec> adjoint_pairing(const std::vector<FunctionSpec>& fs, bool reversed) {
  std::vector<FunctionSpec> out;
  out.reserve(fs.size());
  if (reversed) {
    for (auto it = fs.rbegin(); it != fs.rend(); ++it) out.push_back(star(*it));
  } else {
    for (const FunctionSpec& f : fs) out.push_back(star(f));
  }
  return out;
}

ControlledBiprocess lift_integrand(const std::vector<FunctionSpec>& fs,
                                   const std::vector<FunctionSpec>& gs,
                                   const ControlledProcess& y, const DerivativeOptions& dopts) {
  if (fs.size() != gs.size()) throw UsageError("lift_integrand: f and g lists differ in length");
  if (y.driver == nullptr) throw UsageError("lift_integrand: process has no driver");
  const std::size_t n = y.points();
  if (n == 0 || y.y.points() != n || y.deriv.size() != n)
    throw UsageError("lift_integrand: inconsistent controlled process");
  if (y.indices.front() != 0)
    throw UsageError("lift_integrand: process must start at driver index 0");
  const std::size_t stride = n > 1 ? y.indices[1] - y.indices[0] : 1;
  if (stride == 0) throw UsageError("lift_integrand: repeated process positions");
  for (std::size_t k = 0; k < n; ++k)
    if (y.indices[k] != k * stride)
      throw UsageError("lift_integrand: positions must be uniformly spaced");

  auto data = std::make_shared<std::vector<LiftPoint>>();
  data->reserve(n);
  for (std::size_t k = 0; k < n; ++k)
    data->push_back(lift_point(fs, gs, y.y.values[k], &y.deriv[k], dopts));

  auto at = [data, stride, n](std::size_t k) -> const LiftPoint& {
    if (k % stride != 0 || k / stride >= n)
      throw UsageError("lifted integrand: index off the process grid");
    return (*data)[k / stride];
  };
  ControlledBiprocess bip;
  bip.path = y.driver;
  bip.stride = stride;
  bip.value_at = [at](std::size_t k) { return at(k).u; };
  bip.left_at = [at](std::size_t k) { return at(k).left; };
  bip.right_at = [at](std::size_t k) { return at(k).right; };
  return bip;
}

SdeResult solve_rough_sde(const AlgebraElement& start, const std::vector<FunctionSpec>& fs,
                          const std::vector<FunctionSpec>& gs, const LevyArea& area,
                          const std::vector<std::size_t>& coarse, const SdeScheme& scheme) {
  if (fs.size() != gs.size())
    throw UsageError("solve_rough_sde: f and g lists differ in length");
  validate_positions(area, coarse, "solve_rough_sde");
  const GridPath& x = area.path();
  if (start.dim() != x.dim())
    throw UsageError("solve_rough_sde: start dimension differs from the path");
  if (scheme.check_self_adjoint) {
    if (op_norm(start - start.adjoint()) > kSelfAdjointTol)
      throw UsageError("solve_rough_sde: start is not self-adjoint");
    if (!(gs == adjoint_pairing(fs, false) || gs == adjoint_pairing(fs, true)))
      throw UsageError("solve_rough_sde: g-list is not an adjoint pairing of the f-list");
  }

  const std::size_t n = coarse.size();
  SdeResult res;
  std::vector<AlgebraElement> vals;

  if (scheme.kind == SdeScheme::Kind::OneStep) {
    vals.reserve(n);
    vals.push_back(start);
    res.solution.deriv.reserve(n);
    for (std::size_t k = 0; k + 1 < n; ++k) {
      LiftPoint l = lift_point(fs, gs, vals.back(), nullptr, scheme.derivatives);
      vals.push_back(vals.back() + corrected_step(l, area, coarse[k], coarse[k + 1]));
      res.solution.deriv.push_back(std::move(l.u));
    }
    res.solution.deriv.push_back(lift_value(fs, gs, vals.back()));
    res.converged = true;
  } else {
    std::vector<AlgebraElement> cur(n, start);
    std::vector<TensorElement2> curd(n, lift_value(fs, gs, start));
    std::size_t growth = 0;
    double prev = std::numeric_limits<double>::infinity();
    res.converged = false;
    for (std::size_t it = 0; it < scheme.iterations; ++it) {
      std::vector<AlgebraElement> next;
      std::vector<TensorElement2> nextd;
      next.reserve(n);
      nextd.reserve(n);
      next.push_back(start);
      for (std::size_t k = 0; k + 1 < n; ++k) {
        LiftPoint l = lift_point(fs, gs, cur[k], &curd[k], scheme.derivatives);
        next.push_back(next.back() + corrected_step(l, area, coarse[k], coarse[k + 1]));
        nextd.push_back(std::move(l.u));
      }
      nextd.push_back(lift_value(fs, gs, cur[n - 1]));
      double gap = 0.0;
      for (std::size_t k = 0; k < n; ++k) gap = std::max(gap, op_norm(next[k] - cur[k]));
      res.gaps.push_back(gap);
      cur = std::move(next);
      curd = std::move(nextd);
      if (gap < scheme.tol) {
        res.converged = true;
        break;
      }
      growth = gap > prev ? growth + 1 : 0;
      if (growth >= 3) {
        std::string msg = "picard iteration diverging; gap history:";
        char buf[32];
        for (double g : res.gaps) {
          std::snprintf(buf, sizeof buf, " %.3e", g);
          msg += buf;
        }
        throw DivergenceError(msg);
      }
      prev = gap;
    }
    vals = std::move(cur);
    res.solution.deriv.reserve(n);
    for (const AlgebraElement& v : vals) res.solution.deriv.push_back(lift_value(fs, gs, v));
  }

  res.solution.driver = &x;
  res.solution.indices = coarse;
  res.solution.self_adjoint = scheme.check_self_adjoint;
  res.solution.y.times.reserve(n);
  for (std::size_t idx : coarse) res.solution.y.times.push_back(x.times[idx]);
  res.solution.y.values = std::move(vals);
  res.final_gap = res.gaps.empty() ? 0.0 : res.gaps.back();
  return res;
}

GridPath solve_trace_sde(const AlgebraElement& start, const FunctionSpec& f,
                         const LevyArea& area, const std::vector<std::size_t>& coarse) {
  validate_positions(area, coarse, "solve_trace_sde");
  const GridPath& x = area.path();
  if (start.dim() != x.dim())
    throw UsageError("solve_trace_sde: start dimension differs from the path");
  if (op_norm(start - start.adjoint()) > kSelfAdjointTol)
    throw UsageError("solve_trace_sde: start is not self-adjoint");
  if (f.kind() == FunctionSpec::Kind::Polynomial) {
    for (Complex c : f.coeffs())
      if (c.imag() != 0.0)
        throw UsageError("solve_trace_sde: polynomial coefficients must be real");
  } else if (!atoms_symmetric(f.atoms())) {
    throw UsageError("solve_trace_sde: atoms must be closed under (xi, w) -> (-xi, conj w)");
  }

  const Space sp{start.dim()};
  const AlgebraElement one = AlgebraElement::identity(sp);
  GridPath out;
  out.times.reserve(coarse.size());
  for (std::size_t idx : coarse) out.times.push_back(x.times[idx]);
  out.values.reserve(coarse.size());
  out.values.push_back(start);
  for (std::size_t k = 0; k + 1 < coarse.size(); ++k) {
    const AlgebraElement& yk = out.values.back();
    const double ck = normalized_trace(apply_function(f, yk)).real();
    AlgebraElement next = yk + ck * (x.values[coarse[k + 1]] - x.values[coarse[k]]);
    const TensorElement2 df = tensor_derivative(f, yk);
    if (!df.is_zero()) {
      TensorElement2 ba(sp, TensorConfig::Config1);
      for (const TensorTerm2& t : df.terms()) ba.add_term(t.v * t.u, one);
      const TensorElement2 t_area = tensor_area(x, coarse[k], coarse[k + 1]);
      if (!t_area.is_zero())
        next = next + ck * partial_trace(tensor_mul(ba, t_area), Side::Left);
    }
    out.values.push_back(std::move(next));
  }
  return out;
}

SeminormRecord controlled_seminorm(const ControlledProcess& y, double gamma) {
  const std::size_t n = y.points();
  if (n == 0) throw UsageError("controlled_seminorm: empty process");
  if (y.y.points() != n || y.deriv.size() != n)
    throw UsageError("controlled_seminorm: inconsistent process");
  if (!(gamma > 0.0) || gamma > 1.0)
    throw UsageError("controlled_seminorm: gamma must lie in (0, 1]");
  if (n > kHolderNormMaxPoints) throw SizeError("controlled_seminorm: too many grid points");

  SeminormRecord rec;
  rec.gamma = gamma;
  rec.path_holder = holder_norm(y.y, gamma);
  for (const TensorElement2& d : y.deriv) rec.deriv_sup = std::max(rec.deriv_sup, proj_ub(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dt = y.y.times[j] - y.y.times[i];
      const double dg = proj_ub(compress(y.deriv[j] - y.deriv[i], 1e-12));
      rec.deriv_holder = std::max(rec.deriv_holder, dg / std::pow(dt, gamma));
      const double rr = op_norm(y.residual(i, j));
      rec.residual_holder2 = std::max(rec.residual_holder2, rr / std::pow(dt, 2.0 * gamma));
    }
  }
  rec.total = rec.path_holder + rec.deriv_sup + rec.deriv_holder + rec.residual_holder2;
  return rec;
}

}  // namespace ncrough
