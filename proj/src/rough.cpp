#include "ncrough/rough.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <ostream>

#include "ncrough/rng.hpp"

namespace ncrough {

TwoParamGrid::TwoParamGrid(std::vector<double> times, const Space& s)
    : times_(std::move(times)), space_(s) {
  if (times_.empty()) throw UsageError("TwoParamGrid: empty time grid");
  if (times_.size() > kTwoParamMaxPoints)
    throw SizeError("TwoParamGrid: " + std::to_string(times_.size()) +
                    " points exceed the dense-pair cap of " +
                    std::to_string(kTwoParamMaxPoints));
  for (std::size_t i = 0; i + 1 < times_.size(); ++i)
    if (!(times_[i] < times_[i + 1]))
      throw UsageError("TwoParamGrid: times must be strictly increasing");
  values_.assign(times_.size() * (times_.size() - 1) / 2, AlgebraElement::zero(space_));
}

std::size_t TwoParamGrid::offset(std::size_t i, std::size_t j) const {
  if (j >= times_.size() || i >= j)
    throw UsageError("TwoParamGrid: pair (" + std::to_string(i) + ", " + std::to_string(j) +
                     ") is not below the diagonal of " + std::to_string(times_.size()) +
                     " points");
  return j * (j - 1) / 2 + i;
}

AlgebraElement& TwoParamGrid::at(std::size_t i, std::size_t j) { return values_[offset(i, j)]; }

const AlgebraElement& TwoParamGrid::at(std::size_t i, std::size_t j) const {
  return values_[offset(i, j)];
}

AlgebraElement TwoParamGrid::value(std::size_t i, std::size_t j) const {
  if (i == j && i < times_.size()) return AlgebraElement::zero(space_);
  return values_[offset(i, j)];
}

void write_two_param_csv(const TwoParamGrid& g, std::ostream& out) {
  out << "s,t,op_norm,trace_re,trace_im\r\n";
  char line[200];
  for (std::size_t j = 1; j < g.points(); ++j)
    for (std::size_t i = 0; i < j; ++i) {
      const AlgebraElement& v = g.at(i, j);
      const Complex tr = normalized_trace(v);
      std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g\r\n", g.times()[i],
                    g.times()[j], op_norm(v), tr.real(), tr.imag());
      out << line;
    }
}

TwoParamGrid delta1(const GridPath& p) {
  p.check();
  TwoParamGrid g(p.times, Space{p.dim()});
  for (std::size_t j = 1; j < p.points(); ++j)
    for (std::size_t i = 0; i < j; ++i) g.at(i, j) = p.values[j] - p.values[i];
  return g;
}

AlgebraElement Delta2View::operator()(std::size_t i, std::size_t u, std::size_t j) const {
  if (!(i <= u && u <= j))
    throw UsageError("delta2: midpoint index must sit between the endpoints");
  return grid_->value(i, j) - grid_->value(i, u) - grid_->value(u, j);
}

double holder2_norm(const TwoParamGrid& g, double alpha) {
  if (alpha < 0.0) throw UsageError("holder2_norm: exponent must be nonnegative");
  double best = 0.0;
  for (std::size_t j = 1; j < g.points(); ++j)
    for (std::size_t i = 0; i < j; ++i) {
      const double dt = g.times()[j] - g.times()[i];
      best = std::max(best, op_norm(g.at(i, j)) / std::pow(dt, alpha));
    }
  return best;
}

double holder3_norm(const Delta2View& h, double alpha, double beta) {
  if (alpha < 0.0 || beta < 0.0) throw UsageError("holder3_norm: exponents must be nonnegative");
  const TwoParamGrid& g = h.grid();
  if (g.points() > kHolder3MaxPoints)
    throw SizeError("holder3_norm: " + std::to_string(g.points()) +
                    " points exceed the triple-scan cap of " +
                    std::to_string(kHolder3MaxPoints));
  double best = 0.0;
  for (std::size_t i = 0; i < g.points(); ++i)
    for (std::size_t u = i + 1; u < g.points(); ++u)
      for (std::size_t j = u + 1; j < g.points(); ++j) {
        const double right = g.times()[j] - g.times()[u];
        const double left = g.times()[u] - g.times()[i];
        best = std::max(best,
                        op_norm(h(i, u, j)) / (std::pow(right, alpha) * std::pow(left, beta)));
      }
  return best;
}

LevyArea::LevyArea(const GridPath& fine, AreaKind kind, std::size_t stride)
    : path_(&fine), kind_(kind), stride_(stride) {
  fine.check();
  if (fine.points() < 2) throw UsageError("LevyArea: need at least two grid points");
  if (kind_ == AreaKind::Interpolated) {
    if (stride_ == 0 || fine.steps() % stride_ != 0)
      throw UsageError("LevyArea: interpolation stride must divide the step count");
  } else {
    if (stride_ != 1)
      throw UsageError("LevyArea: stride applies to the interpolated variant only");
  }
}

bool LevyArea::supports(std::size_t idx) const {
  if (idx >= path_->points()) return false;
  return kind_ != AreaKind::Interpolated || idx % stride_ == 0;
}

void LevyArea::require_supported(std::size_t i, std::size_t j) const {
  if (i > j) throw UsageError("LevyArea: reversed evaluation interval");
  if (!supports(i) || !supports(j))
    throw UsageError("LevyArea: index off the supported grid (" + std::to_string(i) + ", " +
                     std::to_string(j) + ")");
}

std::size_t LevyArea::KeyHash::operator()(const Key& k) const {
  return static_cast<std::size_t>(hash_mix64(k.fp ^ hash_mix64(k.i ^ hash_mix64(k.j))));
}

AlgebraElement LevyArea::eval(const TensorElement2& u, std::size_t i, std::size_t j) const {
  if (u.config() != TensorConfig::Config2)
    throw UsageError("LevyArea: areas act on nested-configuration tensors");
  if (u.space().dim != path_->dim()) throw UsageError("LevyArea: dimension mismatch");
  require_supported(i, j);
  if (i == j) return AlgebraElement::zero(u.space());

  const Key key{i, j, u.fingerprint()};
  {
    std::shared_lock<std::shared_mutex> lock(mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return AlgebraElement(it->second);
  }
  AlgebraElement out = eval_uncached(u, i, j);
  {
    std::unique_lock<std::shared_mutex> lock(mutex_);
    cache_.emplace(key, out.matrix());
  }
  return out;
}

AlgebraElement LevyArea::eval_uncached(const TensorElement2& u, std::size_t i,
                                       std::size_t j) const {
  const std::vector<AlgebraElement>& x = path_->values;
  const int n = path_->dim();
  Matrix acc = Matrix::Zero(n, n);
  if (kind_ == AreaKind::Ito || kind_ == AreaKind::Stratonovich) {
    for (std::size_t k = i; k < j; ++k) {
      const AlgebraElement left = sharp_apply(u, x[k] - x[i]);
      acc += left.matrix() * (x[k + 1].matrix() - x[k].matrix());
    }
    if (kind_ == AreaKind::Stratonovich) {
      const double dt = path_->times[j] - path_->times[i];
      acc += 0.5 * dt * partial_trace(u, Side::Right).matrix();
    }
  } else {
    const std::size_t step = (kind_ == AreaKind::Interpolated) ? stride_ : 1;
    for (std::size_t k = i; k < j; k += step) {
      const AlgebraElement mid =
          AlgebraElement(Matrix(0.5 * (x[k].matrix() + x[k + step].matrix()))) - x[i];
      acc += sharp_apply(u, mid).matrix() * (x[k + step].matrix() - x[k].matrix());
    }
  }
  return AlgebraElement(std::move(acc));
}

AlgebraElement LevyArea::eval_star(const TensorElement2& u, std::size_t i,
                                   std::size_t j) const {
  return eval(tensor_adjoint(u), i, j).adjoint();
}

AlgebraElement LevyArea::contract_left(const TensorElement3& t, std::size_t i,
                                       std::size_t j) const {
  if (t.config() != TensorConfig::Config2)
    throw UsageError("LevyArea: areas act on nested-configuration tensors");
  Matrix acc = Matrix::Zero(t.space().dim, t.space().dim);
  for (const TensorTerm3& term : t.terms()) {
    TensorElement2 pair(t.space(), TensorConfig::Config2);
    pair.add_term(term.u, term.v);
    acc += eval(pair, i, j).matrix() * term.w.matrix();
  }
  return AlgebraElement(std::move(acc));
}

AlgebraElement LevyArea::contract_right(const TensorElement3& t, std::size_t i,
                                        std::size_t j) const {
  if (t.config() != TensorConfig::Config2)
    throw UsageError("LevyArea: areas act on nested-configuration tensors");
  Matrix acc = Matrix::Zero(t.space().dim, t.space().dim);
  for (const TensorTerm3& term : t.terms()) {
    TensorElement2 pair(t.space(), TensorConfig::Config2);
    pair.add_term(term.v, term.w);
    acc += term.u.matrix() * eval_star(pair, i, j).matrix();
  }
  return AlgebraElement(std::move(acc));
}

std::size_t LevyArea::cache_size() const {
  std::shared_lock<std::shared_mutex> lock(mutex_);
  return cache_.size();
}

TensorElement2 tensor_area(const GridPath& p, std::size_t i, std::size_t j) {
  p.check();
  if (i > j || j >= p.points()) throw UsageError("tensor_area: bad interval");
  TensorElement2 out(Space{p.dim()}, TensorConfig::Config1);
  // The first cell has a vanishing left leg and is skipped outright.
  for (std::size_t k = i + 1; k < j; ++k)
    out.add_term(p.values[k] - p.values[i], p.values[k + 1] - p.values[k]);
  return out;
}

ControlledBiprocess constant_biprocess(const GridPath& p, TensorElement2 value,
                                       TensorElement3 left, TensorElement3 right) {
  ControlledBiprocess bip;
  bip.path = &p;
  bip.stride = 1;
  bip.value_at = [value = std::move(value)](std::size_t) { return value; };
  bip.left_at = [left = std::move(left)](std::size_t) { return left; };
  bip.right_at = [right = std::move(right)](std::size_t) { return right; };
  return bip;
}

namespace {

void require_on_process_grid(const ControlledBiprocess& bip, std::size_t idx) {
  if (bip.path == nullptr) throw UsageError("controlled biprocess: no path attached");
  if (idx >= bip.path->points() || idx % bip.stride != 0)
    throw UsageError("controlled biprocess: index " + std::to_string(idx) +
                     " is not on the process grid");
}

}  // namespace

TensorElement2 biprocess_residual(const ControlledBiprocess& bip, std::size_t i,
                                  std::size_t j) {
  require_on_process_grid(bip, i);
  require_on_process_grid(bip, j);
  if (i > j) throw UsageError("biprocess_residual: reversed interval");
  const AlgebraElement dx = bip.path->values[j] - bip.path->values[i];
  TensorElement2 out = bip.value_at(j) - bip.value_at(i);
  out -= tri_sharp(dx, bip.left_at(i), Side::Left);
  out -= tri_sharp(dx, bip.right_at(i), Side::Right);
  return out;
}

AlgebraElement corrected_increment(const ControlledBiprocess& bip, const LevyArea& area,
                                   std::size_t i, std::size_t j) {
  require_on_process_grid(bip, i);
  require_on_process_grid(bip, j);
  if (bip.path != &area.path())
    throw UsageError("corrected_increment: biprocess and area use different paths");
  const AlgebraElement dx = bip.path->values[j] - bip.path->values[i];
  AlgebraElement m = sharp_apply(bip.value_at(i), dx);
  m += area.contract_left(bip.left_at(i), i, j);
  m += area.contract_right(bip.right_at(i), i, j);
  return m;
}

namespace {

struct Cascade {
  Matrix value;
  double gap = 0.0;
  bool converged = false;
  std::size_t levels = 0;
};

// Limit of sums of cell(a, b) over dyadic refinements of [i, j] by index
// midpoints snapped to multiples of g. Stops once two successive levels agree
// to within tol, or no interval can be split further.
Cascade refine_sum(std::size_t i, std::size_t j, std::size_t g,
                   const std::function<Matrix(std::size_t, std::size_t)>& cell,
                   const RefineOptions& opts) {
  Cascade out;
  std::vector<std::size_t> part{i, j};
  auto total = [&](const std::vector<std::size_t>& p) {
    Matrix acc = cell(p[0], p[1]);
    for (std::size_t k = 2; k < p.size(); ++k) acc += cell(p[k - 1], p[k]);
    return acc;
  };
  out.value = total(part);
  bool refined_any = false;
  for (std::size_t level = 1; level <= opts.max_levels; ++level) {
    std::vector<std::size_t> next;
    next.reserve(2 * part.size());
    bool split_any = false;
    for (std::size_t k = 0; k + 1 < part.size(); ++k) {
      const std::size_t a = part[k], b = part[k + 1];
      next.push_back(a);
      if (b - a >= 2 * g) {
        next.push_back(a + ((b - a) / 2 / g) * g);
        split_any = true;
      }
    }
    next.push_back(j);
    if (!split_any) break;
    refined_any = true;
    Matrix refined = total(next);
    out.gap = op_norm(AlgebraElement(Matrix(refined - out.value)));
    out.value = std::move(refined);
    out.levels = level;
    part = std::move(next);
    if (out.gap < opts.tol) break;
  }
  // An interval that admits no refinement has a trivially attained limit.
  out.converged = !refined_any || out.gap < opts.tol;
  return out;
}

}  // namespace

RoughIntegralResult rough_integral(const ControlledBiprocess& bip, const LevyArea& area,
                                   const std::vector<std::size_t>& coarse,
                                   const RefineOptions& opts) {
  if (coarse.size() < 2) throw UsageError("rough_integral: need at least two coarse points");
  if (bip.path == nullptr || bip.path != &area.path())
    throw UsageError("rough_integral: biprocess and area use different paths");
  const std::size_t g = std::lcm(bip.stride, area.stride());
  std::vector<double> times;
  for (std::size_t idx : coarse) {
    if (!area.supports(idx) || idx % bip.stride != 0)
      throw UsageError("rough_integral: coarse index " + std::to_string(idx) +
                       " is not supported by both area and biprocess");
    if (!times.empty() && bip.path->times[idx] <= times.back())
      throw UsageError("rough_integral: coarse indices must increase");
    times.push_back(bip.path->times[idx]);
  }

  RoughIntegralResult res{TwoParamGrid(times, Space{bip.path->dim()}), 0.0, true, 0};
  const auto cell = [&](std::size_t a, std::size_t b) {
    return corrected_increment(bip, area, a, b).matrix();
  };
  for (std::size_t cj = 1; cj < coarse.size(); ++cj)
    for (std::size_t ci = 0; ci < cj; ++ci) {
      Cascade c = refine_sum(coarse[ci], coarse[cj], g, cell, opts);
      res.values.at(ci, cj) = AlgebraElement(std::move(c.value));
      res.cauchy_gap = std::max(res.cauchy_gap, c.gap);
      res.converged = res.converged && c.converged;
      res.levels_used = std::max(res.levels_used, c.levels);
    }
  return res;
}

double c_sewing(double mu) {
  if (!(mu > 1.0)) throw UsageError("c_sewing: exponent must exceed 1");
  // zeta(mu) by direct summation with an Euler-Maclaurin tail.
  const int cutoff = 1000;
  double zeta = 0.0;
  for (int k = 1; k <= cutoff; ++k) zeta += std::pow(k, -mu);
  const double kk = cutoff;
  zeta += std::pow(kk, 1.0 - mu) / (mu - 1.0) - 0.5 * std::pow(kk, -mu) +
          mu * std::pow(kk, -mu - 1.0) / 12.0;
  return 2.0 + std::pow(2.0, mu) * zeta;
}

SewingResult sewing_residual(const TwoParamGrid& m, double mu, const RefineOptions& opts) {
  if (!(mu > 1.0)) throw UsageError("sewing_residual: exponent must exceed 1");
  SewingResult res{TwoParamGrid(m.times(), m.space()), c_sewing(mu), 0.0, 0.0,
                   0.0,                                 false,        0.0, true};

  const auto cell = [&](std::size_t a, std::size_t b) { return m.at(a, b).matrix(); };
  for (std::size_t j = 1; j < m.points(); ++j)
    for (std::size_t i = 0; i < j; ++i) {
      Cascade c = refine_sum(i, j, 1, cell, opts);
      res.lambda_part.at(i, j) = m.at(i, j) - AlgebraElement(std::move(c.value));
      res.cauchy_gap = std::max(res.cauchy_gap, c.gap);
      res.converged = res.converged && c.converged;
    }

  // Best Hoelder split of mu over a fixed grid of candidates.
  const Delta2View d2 = delta2(m);
  res.holder3_best = -1.0;
  for (int step = 1; step <= 9; ++step) {
    const double alpha = mu * step / 10.0;
    const double norm = holder3_norm(d2, alpha, mu - alpha);
    if (res.holder3_best < 0.0 || norm < res.holder3_best) {
      res.holder3_best = norm;
      res.best_alpha = alpha;
    }
  }

  double worst_abs = 0.0;
  for (std::size_t j = 1; j < m.points(); ++j)
    for (std::size_t i = 0; i < j; ++i) {
      const double dt = m.times()[j] - m.times()[i];
      const double lam = op_norm(res.lambda_part.at(i, j));
      worst_abs = std::max(worst_abs, lam);
      if (res.holder3_best > 0.0)
        res.max_ratio =
            std::max(res.max_ratio, lam / (res.c_mu * res.holder3_best * std::pow(dt, mu)));
    }
  // A remainder at rounding scale passes outright; ratios of noise against
  // noise would say nothing.
  const double scale = 1.0 + holder2_norm(m, 0.0);
  if (worst_abs <= 1e-12 * scale)
    res.bound_ok = true;
  else
    res.bound_ok = res.holder3_best > 0.0 && res.max_ratio <= 1.1;
  return res;
}

}  // namespace ncrough
