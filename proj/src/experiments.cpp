#include "ncrough/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <ostream>
#include <random>
#include <thread>

#include "ncrough/errors.hpp"
#include "ncrough/version.hpp"

namespace ncrough {

namespace {

// Shortest-round-trip formatting, locale independent: CSV output must not
// depend on the process locale or reruns would not be byte identical.
void append_number(std::string& out, double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  out.append(buf, res.ptr);
}

void checked_knots(const GridPath& fine, const std::vector<std::size_t>& knots) {
  if (knots.size() < 2) throw UsageError("need at least two interpolation knots");
  if (knots.front() != 0 || knots.back() != fine.steps())
    throw UsageError("interpolation knots must span the whole grid");
  for (std::size_t k = 0; k + 1 < knots.size(); ++k)
    if (knots[k] >= knots[k + 1]) throw UsageError("interpolation knots must increase");
}

// Uniform double in [-1, 1] from the top 53 bits of the generator; avoids the
// library distribution so the stream is the same on every platform.
double unit_draw(std::mt19937_64& rng) {
  const double u = static_cast<double>(rng() >> 11) * 0x1p-53;
  return 2.0 * u - 1.0;
}

double pair_weight(double dt, double gamma) { return std::pow(dt, 2.0 * gamma); }

// Positions of the entries of sub inside super; both increasing.
std::vector<std::size_t> positions_in(const std::vector<std::size_t>& sub,
                                      const std::vector<std::size_t>& super,
                                      const char* what) {
  std::vector<std::size_t> pos;
  pos.reserve(sub.size());
  std::size_t cursor = 0;
  for (std::size_t idx : sub) {
    while (cursor < super.size() && super[cursor] < idx) ++cursor;
    if (cursor == super.size() || super[cursor] != idx)
      throw UsageError(std::string(what) + ": index not on the solution grid");
    pos.push_back(cursor);
  }
  return pos;
}

// The spatial norm guard exists to catch accidental huge algebras; the growth
// demos run at matrix sizes past the default on purpose.
SpatialNormOptions spatial_opts_for(int dim) {
  SpatialNormOptions opts;
  opts.dim_limit = std::max(opts.dim_limit, dim);
  return opts;
}

GridPath scaled_path(const GridPath& p, double amplitude) {
  GridPath out = p;
  for (auto& v : out.values) v *= amplitude;
  return out;
}

// Supremum over comparison pairs of |area(1x1)_{st}| / (t-s)^{2 gamma}: a
// cheap size proxy for the second level.
double area_size_proxy(const LevyArea& area, const std::vector<std::size_t>& comp,
                       double gamma) {
  const GridPath& x = area.path();
  const TensorElement2 one =
      TensorElement2::identity(Space{x.dim()}, TensorConfig::Config2);
  double sup = 0.0;
  for (std::size_t a = 0; a < comp.size(); ++a)
    for (std::size_t b = a + 1; b < comp.size(); ++b) {
      const double dt = x.times[comp[b]] - x.times[comp[a]];
      sup = std::max(sup, op_norm(area.eval(one, comp[a], comp[b])) / pair_weight(dt, gamma));
    }
  return sup;
}

std::vector<std::size_t> full_indices(std::size_t steps) {
  std::vector<std::size_t> idx(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) idx[k] = k;
  return idx;
}

void check_mesh_list(const std::vector<std::size_t>& knot_counts, std::size_t fine_steps) {
  if (knot_counts.empty()) throw UsageError("need at least one mesh");
  for (std::size_t k = 0; k < knot_counts.size(); ++k) {
    if (knot_counts[k] == 0 || fine_steps % knot_counts[k] != 0)
      throw UsageError("every mesh must divide the fine grid");
    if (k > 0 && (knot_counts[k] <= knot_counts[k - 1] ||
                  knot_counts[k] % knot_counts[k - 1] != 0))
      throw UsageError("meshes must refine each other");
  }
}

// Shared tail of the two convergence studies: per-mesh means over paths, the
// rate fit, and the trend flag with noise factor 1.2.
void finish_convergence(ConvergenceStudyResult& r, std::size_t paths) {
  const std::size_t meshes = r.mesh.size();
  r.mean_distance.assign(meshes, 0.0);
  for (const auto& row : r.table.rows) {
    const std::size_t m = static_cast<std::size_t>(row[1]);
    r.mean_distance[m] += row[3] / static_cast<double>(paths);
  }
  r.fit = fit_rate(r.mesh, r.mean_distance);
  r.decreasing = true;
  for (std::size_t m = 0; m + 1 < meshes; ++m)
    if (r.mean_distance[m + 1] > 1.2 * r.mean_distance[m]) r.decreasing = false;
}

}  // namespace

std::size_t thread_budget() {
  if (const char* env = std::getenv("NCROUGH_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    throw UsageError("NCROUGH_THREADS must be a positive integer");
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  const std::size_t workers = std::min(thread_budget(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex gate;
  std::exception_ptr failure;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(gate);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

void StudyTable::add_row(std::vector<double> row) {
  if (row.size() != columns.size()) throw UsageError("row width does not match header");
  rows.push_back(std::move(row));
}

void write_csv(const StudyTable& t, std::ostream& out) {
  std::string line;
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (c) line += ',';
    const std::string& name = t.columns[c];
    if (name.find_first_of(",\"\r\n") != std::string::npos) {
      line += '"';
      for (char ch : name) {
        line += ch;
        if (ch == '"') line += '"';
      }
      line += '"';
    } else {
      line += name;
    }
  }
  line += "\r\n";
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) line += ',';
      append_number(line, row[c]);
    }
    line += "\r\n";
  }
  out << line;
}

nlohmann::json run_manifest(const std::string& study, const nlohmann::json& config,
                            std::uint64_t seed, double wall_seconds) {
  return nlohmann::json{{"schema_version", 1},
                        {"study", study},
                        {"config", config},
                        {"seed", seed},
                        {"build", kGitDescribe},
                        {"wall_seconds", wall_seconds}};
}

RateFit fit_rate(const std::vector<double>& mesh, const std::vector<double>& distance) {
  RateFit fit;
  if (mesh.size() != distance.size()) throw UsageError("mesh/distance length mismatch");
  if (mesh.size() < 2) return fit;
  for (double d : distance)
    if (!(d > 1e-14)) return fit;  // noise floor (or NaN): no meaningful slope
  const std::size_t n = mesh.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<double> lx(n), ly(n);
  for (std::size_t k = 0; k < n; ++k) {
    lx[k] = std::log(mesh[k]);
    ly[k] = std::log(distance[k]);
    sx += lx[k];
    sy += ly[k];
    sxx += lx[k] * lx[k];
    sxy += lx[k] * ly[k];
  }
  const double det = n * sxx - sx * sx;
  if (det <= 0) return fit;
  fit.rate = (n * sxy - sx * sy) / det;
  const double intercept = (sy - fit.rate * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double mean_y = sy / n;
  for (std::size_t k = 0; k < n; ++k) {
    const double e = ly[k] - (intercept + fit.rate * lx[k]);
    ss_res += e * e;
    ss_tot += (ly[k] - mean_y) * (ly[k] - mean_y);
  }
  fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  fit.valid = true;
  return fit;
}

GridPath linear_interpolation(const GridPath& fine, const std::vector<std::size_t>& knots) {
  fine.check();
  checked_knots(fine, knots);
  GridPath out;
  out.times = fine.times;
  out.values.reserve(fine.points());
  std::size_t cell = 0;
  for (std::size_t k = 0; k < fine.points(); ++k) {
    while (knots[cell + 1] < k) ++cell;
    if (k == knots[cell] || k == knots[cell + 1]) {
      out.values.push_back(fine.values[k]);  // knots keep the original value bitwise
      continue;
    }
    const std::size_t a = knots[cell], b = knots[cell + 1];
    const double th = (fine.times[k] - fine.times[a]) / (fine.times[b] - fine.times[a]);
    out.values.push_back(fine.values[a] + th * (fine.values[b] - fine.values[a]));
  }
  return out;
}

AlgebraElement interp_area(const GridPath& fine, const std::vector<std::size_t>& knots,
                           const TensorElement2& u, std::size_t i, std::size_t j) {
  fine.check();
  checked_knots(fine, knots);
  if (j > fine.steps() || i > j) throw UsageError("interp_area: bad index pair");
  if (u.config() != TensorConfig::Config2)
    throw UsageError("interp_area expects a nested-configuration tensor");
  const Space sp{fine.dim()};
  AlgebraElement acc = AlgebraElement::zero(sp);
  if (i == j) return acc;

  // Interpolated value at the segment start. Only the very first segment can
  // begin strictly inside a cell; later ones begin at knots.
  std::size_t cell = 0;
  while (knots[cell + 1] <= i) ++cell;
  const auto xn_at = [&](std::size_t k, std::size_t c) {
    const std::size_t a = knots[c], b = knots[c + 1];
    if (k == a) return fine.values[a];
    if (k == b) return fine.values[b];
    const double th = (fine.times[k] - fine.times[a]) / (fine.times[b] - fine.times[a]);
    return fine.values[a] + th * (fine.values[b] - fine.values[a]);
  };
  const AlgebraElement start = xn_at(i, cell);

  // Over one linear piece [p, q] inside the cell [a, b] the integrand is
  // affine in u, so the piece contributes
  //   (U # (Xn_p - Xn_i)) D (q-p)/L + (U # D) D (q-p)^2 / (2 L^2)
  // with D the cell increment and L the cell length (all in time units).
  std::size_t p = i;
  AlgebraElement xn_p = start;
  while (p < j) {
    const std::size_t a = knots[cell], b = knots[cell + 1];
    const std::size_t q = std::min(j, b);
    const double len = fine.times[b] - fine.times[a];
    const double seg = fine.times[q] - fine.times[p];
    const AlgebraElement d = fine.values[b] - fine.values[a];
    const AlgebraElement sharp_d = sharp_apply(u, d);
    acc += (seg / len) * (sharp_apply(u, xn_p - start) * d);
    acc += (seg * seg / (2.0 * len * len)) * (sharp_d * d);
    p = q;
    ++cell;
    if (p < j) xn_p = fine.values[p];  // next segment starts at a knot
  }
  return acc;
}

double quadratic_variation_defect(const GridPath& x, std::size_t i, std::size_t j) {
  x.check();
  if (j > x.steps() || i >= j) throw UsageError("quadratic_variation_defect: bad pair");
  const Space sp{x.dim()};
  AlgebraElement acc = (x.times[j] - x.times[i]) * AlgebraElement::identity(sp);
  for (std::size_t k = i; k < j; ++k) {
    const AlgebraElement dx = x.values[k + 1] - x.values[k];
    acc -= dx * dx;
  }
  return op_norm(acc);
}

ItoFormulaReport ito_formula_check(const FunctionSpec& f, const GridPath& x,
                                   const std::vector<std::size_t>& coarse,
                                   const DerivativeOptions& dopts) {
  x.check();
  if (coarse.size() < 2) throw UsageError("need at least two report points");
  for (std::size_t k = 0; k < coarse.size(); ++k) {
    if (coarse[k] > x.steps()) throw UsageError("report point beyond the grid");
    if (k > 0 && coarse[k] <= coarse[k - 1])
      throw UsageError("report points must increase");
  }
  const Space sp{x.dim()};
  const AlgebraElement zero = AlgebraElement::zero(sp);

  const auto mid_trace = [&](const AlgebraElement& at) {
    const TensorElement3 t3 = second_tensor_derivative(f, at, dopts);
    return t3.is_zero() ? zero : partial_trace_mid(t3);
  };

  // Single pass over the fine grid. The fully refined Stratonovich and Ito
  // sums differ per cell by dt times the middle trace of grad^2 f (the
  // one-cell Ito area vanishes and the Stratonovich correction is exactly
  // that trace; the two remainder tensors coincide, absorbing the 1/2).
  AlgebraElement sum_ito = zero, sum_strat = zero, sum_time = zero;
  std::vector<AlgebraElement> snap_ito, snap_strat, snap_time, snap_f;
  std::size_t next = 0;
  const auto snapshot = [&](std::size_t k) {
    while (next < coarse.size() && coarse[next] == k) {
      snap_ito.push_back(sum_ito);
      snap_strat.push_back(sum_strat);
      snap_time.push_back(sum_time);
      snap_f.push_back(apply_function(f, x.values[k]));
      ++next;
    }
  };
  snapshot(0);
  AlgebraElement m_here = mid_trace(x.values[0]);
  for (std::size_t k = 0; k < x.steps(); ++k) {
    const double dt = x.times[k + 1] - x.times[k];
    const AlgebraElement dx = x.values[k + 1] - x.values[k];
    const TensorElement2 grad = tensor_derivative(f, x.values[k], dopts);
    const AlgebraElement inc = grad.is_zero() ? zero : sharp_apply(grad, dx);
    const AlgebraElement m_next = mid_trace(x.values[k + 1]);
    sum_ito += inc;
    sum_strat += inc + dt * m_here;
    sum_time += (0.5 * dt) * (m_here + m_next);  // trapezoid of the doubled trace
    m_here = m_next;
    snapshot(k + 1);
  }
  if (next != coarse.size()) throw UsageError("report point beyond the grid");

  ItoFormulaReport rep;
  for (std::size_t a = 0; a < coarse.size(); ++a)
    for (std::size_t b = a + 1; b < coarse.size(); ++b) {
      const AlgebraElement df = snap_f[b] - snap_f[a];
      rep.scale = std::max(rep.scale, op_norm(df));
      rep.strat_residual =
          std::max(rep.strat_residual, op_norm(df - (snap_strat[b] - snap_strat[a])));
      rep.ito_residual = std::max(
          rep.ito_residual,
          op_norm(df - (snap_ito[b] - snap_ito[a]) - (snap_time[b] - snap_time[a])));
    }
  return rep;
}

std::vector<AlgebraElement> corrected_prefix(const ControlledBiprocess& bip,
                                             const LevyArea& area) {
  if (bip.path == nullptr) throw UsageError("biprocess has no path");
  const GridPath& x = *bip.path;
  if (bip.stride == 0 || x.steps() % bip.stride != 0)
    throw UsageError("biprocess stride must divide the grid");
  const std::size_t cells = x.steps() / bip.stride;
  std::vector<AlgebraElement> prefix;
  prefix.reserve(cells + 1);
  prefix.push_back(AlgebraElement::zero(Space{x.dim()}));
  for (std::size_t c = 0; c < cells; ++c) {
    prefix.push_back(prefix.back() + corrected_increment(bip, area, c * bip.stride,
                                                         (c + 1) * bip.stride));
  }
  return prefix;
}

GapReport ito_strato_gap_check(const std::vector<FunctionSpec>& fs,
                               const std::vector<FunctionSpec>& gs,
                               const ControlledProcess& y,
                               const std::vector<std::size_t>& coarse,
                               const DerivativeOptions& dopts) {
  if (y.driver == nullptr) throw UsageError("process has no driver");
  const GridPath& x = *y.driver;
  if (y.points() < 2) throw UsageError("need at least two process points");
  const std::size_t stride = y.indices[1] - y.indices[0];
  for (std::size_t k = 0; k < y.points(); ++k)
    if (y.indices[k] != k * stride)
      throw UsageError("process positions must be uniformly spaced from index 0");
  const std::size_t cells = y.points() - 1;
  const std::size_t top = y.indices.back();

  if (coarse.size() < 2) throw UsageError("need at least two report points");
  std::vector<std::size_t> pos;
  for (std::size_t k = 0; k < coarse.size(); ++k) {
    if (coarse[k] > top || coarse[k] % stride != 0)
      throw UsageError("report points must lie on the process grid");
    if (k > 0 && coarse[k] <= coarse[k - 1])
      throw UsageError("report points must increase");
    pos.push_back(coarse[k] / stride);
  }

  // The lift stores dense rank-3 tensors at every process point, which does
  // not fit in memory on a long grid at large matrix dimension. Fully refined
  // corrected sums are additive, so the prefixes can be accumulated over
  // windows of cells, each window lifted on its own slice of the driver.
  const std::size_t window =
      std::max<std::size_t>(1, (1u << 20) / static_cast<std::size_t>(x.dim() * x.dim()));

  const Space sp{x.dim()};
  const AlgebraElement zero = AlgebraElement::zero(sp);
  AlgebraElement base_s = zero, base_i = zero, acc_t = zero;
  std::vector<AlgebraElement> snap_s, snap_i, snap_t;
  std::size_t next = 0;
  const auto snapshot = [&](std::size_t cell, const AlgebraElement& s, const AlgebraElement& i) {
    while (next < pos.size() && pos[next] == cell) {
      snap_s.push_back(s);
      snap_i.push_back(i);
      snap_t.push_back(acc_t);
      ++next;
    }
  };
  snapshot(0, base_s, base_i);

  for (std::size_t w0 = 0; w0 < cells; w0 += window) {
    const std::size_t w1 = std::min(w0 + window, cells);
    std::vector<std::size_t> fine((w1 - w0) * stride + 1);
    std::iota(fine.begin(), fine.end(), w0 * stride);
    const GridPath xb = restrict_path(x, fine);
    ControlledProcess yb;
    yb.driver = &xb;
    yb.self_adjoint = y.self_adjoint;
    for (std::size_t c = w0; c <= w1; ++c) {
      yb.indices.push_back((c - w0) * stride);
      yb.y.times.push_back(y.y.times[c]);
      yb.y.values.push_back(y.y.values[c]);
      yb.deriv.push_back(y.deriv[c]);
    }
    const ControlledBiprocess bip = lift_integrand(fs, gs, yb, dopts);
    const LevyArea strat(xb, AreaKind::Stratonovich);
    const LevyArea ito(xb, AreaKind::Ito);
    const std::vector<AlgebraElement> wps = corrected_prefix(bip, strat);
    const std::vector<AlgebraElement> wpi = corrected_prefix(bip, ito);

    const auto mid = [&](std::size_t idx) {
      const TensorElement3 l = bip.left_at(idx), r = bip.right_at(idx);
      AlgebraElement m = zero;
      if (!l.is_zero()) m += partial_trace_mid(l);
      if (!r.is_zero()) m += partial_trace_mid(r);
      return m;
    };
    AlgebraElement m_here = mid(0);
    for (std::size_t c = w0; c < w1; ++c) {
      const std::size_t lo = (c - w0) * stride, hi = (c - w0 + 1) * stride;
      const AlgebraElement m_next = mid(hi);
      acc_t += (0.5 * (xb.times[hi] - xb.times[lo])) * (m_here + m_next);
      m_here = m_next;
      snapshot(c + 1, base_s + wps[c - w0 + 1], base_i + wpi[c - w0 + 1]);
    }
    base_s += wps.back();
    base_i += wpi.back();
  }

  GapReport rep;
  for (std::size_t a = 0; a < pos.size(); ++a)
    for (std::size_t b = a + 1; b < pos.size(); ++b) {
      const AlgebraElement gap = (snap_s[b] - snap_s[a]) - (snap_i[b] - snap_i[a]);
      const AlgebraElement oracle = 0.5 * (snap_t[b] - snap_t[a]);
      rep.scale = std::max(rep.scale, op_norm(gap));
      rep.residual = std::max(rep.residual, op_norm(gap - oracle));
    }
  return rep;
}

StepIntegrandBound bg_inequality_check(const std::vector<AlgebraElement>& v,
                                       const GridPath& x) {
  x.check();
  if (v.size() != x.steps())
    throw UsageError("need one integrand value per step");
  const Space sp{x.dim()};
  TensorElement2 woven(sp, TensorConfig::Config1);
  double quad = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (v[k].dim() != x.dim()) throw UsageError("integrand dimension mismatch");
    const double dt = x.times[k + 1] - x.times[k];
    woven.add_term(v[k], x.values[k + 1] - x.values[k]);
    const double nv = op_norm(v[k]);
    quad += nv * nv * dt;
  }
  StepIntegrandBound rep;
  rep.lhs = spatial_norm(woven, spatial_opts_for(x.dim()));
  rep.rhs = 2.0 * std::sqrt(quad);
  return rep;
}

std::vector<AlgebraElement> adapted_step_integrand(const GridPath& x, std::uint64_t seed) {
  x.check();
  if (x.steps() == 0) throw UsageError("path has no steps");
  std::mt19937_64 rng(seed);
  const double c0 = unit_draw(rng), c1 = unit_draw(rng), c2 = unit_draw(rng);
  const Space sp{x.dim()};
  const AlgebraElement one = AlgebraElement::identity(sp);
  std::vector<AlgebraElement> v;
  v.reserve(x.steps());
  for (std::size_t k = 0; k < x.steps(); ++k) {
    const AlgebraElement& xa = x.values[k];
    v.push_back(c0 * one + c1 * xa + c2 * (xa * xa));
  }
  return v;
}

std::vector<IncrementGrowthRow> nonextension_demo(const std::vector<std::size_t>& ns,
                                                  const Space& s, std::uint64_t seed) {
  if (ns.empty()) throw UsageError("need at least one n");
  for (std::size_t k = 0; k < ns.size(); ++k) {
    if (ns[k] == 0) throw UsageError("n must be positive");
    if (k > 0 && ns[k] <= ns[k - 1]) throw UsageError("n values must increase");
  }
  const std::size_t n_max = ns.back();
  // Unit-spaced increments, so each Y_i has unit variance in the trace.
  const GridPath x =
      simulate_free_bm(s, uniform_times(static_cast<double>(n_max), n_max), seed);
  AlgebraElement diag = AlgebraElement::zero(s);
  TensorElement2 woven(s, TensorConfig::Config1);
  std::vector<IncrementGrowthRow> rows;
  std::size_t used = 0;
  for (std::size_t n : ns) {
    for (; used < n; ++used) {
      const AlgebraElement y = x.values[used + 1] - x.values[used];
      diag += y * y;
      woven.add_term(y, y);
    }
    IncrementGrowthRow row;
    row.n = n;
    row.diagonal = l2_norm(diag);
    row.spatial = spatial_norm(woven, spatial_opts_for(s.dim));
    row.ratio = row.diagonal / row.spatial;
    rows.push_back(row);
  }
  return rows;
}

StudyTable increment_growth_table(const std::vector<IncrementGrowthRow>& rows) {
  StudyTable t;
  t.columns = {"n", "diagonal", "spatial", "ratio"};
  for (const auto& r : rows)
    t.add_row({static_cast<double>(r.n), r.diagonal, r.spatial, r.ratio});
  return t;
}

ConvergenceStudyResult area_convergence_study(const AreaStudyConfig& cfg) {
  if (cfg.dim < 1) throw UsageError("dimension must be positive");
  if (cfg.paths == 0 || cfg.probes == 0) throw UsageError("need paths and probes");
  if (!(cfg.gamma > 0.0 && cfg.gamma < 0.5 + 1e-12))
    throw UsageError("gamma must lie in (0, 1/2]");
  check_mesh_list(cfg.knot_counts, cfg.fine_steps);
  const std::vector<std::size_t> comp =
      coarse_indices(cfg.fine_steps, cfg.compare_steps);
  const Space sp{cfg.dim};

  // Probe tensors: the identity plus seeded unit-size rank-one probes. The
  // same probes serve every path and mesh.
  std::vector<TensorElement2> probes;
  probes.push_back(TensorElement2::identity(sp, TensorConfig::Config2));
  for (std::size_t r = 1; r < cfg.probes; ++r) {
    const AlgebraElement a = sample_gue_increment(sp, 1.0, cfg.seed, 900 + r, 0);
    const AlgebraElement b = sample_gue_increment(sp, 1.0, cfg.seed, 900 + r, 1);
    TensorElement2 u = TensorElement2::pure(a, b, TensorConfig::Config2);
    const double size = proj_ub(u);
    if (size > 0) u *= 1.0 / size;
    probes.push_back(u);
  }

  const std::size_t meshes = cfg.knot_counts.size();
  ConvergenceStudyResult result;
  result.table.columns = {"path", "mesh_index", "mesh", "distance"};
  result.table.rows.resize(cfg.paths * meshes);
  result.mesh.resize(meshes);
  for (std::size_t m = 0; m < meshes; ++m)
    result.mesh[m] = cfg.horizon / static_cast<double>(cfg.knot_counts[m]);

  parallel_for(cfg.paths, [&](std::size_t p) {
    const GridPath x = simulate_free_bm(sp, uniform_times(cfg.horizon, cfg.fine_steps),
                                        cfg.seed, p);
    const LevyArea strat(x, AreaKind::Stratonovich);
    // Reference values once per (pair, probe); the interpolated side reuses them
    // across every mesh row.
    std::vector<std::vector<AlgebraElement>> ref(probes.size());
    for (std::size_t r = 0; r < probes.size(); ++r)
      for (std::size_t a = 0; a < comp.size(); ++a)
        for (std::size_t b = a + 1; b < comp.size(); ++b)
          ref[r].push_back(strat.eval(probes[r], comp[a], comp[b]));
    for (std::size_t m = 0; m < meshes; ++m) {
      const std::vector<std::size_t> knots =
          coarse_indices(cfg.fine_steps, cfg.knot_counts[m]);
      double sup = 0.0;
      for (std::size_t r = 0; r < probes.size(); ++r) {
        std::size_t flat = 0;
        for (std::size_t a = 0; a < comp.size(); ++a)
          for (std::size_t b = a + 1; b < comp.size(); ++b, ++flat) {
            const double dt = x.times[comp[b]] - x.times[comp[a]];
            const AlgebraElement diff =
                interp_area(x, knots, probes[r], comp[a], comp[b]) - ref[r][flat];
            sup = std::max(sup, op_norm(diff) / pair_weight(dt, cfg.gamma));
          }
      }
      result.table.rows[p * meshes + m] = {static_cast<double>(p),
                                           static_cast<double>(m), result.mesh[m], sup};
    }
  });
  finish_convergence(result, cfg.paths);
  return result;
}

ConvergenceStudyResult solution_convergence_study(const SolutionStudyConfig& cfg) {
  if (cfg.dim < 1) throw UsageError("dimension must be positive");
  if (cfg.paths == 0) throw UsageError("need at least one path");
  if (cfg.fs.empty()) throw UsageError("need at least one coefficient function");
  check_mesh_list(cfg.knot_counts, cfg.fine_steps);
  const std::size_t solve_steps =
      cfg.solve_steps == 0 ? cfg.fine_steps : cfg.solve_steps;
  if (cfg.fine_steps % solve_steps != 0)
    throw UsageError("solver mesh must divide the fine grid");
  if (solve_steps % cfg.knot_counts.front() != 0)
    throw UsageError("comparison grid must lie on the solver grid");
  const std::vector<FunctionSpec> gs =
      cfg.gs.empty() ? adjoint_pairing(cfg.fs, true) : cfg.gs;

  const Space sp{cfg.dim};
  const AlgebraElement start = cfg.start_scale * AlgebraElement::identity(sp);
  const std::vector<std::size_t> comp =
      coarse_indices(cfg.fine_steps, cfg.knot_counts.front());
  const std::vector<std::size_t> solver_idx =
      coarse_indices(cfg.fine_steps, solve_steps);
  const std::vector<std::size_t> comp_pos =
      positions_in(comp, solver_idx, "solution study");

  const std::size_t meshes = cfg.knot_counts.size();
  ConvergenceStudyResult result;
  result.table.columns = {"path", "mesh_index", "mesh", "distance"};
  result.table.rows.resize(cfg.paths * meshes);
  result.mesh.resize(meshes);
  for (std::size_t m = 0; m < meshes; ++m)
    result.mesh[m] = cfg.horizon / static_cast<double>(cfg.knot_counts[m]);

  parallel_for(cfg.paths, [&](std::size_t p) {
    const GridPath x = simulate_free_bm(sp, uniform_times(cfg.horizon, cfg.fine_steps),
                                        cfg.seed, p);
    const LevyArea strat(x, AreaKind::Stratonovich);
    const SdeResult rough = solve_rough_sde(start, cfg.fs, gs, strat, solver_idx);
    for (std::size_t m = 0; m < meshes; ++m) {
      const GridPath xn = linear_interpolation(
          x, coarse_indices(cfg.fine_steps, cfg.knot_counts[m]));
      const LevyArea smooth(xn, AreaKind::SmoothLebesgue);
      const SdeResult classical = solve_rough_sde(start, cfg.fs, gs, smooth, solver_idx);
      GridPath diff;
      for (std::size_t c = 0; c < comp.size(); ++c) {
        diff.times.push_back(x.times[comp[c]]);
        diff.values.push_back(classical.solution.y.values[comp_pos[c]] -
                              rough.solution.y.values[comp_pos[c]]);
      }
      result.table.rows[p * meshes + m] = {static_cast<double>(p),
                                           static_cast<double>(m), result.mesh[m],
                                           holder_norm(diff, cfg.gamma)};
    }
  });
  finish_convergence(result, cfg.paths);
  return result;
}

BoundStudyResult bound_growth_study(const BoundStudyConfig& cfg) {
  if (cfg.dim < 1) throw UsageError("dimension must be positive");
  if (cfg.fs.empty()) throw UsageError("need at least one coefficient function");
  if (cfg.amplitudes.size() < 3) throw UsageError("need at least three amplitudes");
  for (std::size_t k = 0; k + 1 < cfg.amplitudes.size(); ++k)
    if (!(cfg.amplitudes[k] > 0) || cfg.amplitudes[k + 1] <= cfg.amplitudes[k])
      throw UsageError("amplitudes must be positive and increasing");
  const double last = cfg.amplitudes.back();
  const double prev = cfg.amplitudes[cfg.amplitudes.size() - 2];
  if (std::abs(last - 2.0 * prev) > 1e-12 * last)
    throw UsageError("the final amplitude must double the previous one");
  if (cfg.solve_steps == 0 || cfg.fine_steps % cfg.solve_steps != 0)
    throw UsageError("solver mesh must divide the fine grid");
  const std::vector<FunctionSpec> gs =
      cfg.gs.empty() ? adjoint_pairing(cfg.fs, true) : cfg.gs;

  const Space sp{cfg.dim};
  const AlgebraElement start = cfg.start_scale * AlgebraElement::identity(sp);
  const GridPath base = simulate_free_bm(
      sp, uniform_times(cfg.horizon, cfg.fine_steps), cfg.seed);
  const std::vector<std::size_t> solver_idx =
      coarse_indices(cfg.fine_steps, cfg.solve_steps);
  const std::vector<std::size_t> comp = coarse_indices(cfg.fine_steps, 4);

  const std::size_t count = cfg.amplitudes.size();
  BoundStudyResult result;
  result.table.columns = {"amplitude", "driver_holder", "area_proxy", "seminorm"};
  result.table.rows.resize(count);
  parallel_for(count, [&](std::size_t k) {
    const double amp = cfg.amplitudes[k];
    const GridPath xa = scaled_path(base, amp);
    const LevyArea strat(xa, AreaKind::Stratonovich);
    const SdeResult sol = solve_rough_sde(start, cfg.fs, gs, strat, solver_idx);
    const SeminormRecord rec = controlled_seminorm(sol.solution, cfg.gamma);
    result.table.rows[k] = {amp, holder_norm(xa, cfg.gamma),
                            area_size_proxy(strat, comp, cfg.gamma), rec.total};
  });

  std::vector<double> amps_head(cfg.amplitudes.begin(), cfg.amplitudes.end() - 1);
  std::vector<double> semi_head;
  for (std::size_t k = 0; k + 1 < count; ++k) semi_head.push_back(result.table.rows[k][3]);
  const RateFit fit = fit_rate(amps_head, semi_head);
  result.fitted_exponent = fit.rate;
  result.predicted_factor = std::pow(2.0, fit.rate);
  const double semi_prev = result.table.rows[count - 2][3];
  const double semi_last = result.table.rows[count - 1][3];
  result.measured_factor = semi_prev > 0 ? semi_last / semi_prev : 0.0;
  return result;
}

}  // namespace ncrough
