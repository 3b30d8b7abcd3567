// Command line surface of the library.
//
//   moments    pairing-sum moments of the q-gaussian family next to the
//              spectral-density quadrature, with their difference
//   simulate   sample the Hermitian matrix walk, save it as a binary path
//              plus a per-point summary table
//   integrate  corrected Riemann-sum rough integral of sum f_i(X) dX g_i(X)
//              along a sampled path
//   solve      grid solution of dY = sum f_i(Y) dX g_i(Y)
//   study      scripted experiments: area-convergence, solution-convergence,
//              ito-formula, ito-strato, bg, nonextension, bounds
//
// Configuration is a JSON file (--config) overlaid with --key value flags;
// dotted keys reach nested objects (--scheme.kind picard). Values parse as
// JSON when possible, comma lists become arrays, anything else stays a
// string. The full effective config validates before any computation and is
// echoed into the manifest, so a manifest's "config" block reruns the exact
// same job. Outputs are CSV tables (RFC 4180, '.' decimal point, no locale)
// and a manifest.json; both are byte-stable given (config, seed) except for
// the manifest's wall_seconds.
//
// Exit codes: 0 ok; 2 usage, config, or size errors; 3 a requested check
// failed (the failing numbers are echoed on stdout); 4 numeric divergence.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ncrough/algebra.hpp"
#include "ncrough/errors.hpp"
#include "ncrough/experiments.hpp"
#include "ncrough/funcalc.hpp"
#include "ncrough/pairings.hpp"
#include "ncrough/rough.hpp"
#include "ncrough/sde.hpp"
#include "ncrough/version.hpp"

namespace {

using nlohmann::json;
using namespace ncrough;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitCheck = 3;
constexpr int kExitNumeric = 4;

// Raised after outputs are written when a configured acceptance threshold is
// not met; the message carries the failing numbers.
struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string strf(const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  return std::string(buf);
}

class WallClock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

// ---------------------------------------------------------------------------
// Config plumbing: defaults <- file <- flag overrides, then strict validation.

json parse_flag_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
  }
  if (text.find(',') != std::string::npos) {
    try {
      return json::parse("[" + text + "]");
    } catch (const json::parse_error&) {
    }
  }
  return json(text);
}

void set_dotted(json& cfg, const std::string& key, json value) {
  json* cur = &cfg;
  std::size_t begin = 0;
  for (;;) {
    const std::size_t dot = key.find('.', begin);
    const std::string part =
        dot == std::string::npos ? key.substr(begin) : key.substr(begin, dot - begin);
    if (part.empty()) throw UsageError("bad flag name --" + key);
    if (dot == std::string::npos) {
      (*cur)[part] = std::move(value);
      return;
    }
    json& next = (*cur)[part];
    if (next.is_null()) next = json::object();
    if (!next.is_object())
      throw UsageError("--" + key + " descends into a value that is not an object");
    cur = &next;
    begin = dot + 1;
  }
}

void apply_overrides(json& cfg, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0)
      throw UsageError("expected --key value override pairs, got '" + tok + "'");
    const std::string key = tok.substr(2);
    if (key.empty()) throw UsageError("empty override flag");
    if (i + 1 == extras.size()) throw UsageError("override --" + key + " needs a value");
    set_dotted(cfg, key, parse_flag_value(extras[++i]));
  }
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw UsageError("config file " + path + ": " + e.what());
  }
  if (!j.is_object()) throw UsageError("config file " + path + " must hold a JSON object");
  return j;
}

json effective_config(const json& defaults, const std::string& file,
                      const std::vector<std::string>& extras) {
  json cfg = defaults;
  if (!file.empty()) cfg.merge_patch(load_config_file(file));
  apply_overrides(cfg, extras);
  return cfg;
}

void reject_unknown(const json& cfg, const std::set<std::string>& keys, const std::string& where) {
  for (const auto& item : cfg.items())
    if (keys.find(item.key()) == keys.end())
      throw UsageError(where + ": unknown config key '" + item.key() + "'");
}

const json& field(const json& cfg, const std::string& key) {
  if (!cfg.contains(key)) throw UsageError("missing config key '" + key + "'");
  return cfg.at(key);
}

long long need_int(const json& cfg, const std::string& key, long long lo, long long hi) {
  const json& v = field(cfg, key);
  if (!v.is_number()) throw UsageError("'" + key + "' must be an integer");
  const double d = v.get<double>();
  const long long n = static_cast<long long>(std::llround(d));
  if (static_cast<double>(n) != d) throw UsageError("'" + key + "' must be an integer");
  if (n < lo || n > hi)
    throw UsageError("'" + key + "' must lie in [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + "]");
  return n;
}

double need_num(const json& cfg, const std::string& key, double lo, double hi) {
  const json& v = field(cfg, key);
  if (!v.is_number()) throw UsageError("'" + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d) || d < lo || d > hi)
    throw UsageError(strf("'%s' must lie in [%g, %g]", key.c_str(), lo, hi));
  return d;
}

std::string need_str(const json& cfg, const std::string& key) {
  const json& v = field(cfg, key);
  if (!v.is_string()) throw UsageError("'" + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<std::size_t> need_size_list(const json& cfg, const std::string& key, long long lo,
                                        long long hi) {
  const json& v = field(cfg, key);
  if (!v.is_array() || v.empty())
    throw UsageError("'" + key + "' must be a non-empty array of integers");
  std::vector<std::size_t> out;
  for (const json& e : v) {
    if (!e.is_number()) throw UsageError("'" + key + "' must hold integers");
    const double d = e.get<double>();
    const long long n = static_cast<long long>(std::llround(d));
    if (static_cast<double>(n) != d || n < lo || n > hi)
      throw UsageError(strf("'%s' entries must be integers in [%lld, %lld]", key.c_str(), lo, hi));
    out.push_back(static_cast<std::size_t>(n));
  }
  return out;
}

std::vector<double> need_num_list(const json& cfg, const std::string& key, double lo, double hi) {
  const json& v = field(cfg, key);
  if (!v.is_array() || v.empty())
    throw UsageError("'" + key + "' must be a non-empty array of numbers");
  std::vector<double> out;
  for (const json& e : v) {
    if (!e.is_number()) throw UsageError("'" + key + "' must hold numbers");
    const double d = e.get<double>();
    if (!std::isfinite(d) || d < lo || d > hi)
      throw UsageError(strf("'%s' entries must lie in [%g, %g]", key.c_str(), lo, hi));
    out.push_back(d);
  }
  return out;
}

FunctionSpec parse_function(const json& v, const std::string& what) {
  try {
    return function_from_json(v);
  } catch (const UsageError& e) {
    throw UsageError(what + ": " + e.what());
  }
}

std::vector<FunctionSpec> need_functions(const json& cfg, const std::string& key) {
  const json& v = field(cfg, key);
  if (!v.is_array() || v.empty())
    throw UsageError("'" + key + "' must be a non-empty array of function specs");
  std::vector<FunctionSpec> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(parse_function(v[i], "'" + key + "'[" + std::to_string(i) + "]"));
  return out;
}

FunctionSpec need_function(const json& cfg, const std::string& key) {
  return parse_function(field(cfg, key), "'" + key + "'");
}

// g is either a pairing mode keeping solutions self-adjoint, or (where a
// non-adjoint integrand is meaningful) an explicit function list of the same
// length as f. is_adjoint reports which case was taken.
std::vector<FunctionSpec> resolve_g(const json& cfg, const std::string& key,
                                    const std::vector<FunctionSpec>& fs, bool allow_list,
                                    bool* is_adjoint) {
  const json& v = field(cfg, key);
  if (v.is_string()) {
    const std::string mode = v.get<std::string>();
    if (is_adjoint) *is_adjoint = true;
    if (mode == "reverse-star") return adjoint_pairing(fs, true);
    if (mode == "same-star") return adjoint_pairing(fs, false);
    throw UsageError("'" + key + "' must be \"reverse-star\" or \"same-star\"" +
                     std::string(allow_list ? ", or an explicit function array" : ""));
  }
  if (allow_list && v.is_array()) {
    std::vector<FunctionSpec> gs = need_functions(cfg, key);
    if (gs.size() != fs.size())
      throw UsageError("'" + key + "' must have the same length as 'f'");
    if (is_adjoint) *is_adjoint = false;
    return gs;
  }
  throw UsageError("'" + key + "' must be a pairing mode string" +
                   std::string(allow_list ? " or a function array" : ""));
}

AreaKind need_area(const json& cfg, const std::string& key) {
  const std::string s = need_str(cfg, key);
  if (s == "ito") return AreaKind::Ito;
  if (s == "strato" || s == "stratonovich") return AreaKind::Stratonovich;
  if (s == "smooth" || s == "smooth-lebesgue") return AreaKind::SmoothLebesgue;
  if (s == "interp" || s == "interpolated") return AreaKind::Interpolated;
  throw UsageError("'" + key + "' must be one of: ito, strato, smooth, interp");
}

std::uint64_t need_seed(const json& cfg, const std::string& key) {
  return static_cast<std::uint64_t>(need_int(cfg, key, 0, (1ll << 62)));
}

// ---------------------------------------------------------------------------
// Output plumbing.

std::filesystem::path prepare_outdir(const std::string& out) {
  std::filesystem::path dir(out.empty() ? "." : out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create output directory " + dir.string());
  return dir;
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw UsageError("short write to " + p.string());
}

std::string csv_bytes(const StudyTable& t) {
  std::ostringstream os;
  write_csv(t, os);
  return os.str();
}

void write_manifest(const std::filesystem::path& dir, const std::string& study, const json& cfg,
                    std::uint64_t seed, double wall) {
  write_bytes(dir / "manifest.json", run_manifest(study, cfg, seed, wall).dump(2) + "\n");
}

std::vector<std::size_t> full_grid(std::size_t steps) {
  std::vector<std::size_t> idx(steps + 1);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

// 16 bytes per complex entry; refuse configs whose paths would not fit a
// desk-scale memory budget.
void check_path_budget(long long dim, long long steps, const std::string& where) {
  if ((steps + 1) * dim * dim > (1ll << 25))
    throw SizeError(where + ": (steps+1)*dim^2 exceeds the 2^25 entry budget");
}

// ---------------------------------------------------------------------------
// moments

int cmd_moments(double q, int order, const std::string& out) {
  if (!(std::abs(q) <= 0.9))
    throw UsageError(strf("q = %g out of range: the spectral density is evaluated for |q| <= 0.9",
                          q));
  if (order < 2 || order > kDensityMaxOrder)
    throw UsageError(strf("order must lie in [2, %d]", kDensityMaxOrder));
  WallClock clock;
  StudyTable t;
  t.columns = {"order", "pairing_sum", "density", "difference"};
  for (int r = 2; r <= order; r += 2) {
    MomentQuery query;
    query.times.assign(static_cast<std::size_t>(r), 1.0);
    query.q = q;
    const double pairing = q_joint_moment(query);
    const double dens = density_moment(q, r);
    t.add_row({static_cast<double>(r), pairing, dens, pairing - dens});
  }
  std::printf("%6s %22s %22s %13s\n", "order", "pairing_sum", "density", "difference");
  for (const auto& row : t.rows)
    std::printf("%6.0f %22.15g %22.15g %13.4e\n", row[0], row[1], row[2], row[3]);
  if (!out.empty()) {
    const auto dir = prepare_outdir(out);
    write_bytes(dir / "moments.csv", csv_bytes(t));
    write_manifest(dir, "moments", json{{"q", q}, {"order", order}, {"out", out}}, 0,
                   clock.seconds());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

const json kSimulateDefaults = json::parse(R"({
  "dim": 64, "steps": 256, "horizon": 1.0, "seed": 1, "path_id": 0, "out": "."
})");

int cmd_simulate(const json& cfg) {
  reject_unknown(cfg, {"dim", "steps", "horizon", "seed", "path_id", "out"}, "simulate");
  const int dim = static_cast<int>(need_int(cfg, "dim", 2, 512));
  const auto steps = static_cast<std::size_t>(need_int(cfg, "steps", 1, 1 << 13));
  const double horizon = need_num(cfg, "horizon", 1e-9, 1e6);
  const std::uint64_t seed = need_seed(cfg, "seed");
  const std::uint64_t path_id = need_seed(cfg, "path_id");
  const std::string out = need_str(cfg, "out");
  check_path_budget(dim, static_cast<long long>(steps), "simulate");

  WallClock clock;
  const GridPath x = simulate_free_bm(Space{dim}, uniform_times(horizon, steps), seed, path_id);
  StudyTable t;
  t.columns = {"index", "time", "op_norm", "l2_norm", "trace_re", "trace_im"};
  for (std::size_t k = 0; k < x.points(); ++k) {
    const Complex tr = normalized_trace(x.values[k]);
    t.add_row({static_cast<double>(k), x.times[k], op_norm(x.values[k]), l2_norm(x.values[k]),
               tr.real(), tr.imag()});
  }
  const auto dir = prepare_outdir(out);
  save_path(x, (dir / "path.ncpath").string(), seed);
  write_bytes(dir / "path.csv", csv_bytes(t));
  write_manifest(dir, "simulate", cfg, seed, clock.seconds());
  std::printf("simulate: dim %d, %zu steps to t = %.17g, seed %llu\n", dim, steps, horizon,
              static_cast<unsigned long long>(seed));
  std::printf("final op norm %.17g, saved %s\n", op_norm(x.values.back()),
              (dir / "path.ncpath").string().c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// integrate

const json kIntegrateDefaults = json::parse(R"({
  "dim": 64, "steps": 512, "horizon": 1.0, "seed": 1, "path_id": 0,
  "f": [{"kind": "poly", "coeffs": [0.0, 1.0]}], "g": "reverse-star",
  "area": "strato", "stride": 1, "coarse_steps": 16,
  "refine_tol": 1e-9, "gap_tol": 0.0, "out": "."
})");

int cmd_integrate(const json& cfg) {
  reject_unknown(cfg,
                 {"dim", "steps", "horizon", "seed", "path_id", "f", "g", "area", "stride",
                  "coarse_steps", "refine_tol", "gap_tol", "out"},
                 "integrate");
  const int dim = static_cast<int>(need_int(cfg, "dim", 2, 256));
  const auto steps = static_cast<std::size_t>(need_int(cfg, "steps", 1, 1 << 13));
  const double horizon = need_num(cfg, "horizon", 1e-9, 1e6);
  const std::uint64_t seed = need_seed(cfg, "seed");
  const std::uint64_t path_id = need_seed(cfg, "path_id");
  const std::vector<FunctionSpec> fs = need_functions(cfg, "f");
  const std::vector<FunctionSpec> gs = resolve_g(cfg, "g", fs, true, nullptr);
  const AreaKind kind = need_area(cfg, "area");
  const auto stride = static_cast<std::size_t>(need_int(cfg, "stride", 1, 1 << 13));
  const auto coarse_steps = static_cast<std::size_t>(
      need_int(cfg, "coarse_steps", 1, static_cast<long long>(steps)));
  const double refine_tol = need_num(cfg, "refine_tol", 1e-15, 1.0);
  const double gap_tol = need_num(cfg, "gap_tol", 0.0, 1e9);
  const std::string out = need_str(cfg, "out");
  check_path_budget(dim, static_cast<long long>(steps), "integrate");
  if (kind != AreaKind::Interpolated && stride != 1)
    throw UsageError("'stride' only applies to the interpolated area");
  if (steps % coarse_steps != 0)
    throw UsageError("'coarse_steps' must divide 'steps'");
  // the report grid stores a dense (coarse+1)^2 block of algebra elements
  const long long report = static_cast<long long>(coarse_steps) + 1;
  if (report * report * dim * dim > (1ll << 24))
    throw SizeError("integrate: (coarse_steps+1)^2 * dim^2 exceeds the 2^24 entry budget");

  WallClock clock;
  const GridPath x = simulate_free_bm(Space{dim}, uniform_times(horizon, steps), seed, path_id);
  const ControlledProcess y = controlled_lift_of_driver(x, full_grid(steps));
  const ControlledBiprocess bip = lift_integrand(fs, gs, y);
  const LevyArea area(x, kind, stride);
  RefineOptions ropts;
  ropts.tol = refine_tol;
  const RoughIntegralResult res =
      rough_integral(bip, area, coarse_indices(steps, coarse_steps), ropts);

  const auto dir = prepare_outdir(out);
  std::ostringstream os;
  write_two_param_csv(res.values, os);
  write_bytes(dir / "integral.csv", os.str());
  write_manifest(dir, "integrate", cfg, seed, clock.seconds());
  std::printf("integrate: cauchy gap %.17g over %zu levels, %s\n", res.cauchy_gap,
              res.levels_used, res.converged ? "converged" : "not converged");
  std::printf("wrote %s\n", (dir / "integral.csv").string().c_str());
  if (gap_tol > 0.0 && !(res.cauchy_gap <= gap_tol))
    throw CheckFailure(strf("integrate: cauchy_gap=%.17g exceeds gap_tol=%.17g", res.cauchy_gap,
                            gap_tol));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// solve

const json kSolveDefaults = json::parse(R"({
  "dim": 64, "steps": 512, "horizon": 1.0, "seed": 1, "path_id": 0,
  "start": {"scale": 1.0, "file": "", "index": 0},
  "f": [{"kind": "poly", "coeffs": [1.0]}], "g": "reverse-star",
  "mesh": 0, "area": "strato",
  "scheme": {"kind": "one-step", "iterations": 16, "tol": 1e-10},
  "out": "."
})");

int cmd_solve(const json& cfg) {
  reject_unknown(cfg,
                 {"dim", "steps", "horizon", "seed", "path_id", "start", "f", "g", "mesh", "area",
                  "scheme", "out"},
                 "solve");
  const int dim = static_cast<int>(need_int(cfg, "dim", 2, 512));
  const auto steps = static_cast<std::size_t>(need_int(cfg, "steps", 1, 1 << 13));
  const double horizon = need_num(cfg, "horizon", 1e-9, 1e6);
  const std::uint64_t seed = need_seed(cfg, "seed");
  const std::uint64_t path_id = need_seed(cfg, "path_id");
  const std::vector<FunctionSpec> fs = need_functions(cfg, "f");
  bool adjoint_pairing_used = true;
  const std::vector<FunctionSpec> gs = resolve_g(cfg, "g", fs, true, &adjoint_pairing_used);
  const AreaKind kind = need_area(cfg, "area");
  auto mesh = static_cast<std::size_t>(need_int(cfg, "mesh", 0, static_cast<long long>(steps)));
  if (mesh == 0) mesh = steps;  // solve on the driver grid by default
  if (steps % mesh != 0) throw UsageError("'mesh' must divide 'steps'");
  const std::string out = need_str(cfg, "out");
  check_path_budget(dim, static_cast<long long>(steps), "solve");

  const json& start_cfg = field(cfg, "start");
  if (!start_cfg.is_object()) throw UsageError("'start' must be an object");
  reject_unknown(start_cfg, {"scale", "file", "index"}, "solve: 'start'");
  const double start_scale = need_num(start_cfg, "scale", -1e6, 1e6);
  const std::string start_file = need_str(start_cfg, "file");

  const json& scheme_cfg = field(cfg, "scheme");
  if (!scheme_cfg.is_object()) throw UsageError("'scheme' must be an object");
  reject_unknown(scheme_cfg, {"kind", "iterations", "tol"}, "solve: 'scheme'");
  const std::string scheme_kind = need_str(scheme_cfg, "kind");
  if (scheme_kind != "one-step" && scheme_kind != "picard")
    throw UsageError("'scheme.kind' must be \"one-step\" or \"picard\"");
  SdeScheme scheme;
  scheme.kind = scheme_kind == "picard" ? SdeScheme::Kind::Picard : SdeScheme::Kind::OneStep;
  scheme.iterations = static_cast<std::size_t>(need_int(scheme_cfg, "iterations", 1, 256));
  scheme.tol = need_num(scheme_cfg, "tol", 1e-15, 1.0);
  scheme.check_self_adjoint = adjoint_pairing_used;

  WallClock clock;
  AlgebraElement start;
  if (start_file.empty()) {
    start = start_scale * AlgebraElement::identity(Space{dim});
  } else {
    const GridPath sp = load_path(start_file);
    const auto index =
        static_cast<std::size_t>(need_int(start_cfg, "index", 0,
                                          static_cast<long long>(sp.points()) - 1));
    if (sp.dim() != dim)
      throw UsageError(strf("start file holds dimension %d, config says %d", sp.dim(), dim));
    start = sp.values[index];
  }

  const GridPath x = simulate_free_bm(Space{dim}, uniform_times(horizon, steps), seed, path_id);
  const LevyArea area(x, kind);
  const SdeResult res = solve_rough_sde(start, fs, gs, area, coarse_indices(steps, mesh), scheme);
  if (!res.converged)
    throw NumericError(strf("picard iteration stalled at gap %.17g", res.final_gap));

  StudyTable t;
  t.columns = {"index", "time", "op_norm", "sa_defect"};
  const ControlledProcess& sol = res.solution;
  for (std::size_t k = 0; k < sol.points(); ++k)
    t.add_row({static_cast<double>(sol.indices[k]), sol.y.times[k], op_norm(sol.y.values[k]),
               sol.y.values[k].self_adjoint_defect()});
  const auto dir = prepare_outdir(out);
  save_path(sol.y, (dir / "solution.ncpath").string(), seed);
  write_bytes(dir / "solution.csv", csv_bytes(t));
  write_manifest(dir, "solve", cfg, seed, clock.seconds());
  std::printf("solve: %s scheme on %zu of %zu steps, final op norm %.17g\n", scheme_kind.c_str(),
              mesh, steps, op_norm(sol.y.values.back()));
  std::printf("self-adjoint defect %.3e, final gap %.3e, saved %s\n", sol.self_adjoint_defect(),
              res.final_gap, (dir / "solution.ncpath").string().c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// studies

struct StudyRun {
  StudyTable table;
  std::uint64_t seed = 0;
  bool pass = true;
  std::string fail_note;
};

void print_convergence(const char* name, const ConvergenceStudyResult& r) {
  for (std::size_t i = 0; i < r.mesh.size(); ++i)
    std::printf("  mesh %-12.6g mean distance %.6g\n", r.mesh[i], r.mean_distance[i]);
  std::printf("%s: rate %.4f (r2 %.4f), %s\n", name, r.fit.rate, r.fit.r2,
              r.decreasing ? "decreasing" : "not decreasing");
}

const json kAreaStudyDefaults = json::parse(R"({
  "dim": 16, "fine_steps": 256, "knot_counts": [8, 16, 32, 64],
  "gamma": 0.4, "horizon": 1.0, "seed": 1, "paths": 2,
  "compare_steps": 4, "probes": 2,
  "min_rate": 0.2, "min_r2": 0.5, "out": "."
})");

StudyRun run_area_study(const json& cfg) {
  reject_unknown(cfg,
                 {"dim", "fine_steps", "knot_counts", "gamma", "horizon", "seed", "paths",
                  "compare_steps", "probes", "min_rate", "min_r2", "out"},
                 "study area-convergence");
  AreaStudyConfig c;
  c.dim = static_cast<int>(need_int(cfg, "dim", 2, 256));
  c.fine_steps = static_cast<std::size_t>(need_int(cfg, "fine_steps", 2, 1 << 14));
  c.knot_counts = need_size_list(cfg, "knot_counts", 1, 1 << 14);
  c.gamma = need_num(cfg, "gamma", 0.05, 0.5);
  c.horizon = need_num(cfg, "horizon", 1e-9, 1e6);
  c.seed = need_seed(cfg, "seed");
  c.paths = static_cast<std::size_t>(need_int(cfg, "paths", 1, 256));
  c.compare_steps = static_cast<std::size_t>(need_int(cfg, "compare_steps", 1, 1 << 14));
  c.probes = static_cast<std::size_t>(need_int(cfg, "probes", 1, 64));
  const double min_rate = need_num(cfg, "min_rate", 0.0, 100.0);
  const double min_r2 = need_num(cfg, "min_r2", 0.0, 1.0);

  const ConvergenceStudyResult r = area_convergence_study(c);
  print_convergence("area-convergence", r);
  StudyRun run;
  run.table = r.table;
  run.seed = c.seed;
  if (!(r.decreasing && r.fit.valid && r.fit.rate >= min_rate && r.fit.r2 >= min_r2)) {
    run.pass = false;
    run.fail_note = strf(
        "area-convergence: rate=%.4f r2=%.4f decreasing=%d (need rate >= %.3f, r2 >= %.3f, "
        "decreasing means)",
        r.fit.rate, r.fit.r2, r.decreasing ? 1 : 0, min_rate, min_r2);
  }
  return run;
}

const json kSolutionStudyDefaults = json::parse(R"({
  "dim": 16, "fine_steps": 512, "knot_counts": [4, 8, 16, 32, 64], "solve_steps": 0,
  "f": [{"kind": "poly", "coeffs": [1.0]}, {"kind": "poly", "coeffs": [0.0, 0.5]}],
  "g": "reverse-star", "start_scale": 0.25,
  "gamma": 0.4, "horizon": 0.5, "seed": 21, "paths": 4,
  "min_rate": 0.2, "min_r2": 0.5, "out": "."
})");

StudyRun run_solution_study(const json& cfg) {
  reject_unknown(cfg,
                 {"dim", "fine_steps", "knot_counts", "solve_steps", "f", "g", "start_scale",
                  "gamma", "horizon", "seed", "paths", "min_rate", "min_r2", "out"},
                 "study solution-convergence");
  SolutionStudyConfig c;
  c.dim = static_cast<int>(need_int(cfg, "dim", 2, 256));
  c.fine_steps = static_cast<std::size_t>(need_int(cfg, "fine_steps", 2, 1 << 14));
  c.knot_counts = need_size_list(cfg, "knot_counts", 1, 1 << 14);
  c.solve_steps = static_cast<std::size_t>(need_int(cfg, "solve_steps", 0, 1 << 14));
  c.fs = need_functions(cfg, "f");
  bool adjoint = true;
  c.gs = resolve_g(cfg, "g", c.fs, false, &adjoint);
  c.start_scale = need_num(cfg, "start_scale", -1e6, 1e6);
  c.gamma = need_num(cfg, "gamma", 0.05, 0.5);
  c.horizon = need_num(cfg, "horizon", 1e-9, 1e6);
  c.seed = need_seed(cfg, "seed");
  c.paths = static_cast<std::size_t>(need_int(cfg, "paths", 1, 256));
  const double min_rate = need_num(cfg, "min_rate", 0.0, 100.0);
  const double min_r2 = need_num(cfg, "min_r2", 0.0, 1.0);

  const ConvergenceStudyResult r = solution_convergence_study(c);
  print_convergence("solution-convergence", r);
  StudyRun run;
  run.table = r.table;
  run.seed = c.seed;
  if (!(r.decreasing && r.fit.valid && r.fit.rate >= min_rate && r.fit.r2 >= min_r2)) {
    run.pass = false;
    run.fail_note = strf(
        "solution-convergence: rate=%.4f r2=%.4f decreasing=%d (need rate >= %.3f, r2 >= %.3f, "
        "decreasing means)",
        r.fit.rate, r.fit.r2, r.decreasing ? 1 : 0, min_rate, min_r2);
  }
  return run;
}

const json kItoFormulaDefaults = json::parse(R"({
  "dim": 64, "steps": 1024, "horizon": 1.0, "seed": 42, "path_id": 0,
  "f": {"kind": "poly", "coeffs": [0.0, 0.0, 1.0]},
  "coarse_steps": 32, "max_rel": 0.1, "out": "."
})");

StudyRun run_ito_formula_study(const json& cfg) {
  reject_unknown(cfg,
                 {"dim", "steps", "horizon", "seed", "path_id", "f", "coarse_steps", "max_rel",
                  "out"},
                 "study ito-formula");
  const int dim = static_cast<int>(need_int(cfg, "dim", 2, 512));
  const auto steps = static_cast<std::size_t>(need_int(cfg, "steps", 2, 1 << 13));
  const double horizon = need_num(cfg, "horizon", 1e-9, 1e6);
  const std::uint64_t seed = need_seed(cfg, "seed");
  const std::uint64_t path_id = need_seed(cfg, "path_id");
  const FunctionSpec f = need_function(cfg, "f");
  const auto coarse_steps = static_cast<std::size_t>(
      need_int(cfg, "coarse_steps", 1, static_cast<long long>(steps)));
  const double max_rel = need_num(cfg, "max_rel", 0.0, 1e6);
  check_path_budget(dim, static_cast<long long>(steps), "study ito-formula");
  if (steps % coarse_steps != 0) throw UsageError("'coarse_steps' must divide 'steps'");

  const GridPath x = simulate_free_bm(Space{dim}, uniform_times(horizon, steps), seed, path_id);
  const std::vector<std::size_t> coarse = coarse_indices(steps, coarse_steps);
  const ItoFormulaReport rep = ito_formula_check(f, x, coarse);
  double qv = 0.0;
  for (std::size_t a = 0; a + 1 < coarse.size(); ++a)
    for (std::size_t b = a + 1; b < coarse.size(); ++b)
      qv = std::max(qv, quadratic_variation_defect(x, coarse[a], coarse[b]));
  const double scale = std::max(rep.scale, 1e-30);
  const double rel_s = rep.strat_residual / scale;
  const double rel_i = rep.ito_residual / scale;

  StudyRun run;
  run.table.columns = {"strat_residual", "ito_residual", "scale",
                       "strat_rel",      "ito_rel",      "qv_defect"};
  run.table.add_row({rep.strat_residual, rep.ito_residual, rep.scale, rel_s, rel_i, qv});
  run.seed = seed;
  std::printf("ito-formula: strat residual %.6g, ito residual %.6g, scale %.6g\n",
              rep.strat_residual, rep.ito_residual, rep.scale);
  std::printf("  relative %.6g / %.6g, quadratic variation defect %.6g\n", rel_s, rel_i, qv);
  if (!(rel_s <= max_rel && rel_i <= max_rel)) {
    run.pass = false;
    run.fail_note = strf("ito-formula: strat_rel=%.6g ito_rel=%.6g exceed max_rel=%.6g", rel_s,
                         rel_i, max_rel);
  }
  return run;
}

const json kItoStratoDefaults = json::parse(R"({
  "dim": 128, "steps": 1024, "horizon": 1.0, "seed": 42, "path_id": 0,
  "f": [{"kind": "poly", "coeffs": [0.0, 0.0, 1.0]}], "g": "reverse-star",
  "coarse_steps": 32, "max_residual": 0.005, "out": "."
})");

StudyRun run_ito_strato_study(const json& cfg) {
  reject_unknown(cfg,
                 {"dim", "steps", "horizon", "seed", "path_id", "f", "g", "coarse_steps",
                  "max_residual", "out"},
                 "study ito-strato");
  const int dim = static_cast<int>(need_int(cfg, "dim", 2, 512));
  const auto steps = static_cast<std::size_t>(need_int(cfg, "steps", 2, 1 << 13));
  const double horizon = need_num(cfg, "horizon", 1e-9, 1e6);
  const std::uint64_t seed = need_seed(cfg, "seed");
  const std::uint64_t path_id = need_seed(cfg, "path_id");
  const std::vector<FunctionSpec> fs = need_functions(cfg, "f");
  const std::vector<FunctionSpec> gs = resolve_g(cfg, "g", fs, true, nullptr);
  const auto coarse_steps = static_cast<std::size_t>(
      need_int(cfg, "coarse_steps", 1, static_cast<long long>(steps)));
  const double max_residual = need_num(cfg, "max_residual", 0.0, 1e6);
  check_path_budget(dim, static_cast<long long>(steps), "study ito-strato");
  if (steps % coarse_steps != 0) throw UsageError("'coarse_steps' must divide 'steps'");

  const GridPath x = simulate_free_bm(Space{dim}, uniform_times(horizon, steps), seed, path_id);
  const ControlledProcess y = controlled_lift_of_driver(x, full_grid(steps));
  const GapReport rep = ito_strato_gap_check(fs, gs, y, coarse_indices(steps, coarse_steps));

  StudyRun run;
  run.table.columns = {"residual", "scale"};
  run.table.add_row({rep.residual, rep.scale});
  run.seed = seed;
  std::printf("ito-strato: residual %.6g against gap scale %.6g\n", rep.residual, rep.scale);
  if (!(rep.residual <= max_residual)) {
    run.pass = false;
    run.fail_note =
        strf("ito-strato: residual=%.6g exceeds max_residual=%.6g", rep.residual, max_residual);
  }
  return run;
}

const json kBgDefaults = json::parse(R"({
  "dim": 64, "steps": 16, "horizon": 1.0, "seed": 1, "paths": 20,
  "slack": 1.1, "out": "."
})");

StudyRun run_bg_study(const json& cfg) {
  reject_unknown(cfg, {"dim", "steps", "horizon", "seed", "paths", "slack", "out"}, "study bg");
  const int dim = static_cast<int>(need_int(cfg, "dim", 2, 512));
  const auto steps = static_cast<std::size_t>(need_int(cfg, "steps", 1, 1 << 10));
  const double horizon = need_num(cfg, "horizon", 1e-9, 1e6);
  const std::uint64_t seed = need_seed(cfg, "seed");
  const auto paths = static_cast<std::size_t>(need_int(cfg, "paths", 1, 512));
  const double slack = need_num(cfg, "slack", 1.0, 100.0);
  check_path_budget(dim, static_cast<long long>(steps), "study bg");

  const std::vector<double> times = uniform_times(horizon, steps);
  std::vector<std::vector<double>> rows(paths);
  parallel_for(paths, [&](std::size_t p) {
    const GridPath x = simulate_free_bm(Space{dim}, times, seed, p);
    // independent coefficient seed per path, fixed derivation for reruns
    const std::vector<AlgebraElement> v =
        adapted_step_integrand(x, seed ^ (0x9e3779b97f4a7c15ull * (p + 1)));
    const StepIntegrandBound b = bg_inequality_check(v, x);
    rows[p] = {static_cast<double>(p), b.lhs, b.rhs, b.lhs / std::max(b.rhs, 1e-300)};
  });
  StudyRun run;
  run.table.columns = {"path", "lhs", "rhs", "ratio"};
  run.seed = seed;
  double worst = 0.0;
  std::size_t worst_p = 0;
  for (std::size_t p = 0; p < paths; ++p) {
    run.table.add_row(rows[p]);
    if (rows[p][3] > worst) {
      worst = rows[p][3];
      worst_p = p;
    }
  }
  std::printf("bg: %zu paths, worst lhs/rhs %.6g at path %zu (slack %.3g)\n", paths, worst,
              worst_p, slack);
  if (!(worst <= slack)) {
    run.pass = false;
    run.fail_note = strf("bg: path=%zu lhs=%.6g rhs=%.6g ratio=%.6g exceeds slack=%.3g", worst_p,
                         rows[worst_p][1], rows[worst_p][2], worst, slack);
  }
  return run;
}

const json kNonextensionDefaults = json::parse(R"({
  "dim": 256, "ns": [4, 8, 16], "seed": 1,
  "min_growth": 1.6, "max_b_factor": 4.4, "out": "."
})");

StudyRun run_nonextension_study(const json& cfg) {
  reject_unknown(cfg, {"dim", "ns", "seed", "min_growth", "max_b_factor", "out"},
                 "study nonextension");
  const int dim = static_cast<int>(need_int(cfg, "dim", 2, 512));
  const std::vector<std::size_t> ns = need_size_list(cfg, "ns", 1, 256);
  const std::uint64_t seed = need_seed(cfg, "seed");
  const double min_growth = need_num(cfg, "min_growth", 0.0, 100.0);
  const double max_b_factor = need_num(cfg, "max_b_factor", 0.0, 100.0);

  const std::vector<IncrementGrowthRow> rows = nonextension_demo(ns, Space{dim}, seed);
  StudyRun run;
  run.table = increment_growth_table(rows);
  run.seed = seed;
  const double growth = rows.back().ratio / rows.front().ratio;
  std::printf("nonextension: diagonal/spatial ratio grows %.4f x from n=%zu to n=%zu\n", growth,
              rows.front().n, rows.back().n);
  for (const IncrementGrowthRow& r : rows)
    std::printf("  n %3zu  diagonal %.6g  spatial %.6g  ratio %.6g\n", r.n, r.diagonal, r.spatial,
                r.ratio);
  if (!(growth >= min_growth)) {
    run.pass = false;
    run.fail_note = strf("nonextension: ratio growth %.4f below min_growth %.4f", growth,
                         min_growth);
    return run;
  }
  for (const IncrementGrowthRow& r : rows)
    if (!(r.spatial <= max_b_factor * std::sqrt(static_cast<double>(r.n)))) {
      run.pass = false;
      run.fail_note = strf("nonextension: n=%zu spatial=%.6g exceeds %.3g*sqrt(n)=%.6g", r.n,
                           r.spatial, max_b_factor,
                           max_b_factor * std::sqrt(static_cast<double>(r.n)));
      return run;
    }
  return run;
}

const json kBoundsDefaults = json::parse(R"({
  "dim": 16, "fine_steps": 256, "solve_steps": 64,
  "f": [{"kind": "poly", "coeffs": [0.0, 1.0]}], "g": "reverse-star",
  "start_scale": 0.25, "gamma": 0.4, "horizon": 0.25, "seed": 1,
  "amplitudes": [0.25, 0.5, 1.0, 2.0], "slack": 1.5, "out": "."
})");

StudyRun run_bounds_study(const json& cfg) {
  reject_unknown(cfg,
                 {"dim", "fine_steps", "solve_steps", "f", "g", "start_scale", "gamma", "horizon",
                  "seed", "amplitudes", "slack", "out"},
                 "study bounds");
  BoundStudyConfig c;
  c.dim = static_cast<int>(need_int(cfg, "dim", 2, 256));
  c.fine_steps = static_cast<std::size_t>(need_int(cfg, "fine_steps", 2, 1 << 14));
  c.solve_steps = static_cast<std::size_t>(need_int(cfg, "solve_steps", 1, 1 << 14));
  c.fs = need_functions(cfg, "f");
  bool adjoint = true;
  c.gs = resolve_g(cfg, "g", c.fs, false, &adjoint);
  c.start_scale = need_num(cfg, "start_scale", -1e6, 1e6);
  c.gamma = need_num(cfg, "gamma", 0.05, 0.5);
  c.horizon = need_num(cfg, "horizon", 1e-9, 1e6);
  c.seed = need_seed(cfg, "seed");
  c.amplitudes = need_num_list(cfg, "amplitudes", 1e-9, 1e6);
  const double slack = need_num(cfg, "slack", 1.0, 100.0);

  const BoundStudyResult r = bound_growth_study(c);
  StudyRun run;
  run.table = r.table;
  run.seed = c.seed;
  std::printf("bounds: fitted exponent %.4f, predicted factor %.4f, measured %.4f\n",
              r.fitted_exponent, r.predicted_factor, r.measured_factor);
  if (!(r.within(slack) && r.fitted_exponent > 0.0)) {
    run.pass = false;
    run.fail_note = strf(
        "bounds: measured factor %.4f vs predicted %.4f (exponent %.4f) breaks slack %.3g",
        r.measured_factor, r.predicted_factor, r.fitted_exponent, slack);
  }
  return run;
}

int cmd_study(const std::string& name, const std::string& cfg_file,
              const std::vector<std::string>& extras) {
  struct Entry {
    const json* defaults;
    StudyRun (*run)(const json&);
  };
  static const std::map<std::string, Entry> kStudies = {
      {"area-convergence", {&kAreaStudyDefaults, run_area_study}},
      {"solution-convergence", {&kSolutionStudyDefaults, run_solution_study}},
      {"ito-formula", {&kItoFormulaDefaults, run_ito_formula_study}},
      {"ito-strato", {&kItoStratoDefaults, run_ito_strato_study}},
      {"bg", {&kBgDefaults, run_bg_study}},
      {"nonextension", {&kNonextensionDefaults, run_nonextension_study}},
      {"bounds", {&kBoundsDefaults, run_bounds_study}},
  };
  const auto it = kStudies.find(name);
  if (it == kStudies.end()) {
    std::string names;
    for (const auto& [n, e] : kStudies) names += (names.empty() ? "" : ", ") + n;
    throw UsageError("unknown study '" + name + "'; expected one of: " + names);
  }
  const json cfg = effective_config(*it->second.defaults, cfg_file, extras);
  WallClock clock;
  const StudyRun run = it->second.run(cfg);
  const auto dir = prepare_outdir(need_str(cfg, "out"));
  write_bytes(dir / (name + ".csv"), csv_bytes(run.table));
  write_manifest(dir, name, cfg, run.seed, clock.seconds());
  if (!run.pass) throw CheckFailure(run.fail_note);
  std::printf("study %s: PASS\n", name.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"q-gaussian moment tables, free Brownian matrix models, rough integrals and SDEs"};
  app.set_version_flag("--version", std::string(kGitDescribe));
  app.require_subcommand(1);

  double q = 0.0;
  int order = 8;
  std::string moments_out;
  CLI::App* moments_cmd =
      app.add_subcommand("moments", "pairing-sum vs spectral-density moments");
  moments_cmd->add_option("--q", q, "q parameter, |q| <= 0.9");
  moments_cmd->add_option("--order", order, "largest even moment order, <= 12");
  moments_cmd->add_option("--out", moments_out, "also write moments.csv + manifest.json here");

  std::string sim_cfg, int_cfg, sol_cfg, study_cfg, study_name;
  CLI::App* simulate_cmd = app.add_subcommand("simulate", "sample a Hermitian matrix walk");
  simulate_cmd->add_option("--config", sim_cfg, "JSON config file");
  simulate_cmd->allow_extras();
  CLI::App* integrate_cmd =
      app.add_subcommand("integrate", "rough integral of f(X) dX g(X) along a sampled path");
  integrate_cmd->add_option("--config", int_cfg, "JSON config file");
  integrate_cmd->allow_extras();
  CLI::App* solve_cmd = app.add_subcommand("solve", "grid solution of dY = sum f_i(Y) dX g_i(Y)");
  solve_cmd->add_option("--config", sol_cfg, "JSON config file");
  solve_cmd->allow_extras();
  CLI::App* study_cmd = app.add_subcommand("study", "run a scripted experiment");
  study_cmd
      ->add_option("name", study_name,
                   "area-convergence, solution-convergence, ito-formula, ito-strato, bg, "
                   "nonextension, bounds")
      ->required();
  study_cmd->add_option("--config", study_cfg, "JSON config file");
  study_cmd->allow_extras();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*moments_cmd) return cmd_moments(q, order, moments_out);
    if (*simulate_cmd)
      return cmd_simulate(effective_config(kSimulateDefaults, sim_cfg, simulate_cmd->remaining()));
    if (*integrate_cmd)
      return cmd_integrate(
          effective_config(kIntegrateDefaults, int_cfg, integrate_cmd->remaining()));
    if (*solve_cmd)
      return cmd_solve(effective_config(kSolveDefaults, sol_cfg, solve_cmd->remaining()));
    if (*study_cmd) return cmd_study(study_name, study_cfg, study_cmd->remaining());
  } catch (const CheckFailure& e) {
    std::printf("FAIL %s\n", e.what());
    return kExitCheck;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const SizeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "numeric: %s\n", e.what());
    return kExitNumeric;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric: %s\n", e.what());
    return kExitNumeric;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "config: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
