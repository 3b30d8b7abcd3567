// Python bindings for the numerical core. The surface mirrors the command
// line tool: moment combinatorics, matrix-model simulation, rough integrals,
// and the SDE solver, with matrices exchanged as numpy arrays and functions
// given in the same JSON form the tool's config files use, e.g.
// '{"kind": "poly", "coeffs": [0.0, 1.0]}'.

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <complex>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "ncrough/algebra.hpp"
#include "ncrough/errors.hpp"
#include "ncrough/experiments.hpp"
#include "ncrough/funcalc.hpp"
#include "ncrough/pairings.hpp"
#include "ncrough/rough.hpp"
#include "ncrough/sde.hpp"
#include "ncrough/version.hpp"

namespace py = pybind11;

namespace {

using namespace ncrough;

GridPath make_path(std::vector<double> times, std::vector<Matrix> values) {
  GridPath p;
  p.times = std::move(times);
  for (auto& m : values) p.values.emplace_back(std::move(m));
  p.check();
  return p;
}

std::vector<FunctionSpec> parse_functions(const std::vector<std::string>& specs) {
  if (specs.empty()) throw UsageError("at least one coefficient function is required");
  std::vector<FunctionSpec> out;
  for (const auto& s : specs) out.push_back(function_from_json(nlohmann::json::parse(s)));
  return out;
}

std::vector<FunctionSpec> resolve_g(const std::variant<std::string, std::vector<std::string>>& g,
                                    const std::vector<FunctionSpec>& fs) {
  if (const auto* mode = std::get_if<std::string>(&g)) {
    if (*mode == "reverse-star") return adjoint_pairing(fs, true);
    if (*mode == "same-star") return adjoint_pairing(fs, false);
    throw UsageError("g must be 'reverse-star', 'same-star', or a list of function specs");
  }
  const auto gs = parse_functions(std::get<std::vector<std::string>>(g));
  if (gs.size() != fs.size())
    throw UsageError("f and g lists must have the same length");
  return gs;
}

AreaKind area_from_name(const std::string& name) {
  if (name == "ito") return AreaKind::Ito;
  if (name == "strato" || name == "stratonovich") return AreaKind::Stratonovich;
  if (name == "smooth" || name == "smooth-lebesgue") return AreaKind::SmoothLebesgue;
  if (name == "interp" || name == "interpolated") return AreaKind::Interpolated;
  throw UsageError("unknown area kind '" + name + "'");
}

std::vector<std::size_t> full_grid(std::size_t steps) {
  std::vector<std::size_t> g(steps + 1);
  std::iota(g.begin(), g.end(), std::size_t{0});
  return g;
}

}  // namespace

PYBIND11_MODULE(ncrough, m) {
  m.doc() = "q-gaussian moment combinatorics, free Brownian matrix models, "
            "rough integrals and SDEs";
  m.attr("__version__") = kGitDescribe;

  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<SizeError>(m, "SizeError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

  // Moment combinatorics.
  m.def("pairing_count", &pairing_count, py::arg("points"),
        "(r-1)!! pair partitions of r points; 0 for odd r.");
  m.def("crossing_histogram", &crossing_histogram, py::arg("points"),
        "Number of pairings per crossing count.");
  m.def(
      "q_joint_moment",
      [](std::vector<double> times, double q, std::optional<Eigen::MatrixXd> gram) {
        MomentQuery query;
        query.times = std::move(times);
        query.q = q;
        query.gram = std::move(gram);
        return q_joint_moment(query);
      },
      py::arg("times"), py::arg("q") = 0.0, py::arg("gram") = std::nullopt,
      "Pairing sum with q^crossings weights; covariance min(s, t) unless a "
      "Gram matrix is given.");
  m.def(
      "moment_polynomial",
      [](int order) {
        const auto coeffs = q_moment_polynomial(std::vector<Rational>(order, Rational(1)));
        std::vector<double> out;
        for (const auto& c : coeffs) out.push_back(c.convert_to<double>());
        return out;
      },
      py::arg("order"),
      "Coefficients in powers of q of the equal-time moment of the given order.");
  m.def("density_moment", &density_moment, py::arg("q"), py::arg("order"),
        "Moment of the q-semicircle density by quadrature.");

  // Matrix model.
  m.def("uniform_times", &uniform_times, py::arg("horizon"), py::arg("steps"));
  m.def(
      "sample_gue_increment",
      [](int dim, double dt, std::uint64_t seed, std::uint64_t path_id,
         std::uint64_t step_index) {
        return sample_gue_increment(Space{dim}, dt, seed, path_id, step_index).matrix();
      },
      py::arg("dim"), py::arg("dt"), py::arg("seed"), py::arg("path_id") = 0,
      py::arg("step_index") = 0,
      "One self-adjoint Gaussian increment of variance dt, normalized so the "
      "semicircle limit has radius 2.");
  m.def(
      "simulate_free_bm",
      [](int dim, std::vector<double> times, std::uint64_t seed, std::uint64_t path_id) {
        const GridPath p = simulate_free_bm(Space{dim}, std::move(times), seed, path_id);
        std::vector<Matrix> out;
        for (const auto& v : p.values) out.push_back(v.matrix());
        return out;
      },
      py::arg("dim"), py::arg("times"), py::arg("seed"), py::arg("path_id") = 0,
      "Cumulative increment path at the given times; one matrix per time.");

  // Pointwise algebra diagnostics.
  m.def(
      "op_norm", [](const Matrix& m) { return op_norm(AlgebraElement(m)); }, py::arg("a"));
  m.def(
      "normalized_trace",
      [](const Matrix& m) { return normalized_trace(AlgebraElement(m)); }, py::arg("a"));
  m.def(
      "self_adjoint_defect",
      [](const Matrix& m) { return AlgebraElement(m).self_adjoint_defect(); }, py::arg("a"));
  m.def(
      "quadratic_variation_defect",
      [](std::vector<double> times, std::vector<Matrix> values, std::size_t i, std::size_t j) {
        const GridPath p = make_path(std::move(times), std::move(values));
        return quadratic_variation_defect(p, i, j);
      },
      py::arg("times"), py::arg("values"), py::arg("i"), py::arg("j"),
      "Operator norm of (t_j - t_i) 1 minus the sum of squared increments.");

  // Rough integration and the SDE solver.
  m.def(
      "rough_integral",
      [](std::vector<double> times, std::vector<Matrix> values,
         const std::vector<std::string>& f,
         const std::variant<std::string, std::vector<std::string>>& g,
         const std::string& area, std::size_t coarse_steps, double tol) {
        const GridPath x = make_path(std::move(times), std::move(values));
        const auto fs = parse_functions(f);
        const auto gs = resolve_g(g, fs);
        const ControlledProcess y = controlled_lift_of_driver(x, full_grid(x.steps()));
        const ControlledBiprocess bip = lift_integrand(fs, gs, y);
        const LevyArea levy(x, area_from_name(area));
        const auto coarse = coarse_indices(x.steps(), coarse_steps);
        RefineOptions opts;
        opts.tol = tol;
        const RoughIntegralResult res = rough_integral(bip, levy, coarse, opts);
        return py::make_tuple(res.values.at(0, coarse.size() - 1).matrix(), res.cauchy_gap);
      },
      py::arg("times"), py::arg("values"), py::arg("f"), py::arg("g") = "reverse-star",
      py::arg("area") = "strato", py::arg("coarse_steps") = 16, py::arg("tol") = 1e-9,
      "Corrected-sum integral of f(X) dX g(X) over the whole window; returns "
      "(value, refinement gap).");
  m.def(
      "solve_sde",
      [](std::vector<double> times, std::vector<Matrix> values, const Matrix& start,
         const std::vector<std::string>& f,
         const std::variant<std::string, std::vector<std::string>>& g,
         const std::string& area, const std::string& scheme) {
        const GridPath x = make_path(std::move(times), std::move(values));
        const auto fs = parse_functions(f);
        const bool adjoint_paired = std::holds_alternative<std::string>(g);
        const auto gs = resolve_g(g, fs);
        const LevyArea levy(x, area_from_name(area));
        SdeScheme opts;
        if (scheme == "picard")
          opts.kind = SdeScheme::Kind::Picard;
        else if (scheme != "one-step")
          throw UsageError("scheme must be 'one-step' or 'picard'");
        opts.check_self_adjoint = adjoint_paired;
        const SdeResult res =
            solve_rough_sde(AlgebraElement(start), fs, gs, levy, full_grid(x.steps()), opts);
        std::vector<Matrix> traj;
        double sa = 0.0;
        for (const auto& v : res.solution.y.values) {
          traj.push_back(v.matrix());
          sa = std::max(sa, v.self_adjoint_defect());
        }
        return py::make_tuple(std::move(traj), res.final_gap, sa);
      },
      py::arg("times"), py::arg("values"), py::arg("start"), py::arg("f"),
      py::arg("g") = "reverse-star", py::arg("area") = "strato",
      py::arg("scheme") = "one-step",
      "Grid solution of dY = sum f_i(Y) dX g_i(Y); returns (trajectory, "
      "scheme gap, worst self-adjointness defect).");
}
