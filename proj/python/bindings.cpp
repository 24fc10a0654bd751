#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pforge/apath.hpp"
#include "pforge/groupoid.hpp"
#include "pforge/resolution.hpp"

namespace py = pybind11;
using namespace pforge;

namespace {

Rational parse_tau(const std::string& s) {
  auto slash = s.find('/');
  if (slash == std::string::npos) return Rational(std::stoll(s));
  return Rational(std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1)));
}

ResolutionAtlas build(const std::string& family, int k, int n, const std::vector<int>& levi, const std::string& tau,
                      int l) {
  if (family == "r2") return build_r2(k);
  if (family == "springer") return springer(n, levi);
  if (family == "grothendieck") return grothendieck_sl2(parse_tau(tau));
  if (family == "kleinian") return kleinian(l);
  throw std::invalid_argument("unknown family " + family);
}

std::vector<std::pair<double, double>> real_pairs(const std::vector<Point>& pts) {
  std::vector<std::pair<double, double>> r;
  for (const auto& p : pts) r.emplace_back(p[0].real(), p[1].real());
  return r;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Poisson groupoid and resolution verification core";
  m.attr("__version__") = kToolkitVersion;

  m.def("catalog_keys", &catalog_keys);

  m.def(
      "catalog_verify",
      [](const std::string& key, std::int64_t samples, double tol, std::uint64_t seed) {
        py::gil_scoped_release nogil;
        auto g = catalog(key);
        Report r = verify_axioms(*g, samples, tol, seed);
        r.campaign_id = "catalog-verify-" + key;
        r.target = key;
        if (g->omega) r.absorb(verify_symplectic(*g, samples, seed), "symplectic.");
        return report_to_json(r, false);
      },
      py::arg("key"), py::arg("samples") = 200, py::arg("tol") = 1e-9, py::arg("seed") = 1);

  m.def(
      "resolution_verify",
      [](const std::string& family, int k, int n, const std::vector<int>& levi, const std::string& tau, int l,
         std::int64_t samples, double tol, std::uint64_t seed) {
        py::gil_scoped_release nogil;
        Report r = verify_resolution(build(family, k, n, levi, tau, l), samples, tol, seed);
        r.campaign_id = "resolution-verify-" + family;
        return report_to_json(r, false);
      },
      py::arg("family"), py::arg("k") = 0, py::arg("n") = 2, py::arg("levi") = std::vector<int>{},
      py::arg("tau") = "2", py::arg("l") = 2, py::arg("samples") = 200, py::arg("tol") = 1e-8, py::arg("seed") = 1);

  m.def(
      "atlas_manifest",
      [](const std::string& family, int k, int n, const std::vector<int>& levi, const std::string& tau, int l) {
        return atlas_manifest(build(family, k, n, levi, tau, l));
      },
      py::arg("family"), py::arg("k") = 0, py::arg("n") = 2, py::arg("levi") = std::vector<int>{},
      py::arg("tau") = "2", py::arg("l") = 2);

  m.def(
      "plane_fiber",
      [](double x, double y, int count, int k) { return real_pairs(fiber_enumerate(build_r2(k), Point{x, y}, count)); },
      py::arg("x"), py::arg("y"), py::arg("count") = 5, py::arg("k") = 0);

  m.def(
      "plane_monodromy",
      [](int k, int winding, double a, double b) {
        auto mr = loop_monodromy(build_r2(k), Point{a, b}, winding);
        py::dict d;
        d["end"] = py::make_tuple(mr.end[0].real(), mr.end[1].real());
        d["class_trivial"] = mr.class_trivial;
        d["fiber_match"] = mr.fiber_match;
        return d;
      },
      py::arg("k") = 0, py::arg("winding") = 1, py::arg("a") = 0.0, py::arg("b") = 1.0);

  m.def(
      "crossing_r2",
      [](double alpha) { return report_to_json(crossing_compatibility_r2(alpha), false); }, py::arg("alpha"));

  m.def(
      "is_zero",
      [](const std::string& text, const std::vector<std::string>& vars) {
        VarTable t;
        for (const auto& v : vars) t.add(v);
        return std::string(to_string(is_zero(parse(text, t)).status));
      },
      py::arg("expr"), py::arg("vars"));

  py::register_exception<IntegrationFailure>(m, "IntegrationFailure");
}
