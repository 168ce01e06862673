#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "hssulv/bench.hpp"
#include "hssulv/executor.hpp"
#include "hssulv/serialize.hpp"
#include "hssulv/taskgraph.hpp"
#include "hssulv/ulv.hpp"

namespace py = pybind11;
using namespace hssulv;

namespace {

py::array_t<double> points_array(const PointSet& ps) {
  py::array_t<double> out({ps.size(), Index{2}});
  auto m = out.mutable_unchecked<2>();
  for (Index i = 0; i < ps.size(); ++i) {
    m(i, 0) = ps[i][0];
    m(i, 1) = ps[i][1];
  }
  return out;
}

py::object json_to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json py_to_json(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

}  // namespace

PYBIND11_MODULE(_hssulv, m) {
  m.doc() = "HSS matrix construction and ULV factorization for 2D kernel matrices";

  py::register_exception<FactorizationError>(m, "FactorizationError", PyExc_ArithmeticError);

  py::enum_<KernelKind>(m, "KernelKind")
      .value("laplace2d", KernelKind::Laplace2D)
      .value("yukawa", KernelKind::Yukawa)
      .value("matern", KernelKind::Matern);

  py::class_<KernelSpec>(m, "KernelSpec")
      .def_static("laplace2d", &KernelSpec::laplace2d, py::arg("epsilon") = 1e-9)
      .def_static("yukawa", &KernelSpec::yukawa, py::arg("alpha") = 1.0, py::arg("theta") = 1e-9)
      .def_static("matern", &KernelSpec::matern, py::arg("sigma") = 1.0, py::arg("mu") = 0.03, py::arg("rho") = 0.5)
      .def_static("from_dict", [](const py::dict& d) { return kernel_from_json(py_to_json(d)); })
      .def("to_dict", [](const KernelSpec& k) { return json_to_py(kernel_to_json(k)); })
      .def_readonly("kind", &KernelSpec::kind)
      .def("__call__", [](const KernelSpec& k, double dist) { return kernel_at_distance(k, dist); })
      .def("__repr__", [](const KernelSpec& k) { return "KernelSpec(" + kernel_to_json(k).dump() + ")"; });

  py::class_<PointSet>(m, "PointSet")
      .def_property_readonly("size", &PointSet::size)
      .def_property_readonly("nleaf", &PointSet::nleaf)
      .def_property_readonly("max_level", &PointSet::max_level)
      .def("with_leaf_size", &PointSet::with_leaf_size)
      .def("points", &points_array)
      .def("node_range", [](const PointSet& ps, int l, Index i) {
        const IndexRange r = ps.node_range(l, i);
        return py::make_tuple(r.begin, r.begin + r.size);
      });
  m.def("generate_grid", &generate_grid, py::arg("n"), py::arg("side") = 1.0);
  m.def("is_valid_grid_size", &is_valid_grid_size);
  m.def("dense_block", [](const KernelSpec& k, const PointSet& ps, Index r0, Index r1, Index c0, Index c1) {
    return dense_block(k, ps, {r0, r1 - r0}, {c0, c1 - c0});
  });

  py::class_<HssMatrix>(m, "HssMatrix")
      .def_readonly("n", &HssMatrix::n)
      .def_readonly("nleaf", &HssMatrix::nleaf)
      .def_readonly("max_level", &HssMatrix::max_level)
      .def("rank", &HssMatrix::rank)
      .def("matvec", [](const HssMatrix& h, const Vector& x) { return matvec(h, x); })
      .def("to_dense", [](const HssMatrix& h) { return to_dense(h); })
      .def("save", [](const HssMatrix& h, const std::string& path) { save_hss(path, h); })
      .def_static("load", &load_hss);
  m.def(
      "build_hss",
      [](const KernelSpec& k, const PointSet& ps, Index nleaf, Index max_rank, Index upper_max_rank,
         double diagonal_shift) {
        BuildOptions o;
        o.max_rank = max_rank;
        o.upper_max_rank = upper_max_rank;
        o.diagonal_shift = diagonal_shift;
        return build_hss(k, ps, nleaf, o);
      },
      py::arg("kernel"), py::arg("points"), py::arg("nleaf"), py::arg("max_rank"), py::arg("upper_max_rank") = 0,
      py::arg("diagonal_shift") = 0.0, py::call_guard<py::gil_scoped_release>());
  m.def("construct_error", &construct_error, py::arg("h"), py::arg("kernel"), py::arg("points"),
        py::arg("seed") = 42);

  py::class_<UlvFactors>(m, "UlvFactors")
      .def_readonly("n", &UlvFactors::n)
      .def_readonly("max_level", &UlvFactors::max_level)
      .def("solve", [](const UlvFactors& f, const Vector& b) { return ulv_solve(f, b); })
      .def("__eq__", [](const UlvFactors& a, const UlvFactors& b) { return a == b; });
  m.def("ulv_factor", &ulv_factor_hss, py::call_guard<py::gil_scoped_release>());
  m.def("factorize", [](const HssMatrix& h, int workers) {
    ExecuteOptions o;
    o.workers = workers;
    py::gil_scoped_release release;
    return execute(build_dag(h), h, o).factors;
  }, py::arg("h"), py::arg("workers") = 1);
  m.def("solve_error", py::overload_cast<const UlvFactors&, const HssMatrix&, std::uint64_t>(&solve_error),
        py::arg("factors"), py::arg("h"), py::arg("seed") = 42);
  m.def("reconstruct_check", py::overload_cast<const UlvFactors&, const HssMatrix&>(&reconstruct_check));

  m.def("expected_task_count", &expected_task_count);
  m.def("comm_totals", [](const HssMatrix& h, int nprocs) {
    const TaskGraph g = build_dag(h);
    const CommTrace t = simulate_comm(g, assign_owners(g, nprocs), h);
    return py::make_tuple(t.total_entries(), t.events.size());
  });

  m.def("run_experiment", [](const py::dict& config) {
    const ExperimentConfig cfg = config_from_json(py_to_json(config));
    ExperimentReport r;
    {
      py::gil_scoped_release release;
      r = run_single(cfg);
    }
    return json_to_py(report_to_json(r));
  }, py::arg("config"));
  m.def("default_config", [] { return json_to_py(config_to_json(ExperimentConfig{})); });
}
