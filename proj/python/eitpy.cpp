// Python bindings: meshes, forward solves, Jacobian checks, priors, synthetic
// data and reconstructions. Intervals travel as lists of (a, b) tuples.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "eit/error.hpp"
#include "eit/experiments.hpp"
#include "eit/priors.hpp"
#include "eit/reconstruction.hpp"
#include "eit/sensitivity.hpp"

namespace py = pybind11;
using namespace eit;

namespace {

using MeshPtr = std::shared_ptr<TriMesh>;
using Pair = std::pair<double, double>;

std::vector<Interval> to_intervals(const std::vector<Pair>& pairs) {
  std::vector<Interval> out;
  for (const auto& [a, b] : pairs) out.push_back({a, b});
  return out;
}

std::vector<Pair> to_pairs(const std::vector<Interval>& intervals) {
  std::vector<Pair> out;
  for (const auto& iv : intervals) out.emplace_back(iv.a, iv.b);
  return out;
}

MeshPtr share(TriMesh mesh) { return std::make_shared<TriMesh>(std::move(mesh)); }

// Scalar when a float is passed, nodal for an array.
DomainConductivity conductivity(const py::object& sigma) {
  if (py::isinstance<py::float_>(sigma) || py::isinstance<py::int_>(sigma))
    return DomainConductivity::scalar(std::log(sigma.cast<double>()));
  return DomainConductivity::nodal(sigma.cast<Eigen::VectorXd>().array().log().matrix());
}

ForwardModel model_for(const MeshPtr& mesh, const std::vector<Pair>& intervals, const std::string& variant,
                       double amplitude) {
  const auto el = locate_electrodes(*mesh, to_intervals(intervals));
  return ForwardModel{mesh, el, parse_variant(variant), {static_cast<int>(el.size()), amplitude}};
}

ContactParams contact_of(const ForwardModel& model, const std::vector<double>& theta) {
  return ContactParams{model.variant, theta};
}

}  // namespace

PYBIND11_MODULE(eitpy, m) {
  m.doc() = "2D impedance tomography with spatially varying contact conductance";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<TriMesh, MeshPtr>(m, "Mesh")
      .def_property_readonly("nodes",
                             [](const TriMesh& t) {
                               Eigen::MatrixX2d p(t.num_nodes(), 2);
                               for (int i = 0; i < t.num_nodes(); ++i) p.row(i) = t.nodes[i].transpose();
                               return p;
                             })
      .def_property_readonly("triangles",
                             [](const TriMesh& t) {
                               Eigen::MatrixX3i tri(t.num_triangles(), 3);
                               for (int i = 0; i < t.num_triangles(); ++i)
                                 for (int k = 0; k < 3; ++k) tri(i, k) = t.triangles[i][k];
                               return tri;
                             })
      .def_readonly("boundary_nodes", &TriMesh::boundary_nodes)
      .def_readonly("perimeter", &TriMesh::perimeter)
      .def_property_readonly("num_nodes", &TriMesh::num_nodes)
      .def_property_readonly("area", &TriMesh::total_area)
      .def("refine", [](const TriMesh& t) { return share(refine_uniform(t)); })
      .def("write", [](const TriMesh& t, const std::string& path) { write_mesh(path, t); });

  m.def("disk_mesh", [](double radius, int boundary, double growth) { return share(make_disk_mesh(radius, boundary, growth)); },
        py::arg("radius"), py::arg("boundary_nodes"), py::arg("growth") = 1.0);
  m.def("read_mesh", [](const std::string& path) { return share(read_mesh(path)); });
  m.def("tank_mesh",
        [](double circumference, int electrodes, double width) {
          return share(tank_mesh(TankGeometry{circumference, electrodes, width}));
        },
        py::arg("circumference") = 1.06, py::arg("electrodes") = 16, py::arg("electrode_width") = 0.02);
  m.def("tank_electrodes",
        [](double circumference, int electrodes, double width) {
          return to_pairs(TankGeometry{circumference, electrodes, width}.electrode_intervals());
        },
        py::arg("circumference") = 1.06, py::arg("electrodes") = 16, py::arg("electrode_width") = 0.02);

  m.def("uniform_contact",
        [](const MeshPtr& mesh, const std::vector<Pair>& intervals, const std::string& variant, double net,
           const std::vector<double>& ph_width) {
          const auto el = locate_electrodes(*mesh, to_intervals(intervals));
          return uniform_contact(parse_variant(variant), el, net, ph_width).theta;
        },
        py::arg("mesh"), py::arg("intervals"), py::arg("variant"), py::arg("net"),
        py::arg("ph_width") = std::vector<double>{});

  m.def("forward",
        [](const MeshPtr& mesh, const std::vector<Pair>& intervals, const std::string& variant,
           const py::object& sigma, const std::vector<double>& theta, double amplitude) {
          const ForwardModel model = model_for(mesh, intervals, variant, amplitude);
          const ForwardSolution s = model.forward(conductivity(sigma), contact_of(model, theta));
          return measurements(s);
        },
        "Electrode potentials, pattern-major.", py::arg("mesh"), py::arg("intervals"), py::arg("variant"),
        py::arg("sigma"), py::arg("theta"), py::arg("amplitude") = 1e-3);

  m.def("jacobian",
        [](const MeshPtr& mesh, const std::vector<Pair>& intervals, const std::string& variant,
           const py::object& sigma, const std::vector<double>& theta, double amplitude) {
          const ForwardModel model = model_for(mesh, intervals, variant, amplitude);
          const DomainConductivity kappa = conductivity(sigma);
          const ContactParams contact = contact_of(model, theta);
          const ForwardSolution s = model.forward(kappa, contact);
          return py::make_tuple(jacobian_kappa(s, *mesh, kappa),
                                jacobian_contact(s, *mesh, model.electrodes, contact));
        },
        "(dU/dkappa, dU/dtheta)", py::arg("mesh"), py::arg("intervals"), py::arg("variant"), py::arg("sigma"),
        py::arg("theta"), py::arg("amplitude") = 1e-3);

  m.def("check_jacobian",
        [](const MeshPtr& mesh, const std::vector<Pair>& intervals, const std::string& variant,
           const py::object& sigma, const std::vector<double>& theta, int stride) {
          const ForwardModel model = model_for(mesh, intervals, variant, 1e-3);
          const JacobianCheck c = check_jacobian(model, conductivity(sigma), contact_of(model, theta), stride);
          py::dict d;
          d["kappa"] = c.kappa_max();
          d["theta"] = c.theta_max();
          d["kappa_columns"] = c.kappa_columns;
          return d;
        },
        py::arg("mesh"), py::arg("intervals"), py::arg("variant"), py::arg("sigma"), py::arg("theta"),
        py::arg("kappa_stride") = 1);

  m.def("cov_kappa", [](const MeshPtr& mesh, double gamma, double lambda) { return cov_kappa(*mesh, gamma, lambda); },
        py::arg("mesh"), py::arg("gamma") = 10.0, py::arg("length") = 0.03);
  m.def("cov_pl",
        [](const MeshPtr& mesh, const std::vector<Pair>& intervals, double gamma, double lambda) {
          return cov_pl(*mesh, locate_electrodes(*mesh, to_intervals(intervals)), gamma, lambda);
        },
        py::arg("mesh"), py::arg("intervals"), py::arg("gamma") = 500.0, py::arg("length") = 3e-3);

  m.def("synth",
        [](const MeshPtr& mesh, const std::vector<Pair>& true_intervals, double extension, std::uint64_t seed,
           double noise_std, bool inclusions, int fine_levels) {
          Scenario sc;
          sc.true_intervals = to_intervals(true_intervals);
          sc.extension = extension;
          sc.seed = seed;
          sc.noise_std = noise_std;
          if (inclusions) sc.phantom = Phantom::two_inclusions(std::sqrt(mesh->total_area() / M_PI));
          const SynthData s = synth_data(sc, *mesh, fine_levels);
          py::dict d;
          d["data"] = s.data;
          d["clean"] = s.clean;
          d["true_intervals"] = to_pairs(s.truth.true_intervals);
          d["extended_intervals"] = to_pairs(s.truth.extended_intervals);
          d["fine_nodes"] = s.truth.fine_nodes;
          return d;
        },
        py::arg("mesh"), py::arg("true_intervals"), py::arg("extension") = 0.0, py::arg("seed") = 0,
        py::arg("noise_std") = 0.0, py::arg("inclusions") = false, py::arg("fine_levels") = 1);

  m.def("reconstruct",
        [](const MeshPtr& mesh, const Eigen::VectorXd& data, const std::vector<Pair>& intervals,
           const std::vector<double>& true_widths, const std::string& variant, const std::string& kappa_mode,
           bool cem_midpoint, int max_iter) {
          ReconstructionRequest req;
          req.intervals = to_intervals(intervals);
          req.true_widths = true_widths;
          req.variant = parse_variant(variant);
          if (kappa_mode == "scalar")
            req.kappa_mode = DomainConductivity::Mode::scalar;
          else if (kappa_mode != "nodal")
            throw InputError("kappa_mode must be scalar or nodal");
          req.cem_midpoint = cem_midpoint;
          req.options.max_iter = max_iter;
          ReconstructionResult r;
          {
            py::gil_scoped_release release;
            r = reconstruct(mesh, data, req);
          }
          std::vector<double> centers;
          for (const auto& c : r.summary.center) centers.push_back(c.value_or(std::nan("")));
          py::dict d;
          d["kappa"] = r.kappa.kappa;
          d["theta"] = r.contact.theta;
          d["residual"] = r.state.residual.norm();
          d["objective"] = r.state.terms.total();
          d["iterations"] = r.state.iteration;
          d["converged"] = r.state.converged;
          d["reason"] = r.state.reason;
          d["sigma_mean"] = mean_conductivity(*mesh, r.kappa);
          d["net_conductance"] = r.summary.net_conductance;
          d["centers"] = centers;
          return d;
        },
        py::arg("mesh"), py::arg("data"), py::arg("intervals"), py::arg("true_widths"), py::arg("variant"),
        py::arg("kappa_mode") = "nodal", py::arg("cem_midpoint") = false, py::arg("max_iter") = 50);
}
