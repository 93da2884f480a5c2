#include "ddinfer/annealing.hpp"
#include "ddinfer/io.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace ddinfer;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Data-driven inference on transportation networks";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error;
      py::object inst = exc(e.what());
      inst.attr("kind") = to_string(e.kind());
      PyErr_SetObject(error.ptr(), inst.ptr());
    }
  });

  py::class_<PhaseVector>(m, "PhaseVector")
      .def(py::init<Vec, Vec>(), py::arg("eps"), py::arg("sigma"))
      .def_readwrite("eps", &PhaseVector::eps)
      .def_readwrite("sigma", &PhaseVector::sigma)
      .def("stacked", &PhaseVector::stacked)
      .def_static("from_stacked", &PhaseVector::from_stacked);

  py::class_<EnergyMetric>(m, "EnergyMetric")
      .def(py::init<Vec, double>(), py::arg("coeffs"), py::arg("ell") = 1.0)
      .def_readonly("coeffs", &EnergyMetric::coeffs)
      .def_readonly("ell", &EnergyMetric::ell)
      .def("inner", &EnergyMetric::inner)
      .def("norm", &EnergyMetric::norm);

  m.def("t_transform", &t_transform, py::arg("eps"), py::arg("sigma"), py::arg("coeff"));
  m.def("t_inverse", &t_inverse, py::arg("t1"), py::arg("t2"), py::arg("coeff"));

  py::class_<AffineSubspace>(m, "AffineSubspace")
      .def_static("from_spanning", &AffineSubspace::from_spanning, py::arg("metric"), py::arg("point"),
                  py::arg("spanning"))
      .def_property_readonly("basis", &AffineSubspace::basis)
      .def_property_readonly("offset", &AffineSubspace::offset)
      .def_property_readonly("metric", &AffineSubspace::metric)
      .def_property_readonly("dim", &AffineSubspace::dim)
      .def_property_readonly("ambient_dim", &AffineSubspace::ambient_dim)
      .def("project", py::overload_cast<const Vec&>(&AffineSubspace::project, py::const_))
      .def("dist", py::overload_cast<const Vec&>(&AffineSubspace::dist, py::const_))
      .def("coords", py::overload_cast<const Vec&>(&AffineSubspace::coords, py::const_))
      .def("embed", &AffineSubspace::embed);

  py::class_<Network>(m, "Network")
      .def_static("from_matrices", &Network::from_matrices, py::arg("incidence"), py::arg("coeffs"),
                  py::arg("sources"), py::arg("applied"), py::arg("noise"))
      .def_readonly("n_edges", &Network::n_edges)
      .def_readonly("n_free_nodes", &Network::n_free_nodes)
      .def_readonly("incidence", &Network::incidence)
      .def_readonly("coeffs", &Network::coeffs)
      .def_readonly("sources", &Network::sources)
      .def_readonly("applied", &Network::applied)
      .def_readonly("noise", &Network::noise)
      .def("metric", &Network::metric, py::arg("ell") = 1.0);
  m.def("load_network", &load_network, py::arg("path"));
  m.def("parse_network_json", &parse_network_json, py::arg("text"));

  py::class_<NondegeneracyReport>(m, "NondegeneracyReport")
      .def_readonly("ok", &NondegeneracyReport::ok)
      .def_readonly("lambda_min", &NondegeneracyReport::lambda_min)
      .def_readonly("lambda_max", &NondegeneracyReport::lambda_max);
  m.def("check_nondegeneracy", &check_nondegeneracy);

  py::class_<ClassicalSolution>(m, "ClassicalSolution")
      .def_readonly("potentials", &ClassicalSolution::potentials)
      .def_readonly("state", &ClassicalSolution::state);
  m.def("classical_solution", &classical_solution);
  m.def("constraint_subspace", &constraint_subspace, py::arg("network"), py::arg("ell") = 1.0);

  py::class_<SlidingGaussianDensity>(m, "SlidingGaussianDensity")
      .def(py::init<Vec, Vec>(), py::arg("coeffs"), py::arg("scales"))
      .def_readonly("coeffs", &SlidingGaussianDensity::coeffs)
      .def_readonly("scales", &SlidingGaussianDensity::scales)
      .def("phi", [](const SlidingGaussianDensity& d, const Vec& y) { return phi(y, d); });

  py::class_<EmpiricalMeasure>(m, "EmpiricalMeasure")
      .def_readonly("points", &EmpiricalMeasure::points)
      .def_readonly("weights", &EmpiricalMeasure::weights)
      .def_property_readonly("size", &EmpiricalMeasure::size)
      .def("total_weight", &EmpiricalMeasure::total_weight);
  m.def("make_empirical", [](Mat points, Vec weights) { return make_empirical(std::move(points), std::move(weights)); },
        py::arg("points"), py::arg("weights"));
  m.def(
      "discretize",
      [](const SlidingGaussianDensity& d, const Vec& eps, double radius, const PhaseVector& center,
         std::size_t max_points, double lattice_origin) {
        DiscretizeOptions o;
        o.max_points = max_points;
        o.lattice_origin = lattice_origin;
        return discretize(d, eps, radius, center, o);
      },
      py::arg("density"), py::arg("eps"), py::arg("radius"), py::arg("center"), py::arg("max_points") = 10'000'000,
      py::arg("lattice_origin") = 0.0);
  m.def("sample_empirical", &sample_empirical, py::arg("density"), py::arg("subspace"), py::arg("radius"),
        py::arg("n"), py::arg("seed") = 1);
  m.def("read_dataset", &read_dataset, py::arg("path"));
  m.def("write_dataset", &write_dataset, py::arg("path"), py::arg("measure"), py::arg("generator") = "");

  py::class_<TransversalityCertificate>(m, "TransversalityCertificate")
      .def_readonly("ok", &TransversalityCertificate::ok)
      .def_readonly("beta0", &TransversalityCertificate::beta0)
      .def_readonly("c", &TransversalityCertificate::c)
      .def_readonly("b", &TransversalityCertificate::b)
      .def_readonly("message", &TransversalityCertificate::message);
  m.def(
      "check_transversality",
      [](const SlidingGaussianDensity& d, const AffineSubspace& e, double beta0) {
        return check_transversality(d.quadratic(), e, beta0);
      },
      py::arg("density"), py::arg("subspace"), py::arg("beta0"));

  py::class_<QuantityOfInterest>(m, "QuantityOfInterest")
      .def_property_readonly("name", &QuantityOfInterest::name)
      .def_property_readonly("bounded", &QuantityOfInterest::bounded)
      .def("__call__", &QuantityOfInterest::operator());
  m.def("parse_qoi", &parse_qoi, py::arg("text"));

  py::class_<ThermalMoments>(m, "ThermalMoments")
      .def_readonly("beta", &ThermalMoments::beta)
      .def_readonly("tv_mass", &ThermalMoments::tv_mass)
      .def_readonly("mean", &ThermalMoments::mean)
      .def_readonly("covariance", &ThermalMoments::covariance);
  m.def("thermalized_moments",
        py::overload_cast<const SlidingGaussianDensity&, const AffineSubspace&, double>(&thermalized_moments),
        py::arg("density"), py::arg("subspace"), py::arg("beta"));
  py::class_<LimitMoments>(m, "LimitMoments")
      .def_readonly("tv_mass", &LimitMoments::tv_mass)
      .def_readonly("covariance", &LimitMoments::covariance);
  m.def("limit_moments", py::overload_cast<const SlidingGaussianDensity&, const AffineSubspace&>(&limit_moments),
        py::arg("density"), py::arg("subspace"));
  m.def("b_beta", &b_beta, py::arg("edges"), py::arg("beta"));
  m.def("c_beta", &c_beta, py::arg("k"), py::arg("beta"));

  py::class_<Estimate>(m, "Estimate")
      .def_readonly("value", &Estimate::value)
      .def_readonly("stderr", &Estimate::stderr_)
      .def_readonly("closed_form", &Estimate::closed_form);
  m.def("expectation_infty",
        py::overload_cast<const QuantityOfInterest&, const SlidingGaussianDensity&, const AffineSubspace&, std::size_t,
                          std::uint64_t, int>(&expectation_infty),
        py::arg("qoi"), py::arg("density"), py::arg("subspace"), py::arg("n_samples") = 100000, py::arg("seed") = 1,
        py::arg("threads") = 1);

  py::class_<ThermalizedDiscrete>(m, "ThermalizedDiscrete")
      .def_readonly("beta", &ThermalizedDiscrete::beta)
      .def_readonly("log_total", &ThermalizedDiscrete::log_total)
      .def_readonly("dropped", &ThermalizedDiscrete::dropped)
      .def_property_readonly("size", &ThermalizedDiscrete::size)
      .def("total_mass", &ThermalizedDiscrete::total_mass)
      .def("probabilities", &ThermalizedDiscrete::probabilities);
  m.def("discrete_thermal_mass", &discrete_thermal_mass, py::arg("measure"), py::arg("subspace"), py::arg("beta"),
        py::arg("threads") = 1);

  py::class_<ExpectationResult>(m, "ExpectationResult")
      .def_readonly("value", &ExpectationResult::value)
      .def_readonly("stderr", &ExpectationResult::stderr_)
      .def_readonly("closed_form", &ExpectationResult::closed_form)
      .def_readonly("samples", &ExpectationResult::samples)
      .def_readonly("bounded", &ExpectationResult::bounded);
  m.def(
      "expectation_h",
      [](const QuantityOfInterest& f, const ThermalizedDiscrete& t, std::size_t n_samples, std::uint64_t seed,
         int threads, std::size_t bootstrap) {
        ExpectationOptions o;
        o.n_samples = n_samples;
        o.seed = seed;
        o.threads = threads;
        o.bootstrap = bootstrap;
        return expectation_h(f, t, o);
      },
      py::arg("qoi"), py::arg("thermalized"), py::arg("n_samples") = 20000, py::arg("seed") = 1,
      py::arg("threads") = 1, py::arg("bootstrap") = 0);

  py::class_<FlatNormResult>(m, "FlatNormResult")
      .def_readonly("value", &FlatNormResult::value)
      .def_readonly("witness", &FlatNormResult::witness)
      .def_readonly("duality_gap", &FlatNormResult::duality_gap)
      .def_readonly("max_violation", &FlatNormResult::max_violation);
  m.def(
      "flat_norm",
      [](const Mat& points, const Vec& weights, const EnergyMetric& metric) {
        return flat_norm(DiscreteSignedMeasure::on_z(points, weights, metric));
      },
      py::arg("points"), py::arg("weights"), py::arg("metric"),
      "Flat norm of sum_i w_i delta_{x_i} on Z; columns of `points` are stacked [eps; sigma].");

  py::class_<Schedule>(m, "Schedule")
      .def_readonly("eps", &Schedule::eps)
      .def_readonly("beta", &Schedule::beta);
  m.def("make_schedule", &make_schedule, py::arg("eps"), py::arg("c"));
  m.def("custom_schedule", &custom_schedule, py::arg("eps"), py::arg("beta"));

  py::class_<RateFit>(m, "RateFit")
      .def_readonly("slope", &RateFit::slope)
      .def_readonly("intercept", &RateFit::intercept)
      .def_readonly("r_squared", &RateFit::r_squared)
      .def_readonly("ci_low", &RateFit::ci_low)
      .def_readonly("ci_high", &RateFit::ci_high);
  m.def("rate_fit", py::overload_cast<const std::vector<double>&, const std::vector<double>&>(&rate_fit));

  py::class_<ConvergenceRow>(m, "ConvergenceRow")
      .def_readonly("eps_h", &ConvergenceRow::eps_h)
      .def_readonly("beta_h", &ConvergenceRow::beta_h)
      .def_readonly("fn_therm", &ConvergenceRow::fn_therm)
      .def_readonly("fn_approx", &ConvergenceRow::fn_approx)
      .def_readonly("fn_total", &ConvergenceRow::fn_total)
      .def_readonly("atoms", &ConvergenceRow::atoms)
      .def_readonly("budget_ok", &ConvergenceRow::budget_ok);
  py::class_<ConvergenceReport>(m, "ConvergenceReport")
      .def_readonly("rows", &ConvergenceReport::rows)
      .def_readonly("total_vs_eps", &ConvergenceReport::total_vs_eps)
      .def_readonly("therm_vs_beta", &ConvergenceReport::therm_vs_beta)
      .def("budget_ok", &ConvergenceReport::budget_ok)
      .def("to_csv", &ConvergenceReport::to_csv)
      .def("to_json", &ConvergenceReport::to_json);
  m.def(
      "convergence_study",
      [](const Network& net, const Schedule& s, std::size_t k, std::vector<std::uint64_t> seeds, double radius,
         int threads) {
        StudyOptions o;
        o.k = k;
        o.seeds = std::move(seeds);
        o.radius = radius;
        o.threads = threads;
        return convergence_study(net, s, o);
      },
      py::arg("network"), py::arg("schedule"), py::arg("k") = 2000,
      py::arg("seeds") = std::vector<std::uint64_t>{1, 2, 3}, py::arg("radius") = 4.0, py::arg("threads") = 1);
}
