#include "specuq/alignment.hpp"
#include "specuq/experiments.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

namespace py = pybind11;
using namespace specuq;

namespace {

// A Problem together with the config it was built from; configs cross the
// boundary as JSON text so Python sees exactly the CLI's config schema.
struct Session {
  ExperimentConfig config;
  std::unique_ptr<Problem> problem;

  explicit Session(const std::string& config_json) {
    config = config_json.empty() ? ExperimentConfig{} : ExperimentConfig::from_json(nlohmann::json::parse(config_json));
    config.validate();
    problem = std::make_unique<Problem>(config.problem());
  }
};

py::tuple study_tuple(const ExperimentConfig& c, const StudyResult& r) {
  return py::make_tuple(r.table.render(c.hash()), r.summary.dump(), r.slopes_ok);
}

}  // namespace

PYBIND11_MODULE(_specuq, m) {
  m.doc() = "Spectral uncertainty quantification for clustered eigenvalues";

  static py::exception<Error> error(m, "SpecuqError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.def("git_blob_hash", &git_blob_hash, py::arg("content"));
  m.def("default_config", [] { return ExperimentConfig{}.to_json().dump(); });
  m.def("config_hash", [](const std::string& j) { return ExperimentConfig::from_json(nlohmann::json::parse(j)).hash(); });

  m.def(
      "mesh_info",
      [](int N) {
        const Mesh mesh = build_unit_square_mesh(N);
        py::dict d;
        d["N"] = mesh.N;
        d["nodes"] = mesh.num_nodes();
        d["free_dofs"] = mesh.num_free();
        d["h"] = mesh.h;
        return d;
      },
      py::arg("N"));

  m.def(
      "align",
      [](const Mat& basis, const Mat& lambda, const Mat& reference, const SpMat& M0, double min_singular) {
        const AlignmentResult a = align(basis, lambda, reference, M0, min_singular);
        return py::make_tuple(a.rotation, a.aligned_basis, a.aligned_lambda, a.singulars);
      },
      py::arg("basis"), py::arg("lambda_"), py::arg("reference"), py::arg("M0"), py::arg("min_singular") = 0.5);

  py::class_<Session>(m, "Problem")
      .def(py::init<const std::string&>(), py::arg("config_json") = "")
      .def_property_readonly("config_json", [](const Session& s) { return s.config.to_json().dump(); })
      .def_property_readonly("config_hash", [](const Session& s) { return s.config.hash(); })
      .def_property_readonly("n", [](const Session& s) { return s.problem->n(); })
      .def_property_readonly("m", [](const Session& s) { return s.problem->m(); })
      .def_property_readonly("kl_rank", [](const Session& s) { return s.problem->kl_rank(); })
      .def_property_readonly("lambda0", [](const Session& s) { return s.problem->cluster().lambda0; })
      .def_property_readonly("cluster_indices", [](const Session& s) { return s.problem->cluster().indices; })
      .def_property_readonly("reference_values", [](const Session& s) { return s.problem->reference().values; })
      .def_property_readonly("reference_basis", [](const Session& s) { return s.problem->cluster().basis; })
      .def_property_readonly("A0", [](const Session& s) { return s.problem->A0(); })
      .def_property_readonly("M0", [](const Session& s) { return s.problem->M0(); })
      .def(
          "realization",
          [](const Session& s, std::uint64_t index) {
            const Realization r = s.problem->realization(index);
            return py::make_tuple(r.z_mu, r.z_eps);
          },
          py::arg("index"))
      .def(
          "solve_sample",
          [](const Session& s, std::uint64_t index, double alpha, double beta, bool dense) {
            SampleSolution sol;
            {
              py::gil_scoped_release release;
              sol = s.problem->solve_sample(s.problem->realization(index), alpha, beta, dense);
            }
            return py::make_tuple(sol.basis, sol.lambda);
          },
          py::arg("index"), py::arg("alpha"), py::arg("beta"), py::arg("dense") = false)
      .def(
          "perturb",
          [](const Session& s, double alpha, double beta) {
            const PerturbMoments pm = perturb_moments(*s.problem);
            const CovPrediction cp = perturb_cov(alpha, beta, pm);
            py::dict d;
            d["mean_lambda"] = pm.mean.mean_lambda;
            d["mean_basis"] = pm.mean.mean_basis;
            d["cov_lambda"] = cp.cov_lambda;
            d["cov_lambda_direct"] = Mat(alpha * alpha * pm.direct.mu + beta * beta * pm.direct.eps);
            return d;
          },
          py::arg("alpha"), py::arg("beta"))
      .def(
          "mc",
          [](const Session& s, Index samples, double alpha, double beta, bool antithetic, std::uint64_t first_index) {
            MCConfig mc;
            mc.samples = samples;
            mc.alpha = alpha;
            mc.beta = beta;
            mc.antithetic = antithetic;
            mc.first_index = first_index;
            MomentEstimate est;
            {
              py::gil_scoped_release release;
              est = mc_estimate(*s.problem, mc);
            }
            py::dict d;
            d["mean_lambda"] = est.mean_lambda;
            d["mean_basis"] = est.mean_basis;
            d["cov_lambda"] = est.cov_lambda;
            d["rmse_mean_lambda"] = est.rmse_mean_lambda;
            d["rmse_mean_basis"] = est.rmse_mean_basis;
            d["rmse_cov_lambda"] = est.rmse_cov_lambda;
            d["samples"] = est.samples;
            d["rejected"] = est.rejected;
            return d;
          },
          py::arg("samples"), py::arg("alpha"), py::arg("beta"), py::arg("antithetic") = false,
          py::arg("first_index") = 0)
      .def("study_det", [](const Session& s) { return study_tuple(s.config, run_deterministic_study(*s.problem, s.config)); })
      .def("study_mc", [](const Session& s) { return study_tuple(s.config, run_mc_study(*s.problem, s.config)); })
      .def("study_exp", [](const Session& s) { return study_tuple(s.config, run_expansion_study(*s.problem, s.config)); });
}
