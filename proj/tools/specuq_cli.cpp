#include "specuq/experiments.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>

using namespace specuq;
using json = nlohmann::json;

namespace {

// Command-line overrides are applied on top of the JSON config, but only for
// options the user actually passed.
class Overrides {
 public:
  explicit Overrides(CLI::App& app) : app_(app) {}

  template <class T>
  void option(const std::string& flag, T ExperimentConfig::*member, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app_.add_option(flag, *value, help);
    appliers_.push_back([opt, value, member](ExperimentConfig& c) {
      if (opt->count() > 0) c.*member = *value;
    });
  }

  void flag(const std::string& flag, bool ExperimentConfig::*member, const std::string& help) {
    auto value = std::make_shared<bool>(false);
    CLI::Option* opt = app_.add_flag(flag, *value, help);
    appliers_.push_back([opt, value, member](ExperimentConfig& c) {
      if (opt->count() > 0) c.*member = *value;
    });
  }

  void apply(ExperimentConfig& c) const {
    for (const auto& f : appliers_) f(c);
  }

 private:
  CLI::App& app_;
  std::vector<std::function<void(ExperimentConfig&)>> appliers_;
};

std::string out_path(const ExperimentConfig& c, const std::string& name) {
  return (std::filesystem::path(c.output_dir) / name).string();
}

void write_csv(const ExperimentConfig& c, const std::string& name, const CsvTable& table,
               const std::vector<std::pair<std::string, std::string>>& extra = {}) {
  write_text_file(out_path(c, name), table.render(c.hash(), extra));
}

void write_json(const ExperimentConfig& c, const std::string& name, const json& j) {
  write_text_file(out_path(c, name), j.dump(2) + "\n");
}

int finish_study(const ExperimentConfig& c, const std::string& stem, const StudyResult& r) {
  json summary = r.summary;
  summary["config"] = c.to_json();
  summary["config_hash"] = c.hash();
  summary["content_hash"] = r.table.content_hash();
  write_csv(c, stem + ".csv", r.table, {{"study", stem}});
  write_json(c, stem + ".json", summary);
  std::cout << summary.dump(2) << "\n";
  if (c.assert_slopes && !r.slopes_ok) {
    std::cerr << stem << ": slope assertion failed\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral uncertainty quantification for clustered eigenvalues of random elliptic operators"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  app.add_option("--config", config_file, "JSON config file; command-line flags override it")->check(CLI::ExistingFile);
  Overrides ov(app);
  ov.option("--output-dir", &ExperimentConfig::output_dir, "directory for CSV/JSON outputs");
  ov.flag("--assert", &ExperimentConfig::assert_slopes, "exit with code 2 when a fitted slope is out of range");
  ov.option("--N", &ExperimentConfig::N, "mesh vertices per side (h = 1/(N-1))");
  ov.option("--kl-tol", &ExperimentConfig::kl_tol, "pivoted Cholesky trace tolerance");
  ov.option("--kernel-scale", &ExperimentConfig::kernel_scale, "Gaussian kernel scale");
  ov.option("--kl-max-rank", &ExperimentConfig::kl_max_rank, "pivot limit (-1: none)");
  ov.option("--kl-truncate", &ExperimentConfig::kl_truncate, "keep only the leading KL modes (-1: all)");
  ov.option("--target-index", &ExperimentConfig::target_index, "index of an eigenvalue in the target cluster");
  ov.option("--cluster-tol", &ExperimentConfig::cluster_tol, "relative cluster detection tolerance");
  ov.option("--seed", &ExperimentConfig::seed, "master seed");
  ov.option("--gauge", &ExperimentConfig::gauge, "epsilon constraint gauge: symmetric or diagonal");
  ov.option("--sample-tol", &ExperimentConfig::sample_tol, "eigensolver tolerance for perturbed samples");
  ov.option("--t-min-exp", &ExperimentConfig::t_min_exp, "smallest dyadic exponent of the ray");
  ov.option("--t-max-exp", &ExperimentConfig::t_max_exp, "largest dyadic exponent of the ray");
  ov.option("--alpha-weight", &ExperimentConfig::alpha_weight, "alpha = alpha_weight * t on the ray");
  ov.option("--beta-weight", &ExperimentConfig::beta_weight, "beta = beta_weight * t on the ray");
  ov.option("--fit-drop-small", &ExperimentConfig::fit_drop_small, "smallest t values dropped from slope fits");
  ov.option("--fit-drop-large", &ExperimentConfig::fit_drop_large, "largest t values dropped from slope fits");
  ov.option("--realization", &ExperimentConfig::realization, "realization index for deterministic runs");
  ov.option("--det-dense", &ExperimentConfig::det_dense, "dense eigensolves in deterministic runs (true/false)");
  ov.option("--fd-step", &ExperimentConfig::fd_step, "finite-difference step");
  ov.option("--alpha", &ExperimentConfig::alpha, "stiffness perturbation amplitude");
  ov.option("--beta", &ExperimentConfig::beta, "mass perturbation amplitude");
  ov.option("--samples", &ExperimentConfig::samples, "Monte Carlo sample count");
  ov.flag("--antithetic", &ExperimentConfig::antithetic, "antithetic mean estimator");
  ov.option("--first-index", &ExperimentConfig::first_index, "realization index of the first draw");
  ov.flag("--basis-covariance", &ExperimentConfig::basis_covariance, "also estimate the basis covariance");
  ov.option("--reference", &ExperimentConfig::reference, "moment dump (from `mc`) to compare against");
  ov.option("--mc-min-exp", &ExperimentConfig::mc_min_exp, "smallest M = 2^e in the Monte Carlo study");
  ov.option("--mc-max-exp", &ExperimentConfig::mc_max_exp, "largest M = 2^e in the Monte Carlo study");
  ov.option("--mc-repetitions", &ExperimentConfig::mc_repetitions, "independent repetitions per M");
  ov.option("--exp-reference-samples", &ExperimentConfig::exp_reference_samples, "reference Monte Carlo size");
  ov.option("--exp-t-exps", &ExperimentConfig::exp_t_exps, "dyadic exponents of the expansion study");
  ov.option("--exp-noise-factor", &ExperimentConfig::exp_noise_factor, "noise-dominated below this many RMSEs");
  ov.option("--timing-samples", &ExperimentConfig::timing_samples, "Monte Carlo sizes for the timing harness");

  std::vector<std::pair<std::string, std::string>> commands = {
      {"mesh", "build the mesh and write it as JSON"},
      {"kl", "compute the truncated KL expansion"},
      {"solve-ref", "solve the reference eigenproblem and report the target cluster"},
      {"derivs", "eigenpair derivatives, constraint residuals and a finite-difference check"},
      {"mc", "one Monte Carlo estimate of the cluster moments"},
      {"perturb", "perturbation (expansion) moments"},
      {"study-det", "first-order residuals along the dyadic ray"},
      {"study-mc", "Monte Carlo error against the sample count"},
      {"study-exp", "expansion error against a Monte Carlo reference along the ray"},
      {"timings", "wall-clock per phase"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  CLI11_PARSE(app, argc, argv);
  const std::string cmd = app.get_subcommands().front()->get_name();

  try {
    ExperimentConfig c;
    if (!config_file.empty()) c = ExperimentConfig::from_json(json::parse(read_text_file(config_file)));
    ov.apply(c);
    c.validate();
    std::filesystem::create_directories(c.output_dir);

    if (cmd == "mesh") {
      const Mesh mesh = build_unit_square_mesh(c.N);
      write_text_file(out_path(c, "mesh.json"), mesh_to_json(mesh));
      std::cout << json{{"N", c.N}, {"nodes", mesh.nodes.size()}, {"free_dofs", mesh.free_nodes.size()}}.dump(2)
                << "\n";
      return 0;
    }
    if (cmd == "kl") {
      const Mesh mesh = build_unit_square_mesh(c.N);
      const P1Assembler assembler(mesh);
      const SpMat mass = assembler.mass(NodalField::constant(mesh, 1.0), DofSet::All);
      const KLExpansion kl = build_kl(mesh, KernelSpec::gaussian(c.kernel_scale), mass, c.kl_tol, c.kl_max_rank);
      write_text_file(out_path(c, "kl.json"), kl_to_json(kl, c.seed));
      CsvTable t({"mode", "sigma"});
      for (Index i = 0; i < kl.rank(); ++i) t.add_row({static_cast<double>(i), kl.sigmas[i]});
      write_csv(c, "kl.csv", t, {{"trace_error", CsvTable::format_number(kl.trace_error)}});
      std::cout << json{{"rank", kl.rank()}, {"trace_error", kl.trace_error}, {"sup_bound", kl.sup_bound()}}.dump(2)
                << "\n";
      return 0;
    }

    if (cmd == "timings") {
      const json j = report_timings(c);
      write_json(c, "timings.json", j);
      std::cout << j.dump(2) << "\n";
      return 0;
    }

    const Problem problem(c.problem());
    if (cmd == "solve-ref") {
      const GevpResult& ref = problem.reference();
      write_text_file(out_path(c, "reference.json"), eigenpairs_to_json(ref, problem.cluster()));
      CsvTable t({"index", "lambda", "residual", "in_cluster"});
      const auto& idx = problem.cluster().indices;
      for (Index i = 0; i < ref.values.size(); ++i) {
        const bool in = std::find(idx.begin(), idx.end(), i) != idx.end();
        t.add_row({static_cast<double>(i), ref.values[i], ref.residuals[i], in ? 1.0 : 0.0});
      }
      write_csv(c, "reference.csv", t);
      std::cout << json{{"lambda0", problem.cluster().lambda0}, {"m", problem.m()}, {"indices", idx},
                        {"n", problem.n()}}
                       .dump(2)
                << "\n";
      return 0;
    }
    if (cmd == "derivs") {
      const json j = derivatives_report(problem, c);
      write_json(c, "derivs.json", j);
      std::cout << j.dump(2) << "\n";
      return 0;
    }
    if (cmd == "mc") {
      const McRun run = run_mc(problem, c);
      write_csv(c, "mc.csv", run.table);
      write_json(c, "mc_moments.json", run.moments);
      std::cout << run.table.render(c.hash());
      return 0;
    }
    if (cmd == "perturb") {
      const McRun run = run_perturb(problem, c);
      write_csv(c, "perturb.csv", run.table);
      write_json(c, "perturb.json", run.moments);
      std::cout << run.moments.dump(2) << "\n";
      return 0;
    }
    if (cmd == "study-det") return finish_study(c, "study_det", run_deterministic_study(problem, c));
    if (cmd == "study-mc") return finish_study(c, "study_mc", run_mc_study(problem, c));
    if (cmd == "study-exp") return finish_study(c, "study_exp", run_expansion_study(problem, c));
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
