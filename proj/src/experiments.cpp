#include "specuq/experiments.hpp"

#include "specuq/alignment.hpp"

#include <chrono>
#include <cmath>

namespace specuq {

namespace {

using json = nlohmann::json;
using Cell = CsvTable::Cell;

double l2_norm(const SpMat& M0, const Mat& E) {
  return std::sqrt(std::max(0.0, (E.transpose() * (M0 * E)).trace()));
}

double weighted_sq(const SpMat& M0, const Vec& v, Index m) {
  const Index n = M0.rows();
  double s = 0.0;
  for (Index j = 0; j < m; ++j) {
    const Vec c = v.segment(j * n, n);
    s += c.dot(M0 * c);
  }
  return s;
}

// Running first and second moments of a stream of vectors under a quadratic norm.
struct Moments {
  Vec sum;
  double sumsq = 0.0;
  Index count = 0;

  explicit Moments(Index dim) : sum(Vec::Zero(dim)) {}
  void add(const Vec& v, double norm_sq) {
    sum += v;
    sumsq += norm_sq;
    ++count;
  }
  Vec mean() const { return sum / static_cast<double>(count); }
  // sqrt((1/K^2) sum_i ||v_i - mean||^2)
  double rmse(double mean_norm_sq) const {
    const double k = static_cast<double>(count);
    return std::sqrt(std::max(0.0, sumsq - k * mean_norm_sq)) / k;
  }
};

ConstraintGauge parse_gauge(const std::string& g) {
  if (g == "symmetric") return ConstraintGauge::Symmetric;
  if (g == "diagonal") return ConstraintGauge::DiagonalOnly;
  throw Error(ErrorKind::Configuration, "gauge must be 'symmetric' or 'diagonal', got '" + g + "'");
}

template <class T>
void read_key(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

json fit_json(const SlopeFit& f) { return {{"slope", f.slope}, {"points", f.points}}; }

}  // namespace

ProblemConfig ExperimentConfig::problem() const {
  ProblemConfig p;
  p.N = N;
  p.kl_tol = kl_tol;
  p.kernel_scale = kernel_scale;
  p.kl_max_rank = kl_max_rank;
  p.kl_truncate = kl_truncate;
  p.target_index = target_index;
  p.cluster_tol = cluster_tol;
  p.seed = seed;
  p.gauge = parse_gauge(gauge);
  p.sample_tol = sample_tol;
  return p;
}

std::vector<double> ExperimentConfig::t_grid() const {
  std::vector<double> t;
  for (int e = t_min_exp; e <= t_max_exp; ++e) t.push_back(std::ldexp(1.0, e));
  return t;
}

void ExperimentConfig::validate() const {
  auto check = [](bool ok, const std::string& what) { require(ok, ErrorKind::Configuration, what); };
  check(N >= 2, "N must be at least 2");
  check(kl_tol > 0 && kernel_scale > 0 && cluster_tol > 0 && sample_tol > 0, "tolerances and scales must be positive");
  check(target_index >= 0, "target index must be nonnegative");
  check(t_min_exp <= t_max_exp, "t grid is empty");
  check(fit_drop_small >= 0 && fit_drop_large >= 0, "fit drop counts must be nonnegative");
  check(fd_step > 0, "finite-difference step must be positive");
  check(samples >= 2, "samples must be at least 2");
  check(mc_min_exp >= 1 && mc_min_exp <= mc_max_exp && mc_max_exp <= 30, "bad Monte Carlo schedule");
  check(mc_repetitions >= 1, "repetitions must be positive");
  check(exp_reference_samples >= 4 && exp_reference_samples % 2 == 0, "reference samples must be even and >= 4");
  check(!exp_t_exps.empty(), "expansion t list is empty");
  for (Index m : timing_samples) check(m == 0 || m >= 2, "timing sample counts must be 0 or >= 2");
  parse_gauge(gauge);
}

json ExperimentConfig::to_json() const {
  return json{{"N", N},
              {"kl_tol", kl_tol},
              {"kernel_scale", kernel_scale},
              {"kl_max_rank", kl_max_rank},
              {"kl_truncate", kl_truncate},
              {"target_index", target_index},
              {"cluster_tol", cluster_tol},
              {"seed", seed},
              {"gauge", gauge},
              {"sample_tol", sample_tol},
              {"t_min_exp", t_min_exp},
              {"t_max_exp", t_max_exp},
              {"alpha_weight", alpha_weight},
              {"beta_weight", beta_weight},
              {"fit_drop_small", fit_drop_small},
              {"fit_drop_large", fit_drop_large},
              {"realization", realization},
              {"det_dense", det_dense},
              {"fd_step", fd_step},
              {"alpha", alpha},
              {"beta", beta},
              {"samples", samples},
              {"antithetic", antithetic},
              {"first_index", first_index},
              {"basis_covariance", basis_covariance},
              {"reference", reference},
              {"mc_min_exp", mc_min_exp},
              {"mc_max_exp", mc_max_exp},
              {"mc_repetitions", mc_repetitions},
              {"exp_reference_samples", exp_reference_samples},
              {"exp_t_exps", exp_t_exps},
              {"exp_noise_factor", exp_noise_factor},
              {"timing_samples", timing_samples}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j, const ExperimentConfig& base) {
  require(j.is_object(), ErrorKind::Configuration, "config must be a JSON object");
  ExperimentConfig c = base;
  const json known = c.to_json();
  for (const auto& [key, value] : j.items()) {
    require(known.contains(key) || key == "output_dir" || key == "assert", ErrorKind::Configuration,
            "unknown config key '" + key + "'");
  }
  try {
    read_key(j, "N", c.N);
    read_key(j, "kl_tol", c.kl_tol);
    read_key(j, "kernel_scale", c.kernel_scale);
    read_key(j, "kl_max_rank", c.kl_max_rank);
    read_key(j, "kl_truncate", c.kl_truncate);
    read_key(j, "target_index", c.target_index);
    read_key(j, "cluster_tol", c.cluster_tol);
    read_key(j, "seed", c.seed);
    read_key(j, "gauge", c.gauge);
    read_key(j, "sample_tol", c.sample_tol);
    read_key(j, "t_min_exp", c.t_min_exp);
    read_key(j, "t_max_exp", c.t_max_exp);
    read_key(j, "alpha_weight", c.alpha_weight);
    read_key(j, "beta_weight", c.beta_weight);
    read_key(j, "fit_drop_small", c.fit_drop_small);
    read_key(j, "fit_drop_large", c.fit_drop_large);
    read_key(j, "realization", c.realization);
    read_key(j, "det_dense", c.det_dense);
    read_key(j, "fd_step", c.fd_step);
    read_key(j, "alpha", c.alpha);
    read_key(j, "beta", c.beta);
    read_key(j, "samples", c.samples);
    read_key(j, "antithetic", c.antithetic);
    read_key(j, "first_index", c.first_index);
    read_key(j, "basis_covariance", c.basis_covariance);
    read_key(j, "reference", c.reference);
    read_key(j, "mc_min_exp", c.mc_min_exp);
    read_key(j, "mc_max_exp", c.mc_max_exp);
    read_key(j, "mc_repetitions", c.mc_repetitions);
    read_key(j, "exp_reference_samples", c.exp_reference_samples);
    read_key(j, "exp_t_exps", c.exp_t_exps);
    read_key(j, "exp_noise_factor", c.exp_noise_factor);
    read_key(j, "timing_samples", c.timing_samples);
    read_key(j, "output_dir", c.output_dir);
    read_key(j, "assert", c.assert_slopes);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Configuration, std::string("bad config value: ") + e.what());
  }
  return c;
}

std::string ExperimentConfig::hash() const { return git_blob_hash(to_json().dump()); }

StudyResult run_deterministic_study(const Problem& problem, const ExperimentConfig& config) {
  const EigenCluster& cl = problem.cluster();
  const SpMat& M0 = problem.M0();
  const Realization r = problem.realization(config.realization);
  const SpMat A1 = problem.stiffness_direction(r.z_mu);
  const SpMat M1 = problem.mass_direction(r.z_eps);
  const auto d = problem.derivatives(r);

  StudyResult out{CsvTable({"t", "alpha", "beta", "err_lambda_polar", "err_lambda_svd", "err_basis_polar",
                            "err_basis_svd", "min_singular"}),
                  json::object()};
  std::vector<double> ts, cols[4];
  for (double t : config.t_grid()) {
    const double a = config.alpha_weight * t;
    const double b = config.beta_weight * t;
    try {
      const SampleSolution s = problem.solve_sample(r, a, b, config.det_dense);
      const AlignmentResult al = align(s.basis, s.lambda, cl.basis, M0, 0.0);
      const TaylorPrediction tp = taylor_predict(cl, d.mu, d.eps, a, b);
      const PolarizedPrediction pp = polarized_predict(cl, M0, A1, M1, d.mu, d.eps, a, b);
      const PolarAlignment pa = pairwise_polar_align(s.basis, s.lambda.diagonal(), pp, M0);
      const double v[4] = {(pa.lambda_diag - pp.lambda_diag).norm(), (al.aligned_lambda - tp.lambda).norm(),
                           l2_norm(M0, pa.basis - pp.basis), l2_norm(M0, al.aligned_basis - tp.basis)};
      ts.push_back(t);
      for (int k = 0; k < 4; ++k) cols[k].push_back(v[k]);
      out.table.add_row({t, a, b, v[0], v[1], v[2], v[3], al.singulars.minCoeff()});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Definiteness) throw;
      out.table.add_row({t, a, b, std::nullopt, std::nullopt, std::nullopt, std::nullopt, std::nullopt});
    }
  }
  const char* names[4] = {"err_lambda_polar", "err_lambda_svd", "err_basis_polar", "err_basis_svd"};
  json slopes = json::object();
  for (int k = 0; k < 4; ++k) {
    const SlopeFit f = fit_loglog(ts, cols[k], config.fit_drop_small, config.fit_drop_large);
    slopes[names[k]] = fit_json(f);
    out.slopes_ok = out.slopes_ok && kSecondOrder.contains(f.slope);
  }
  out.summary = {{"slopes", slopes},
                 {"window", {kSecondOrder.lo, kSecondOrder.hi}},
                 {"realization", config.realization},
                 {"lambda0", cl.lambda0},
                 {"m", cl.m},
                 {"slopes_ok", out.slopes_ok}};
  return out;
}

StudyResult run_mc_study(const Problem& problem, const ExperimentConfig& config) {
  const Index n = problem.n();
  const Index m = problem.m();
  const Index m2 = m * m;
  const Index nm = n * m;
  const SpMat& M0 = problem.M0();
  const Mat& u0 = problem.cluster().basis;
  const Index Mmax = Index{1} << config.mc_max_exp;
  const Index reps = config.mc_repetitions;
  std::vector<Index> schedule;
  for (int e = config.mc_min_exp; e <= config.mc_max_exp; ++e) schedule.push_back(Index{1} << e);
  const std::size_t S = schedule.size();

  struct Checkpoint {
    Vec mean_lambda, mean_basis;
    Mat cov_lambda;
    double rmse_lambda = 0, rmse_basis = 0, rmse_cov = 0;
  };
  std::vector<std::vector<Checkpoint>> std_cp(static_cast<std::size_t>(reps)), anti_cp(static_cast<std::size_t>(reps));
  // empirical errors are measured against the pooled antithetic mean, which is
  // far more accurate than the pooled standard mean and does not contain it
  std::vector<Vec> pooled_lambda, pooled_anti_lambda;
  Moments pooled_basis(nm);
  Index rejected = 0;
  auto stack = [&](const std::vector<Vec>& v) {
    Mat L(m2, static_cast<Index>(v.size()));
    for (std::size_t k = 0; k < v.size(); ++k) L.col(static_cast<Index>(k)) = v[k];
    return L;
  };

  for (Index rep = 0; rep < reps; ++rep) {
    const std::uint64_t base = config.first_index + static_cast<std::uint64_t>(rep * Mmax);
    Moments sb(nm), ab(nm);
    std::vector<Vec> lam, alam;
    std::size_t next_std = 0, next_anti = 0;
    for (Index i = 0; i < Mmax; ++i) {
      const Realization z = problem.realization(base + static_cast<std::uint64_t>(i));
      const auto s = aligned_sample(problem, z, config.alpha, config.beta);
      if (s) {
        const Vec b = vec(s->basis - u0);
        sb.add(b, weighted_sq(M0, b, m));
        lam.push_back(vec(s->lambda));
        pooled_lambda.push_back(lam.back());
      } else {
        ++rejected;
      }
      if (i < Mmax / 2) {
        const auto neg = aligned_sample(problem, negated(z), config.alpha, config.beta);
        if (s && neg) {
          const Vec b = 0.5 * (vec(s->basis - u0) + vec(neg->basis - u0));
          ab.add(b, weighted_sq(M0, b, m));
          alam.push_back(0.5 * (vec(s->lambda) + vec(neg->lambda)));
          pooled_anti_lambda.push_back(alam.back());
          pooled_basis.add(b, 0.0);
        } else if (!neg) {
          ++rejected;
        }
      }
      while (next_anti < S && i + 1 == schedule[next_anti] / 2) {
        Checkpoint cp;
        const Mat L = stack(alam);
        cp.mean_lambda = L.rowwise().mean();
        cp.rmse_lambda = mc_rmse(L);
        cp.mean_basis = ab.mean();
        cp.rmse_basis = ab.rmse(weighted_sq(M0, cp.mean_basis, m));
        anti_cp[static_cast<std::size_t>(rep)].push_back(cp);
        ++next_anti;
      }
      while (next_std < S && i + 1 == schedule[next_std]) {
        Checkpoint cp;
        const Mat L = stack(lam);
        cp.mean_lambda = L.rowwise().mean();
        cp.rmse_lambda = mc_rmse(L);
        cp.mean_basis = sb.mean();
        cp.rmse_basis = sb.rmse(weighted_sq(M0, cp.mean_basis, m));
        cp.cov_lambda = covariance_about(L, cp.mean_lambda, true);
        cp.rmse_cov = covariance_rmse(L, cp.mean_lambda, cp.cov_lambda);
        std_cp[static_cast<std::size_t>(rep)].push_back(cp);
        ++next_std;
      }
    }
  }
  require(static_cast<double>(rejected) <= 0.01 * static_cast<double>(reps * (Mmax + Mmax / 2)),
          ErrorKind::AmplitudeTooLarge, "more than 1% of Monte Carlo samples rejected; reduce alpha/beta");

  const Vec ref_lambda = stack(pooled_anti_lambda).rowwise().mean();
  const Mat ref_cov = covariance_about(stack(pooled_lambda), ref_lambda, false);
  const Vec ref_basis = pooled_basis.mean();

  StudyResult out{CsvTable({"M", "err_mean_lambda", "err_mean_basis", "err_cov_lambda", "err_cov_basis",
                            "rmse_mean_lambda", "rmse_mean_basis", "rmse_cov_lambda", "anti_err_mean_lambda",
                            "anti_err_mean_basis", "anti_rmse_mean_lambda", "anti_rmse_mean_basis"}),
                  json::object()};
  std::vector<double> Ms, r_mean, r_cov, e_mean, e_cov;
  bool anti_ok = true;
  for (std::size_t k = 0; k < S; ++k) {
    double em = 0, eb = 0, ec = 0, rm = 0, rb = 0, rc = 0, aem = 0, aeb = 0, arm = 0, arb = 0;
    for (Index rep = 0; rep < reps; ++rep) {
      const Checkpoint& s = std_cp[static_cast<std::size_t>(rep)][k];
      const Checkpoint& a = anti_cp[static_cast<std::size_t>(rep)][k];
      em += (s.mean_lambda - ref_lambda).squaredNorm();
      eb += weighted_sq(M0, s.mean_basis - ref_basis, m);
      ec += (s.cov_lambda - ref_cov).squaredNorm();
      rm += s.rmse_lambda;
      rb += s.rmse_basis;
      rc += s.rmse_cov;
      aem += (a.mean_lambda - ref_lambda).squaredNorm();
      aeb += weighted_sq(M0, a.mean_basis - ref_basis, m);
      arm += a.rmse_lambda;
      arb += a.rmse_basis;
    }
    const double R = static_cast<double>(reps);
    const double row[10] = {std::sqrt(em / R), std::sqrt(eb / R), std::sqrt(ec / R), rm / R,  rb / R,
                            rc / R,            std::sqrt(aem / R), std::sqrt(aeb / R), arm / R, arb / R};
    out.table.add_row({static_cast<double>(schedule[k]), row[0], row[1], row[2], std::nullopt, row[3], row[4], row[5],
                       row[6], row[7], row[8], row[9]});
    Ms.push_back(static_cast<double>(schedule[k]));
    e_mean.push_back(row[0]);
    e_cov.push_back(row[2]);
    r_mean.push_back(row[3]);
    r_cov.push_back(row[5]);
    anti_ok = anti_ok && row[8] <= row[3];
  }
  const SlopeFit fm = fit_loglog(Ms, r_mean), fc = fit_loglog(Ms, r_cov);
  out.slopes_ok = kMcRate.contains(fm.slope) && kMcRate.contains(fc.slope) && anti_ok;
  out.summary = {{"slopes",
                  {{"rmse_mean_lambda", fit_json(fm)},
                   {"rmse_cov_lambda", fit_json(fc)},
                   {"err_mean_lambda", fit_json(fit_loglog(Ms, e_mean))},
                   {"err_cov_lambda", fit_json(fit_loglog(Ms, e_cov))}}},
                 {"window", {kMcRate.lo, kMcRate.hi}},
                 {"antithetic_not_worse", anti_ok},
                 {"repetitions", reps},
                 {"rejected", rejected},
                 {"alpha", config.alpha},
                 {"beta", config.beta},
                 {"slopes_ok", out.slopes_ok}};
  return out;
}

StudyResult run_expansion_study(const Problem& problem, const ExperimentConfig& config) {
  const Index m = problem.m();
  const Index m2 = m * m;
  const Index nm = problem.n() * m;
  const SpMat& M0 = problem.M0();
  const EigenCluster& cl = problem.cluster();
  const double l0 = cl.lambda0;
  const PerturbMoments mom = perturb_moments(problem);

  // per-mode eigenvalue derivatives, so the linear term of each sample is a cheap product
  const Index k = problem.kl_rank();
  Mat Fmu(m2, k), Feps(m2, k);
  for (Index i = 0; i < k; ++i) {
    const auto d = eigenvalue_derivative(cl, problem.mode_stiffness(i), problem.mode_mass(i), l0);
    Fmu.col(i) = vec(d.mu);
    Feps.col(i) = vec(d.eps);
  }

  StudyResult out{CsvTable({"t", "alpha", "beta", "pairs", "err_mean_lambda", "rmse_mean_lambda", "err_mean_basis",
                            "rmse_mean_basis", "err_cov_lambda", "rmse_cov_lambda", "pred_cov_lambda_norm",
                            "noise_mean_lambda", "noise_mean_basis", "noise_cov_lambda", "rejected"}),
                  json::object()};
  std::vector<double> ts, eml, emb, ecl, tml, tmb, tcl;
  const Index pairs = config.exp_reference_samples / 2;
  const double nf = config.exp_noise_factor;
  for (int e : config.exp_t_exps) {
    const double t = std::ldexp(1.0, e);
    const double a = config.alpha_weight * t;
    const double b = config.beta_weight * t;
    Moments mx(m2), mb(nm), my(m2 * m2);
    Index rejected = 0;
    for (Index i = 0; i < pairs; ++i) {
      const Realization z = problem.realization(config.first_index + static_cast<std::uint64_t>(i));
      const auto p = aligned_sample(problem, z, a, b);
      const auto q = aligned_sample(problem, negated(z), a, b);
      if (!p || !q) {
        rejected += (p ? 0 : 1) + (q ? 0 : 1);
        continue;
      }
      const Vec I = vec(l0 * Mat::Identity(m, m));
      const Vec xp = vec(p->lambda) - I;
      const Vec xq = vec(q->lambda) - I;
      const Vec D = a * (Fmu * z.z_mu) + b * (Feps * z.z_eps);
      const Mat Y = 0.5 * (xp * xp.transpose() + xq * xq.transpose()) - D * D.transpose();
      const Vec x = 0.5 * (xp + xq);
      const Vec bb = 0.5 * (vec(p->basis - cl.basis) + vec(q->basis - cl.basis));
      mx.add(x, x.squaredNorm());
      mb.add(bb, weighted_sq(M0, bb, m));
      my.add(vec(Y), Y.squaredNorm());
    }
    require(static_cast<double>(rejected) <= 0.01 * static_cast<double>(2 * pairs), ErrorKind::AmplitudeTooLarge,
            "more than 1% of reference samples rejected at t = " + CsvTable::format_number(t));
    const Vec xbar = mx.mean();
    const Vec bbar = mb.mean();
    const Vec ybar = my.mean();
    const Mat E = Eigen::Map<const Mat>(ybar.data(), m2, m2) - xbar * xbar.transpose();
    const double err_ml = xbar.norm(), rmse_ml = mx.rmse(xbar.squaredNorm());
    const double err_mb = std::sqrt(weighted_sq(M0, bbar, m)), rmse_mb = mb.rmse(err_mb * err_mb);
    // x x^T term adds at most 2 |xbar| rmse(x) of noise
    const double err_c = E.norm(), rmse_c = my.rmse(ybar.squaredNorm()) + 2.0 * err_ml * rmse_ml;
    const Mat pred = perturb_cov(a, b, mom).cov_lambda;
    const bool nml = err_ml < nf * rmse_ml, nmb = err_mb < nf * rmse_mb, nc = err_c < nf * rmse_c;
    out.table.add_row({t, a, b, static_cast<double>(mx.count), err_ml, rmse_ml, err_mb, rmse_mb, err_c, rmse_c,
                       pred.norm(), nml ? 1.0 : 0.0, nmb ? 1.0 : 0.0, nc ? 1.0 : 0.0, static_cast<double>(rejected)});
    ts.push_back(t);
    eml.push_back(nml ? 0.0 : err_ml);  // fit_loglog skips non-positive entries
    emb.push_back(nmb ? 0.0 : err_mb);
    ecl.push_back(nc ? 0.0 : err_c);
  }
  const SlopeFit fl = fit_loglog(ts, eml), fb = fit_loglog(ts, emb), fc = fit_loglog(ts, ecl);
  out.slopes_ok = kSecondOrder.contains(fl.slope) && kSecondOrder.contains(fb.slope) && kFourthOrder.contains(fc.slope);
  out.summary = {{"slopes",
                  {{"err_mean_lambda", fit_json(fl)}, {"err_mean_basis", fit_json(fb)}, {"err_cov_lambda", fit_json(fc)}}},
                 {"mean_window", {kSecondOrder.lo, kSecondOrder.hi}},
                 {"cov_window", {kFourthOrder.lo, kFourthOrder.hi}},
                 {"noise_factor", nf},
                 {"reference_samples", config.exp_reference_samples},
                 {"slopes_ok", out.slopes_ok}};
  return out;
}

FdCheck fd_check(const Problem& problem, const Realization& r, double h, bool dense) {
  const EigenCluster& cl = problem.cluster();
  const auto d = problem.derivatives(r);
  const Mat target = d.mu.dLambda + d.eps.dLambda;
  auto aligned = [&](double s) {
    const SampleSolution x = problem.solve_sample(r, s, s, dense);
    return align(x.basis, x.lambda, cl.basis, problem.M0(), 0.0).aligned_lambda;
  };
  auto err = [&](double s) { return ((aligned(s) - aligned(-s)) / (2.0 * s) - target).norm(); };
  FdCheck f;
  f.h = h;
  f.err_h = err(h);
  f.err_half = err(0.5 * h);
  f.observed_order = std::log2(f.err_h / f.err_half);
  return f;
}

json derivatives_report(const Problem& problem, const ExperimentConfig& config) {
  const EigenCluster& cl = problem.cluster();
  const Realization r = problem.realization(config.realization);
  const SpMat A1 = problem.stiffness_direction(r.z_mu);
  const SpMat M1 = problem.mass_direction(r.z_eps);
  const auto d = problem.derivatives(r);
  const auto direct = eigenvalue_derivative(cl, A1, M1, cl.lambda0);
  const Mat prescribed_eps = eps_rhs(cl, M1, problem.config().gauge).bottom;
  const FdCheck fd = fd_check(problem, r, config.fd_step, config.det_dense);
  const double scale = std::max(direct.mu.norm(), direct.eps.norm());
  return {{"lambda0", cl.lambda0},
          {"m", cl.m},
          {"cluster_indices", cl.indices},
          {"realization", config.realization},
          {"gauge", config.gauge},
          {"dLambda_mu", matrix_to_json(d.mu.dLambda)},
          {"dLambda_eps", matrix_to_json(d.eps.dLambda)},
          {"direct_formula_rel_error",
           {{"mu", (d.mu.dLambda - direct.mu).norm() / scale}, {"eps", (d.eps.dLambda - direct.eps).norm() / scale}}},
          {"constraint_residuals",
           {{"mu", constraint_residual(cl, problem.M0(), d.mu.dU, Mat::Zero(cl.m, cl.m))},
            {"eps", constraint_residual(cl, problem.M0(), d.eps.dU, prescribed_eps)}}},
          {"fd_check",
           {{"h", fd.h}, {"err_h", fd.err_h}, {"err_half", fd.err_half}, {"observed_order", fd.observed_order}}}};
}

json moments_to_json(const MomentEstimate& est, const MCConfig& mc) {
  json j = {{"samples", est.samples},
            {"antithetic", mc.antithetic},
            {"alpha", mc.alpha},
            {"beta", mc.beta},
            {"first_index", mc.first_index},
            {"mean_lambda", matrix_to_json(est.mean_lambda)},
            {"cov_lambda", matrix_to_json(est.cov_lambda)},
            {"mean_basis", matrix_to_json(est.mean_basis)},
            {"rmse_mean_lambda", est.rmse_mean_lambda},
            {"rmse_mean_basis", est.rmse_mean_basis},
            {"rmse_cov_lambda", est.rmse_cov_lambda},
            {"rejected", est.rejected},
            {"psd_clip", est.psd_clip},
            {"rejection_log", est.rejection_log}};
  if (!est.min_singular.empty()) {
    j["min_singular"] = *std::min_element(est.min_singular.begin(), est.min_singular.end());
  }
  if (est.has_cov_basis) j["cov_basis_factor"] = {{"rows", est.cov_basis.dim()}, {"rank", est.cov_basis.rank()}};
  return j;
}

McRun run_mc(const Problem& problem, const ExperimentConfig& config) {
  MCConfig mc;
  mc.samples = config.samples;
  mc.alpha = config.alpha;
  mc.beta = config.beta;
  mc.antithetic = config.antithetic;
  mc.first_index = config.first_index;
  mc.basis_covariance = config.basis_covariance;
  const MomentEstimate est = mc_estimate(problem, mc);
  McRun run{CsvTable({"M", "err_mean_lambda", "err_mean_basis", "err_cov_lambda", "err_cov_basis",
                      "rmse_mean_lambda", "rmse_mean_basis", "rmse_cov_lambda", "rejected"}),
            moments_to_json(est, mc)};
  Cell eml, emb, ecl;
  if (!config.reference.empty()) {
    const json ref = json::parse(read_text_file(config.reference));
    eml = (est.mean_lambda - matrix_from_json(ref.at("mean_lambda"))).norm();
    emb = l2_norm(problem.M0(), est.mean_basis - matrix_from_json(ref.at("mean_basis")));
    ecl = (est.cov_lambda - matrix_from_json(ref.at("cov_lambda"))).norm();
  }
  run.table.add_row({static_cast<double>(est.samples), eml, emb, ecl, std::nullopt, est.rmse_mean_lambda,
                     est.rmse_mean_basis, est.rmse_cov_lambda, static_cast<double>(est.rejected)});
  return run;
}

McRun run_perturb(const Problem& problem, const ExperimentConfig& config, double* seconds) {
  const auto start = std::chrono::steady_clock::now();
  const PerturbMoments mom = perturb_moments(problem);
  const CovPrediction pred = perturb_cov(config.alpha, config.beta, mom);
  const double elapsed = seconds_since(start);
  if (seconds) *seconds = elapsed;
  McRun run{CsvTable({"quantity", "prediction_norm", "reference_norm", "error", "reference_rmse"}),
            {{"alpha", config.alpha},
             {"beta", config.beta},
             {"kl_rank", problem.kl_rank()},
             {"mean_lambda", matrix_to_json(mom.mean.mean_lambda)},
             {"cov_lambda", matrix_to_json(pred.cov_lambda)},
             {"cov_lambda_mu", matrix_to_json(mom.direct.mu)},
             {"cov_lambda_eps", matrix_to_json(mom.direct.eps)},
             {"basis_cov_factor", {{"rows", pred.cov_basis.dim()}, {"rank", pred.cov_basis.rank()}, {"scale", pred.cov_basis.scale}}},
             {"timing_s", elapsed}}};
  if (!config.reference.empty()) {
    const json ref = json::parse(read_text_file(config.reference));
    const Mat rl = matrix_from_json(ref.at("mean_lambda"));
    const Mat rb = matrix_from_json(ref.at("mean_basis"));
    const Mat rc = matrix_from_json(ref.at("cov_lambda"));
    auto fmt = CsvTable::format_number;
    run.table.add_text_row({"mean_lambda", fmt(mom.mean.mean_lambda.norm()), fmt(rl.norm()),
                            fmt((mom.mean.mean_lambda - rl).norm()), fmt(ref.value("rmse_mean_lambda", 0.0))});
    run.table.add_text_row({"mean_basis", fmt(l2_norm(problem.M0(), mom.mean.mean_basis)), fmt(l2_norm(problem.M0(), rb)),
                            fmt(l2_norm(problem.M0(), mom.mean.mean_basis - rb)), fmt(ref.value("rmse_mean_basis", 0.0))});
    run.table.add_text_row({"cov_lambda", fmt(pred.cov_lambda.norm()), fmt(rc.norm()), fmt((pred.cov_lambda - rc).norm()),
                            fmt(ref.value("rmse_cov_lambda", 0.0))});
  }
  return run;
}

json report_timings(const ExperimentConfig& config) {
  auto start = std::chrono::steady_clock::now();
  const Problem problem(config.problem());
  const double setup = seconds_since(start);
  double perturb = 0.0;
  run_perturb(problem, config, &perturb);
  json mc = json::array();
  double largest = 0.0;
  for (Index M : config.timing_samples) {
    double s = 0.0;
    if (M > 0) {
      MCConfig c;
      c.samples = M;
      c.alpha = config.alpha;
      c.beta = config.beta;
      c.first_index = config.first_index;
      start = std::chrono::steady_clock::now();
      mc_estimate(problem, c);
      s = seconds_since(start);
    }
    mc.push_back({{"samples", M}, {"seconds", s}});
    largest = s;
  }
  return {{"setup_s", setup},
          {"perturbation_s", perturb},
          {"mc", mc},
          {"perturbation_over_mc", largest > 0 ? json(perturb / largest) : json(nullptr)},
          {"config_hash", config.hash()}};
}

}  // namespace specuq
