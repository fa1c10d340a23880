#include "specuq/field_model.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace specuq {

KernelSpec KernelSpec::gaussian(double scale) {
  require(scale > 0.0, ErrorKind::Configuration, "kernel scale must be positive");
  const double norm = 1.0 / std::sqrt(scale * std::numbers::pi);
  return KernelSpec{"gaussian", scale, [scale, norm](double r) { return norm * std::exp(-r * r / scale); }};
}

PivotedCholeskyResult pivoted_cholesky(Index n, const std::function<double(Index, Index)>& entry,
                                       double trace_tol, Index max_rank) {
  require(trace_tol >= 0.0, ErrorKind::Configuration, "trace tolerance must be nonnegative");
  if (max_rank < 0 || max_rank > n) max_rank = n;

  Vec diag(n);
  for (Index i = 0; i < n; ++i) diag[i] = entry(i, i);
  PivotedCholeskyResult out;
  out.trace_error = diag.sum();
  Mat L(n, std::min<Index>(max_rank, 64));
  Index k = 0;
  const double round_off = 1e-14 * (n > 0 ? diag.cwiseAbs().maxCoeff() : 0.0);

  while (out.trace_error > trace_tol) {
    if (k == max_rank) {
      throw RankExhaustedError("pivoted Cholesky reached rank " + std::to_string(k) +
                                   " with trace error " + std::to_string(out.trace_error),
                               out.trace_error);
    }
    Index p = 0;
    const double dmax = diag.maxCoeff(&p);
    if (dmax <= round_off) break;  // remaining diagonal exhausted
    if (k == L.cols()) L.conservativeResize(n, std::min<Index>(max_rank, 2 * L.cols()));

    Vec col(n);
    for (Index i = 0; i < n; ++i) col[i] = entry(i, p);
    if (k > 0) col.noalias() -= L.leftCols(k) * L.row(p).head(k).transpose();
    const double pivot = std::sqrt(dmax);
    col /= pivot;
    for (Index q : out.pivots) col[q] = 0.0;  // already eliminated
    col[p] = pivot;
    L.col(k) = col;
    out.pivots.push_back(p);
    ++k;

    diag -= col.cwiseAbs2();
    diag[p] = 0.0;
    for (Index q : out.pivots) diag[q] = 0.0;
    if (diag.minCoeff() < -std::max(trace_tol, 1e-12 * dmax)) {
      throw Error(ErrorKind::NotSpsd, "negative updated diagonal in pivoted Cholesky");
    }
    diag = diag.cwiseMax(0.0);
    out.trace_error = diag.sum();
    out.trace_history.push_back(out.trace_error);
  }
  out.factor = L.leftCols(k);
  return out;
}

NodalField KLExpansion::fluctuation(const Vec& z) const {
  require(z.size() == rank(), ErrorKind::Contract, "coefficient vector length must equal KL rank");
  return NodalField{modes * z};
}

NodalField KLExpansion::field(const Vec& z) const {
  NodalField f = fluctuation(z);
  f.values = (amplitude * f.values).array() + mean;
  return f;
}

double KLExpansion::sup_bound() const {
  double s = 0.0;
  for (Index i = 0; i < rank(); ++i) s += modes.col(i).cwiseAbs().maxCoeff();
  return 0.5 * s;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t master_seed, std::uint64_t index, std::uint64_t channel) {
  std::uint64_t state = master_seed;
  std::uint64_t key = splitmix64(state);
  state = key ^ (index * 0xd1b54a32d192ed03ULL);
  key = splitmix64(state);
  state = key ^ (channel * 0x8cb92ba72f3d8dd7ULL);
  engine_.seed(splitmix64(state));
}

double RandomStream::uniform_centered() {
  // 53 random bits -> [0, 1); the engine's output sequence is fixed by the standard
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53 - 0.5;
}

Vec RandomStream::uniform_centered(Index count) {
  Vec z(count);
  for (Index i = 0; i < count; ++i) z[i] = uniform_centered();
  return z;
}

double RandomStream::normal() {
  // Box-Muller on portable uniforms
  const double u1 = uniform_centered() + 0.5;
  const double u2 = uniform_centered() + 0.5;
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::function<double(Index, Index)> nodal_kernel_entry(const Mesh& mesh, const KernelSpec& kernel) {
  return [&mesh, kernel](Index i, Index j) {
    return kernel.evaluate((mesh.nodes[static_cast<std::size_t>(i)] - mesh.nodes[static_cast<std::size_t>(j)]).norm());
  };
}

KLExpansion build_kl_from_gram(Index num_nodes, const std::function<double(Index, Index)>& gram_entry,
                               const SpMat& full_mass, double trace_tol, Index max_rank) {
  require(full_mass.rows() == num_nodes && full_mass.cols() == num_nodes, ErrorKind::Configuration,
          "KL needs the mass matrix on the full node set");
  const PivotedCholeskyResult chol = pivoted_cholesky(num_nodes, gram_entry, trace_tol, max_rank);
  const Mat& L = chol.factor;
  const Mat reduced = L.transpose() * (full_mass * L);
  Eigen::SelfAdjointEigenSolver<Mat> eig(reduced);
  require(eig.info() == Eigen::Success, ErrorKind::Numerical, "reduced KL eigenproblem failed");
  // SelfAdjointEigenSolver sorts ascending; keep positive values in descending order
  const Vec& values = eig.eigenvalues();
  const double cutoff = values.size() > 0 ? 1e-14 * std::max(values.maxCoeff(), 0.0) : 0.0;
  std::vector<Index> keep;
  for (Index i = values.size() - 1; i >= 0; --i) {
    if (values[i] > cutoff) keep.push_back(i);
  }
  require(keep.size() == static_cast<std::size_t>(values.size()), ErrorKind::Configuration,
          "singular mass matrix in KL reduction");

  KLExpansion kl;
  kl.trace_error = chol.trace_error;
  kl.sigmas.resize(static_cast<Index>(keep.size()));
  kl.modes.resize(num_nodes, static_cast<Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const auto ci = static_cast<Index>(c);
    kl.sigmas[ci] = values[keep[c]];
    Vec mode = L * eig.eigenvectors().col(keep[c]);
    // sign: largest-magnitude entry positive, lowest index on ties
    Index arg = 0;
    mode.cwiseAbs().maxCoeff(&arg);
    if (mode[arg] < 0.0) mode = -mode;
    kl.modes.col(ci) = mode;
  }
  return kl;
}

KLExpansion build_kl(const Mesh& mesh, const KernelSpec& kernel, const SpMat& full_mass,
                     double trace_tol, Index max_rank) {
  return build_kl_from_gram(mesh.num_nodes(), nodal_kernel_entry(mesh, kernel), full_mass, trace_tol,
                            max_rank);
}

FieldSample sample_field(const KLExpansion& kl, RandomStream& stream) {
  FieldSample s;
  s.z = stream.uniform_centered(kl.rank());
  s.field = kl.field(s.z);
  return s;
}

std::string kl_to_json(const KLExpansion& kl, std::uint64_t master_seed) {
  nlohmann::json j;
  j["n_nodes"] = kl.num_nodes();
  j["k"] = kl.rank();
  j["mean"] = kl.mean;
  j["amplitude"] = kl.amplitude;
  j["trace_error"] = kl.trace_error;
  j["sigmas"] = std::vector<double>(kl.sigmas.data(), kl.sigmas.data() + kl.sigmas.size());
  j["modes"] = std::vector<double>(kl.modes.data(), kl.modes.data() + kl.modes.size());  // column-major
  j["seed_policy"] = {{"master_seed", master_seed},
                      {"channel", kl.seed_policy_stream},
                      {"scheme", "splitmix64(master, sample index, channel) -> mt19937_64"},
                      {"law", "uniform[-1/2,1/2]"}};
  return j.dump();
}

KLExpansion kl_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    KLExpansion kl;
    const auto n = j.at("n_nodes").get<Index>();
    const auto k = j.at("k").get<Index>();
    kl.mean = j.at("mean").get<double>();
    kl.amplitude = j.at("amplitude").get<double>();
    kl.trace_error = j.value("trace_error", 0.0);
    const auto sig = j.at("sigmas").get<std::vector<double>>();
    const auto modes = j.at("modes").get<std::vector<double>>();
    require(static_cast<Index>(sig.size()) == k && static_cast<Index>(modes.size()) == n * k,
            ErrorKind::Io, "KL JSON dimensions inconsistent");
    kl.sigmas = Eigen::Map<const Vec>(sig.data(), k);
    kl.modes = Eigen::Map<const Mat>(modes.data(), n, k);
    if (j.contains("seed_policy")) kl.seed_policy_stream = j["seed_policy"].value("channel", 0ULL);
    return kl;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, std::string("KL JSON: ") + e.what());
  }
}

}  // namespace specuq
