#include "specuq/mesh.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace specuq {

double Mesh::signed_area(std::size_t t) const {
  const auto& tri = triangles[t];
  const Eigen::Vector2d e1 = nodes[tri[1]] - nodes[tri[0]];
  const Eigen::Vector2d e2 = nodes[tri[2]] - nodes[tri[0]];
  return 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
}

namespace {

constexpr double kBoundaryEps = 1e-12;

void finalize_topology(Mesh& mesh) {
  mesh.interior_index.assign(mesh.nodes.size(), -1);
  mesh.free_nodes.clear();
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
    const auto& p = mesh.nodes[i];
    if (p.x() > kBoundaryEps && p.x() < 1.0 - kBoundaryEps && p.y() > kBoundaryEps &&
        p.y() < 1.0 - kBoundaryEps) {
      mesh.interior_index[i] = static_cast<int>(mesh.free_nodes.size());
      mesh.free_nodes.push_back(static_cast<int>(i));
    }
  }
  double h = 0.0;
  for (const auto& tri : mesh.triangles) {
    for (int a = 0; a < 3; ++a) {
      h = std::max(h, (mesh.nodes[tri[a]] - mesh.nodes[tri[(a + 1) % 3]]).norm());
    }
  }
  mesh.h = h;
}

}  // namespace

Mesh build_unit_square_mesh(int N) {
  require(N >= 3, ErrorKind::InvalidMesh, "need at least 3 nodes per side, got " + std::to_string(N));
  Mesh mesh;
  mesh.N = N;
  const int cells = N - 1;
  const double step = 1.0 / cells;
  mesh.nodes.reserve(static_cast<std::size_t>(N * N + cells * cells));
  for (int j = 0; j < N; ++j) {
    for (int i = 0; i < N; ++i) {
      // exact 0 and 1 at the ends
      mesh.nodes.emplace_back(i == cells ? 1.0 : i * step, j == cells ? 1.0 : j * step);
    }
  }
  const int centre0 = N * N;
  for (int j = 0; j < cells; ++j) {
    for (int i = 0; i < cells; ++i) {
      mesh.nodes.emplace_back((i + 0.5) * step, (j + 0.5) * step);
    }
  }
  mesh.triangles.reserve(static_cast<std::size_t>(4 * cells * cells));
  for (int j = 0; j < cells; ++j) {
    for (int i = 0; i < cells; ++i) {
      const int a = j * N + i;
      const int b = a + 1;
      const int c = a + N + 1;
      const int d = a + N;
      const int m = centre0 + j * cells + i;
      mesh.triangles.push_back({a, b, m});
      mesh.triangles.push_back({b, c, m});
      mesh.triangles.push_back({c, d, m});
      mesh.triangles.push_back({d, a, m});
    }
  }
  finalize_topology(mesh);
  return mesh;
}

P1Assembler::P1Assembler(const Mesh& mesh) : mesh_(&mesh) {
  const std::size_t nt = mesh.triangles.size();
  k_elem_.resize(nt);
  m_elem_.resize(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangles[t];
    Eigen::Matrix2d jac;
    jac.col(0) = mesh.nodes[tri[1]] - mesh.nodes[tri[0]];
    jac.col(1) = mesh.nodes[tri[2]] - mesh.nodes[tri[0]];
    const double area = 0.5 * std::abs(jac.determinant());
    Eigen::Matrix<double, 2, 3> ref_grad;
    ref_grad << -1, 1, 0, -1, 0, 1;
    const Eigen::Matrix<double, 2, 3> grad = jac.inverse().transpose() * ref_grad;
    const Eigen::Matrix3d ke = area * (grad.transpose() * grad);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        // symmetric by construction: use the upper entry for both halves
        k_elem_[t][3 * a + b] = a <= b ? ke(a, b) : ke(b, a);
        m_elem_[t][3 * a + b] = area / 12.0 * (a == b ? 2.0 : 1.0);
      }
    }
  }

  auto build = [&](DofSet dofs) {
    Pattern pat;
    const bool all = dofs == DofSet::All;
    const Index n = all ? mesh.num_nodes() : mesh.num_free();
    auto dof = [&](int node) { return all ? node : mesh.interior_index[node]; };
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(nt * 9);
    for (const auto& tri : mesh.triangles) {
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          const int r = dof(tri[a]);
          const int c = dof(tri[b]);
          if (r >= 0 && c >= 0) trip.emplace_back(r, c, 0.0);
        }
      }
    }
    pat.skeleton.resize(n, n);
    pat.skeleton.setFromTriplets(trip.begin(), trip.end());
    pat.skeleton.makeCompressed();
    const auto* outer = pat.skeleton.outerIndexPtr();
    const auto* inner = pat.skeleton.innerIndexPtr();
    pat.slot.resize(nt);
    for (std::size_t t = 0; t < nt; ++t) {
      const auto& tri = mesh.triangles[t];
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          const int r = dof(tri[a]);
          const int c = dof(tri[b]);
          int slot = -1;
          if (r >= 0 && c >= 0) {
            const auto* first = inner + outer[c];
            const auto* last = inner + outer[c + 1];
            slot = static_cast<int>(std::lower_bound(first, last, r) - inner);
          }
          pat.slot[t][3 * a + b] = slot;
        }
      }
    }
    return pat;
  };
  free_pattern_ = build(DofSet::Free);
  all_pattern_ = build(DofSet::All);
}

Vec P1Assembler::centroid_values(const NodalField& coeff) const {
  const Mesh& mesh = *mesh_;
  require(coeff.values.size() == mesh.num_nodes(), ErrorKind::Contract,
          "nodal field length does not match mesh node count");
  Vec c(static_cast<Index>(mesh.triangles.size()));
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    c[static_cast<Index>(t)] =
        (coeff.values[tri[0]] + coeff.values[tri[1]] + coeff.values[tri[2]]) / 3.0;
  }
  return c;
}

void P1Assembler::scatter(const Vec& centroid, const std::vector<std::array<double, 9>>& elems,
                          const Pattern& pat, SpMat& out) const {
  require(out.rows() == pat.skeleton.rows() && out.nonZeros() == pat.skeleton.nonZeros() &&
              out.isCompressed(),
          ErrorKind::Contract, "target matrix does not carry the assembler pattern");
  double* values = out.valuePtr();
  std::fill(values, values + out.nonZeros(), 0.0);
  for (std::size_t t = 0; t < elems.size(); ++t) {
    const double c = centroid[static_cast<Index>(t)];
    const auto& slot = pat.slot[t];
    const auto& e = elems[t];
    for (int k = 0; k < 9; ++k) {
      if (slot[k] >= 0) values[slot[k]] += c * e[k];
    }
  }
}

SpMat P1Assembler::stiffness(const NodalField& coeff, DofSet dofs) const {
  SpMat out = pattern(dofs).skeleton;
  scatter(centroid_values(coeff), k_elem_, pattern(dofs), out);
  return out;
}

SpMat P1Assembler::mass(const NodalField& coeff, DofSet dofs) const {
  SpMat out = pattern(dofs).skeleton;
  scatter(centroid_values(coeff), m_elem_, pattern(dofs), out);
  return out;
}

void P1Assembler::stiffness_into(const NodalField& coeff, SpMat& out) const {
  scatter(centroid_values(coeff), k_elem_,
          out.rows() == mesh_->num_nodes() ? all_pattern_ : free_pattern_, out);
}

void P1Assembler::mass_into(const NodalField& coeff, SpMat& out) const {
  scatter(centroid_values(coeff), m_elem_,
          out.rows() == mesh_->num_nodes() ? all_pattern_ : free_pattern_, out);
}

SpMat assemble_stiffness(const Mesh& mesh, const NodalField& coeff, DofSet dofs) {
  return P1Assembler(mesh).stiffness(coeff, dofs);
}

SpMat assemble_mass(const Mesh& mesh, const NodalField& coeff, DofSet dofs) {
  return P1Assembler(mesh).mass(coeff, dofs);
}

Vec extend_to_nodes(const Mesh& mesh, const Vec& free_values) {
  require(free_values.size() == mesh.num_free(), ErrorKind::Contract, "free vector length mismatch");
  Vec out = Vec::Zero(mesh.num_nodes());
  for (Index i = 0; i < mesh.num_free(); ++i) out[mesh.free_nodes[static_cast<std::size_t>(i)]] = free_values[i];
  return out;
}

std::string mesh_to_json(const Mesh& mesh) {
  nlohmann::json j;
  j["N"] = mesh.N;
  auto& nodes = j["nodes"] = nlohmann::json::array();
  for (const auto& p : mesh.nodes) nodes.push_back({p.x(), p.y()});
  auto& tris = j["triangles"] = nlohmann::json::array();
  for (const auto& t : mesh.triangles) tris.push_back({t[0], t[1], t[2]});
  return j.dump();
}

Mesh mesh_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, std::string("mesh JSON: ") + e.what());
  }
  Mesh mesh;
  try {
    mesh.N = j.at("N").get<int>();
    for (const auto& p : j.at("nodes")) mesh.nodes.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    for (const auto& t : j.at("triangles")) {
      mesh.triangles.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, std::string("mesh JSON: ") + e.what());
  }
  const auto n = static_cast<int>(mesh.nodes.size());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    for (int v : mesh.triangles[t]) {
      require(v >= 0 && v < n, ErrorKind::InvalidMesh, "triangle references unknown node");
    }
    require(mesh.signed_area(t) > 0.0, ErrorKind::InvalidMesh, "triangle with nonpositive area");
  }
  finalize_topology(mesh);
  return mesh;
}

void write_coordinate(std::ostream& out, const SpMat& matrix) {
  const auto precision = out.precision(17);
  for (Index c = 0; c < matrix.outerSize(); ++c) {
    for (SpMat::InnerIterator it(matrix, c); it; ++it) {
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
  out.precision(precision);
}

}  // namespace specuq
