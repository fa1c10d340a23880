#pragma once

#include "specuq/types.hpp"

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace specuq {

/// Criss-cross P1 triangulation of the unit square.
///
/// Corner-grid nodes come first (row-major, y outer), followed by one centre
/// node per cell. Each cell is cut by both diagonals into four triangles, so
/// the mesh carries the full symmetry group of the square. Nodes with
/// 0 < x < 1 and 0 < y < 1 are free; the rest carry homogeneous Dirichlet
/// conditions and are eliminated.
struct Mesh {
  int N = 0;  ///< corner nodes per side
  std::vector<Eigen::Vector2d> nodes;
  std::vector<std::array<int, 3>> triangles;  ///< counterclockwise
  std::vector<int> interior_index;            ///< node -> free DOF, -1 on the boundary
  std::vector<int> free_nodes;                ///< free DOF -> node
  double h = 0.0;                             ///< max edge length

  Index num_nodes() const { return static_cast<Index>(nodes.size()); }
  Index num_free() const { return static_cast<Index>(free_nodes.size()); }

  /// Signed area of triangle t.
  double signed_area(std::size_t t) const;
};

/// Per-node coefficient values; length equals the owning mesh's node count.
struct NodalField {
  Vec values;

  static NodalField constant(const Mesh& mesh, double value) {
    return NodalField{Vec::Constant(mesh.num_nodes(), value)};
  }
};

enum class DofSet { Free, All };

Mesh build_unit_square_mesh(int N);

/// Assembler with precomputed element matrices and a fixed sparsity pattern.
///
/// The coefficient is evaluated at triangle centroids (mean of the three
/// nodal values), which keeps assembly exactly linear in the coefficient.
/// Repeated assemblies over different coefficients only rescale cached
/// element matrices.
class P1Assembler {
 public:
  explicit P1Assembler(const Mesh& mesh);

  SpMat stiffness(const NodalField& coeff, DofSet dofs = DofSet::Free) const;
  SpMat mass(const NodalField& coeff, DofSet dofs = DofSet::Free) const;

  /// Write stiffness/mass values into a matrix that already has this
  /// assembler's pattern (as returned by stiffness()/mass()).
  void stiffness_into(const NodalField& coeff, SpMat& out) const;
  void mass_into(const NodalField& coeff, SpMat& out) const;

  /// Per-triangle centroid values of a nodal field.
  Vec centroid_values(const NodalField& coeff) const;

  const Mesh& mesh() const { return *mesh_; }

 private:
  struct Pattern {
    SpMat skeleton;                    // values zero, pattern fixed
    std::vector<std::array<int, 9>> slot;  // triangle -> value index (or -1)
  };

  void scatter(const Vec& centroid, const std::vector<std::array<double, 9>>& elems,
               const Pattern& pattern, SpMat& out) const;
  const Pattern& pattern(DofSet dofs) const {
    return dofs == DofSet::Free ? free_pattern_ : all_pattern_;
  }

  const Mesh* mesh_;
  std::vector<std::array<double, 9>> k_elem_;
  std::vector<std::array<double, 9>> m_elem_;
  Pattern free_pattern_;
  Pattern all_pattern_;
};

SpMat assemble_stiffness(const Mesh& mesh, const NodalField& coeff, DofSet dofs = DofSet::Free);
SpMat assemble_mass(const Mesh& mesh, const NodalField& coeff, DofSet dofs = DofSet::Free);

/// Scatter a free-DOF vector to all nodes (zeros on the boundary).
Vec extend_to_nodes(const Mesh& mesh, const Vec& free_values);

std::string mesh_to_json(const Mesh& mesh);
Mesh mesh_from_json(const std::string& text);

/// One "row col value" triple per line, 0-based.
void write_coordinate(std::ostream& out, const SpMat& matrix);

}  // namespace specuq
