#pragma once

#include "hvi/abstract_hvi.hpp"
#include "hvi/types.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hvi::fem {

using Point = Eigen::Vector2d;
using Tensor2 = Eigen::Matrix2d;
using VectorField = std::function<Point(double x, double y, double t)>;

enum class Region : int { Gamma1 = 1, Gamma2 = 2, Gamma3 = 3 };

struct BoundaryEdge {
    int a = 0;
    int b = 0;
    Region region = Region::Gamma2;
    Point normal = Point::Zero();
    double length = 0.0;
};

/// Triangulation with tagged boundary. Built only through `TriMesh::build`,
/// which validates orientation, boundary coverage and Γ₁.
struct TriMesh {
    std::vector<Point> nodes;
    std::vector<std::array<int, 3>> triangles;
    std::vector<BoundaryEdge> boundary_edges;
    double h = 0.0;

    struct TaggedEdge {
        int a;
        int b;
        int tag;
    };
    static TriMesh build(std::vector<Point> nodes, std::vector<std::array<int, 3>> triangles,
                         const std::vector<TaggedEdge>& edges);

    double area(int t) const;
    double total_area() const;
    double diameter(int t) const;
    double boundary_length(Region r) const;
};

enum class Side { Bottom = 0, Right = 1, Top = 2, Left = 3 };

/// Region per side of a rectangle; every side must be tagged.
struct SideTagging {
    std::array<std::optional<Region>, 4> regions;

    SideTagging& set(Side side, Region region);
    std::optional<Region> at(Side side) const { return regions[static_cast<std::size_t>(side)]; }
    /// Γ₁ left, Γ₃ bottom, Γ₂ top and right.
    static SideTagging clamped_left_contact_bottom();
};

/// Crossed-diagonal triangulation of [0,lx]×[0,ly]: each cell gets its
/// center node and four triangles. h is the longest triangle edge, which for
/// these triangles is the cell side max(lx/nx, ly/ny).
TriMesh generate_rect_mesh(int nx, int ny, double lx, double ly, const SideTagging& tagging);

/// Vector P1 degrees of freedom with Γ₁ nodes eliminated. Free dofs are
/// numbered node by node (x then y).
struct DofMap {
    std::vector<std::array<int, 2>> node_dofs;
    std::vector<bool> dirichlet;
    int free_count = 0;

    static DofMap build(const TriMesh& mesh);
    /// Nodal displacement of node i (zero on Γ₁).
    Point value(const Vector& u, int node) const;
};

/// σ = 2·shear·ε + bulk·tr(ε)·I.
struct IsotropicTensor {
    double shear = 0.0;
    double bulk = 0.0;

    Tensor2 apply(const Tensor2& eps) const;
    /// m with σ(ε):ε >= m |ε|²; requires shear > 0 and bulk >= 0.
    double ellipticity() const { return 2.0 * shear; }
    /// Operator norm on symmetric 2×2 tensors.
    double norm() const { return 2.0 * std::abs(shear) + 2.0 * std::abs(bulk); }
    bool is_zero() const { return shear == 0.0 && bulk == 0.0; }
    void check() const;
};

/// Sparse matrix of (u, v) ↦ ∫ σ(ε(u)) : ε(v) on free dofs.
SparseMatrix assemble_elastic_matrix(const TriMesh& mesh, const DofMap& dofs, const IsotropicTensor& tensor);

/// Same matrix without Dirichlet elimination (2 × nodes square).
SparseMatrix assemble_elastic_matrix_full(const TriMesh& mesh, const IsotropicTensor& tensor);

/// Gram matrix of the energy inner product ⟨ε(u), ε(v)⟩.
SparseMatrix assemble_strain_gram(const TriMesh& mesh, const DofMap& dofs);

/// The assembled form with its constants relative to the strain inner product:
/// coercivity 2·shear and bound 2·shear + 2·bulk.
CoerciveOperator assemble_elastic(const TriMesh& mesh, const DofMap& dofs, const IsotropicTensor& tensor);

/// ∫ f0 · v + ∫_{Γ₂} fN · v. Elements use the three edge midpoints
/// (exact for quadratics); Γ₂ edges use two-point Gauss.
Vector assemble_load(const TriMesh& mesh, const DofMap& dofs, const VectorField& f0, const VectorField& fN, double t);

struct ContactTrace {
    SparseMatrix M;
    Vector weights;
    std::vector<int> nodes;
    std::vector<Point> normals;
};

/// Normal trace at Γ₃ nodes (unit normals averaged over adjacent Γ₃ edges)
/// with nodal weights equal to half the adjacent Γ₃ edge lengths. Rows of
/// nodes that are also on Γ₁ are zero.
ContactTrace trace_normal(const TriMesh& mesh, const DofMap& dofs);

/// Nodal P1 interpolant on free dofs. Throws DirichletMismatch if the field
/// exceeds 1e-10 at a Γ₁ node.
Vector interpolant_P1(const TriMesh& mesh, const DofMap& dofs, const std::function<Point(double, double)>& u);

/// Constant strain of element e for the free-dof vector u.
Tensor2 element_strain(const TriMesh& mesh, const DofMap& dofs, const Vector& u, int e);

/// Plain-text mesh format: "nodes N", N lines "x y", "triangles M", M lines
/// "i j k", "bedges K", K lines "i j tag"; 0-based indices.
TriMesh read_mesh(std::istream& in);
TriMesh read_mesh_file(const std::string& path);
void write_mesh(std::ostream& out, const TriMesh& mesh);

/// Legacy ASCII VTK unstructured grid with point vectors "displacement" and
/// cell tensors "stress" (2D tensors padded to 3×3).
void write_vtk(std::ostream& out, const TriMesh& mesh, const DofMap& dofs, const Vector& u,
               const std::vector<Tensor2>& stress, const std::string& title = "hvi");

} // namespace hvi::fem
