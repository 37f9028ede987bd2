#include "hvi/fem2d.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace hvi;
using namespace hvi::fem;

namespace {

TriMesh reference_triangle()
{
    return TriMesh::build({Point(0, 0), Point(1, 0), Point(0, 1)}, {{0, 1, 2}}, {{0, 1, 3}, {1, 2, 2}, {2, 0, 1}});
}

/// All nodes free, numbered 2i, 2i+1.
DofMap all_free(const TriMesh& mesh)
{
    DofMap d;
    d.dirichlet.assign(mesh.nodes.size(), false);
    for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
        d.node_dofs.push_back({static_cast<int>(2 * i), static_cast<int>(2 * i + 1)});
    }
    d.free_count = static_cast<int>(2 * mesh.nodes.size());
    return d;
}

/// Moves interior nodes of a mesh randomly, keeping the boundary and the tags.
TriMesh jiggle(const TriMesh& mesh, double amount, std::uint64_t seed)
{
    std::vector<bool> on_boundary(mesh.nodes.size(), false);
    std::vector<TriMesh::TaggedEdge> edges;
    for (const auto& e : mesh.boundary_edges) {
        on_boundary[static_cast<std::size_t>(e.a)] = true;
        on_boundary[static_cast<std::size_t>(e.b)] = true;
        edges.push_back({e.a, e.b, static_cast<int>(e.region)});
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-amount, amount);
    auto nodes = mesh.nodes;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!on_boundary[i]) {
            nodes[i] += Point(u(rng), u(rng));
        }
    }
    return TriMesh::build(nodes, mesh.triangles, edges);
}

/// ‖ε(Π u) − ε(u)‖_{L²} with ε(u) given analytically (midpoint rule, exact for quadratics).
double interpolation_error(const TriMesh& mesh, const DofMap& dofs, const Vector& pi,
                           const std::function<Tensor2(double, double)>& eps)
{
    double sum = 0.0;
    for (int e = 0; e < static_cast<int>(mesh.triangles.size()); ++e) {
        const Tensor2 eh = element_strain(mesh, dofs, pi, e);
        const auto& tri = mesh.triangles[static_cast<std::size_t>(e)];
        for (int i = 0; i < 3; ++i) {
            const Point m = 0.5 * (mesh.nodes[static_cast<std::size_t>(tri[static_cast<std::size_t>(i)])] +
                                   mesh.nodes[static_cast<std::size_t>(tri[static_cast<std::size_t>((i + 1) % 3)])]);
            sum += mesh.area(e) / 3.0 * (eh - eps(m.x(), m.y())).squaredNorm();
        }
    }
    return std::sqrt(sum);
}

} // namespace

TEST(Mesh, SingleCellCounts)
{
    const auto m = generate_rect_mesh(1, 1, 1.0, 1.0, SideTagging::clamped_left_contact_bottom());
    EXPECT_EQ(m.nodes.size(), 5u);
    EXPECT_EQ(m.triangles.size(), 4u);
    EXPECT_EQ(m.boundary_edges.size(), 4u);
    // longest edge of the crossed-diagonal triangles is the cell side
    EXPECT_DOUBLE_EQ(m.h, 1.0);
}

TEST(Mesh, AreaPartitionAndScaling)
{
    for (auto [nx, ny, lx, ly] : {std::tuple{1, 1, 1.0, 1.0}, std::tuple{3, 2, 2.0, 0.5}, std::tuple{7, 5, 1.3, 2.1}}) {
        const auto m = generate_rect_mesh(nx, ny, lx, ly, SideTagging::clamped_left_contact_bottom());
        EXPECT_NEAR(m.total_area(), lx * ly, 1e-12 * lx * ly);
        for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t) {
            EXPECT_GT(m.area(t), 0.0);
        }
        const auto f = generate_rect_mesh(2 * nx, 2 * ny, lx, ly, SideTagging::clamped_left_contact_bottom());
        EXPECT_NEAR(f.h, 0.5 * m.h, 1e-14);
        EXPECT_NEAR(m.boundary_length(Region::Gamma1), ly, 1e-14);
        EXPECT_NEAR(m.boundary_length(Region::Gamma3), lx, 1e-14);
        EXPECT_NEAR(m.boundary_length(Region::Gamma2), lx + ly, 1e-14);
    }
}

TEST(Mesh, OutwardNormals)
{
    const auto m = generate_rect_mesh(3, 3, 1.0, 1.0, SideTagging::clamped_left_contact_bottom());
    for (const auto& e : m.boundary_edges) {
        const Point mid = 0.5 * (m.nodes[static_cast<std::size_t>(e.a)] + m.nodes[static_cast<std::size_t>(e.b)]);
        EXPECT_NEAR(e.normal.norm(), 1.0, 1e-14);
        EXPECT_GT(e.normal.dot(mid - Point(0.5, 0.5)), 0.0);
    }
}

TEST(Mesh, InvalidInputs)
{
    SideTagging partial;
    partial.set(Side::Left, Region::Gamma1).set(Side::Bottom, Region::Gamma3).set(Side::Top, Region::Gamma2);
    try {
        generate_rect_mesh(2, 2, 1.0, 1.0, partial);
        FAIL() << "expected InvalidTagging";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidTagging);
    }
    auto code = [](auto&& f) {
        try {
            f();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::IoError;
    };
    EXPECT_EQ(code([] { TriMesh::build({Point(0, 0), Point(0, 1), Point(1, 0)}, {{0, 1, 2}}, {{0, 1, 1}, {1, 2, 2}, {2, 0, 3}}); }),
              ErrorCode::InvalidMesh);
    EXPECT_EQ(code([] { TriMesh::build({Point(0, 0), Point(1, 0), Point(0, 1)}, {{0, 1, 2}}, {{0, 1, 2}, {1, 2, 2}, {2, 0, 3}}); }),
              ErrorCode::InvalidMesh);
    EXPECT_EQ(code([] { TriMesh::build({Point(0, 0), Point(1, 0), Point(0, 1)}, {{0, 1, 2}}, {{0, 1, 1}, {1, 2, 2}}); }),
              ErrorCode::InvalidMesh);
}

TEST(Dofs, ClampedNodesAreEliminated)
{
    const auto m = generate_rect_mesh(2, 2, 1.0, 1.0, SideTagging::clamped_left_contact_bottom());
    const auto d = DofMap::build(m);
    int clamped = 0;
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
        if (d.dirichlet[i]) {
            ++clamped;
            EXPECT_NEAR(m.nodes[i].x(), 0.0, 1e-15);
            EXPECT_EQ(d.node_dofs[i][0], -1);
        }
    }
    EXPECT_EQ(clamped, 3);
    EXPECT_EQ(d.free_count, 2 * (static_cast<int>(m.nodes.size()) - 3));
}

TEST(Assembly, HandElementMatrix)
{
    // ∫ 2 ε(φ_a) : ε(φ_b) on the unit right triangle, shape gradients by hand.
    const auto mesh = reference_triangle();
    const std::array<Point, 3> grad{Point(-1, -1), Point(1, 0), Point(0, 1)};
    DenseMatrix oracle(6, 6);
    for (int a = 0; a < 6; ++a) {
        for (int b = 0; b < 6; ++b) {
            Tensor2 ea = Tensor2::Zero();
            Tensor2 eb = Tensor2::Zero();
            ea.row(a % 2) = grad[static_cast<std::size_t>(a / 2)].transpose();
            eb.row(b % 2) = grad[static_cast<std::size_t>(b / 2)].transpose();
            ea = 0.5 * (ea + ea.transpose()).eval();
            eb = 0.5 * (eb + eb.transpose()).eval();
            oracle(a, b) = 0.5 * 2.0 * (ea.array() * eb.array()).sum();
        }
    }
    const DenseMatrix K = DenseMatrix(assemble_elastic_matrix_full(mesh, IsotropicTensor{1.0, 0.0}));
    EXPECT_LT((K - oracle).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_NEAR(oracle(0, 0), 1.5, 1e-15);
}

TEST(Assembly, RigidMotionsHaveZeroEnergy)
{
    const auto m = jiggle(generate_rect_mesh(4, 3, 2.0, 1.0, SideTagging::clamped_left_contact_bottom()), 0.05, 1);
    const SparseMatrix K = assemble_elastic_matrix_full(m, IsotropicTensor{1.3, 0.7});
    const auto n = static_cast<Eigen::Index>(m.nodes.size());
    Vector tx = Vector::Zero(2 * n);
    Vector ty = Vector::Zero(2 * n);
    Vector rot = Vector::Zero(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        tx[2 * i] = 1.0;
        ty[2 * i + 1] = 1.0;
        rot[2 * i] = -m.nodes[static_cast<std::size_t>(i)].y();
        rot[2 * i + 1] = m.nodes[static_cast<std::size_t>(i)].x();
    }
    EXPECT_LT((K * tx).lpNorm<Eigen::Infinity>(), 1e-12);
    EXPECT_LT((K * ty).lpNorm<Eigen::Infinity>(), 1e-12);
    EXPECT_LT((K * rot).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Assembly, SymmetricAndCoercive)
{
    // Symmetry and Korn positivity.
    const auto m = jiggle(generate_rect_mesh(5, 4, 1.0, 1.0, SideTagging::clamped_left_contact_bottom()), 0.04, 2);
    const auto d = DofMap::build(m);
    for (const auto& tensor : {IsotropicTensor{1.0, 0.0}, IsotropicTensor{0.4, 2.0}}) {
        const auto op = assemble_elastic(m, d, tensor);
        EXPECT_LE(relative_asymmetry(op.matrix), 1e-12);
        EXPECT_GT(estimate_coercivity(op.matrix), 0.0);
        EXPECT_DOUBLE_EQ(op.coercivity, 2.0 * tensor.shear);
        EXPECT_DOUBLE_EQ(op.bound, 2.0 * tensor.shear + 2.0 * tensor.bulk);
        // declared constants against the dense generalized eigenproblem in the strain norm
        const DenseMatrix G = DenseMatrix(assemble_strain_gram(m, d));
        const DenseMatrix A = DenseMatrix(op.matrix);
        EXPECT_GE(hvi::testing::dense_min_eigenvalue(A, G), op.coercivity * (1.0 - 1e-10));
        EXPECT_LE(hvi::testing::dense_max_eigenvalue(A, G), op.bound * (1.0 + 1e-10));
    }
    EXPECT_THROW(assemble_elastic(m, d, IsotropicTensor{0.0, 1.0}), Error);
}

TEST(Load, Examples)
{
    const auto m = generate_rect_mesh(3, 2, 1.0, 1.0, SideTagging::clamped_left_contact_bottom());
    const auto d = DofMap::build(m);
    EXPECT_EQ(assemble_load(m, d, {}, {}, 0.0).norm(), 0.0);
    const VectorField zero = [](double, double, double) { return Point::Zero(); };
    EXPECT_EQ(assemble_load(m, d, zero, zero, 0.3).norm(), 0.0);

    const auto free = all_free(m);
    const Vector F = assemble_load(m, free, [](double, double, double) { return Point(2.0, -3.0); }, {}, 0.0);
    double sx = 0.0;
    double sy = 0.0;
    for (Eigen::Index i = 0; i < F.size(); i += 2) {
        sx += F[i];
        sy += F[i + 1];
    }
    EXPECT_NEAR(sx, 2.0, 1e-12);
    EXPECT_NEAR(sy, -3.0, 1e-12);
}

TEST(Load, LinearBodyForceMatchesExactIntegration)
{
    // ∫ f·φ_i with f = Σ f_j φ_j is area/12 Σ_j (1 + δ_ij) f_j on each triangle.
    const auto mesh = reference_triangle();
    const auto d = all_free(mesh);
    const auto f = [](double x, double y, double t) { return Point(1.0 + 2.0 * x - y, 3.0 * y + t); };
    const Vector F = assemble_load(mesh, d, f, {}, 0.5);
    for (int i = 0; i < 3; ++i) {
        Point oracle = Point::Zero();
        for (int j = 0; j < 3; ++j) {
            const Point& p = mesh.nodes[static_cast<std::size_t>(j)];
            oracle += 0.5 / 12.0 * (i == j ? 2.0 : 1.0) * f(p.x(), p.y(), 0.5);
        }
        EXPECT_NEAR(F[2 * i], oracle.x(), 1e-12);
        EXPECT_NEAR(F[2 * i + 1], oracle.y(), 1e-12);
    }
}

TEST(Load, TractionOnlyOnGammaTwo)
{
    const auto m = generate_rect_mesh(4, 4, 1.0, 1.0, SideTagging::clamped_left_contact_bottom());
    const auto d = all_free(m);
    const Vector F = assemble_load(m, d, {}, [](double, double, double) { return Point(0.0, 1.0); }, 0.0);
    // Γ₂ is the top and right sides, total length 2
    EXPECT_NEAR(F.sum(), 2.0, 1e-12);
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
        const auto& p = m.nodes[i];
        if (p.x() < 1.0 - 1e-12 && p.y() < 1.0 - 1e-12) {
            EXPECT_EQ(F[static_cast<Eigen::Index>(2 * i + 1)], 0.0);
        }
    }
}

TEST(Trace, NormalTangentialAndWeights)
{
    const auto m = generate_rect_mesh(4, 2, 2.0, 1.0, SideTagging::clamped_left_contact_bottom());
    const auto d = DofMap::build(m);
    const auto tr = trace_normal(m, d);
    EXPECT_NEAR(tr.weights.sum(), m.boundary_length(Region::Gamma3), 1e-12);
    Vector normal = Vector::Zero(d.free_count);
    Vector tangential = Vector::Zero(d.free_count);
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
        if (!d.dirichlet[i]) {
            normal[d.node_dofs[i][1]] = -1.0;
            tangential[d.node_dofs[i][0]] = 1.0;
        }
    }
    const Vector Mn = tr.M * normal;
    for (Eigen::Index r = 0; r < Mn.size(); ++r) {
        const bool clamped = d.dirichlet[static_cast<std::size_t>(tr.nodes[static_cast<std::size_t>(r)])];
        EXPECT_NEAR(Mn[r], clamped ? 0.0 : 1.0, 1e-15);
    }
    EXPECT_LT((tr.M * tangential).norm(), 1e-15);

    SideTagging no_contact;
    no_contact.set(Side::Left, Region::Gamma1)
        .set(Side::Bottom, Region::Gamma2)
        .set(Side::Top, Region::Gamma2)
        .set(Side::Right, Region::Gamma2);
    const auto m2 = generate_rect_mesh(2, 2, 1.0, 1.0, no_contact);
    try {
        trace_normal(m2, DofMap::build(m2));
        FAIL() << "expected EmptyContactBoundary";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyContactBoundary);
    }
}

TEST(Trace, NormIsBoundedUnderRefinement)
{
    // the discrete trace constant settles as h -> 0.
    std::vector<double> norms;
    for (int n : {2, 4, 8, 16}) {
        const auto m = generate_rect_mesh(n, n, 1.0, 1.0, SideTagging::clamped_left_contact_bottom());
        const auto d = DofMap::build(m);
        const auto tr = trace_normal(m, d);
        norms.push_back(measure_coupling_norm(tr.M, SpaceNorms(assemble_strain_gram(m, d), tr.weights)));
    }
    for (double v : norms) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.5 * norms.front());
    }
    EXPECT_LT(std::abs(norms[3] - norms[2]), std::abs(norms[1] - norms[0]) + 1e-12);
}

TEST(Interpolant, ReproducesAffineFieldsAndRejectsClampedValues)
{
    const auto m = jiggle(generate_rect_mesh(3, 3, 1.0, 1.0, SideTagging::clamped_left_contact_bottom()), 0.05, 3);
    const auto d = DofMap::build(m);
    const Vector pi = interpolant_P1(m, d, [](double x, double) { return Point(2.0 * x, x); });
    const Vector z = interpolant_P1(m, d, [](double, double) { return Point::Zero(); });
    EXPECT_EQ(z.norm(), 0.0);
    Tensor2 expected;
    expected << 2.0, 0.5, 0.5, 0.0;
    for (int e = 0; e < static_cast<int>(m.triangles.size()); ++e) {
        EXPECT_LT((element_strain(m, d, pi, e) - expected).norm(), 1e-12);
    }
    try {
        interpolant_P1(m, d, [](double, double y) { return Point(y, 0.0); });
        FAIL() << "expected DirichletMismatch";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DirichletMismatch);
    }
}

TEST(Interpolant, FirstOrderStrainError)
{
    // u = (x², 0): ε(u) = diag(2x, 0)
    std::vector<double> errors;
    for (int n : {4, 8, 16, 32}) {
        const auto m = generate_rect_mesh(n, n, 1.0, 1.0, SideTagging::clamped_left_contact_bottom());
        const auto d = DofMap::build(m);
        const Vector pi = interpolant_P1(m, d, [](double x, double) { return Point(x * x, 0.0); });
        errors.push_back(interpolation_error(m, d, pi, [](double x, double) {
            Tensor2 t = Tensor2::Zero();
            t(0, 0) = 2.0 * x;
            return t;
        }));
    }
    for (std::size_t i = 1; i < errors.size(); ++i) {
        EXPECT_NEAR(errors[i - 1] / errors[i], 2.0, 0.05);
    }
}

TEST(PatchTest, LinearDisplacementIsReproduced)
{
    // u = (a x, b x) vanishes on the clamped side; tractions σ n on the other sides.
    const double a = 0.3;
    const double b = -0.2;
    const IsotropicTensor C{0.8, 1.7};
    Tensor2 eps;
    eps << a, 0.5 * b, 0.5 * b, 0.0;
    const Tensor2 sigma = C.apply(eps);
    SideTagging tags;
    tags.set(Side::Left, Region::Gamma1)
        .set(Side::Bottom, Region::Gamma2)
        .set(Side::Top, Region::Gamma2)
        .set(Side::Right, Region::Gamma2);
    const double lx = 2.0;
    const double ly = 1.0;
    const auto m = jiggle(generate_rect_mesh(6, 4, lx, ly, tags), 0.06, 4);
    const auto d = DofMap::build(m);
    const VectorField traction = [&](double x, double y, double) {
        Point n = Point::Zero();
        if (std::abs(x - lx) < 1e-12) {
            n = Point(1, 0);
        } else if (std::abs(y - ly) < 1e-12) {
            n = Point(0, 1);
        } else if (std::abs(y) < 1e-12) {
            n = Point(0, -1);
        }
        return Point(sigma * n);
    };
    const auto K = assemble_elastic(m, d, C);
    const Vector F = assemble_load(m, d, {}, traction, 0.0);
    const Vector u = LinearSolver(K.matrix).solve(F);
    const Vector exact = interpolant_P1(m, d, [&](double x, double) { return Point(a * x, b * x); });
    EXPECT_LT((u - exact).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(MeshIo, RoundTripAndErrors)
{
    const auto m = jiggle(generate_rect_mesh(3, 2, 1.5, 1.0, SideTagging::clamped_left_contact_bottom()), 0.05, 5);
    std::stringstream buf;
    write_mesh(buf, m);
    const auto back = read_mesh(buf);
    ASSERT_EQ(back.nodes.size(), m.nodes.size());
    ASSERT_EQ(back.triangles.size(), m.triangles.size());
    ASSERT_EQ(back.boundary_edges.size(), m.boundary_edges.size());
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
        EXPECT_EQ(back.nodes[i], m.nodes[i]);
    }
    EXPECT_EQ(back.triangles, m.triangles);
    EXPECT_DOUBLE_EQ(back.h, m.h);

    std::istringstream bad("nodes 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 x\n");
    try {
        read_mesh(bad);
        FAIL() << "expected ParseError";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
        EXPECT_NE(std::string(e.what()).find("line 6"), std::string::npos) << e.what();
    }
    try {
        read_mesh_file("/nonexistent/mesh.txt");
        FAIL() << "expected IoError";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IoError);
    }
}

TEST(Vtk, LayoutAndData)
{
    const auto m = generate_rect_mesh(1, 1, 1.0, 1.0, SideTagging::clamped_left_contact_bottom());
    const auto d = DofMap::build(m);
    Vector u = Vector::Zero(d.free_count);
    u[0] = 0.25;
    std::vector<Tensor2> s(m.triangles.size(), Tensor2::Identity());
    std::ostringstream out;
    write_vtk(out, m, d, u, s);
    const std::string text = out.str();
    for (const char* key : {"# vtk DataFile Version 3.0", "DATASET UNSTRUCTURED_GRID", "POINTS 5 double", "CELLS 4 16",
                            "CELL_TYPES 4", "POINT_DATA 5", "VECTORS displacement double", "CELL_DATA 4",
                            "TENSORS stress double", "0.25 0 0"}) {
        EXPECT_NE(text.find(key), std::string::npos) << key;
    }
    std::ostringstream sink;
    EXPECT_THROW(write_vtk(sink, m, d, u, std::vector<Tensor2>(2)), Error);
}
