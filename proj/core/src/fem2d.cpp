#include "hvi/fem2d.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace hvi::fem {

namespace {

double signed_area(const Point& a, const Point& b, const Point& c)
{
    return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

struct EdgeInfo {
    int count = 0;
    int third = -1;
};

std::pair<int, int> edge_key(int a, int b)
{
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

// Barycentric gradients of triangle t: rows are ∇φ_i.
Eigen::Matrix<double, 3, 2> basis_gradients(const TriMesh& mesh, int t)
{
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const Point& p0 = mesh.nodes[static_cast<std::size_t>(tri[0])];
    const Point& p1 = mesh.nodes[static_cast<std::size_t>(tri[1])];
    const Point& p2 = mesh.nodes[static_cast<std::size_t>(tri[2])];
    const double two_a = 2.0 * signed_area(p0, p1, p2);
    Eigen::Matrix<double, 3, 2> g;
    g << (p1.y() - p2.y()) / two_a, (p2.x() - p1.x()) / two_a, (p2.y() - p0.y()) / two_a,
        (p0.x() - p2.x()) / two_a, (p0.y() - p1.y()) / two_a, (p1.x() - p0.x()) / two_a;
    return g;
}

Eigen::Matrix<double, 6, 6> element_matrix(const TriMesh& mesh, int t, const IsotropicTensor& tensor)
{
    const auto g = basis_gradients(mesh, t);
    Eigen::Matrix<double, 3, 6> B = Eigen::Matrix<double, 3, 6>::Zero();
    for (int i = 0; i < 3; ++i) {
        B(0, 2 * i) = g(i, 0);
        B(1, 2 * i + 1) = g(i, 1);
        B(2, 2 * i) = g(i, 1);
        B(2, 2 * i + 1) = g(i, 0);
    }
    const double mu = tensor.shear;
    const double la = tensor.bulk;
    Eigen::Matrix3d D;
    D << 2.0 * mu + la, la, 0.0, la, 2.0 * mu + la, 0.0, 0.0, 0.0, mu;
    return mesh.area(t) * B.transpose() * D * B;
}

template <class DofOf>
SparseMatrix assemble_with(const TriMesh& mesh, const IsotropicTensor& tensor, Eigen::Index n, const DofOf& dof_of)
{
    std::vector<Triplet> trips;
    trips.reserve(mesh.triangles.size() * 36);
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        const auto Ke = element_matrix(mesh, t, tensor);
        const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
        int local[6];
        for (int i = 0; i < 3; ++i) {
            local[2 * i] = dof_of(tri[static_cast<std::size_t>(i)], 0);
            local[2 * i + 1] = dof_of(tri[static_cast<std::size_t>(i)], 1);
        }
        for (int r = 0; r < 6; ++r) {
            if (local[r] < 0) {
                continue;
            }
            for (int c = 0; c < 6; ++c) {
                if (local[c] >= 0 && Ke(r, c) != 0.0) {
                    trips.emplace_back(local[r], local[c], Ke(r, c));
                }
            }
        }
    }
    SparseMatrix K(n, n);
    K.setFromTriplets(trips.begin(), trips.end());
    // exact symmetry regardless of summation order
    SparseMatrix Kt = K.transpose();
    K = 0.5 * (K + Kt);
    K.makeCompressed();
    return K;
}

} // namespace

// ------------------------------------------------------------------ TriMesh

TriMesh TriMesh::build(std::vector<Point> nodes, std::vector<std::array<int, 3>> triangles,
                       const std::vector<TaggedEdge>& edges)
{
    TriMesh mesh;
    mesh.nodes = std::move(nodes);
    mesh.triangles = std::move(triangles);
    const int nn = static_cast<int>(mesh.nodes.size());
    if (nn < 3 || mesh.triangles.empty()) {
        throw Error(ErrorCode::InvalidMesh, "mesh needs at least one triangle");
    }

    std::map<std::pair<int, int>, EdgeInfo> edge_map;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        for (int v : tri) {
            if (v < 0 || v >= nn) {
                throw Error(ErrorCode::InvalidMesh, "triangle " + std::to_string(t) + " has an invalid node index");
            }
        }
        if (!(mesh.area(static_cast<int>(t)) > 0.0)) {
            throw Error(ErrorCode::InvalidMesh,
                        "triangle " + std::to_string(t) + " is not counterclockwise (non-positive area)");
        }
        for (int i = 0; i < 3; ++i) {
            auto& info = edge_map[edge_key(tri[static_cast<std::size_t>(i)], tri[static_cast<std::size_t>((i + 1) % 3)])];
            info.count += 1;
            info.third = tri[static_cast<std::size_t>((i + 2) % 3)];
        }
    }

    std::set<std::pair<int, int>> tagged;
    bool has_gamma1 = false;
    for (const auto& e : edges) {
        if (e.tag < 1 || e.tag > 3) {
            throw Error(ErrorCode::InvalidMesh, "boundary tag " + std::to_string(e.tag) + " not in {1,2,3}");
        }
        const auto key = edge_key(e.a, e.b);
        const auto it = edge_map.find(key);
        if (it == edge_map.end() || it->second.count != 1) {
            throw Error(ErrorCode::InvalidMesh,
                        "edge " + std::to_string(e.a) + "-" + std::to_string(e.b) + " is not a boundary edge");
        }
        if (!tagged.insert(key).second) {
            throw Error(ErrorCode::InvalidMesh,
                        "edge " + std::to_string(e.a) + "-" + std::to_string(e.b) + " tagged twice");
        }
        BoundaryEdge be;
        be.a = e.a;
        be.b = e.b;
        be.region = static_cast<Region>(e.tag);
        const Point& pa = mesh.nodes[static_cast<std::size_t>(e.a)];
        const Point& pb = mesh.nodes[static_cast<std::size_t>(e.b)];
        const Point d = pb - pa;
        be.length = d.norm();
        Point n(d.y(), -d.x());
        n /= be.length;
        if (n.dot(mesh.nodes[static_cast<std::size_t>(it->second.third)] - pa) > 0.0) {
            n = -n;
            std::swap(be.a, be.b);
        }
        be.normal = n;
        has_gamma1 = has_gamma1 || be.region == Region::Gamma1;
        mesh.boundary_edges.push_back(be);
    }
    for (const auto& [key, info] : edge_map) {
        if (info.count > 2) {
            throw Error(ErrorCode::InvalidMesh, "edge shared by more than two triangles");
        }
        if (info.count == 1 && tagged.find(key) == tagged.end()) {
            throw Error(ErrorCode::InvalidMesh, "boundary edge " + std::to_string(key.first) + "-" +
                                                    std::to_string(key.second) + " has no region tag");
        }
    }
    if (!has_gamma1) {
        throw Error(ErrorCode::InvalidMesh, "the clamped part of the boundary is empty");
    }
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        mesh.h = std::max(mesh.h, mesh.diameter(t));
    }
    return mesh;
}

double TriMesh::area(int t) const
{
    const auto& tri = triangles[static_cast<std::size_t>(t)];
    return signed_area(nodes[static_cast<std::size_t>(tri[0])], nodes[static_cast<std::size_t>(tri[1])],
                       nodes[static_cast<std::size_t>(tri[2])]);
}

double TriMesh::total_area() const
{
    double a = 0.0;
    for (int t = 0; t < static_cast<int>(triangles.size()); ++t) {
        a += area(t);
    }
    return a;
}

double TriMesh::diameter(int t) const
{
    const auto& tri = triangles[static_cast<std::size_t>(t)];
    double d = 0.0;
    for (int i = 0; i < 3; ++i) {
        d = std::max(d, (nodes[static_cast<std::size_t>(tri[static_cast<std::size_t>(i)])] -
                         nodes[static_cast<std::size_t>(tri[static_cast<std::size_t>((i + 1) % 3)])])
                            .norm());
    }
    return d;
}

double TriMesh::boundary_length(Region r) const
{
    double len = 0.0;
    for (const auto& e : boundary_edges) {
        if (e.region == r) {
            len += e.length;
        }
    }
    return len;
}

// ------------------------------------------------------------- rect meshes

SideTagging& SideTagging::set(Side side, Region region)
{
    regions[static_cast<std::size_t>(side)] = region;
    return *this;
}

SideTagging SideTagging::clamped_left_contact_bottom()
{
    SideTagging t;
    t.set(Side::Left, Region::Gamma1)
        .set(Side::Bottom, Region::Gamma3)
        .set(Side::Top, Region::Gamma2)
        .set(Side::Right, Region::Gamma2);
    return t;
}

TriMesh generate_rect_mesh(int nx, int ny, double lx, double ly, const SideTagging& tagging)
{
    if (nx < 1 || ny < 1 || !(lx > 0.0) || !(ly > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "rect mesh needs nx, ny >= 1 and positive side lengths");
    }
    for (int s = 0; s < 4; ++s) {
        if (!tagging.regions[static_cast<std::size_t>(s)]) {
            static const char* names[] = {"bottom", "right", "top", "left"};
            throw Error(ErrorCode::InvalidTagging, std::string("side '") + names[s] + "' has no region");
        }
    }
    const double dx = lx / nx;
    const double dy = ly / ny;
    std::vector<Point> nodes;
    nodes.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1) + nx * ny));
    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
            nodes.emplace_back(i == nx ? lx : i * dx, j == ny ? ly : j * dy);
        }
    }
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            nodes.emplace_back((i + 0.5) * dx, (j + 0.5) * dy);
        }
    }
    auto corner = [&](int i, int j) { return j * (nx + 1) + i; };
    auto center = [&](int i, int j) { return (nx + 1) * (ny + 1) + j * nx + i; };

    std::vector<std::array<int, 3>> tris;
    tris.reserve(static_cast<std::size_t>(4 * nx * ny));
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int c = center(i, j);
            const int p00 = corner(i, j);
            const int p10 = corner(i + 1, j);
            const int p11 = corner(i + 1, j + 1);
            const int p01 = corner(i, j + 1);
            tris.push_back({p00, p10, c});
            tris.push_back({p10, p11, c});
            tris.push_back({p11, p01, c});
            tris.push_back({p01, p00, c});
        }
    }

    auto tag = [&](Side s) { return static_cast<int>(*tagging.at(s)); };
    std::vector<TriMesh::TaggedEdge> edges;
    for (int i = 0; i < nx; ++i) {
        edges.push_back({corner(i, 0), corner(i + 1, 0), tag(Side::Bottom)});
    }
    for (int j = 0; j < ny; ++j) {
        edges.push_back({corner(nx, j), corner(nx, j + 1), tag(Side::Right)});
    }
    for (int i = nx; i > 0; --i) {
        edges.push_back({corner(i, ny), corner(i - 1, ny), tag(Side::Top)});
    }
    for (int j = ny; j > 0; --j) {
        edges.push_back({corner(0, j), corner(0, j - 1), tag(Side::Left)});
    }
    return TriMesh::build(std::move(nodes), std::move(tris), edges);
}

// ------------------------------------------------------------------ DofMap

DofMap DofMap::build(const TriMesh& mesh)
{
    DofMap d;
    const std::size_t nn = mesh.nodes.size();
    d.dirichlet.assign(nn, false);
    for (const auto& e : mesh.boundary_edges) {
        if (e.region == Region::Gamma1) {
            d.dirichlet[static_cast<std::size_t>(e.a)] = true;
            d.dirichlet[static_cast<std::size_t>(e.b)] = true;
        }
    }
    d.node_dofs.assign(nn, {-1, -1});
    int next = 0;
    for (std::size_t i = 0; i < nn; ++i) {
        if (!d.dirichlet[i]) {
            d.node_dofs[i] = {next, next + 1};
            next += 2;
        }
    }
    d.free_count = next;
    return d;
}

Point DofMap::value(const Vector& u, int node) const
{
    const auto& nd = node_dofs[static_cast<std::size_t>(node)];
    if (nd[0] < 0) {
        return Point::Zero();
    }
    return Point(u[nd[0]], u[nd[1]]);
}

// ---------------------------------------------------------------- assembly

Tensor2 IsotropicTensor::apply(const Tensor2& eps) const
{
    return 2.0 * shear * eps + bulk * eps.trace() * Tensor2::Identity();
}

void IsotropicTensor::check() const
{
    if (!(shear > 0.0) || !(bulk >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "isotropic tensor needs shear > 0 and bulk >= 0");
    }
}

SparseMatrix assemble_elastic_matrix(const TriMesh& mesh, const DofMap& dofs, const IsotropicTensor& tensor)
{
    return assemble_with(mesh, tensor, dofs.free_count, [&](int node, int comp) {
        return dofs.node_dofs[static_cast<std::size_t>(node)][static_cast<std::size_t>(comp)];
    });
}

SparseMatrix assemble_elastic_matrix_full(const TriMesh& mesh, const IsotropicTensor& tensor)
{
    return assemble_with(mesh, tensor, static_cast<Eigen::Index>(2 * mesh.nodes.size()),
                         [](int node, int comp) { return 2 * node + comp; });
}

SparseMatrix assemble_strain_gram(const TriMesh& mesh, const DofMap& dofs)
{
    return assemble_elastic_matrix(mesh, dofs, IsotropicTensor{0.5, 0.0});
}

CoerciveOperator assemble_elastic(const TriMesh& mesh, const DofMap& dofs, const IsotropicTensor& tensor)
{
    tensor.check();
    return CoerciveOperator::declared(assemble_elastic_matrix(mesh, dofs, tensor), tensor.ellipticity(),
                                      tensor.norm());
}

Vector assemble_load(const TriMesh& mesh, const DofMap& dofs, const VectorField& f0, const VectorField& fN, double t)
{
    Vector F = Vector::Zero(dofs.free_count);
    auto add = [&](int node, const Point& v) {
        const auto& nd = dofs.node_dofs[static_cast<std::size_t>(node)];
        if (nd[0] >= 0) {
            F[nd[0]] += v.x();
            F[nd[1]] += v.y();
        }
    };
    if (f0) {
        for (int e = 0; e < static_cast<int>(mesh.triangles.size()); ++e) {
            const auto& tri = mesh.triangles[static_cast<std::size_t>(e)];
            const double w = mesh.area(e) / 3.0;
            for (int i = 0; i < 3; ++i) {
                const int a = tri[static_cast<std::size_t>(i)];
                const int b = tri[static_cast<std::size_t>((i + 1) % 3)];
                const Point m = 0.5 * (mesh.nodes[static_cast<std::size_t>(a)] + mesh.nodes[static_cast<std::size_t>(b)]);
                const Point f = w * 0.5 * f0(m.x(), m.y(), t);
                add(a, f);
                add(b, f);
            }
        }
    }
    if (fN) {
        const double g = 0.5 / std::sqrt(3.0);
        for (const auto& edge : mesh.boundary_edges) {
            if (edge.region != Region::Gamma2) {
                continue;
            }
            const Point& pa = mesh.nodes[static_cast<std::size_t>(edge.a)];
            const Point& pb = mesh.nodes[static_cast<std::size_t>(edge.b)];
            for (double xi : {0.5 - g, 0.5 + g}) {
                const Point q = (1.0 - xi) * pa + xi * pb;
                const Point f = 0.5 * edge.length * fN(q.x(), q.y(), t);
                add(edge.a, (1.0 - xi) * f);
                add(edge.b, xi * f);
            }
        }
    }
    return F;
}

ContactTrace trace_normal(const TriMesh& mesh, const DofMap& dofs)
{
    std::map<int, std::pair<double, Point>> acc;
    for (const auto& e : mesh.boundary_edges) {
        if (e.region != Region::Gamma3) {
            continue;
        }
        for (int v : {e.a, e.b}) {
            auto& [w, n] = acc.try_emplace(v, 0.0, Point::Zero()).first->second;
            w += 0.5 * e.length;
            n += e.length * e.normal;
        }
    }
    if (acc.empty()) {
        throw Error(ErrorCode::EmptyContactBoundary, "no contact edges in the mesh");
    }
    ContactTrace tr;
    tr.weights.resize(static_cast<Eigen::Index>(acc.size()));
    std::vector<Triplet> trips;
    Eigen::Index row = 0;
    for (const auto& [node, wn] : acc) {
        const Point n = wn.second.normalized();
        tr.nodes.push_back(node);
        tr.normals.push_back(n);
        tr.weights[row] = wn.first;
        const auto& nd = dofs.node_dofs[static_cast<std::size_t>(node)];
        if (nd[0] >= 0) {
            trips.emplace_back(row, nd[0], n.x());
            trips.emplace_back(row, nd[1], n.y());
        }
        ++row;
    }
    tr.M.resize(row, dofs.free_count);
    tr.M.setFromTriplets(trips.begin(), trips.end());
    tr.M.prune(0.0);
    tr.M.makeCompressed();
    return tr;
}

Vector interpolant_P1(const TriMesh& mesh, const DofMap& dofs, const std::function<Point(double, double)>& u)
{
    Vector out = Vector::Zero(dofs.free_count);
    for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
        const Point v = u(mesh.nodes[i].x(), mesh.nodes[i].y());
        if (dofs.dirichlet[i]) {
            if (v.cwiseAbs().maxCoeff() > 1e-10) {
                throw Error(ErrorCode::DirichletMismatch,
                            "field is nonzero at clamped node " + std::to_string(i));
            }
            continue;
        }
        out[dofs.node_dofs[i][0]] = v.x();
        out[dofs.node_dofs[i][1]] = v.y();
    }
    return out;
}

Tensor2 element_strain(const TriMesh& mesh, const DofMap& dofs, const Vector& u, int e)
{
    const auto g = basis_gradients(mesh, e);
    const auto& tri = mesh.triangles[static_cast<std::size_t>(e)];
    Tensor2 grad = Tensor2::Zero();
    for (int i = 0; i < 3; ++i) {
        const Point ui = dofs.value(u, tri[static_cast<std::size_t>(i)]);
        grad += ui * g.row(i);
    }
    return 0.5 * (grad + grad.transpose());
}

} // namespace hvi::fem
