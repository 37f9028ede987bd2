#include "hvi/fem2d.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace hvi::fem {

namespace {

class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    // Next non-empty, non-comment line; throws ParseError at end of input.
    std::istringstream next(const std::string& expecting)
    {
        std::string line;
        while (std::getline(in_, line)) {
            ++number_;
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos || line[first] == '#') {
                continue;
            }
            return std::istringstream(line);
        }
        throw error("unexpected end of file, expected " + expecting);
    }

    Error error(const std::string& what) const
    {
        return Error(ErrorCode::ParseError, "line " + std::to_string(number_) + ": " + what);
    }

    int number() const { return number_; }

private:
    std::istream& in_;
    int number_ = 0;
};

int read_header(LineReader& r, const std::string& keyword)
{
    auto ls = r.next("'" + keyword + " <count>'");
    std::string word;
    long count = -1;
    if (!(ls >> word >> count) || word != keyword || count < 0) {
        throw r.error("expected '" + keyword + " <count>'");
    }
    return static_cast<int>(count);
}

template <class... T>
void read_fields(LineReader& r, const std::string& what, T&... fields)
{
    auto ls = r.next(what);
    if (!((ls >> fields) && ...)) {
        throw r.error("expected " + what);
    }
    std::string extra;
    if (ls >> extra) {
        throw r.error("unexpected trailing token '" + extra + "'");
    }
}

} // namespace

TriMesh read_mesh(std::istream& in)
{
    LineReader r(in);
    const int nn = read_header(r, "nodes");
    std::vector<Point> nodes(static_cast<std::size_t>(nn));
    for (auto& p : nodes) {
        double x = 0.0;
        double y = 0.0;
        read_fields(r, "'x y'", x, y);
        p = Point(x, y);
    }
    const int nt = read_header(r, "triangles");
    std::vector<std::array<int, 3>> tris(static_cast<std::size_t>(nt));
    for (auto& t : tris) {
        read_fields(r, "'i j k'", t[0], t[1], t[2]);
        for (int v : t) {
            if (v < 0 || v >= nn) {
                throw r.error("node index " + std::to_string(v) + " out of range");
            }
        }
    }
    const int ne = read_header(r, "bedges");
    std::vector<TriMesh::TaggedEdge> edges(static_cast<std::size_t>(ne));
    for (auto& e : edges) {
        read_fields(r, "'i j tag'", e.a, e.b, e.tag);
        if (e.a < 0 || e.a >= nn || e.b < 0 || e.b >= nn) {
            throw r.error("node index out of range");
        }
        if (e.tag < 1 || e.tag > 3) {
            throw r.error("boundary tag must be 1, 2 or 3");
        }
    }
    return TriMesh::build(std::move(nodes), std::move(tris), edges);
}

TriMesh read_mesh_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open mesh file " + path);
    }
    try {
        return read_mesh(in);
    } catch (const Error& e) {
        throw e.with_context(path);
    }
}

void write_mesh(std::ostream& out, const TriMesh& mesh)
{
    char buf[96];
    out << "nodes " << mesh.nodes.size() << '\n';
    for (const auto& p : mesh.nodes) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", p.x(), p.y());
        out << buf;
    }
    out << "triangles " << mesh.triangles.size() << '\n';
    for (const auto& t : mesh.triangles) {
        out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    }
    out << "bedges " << mesh.boundary_edges.size() << '\n';
    for (const auto& e : mesh.boundary_edges) {
        out << e.a << ' ' << e.b << ' ' << static_cast<int>(e.region) << '\n';
    }
}

void write_vtk(std::ostream& out, const TriMesh& mesh, const DofMap& dofs, const Vector& u,
               const std::vector<Tensor2>& stress, const std::string& title)
{
    if (!stress.empty() && stress.size() != mesh.triangles.size()) {
        throw Error(ErrorCode::DimensionMismatch, "one stress tensor per triangle expected");
    }
    char buf[160];
    const auto nn = mesh.nodes.size();
    const auto nt = mesh.triangles.size();
    out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << nn << " double\n";
    for (const auto& p : mesh.nodes) {
        std::snprintf(buf, sizeof buf, "%.12g %.12g 0\n", p.x(), p.y());
        out << buf;
    }
    out << "CELLS " << nt << ' ' << 4 * nt << '\n';
    for (const auto& t : mesh.triangles) {
        out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    }
    out << "CELL_TYPES " << nt << '\n';
    for (std::size_t i = 0; i < nt; ++i) {
        out << "5\n";
    }
    out << "POINT_DATA " << nn << "\nVECTORS displacement double\n";
    for (std::size_t i = 0; i < nn; ++i) {
        const Point v = dofs.value(u, static_cast<int>(i));
        std::snprintf(buf, sizeof buf, "%.12g %.12g 0\n", v.x(), v.y());
        out << buf;
    }
    out << "CELL_DATA " << nt << "\nTENSORS stress double\n";
    for (std::size_t i = 0; i < nt; ++i) {
        const Tensor2 s = stress.empty() ? Tensor2::Zero() : stress[i];
        std::snprintf(buf, sizeof buf, "%.12g %.12g 0\n%.12g %.12g 0\n0 0 0\n", s(0, 0), s(0, 1), s(1, 0), s(1, 1));
        out << buf;
    }
}

} // namespace hvi::fem
