#include "hvi/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace hvi {

double Polynomial::operator()(double x, double y, double t) const
{
    double s = 0.0;
    for (const auto& term : terms) {
        s += term.coef * std::pow(x, term.px) * std::pow(y, term.py) * std::pow(t, term.pt);
    }
    return s;
}

fem::VectorField PolynomialField::as_field() const
{
    if (empty()) {
        return {};
    }
    return [px = x, py = y](double xx, double yy, double t) { return fem::Point(px(xx, yy, t), py(xx, yy, t)); };
}

namespace {

Error parse_error(const YAML::Mark& mark, const std::string& what)
{
    if (mark.is_null()) {
        return Error(ErrorCode::ParseError, what);
    }
    return Error(ErrorCode::ParseError, "line " + std::to_string(mark.line + 1) + ": " + what);
}

void allow_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> keys)
{
    if (!node.IsMap()) {
        throw parse_error(node.Mark(), where + " must be a mapping");
    }
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key)) {
            throw parse_error(kv.first.Mark(), "unknown key '" + key + "' in " + where);
        }
    }
}

template <class T>
T scalar(const YAML::Node& node, const std::string& what)
{
    if (!node.IsScalar()) {
        throw parse_error(node.Mark(), what + " must be a scalar");
    }
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        throw parse_error(node.Mark(), "invalid value '" + node.Scalar() + "' for " + what);
    }
}

template <class T>
void read_opt(const YAML::Node& parent, const char* key, T& out, const std::string& where)
{
    if (const auto n = parent[key]) {
        out = scalar<T>(n, where + "." + key);
    }
}

double positive(const YAML::Node& parent, const char* key, double fallback, const std::string& where)
{
    double v = fallback;
    read_opt(parent, key, v, where);
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw parse_error(parent[key] ? parent[key].Mark() : parent.Mark(), where + "." + key + " must be positive");
    }
    return v;
}

fem::Region region_of(const YAML::Node& node)
{
    const auto s = scalar<std::string>(node, "side region");
    if (s == "clamped" || s == "gamma1" || s == "1") {
        return fem::Region::Gamma1;
    }
    if (s == "traction" || s == "gamma2" || s == "2") {
        return fem::Region::Gamma2;
    }
    if (s == "contact" || s == "gamma3" || s == "3") {
        return fem::Region::Gamma3;
    }
    throw parse_error(node.Mark(), "unknown region '" + s + "' (clamped, traction or contact)");
}

fem::IsotropicTensor tensor_of(const YAML::Node& node, const std::string& where)
{
    allow_keys(node, where, {"shear", "bulk"});
    fem::IsotropicTensor t;
    read_opt(node, "shear", t.shear, where);
    read_opt(node, "bulk", t.bulk, where);
    return t;
}

Polynomial polynomial_of(const YAML::Node& node, const std::string& where)
{
    Polynomial p;
    if (!node.IsSequence()) {
        throw parse_error(node.Mark(), where + " must be a list of [coef, px, py, pt] rows");
    }
    for (const auto& row : node) {
        if (!row.IsSequence() || row.size() != 4) {
            throw parse_error(row.Mark(), where + " rows must be [coef, px, py, pt]");
        }
        Polynomial::Term t;
        t.coef = scalar<double>(row[0], where + " coefficient");
        t.px = scalar<int>(row[1], where + " x power");
        t.py = scalar<int>(row[2], where + " y power");
        t.pt = scalar<int>(row[3], where + " t power");
        if (t.px < 0 || t.py < 0 || t.pt < 0) {
            throw parse_error(row.Mark(), where + " powers must be non-negative");
        }
        p.terms.push_back(t);
    }
    return p;
}

PolynomialField field_of(const YAML::Node& node, const std::string& where)
{
    allow_keys(node, where, {"x", "y"});
    PolynomialField f;
    if (node["x"]) {
        f.x = polynomial_of(node["x"], where + ".x");
    }
    if (node["y"]) {
        f.y = polynomial_of(node["y"], where + ".y");
    }
    return f;
}

void read_geometry(const YAML::Node& g, contact::MeshSpec& mesh, const std::string& base_dir)
{
    allow_keys(g, "geometry", {"lx", "ly", "nx", "ny", "level", "sides", "mesh_file"});
    mesh.lx = positive(g, "lx", mesh.lx, "geometry");
    mesh.ly = positive(g, "ly", mesh.ly, "geometry");
    read_opt(g, "nx", mesh.nx, "geometry");
    read_opt(g, "ny", mesh.ny, "geometry");
    if (mesh.nx < 1 || mesh.ny < 1) {
        throw parse_error(g.Mark(), "geometry.nx and geometry.ny must be at least 1");
    }
    if (const auto s = g["sides"]) {
        allow_keys(s, "geometry.sides", {"bottom", "right", "top", "left"});
        fem::SideTagging tagging;
        const std::pair<const char*, fem::Side> names[] = {
            {"bottom", fem::Side::Bottom}, {"right", fem::Side::Right}, {"top", fem::Side::Top}, {"left", fem::Side::Left}};
        for (const auto& [key, side] : names) {
            if (s[key]) {
                tagging.set(side, region_of(s[key]));
            }
        }
        mesh.tagging = tagging;
    }
    if (const auto f = g["mesh_file"]) {
        std::filesystem::path path = scalar<std::string>(f, "geometry.mesh_file");
        if (path.is_relative() && !base_dir.empty()) {
            path = std::filesystem::path(base_dir) / path;
        }
        mesh.file = path.string();
    }
    int level = 0;
    read_opt(g, "level", level, "geometry");
    if (level < 0 || level > 12) {
        throw parse_error(g["level"].Mark(), "geometry.level must be in [0, 12]");
    }
    if (level > 0 && !mesh.file.empty()) {
        throw parse_error(g["level"].Mark(), "geometry.level cannot be combined with mesh_file");
    }
    mesh = mesh.refined(level);
}

void read_material(const YAML::Node& m, contact::Material& mat)
{
    allow_keys(m, "material", {"viscosity", "elasticity", "relaxation"});
    if (m["viscosity"]) {
        mat.viscosity = tensor_of(m["viscosity"], "material.viscosity");
    }
    if (m["elasticity"]) {
        mat.elasticity = tensor_of(m["elasticity"], "material.elasticity");
    }
    for (const auto* t : {&mat.viscosity, &mat.elasticity}) {
        if (!(t->shear > 0.0) || t->bulk < 0.0) {
            throw parse_error(m.Mark(), "material tensors need shear > 0 and bulk >= 0");
        }
    }
    if (const auto r = m["relaxation"]) {
        allow_keys(r, "material.relaxation", {"kind", "shear", "bulk", "time_scale"});
        std::string kind = "none";
        read_opt(r, "kind", kind, "material.relaxation");
        fem::IsotropicTensor c0;
        read_opt(r, "shear", c0.shear, "material.relaxation");
        read_opt(r, "bulk", c0.bulk, "material.relaxation");
        if (c0.shear < 0.0 || c0.bulk < 0.0) {
            throw parse_error(r.Mark(), "relaxation coefficients must be non-negative");
        }
        if (kind == "none") {
            mat.relaxation = contact::Relaxation::none();
        } else if (kind == "constant") {
            mat.relaxation = contact::Relaxation::constant(c0);
        } else if (kind == "exponential") {
            mat.relaxation = contact::Relaxation::exponential(c0, positive(r, "time_scale", 1.0, "material.relaxation"));
        } else {
            throw parse_error(r["kind"].Mark(), "relaxation kind must be none, constant or exponential");
        }
    }
}

contact::ComplianceLaw read_law(const YAML::Node& l)
{
    allow_keys(l, "law", {"name", "stiffness", "threshold", "residual_ratio", "declared_c", "declared_m"});
    if (!l["name"]) {
        throw parse_error(l.Mark(), "law.name is required");
    }
    const auto name = scalar<std::string>(l["name"], "law.name");
    contact::LawParameters params;
    read_opt(l, "stiffness", params.stiffness, "law");
    read_opt(l, "threshold", params.threshold, "law");
    read_opt(l, "residual_ratio", params.residual_ratio, "law");
    if (l["declared_c"]) {
        params.declared_c = scalar<double>(l["declared_c"], "law.declared_c");
    }
    if (l["declared_m"]) {
        params.declared_m = scalar<double>(l["declared_m"], "law.declared_m");
    }
    try {
        return contact::law_catalog(name, params);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidArgument) {
            throw parse_error(l.Mark(), e.what());
        }
        throw;
    }
}

Scenario from_yaml(const YAML::Node& root, const std::string& origin, const std::string& base_dir)
{
    if (!root.IsMap()) {
        throw parse_error(root.Mark(), "scenario must be a mapping");
    }
    allow_keys(root, "scenario",
               {"name", "geometry", "material", "law", "loads", "initial_displacement", "time", "solver", "study",
                "check_smallness"});
    Scenario sc;
    sc.source = origin;
    sc.name = root["name"] ? scalar<std::string>(root["name"], "name") : std::string("scenario");
    auto& cc = sc.config;
    if (root["geometry"]) {
        read_geometry(root["geometry"], cc.mesh, base_dir);
    }
    if (root["material"]) {
        read_material(root["material"], cc.material);
    }
    if (root["law"]) {
        cc.law = read_law(root["law"]);
    }
    if (const auto loads = root["loads"]) {
        allow_keys(loads, "loads", {"body_force", "traction"});
        if (loads["body_force"]) {
            sc.body_force = field_of(loads["body_force"], "loads.body_force");
        }
        if (loads["traction"]) {
            sc.traction = field_of(loads["traction"], "loads.traction");
        }
    }
    if (root["initial_displacement"]) {
        sc.initial_displacement = field_of(root["initial_displacement"], "initial_displacement");
    }
    cc.f0 = sc.body_force.as_field();
    cc.fN = sc.traction.as_field();
    if (!sc.initial_displacement.empty()) {
        const auto f = sc.initial_displacement.as_field();
        cc.u0 = [f](double x, double y) { return f(x, y, 0.0); };
    }
    if (const auto t = root["time"]) {
        allow_keys(t, "time", {"T", "steps"});
        cc.T = positive(t, "T", cc.T, "time");
        read_opt(t, "steps", cc.steps, "time");
        if (cc.steps < 1) {
            throw parse_error(t["steps"].Mark(), "time.steps must be at least 1");
        }
    }
    if (const auto s = root["solver"]) {
        allow_keys(s, "solver", {"tol", "max_iter", "damping", "accelerate"});
        read_opt(s, "tol", sc.solver.tol, "solver");
        read_opt(s, "max_iter", sc.solver.max_iter, "solver");
        read_opt(s, "damping", sc.solver.damping, "solver");
        read_opt(s, "accelerate", sc.solver.accelerate, "solver");
        try {
            sc.solver.check();
        } catch (const Error& e) {
            throw parse_error(s.Mark(), e.what());
        }
    }
    if (const auto s = root["study"]) {
        allow_keys(s, "study", {"levels", "ref_extra", "rate_threshold"});
        read_opt(s, "levels", sc.study.levels, "study");
        read_opt(s, "ref_extra", sc.study.ref_extra, "study");
        read_opt(s, "rate_threshold", sc.study.rate_threshold, "study");
    }
    read_opt(root, "check_smallness", sc.check_smallness, "scenario");
    return sc;
}

} // namespace

Scenario parse_scenario(const std::string& text, const std::string& origin)
{
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw parse_error(e.mark, e.msg).with_context(origin);
    }
    const auto dir = std::filesystem::path(origin).parent_path().string();
    try {
        return from_yaml(root, origin, dir);
    } catch (const Error& e) {
        throw e.with_context(origin);
    } catch (const YAML::Exception& e) {
        throw parse_error(e.mark, e.msg).with_context(origin);
    }
}

Scenario load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open scenario " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), path);
}

} // namespace hvi
