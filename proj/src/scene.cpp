#include "splatgrasp/scene.hpp"

#include "splatgrasp/errors.hpp"
#include "splatgrasp/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace splatgrasp {

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 random_direction(Rng &rng) {
    for (;;) {
        const Vec3 v(rng.normal(), rng.normal(), rng.normal());
        const double n = v.norm();
        if (n > 1e-12) return v / n;
    }
}

double signed_pow(double v, double e) { return (v < 0.0 ? -1.0 : 1.0) * std::pow(std::abs(v), e); }

struct LocalSample {
    Point3 p;
    Vec3 n;
};

LocalSample sample_sphere(const Primitive &prim, Rng &rng) {
    const Vec3 d = random_direction(rng);
    return {prim.dims.x() * d, d};
}

LocalSample sample_box(const Primitive &prim, Rng &rng) {
    const Vec3 h = 0.5 * prim.dims;
    const double areas[3] = {prim.dims.y() * prim.dims.z(), prim.dims.x() * prim.dims.z(),
                             prim.dims.x() * prim.dims.y()};
    const double total = areas[0] + areas[1] + areas[2];
    double u = rng.uniform() * total;
    int axis = 0;
    while (axis < 2 && u >= areas[axis]) {
        u -= areas[axis];
        ++axis;
    }
    const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
    Point3 p;
    for (int k = 0; k < 3; ++k) p[k] = rng.uniform(-h[k], h[k]);
    p[axis] = side * h[axis];
    Vec3 n = Vec3::Zero();
    n[axis] = side;
    return {p, n};
}

LocalSample sample_cylinder(const Primitive &prim, Rng &rng) {
    const double r = prim.dims.x(), h = prim.dims.z();
    const double side = 2.0 * kPi * r * h, cap = kPi * r * r;
    const double u = rng.uniform() * (side + 2.0 * cap);
    const double phi = rng.uniform(0.0, 2.0 * kPi);
    if (u < side) {
        const Vec3 n(std::cos(phi), std::sin(phi), 0.0);
        return {Point3(r * n.x(), r * n.y(), rng.uniform(-0.5 * h, 0.5 * h)), n};
    }
    const double z = u < side + cap ? 0.5 * h : -0.5 * h;
    const double rr = r * std::sqrt(rng.uniform());
    return {Point3(rr * std::cos(phi), rr * std::sin(phi), z), Vec3(0.0, 0.0, z > 0.0 ? 1.0 : -1.0)};
}

LocalSample sample_superellipsoid(const Primitive &prim, Rng &rng) {
    const Vec3 &s = prim.dims;
    const double e1 = prim.exponents.x(), e2 = prim.exponents.y();
    const Vec3 d = random_direction(rng);
    auto inside = [&](const Vec3 &x) {
        const double a = std::pow(std::abs(x.x() / s.x()), 2.0 / e2) + std::pow(std::abs(x.y() / s.y()), 2.0 / e2);
        return std::pow(a, e2 / e1) + std::pow(std::abs(x.z() / s.z()), 2.0 / e1);
    };
    const Point3 p = std::pow(inside(d), -0.5 * e1) * d;
    const double a = std::pow(std::abs(p.x() / s.x()), 2.0 / e2) + std::pow(std::abs(p.y() / s.y()), 2.0 / e2);
    const double ka = a > 0.0 ? std::pow(a, e2 / e1 - 1.0) : 0.0;
    Vec3 g(ka * signed_pow(p.x() / s.x(), 2.0 / e2 - 1.0) / s.x(), ka * signed_pow(p.y() / s.y(), 2.0 / e2 - 1.0) / s.y(),
           signed_pow(p.z() / s.z(), 2.0 / e1 - 1.0) / s.z());
    if (g.norm() < 1e-300 || !g.allFinite()) g = d;
    return {p, g.normalized()};
}

} // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

const char *primitive_kind_name(PrimitiveKind kind) {
    switch (kind) {
    case PrimitiveKind::Sphere: return "sphere";
    case PrimitiveKind::Box: return "box";
    case PrimitiveKind::Cylinder: return "cylinder";
    case PrimitiveKind::Superellipsoid: return "superellipsoid";
    }
    return "unknown";
}

PrimitiveKind primitive_kind_from_name(const std::string &name) {
    if (name == "sphere") return PrimitiveKind::Sphere;
    if (name == "box") return PrimitiveKind::Box;
    if (name == "cylinder") return PrimitiveKind::Cylinder;
    if (name == "superellipsoid") return PrimitiveKind::Superellipsoid;
    throw ParseError("unknown primitive type '" + name + "'");
}

void Primitive::validate() const {
    switch (kind) {
    case PrimitiveKind::Sphere:
        if (!(dims.x() > 0.0)) throw std::invalid_argument("sphere radius must be positive");
        break;
    case PrimitiveKind::Cylinder:
        if (!(dims.x() > 0.0) || !(dims.z() > 0.0))
            throw std::invalid_argument("cylinder radius and height must be positive");
        break;
    case PrimitiveKind::Superellipsoid:
        if (!(exponents.x() > 0.0 && exponents.x() <= 2.0 && exponents.y() > 0.0 && exponents.y() <= 2.0))
            throw std::invalid_argument("superellipsoid exponents must lie in (0, 2]");
        [[fallthrough]];
    case PrimitiveKind::Box:
        if (!(dims.minCoeff() > 0.0)) throw std::invalid_argument("primitive dimensions must be positive");
        break;
    }
    if (!dims.allFinite()) throw std::invalid_argument("primitive dimensions must be finite");
}

double Primitive::area() const {
    switch (kind) {
    case PrimitiveKind::Sphere: return 4.0 * kPi * dims.x() * dims.x();
    case PrimitiveKind::Box: return 2.0 * (dims.x() * dims.y() + dims.y() * dims.z() + dims.x() * dims.z());
    case PrimitiveKind::Cylinder: return 2.0 * kPi * dims.x() * (dims.x() + dims.z());
    case PrimitiveKind::Superellipsoid: {
        // Thomsen's ellipsoid approximation.
        const double p = 1.6075;
        const double ab = std::pow(dims.x() * dims.y(), p), ac = std::pow(dims.x() * dims.z(), p),
                     bc = std::pow(dims.y() * dims.z(), p);
        return 4.0 * kPi * std::pow((ab + ac + bc) / 3.0, 1.0 / p);
    }
    }
    return 0.0;
}

double Primitive::bounding_radius() const {
    switch (kind) {
    case PrimitiveKind::Sphere: return dims.x();
    case PrimitiveKind::Box: return 0.5 * dims.norm();
    case PrimitiveKind::Cylinder: return std::hypot(dims.x(), 0.5 * dims.z());
    case PrimitiveKind::Superellipsoid: return dims.norm();
    }
    return 0.0;
}

void SceneDescriptor::validate() const {
    if (primitives.empty()) throw std::invalid_argument("scene has no primitives");
    for (const Primitive &p : primitives) p.validate();
    if (target >= primitives.size()) throw std::invalid_argument("scene target index out of range");
    if (!std::isfinite(table_height)) throw std::invalid_argument("table height must be finite");
}

PointCloud sample_primitive(const Primitive &p, std::size_t count, std::uint64_t seed) {
    p.validate();
    Rng rng(seed);
    std::vector<Point3> pts;
    std::vector<Vec3> nrm;
    pts.reserve(count);
    nrm.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        LocalSample s;
        switch (p.kind) {
        case PrimitiveKind::Sphere: s = sample_sphere(p, rng); break;
        case PrimitiveKind::Box: s = sample_box(p, rng); break;
        case PrimitiveKind::Cylinder: s = sample_cylinder(p, rng); break;
        case PrimitiveKind::Superellipsoid: s = sample_superellipsoid(p, rng); break;
        }
        pts.push_back(p.pose.apply(s.p));
        nrm.push_back(p.pose.apply_direction(s.n).normalized());
    }
    return PointCloud(std::move(pts), std::move(nrm));
}

SceneSample sample_scene(const SceneDescriptor &scene, std::size_t count, std::uint64_t seed) {
    scene.validate();
    const std::size_t m = scene.primitives.size();
    std::vector<double> areas(m);
    for (std::size_t i = 0; i < m; ++i) areas[i] = scene.primitives[i].area();
    const double total = std::accumulate(areas.begin(), areas.end(), 0.0);

    std::vector<std::size_t> counts(m);
    std::vector<double> rem(m);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const double exact = static_cast<double>(count) * areas[i] / total;
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        rem[i] = exact - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (std::size_t k = 0; assigned < count; ++k, ++assigned) ++counts[order[k % m]];

    SceneSample out;
    std::vector<Point3> pts;
    std::vector<Vec3> nrm;
    for (std::size_t i = 0; i < m; ++i) {
        const PointCloud part = sample_primitive(scene.primitives[i], counts[i], mix_seed(seed, i));
        pts.insert(pts.end(), part.points().begin(), part.points().end());
        nrm.insert(nrm.end(), part.normals().begin(), part.normals().end());
        out.labels.insert(out.labels.end(), counts[i], static_cast<std::uint32_t>(i));
    }
    out.cloud = PointCloud(std::move(pts), std::move(nrm));
    return out;
}

SegmentMask target_mask(const std::vector<std::uint32_t> &labels, std::size_t target) {
    SegmentMask mask;
    mask.target.reserve(labels.size());
    for (std::uint32_t l : labels) mask.target.push_back(l == target ? 1 : 0);
    return mask;
}

std::vector<SceneDescriptor> fixture_scenes() {
    auto at = [](double x, double y, double z) { return RigidTransform(Rotation(), Vec3(x, y, z)); };
    std::vector<SceneDescriptor> out;

    Primitive sphere;
    sphere.kind = PrimitiveKind::Sphere;
    sphere.dims = Vec3(0.03, 0.03, 0.03);
    sphere.pose = at(0, 0, 0.03);
    out.push_back({"sphere", {sphere}, 0.0, 0});

    Primitive cube;
    cube.kind = PrimitiveKind::Box;
    cube.dims = Vec3(0.05, 0.05, 0.05);
    cube.pose = at(0, 0, 0.025);
    out.push_back({"cube", {cube}, 0.0, 0});

    Primitive cyl;
    cyl.kind = PrimitiveKind::Cylinder;
    cyl.dims = Vec3(0.025, 0.025, 0.08);
    cyl.pose = at(0, 0, 0.04);
    out.push_back({"cylinder", {cyl}, 0.0, 0});

    Primitive se;
    se.kind = PrimitiveKind::Superellipsoid;
    se.dims = Vec3(0.03, 0.025, 0.02);
    se.exponents = Eigen::Vector2d(0.5, 0.5);
    se.pose = at(0, 0, 0.02);
    out.push_back({"superellipsoid", {se}, 0.0, 0});

    Primitive flat;
    flat.kind = PrimitiveKind::Box;
    flat.dims = Vec3(0.06, 0.03, 0.04);
    flat.pose = RigidTransform(Rotation::from_wxyz(std::cos(kPi / 12), 0, 0, std::sin(kPi / 12)), Vec3(0, 0, 0.02));
    out.push_back({"flat_box", {flat}, 0.0, 0});

    Primitive target = cyl;
    target.dims = Vec3(0.02, 0.02, 0.07);
    target.pose = at(0, 0, 0.035);
    Primitive distractor = sphere;
    distractor.dims = Vec3(0.025, 0.025, 0.025);
    distractor.pose = at(0.065, 0.0, 0.025);
    out.push_back({"two_object", {target, distractor}, 0.0, 0});
    return out;
}

bool is_convex_single(const SceneDescriptor &scene) { return scene.primitives.size() == 1; }

} // namespace splatgrasp
