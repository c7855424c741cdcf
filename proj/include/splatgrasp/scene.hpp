#pragma once

#include "splatgrasp/geometry.hpp"
#include "splatgrasp/grasping.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace splatgrasp {

enum class PrimitiveKind { Sphere, Box, Cylinder, Superellipsoid };

/// Solid in its local frame, placed by `pose`.
///   Sphere:         dims.x() = radius
///   Box:            dims = full edge lengths
///   Cylinder:       dims.x() = radius, dims.z() = height (axis = local z)
///   Superellipsoid: dims = semi-axes, exponents = (e1, e2)
struct Primitive {
    PrimitiveKind kind = PrimitiveKind::Sphere;
    Vec3 dims = Vec3::Constant(0.03);
    Eigen::Vector2d exponents = Eigen::Vector2d::Ones();
    RigidTransform pose;

    void validate() const;
    double area() const;
    /// Largest distance from the local origin to the surface.
    double bounding_radius() const;
};

struct SceneDescriptor {
    std::string name;
    std::vector<Primitive> primitives;
    double table_height = 0.0;
    std::size_t target = 0;

    /// Throws std::invalid_argument when empty, when a dimension is not
    /// positive or when the target index is out of range.
    void validate() const;
};

struct SceneSample {
    PointCloud cloud; // with analytic outward normals
    std::vector<std::uint32_t> labels; // primitive index per point
};

const char *primitive_kind_name(PrimitiveKind kind);
PrimitiveKind primitive_kind_from_name(const std::string &name);

/// Surface samples of one primitive in world coordinates with analytic
/// normals. Spheres, boxes and cylinders are sampled uniformly by area;
/// superellipsoids by radial projection of uniform directions.
PointCloud sample_primitive(const Primitive &p, std::size_t count, std::uint64_t seed);

/// `count` samples split across primitives in proportion to area (largest
/// remainder), each primitive drawing from its own derived seed.
SceneSample sample_scene(const SceneDescriptor &scene, std::size_t count, std::uint64_t seed);

SegmentMask target_mask(const std::vector<std::uint32_t> &labels, std::size_t target);

/// sphere, cube, cylinder, superellipsoid, flat_box, two_object. The first
/// five are single convex objects resting on a table at z = 0.
std::vector<SceneDescriptor> fixture_scenes();
bool is_convex_single(const SceneDescriptor &scene);

/// Seed mixing for per-item substreams (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

} // namespace splatgrasp
