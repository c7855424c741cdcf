#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace splatgrasp {

using Vec3 = Eigen::Vector3d;
using Point3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// RGB triple, each channel nominally in [0, 1].
using Rgb = Eigen::Vector3d;

/// Direction with |v| = 1 to 1e-9. Construct with normalized(); the raw
/// constructor is for values already known to be unit length.
class UnitVector3 {
public:
    UnitVector3() : mValue(0.0, 0.0, 1.0) {}

    /// Throws NumericalError for zero or non-finite input.
    static UnitVector3 normalized(const Vec3 &v);
    /// Throws NumericalError unless |v| is within 1e-9 of one.
    static UnitVector3 checked(const Vec3 &v);

    const Vec3 &vec() const { return mValue; }
    operator const Vec3 &() const { return mValue; }
    double dot(const Vec3 &o) const { return mValue.dot(o); }
    UnitVector3 operator-() const { return UnitVector3(-mValue); }

private:
    explicit UnitVector3(const Vec3 &v) : mValue(v) {}
    Vec3 mValue;
};

/// Unit quaternion rotation.
class Rotation {
public:
    Rotation() : mQuat(Eigen::Quaterniond::Identity()) {}

    /// Normalizes (w, x, y, z). A quaternion with norm below 1e-12 maps to the
    /// identity rotation.
    static Rotation from_wxyz(double w, double x, double y, double z);
    /// Projects a near-orthonormal matrix onto the closest rotation.
    static Rotation from_matrix(const Mat3 &m);

    Mat3 matrix() const { return mQuat.toRotationMatrix(); }
    const Eigen::Quaterniond &quaternion() const { return mQuat; }
    std::array<double, 4> wxyz() const { return {mQuat.w(), mQuat.x(), mQuat.y(), mQuat.z()}; }

    Vec3 apply(const Vec3 &v) const { return mQuat * v; }
    Rotation operator*(const Rotation &o) const;
    Rotation inverse() const;

private:
    explicit Rotation(const Eigen::Quaterniond &q) : mQuat(q) {}
    Eigen::Quaterniond mQuat;
};

/// x -> R x + t.
class RigidTransform {
public:
    RigidTransform() : mTranslation(Vec3::Zero()) {}
    RigidTransform(const Rotation &rotation, const Vec3 &translation)
        : mRotation(rotation), mTranslation(translation) {}

    /// Reads a 4x4 homogeneous matrix; the 3x3 block is projected onto the
    /// closest rotation.
    static RigidTransform from_matrix(const Mat4 &m);

    const Rotation &rotation() const { return mRotation; }
    const Vec3 &translation() const { return mTranslation; }
    Mat3 rotation_matrix() const { return mRotation.matrix(); }

    Vec3 apply(const Vec3 &p) const { return mRotation.apply(p) + mTranslation; }
    Vec3 apply_direction(const Vec3 &v) const { return mRotation.apply(v); }

    RigidTransform operator*(const RigidTransform &o) const;
    RigidTransform inverse() const;
    Mat4 matrix() const;

private:
    Rotation mRotation;
    Vec3 mTranslation;
};

/// Points with optional per-point unit normals and RGB colors.
class PointCloud {
public:
    PointCloud() = default;
    explicit PointCloud(std::vector<Point3> points, std::vector<Vec3> normals = {},
                        std::vector<Rgb> colors = {});

    std::size_t size() const { return mPoints.size(); }
    bool empty() const { return mPoints.empty(); }
    bool has_normals() const { return !mNormals.empty(); }
    bool has_colors() const { return !mColors.empty(); }

    const std::vector<Point3> &points() const { return mPoints; }
    const std::vector<Vec3> &normals() const { return mNormals; }
    const std::vector<Rgb> &colors() const { return mColors; }
    const Point3 &operator[](std::size_t i) const { return mPoints[i]; }

    PointCloud with_normals(std::vector<Vec3> normals) const;
    PointCloud without_normals() const;

    Point3 centroid() const;
    /// Axis-aligned bounds (min, max).
    std::pair<Point3, Point3> bounds() const;

    PointCloud transformed(const RigidTransform &x) const;

private:
    std::vector<Point3> mPoints;
    std::vector<Vec3> mNormals;
    std::vector<Rgb> mColors;
};

/// Pinhole camera. `extrinsic` maps world to camera coordinates; the camera
/// looks down +z with +x right and +y down in the image.
struct CameraModel {
    double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
    int width = 1, height = 1;
    RigidTransform extrinsic;

    /// Throws std::invalid_argument when intrinsics are out of range.
    void validate() const;
    Point3 center_world() const;
};

/// Builds a camera at `eye` looking at `target` with `up` roughly upward in
/// the image.
CameraModel look_at_camera(const Point3 &eye, const Point3 &target, const Vec3 &up, double fx,
                           double fy, int width, int height);

struct NormalEstimate {
    PointCloud cloud;
    /// Points whose neighborhood was collinear or coincident.
    std::size_t degenerate_count = 0;
};

/// PCA normals over k nearest neighbors (the point itself included), oriented
/// away from the cloud centroid. Degenerate neighborhoods fall back to the
/// centroid-outward direction (+z when the point sits on the centroid).
NormalEstimate estimate_normals(const PointCloud &cloud, std::size_t k);

struct NormalizedCloud {
    PointCloud cloud;
    double scale = 1.0;
    Point3 center = Point3::Zero();
};

/// Centers on the centroid and scales so the farthest point sits at radius 1.
/// The output is (p - center) * scale.
NormalizedCloud normalize_cloud(const PointCloud &cloud);

/// Returns exactly `target` points: farthest-point sampling (seeded at the
/// point nearest the centroid) when downsampling, jittered replication when
/// upsampling. The seed only affects the upsampling path.
PointCloud resample_cloud(const PointCloud &cloud, std::size_t target, std::uint64_t seed);

/// Indices chosen by farthest-point sampling, in selection order.
std::vector<std::size_t> farthest_point_indices(std::span<const Point3> points,
                                                std::size_t count);

} // namespace splatgrasp
