#include "splatgrasp/geometry.hpp"

#include "splatgrasp/errors.hpp"
#include "splatgrasp/kdtree.hpp"
#include "splatgrasp/parallel.hpp"
#include "splatgrasp/random.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace splatgrasp {

UnitVector3 UnitVector3::normalized(const Vec3 &v) {
    const double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw NumericalError("cannot normalize a zero or non-finite vector");
    return UnitVector3(v / n);
}

UnitVector3 UnitVector3::checked(const Vec3 &v) {
    if (!v.allFinite() || std::abs(v.norm() - 1.0) > 1e-9) throw NumericalError("vector is not unit length");
    return UnitVector3(v);
}

Rotation Rotation::from_wxyz(double w, double x, double y, double z) {
    Eigen::Quaterniond q(w, x, y, z);
    const double n = q.norm();
    if (!std::isfinite(n)) throw NumericalError("non-finite quaternion");
    if (n < 1e-12) return Rotation();
    q.coeffs() /= n;
    return Rotation(q);
}

Rotation Rotation::from_matrix(const Mat3 &m) {
    if (!m.allFinite()) throw NumericalError("non-finite rotation matrix");
    // Polar projection onto SO(3) before conversion.
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 d = Mat3::Identity();
    d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    const Mat3 r = svd.matrixU() * d * svd.matrixV().transpose();
    Eigen::Quaterniond q(r);
    q.normalize();
    return Rotation(q);
}

Rotation Rotation::operator*(const Rotation &o) const {
    Eigen::Quaterniond q = mQuat * o.mQuat;
    q.normalize();
    return Rotation(q);
}

Rotation Rotation::inverse() const { return Rotation(mQuat.conjugate()); }

RigidTransform RigidTransform::from_matrix(const Mat4 &m) {
    return RigidTransform(Rotation::from_matrix(m.topLeftCorner<3, 3>()), m.topRightCorner<3, 1>());
}

RigidTransform RigidTransform::operator*(const RigidTransform &o) const {
    return RigidTransform(mRotation * o.mRotation, mRotation.apply(o.mTranslation) + mTranslation);
}

RigidTransform RigidTransform::inverse() const {
    const Rotation inv = mRotation.inverse();
    return RigidTransform(inv, -inv.apply(mTranslation));
}

Mat4 RigidTransform::matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation_matrix();
    m.topRightCorner<3, 1>() = mTranslation;
    return m;
}

PointCloud::PointCloud(std::vector<Point3> points, std::vector<Vec3> normals, std::vector<Rgb> colors)
    : mPoints(std::move(points)), mNormals(std::move(normals)), mColors(std::move(colors)) {
    for (const auto &p : mPoints)
        if (!p.allFinite()) throw NumericalError("point cloud contains a non-finite coordinate");
    if (!mNormals.empty()) {
        if (mNormals.size() != mPoints.size())
            throw std::invalid_argument("normal count does not match point count");
        for (const auto &n : mNormals)
            if (!n.allFinite() || std::abs(n.norm() - 1.0) > 1e-9)
                throw NumericalError("point cloud normal is not unit length");
    }
    if (!mColors.empty() && mColors.size() != mPoints.size())
        throw std::invalid_argument("color count does not match point count");
}

PointCloud PointCloud::with_normals(std::vector<Vec3> normals) const {
    return PointCloud(mPoints, std::move(normals), mColors);
}

PointCloud PointCloud::without_normals() const { return PointCloud(mPoints, {}, mColors); }

Point3 PointCloud::centroid() const {
    if (mPoints.empty()) throw std::invalid_argument("centroid of an empty cloud");
    Point3 sum = Point3::Zero();
    for (const auto &p : mPoints) sum += p;
    return sum / static_cast<double>(mPoints.size());
}

std::pair<Point3, Point3> PointCloud::bounds() const {
    if (mPoints.empty()) throw std::invalid_argument("bounds of an empty cloud");
    Point3 lo = mPoints.front(), hi = lo;
    for (const auto &p : mPoints) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return {lo, hi};
}

PointCloud PointCloud::transformed(const RigidTransform &x) const {
    std::vector<Point3> pts(mPoints.size());
    std::vector<Vec3> nrm(mNormals.size());
    const Mat3 r = x.rotation_matrix();
    for (std::size_t i = 0; i < mPoints.size(); ++i) pts[i] = r * mPoints[i] + x.translation();
    for (std::size_t i = 0; i < mNormals.size(); ++i) nrm[i] = (r * mNormals[i]).normalized();
    return PointCloud(std::move(pts), std::move(nrm), mColors);
}

void CameraModel::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("camera focal lengths must be positive");
    if (width <= 0 || height <= 0) throw std::invalid_argument("camera size must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
        throw std::invalid_argument("camera principal point outside the image");
}

Point3 CameraModel::center_world() const { return extrinsic.inverse().translation(); }

CameraModel look_at_camera(const Point3 &eye, const Point3 &target, const Vec3 &up, double fx, double fy,
                           int width, int height) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 right = forward.cross(up);
    if (right.norm() < 1e-12) right = forward.unitOrthogonal();
    right.normalize();
    const Vec3 down = forward.cross(right);
    Mat3 worldToCam;
    worldToCam.row(0) = right.transpose();
    worldToCam.row(1) = down.transpose();
    worldToCam.row(2) = forward.transpose();
    CameraModel cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.width = width;
    cam.height = height;
    cam.cx = 0.5 * (width - 1);
    cam.cy = 0.5 * (height - 1);
    const Rotation r = Rotation::from_matrix(worldToCam);
    cam.extrinsic = RigidTransform(r, -r.apply(eye));
    return cam;
}

NormalEstimate estimate_normals(const PointCloud &cloud, std::size_t k) {
    const std::size_t n = cloud.size();
    if (k < 3) throw std::invalid_argument("estimate_normals needs k >= 3");
    if (n < k) throw std::invalid_argument("estimate_normals needs at least k points");

    const KdTree tree(cloud.points());
    const Point3 centroid = cloud.centroid();
    std::vector<Vec3> normals(n);
    std::vector<unsigned char> degenerate(n, 0);

    parallel_for(n, [&](std::size_t i) {
        const Point3 &p = cloud[i];
        const auto nbrs = tree.knn(p, k);
        Point3 mean = Point3::Zero();
        for (const auto &nb : nbrs) mean += cloud[nb.index];
        mean /= static_cast<double>(nbrs.size());
        Mat3 cov = Mat3::Zero();
        for (const auto &nb : nbrs) {
            const Vec3 d = cloud[nb.index] - mean;
            cov += d * d.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
        const Vec3 ev = eig.eigenvalues(); // ascending
        const Vec3 outward = p - centroid;

        // Collinear or coincident: the two smallest eigenvalues vanish
        // relative to the largest.
        const double tol = 1e-12 * std::max(ev[2], std::numeric_limits<double>::min());
        if (ev[2] <= 0.0 || ev[1] <= tol) {
            degenerate[i] = 1;
            normals[i] = outward.norm() > 0.0 ? Vec3(outward.normalized()) : Vec3::UnitZ();
            return;
        }
        Vec3 normal = eig.eigenvectors().col(0).normalized();
        if (normal.dot(outward) < 0.0) normal = -normal;
        normals[i] = normal;
    });

    NormalEstimate out{cloud.with_normals(std::move(normals)), 0};
    out.degenerate_count = static_cast<std::size_t>(std::count(degenerate.begin(), degenerate.end(), 1));
    return out;
}

NormalizedCloud normalize_cloud(const PointCloud &cloud) {
    if (cloud.size() < 2) throw NumericalError("degenerate cloud: need at least two points");
    const Point3 center = cloud.centroid();
    double maxRadius = 0.0;
    for (const auto &p : cloud.points()) maxRadius = std::max(maxRadius, (p - center).norm());
    if (!(maxRadius > 0.0)) throw NumericalError("degenerate cloud: all points coincide");

    const double scale = 1.0 / maxRadius;
    std::vector<Point3> pts;
    pts.reserve(cloud.size());
    for (const auto &p : cloud.points()) pts.push_back((p - center) * scale);
    return {PointCloud(std::move(pts), cloud.normals(), cloud.colors()), scale, center};
}

std::vector<std::size_t> farthest_point_indices(std::span<const Point3> points, std::size_t count) {
    const std::size_t n = points.size();
    count = std::min(count, n);
    std::vector<std::size_t> chosen;
    if (count == 0) return chosen;
    chosen.reserve(count);

    Point3 centroid = Point3::Zero();
    for (const auto &p : points) centroid += p;
    centroid /= static_cast<double>(n);

    std::size_t first = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double d = (points[i] - centroid).squaredNorm();
        if (d < best) {
            best = d;
            first = i;
        }
    }

    std::vector<double> minDist(n, std::numeric_limits<double>::infinity());
    std::size_t current = first;
    for (std::size_t step = 0; step < count; ++step) {
        chosen.push_back(current);
        minDist[current] = -1.0;
        std::size_t next = 0;
        double far = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (minDist[i] < 0.0) continue;
            minDist[i] = std::min(minDist[i], (points[i] - points[current]).squaredNorm());
            if (minDist[i] > far) { // strict: lowest index wins ties
                far = minDist[i];
                next = i;
            }
        }
        current = next;
    }
    return chosen;
}

PointCloud resample_cloud(const PointCloud &cloud, std::size_t target, std::uint64_t seed) {
    const std::size_t n = cloud.size();
    if (n == 0) throw std::invalid_argument("resample_cloud needs a nonempty cloud");
    if (target == 0) throw std::invalid_argument("resample_cloud target must be positive");
    if (target == n) return cloud;

    std::vector<Point3> pts;
    std::vector<Vec3> nrm;
    std::vector<Rgb> col;
    pts.reserve(target);

    if (n > target) {
        for (std::size_t idx : farthest_point_indices(cloud.points(), target)) {
            pts.push_back(cloud[idx]);
            if (cloud.has_normals()) nrm.push_back(cloud.normals()[idx]);
            if (cloud.has_colors()) col.push_back(cloud.colors()[idx]);
        }
        return PointCloud(std::move(pts), std::move(nrm), std::move(col));
    }

    // Largest bounding-box extent never exceeds the diameter, so the jitter
    // stays within 1e-4 of the diameter.
    const auto [lo, hi] = cloud.bounds();
    const double halfWidth = 1e-4 * (hi - lo).maxCoeff() / std::sqrt(3.0);
    Rng rng(seed);
    pts = cloud.points();
    nrm = cloud.normals();
    col = cloud.colors();
    for (std::size_t i = n; i < target; ++i) {
        const std::size_t src = i % n;
        Vec3 jitter;
        for (int a = 0; a < 3; ++a) jitter[a] = rng.uniform(-halfWidth, halfWidth);
        pts.push_back(cloud[src] + jitter);
        if (cloud.has_normals()) nrm.push_back(cloud.normals()[src]);
        if (cloud.has_colors()) col.push_back(cloud.colors()[src]);
    }
    return PointCloud(std::move(pts), std::move(nrm), std::move(col));
}

} // namespace splatgrasp
