#include "splatgrasp/grasping.hpp"

#include "splatgrasp/errors.hpp"
#include "splatgrasp/kdtree.hpp"
#include "splatgrasp/parallel.hpp"
#include "splatgrasp/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <utility>

namespace splatgrasp {

namespace {

double angle_between(const Vec3 &a, const Vec3 &b) {
    return std::atan2(a.cross(b).norm(), a.dot(b));
}

double quantize(double v, double step) { return std::round(v / step); }

// Picks the approach among `samples` rotations of u0 about b that is most
// anti-parallel to `up`, compared in steps of 0.1; within a step the one
// pointing furthest along `inward` wins. u0 is the component of `up`
// orthogonal to b, or of `forward` when b is (nearly) parallel to up.
Vec3 choose_approach(const Vec3 &b, const Vec3 &up, const Vec3 &forward, const Vec3 &inward, int samples) {
    Vec3 ref = up - up.dot(b) * b;
    if (ref.norm() < 1e-6) ref = forward - forward.dot(b) * b;
    if (ref.norm() < 1e-6) ref = b.unitOrthogonal();
    const Vec3 u0 = ref.normalized();
    const Vec3 u1 = b.cross(u0);
    Vec3 best = u0;
    double bestDot = std::numeric_limits<double>::infinity();
    double bestIn = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < samples; ++k) {
        const double phi = 2.0 * std::numbers::pi * k / samples;
        const Vec3 a = std::cos(phi) * u0 + std::sin(phi) * u1;
        const double d = quantize(a.dot(up), 0.1);
        const double in = quantize(a.dot(inward), 1e-12);
        if (d < bestDot || (d == bestDot && in > bestIn)) {
            bestDot = d;
            bestIn = in;
            best = a;
        }
    }
    return best;
}

} // namespace

void GripperModel::validate() const {
    if (!(max_width > 0.0) || !(depth >= 0.0) || !(finger_length > 0.0) || !(finger_thickness > 0.0) ||
        !(palm_width > 0.0) || !(contact_slack >= 0.0) || 2.0 * contact_slack >= max_width)
        throw std::invalid_argument("invalid gripper model");
}

Grasp Grasp::make(const Point3 &contact, const Vec3 &baseline, const Vec3 &approach, double width, double depth,
                  double score) {
    if (!(width >= 0.0)) throw std::invalid_argument("grasp width must be non-negative");
    if (!(score >= 0.0 && score <= 1.0)) throw std::invalid_argument("grasp score must lie in [0, 1]");
    const UnitVector3 a = UnitVector3::normalized(approach);
    const Vec3 bPerp = baseline - baseline.dot(a.vec()) * a.vec();
    if (bPerp.norm() < 1e-9 * std::max(1.0, baseline.norm()))
        throw NumericalError("grasp baseline is parallel to the approach");
    Grasp g;
    g.contact = contact;
    g.approach = a;
    g.baseline = UnitVector3::normalized(bPerp);
    g.width = width;
    g.depth = depth;
    g.score = score;
    return g;
}

Mat3 grasp_rotation(const Grasp &g) {
    Mat3 r;
    r.col(0) = g.baseline.vec();
    r.col(1) = g.approach.vec().cross(g.baseline.vec());
    r.col(2) = g.approach.vec();
    return r;
}

RigidTransform grasp_pose(const Grasp &g, const GripperModel &) {
    const Vec3 t = g.contact + 0.5 * g.width * g.baseline.vec() + g.depth * g.approach.vec();
    return RigidTransform(Rotation::from_matrix(grasp_rotation(g)), t);
}

double friction_cone_score(const Point3 &c, const Point3 &cOther, const Vec3 &n, const Vec3 &nOther, double mu) {
    if (!(mu > 0.0)) throw std::invalid_argument("friction coefficient must be positive");
    const Vec3 d = cOther - c;
    if (d.norm() < 1e-12) throw NumericalError("coincident contacts");
    if (n.norm() < 1e-12 || nOther.norm() < 1e-12) throw NumericalError("zero contact normal");
    const double theta = std::max(angle_between(n, d), angle_between(nOther, -d));
    return std::clamp(1.0 - theta / std::atan(mu), 0.0, 1.0);
}

std::vector<std::size_t> candidate_order(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    return order;
}

SampleResult sample_antipodal_grasps(const PointCloud &cloud, const GripperModel &gripper,
                                     const SamplerOptions &options) {
    gripper.validate();
    if (!cloud.has_normals()) throw std::invalid_argument("antipodal sampling needs normals");
    if (!(options.mu > 0.0)) throw std::invalid_argument("friction coefficient must be positive");
    if (options.approach_samples < 1) throw std::invalid_argument("approach_samples must be positive");

    SampleResult out;
    if (cloud.empty() || options.max_grasps == 0) return out;

    const auto &pts = cloud.points();
    const auto &nrm = cloud.normals();
    const KdTree tree(pts);
    const double coneHalf = std::atan(options.mu);
    const double reach = gripper.max_width - 2.0 * gripper.contact_slack;
    const double tol = options.ray_tolerance;
    const Vec3 up = options.up.normalized();
    const Vec3 forward = options.forward.normalized();
    const Point3 centroid = cloud.centroid();

    // Balls of radius tol * sqrt(1.25) centered every tol along the ray cover
    // the cylinder of radius tol around it.
    const double step = tol > 0.0 ? tol : reach;
    const double ball = std::sqrt(tol * tol + 0.25 * step * step);
    const std::size_t steps = static_cast<std::size_t>(std::ceil(reach / step)) + 1;

    auto findPartner = [&](std::size_t i) -> std::optional<std::size_t> {
        const Point3 &c = pts[i];
        const Vec3 inward = -nrm[i];
        std::vector<std::size_t> near;
        for (std::size_t k = 0; k < steps; ++k) {
            const double s = std::min(reach, static_cast<double>(k) * step);
            for (const Neighbor &nb : tree.radius(c + s * inward, ball)) near.push_back(nb.index);
        }
        std::sort(near.begin(), near.end());
        near.erase(std::unique(near.begin(), near.end()), near.end());

        std::optional<std::size_t> best;
        double bestRay = 0.0, bestT = 0.0;
        for (std::size_t j : near) {
            if (j == i) continue;
            const Vec3 d = pts[j] - c;
            const double t = d.dot(inward);
            if (!(t > 0.0) || d.norm() > reach) continue;
            const double ray = (d - t * inward).norm();
            if (ray > tol) continue;
            const double theta = std::max(angle_between(inward, d), angle_between(-nrm[j], -d));
            if (!(theta < coneHalf)) continue;
            const double qRay = quantize(ray, 1e-12), qT = quantize(t, 1e-12);
            if (!best || qRay < bestRay || (qRay == bestRay && qT < bestT)) {
                best = j;
                bestRay = qRay;
                bestT = qT;
            }
        }
        return best;
    };

    const std::vector<std::size_t> order = candidate_order(pts.size(), options.seed);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    constexpr std::size_t kBlock = 256;
    for (std::size_t begin = 0; begin < order.size() && out.grasps.size() < options.max_grasps; begin += kBlock) {
        const std::size_t end = std::min(order.size(), begin + kBlock);
        std::vector<std::optional<std::size_t>> partner(end - begin);
        parallel_for(end - begin, [&](std::size_t k) { partner[k] = findPartner(order[begin + k]); });

        for (std::size_t k = 0; k < partner.size() && out.grasps.size() < options.max_grasps; ++k) {
            const std::size_t i = order[begin + k];
            out.visited.push_back(i);
            if (!partner[k]) continue;
            const std::size_t j = *partner[k];
            const auto key = std::minmax(i, j);
            if (!seen.insert({key.first, key.second}).second) continue;

            const Point3 &c = pts[i];
            const Point3 &cp = pts[j];
            const Vec3 b = (cp - c).normalized();
            const double score = friction_cone_score(c, cp, -nrm[i], -nrm[j], options.mu);
            const Vec3 a = choose_approach(b, up, forward, centroid - 0.5 * (c + cp), options.approach_samples);
            const double width = (cp - c).norm() + 2.0 * gripper.contact_slack;
            out.grasps.push_back(Grasp::make(c, b, a, width, gripper.depth, score));
            out.pairs.push_back({i, j});
        }
    }
    return out;
}

std::vector<Grasp> filter_contacts(std::span<const Grasp> grasps, const PointCloud &cloud, const SegmentMask &mask,
                                   double radius) {
    if (mask.size() != cloud.size()) throw std::invalid_argument("mask size does not match cloud");
    std::vector<Grasp> out;
    if (cloud.empty()) return out;
    const KdTree tree(cloud.points());
    const double r2 = radius * radius;
    auto onTarget = [&](const Point3 &p) {
        const Neighbor nb = tree.nearest(p);
        return nb.distance2 <= r2 && mask.is_target(nb.index);
    };
    std::vector<std::uint8_t> keep(grasps.size(), 0);
    parallel_for(grasps.size(), [&](std::size_t i) { keep[i] = onTarget(grasps[i].contact) && onTarget(grasps[i].far_jaw()); });
    for (std::size_t i = 0; i < grasps.size(); ++i)
        if (keep[i]) out.push_back(grasps[i]);
    return out;
}

bool check_collision(const Grasp &g, const GripperModel &gripper, std::span<const Point3> scene,
                     double contact_exclusion) {
    gripper.validate();
    const Mat3 r = grasp_rotation(g);
    const Vec3 &b = g.baseline.vec();
    // Boxes are centered between the two surface contacts c and c + (w - 2 slack) b
    // so each jaw face clears its contact by the slack.
    const double span = std::max(0.0, g.width - 2.0 * gripper.contact_slack);
    const Point3 mid = g.contact + 0.5 * span * b;
    const Point3 &surfaceA = g.contact;
    const Point3 surfaceB = g.contact + span * b;
    const double ex2 = contact_exclusion * contact_exclusion;

    const double ft = gripper.finger_thickness;
    const double fx = 0.5 * g.width + 0.5 * ft;
    struct Box {
        Vec3 center, half;
    };
    const Box boxes[3] = {
        {Vec3(fx, 0.0, 0.0), Vec3(0.5 * ft, 0.5 * ft, 0.5 * gripper.finger_length)},
        {Vec3(-fx, 0.0, 0.0), Vec3(0.5 * ft, 0.5 * ft, 0.5 * gripper.finger_length)},
        {Vec3(0.0, 0.0, -0.5 * gripper.finger_length - 0.5 * ft), Vec3(0.5 * gripper.palm_width, 0.5 * ft, 0.5 * ft)},
    };
    for (const Point3 &p : scene) {
        if ((p - surfaceA).squaredNorm() <= ex2 || (p - surfaceB).squaredNorm() <= ex2) continue;
        const Vec3 local = r.transpose() * (p - mid);
        for (const Box &box : boxes) {
            const Vec3 d = (local - box.center).cwiseAbs();
            if (d.x() < box.half.x() && d.y() < box.half.y() && d.z() < box.half.z()) return false;
        }
    }
    return true;
}

void rank_grasps(std::vector<Grasp> &grasps) {
    std::stable_sort(grasps.begin(), grasps.end(), [](const Grasp &x, const Grasp &y) {
        const double sx = quantize(x.score, 1e-9), sy = quantize(y.score, 1e-9);
        if (sx != sy) return sx > sy;
        return quantize(x.width, 1e-9) < quantize(y.width, 1e-9);
    });
}

PlanResult plan_grasps(const PointCloud &cloud, const SegmentMask &mask, const GripperModel &gripper,
                       const PlanOptions &options) {
    PlanResult result;
    const SampleResult sampled = sample_antipodal_grasps(cloud, gripper, options.sampler);
    result.sampled = sampled.grasps.size();
    std::vector<Grasp> kept = filter_contacts(sampled.grasps, cloud, mask, options.filter_radius);
    result.after_filter = kept.size();
    std::vector<std::uint8_t> clear(kept.size(), 0);
    parallel_for(kept.size(), [&](std::size_t i) {
        clear[i] = check_collision(kept[i], gripper, cloud.points(), options.contact_exclusion);
    });
    std::vector<Grasp> free;
    for (std::size_t i = 0; i < kept.size(); ++i)
        if (clear[i]) free.push_back(kept[i]);
    result.after_collision = free.size();
    rank_grasps(free);
    if (free.size() > options.top_k) free.resize(options.top_k);
    result.grasps = std::move(free);
    if (result.grasps.empty()) {
        result.feasible = false;
        if (result.sampled == 0)
            result.diagnostic = "no feasible grasp: no antipodal contact pairs within the gripper width";
        else if (result.after_filter == 0)
            result.diagnostic = "no feasible grasp: no candidate has both contacts on the target";
        else
            result.diagnostic = "no feasible grasp: every candidate collides with the scene";
    }
    return result;
}

} // namespace splatgrasp
