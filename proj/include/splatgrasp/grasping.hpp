#pragma once

#include "splatgrasp/geometry.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace splatgrasp {

/// Parallel-jaw gripper. Collision geometry is three boxes in the grasp
/// frame (x = baseline b, y = a x b, z = approach a) centered on the midpoint
/// between the two surface contacts: fingers of finger_thickness x finger_thickness x
/// finger_length at x = +-(w/2 + finger_thickness/2), and a palm of
/// palm_width x finger_thickness x finger_thickness whose center sits at
/// z = -(finger_length/2 + finger_thickness/2).
struct GripperModel {
    double max_width = 0.08;
    double depth = 0.10; // baseline to base frame
    double finger_length = 0.06;
    double finger_thickness = 0.01;
    double palm_width = 0.10;
    double contact_slack = 0.002; // clearance added on each side of the object

    void validate() const;
};

/// Contact-anchored grasp. `contact` is the first surface contact; the jaws
/// open to `width` along the baseline. Build with make(); it
/// re-orthogonalizes the baseline against the approach so |a . b| <= 1e-6
/// always holds.
struct Grasp {
    Point3 contact = Point3::Zero();
    UnitVector3 baseline;
    UnitVector3 approach;
    double width = 0.0;
    double depth = 0.0;
    double score = 0.0;

    /// Throws NumericalError when the baseline is parallel to the approach
    /// and std::invalid_argument for a negative width or a score outside [0, 1].
    static Grasp make(const Point3 &contact, const Vec3 &baseline, const Vec3 &approach, double width,
                      double depth, double score);

    /// c + w b, the opposite jaw position used for contact filtering.
    Point3 far_jaw() const { return contact + width * baseline.vec(); }
};

/// Per-point target labels aligned with a scene cloud.
struct SegmentMask {
    std::vector<std::uint8_t> target;

    static SegmentMask all_target(std::size_t n) { return {std::vector<std::uint8_t>(n, 1)}; }
    std::size_t size() const { return target.size(); }
    bool is_target(std::size_t i) const { return target[i] != 0; }
};

/// Rotation with columns (b, a x b, a).
Mat3 grasp_rotation(const Grasp &g);

/// R_g = [b, a x b, a], t_g = c + (w/2) b + d a.
RigidTransform grasp_pose(const Grasp &g, const GripperModel &gripper);

/// Two-contact friction-cone margin. `n` and `nOther` point into the object
/// (the direction each jaw pushes). With theta the larger of angle(n, c' - c)
/// and angle(n', c - c'), returns clamp(1 - theta / atan(mu), 0, 1).
/// Throws NumericalError for coincident contacts.
double friction_cone_score(const Point3 &c, const Point3 &cOther, const Vec3 &n, const Vec3 &nOther, double mu);

struct SamplerOptions {
    double mu = 1.0;
    std::size_t max_grasps = 256;
    std::uint64_t seed = 0;
    double ray_tolerance = 0.002; // max distance of the partner from the inward ray
    int approach_samples = 8;     // candidate approach directions around b
    Vec3 up = Vec3::UnitZ();      // table-up axis; approaches prefer -up, then pointing at the centroid
    Vec3 forward = Vec3::UnitX(); // fallback reference when b is parallel to up
};

struct ContactPair {
    std::size_t contact = 0;
    std::size_t partner = 0;
};

struct SampleResult {
    std::vector<Grasp> grasps;
    std::vector<ContactPair> pairs; // parallel to grasps
    std::vector<std::size_t> visited; // candidate contacts in visiting order
};

/// Seeded order in which candidate contacts are visited.
std::vector<std::size_t> candidate_order(std::size_t n, std::uint64_t seed);

/// For each candidate contact (seeded order) the partner is the point within
/// ray_tolerance of the inward normal ray, at most max_width - 2 * slack away,
/// that keeps both contacts strictly inside their friction cones; ties go to
/// the smallest ray distance, then the nearest along the ray, then the lowest
/// index. Unordered pairs are emitted once; sampling stops at max_grasps.
/// Normals must point out of the object. Width is |c' - c| + 2 contact_slack.
SampleResult sample_antipodal_grasps(const PointCloud &cloud, const GripperModel &gripper,
                                     const SamplerOptions &options);

/// Keeps grasps whose contact and far jaw both have their nearest cloud point
/// within `radius` and labeled target.
std::vector<Grasp> filter_contacts(std::span<const Grasp> grasps, const PointCloud &cloud, const SegmentMask &mask,
                                   double radius);

/// True when no scene point lies strictly inside a gripper box, ignoring
/// points within `contact_exclusion` of either surface contact (contact and
/// contact + (width - 2 slack) b). The boxes are centered midway between
/// the surface contacts.
bool check_collision(const Grasp &g, const GripperModel &gripper, std::span<const Point3> scene,
                     double contact_exclusion = 0.002);

struct PlanOptions {
    SamplerOptions sampler;
    std::size_t top_k = 10;
    double filter_radius = 0.005;
    double contact_exclusion = 0.002;
};

struct PlanResult {
    std::vector<Grasp> grasps;
    std::size_t sampled = 0;
    std::size_t after_filter = 0;
    std::size_t after_collision = 0;
    bool feasible = true;
    std::string diagnostic; // "no feasible grasp: ..." when empty
};

/// Ranks by score (descending), then width (ascending), then sampling order.
/// Scores and widths compare after rounding to 1e-9 so that floating-point
/// noise does not reorder equal grasps.
void rank_grasps(std::vector<Grasp> &grasps);

/// sample -> filter_contacts -> check_collision -> rank -> top_k.
PlanResult plan_grasps(const PointCloud &cloud, const SegmentMask &mask, const GripperModel &gripper,
                       const PlanOptions &options);

} // namespace splatgrasp
