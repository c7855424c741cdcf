#pragma once

#include "splatgrasp/gaussians.hpp"
#include "splatgrasp/geometry.hpp"
#include "splatgrasp/grasping.hpp"
#include "splatgrasp/losses.hpp"
#include "splatgrasp/renderer.hpp"
#include "splatgrasp/scene.hpp"
#include "splatgrasp/triplane.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace splatgrasp {

/// Coarse point cloud source. `labels` holds a primitive index per point
/// when the source knows it and is empty otherwise.
struct Reconstruction {
    PointCloud cloud;
    std::vector<std::uint32_t> labels;
};

class Reconstructor {
public:
    virtual ~Reconstructor() = default;
    virtual Reconstruction reconstruct(std::size_t points, std::uint64_t seed) const = 0;
    virtual std::string name() const = 0;
};

struct OracleOptions {
    double noise_sigma = 0.0; // isotropic noise, in units of the scene radius
    double dropout = 0.0;     // fraction of points removed from the far side
    Vec3 view_direction = Vec3(1.0, 0.0, 0.0); // observer sits on the +view side
};

/// Analytic surface samples of a scene descriptor. Produces exactly `points`
/// samples (after dropout) without normals.
class OracleReconstructor : public Reconstructor {
public:
    OracleReconstructor(SceneDescriptor scene, OracleOptions options = {});
    Reconstruction reconstruct(std::size_t points, std::uint64_t seed) const override;
    std::string name() const override { return "oracle"; }
    const SceneDescriptor &scene() const { return mScene; }

private:
    SceneDescriptor mScene;
    OracleOptions mOptions;
};

/// Loads a precomputed cloud from PLY and returns it unchanged.
class FileReconstructor : public Reconstructor {
public:
    explicit FileReconstructor(std::filesystem::path path) : mPath(std::move(path)) {}
    Reconstruction reconstruct(std::size_t points, std::uint64_t seed) const override;
    std::string name() const override { return "file"; }

private:
    std::filesystem::path mPath;
};

struct PipelineSeeds {
    std::uint64_t reconstruct = 1;
    std::uint64_t densify = 2;
    std::uint64_t grasp = 3;
    std::uint64_t ground_truth = 4;
};

struct PipelineConfig {
    std::size_t coarse_points = 2048;
    std::size_t dense_points = 16384;
    std::size_t triplane_channels = 32;
    std::size_t triplane_height = 64;
    std::size_t triplane_width = 64;
    double triplane_padding = 0.1;
    std::size_t normal_neighbors = 16;
    AttributeMapping mapping;
    std::vector<std::size_t> decoder_hidden{64, 64};
    std::uint64_t decoder_seed = 7;
    LossConfig loss;
    GripperModel gripper;
    double mu = 1.0;
    std::size_t top_k = 10;
    std::size_t max_grasps = 256;
    double filter_radius = 0.005;
    PipelineSeeds seeds;

    void validate() const;
};

struct DensifyResult {
    PointCloud cloud;
    std::vector<std::size_t> parent; // input index each output point descends from
};

/// Two rounds N -> round(sqrt(N * target)) -> target. Every point keeps its
/// place and spawns children inside the tangent plane through the point
/// (PCA of its k=8 neighborhood), offset by at most half the mean neighbor
/// spacing. Throws std::invalid_argument when target < N.
DensifyResult densify_traced(const PointCloud &cloud, std::size_t target, std::uint64_t seed);
PointCloud densify(const PointCloud &cloud, std::size_t target, std::uint64_t seed);

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct ReconstructionResult {
    PointCloud coarse;
    PointCloud dense; // with estimated normals
    std::vector<std::uint32_t> dense_labels; // empty when the source has no labels
    Triplane triplane; // in the normalized frame of the dense cloud
    GaussianSet gaussians; // world frame
    double normalization_scale = 1.0;
    Point3 normalization_center = Point3::Zero();
    std::vector<StageTiming> timings;
};

/// Triplane synthesis and per-point decoding for a cloud with normals. The
/// decoded splats are mapped back to the cloud's world frame.
struct GaussianBuild {
    Triplane triplane;
    GaussianSet gaussians;
    double scale = 1.0;
    Point3 center = Point3::Zero();
};
GaussianBuild build_gaussians(const PointCloud &dense, const PipelineConfig &config);

/// coarse -> densify -> normals -> triplane -> Gaussian decode.
ReconstructionResult reconstruct(const Reconstructor &source, const PipelineConfig &config);

/// coarse.ply, dense.ply, triplane.json + triplane.bin, gaussians.ply.
void write_reconstruction(const std::filesystem::path &dir, const ReconstructionResult &result);

/// `count` cameras on a ring at 30 degrees elevation around the target,
/// three bounding radii away.
std::vector<CameraModel> orbit_cameras(const Point3 &target, double radius, int count, int imageSize);

struct GraspValidity {
    std::size_t valid = 0;
    std::size_t total = 0;
    double rate = 0.0;
    std::vector<std::uint8_t> per_grasp;
};

/// A grasp is valid when both surface contacts lie within `contactTolerance`
/// of the ground-truth samples, the friction-cone score computed with the
/// ground-truth normals is positive and the gripper clears every
/// ground-truth point. Empty input gives rate 0.
GraspValidity grasp_validity(std::span<const Grasp> grasps, const PointCloud &groundTruth,
                             const GripperModel &gripper, double mu, double contactTolerance);

struct EvaluationOptions {
    PipelineConfig pipeline;
    OracleOptions oracle;
    bool metrics = true;  // CD/EMD/F-score against ground truth
    bool render = true;   // view-synthesis metrics (needs metrics)
    int views = 4;
    int image_size = 128;
    std::size_t gt_points = 16384;      // metric reference cloud
    std::size_t validity_points = 65536; // ground-truth surface for grasp validity
    std::size_t emd_points = 1024;
    double contact_tolerance = 0.005;
};

struct ObjectResult {
    std::string name;
    bool ok = true;
    std::string error;
    bool convex = false;
    MetricReport metrics;
    bool has_metrics = false;
    std::size_t grasp_count = 0;
    std::size_t valid_grasps = 0;
    double validity = 0.0;
    bool no_feasible_grasp = false;
    std::string diagnostic;
    std::vector<Grasp> grasps;
    std::vector<StageTiming> timings;
    double total_seconds = 0.0;
};

struct Summary {
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t count = 0;
};
Summary summarize(const std::vector<double> &values);

struct EvaluationTable {
    std::vector<ObjectResult> rows;
    Summary cd, emd, fscore, mse, ssim, validity, seconds;
};

/// Objects run in parallel; rows follow input order. A failing object is
/// recorded with ok = false and does not stop the batch.
EvaluationTable evaluate(const std::vector<SceneDescriptor> &scenes, const EvaluationOptions &options);

/// Aligned plain-text table; CD is shown x1e3.
std::string format_table(const EvaluationTable &table);

struct SweepResult {
    std::vector<double> sigmas;
    std::vector<std::uint64_t> seeds;
    std::vector<std::vector<double>> validity; // [sigma][seed], mean over scenes
    std::vector<double> mean_validity;         // per sigma
};

/// Grasp-validity rate over a noise sweep. Each seed offsets every pipeline
/// seed; metrics and rendering are skipped.
SweepResult noise_sweep(const std::vector<SceneDescriptor> &scenes, const EvaluationOptions &options,
                        const std::vector<double> &sigmas, const std::vector<std::uint64_t> &seeds);

} // namespace splatgrasp
