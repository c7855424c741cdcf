#include "splatgrasp/pipeline.hpp"

#include "splatgrasp/errors.hpp"
#include "splatgrasp/kdtree.hpp"
#include "splatgrasp/parallel.hpp"
#include "splatgrasp/ply.hpp"
#include "splatgrasp/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace splatgrasp {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::size_t kOversample = 4;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

template <class F>
auto timed(std::vector<StageTiming> &timings, const char *stage, F &&f) {
    const auto start = Clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
        f();
        timings.push_back({stage, seconds_since(start)});
    } else {
        auto result = f();
        timings.push_back({stage, seconds_since(start)});
        return result;
    }
}

// One splitting round from n to m points.
DensifyResult densify_round(const PointCloud &cloud, std::size_t m, std::uint64_t seed) {
    const auto &pts = cloud.points();
    const std::size_t n = pts.size();
    const KdTree tree(pts);
    const std::size_t extra = m - n;

    // Point i spawns floor((i+1) extra / n) - floor(i extra / n) children, which
    // spreads the remainder evenly over the index range.
    std::vector<std::size_t> first(n + 1, n);
    for (std::size_t i = 0; i < n; ++i) first[i + 1] = n + (i + 1) * extra / n;

    std::vector<Point3> out(m);
    std::vector<std::size_t> parent(m);
    std::copy(pts.begin(), pts.end(), out.begin());
    std::iota(parent.begin(), parent.begin() + static_cast<std::ptrdiff_t>(n), std::size_t{0});

    parallel_for(n, [&](std::size_t i) {
        const std::size_t children = first[i + 1] - first[i];
        if (children == 0) return;
        const Point3 &p = pts[i];
        const auto nbs = tree.knn(p, std::min<std::size_t>(8, n));

        Point3 mean = Point3::Zero();
        for (const auto &nb : nbs) mean += pts[nb.index];
        mean /= static_cast<double>(nbs.size());
        Mat3 cov = Mat3::Zero();
        double spacing = 0.0;
        std::size_t others = 0;
        for (const auto &nb : nbs) {
            const Vec3 d = pts[nb.index] - mean;
            cov += d * d.transpose();
            if (nb.index != i) {
                spacing += std::sqrt(nb.distance2);
                ++others;
            }
        }
        spacing = others > 0 ? spacing / static_cast<double>(others) : 0.0;
        const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
        Vec3 t1 = eig.eigenvectors().col(2), t2 = eig.eigenvectors().col(1);
        if (!(eig.eigenvalues()(2) > 0.0)) spacing = 0.0;

        // Children spread over evenly spaced sectors of an annulus so they do
        // not pile up on the parent.
        Rng rng(mix_seed(seed, i));
        const double phase = 2.0 * std::numbers::pi * rng.uniform();
        for (std::size_t k = 0; k < children; ++k) {
            const double rho = 0.5 * spacing * std::sqrt(rng.uniform(0.25, 1.0));
            const double phi = phase + 2.0 * std::numbers::pi * (static_cast<double>(k) + rng.uniform()) / static_cast<double>(children);
            const std::size_t slot = first[i] + k;
            out[slot] = p + rho * (std::cos(phi) * t1 + std::sin(phi) * t2);
            parent[slot] = i;
        }
    });
    return {PointCloud(std::move(out)), std::move(parent)};
}

PointCloud with_segment_normals(const PointCloud &cloud, const std::vector<std::uint32_t> &labels, std::size_t k) {
    if (labels.empty()) return estimate_normals(cloud, k).cloud;
    std::map<std::uint32_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
    std::vector<Vec3> normals(cloud.size(), Vec3::UnitZ());
    for (const auto &[label, idx] : groups) {
        std::vector<Point3> sub;
        sub.reserve(idx.size());
        for (std::size_t i : idx) sub.push_back(cloud[i]);
        if (sub.size() < 3) continue;
        const PointCloud est = estimate_normals(PointCloud(std::move(sub)), k).cloud;
        for (std::size_t j = 0; j < idx.size(); ++j) normals[idx[j]] = est.normals()[j];
    }
    return PointCloud(cloud.points(), std::move(normals), cloud.colors());
}

} // namespace

OracleReconstructor::OracleReconstructor(SceneDescriptor scene, OracleOptions options)
    : mScene(std::move(scene)), mOptions(options) {
    mScene.validate();
    if (!(mOptions.noise_sigma >= 0.0)) throw std::invalid_argument("noise sigma must be non-negative");
    if (!(mOptions.dropout >= 0.0 && mOptions.dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
    if (!(mOptions.view_direction.norm() > 0.0)) throw std::invalid_argument("view direction must be nonzero");
}

Reconstruction OracleReconstructor::reconstruct(std::size_t points, std::uint64_t seed) const {
    if (points == 0) throw std::invalid_argument("oracle reconstructor needs a positive point count");
    const std::size_t drawn =
        static_cast<std::size_t>(std::ceil(static_cast<double>(points) / (1.0 - mOptions.dropout) - 1e-9));
    // Oversample, then keep an evenly spread subset by farthest-point sampling.
    const std::size_t wanted = std::max(drawn, points);
    const SceneSample raw = sample_scene(mScene, kOversample * wanted, mix_seed(seed, 0));
    SceneSample sample;
    {
        std::vector<std::size_t> idx = farthest_point_indices(raw.cloud.points(), wanted);
        std::sort(idx.begin(), idx.end());
        std::vector<Point3> p;
        for (std::size_t i : idx) {
            p.push_back(raw.cloud[i]);
            sample.labels.push_back(raw.labels[i]);
        }
        sample.cloud = PointCloud(std::move(p));
    }
    const auto &pts = sample.cloud.points();
    const Point3 center = sample.cloud.centroid();
    double radius = 0.0;
    for (const auto &p : pts) radius = std::max(radius, (p - center).norm());

    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const Vec3 view = mOptions.view_direction.normalized();
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return (pts[a] - center).dot(view) > (pts[b] - center).dot(view);
    });
    order.resize(points);
    std::sort(order.begin(), order.end());

    Rng rng(mix_seed(seed, 1));
    Reconstruction out;
    std::vector<Point3> kept;
    kept.reserve(points);
    for (std::size_t i : order) {
        Point3 p = pts[i];
        if (mOptions.noise_sigma > 0.0) {
            const Vec3 noise(rng.normal(), rng.normal(), rng.normal());
            p += mOptions.noise_sigma * radius * noise;
        }
        kept.push_back(p);
        out.labels.push_back(sample.labels[i]);
    }
    out.cloud = PointCloud(std::move(kept));
    return out;
}

Reconstruction FileReconstructor::reconstruct(std::size_t, std::uint64_t) const {
    return {read_point_cloud(mPath), {}};
}

void PipelineConfig::validate() const {
    if (coarse_points == 0 || coarse_points > dense_points)
        throw std::invalid_argument("coarse_points must be positive and at most dense_points");
    if (triplane_channels < 6 || triplane_height == 0 || triplane_width == 0)
        throw std::invalid_argument("triplane needs at least 6 channels and a positive resolution");
    if (!(triplane_padding >= 0.0)) throw std::invalid_argument("triplane padding must be non-negative");
    if (normal_neighbors < 3) throw std::invalid_argument("normal estimation needs at least 3 neighbors");
    if (!(mu > 0.0)) throw std::invalid_argument("friction coefficient must be positive");
    if (top_k == 0 || max_grasps == 0) throw std::invalid_argument("top_k and max_grasps must be positive");
    loss.validate();
    gripper.validate();
}

DensifyResult densify_traced(const PointCloud &cloud, std::size_t target, std::uint64_t seed) {
    if (cloud.empty()) throw std::invalid_argument("densify needs a nonempty cloud");
    const std::size_t n = cloud.size();
    if (target < n) throw std::invalid_argument("densify target is below the input size; use resample_cloud to downsample");
    DensifyResult identity{PointCloud(cloud.points()), std::vector<std::size_t>(n)};
    std::iota(identity.parent.begin(), identity.parent.end(), std::size_t{0});
    if (target == n) return identity;

    const double mid = std::round(std::sqrt(static_cast<double>(n) * static_cast<double>(target)));
    const std::size_t m1 = std::clamp(static_cast<std::size_t>(mid), n, target);
    DensifyResult first = m1 > n ? densify_round(identity.cloud, m1, mix_seed(seed, 1)) : identity;
    if (m1 == target) return first;
    DensifyResult second = densify_round(first.cloud, target, mix_seed(seed, 2));
    for (auto &p : second.parent) p = first.parent[p];
    return second;
}

PointCloud densify(const PointCloud &cloud, std::size_t target, std::uint64_t seed) {
    return densify_traced(cloud, target, seed).cloud;
}

GaussianBuild build_gaussians(const PointCloud &dense, const PipelineConfig &config) {
    const NormalizedCloud norm = normalize_cloud(dense);
    const Extent extent = padded_extent(norm.cloud, config.triplane_padding);
    Triplane tri = synthesize_triplane(norm.cloud, config.triplane_channels, config.triplane_height,
                                       config.triplane_width, extent);
    const DecoderWeights weights =
        DecoderWeights::make_default(tri.feature_size(), config.mapping, config.decoder_hidden, config.decoder_seed);
    GaussianSet set = decode_gaussians(weights, tri, norm.cloud.points());
    for (auto &s : set.splats) {
        s.position = s.position / norm.scale + norm.center;
        s.scale /= norm.scale;
    }
    return {std::move(tri), std::move(set), norm.scale, norm.center};
}

ReconstructionResult reconstruct(const Reconstructor &source, const PipelineConfig &config) {
    config.validate();
    std::vector<StageTiming> timings;
    const Reconstruction coarse =
        timed(timings, "reconstruct", [&] { return source.reconstruct(config.coarse_points, config.seeds.reconstruct); });
    if (!coarse.labels.empty() && coarse.labels.size() != coarse.cloud.size())
        throw std::invalid_argument("reconstructor labels do not match its cloud");

    std::vector<std::uint32_t> labels;
    const PointCloud dense = timed(timings, "densify", [&] {
        std::vector<std::size_t> parent;
        PointCloud out;
        if (coarse.cloud.size() > config.dense_points) {
            parent = farthest_point_indices(coarse.cloud.points(), config.dense_points);
            std::vector<Point3> pts;
            for (std::size_t i : parent) pts.push_back(coarse.cloud[i]);
            out = PointCloud(std::move(pts));
        } else {
            DensifyResult d = densify_traced(coarse.cloud.without_normals(), config.dense_points, config.seeds.densify);
            out = std::move(d.cloud);
            parent = std::move(d.parent);
        }
        if (!coarse.labels.empty())
            for (std::size_t p : parent) labels.push_back(coarse.labels[p]);
        return out;
    });

    const PointCloud withNormals =
        timed(timings, "normals", [&] { return with_segment_normals(dense, labels, config.normal_neighbors); });

    const auto start = Clock::now();
    GaussianBuild build = build_gaussians(withNormals, config);
    timings.push_back({"triplane_decode", seconds_since(start)});

    return {coarse.cloud,
            withNormals,
            std::move(labels),
            std::move(build.triplane),
            std::move(build.gaussians),
            build.scale,
            build.center,
            std::move(timings)};
}

void write_reconstruction(const std::filesystem::path &dir, const ReconstructionResult &result) {
    std::filesystem::create_directories(dir);
    write_point_cloud(dir / "coarse.ply", result.coarse);
    write_point_cloud(dir / "dense.ply", result.dense);
    write_triplane(dir / "triplane.json", dir / "triplane.bin", result.triplane);
    write_gaussians(dir / "gaussians.ply", result.gaussians);
}

std::vector<CameraModel> orbit_cameras(const Point3 &target, double radius, int count, int imageSize) {
    if (count <= 0 || imageSize <= 0 || !(radius > 0.0)) throw std::invalid_argument("invalid orbit camera request");
    std::vector<CameraModel> cams;
    const double elevation = std::numbers::pi / 6.0;
    const double distance = 3.0 * radius;
    const double focal = 1.1 * imageSize;
    for (int k = 0; k < count; ++k) {
        const double az = 2.0 * std::numbers::pi * k / count + std::numbers::pi / 4.0;
        const Vec3 dir(std::cos(elevation) * std::cos(az), std::cos(elevation) * std::sin(az), std::sin(elevation));
        cams.push_back(look_at_camera(target + distance * dir, target, Vec3::UnitZ(), focal, focal, imageSize, imageSize));
    }
    return cams;
}

GraspValidity grasp_validity(std::span<const Grasp> grasps, const PointCloud &groundTruth, const GripperModel &gripper,
                             double mu, double contactTolerance) {
    if (!groundTruth.has_normals()) throw std::invalid_argument("ground-truth surface needs normals");
    GraspValidity v;
    v.total = grasps.size();
    v.per_grasp.assign(grasps.size(), 0);
    if (grasps.empty()) return v;
    const KdTree tree(groundTruth.points());
    const double tol2 = contactTolerance * contactTolerance;
    parallel_for(grasps.size(), [&](std::size_t i) {
        const Grasp &g = grasps[i];
        const Point3 c1 = g.contact;
        const Point3 c2 = g.contact + std::max(0.0, g.width - 2.0 * gripper.contact_slack) * g.baseline.vec();
        const Neighbor n1 = tree.nearest(c1), n2 = tree.nearest(c2);
        if (n1.distance2 > tol2 || n2.distance2 > tol2) return;
        if ((c2 - c1).norm() < 1e-12) return;
        const double score =
            friction_cone_score(c1, c2, -groundTruth.normals()[n1.index], -groundTruth.normals()[n2.index], mu);
        if (!(score > 0.0)) return;
        if (!check_collision(g, gripper, groundTruth.points())) return;
        v.per_grasp[i] = 1;
    });
    v.valid = static_cast<std::size_t>(std::count(v.per_grasp.begin(), v.per_grasp.end(), 1));
    v.rate = static_cast<double>(v.valid) / static_cast<double>(v.total);
    return v;
}

Summary summarize(const std::vector<double> &values) {
    Summary s;
    s.count = values.size();
    if (values.empty()) return s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

namespace {

ObjectResult evaluate_one(const SceneDescriptor &scene, const EvaluationOptions &options) {
    ObjectResult row;
    row.name = scene.name;
    row.convex = is_convex_single(scene);
    const auto start = Clock::now();
    const PipelineConfig &cfg = options.pipeline;

    const OracleReconstructor source(scene, options.oracle);
    ReconstructionResult rec = reconstruct(source, cfg);
    row.timings = rec.timings;

    const SegmentMask mask =
        rec.dense_labels.empty() ? SegmentMask::all_target(rec.dense.size()) : target_mask(rec.dense_labels, scene.target);
    PlanOptions plan;
    plan.sampler.mu = cfg.mu;
    plan.sampler.max_grasps = cfg.max_grasps;
    plan.sampler.seed = cfg.seeds.grasp;
    plan.top_k = cfg.top_k;
    plan.filter_radius = cfg.filter_radius;
    const PlanResult planned = timed(row.timings, "grasp", [&] { return plan_grasps(rec.dense, mask, cfg.gripper, plan); });
    row.grasps = planned.grasps;
    row.grasp_count = planned.grasps.size();
    row.no_feasible_grasp = !planned.feasible;
    row.diagnostic = planned.diagnostic;

    const GraspValidity validity = timed(row.timings, "validity", [&] {
        const SceneSample surface = sample_scene(scene, options.validity_points, mix_seed(cfg.seeds.ground_truth, 1));
        return grasp_validity(planned.grasps, surface.cloud, cfg.gripper, cfg.mu, options.contact_tolerance);
    });
    row.valid_grasps = validity.valid;
    row.validity = validity.rate;

    if (options.metrics) {
        const SceneSample gt = sample_scene(scene, options.gt_points, mix_seed(cfg.seeds.ground_truth, 0));
        std::vector<Image> predViews, gtViews;
        if (options.render) {
            timed(row.timings, "render", [&] {
                const GaussianBuild gtBuild = build_gaussians(gt.cloud, cfg);
                const Point3 center = gt.cloud.centroid();
                double radius = 0.0;
                for (const auto &p : gt.cloud.points()) radius = std::max(radius, (p - center).norm());
                const Rgb background(1.0, 1.0, 1.0);
                for (const auto &cam : orbit_cameras(center, radius, options.views, options.image_size)) {
                    predViews.push_back(render(rec.gaussians, cam, background));
                    gtViews.push_back(render(gtBuild.gaussians, cam, background));
                }
            });
        }
        row.metrics = timed(row.timings, "metrics", [&] {
            LossConfig loss = cfg.loss;
            loss.emd.max_points = options.emd_points;
            const PointCloud pred = resample_cloud(normalize_cloud(rec.dense.without_normals()).cloud, 16384, 0);
            const PointCloud ref = resample_cloud(normalize_cloud(gt.cloud.without_normals()).cloud, 16384, 0);
            return composite_loss(loss, pred, ref, predViews, gtViews);
        });
        row.has_metrics = true;
    }
    row.total_seconds = seconds_since(start);
    return row;
}

} // namespace

EvaluationTable evaluate(const std::vector<SceneDescriptor> &scenes, const EvaluationOptions &options) {
    if (scenes.empty()) throw std::invalid_argument("evaluate needs at least one scene");
    options.pipeline.validate();
    EvaluationTable table;
    table.rows.resize(scenes.size());
    parallel_for(scenes.size(), [&](std::size_t i) {
        try {
            table.rows[i] = evaluate_one(scenes[i], options);
        } catch (const std::exception &e) {
            ObjectResult failed;
            failed.name = scenes[i].name;
            failed.ok = false;
            failed.error = e.what();
            table.rows[i] = std::move(failed);
        }
    });

    std::vector<double> cd, emd, fs, mseV, ssimV, valid, secs;
    for (const auto &r : table.rows) {
        if (!r.ok) continue;
        valid.push_back(r.validity);
        secs.push_back(r.total_seconds);
        if (r.has_metrics) {
            cd.push_back(r.metrics.cd);
            emd.push_back(r.metrics.emd);
            fs.push_back(r.metrics.fscore.fscore);
            if (r.metrics.mse) mseV.push_back(*r.metrics.mse);
            if (r.metrics.ssim) ssimV.push_back(*r.metrics.ssim);
        }
    }
    table.cd = summarize(cd);
    table.emd = summarize(emd);
    table.fscore = summarize(fs);
    table.mse = summarize(mseV);
    table.ssim = summarize(ssimV);
    table.validity = summarize(valid);
    table.seconds = summarize(secs);
    return table;
}

std::string format_table(const EvaluationTable &table) {
    std::ostringstream os;
    os << std::fixed;
    auto header = [&] {
        os << std::left << std::setw(16) << "object" << std::right << std::setw(12) << "CD(x1e3)" << std::setw(10)
           << "EMD" << std::setw(9) << "FS" << std::setw(10) << "MSE" << std::setw(9) << "SSIM" << std::setw(8)
           << "grasps" << std::setw(10) << "validity" << std::setw(10) << "time(s)" << "\n";
    };
    header();
    for (const auto &r : table.rows) {
        os << std::left << std::setw(16) << r.name << std::right;
        if (!r.ok) {
            os << "  failed: " << r.error << "\n";
            continue;
        }
        if (r.has_metrics) {
            os << std::setw(12) << std::setprecision(4) << r.metrics.cd * 1e3 << std::setw(10) << r.metrics.emd
               << std::setw(9) << r.metrics.fscore.fscore;
            if (r.metrics.mse)
                os << std::setw(10) << std::setprecision(5) << *r.metrics.mse << std::setw(9) << std::setprecision(4)
                   << *r.metrics.ssim;
            else
                os << std::setw(10) << "-" << std::setw(9) << "-";
        } else {
            os << std::setw(12) << "-" << std::setw(10) << "-" << std::setw(9) << "-" << std::setw(10) << "-"
               << std::setw(9) << "-";
        }
        os << std::setw(8) << r.grasp_count << std::setw(10) << std::setprecision(3) << r.validity << std::setw(10)
           << std::setprecision(2) << r.total_seconds;
        if (r.no_feasible_grasp) os << "  (no feasible grasp)";
        os << "\n";
    }
    auto pm = [&](const char *label, const Summary &s, int precision, double factor = 1.0) {
        os << "  " << std::left << std::setw(10) << label << std::right << std::setprecision(precision)
           << s.mean * factor << " +- " << s.stddev * factor << "\n";
    };
    os << "\nmean +- std over " << table.validity.count << " objects\n";
    pm("CD(x1e3)", table.cd, 4, 1e3);
    pm("EMD", table.emd, 4);
    pm("FS", table.fscore, 4);
    pm("MSE", table.mse, 5);
    pm("SSIM", table.ssim, 4);
    pm("validity", table.validity, 3);
    pm("time(s)", table.seconds, 2);
    return os.str();
}

SweepResult noise_sweep(const std::vector<SceneDescriptor> &scenes, const EvaluationOptions &options,
                        const std::vector<double> &sigmas, const std::vector<std::uint64_t> &seeds) {
    SweepResult out;
    out.sigmas = sigmas;
    out.seeds = seeds;
    for (double sigma : sigmas) {
        std::vector<double> perSeed;
        for (std::uint64_t seed : seeds) {
            EvaluationOptions o = options;
            o.metrics = false;
            o.render = false;
            o.oracle.noise_sigma = sigma;
            o.pipeline.seeds.reconstruct = mix_seed(options.pipeline.seeds.reconstruct, seed);
            o.pipeline.seeds.densify = mix_seed(options.pipeline.seeds.densify, seed);
            o.pipeline.seeds.grasp = mix_seed(options.pipeline.seeds.grasp, seed);
            const EvaluationTable t = evaluate(scenes, o);
            perSeed.push_back(t.validity.mean);
        }
        out.mean_validity.push_back(summarize(perSeed).mean);
        out.validity.push_back(std::move(perSeed));
    }
    return out;
}

} // namespace splatgrasp
