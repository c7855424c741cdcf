#include "splatgrasp/errors.hpp"
#include "splatgrasp/gaussians.hpp"
#include "splatgrasp/geometry.hpp"
#include "splatgrasp/grasping.hpp"
#include "splatgrasp/image_io.hpp"
#include "splatgrasp/losses.hpp"
#include "splatgrasp/parallel.hpp"
#include "splatgrasp/pipeline.hpp"
#include "splatgrasp/ply.hpp"
#include "splatgrasp/renderer.hpp"
#include "splatgrasp/serialization.hpp"
#include "splatgrasp/triplane.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace splatgrasp;

namespace {

constexpr int kExitBadArgs = 2;
constexpr int kExitParse = 3;
constexpr int kExitNumerical = 4;

class FeasibilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void report_error(int code, const char *kind, const std::string &message) {
    Json j{{"error", {{"code", code}, {"kind", kind}, {"message", message}}}};
    std::cerr << j.dump() << std::endl;
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

RunManifest make_manifest(const std::string &command, const Json &config) {
    RunManifest m;
    m.command = command;
    m.config_hash = hex64(fnv1a64(config.dump()));
    m.threads = thread_count();
    return m;
}

fs::path file_manifest_path(const fs::path &out) { return fs::path(out.string() + ".manifest.json"); }

EvaluationOptions load_options(const std::string &path) {
    EvaluationOptions o;
    if (path.empty()) return o;
    const Json j = read_json(path);
    if (j.contains("pipeline") || j.contains("oracle") || j.contains("evaluation")) return evaluation_options_from_json(j);
    o.pipeline = pipeline_config_from_json(j);
    return o;
}

// --- reconstruct -----------------------------------------------------------

struct ReconstructArgs {
    std::string scene, cloud, config, out;
    double noise = -1.0, dropout = -1.0;
};

void run_reconstruct(const ReconstructArgs &a) {
    Timer total;
    EvaluationOptions opts = load_options(a.config);
    if (a.noise >= 0.0) opts.oracle.noise_sigma = a.noise;
    if (a.dropout >= 0.0) opts.oracle.dropout = a.dropout;

    std::unique_ptr<Reconstructor> source;
    SceneDescriptor scene;
    if (!a.scene.empty()) {
        scene = scene_list_from_json(read_json(a.scene), fs::path(a.scene).parent_path()).front();
        source = std::make_unique<OracleReconstructor>(scene, opts.oracle);
    } else {
        source = std::make_unique<FileReconstructor>(a.cloud);
    }
    const ReconstructionResult rec = reconstruct(*source, opts.pipeline);

    const fs::path out(a.out);
    write_reconstruction(out, rec);
    RunManifest m = make_manifest("reconstruct", to_json(opts));
    if (!rec.dense_labels.empty()) {
        write_json(out / "mask.json", to_json(target_mask(rec.dense_labels, scene.target)));
        m.outputs["mask"] = (out / "mask.json").string();
    }
    m.seeds = {{"reconstruct", opts.pipeline.seeds.reconstruct}, {"densify", opts.pipeline.seeds.densify}};
    m.inputs[a.scene.empty() ? "cloud" : "scene"] = a.scene.empty() ? a.cloud : a.scene;
    for (const char *name : {"coarse.ply", "dense.ply", "triplane.json", "triplane.bin", "gaussians.ply"})
        m.outputs[name] = (out / name).string();
    for (const auto &t : rec.timings) m.timings[t.stage] = t.seconds;
    m.timings["total"] = total.seconds();
    write_json(out / "manifest.json", to_json(m));
}

// --- render ----------------------------------------------------------------

struct RenderArgs {
    std::string gaussians, camera, out;
    std::vector<double> background{1.0, 1.0, 1.0};
    bool reference = false;
};

void run_render(const RenderArgs &a) {
    Timer total;
    const GaussianSet set = read_gaussians(a.gaussians);
    const CameraModel cam = camera_from_json(read_json(a.camera));
    const Rgb bg(a.background[0], a.background[1], a.background[2]);
    const Image img = a.reference ? render_reference(set, cam, bg) : render(set, cam, bg);
    write_png(a.out, img);

    RunManifest m = make_manifest("render", {{"camera", to_json(cam)}, {"background", a.background}, {"reference", a.reference}});
    m.inputs = {{"gaussians", a.gaussians}, {"camera", a.camera}};
    m.outputs = {{"image", a.out}};
    m.timings["total"] = total.seconds();
    write_json(file_manifest_path(a.out), to_json(m));
}

// --- grasp -----------------------------------------------------------------

struct GraspArgs {
    std::string cloud, mask, gripper, out;
    double mu = 1.0;
    std::size_t top_k = 10;
    std::size_t max_grasps = 256;
    std::uint64_t seed = 0;
    double filter_radius = 0.005;
    std::size_t normal_neighbors = 16;
};

void run_grasp(const GraspArgs &a) {
    Timer total;
    PointCloud cloud = read_point_cloud(a.cloud);
    if (!cloud.has_normals()) cloud = estimate_normals(cloud, a.normal_neighbors).cloud;
    const SegmentMask mask = a.mask.empty() ? SegmentMask::all_target(cloud.size()) : mask_from_json(read_json(a.mask));
    if (mask.size() != cloud.size()) throw std::invalid_argument("mask length does not match the cloud");
    const GripperModel gripper = a.gripper.empty() ? GripperModel{} : gripper_from_json(read_json(a.gripper));

    PlanOptions opts;
    opts.sampler.mu = a.mu;
    opts.sampler.max_grasps = a.max_grasps;
    opts.sampler.seed = a.seed;
    opts.top_k = a.top_k;
    opts.filter_radius = a.filter_radius;
    const PlanResult plan = plan_grasps(cloud, mask, gripper, opts);
    write_json(a.out, to_json(plan, gripper));

    const Json config{{"gripper", to_json(gripper)}, {"mu", a.mu}, {"top_k", a.top_k}, {"max_grasps", a.max_grasps},
                      {"seed", a.seed}, {"filter_radius", a.filter_radius}};
    RunManifest m = make_manifest("grasp", config);
    m.seeds = {{"grasp", a.seed}};
    m.inputs = {{"cloud", a.cloud}};
    if (!a.mask.empty()) m.inputs["mask"] = a.mask;
    if (!a.gripper.empty()) m.inputs["gripper"] = a.gripper;
    m.outputs = {{"grasps", a.out}};
    m.timings["total"] = total.seconds();
    write_json(file_manifest_path(a.out), to_json(m));
    if (!plan.feasible) throw FeasibilityError(plan.diagnostic);
}

// --- metrics ---------------------------------------------------------------

struct MetricsArgs {
    std::string pred, gt, out;
    std::vector<std::string> images;
    double threshold = 0.02;
    std::size_t points = 16384;
    std::size_t emd_points = 1024;
};

std::vector<fs::path> png_files(const fs::path &dir) {
    std::vector<fs::path> files;
    for (const auto &e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path().filename());
    std::sort(files.begin(), files.end());
    return files;
}

void run_metrics(const MetricsArgs &a) {
    Timer total;
    LossConfig loss;
    loss.fscore_threshold = a.threshold;
    loss.emd.max_points = a.emd_points;
    const PointCloud pred = resample_cloud(normalize_cloud(read_point_cloud(a.pred).without_normals()).cloud, a.points, 0);
    const PointCloud gt = resample_cloud(normalize_cloud(read_point_cloud(a.gt).without_normals()).cloud, a.points, 0);

    std::vector<Image> predViews, gtViews;
    if (!a.images.empty()) {
        if (a.images.size() != 2) throw std::invalid_argument("--images takes two directories");
        const auto names = png_files(a.images[0]);
        for (const auto &name : names) {
            const fs::path other = fs::path(a.images[1]) / name;
            if (!fs::exists(other)) throw std::invalid_argument("missing " + other.string());
            predViews.push_back(read_png(fs::path(a.images[0]) / name));
            gtViews.push_back(read_png(other));
        }
    }
    const MetricReport report = composite_loss(loss, pred, gt, predViews, gtViews);
    write_json(a.out, to_json(report));

    RunManifest m = make_manifest("metrics", {{"threshold", a.threshold}, {"points", a.points}, {"emd_points", a.emd_points}});
    m.inputs = {{"pred", a.pred}, {"gt", a.gt}};
    if (!a.images.empty()) {
        m.inputs["images_pred"] = a.images[0];
        m.inputs["images_gt"] = a.images[1];
    }
    m.outputs = {{"report", a.out}};
    m.timings["total"] = total.seconds();
    write_json(file_manifest_path(a.out), to_json(m));
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
    std::string scenes, config, out;
    bool sweep = false;
    std::vector<double> sigmas{0.0, 0.005, 0.01, 0.02};
    std::size_t sweep_seeds = 5;
};

void run_eval(const EvalArgs &a) {
    Timer total;
    const EvaluationOptions opts = load_options(a.config);
    const std::vector<SceneDescriptor> scenes = scene_list_from_json(read_json(a.scenes), fs::path(a.scenes).parent_path());
    const fs::path out(a.out);
    fs::create_directories(out);

    Timer evalTimer;
    const EvaluationTable table = evaluate(scenes, opts);
    const double evalSeconds = evalTimer.seconds();
    write_json(out / "results.json", evaluation_results_json(table, opts.pipeline.gripper));
    write_json(out / "timings.json", evaluation_timings_json(table));
    {
        std::ofstream txt(out / "table.txt");
        txt << format_table(table);
    }

    Json config = to_json(opts);
    RunManifest m;
    if (a.sweep) {
        std::vector<std::uint64_t> seeds(a.sweep_seeds);
        for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = i;
        Timer sweepTimer;
        const SweepResult sweep = noise_sweep(scenes, opts, a.sigmas, seeds);
        write_json(out / "sweep.json", to_json(sweep));
        config["sweep"] = {{"sigmas", a.sigmas}, {"seeds", a.sweep_seeds}};
        m = make_manifest("eval", config);
        m.outputs["sweep"] = (out / "sweep.json").string();
        m.timings["sweep"] = sweepTimer.seconds();
    } else {
        m = make_manifest("eval", config);
    }
    m.seeds = {{"reconstruct", opts.pipeline.seeds.reconstruct},
               {"densify", opts.pipeline.seeds.densify},
               {"grasp", opts.pipeline.seeds.grasp},
               {"ground_truth", opts.pipeline.seeds.ground_truth}};
    m.inputs = {{"scenes", a.scenes}};
    if (!a.config.empty()) m.inputs["config"] = a.config;
    m.outputs["results"] = (out / "results.json").string();
    m.outputs["timings"] = (out / "timings.json").string();
    m.outputs["table"] = (out / "table.txt").string();
    m.timings["evaluate"] = evalSeconds;
    m.timings["total"] = total.seconds();
    write_json(out / "manifest.json", to_json(m));
    std::cout << format_table(table);
}

// --- query -----------------------------------------------------------------

struct QueryArgs {
    std::string triplane, points, out;
};

void run_query(const QueryArgs &a) {
    Timer total;
    const Triplane tri = read_triplane(a.triplane);
    const PointCloud pts = read_point_cloud(a.points);
    const auto feats = query_batch(tri, pts.points());
    std::ofstream out(a.out, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + a.out);
    for (const auto &f : feats)
        for (double v : f) {
            const float x = static_cast<float>(v);
            out.write(reinterpret_cast<const char *>(&x), sizeof x);
        }
    out.close();

    RunManifest m = make_manifest("query", {{"points", pts.size()}, {"feature_size", tri.feature_size()}});
    m.inputs = {{"triplane", a.triplane}, {"points", a.points}};
    m.outputs = {{"features", a.out}};
    m.timings["total"] = total.seconds();
    Json j = to_json(m);
    j["layout"] = {{"rows", pts.size()}, {"cols", tri.feature_size()}, {"dtype", "float32_le"}, {"order", "row-major, XY|XZ|YZ channels"}};
    write_json(file_manifest_path(a.out), j);
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"splatgrasp: point cloud to Gaussian splats to parallel-jaw grasps"};
    app.require_subcommand(1);
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    app.add_option("--threads", threads, "Worker threads for internal parallel loops (results do not depend on it)")
        ->check(CLI::PositiveNumber);

    ReconstructArgs rec;
    auto *cRec = app.add_subcommand("reconstruct", "Scene or cloud -> coarse/dense clouds, triplane, Gaussians");
    auto *optScene = cRec->add_option("--scene", rec.scene, "Scene descriptor JSON (oracle reconstructor)")->check(CLI::ExistingFile);
    auto *optCloud = cRec->add_option("--cloud", rec.cloud, "Coarse cloud PLY (file reconstructor)")->check(CLI::ExistingFile);
    optScene->excludes(optCloud);
    cRec->add_option("--config", rec.config, "Pipeline or evaluation config JSON")->check(CLI::ExistingFile);
    cRec->add_option("--noise", rec.noise, "Oracle noise sigma in scene-radius units (overrides config)");
    cRec->add_option("--dropout", rec.dropout, "Oracle far-side dropout fraction (overrides config)");
    cRec->add_option("--out", rec.out, "Output directory")->required();

    RenderArgs ren;
    auto *cRen = app.add_subcommand("render", "Render a Gaussian PLY to PNG");
    cRen->add_option("--gaussians", ren.gaussians, "Gaussian PLY")->required()->check(CLI::ExistingFile);
    cRen->add_option("--camera", ren.camera, "Camera JSON")->required()->check(CLI::ExistingFile);
    cRen->add_option("--background", ren.background, "Background RGB in [0,1]")->expected(3);
    cRen->add_flag("--reference", ren.reference, "Use the untiled reference compositor");
    cRen->add_option("--out", ren.out, "Output PNG")->required();

    GraspArgs gr;
    auto *cGr = app.add_subcommand("grasp", "Plan parallel-jaw grasps on a cloud");
    cGr->add_option("--cloud", gr.cloud, "Scene cloud PLY (normals estimated when absent)")->required()->check(CLI::ExistingFile);
    cGr->add_option("--mask", gr.mask, "Segment mask JSON (default: every point is target)")->check(CLI::ExistingFile);
    cGr->add_option("--gripper", gr.gripper, "Gripper model JSON")->check(CLI::ExistingFile);
    cGr->add_option("--mu", gr.mu, "Friction coefficient")->check(CLI::PositiveNumber);
    cGr->add_option("--top-k", gr.top_k, "Number of ranked grasps to keep")->check(CLI::PositiveNumber);
    cGr->add_option("--max-grasps", gr.max_grasps, "Antipodal candidates to sample")->check(CLI::PositiveNumber);
    cGr->add_option("--seed", gr.seed, "Sampling seed");
    cGr->add_option("--filter-radius", gr.filter_radius, "Contact-to-segment radius in meters");
    cGr->add_option("--out", gr.out, "Output grasps JSON")->required();

    MetricsArgs me;
    auto *cMe = app.add_subcommand("metrics", "CD / EMD / F-score (and image metrics) between two clouds");
    cMe->add_option("--pred", me.pred, "Predicted cloud PLY")->required()->check(CLI::ExistingFile);
    cMe->add_option("--gt", me.gt, "Reference cloud PLY")->required()->check(CLI::ExistingFile);
    cMe->add_option("--images", me.images, "Predicted and reference PNG directories (matched by file name)")
        ->expected(2)
        ->check(CLI::ExistingDirectory);
    cMe->add_option("--threshold", me.threshold, "F-score distance threshold (normalized units)");
    cMe->add_option("--points", me.points, "Resample both clouds to this size")->check(CLI::PositiveNumber);
    cMe->add_option("--emd-points", me.emd_points, "Farthest-point subsample size for EMD (0 = all)");
    cMe->add_option("--out", me.out, "Output report JSON")->required();

    EvalArgs ev;
    auto *cEv = app.add_subcommand("eval", "Desk-scale evaluation over synthetic scenes");
    cEv->add_option("--scenes", ev.scenes, "Scene list JSON")->required()->check(CLI::ExistingFile);
    cEv->add_option("--config", ev.config, "Evaluation config JSON")->check(CLI::ExistingFile);
    cEv->add_flag("--sweep", ev.sweep, "Also run the grasp-validity noise sweep");
    cEv->add_option("--sigmas", ev.sigmas, "Noise levels for --sweep");
    cEv->add_option("--sweep-seeds", ev.sweep_seeds, "Seeds per noise level for --sweep")->check(CLI::PositiveNumber);
    cEv->add_option("--out", ev.out, "Output directory")->required();

    QueryArgs qu;
    auto *cQu = app.add_subcommand("query", "Debug: triplane features at cloud points");
    cQu->add_option("--triplane", qu.triplane, "Triplane header JSON")->required()->check(CLI::ExistingFile);
    cQu->add_option("--points", qu.points, "Query points PLY")->required()->check(CLI::ExistingFile);
    cQu->add_option("--out", qu.out, "Output float32 features")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        report_error(kExitBadArgs, "bad_arguments", e.what());
        return kExitBadArgs;
    }
    if (cRec->parsed() && rec.scene.empty() && rec.cloud.empty()) {
        report_error(kExitBadArgs, "bad_arguments", "reconstruct needs --scene or --cloud");
        return kExitBadArgs;
    }

    set_thread_count(threads);
    try {
        if (cRec->parsed()) run_reconstruct(rec);
        else if (cRen->parsed()) run_render(ren);
        else if (cGr->parsed()) run_grasp(gr);
        else if (cMe->parsed()) run_metrics(me);
        else if (cEv->parsed()) run_eval(ev);
        else if (cQu->parsed()) run_query(qu);
    } catch (const ParseError &e) {
        report_error(kExitParse, "parse_error", e.what());
        return kExitParse;
    } catch (const NumericalError &e) {
        report_error(kExitNumerical, "numerical_error", e.what());
        return kExitNumerical;
    } catch (const FeasibilityError &e) {
        report_error(kExitNumerical, "infeasible", e.what());
        return kExitNumerical;
    } catch (const std::invalid_argument &e) {
        report_error(kExitBadArgs, "bad_arguments", e.what());
        return kExitBadArgs;
    } catch (const std::exception &e) {
        report_error(1, "runtime_error", e.what());
        return 1;
    }
    return 0;
}
