#include "splatgrasp/serialization.hpp"

#include "splatgrasp/errors.hpp"

#include <Eigen/Core>

#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>

namespace splatgrasp {

namespace {

Json vec_json(const Vec3 &v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const Json &j, const char *what) {
    if (!j.is_array() || j.size() != 3) throw ParseError(std::string(what) + " must be an array of 3 numbers");
    Vec3 v;
    for (int k = 0; k < 3; ++k) {
        if (!j[static_cast<std::size_t>(k)].is_number()) throw ParseError(std::string(what) + " must hold numbers");
        v[k] = j[static_cast<std::size_t>(k)].get<double>();
    }
    return v;
}

Json mat4_json(const Mat4 &m) {
    Json out = Json::array();
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) out.push_back(m(r, c));
    return out;
}

Mat4 mat4_from(const Json &j, const char *what) {
    if (!j.is_array() || j.size() != 16) throw ParseError(std::string(what) + " must be 16 numbers (row-major 4x4)");
    Mat4 m;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) m(r, c) = j[static_cast<std::size_t>(4 * r + c)].get<double>();
    return m;
}

const Json &require(const Json &j, const char *key) {
    if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("missing key '") + key + "'");
    return j.at(key);
}

// Applies `handlers[key]` to every member of `j`; unknown keys are errors.
void visit_keys(const Json &j, const char *what, const std::map<std::string, std::function<void(const Json &)>> &handlers) {
    if (!j.is_object()) throw ParseError(std::string(what) + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto h = handlers.find(it.key());
        if (h == handlers.end()) throw ParseError(std::string("unknown key '") + it.key() + "' in " + what);
        h->second(it.value());
    }
}

template <class F>
auto guarded(F &&f) {
    try {
        return f();
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(e.what());
    } catch (const std::invalid_argument &e) {
        throw ParseError(e.what());
    }
}

double num(const Json &j) {
    if (!j.is_number()) throw ParseError("expected a number");
    return j.get<double>();
}

std::size_t count(const Json &j) {
    if (!j.is_number_integer() || (!j.is_number_unsigned() && j.get<std::int64_t>() < 0))
        throw ParseError("expected a non-negative integer");
    return j.get<std::size_t>();
}

Json timings_json(const std::vector<StageTiming> &t) {
    Json out = Json::object();
    for (const auto &s : t) out[s.stage] = s.seconds;
    return out;
}

Json summary_json(const Summary &s) { return {{"mean", s.mean}, {"std", s.stddev}, {"count", s.count}}; }

} // namespace

Json read_json(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path &path, const Json &j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

Json to_json(const Primitive &p) {
    Json j;
    j["type"] = primitive_kind_name(p.kind);
    switch (p.kind) {
    case PrimitiveKind::Sphere: j["radius"] = p.dims.x(); break;
    case PrimitiveKind::Box: j["size"] = vec_json(p.dims); break;
    case PrimitiveKind::Cylinder:
        j["radius"] = p.dims.x();
        j["height"] = p.dims.z();
        break;
    case PrimitiveKind::Superellipsoid:
        j["semi_axes"] = vec_json(p.dims);
        j["exponents"] = Json::array({p.exponents.x(), p.exponents.y()});
        break;
    }
    j["position"] = vec_json(p.pose.translation());
    const auto q = p.pose.rotation().wxyz();
    j["rotation_wxyz"] = Json::array({q[0], q[1], q[2], q[3]});
    return j;
}

Primitive primitive_from_json(const Json &j) {
    return guarded([&] {
        Primitive p;
        p.kind = primitive_kind_from_name(require(j, "type").get<std::string>());
        switch (p.kind) {
        case PrimitiveKind::Sphere: p.dims = Vec3::Constant(num(require(j, "radius"))); break;
        case PrimitiveKind::Box: p.dims = vec_from(require(j, "size"), "size"); break;
        case PrimitiveKind::Cylinder: {
            const double r = num(require(j, "radius"));
            p.dims = Vec3(r, r, num(require(j, "height")));
            break;
        }
        case PrimitiveKind::Superellipsoid: {
            p.dims = vec_from(require(j, "semi_axes"), "semi_axes");
            const Json &e = require(j, "exponents");
            if (!e.is_array() || e.size() != 2) throw ParseError("exponents must be [e1, e2]");
            p.exponents = Eigen::Vector2d(num(e[0]), num(e[1]));
            break;
        }
        }
        Vec3 t = Vec3::Zero();
        if (j.contains("position")) t = vec_from(j["position"], "position");
        Rotation r;
        if (j.contains("rotation_wxyz")) {
            const Json &q = j["rotation_wxyz"];
            if (!q.is_array() || q.size() != 4) throw ParseError("rotation_wxyz must be 4 numbers");
            r = Rotation::from_wxyz(num(q[0]), num(q[1]), num(q[2]), num(q[3]));
        }
        p.pose = RigidTransform(r, t);
        p.validate();
        return p;
    });
}

Json to_json(const SceneDescriptor &scene) {
    Json prims = Json::array();
    for (const auto &p : scene.primitives) prims.push_back(to_json(p));
    return {{"name", scene.name}, {"table_height", scene.table_height}, {"target", scene.target}, {"primitives", prims}};
}

SceneDescriptor scene_from_json(const Json &j) {
    return guarded([&] {
        SceneDescriptor s;
        s.name = j.value("name", std::string("scene"));
        s.table_height = j.contains("table_height") ? num(j["table_height"]) : 0.0;
        s.target = j.contains("target") ? count(j["target"]) : 0;
        const Json &prims = require(j, "primitives");
        if (!prims.is_array()) throw ParseError("primitives must be an array");
        for (const auto &p : prims) s.primitives.push_back(primitive_from_json(p));
        try {
            s.validate();
        } catch (const std::invalid_argument &e) {
            throw ParseError(e.what());
        }
        return s;
    });
}

std::vector<SceneDescriptor> scene_list_from_json(const Json &j, const std::filesystem::path &baseDir) {
    const Json *list = &j;
    if (j.is_object() && j.contains("scenes")) list = &j.at("scenes");
    else if (j.is_object()) return {scene_from_json(j)};
    if (!list->is_array()) throw ParseError("scene list must be an array");
    std::vector<SceneDescriptor> out;
    for (const auto &entry : *list) {
        if (entry.is_string()) {
            const auto path = baseDir / entry.get<std::string>();
            auto more = scene_list_from_json(read_json(path), path.parent_path());
            out.insert(out.end(), more.begin(), more.end());
        } else {
            out.push_back(scene_from_json(entry));
        }
    }
    if (out.empty()) throw ParseError("scene list is empty");
    return out;
}

Json to_json(const GripperModel &g) {
    return {{"max_width", g.max_width},         {"depth", g.depth},
            {"finger_length", g.finger_length}, {"finger_thickness", g.finger_thickness},
            {"palm_width", g.palm_width},       {"contact_slack", g.contact_slack}};
}

GripperModel gripper_from_json(const Json &j) {
    return guarded([&] {
        GripperModel g;
        visit_keys(j, "gripper",
                   {{"max_width", [&](const Json &v) { g.max_width = num(v); }},
                    {"depth", [&](const Json &v) { g.depth = num(v); }},
                    {"finger_length", [&](const Json &v) { g.finger_length = num(v); }},
                    {"finger_thickness", [&](const Json &v) { g.finger_thickness = num(v); }},
                    {"palm_width", [&](const Json &v) { g.palm_width = num(v); }},
                    {"contact_slack", [&](const Json &v) { g.contact_slack = num(v); }}});
        try {
            g.validate();
        } catch (const std::invalid_argument &e) {
            throw ParseError(e.what());
        }
        return g;
    });
}

Json to_json(const Grasp &g, const GripperModel &gripper) {
    return {{"contact", vec_json(g.contact)},
            {"baseline", vec_json(g.baseline.vec())},
            {"approach", vec_json(g.approach.vec())},
            {"width_m", g.width},
            {"depth_m", g.depth},
            {"score", g.score},
            {"pose_4x4_row_major", mat4_json(grasp_pose(g, gripper).matrix())}};
}

Grasp grasp_from_json(const Json &j) {
    return guarded([&] {
        return Grasp::make(vec_from(require(j, "contact"), "contact"), vec_from(require(j, "baseline"), "baseline"),
                           vec_from(require(j, "approach"), "approach"), num(require(j, "width_m")),
                           num(require(j, "depth_m")), num(require(j, "score")));
    });
}

Json to_json(const PlanResult &plan, const GripperModel &gripper) {
    Json grasps = Json::array();
    for (const auto &g : plan.grasps) grasps.push_back(to_json(g, gripper));
    Json j{{"grasps", grasps},
           {"sampled", plan.sampled},
           {"after_filter", plan.after_filter},
           {"after_collision", plan.after_collision},
           {"feasible", plan.feasible}};
    if (!plan.feasible) j["diagnostic"] = plan.diagnostic;
    return j;
}

Json to_json(const CameraModel &cam) {
    return {{"fx", cam.fx},         {"fy", cam.fy},         {"cx", cam.cx}, {"cy", cam.cy}, {"width", cam.width},
            {"height", cam.height}, {"world_to_camera_4x4_row_major", mat4_json(cam.extrinsic.matrix())}};
}

CameraModel camera_from_json(const Json &j) {
    return guarded([&] {
        CameraModel cam;
        cam.fx = num(require(j, "fx"));
        cam.fy = num(require(j, "fy"));
        cam.width = require(j, "width").get<int>();
        cam.height = require(j, "height").get<int>();
        cam.cx = j.contains("cx") ? num(j["cx"]) : 0.5 * (cam.width - 1);
        cam.cy = j.contains("cy") ? num(j["cy"]) : 0.5 * (cam.height - 1);
        if (j.contains("world_to_camera_4x4_row_major"))
            cam.extrinsic = RigidTransform::from_matrix(mat4_from(j["world_to_camera_4x4_row_major"], "world_to_camera_4x4_row_major"));
        else if (j.contains("eye")) {
            const Vec3 up = j.contains("up") ? vec_from(j["up"], "up") : Vec3::UnitZ();
            cam = look_at_camera(vec_from(j["eye"], "eye"), vec_from(require(j, "target"), "target"), up, cam.fx, cam.fy,
                                 cam.width, cam.height);
        }
        try {
            cam.validate();
        } catch (const std::invalid_argument &e) {
            throw ParseError(e.what());
        }
        return cam;
    });
}

SegmentMask mask_from_json(const Json &j) {
    return guarded([&] {
        SegmentMask m;
        if (j.contains("target")) {
            for (const auto &v : require(j, "target")) {
                if (v.is_boolean()) m.target.push_back(v.get<bool>() ? 1 : 0);
                else m.target.push_back(count(v) != 0 ? 1 : 0);
            }
            return m;
        }
        const Json &labels = require(j, "labels");
        const std::size_t target = count(require(j, "target_label"));
        for (const auto &v : labels) m.target.push_back(count(v) == target ? 1 : 0);
        return m;
    });
}

Json to_json(const SegmentMask &mask) {
    Json t = Json::array();
    for (auto v : mask.target) t.push_back(static_cast<int>(v));
    return {{"target", t}};
}

Json to_json(const MetricReport &r) {
    Json j{{"cd", r.cd},
           {"cd_x1e3", r.cd * 1e3},
           {"emd", r.emd},
           {"emd_lower_bound", r.emd_lower_bound},
           {"emd_gap", r.emd_gap},
           {"emd_exact", r.emd_exact},
           {"emd_points", r.emd_points},
           {"fscore", r.fscore.fscore},
           {"precision", r.fscore.precision},
           {"recall", r.fscore.recall},
           {"fscore_threshold", r.fscore_threshold}};
    j["mse"] = r.mse ? Json(*r.mse) : Json(nullptr);
    j["ssim"] = r.ssim ? Json(*r.ssim) : Json(nullptr);
    j["lpips_enabled"] = r.lpips_enabled;
    Json views = Json::array();
    for (const auto &v : r.views) views.push_back({{"mse", v.mse}, {"ssim", v.ssim}, {"lpips", v.lpips}, {"loss", v.loss}});
    j["views"] = views;
    j["geometry_loss"] = r.geometry_loss;
    j["render_loss"] = r.render_loss;
    j["total"] = r.total;
    j["weights"] = {{"lambda_cd", r.lambda_cd},
                    {"lambda_emd", r.lambda_emd},
                    {"lambda_ssim", r.lambda_ssim},
                    {"lambda_lpips", r.lambda_lpips}};
    return j;
}

Json to_json(const PipelineConfig &c) {
    Json hidden = Json::array();
    for (auto h : c.decoder_hidden) hidden.push_back(h);
    return {{"coarse_points", c.coarse_points},
            {"dense_points", c.dense_points},
            {"triplane", {{"channels", c.triplane_channels}, {"height", c.triplane_height}, {"width", c.triplane_width}, {"padding", c.triplane_padding}}},
            {"normal_neighbors", c.normal_neighbors},
            {"decoder", {{"hidden", hidden}, {"seed", c.decoder_seed}, {"max_offset", c.mapping.max_offset}, {"max_scale", c.mapping.max_scale}, {"sh_degree", c.mapping.sh_degree}}},
            {"loss",
             {{"lambda_cd", c.loss.lambda_cd},
              {"lambda_emd", c.loss.lambda_emd},
              {"lambda_ssim", c.loss.lambda_ssim},
              {"lambda_lpips", c.loss.lambda_lpips},
              {"fscore_threshold", c.loss.fscore_threshold},
              {"emd_exact_limit", c.loss.emd.exact_limit},
              {"emd_target_gap", c.loss.emd.target_gap}}},
            {"gripper", to_json(c.gripper)},
            {"mu", c.mu},
            {"top_k", c.top_k},
            {"max_grasps", c.max_grasps},
            {"filter_radius", c.filter_radius},
            {"seeds",
             {{"reconstruct", c.seeds.reconstruct},
              {"densify", c.seeds.densify},
              {"grasp", c.seeds.grasp},
              {"ground_truth", c.seeds.ground_truth}}}};
}

PipelineConfig pipeline_config_from_json(const Json &j) {
    return guarded([&] {
        PipelineConfig c;
        auto u64 = [](const Json &v) {
            if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
                throw ParseError("seeds must be non-negative integers");
            return v.get<std::uint64_t>();
        };
        visit_keys(
            j, "pipeline config",
            {{"coarse_points", [&](const Json &v) { c.coarse_points = count(v); }},
             {"dense_points", [&](const Json &v) { c.dense_points = count(v); }},
             {"triplane",
              [&](const Json &t) {
                  visit_keys(t, "triplane",
                             {{"channels", [&](const Json &v) { c.triplane_channels = count(v); }},
                              {"height", [&](const Json &v) { c.triplane_height = count(v); }},
                              {"width", [&](const Json &v) { c.triplane_width = count(v); }},
                              {"padding", [&](const Json &v) { c.triplane_padding = num(v); }}});
              }},
             {"normal_neighbors", [&](const Json &v) { c.normal_neighbors = count(v); }},
             {"decoder",
              [&](const Json &d) {
                  visit_keys(d, "decoder",
                             {{"hidden",
                               [&](const Json &v) {
                                   c.decoder_hidden.clear();
                                   for (const auto &h : v) c.decoder_hidden.push_back(count(h));
                               }},
                              {"seed", [&](const Json &v) { c.decoder_seed = u64(v); }},
                              {"max_offset", [&](const Json &v) { c.mapping.max_offset = num(v); }},
                              {"max_scale", [&](const Json &v) { c.mapping.max_scale = num(v); }},
                              {"sh_degree", [&](const Json &v) { c.mapping.sh_degree = v.get<int>(); }}});
              }},
             {"loss",
              [&](const Json &l) {
                  visit_keys(l, "loss",
                             {{"lambda_cd", [&](const Json &v) { c.loss.lambda_cd = num(v); }},
                              {"lambda_emd", [&](const Json &v) { c.loss.lambda_emd = num(v); }},
                              {"lambda_ssim", [&](const Json &v) { c.loss.lambda_ssim = num(v); }},
                              {"lambda_lpips", [&](const Json &v) { c.loss.lambda_lpips = num(v); }},
                              {"fscore_threshold", [&](const Json &v) { c.loss.fscore_threshold = num(v); }},
                              {"emd_exact_limit", [&](const Json &v) { c.loss.emd.exact_limit = count(v); }},
                              {"emd_target_gap", [&](const Json &v) { c.loss.emd.target_gap = num(v); }}});
              }},
             {"gripper", [&](const Json &v) { c.gripper = gripper_from_json(v); }},
             {"mu", [&](const Json &v) { c.mu = num(v); }},
             {"top_k", [&](const Json &v) { c.top_k = count(v); }},
             {"max_grasps", [&](const Json &v) { c.max_grasps = count(v); }},
             {"filter_radius", [&](const Json &v) { c.filter_radius = num(v); }},
             {"seeds", [&](const Json &s) {
                  visit_keys(s, "seeds",
                             {{"reconstruct", [&](const Json &v) { c.seeds.reconstruct = u64(v); }},
                              {"densify", [&](const Json &v) { c.seeds.densify = u64(v); }},
                              {"grasp", [&](const Json &v) { c.seeds.grasp = u64(v); }},
                              {"ground_truth", [&](const Json &v) { c.seeds.ground_truth = u64(v); }}});
              }}});
        try {
            c.validate();
        } catch (const std::invalid_argument &e) {
            throw ParseError(e.what());
        }
        return c;
    });
}

Json to_json(const OracleOptions &o) {
    return {{"noise_sigma", o.noise_sigma}, {"dropout", o.dropout}, {"view_direction", vec_json(o.view_direction)}};
}

OracleOptions oracle_options_from_json(const Json &j) {
    return guarded([&] {
        OracleOptions o;
        visit_keys(j, "oracle",
                   {{"noise_sigma", [&](const Json &v) { o.noise_sigma = num(v); }},
                    {"dropout", [&](const Json &v) { o.dropout = num(v); }},
                    {"view_direction", [&](const Json &v) { o.view_direction = vec_from(v, "view_direction"); }}});
        return o;
    });
}

EvaluationOptions evaluation_options_from_json(const Json &j) {
    return guarded([&] {
        EvaluationOptions o;
        visit_keys(
            j, "config",
            {{"pipeline", [&](const Json &v) { o.pipeline = pipeline_config_from_json(v); }},
             {"oracle", [&](const Json &v) { o.oracle = oracle_options_from_json(v); }},
             {"evaluation", [&](const Json &e) {
                  visit_keys(e, "evaluation",
                             {{"metrics", [&](const Json &v) { o.metrics = v.get<bool>(); }},
                              {"render", [&](const Json &v) { o.render = v.get<bool>(); }},
                              {"views", [&](const Json &v) { o.views = v.get<int>(); }},
                              {"image_size", [&](const Json &v) { o.image_size = v.get<int>(); }},
                              {"gt_points", [&](const Json &v) { o.gt_points = count(v); }},
                              {"validity_points", [&](const Json &v) { o.validity_points = count(v); }},
                              {"emd_points", [&](const Json &v) { o.emd_points = count(v); }},
                              {"contact_tolerance", [&](const Json &v) { o.contact_tolerance = num(v); }}});
              }}});
        if (o.views < 0 || o.image_size <= 0) throw ParseError("views must be >= 0 and image_size > 0");
        return o;
    });
}

Json to_json(const EvaluationOptions &o) {
    return {{"pipeline", to_json(o.pipeline)},
            {"oracle", to_json(o.oracle)},
            {"evaluation",
             {{"metrics", o.metrics},
              {"render", o.render},
              {"views", o.views},
              {"image_size", o.image_size},
              {"gt_points", o.gt_points},
              {"validity_points", o.validity_points},
              {"emd_points", o.emd_points},
              {"contact_tolerance", o.contact_tolerance}}}};
}

Json evaluation_results_json(const EvaluationTable &table, const GripperModel &gripper) {
    Json rows = Json::array();
    for (const auto &r : table.rows) {
        Json row{{"name", r.name}, {"ok", r.ok}};
        if (!r.ok) {
            row["error"] = r.error;
            rows.push_back(row);
            continue;
        }
        row["convex"] = r.convex;
        row["metrics"] = r.has_metrics ? to_json(r.metrics) : Json(nullptr);
        row["grasp_count"] = r.grasp_count;
        row["valid_grasps"] = r.valid_grasps;
        row["validity"] = r.validity;
        row["no_feasible_grasp"] = r.no_feasible_grasp;
        if (r.no_feasible_grasp) row["diagnostic"] = r.diagnostic;
        Json grasps = Json::array();
        for (const auto &g : r.grasps) grasps.push_back(to_json(g, gripper));
        row["grasps"] = grasps;
        rows.push_back(row);
    }
    return {{"schema_version", 1},
            {"objects", rows},
            {"aggregate",
             {{"cd", summary_json(table.cd)},
              {"emd", summary_json(table.emd)},
              {"fscore", summary_json(table.fscore)},
              {"mse", summary_json(table.mse)},
              {"ssim", summary_json(table.ssim)},
              {"validity", summary_json(table.validity)}}}};
}

Json evaluation_timings_json(const EvaluationTable &table) {
    Json rows = Json::array();
    for (const auto &r : table.rows)
        rows.push_back({{"name", r.name}, {"stages", timings_json(r.timings)}, {"total_seconds", r.total_seconds}});
    return {{"objects", rows}, {"seconds", summary_json(table.seconds)}};
}

Json to_json(const SweepResult &sweep) {
    Json points = Json::array();
    for (std::size_t i = 0; i < sweep.sigmas.size(); ++i)
        points.push_back({{"sigma", sweep.sigmas[i]}, {"per_seed", sweep.validity[i]}, {"mean_validity", sweep.mean_validity[i]}});
    return {{"seeds", sweep.seeds}, {"points", points}};
}

std::uint64_t fnv1a64(const std::string &bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

Json to_json(const RunManifest &m) {
    Json j;
    j["schema_version"] = kManifestSchemaVersion;
    j["command"] = m.command;
    j["config_hash"] = m.config_hash;
    j["seeds"] = m.seeds;
    j["inputs"] = m.inputs;
    j["outputs"] = m.outputs;
    j["versions"] = {{"splatgrasp", "0.1.0"},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                     {"compiler", __VERSION__}};
    j["threads"] = m.threads;
    j["timings"] = m.timings;
    return j;
}

} // namespace splatgrasp
