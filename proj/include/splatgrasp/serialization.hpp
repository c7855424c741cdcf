#pragma once

#include "splatgrasp/geometry.hpp"
#include "splatgrasp/grasping.hpp"
#include "splatgrasp/losses.hpp"
#include "splatgrasp/pipeline.hpp"
#include "splatgrasp/scene.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace splatgrasp {

using Json = nlohmann::ordered_json;

/// Reads and parses a JSON file. Throws ParseError on I/O or syntax errors.
Json read_json(const std::filesystem::path &path);
/// Writes `j` with two-space indentation and a trailing newline.
void write_json(const std::filesystem::path &path, const Json &j);

Json to_json(const Primitive &p);
Primitive primitive_from_json(const Json &j);
Json to_json(const SceneDescriptor &scene);
SceneDescriptor scene_from_json(const Json &j);
/// Accepts a scene object, an array of scenes, or {"scenes": [...]}. String
/// entries are paths to scene files relative to `baseDir`.
std::vector<SceneDescriptor> scene_list_from_json(const Json &j, const std::filesystem::path &baseDir);

Json to_json(const GripperModel &g);
GripperModel gripper_from_json(const Json &j);

/// {contact, baseline, approach, width_m, depth_m, score, pose_4x4_row_major}
Json to_json(const Grasp &g, const GripperModel &gripper);
Grasp grasp_from_json(const Json &j);
Json to_json(const PlanResult &plan, const GripperModel &gripper);

/// {fx, fy, cx, cy, width, height, world_to_camera_4x4_row_major}
Json to_json(const CameraModel &cam);
CameraModel camera_from_json(const Json &j);

/// {"target": [0/1 per point]} or {"labels": [...], "target_label": k}.
SegmentMask mask_from_json(const Json &j);
Json to_json(const SegmentMask &mask);

Json to_json(const MetricReport &r);

Json to_json(const PipelineConfig &c);
/// Missing keys keep their defaults; unknown keys are rejected.
PipelineConfig pipeline_config_from_json(const Json &j);
Json to_json(const OracleOptions &o);
OracleOptions oracle_options_from_json(const Json &j);
/// {"pipeline": {...}, "oracle": {...}, "evaluation": {...}}
EvaluationOptions evaluation_options_from_json(const Json &j);
Json to_json(const EvaluationOptions &o);

/// Deterministic results: metrics, grasps and validity, no timings.
Json evaluation_results_json(const EvaluationTable &table, const GripperModel &gripper);
/// Per-object stage timings and totals.
Json evaluation_timings_json(const EvaluationTable &table);
Json to_json(const SweepResult &sweep);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const std::string &bytes);
std::string hex64(std::uint64_t v);

struct RunManifest {
    std::string command;
    std::string config_hash; // FNV-1a of the canonical config JSON
    std::map<std::string, std::uint64_t> seeds;
    std::map<std::string, std::string> inputs;
    std::map<std::string, std::string> outputs;
    std::map<std::string, double> timings;
    unsigned threads = 1;
};

inline constexpr int kManifestSchemaVersion = 1;
Json to_json(const RunManifest &m);

} // namespace splatgrasp
