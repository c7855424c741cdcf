#include "cli_support.hpp"

#include "splatgrasp/ply.hpp"
#include "splatgrasp/scene.hpp"
#include "splatgrasp/serialization.hpp"

#include <doctest.h>

using namespace splatgrasp;
using cli::fs::path;

namespace {

const path kData = SPLATGRASP_DATA;

path small_config(const path &dir) {
    const Json j{{"coarse_points", 512}, {"dense_points", 4096}, {"triplane", {{"channels", 8}, {"height", 16}, {"width", 16}}},
                 {"decoder", {{"hidden", {16}}}}};
    write_json(dir / "small.json", j);
    return dir / "small.json";
}

path scene_file(const path &dir, const std::string &name) {
    for (const auto &s : fixture_scenes())
        if (s.name == name) write_json(dir / (name + ".json"), to_json(s));
    return dir / (name + ".json");
}

std::string q(const path &p) { return "\"" + p.string() + "\""; }

} // namespace

TEST_CASE("usage errors exit 2 with a JSON error line") {
    const path dir = cli::scratch("usage");
    CHECK(cli::run("--help", dir / "help") == 0);
    CHECK(cli::slurp(dir / "help.out").find("reconstruct") != std::string::npos);
    CHECK(cli::run("", dir / "none") == 2);
    CHECK(cli::run("grasp --bogus 1 --cloud x --out y", dir / "bogus") == 2);
    CHECK(cli::run("grasp --cloud /nonexistent.ply --out " + q(dir / "g.json"), dir / "missing") == 2);
    const Json err = Json::parse(cli::slurp(dir / "missing.err"));
    CHECK(err["error"]["code"] == 2);
    CHECK(err["error"]["kind"] == "bad_arguments");
    CHECK(cli::run("reconstruct --out " + q(dir / "r"), dir / "nosource") == 2);
}

TEST_CASE("malformed inputs exit 3") {
    const path dir = cli::scratch("parse");
    {
        std::ofstream out(dir / "bad.json");
        out << "{\"primitives\": [{\"type\": \"torus\"}]}";
    }
    CHECK(cli::run("reconstruct --scene " + q(dir / "bad.json") + " --out " + q(dir / "r"), dir / "scene") == 3);
    CHECK(Json::parse(cli::slurp(dir / "scene.err"))["error"]["kind"] == "parse_error");
    {
        std::ofstream out(dir / "bad.ply");
        out << "ply\nformat ascii 1.0\nelement vertex 3\nend_header\n";
    }
    CHECK(cli::run("grasp --cloud " + q(dir / "bad.ply") + " --out " + q(dir / "g.json"), dir / "ply") == 3);
}

TEST_CASE("reconstruct, grasp, render, query and metrics end to end") {
    const path dir = cli::scratch("e2e");
    const path cfg = small_config(dir);
    const path rec = dir / "rec";
    REQUIRE(cli::run("reconstruct --scene " + q(scene_file(dir, "two_object")) + " --config " + q(cfg) + " --out " + q(rec),
                     dir / "rec") == 0);
    for (const char *f : {"coarse.ply", "dense.ply", "triplane.json", "triplane.bin", "gaussians.ply", "mask.json", "manifest.json"})
        CHECK(cli::fs::exists(rec / f));
    const Json manifest = cli::load(rec / "manifest.json");
    CHECK(manifest["schema_version"] == kManifestSchemaVersion);
    CHECK(manifest["command"] == "reconstruct");
    CHECK(manifest["config_hash"].get<std::string>().size() == 16);
    CHECK(read_point_cloud(rec / "dense.ply").size() == 4096);

    // Grasp output is byte-stable across runs and thread counts.
    const std::string graspArgs = "grasp --cloud " + q(rec / "dense.ply") + " --mask " + q(rec / "mask.json") + " --seed 5";
    REQUIRE(cli::run("--threads 1 " + graspArgs + " --out " + q(dir / "g1.json"), dir / "g1") == 0);
    REQUIRE(cli::run("--threads 3 " + graspArgs + " --out " + q(dir / "g3.json"), dir / "g3") == 0);
    REQUIRE(cli::run(graspArgs + " --out " + q(dir / "g4.json"), dir / "g4") == 0);
    CHECK(cli::slurp(dir / "g1.json") == cli::slurp(dir / "g3.json"));
    CHECK(cli::slurp(dir / "g1.json") == cli::slurp(dir / "g4.json"));
    const Json grasps = cli::load(dir / "g1.json");
    CHECK(grasps["feasible"] == true);
    CHECK(grasps["grasps"].size() >= 1);
    CHECK(grasps["grasps"][0]["pose_4x4_row_major"].size() == 16);
    CHECK(cli::fs::exists(dir / "g1.json.manifest.json"));

    // Clouds without normals get estimated ones.
    write_point_cloud(dir / "bare.ply", read_point_cloud(rec / "dense.ply").without_normals());
    CHECK(cli::run("grasp --cloud " + q(dir / "bare.ply") + " --out " + q(dir / "gb.json"), dir / "gb") == 0);

    // Mask length mismatch is an argument error.
    write_json(dir / "short_mask.json", Json{{"target", {1, 0}}});
    CHECK(cli::run("grasp --cloud " + q(rec / "dense.ply") + " --mask " + q(dir / "short_mask.json") + " --out " +
                       q(dir / "gm.json"),
                   dir / "gm") == 2);

    write_json(dir / "cam.json", Json{{"fx", 80}, {"fy", 80}, {"width", 64}, {"height", 64},
                                      {"eye", {0.25, 0.2, 0.2}}, {"target", {0.02, 0, 0.03}}});
    REQUIRE(cli::run("render --gaussians " + q(rec / "gaussians.ply") + " --camera " + q(dir / "cam.json") + " --out " +
                         q(dir / "view.png"),
                     dir / "render") == 0);
    CHECK(cli::fs::exists(dir / "view.png"));
    CHECK(cli::fs::exists(dir / "view.png.manifest.json"));

    REQUIRE(cli::run("query --triplane " + q(rec / "triplane.json") + " --points " + q(rec / "coarse.ply") + " --out " +
                         q(dir / "feats.bin"),
                     dir / "query") == 0);
    CHECK(cli::fs::file_size(dir / "feats.bin") == 512u * 3u * 8u * 4u);

    REQUIRE(cli::run("metrics --pred " + q(rec / "dense.ply") + " --gt " + q(rec / "dense.ply") + " --points 2048 --out " +
                         q(dir / "m.json"),
                     dir / "metrics") == 0);
    const Json m = cli::load(dir / "m.json");
    CHECK(m["cd"].get<double>() == 0.0);
    CHECK(m["emd"].get<double>() == 0.0);
    CHECK(m["fscore"].get<double>() == 1.0);
    CHECK(m["ssim"].is_null());
}

TEST_CASE("infeasible grasp request exits 4 after writing the result") {
    const path dir = cli::scratch("infeasible");
    Primitive big;
    big.dims = Vec3::Constant(0.1);
    write_point_cloud(dir / "big.ply", sample_primitive(big, 3000, 1));
    CHECK(cli::run("grasp --cloud " + q(dir / "big.ply") + " --out " + q(dir / "g.json"), dir / "g") == 4);
    const Json g = cli::load(dir / "g.json");
    CHECK(g["feasible"] == false);
    CHECK(g["diagnostic"].get<std::string>().rfind("no feasible grasp", 0) == 0);
    CHECK(Json::parse(cli::slurp(dir / "g.err"))["error"]["kind"] == "infeasible");
}

TEST_CASE("evaluation matches the golden results and is thread-count independent") {
    const path dir = cli::scratch("eval");
    const std::string args = "eval --scenes " + q(kData / "scenes" / "fixtures.json") + " --config " +
                             q(kData / "configs" / "default.json");
    REQUIRE(cli::run("--threads 1 " + args + " --out " + q(dir / "t1"), dir / "t1") == 0);
    REQUIRE(cli::run(args + " --out " + q(dir / "tn"), dir / "tn") == 0);
    CHECK(cli::slurp(dir / "t1" / "results.json") == cli::slurp(dir / "tn" / "results.json"));
    for (const char *f : {"results.json", "timings.json", "table.txt", "manifest.json"}) CHECK(cli::fs::exists(dir / "tn" / f));

    const Json golden = cli::load(path(SPLATGRASP_GOLDEN) / "eval_fixtures_results.json");
    std::string where;
    CHECK_MESSAGE(cli::close(cli::load(dir / "tn" / "results.json"), golden, 1e-6, where), where);
    CHECK(cli::slurp(dir / "tn.out").find("mean +- std") != std::string::npos);
}
