// Acceptance checks: one PASS/FAIL line per criterion with its runtime.

#include "cli_support.hpp"
#include "oracles.hpp"

#include "splatgrasp/losses.hpp"
#include "splatgrasp/parallel.hpp"
#include "splatgrasp/pipeline.hpp"
#include "splatgrasp/scene.hpp"
#include "splatgrasp/serialization.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

using namespace splatgrasp;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

class Check {
public:
    void expect(bool ok, const std::string &what) {
        if (!ok) {
            mPass = false;
            if (mFailures.size() < 3) mFailures.push_back(what);
        }
    }
    void note(const std::string &s) { mNotes += (mNotes.empty() ? "" : "; ") + s; }
    Outcome done() const {
        std::string d = mNotes;
        for (const auto &f : mFailures) d += (d.empty() ? "" : "; ") + std::string("FAILED ") + f;
        return {mPass, d};
    }

private:
    bool mPass = true;
    std::vector<std::string> mFailures;
    std::string mNotes;
};

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

std::string fix(double v, int digits = 3) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

SceneDescriptor fixture(const std::string &name) {
    for (const auto &s : fixture_scenes())
        if (s.name == name) return s;
    throw std::runtime_error("missing fixture " + name);
}

PointCloud transform_cloud(const PointCloud &c, const RigidTransform &x) {
    std::vector<Point3> p;
    std::vector<Vec3> n;
    for (std::size_t i = 0; i < c.size(); ++i) {
        p.push_back(x.apply(c[i]));
        n.push_back(x.apply_direction(c.normals()[i]));
    }
    return PointCloud(p, n);
}

Triplane random_triplane(std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> v(3 * c * h * w);
    for (auto &x : v) x = u(gen);
    return Triplane(c, h, w, Extent{Point3(-0.3, -0.2, -0.1), Point3(0.3, 0.4, 0.5)}, std::move(v));
}

Image random_image(int w, int h, std::mt19937_64 &gen) {
    std::uniform_real_distribution<double> u(0, 1);
    Image img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(x, y) = Rgb(u(gen), u(gen), u(gen));
    return img;
}

// --- 1 ---------------------------------------------------------------------
Outcome triplane_oracle() {
    Check c;
    double worst = 0.0;
    for (std::uint64_t seed : {1u, 2u}) {
        const Triplane tri = random_triplane(32, 64, 64, seed);
        std::mt19937_64 gen(seed + 10);
        std::uniform_real_distribution<double> ux(-0.35, 0.35), uy(-0.25, 0.45), uz(-0.15, 0.55);
        for (int k = 0; k < 500; ++k) {
            const Point3 x(ux(gen), uy(gen), uz(gen));
            const auto got = query(tri, x);
            const auto want = oracle::triplane_query(tri, x);
            for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
        }
    }
    c.expect(worst <= 1e-12, "oracle error " + sci(worst));

    Triplane tri(32, 64, 64, Extent{});
    for (int p = 0; p < 3; ++p)
        for (std::size_t ch = 0; ch < 32; ++ch)
            for (std::size_t r = 0; r < 64; ++r)
                for (std::size_t q = 0; q < 64; ++q) {
                    const double u = (q + 0.5) / 64 * 2 - 1, v = (r + 0.5) / 64 * 2 - 1;
                    tri.set(static_cast<PlaneId>(p), ch, r, q, 0.1 * ch - 1.5 * u + 0.25 * v + p);
                }
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(-1 + 1.0 / 64, 1 - 1.0 / 64);
    double affine = 0.0;
    const int ax[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (int k = 0; k < 1000; ++k) {
        const Point3 x(u(gen), u(gen), u(gen));
        const auto f = query(tri, x);
        for (int p = 0; p < 3; ++p)
            for (std::size_t ch = 0; ch < 32; ++ch)
                affine = std::max(affine, std::abs(f[p * 32 + ch] - (0.1 * ch - 1.5 * x[ax[p][0]] + 0.25 * x[ax[p][1]] + p)));
    }
    c.expect(affine <= 1e-9, "affine error " + sci(affine));
    c.note("oracle max err " + sci(worst) + ", affine max err " + sci(affine));
    return c.done();
}

// --- 2 ---------------------------------------------------------------------
Outcome pose_suite() {
    Check c;
    const GripperModel gm;
    const Grasp canonical = Grasp::make(Point3::Zero(), Vec3(1, 0, 0), Vec3(0, 0, 1), 0.08, 0.10, 1.0);
    const RigidTransform p0 = grasp_pose(canonical, gm);
    c.expect(p0.translation() == Vec3(0.04, 0, 0.10), "canonical translation");
    c.expect(p0.rotation_matrix() == Mat3::Identity(), "canonical rotation");
    std::mt19937_64 gen(3);
    std::normal_distribution<double> n(0, 1);
    std::uniform_real_distribution<double> uw(0, 0.08);
    double ortho = 0.0, det = 0.0, dot = 0.0;
    for (int k = 0; k < 10000; ++k) {
        const Grasp g = Grasp::make(Point3(n(gen), n(gen), n(gen)), Vec3(n(gen), n(gen), n(gen)),
                                    Vec3(n(gen), n(gen), n(gen)), uw(gen), 0.1, 0.5);
        const Mat3 r = grasp_pose(g, gm).rotation_matrix();
        ortho = std::max(ortho, (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff());
        det = std::max(det, std::abs(r.determinant() - 1.0));
        dot = std::max(dot, std::abs(g.approach.dot(g.baseline.vec())));
    }
    c.expect(ortho <= 1e-9, "R^T R error " + sci(ortho));
    c.expect(det <= 1e-9, "det error " + sci(det));
    c.expect(dot <= 1e-6, "|a.b| " + sci(dot));
    c.note("max |RtR-I| " + sci(ortho) + ", max |det-1| " + sci(det) + ", t=(0.04,0,0.10) exact");
    return c.done();
}

// --- 3 ---------------------------------------------------------------------
Outcome metric_oracles() {
    Check c;
    std::mt19937_64 gen(5);
    double cd = 0.0;
    for (int t = 0; t < 100; ++t) {
        const auto a = oracle::random_points(64, gen), b = oracle::random_points(64, gen);
        cd = std::max(cd, std::abs(chamfer_distance(PointCloud(a), PointCloud(b)) - oracle::chamfer(a, b)));
    }
    c.expect(cd <= 1e-12, "CD error " + sci(cd));
    double emd = 0.0;
    for (int t = 0; t < 20; ++t) {
        const auto a = oracle::random_points(7, gen), b = oracle::random_points(7, gen);
        const EmdResult r = earth_mover(PointCloud(a), PointCloud(b));
        emd = std::max(emd, std::abs(r.distance - oracle::emd_permutations(a, b)));
        c.expect(r.exact, "EMD solver exact");
    }
    c.expect(emd <= 1e-12, "EMD error " + sci(emd));

    const PointCloud fa({Point3(0, 0, 0), Point3(1, 0, 0)});
    const PointCloud fb({Point3(0, 0, 0.1), Point3(5, 0, 0), Point3(6, 0, 0)});
    const FScore f = f_score_parts(fa, fb, 0.1);
    c.expect(f.precision == 0.5 && f.recall == 1.0 / 3.0, "F-score precision/recall");
    c.expect(std::abs(f.fscore - 0.4) <= 1e-15, "F-score harmonic mean");
    c.expect(f_score(fa, fa, 1e-9) == 1.0, "F-score identical clouds");
    c.expect(f_score(fa, PointCloud({Point3(100, 0, 0)}), 0.5) == 0.0, "F-score disjoint clouds");

    double ss = 0.0;
    for (int t = 0; t < 3; ++t) {
        const Image a = random_image(40, 32, gen), b = random_image(40, 32, gen);
        Image mix = a;
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 40; ++x) mix.at(x, y) = 0.8 * a.at(x, y) + 0.2 * b.at(x, y);
        ss = std::max(ss, std::abs(ssim(a, b) - oracle::ssim_sliding(a, b)));
        ss = std::max(ss, std::abs(ssim(a, mix) - oracle::ssim_sliding(a, mix)));
    }
    c.expect(ss <= 1e-9, "SSIM error " + sci(ss));
    c.note("CD " + sci(cd) + ", EMD " + sci(emd) + ", SSIM " + sci(ss));
    return c.done();
}

// --- 4 ---------------------------------------------------------------------
Outcome composite_loss_check() {
    Check c;
    LossConfig cfg;
    c.expect(cfg.lambda_cd == 10 && cfg.lambda_emd == 10 && cfg.lambda_ssim == 1 && cfg.lambda_lpips == 2, "default weights");
    std::mt19937_64 gen(6);
    const PointCloud cloud(oracle::random_points(64, gen));
    const std::vector<Image> views{random_image(24, 24, gen), random_image(24, 24, gen), random_image(24, 24, gen)};
    const MetricReport same = composite_loss(cfg, cloud, cloud, views, views);
    c.expect(std::abs(same.total) <= 1e-12, "perfect-input total " + sci(same.total));

    cfg.lpips_hook = [](const Image &a, const Image &b) { return 0.25 * mse(a, b); };
    const PointCloud other(oracle::random_points(64, gen));
    const std::vector<Image> others{random_image(24, 24, gen), random_image(24, 24, gen), random_image(24, 24, gen)};
    const MetricReport r = composite_loss(cfg, other, cloud, others, views);
    double render = 0.0;
    for (std::size_t i = 0; i < views.size(); ++i) {
        const double m = oracle::ssim_sliding(others[i], views[i]);
        double e = 0.0;
        for (std::size_t p = 0; p < views[i].pixels().size(); ++p) e += (others[i].pixels()[p] - views[i].pixels()[p]).squaredNorm();
        e /= 3.0 * static_cast<double>(views[i].pixel_count());
        render += e + 1.0 * (1.0 - m) + 2.0 * 0.25 * e;
    }
    const double want = 10.0 * oracle::chamfer(other.points(), cloud.points()) + 10.0 * earth_mover(other, cloud).distance +
                        render / 3.0;
    const double err = std::abs(r.total - want);
    c.expect(err <= 1e-12, "recomposition error " + sci(err));
    c.note("perfect total " + sci(same.total) + ", recomposition err " + sci(err));
    return c.done();
}

// --- 5 ---------------------------------------------------------------------
Outcome renderer_parity() {
    Check c;
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(-1, 1), pos(-0.6, 0.6), op(0.2, 0.95), sc(0.01, 0.08);
    GaussianSet set;
    set.sh_degree = 0;
    for (int i = 0; i < 500; ++i) {
        GaussianSplat s;
        s.position = Point3(pos(gen), pos(gen), pos(gen));
        s.opacity = op(gen);
        s.scale = Vec3(sc(gen), sc(gen), sc(gen));
        s.rotation = Rotation::from_wxyz(u(gen), u(gen), u(gen), u(gen));
        s.sh = {2 * u(gen), 2 * u(gen), 2 * u(gen)};
        set.splats.push_back(s);
    }
    const CameraModel cam = look_at_camera(Point3(0.3, -2.5, 0.8), Point3::Zero(), Vec3::UnitZ(), 77, 77, 64, 64);
    const Image fast = render(set, cam, Rgb(1, 1, 1));
    const Image slow = oracle::naive_render(set, cam, Rgb(1, 1, 1));
    double diff = 0.0;
    for (std::size_t i = 0; i < fast.pixels().size(); ++i) diff = std::max(diff, (fast.pixels()[i] - slow.pixels()[i]).cwiseAbs().maxCoeff());
    c.expect(diff <= 1e-5, "tile vs naive " + sci(diff));

    GaussianSet shuffled = set;
    std::shuffle(shuffled.splats.begin(), shuffled.splats.end(), gen);
    const Image perm = render(shuffled, cam, Rgb(1, 1, 1));
    c.expect(perm.pixels() == fast.pixels(), "permutation invariance");

    CameraModel axis;
    axis.fx = axis.fy = 50;
    axis.cx = axis.cy = 20;
    axis.width = axis.height = 41;
    GaussianSet one;
    one.sh_degree = 0;
    GaussianSplat s;
    s.position = Point3(0, 0, 2.5);
    s.scale = Vec3::Constant(0.12);
    s.opacity = 0.7;
    s.sh = {0.5, -0.5, 0.0};
    one.splats.push_back(s);
    const Rgb bg(0.1, 0.2, 0.3);
    const Image img = render(one, axis, bg);
    const double var = std::pow(50 * 0.12 / 2.5, 2) + 0.3;
    const double c0 = 0.28209479177387814;
    const Rgb col(0.5 + 0.5 * c0, 0.5 - 0.5 * c0, 0.5);
    double closed = 0.0;
    for (int y = 0; y < 41; ++y)
        for (int x = 0; x < 41; ++x) {
            const double r2 = (x - 20.0) * (x - 20.0) + (y - 20.0) * (y - 20.0);
            const double a = r2 / var > 9.0 ? 0.0 : 0.7 * std::exp(-0.5 * r2 / var);
            closed = std::max(closed, (img.at(x, y) - (a * col + (1 - a) * bg)).cwiseAbs().maxCoeff());
        }
    c.expect(closed <= 1e-9, "on-axis closed form " + sci(closed));
    c.note("tile vs naive " + sci(diff) + ", permutation exact, on-axis " + sci(closed));
    return c.done();
}

// --- 6 ---------------------------------------------------------------------
Outcome gradient_check() {
    Check c;
    double worst = 0.0;
    std::size_t columns = 0;
    AttributeMapping m;
    for (std::uint64_t seed : {21u, 22u, 23u}) {
        const DecoderWeights w = DecoderWeights::make_random({3 + 24, 32, 32, raw_output_size(1)},
                                                             {Activation::Tanh, Activation::ReLU, Activation::Linear}, m, seed, 0.3);
        const auto params = w.parameters();
        std::mt19937_64 gen(seed);
        std::uniform_real_distribution<double> u(-1, 1);
        for (int t = 0; t < 10; ++t) {
            std::vector<double> in(27);
            for (auto &v : in) v = u(gen);
            const Point3 x(in[0], in[1], in[2]);
            const std::vector<double> f(in.begin() + 3, in.end());
            const DecoderJacobian jac = decode_gradients(w, x, f);
            const double h = 1e-6;
            auto rel = [&](const Eigen::VectorXd &fd, const Eigen::VectorXd &an) {
                ++columns;
                const double scale = std::max(an.norm(), fd.norm());
                return scale < 1e-10 ? 0.0 : (fd - an).norm() / scale;
            };
            for (std::size_t j = 0; j < 27; ++j) {
                auto p = in, q = in;
                p[j] += h;
                q[j] -= h;
                const Eigen::VectorXd fd = (decode_raw(w, Point3(p[0], p[1], p[2]), std::vector<double>(p.begin() + 3, p.end())) -
                                            decode_raw(w, Point3(q[0], q[1], q[2]), std::vector<double>(q.begin() + 3, q.end()))) /
                                           (2 * h);
                worst = std::max(worst, rel(fd, jac.wrt_input.col(static_cast<Eigen::Index>(j))));
            }
            for (std::size_t j = 0; j < params.size(); j += 5) {
                auto p = params, q = params;
                p[j] += h;
                q[j] -= h;
                const Eigen::VectorXd fd = (decode_raw(w.with_parameters(p), x, f) - decode_raw(w.with_parameters(q), x, f)) / (2 * h);
                worst = std::max(worst, rel(fd, jac.wrt_params.col(static_cast<Eigen::Index>(j))));
            }
        }
    }
    c.expect(worst <= 1e-4, "max relative error " + sci(worst));
    c.note("max rel err " + sci(worst) + " over " + std::to_string(columns) + " Jacobian columns");
    return c.done();
}

// --- 7 ---------------------------------------------------------------------
Outcome antipodal() {
    Check c;
    const GripperModel gm;
    const double reach = gm.max_width - 2 * gm.contact_slack;
    const Primitive cubePrim = fixture("cube").primitives[0];
    std::size_t compared = 0;
    for (int variant = 0; variant < 2; ++variant) {
        PointCloud cube;
        if (variant == 0) {
            // Cell-centered face grid (dense face sampling), 20 x 20 per face.
            std::vector<Point3> pts;
            std::vector<Vec3> nrm;
            const double h = 0.025, s = 0.05 / 20;
            for (int axis = 0; axis < 3; ++axis)
                for (double sign : {-1.0, 1.0})
                    for (int i = 0; i < 20; ++i)
                        for (int j = 0; j < 20; ++j) {
                            Point3 p;
                            p[axis] = sign * h;
                            p[(axis + 1) % 3] = -h + (i + 0.5) * s;
                            p[(axis + 2) % 3] = -h + (j + 0.5) * s;
                            Vec3 n = Vec3::Zero();
                            n[axis] = sign;
                            pts.push_back(cubePrim.pose.apply(p));
                            nrm.push_back(n);
                        }
            cube = PointCloud(pts, nrm);
        } else {
            cube = sample_primitive(cubePrim, 8000, 31);
        }
        SamplerOptions opt;
        opt.mu = 1.0;
        opt.max_grasps = cube.size();
        opt.seed = 9;
        const SampleResult r = sample_antipodal_grasps(cube, gm, opt);
        std::vector<ContactPair> want;
        std::set<std::pair<std::size_t, std::size_t>> seen;
        for (std::size_t i : candidate_order(cube.size(), opt.seed)) {
            const auto j = oracle::antipodal_partner(cube, i, 1.0, reach, opt.ray_tolerance);
            if (j && seen.insert(std::minmax(i, *j)).second) want.push_back({i, *j});
        }
        bool same = r.pairs.size() == want.size();
        for (std::size_t k = 0; same && k < want.size(); ++k)
            same = r.pairs[k].contact == want[k].contact && r.pairs[k].partner == want[k].partner;
        c.expect(same, std::string(variant == 0 ? "grid" : "sampled") + " cube pairs differ from brute force (" +
                           std::to_string(r.pairs.size()) + " vs " + std::to_string(want.size()) + ")");
        compared += want.size();
        for (const Grasp &g : r.grasps) {
            c.expect(g.baseline.vec().cwiseAbs().maxCoeff() >= std::cos(5.0 * std::numbers::pi / 180.0), "cube baseline off-axis");
            c.expect(g.width >= 0.05 - 1e-12 && g.width <= std::hypot(0.05, opt.ray_tolerance) + 2 * gm.contact_slack + 1e-12, "cube width " + fix(g.width, 5));
        }
    }
    const Primitive sphere = fixture("sphere").primitives[0];
    const PointCloud sc = sample_primitive(sphere, 8000, 32);
    SamplerOptions opt;
    opt.max_grasps = 2000;
    const SampleResult rs = sample_antipodal_grasps(sc, gm, opt);
    double off = 0.0;
    for (const Grasp &g : rs.grasps) off = std::max(off, (sphere.pose.translation() - g.contact).cross(g.baseline.vec()).norm());
    c.expect(!rs.grasps.empty() && off <= 0.003, "sphere offset " + fix(off * 1e3, 3) + " mm");
    c.note(std::to_string(compared) + " cube pairs match brute force; " + std::to_string(rs.grasps.size()) +
           " sphere grasps, max center offset " + fix(off * 1e3, 3) + " mm");
    return c.done();
}

// --- 8 ---------------------------------------------------------------------
Outcome end_to_end() {
    Check c;
    const unsigned previous = thread_count();
    set_thread_count(1);
    const EvaluationOptions opts;
    const auto scenes = fixture_scenes();
    const EvaluationTable t = evaluate(scenes, opts);
    std::ostringstream rates;
    for (const auto &row : t.rows) {
        c.expect(row.ok, row.name + " failed: " + row.error);
        if (row.convex) c.expect(row.validity == 1.0, row.name + " validity " + fix(row.validity));
        rates << (rates.tellp() > 0 ? " " : "") << row.name << "=" << fix(row.validity, 2);
    }
    const std::vector<double> sigmas{0.0, 0.005, 0.01, 0.02};
    const SweepResult sweep = noise_sweep(scenes, opts, sigmas, {0, 1, 2, 3, 4});
    std::ostringstream curve;
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        curve << (i ? " " : "") << fix(sweep.mean_validity[i], 3);
        if (i > 0) c.expect(sweep.mean_validity[i] <= sweep.mean_validity[i - 1], "sweep not monotone at sigma " + fix(sigmas[i], 3));
    }
    set_thread_count(previous);
    c.note("validity " + rates.str() + "; sweep mean validity " + curve.str());
    return c.done();
}

// --- 9 ---------------------------------------------------------------------
Outcome equivariance() {
    Check c;
    const GripperModel gm;
    double worst = 0.0;
    std::size_t grasps = 0;
    const std::vector<RigidTransform> transforms{
        RigidTransform(Rotation::from_wxyz(0.8, 0.3, -0.2, 0.4), Vec3(0.3, -0.1, 0.7)),
        RigidTransform(Rotation::from_wxyz(0.1, 0.9, 0.2, -0.3), Vec3(-1.0, 2.0, 0.5)),
        RigidTransform(Rotation::from_wxyz(0.0, 0.0, 0.0, 1.0), Vec3(0.0, 0.0, 0.0))};
    for (const char *name : {"cube", "flat_box", "cylinder", "two_object"}) {
        const SceneDescriptor scene = fixture(name);
        const SceneSample s = sample_scene(scene, 6000, 41);
        const SegmentMask mask = target_mask(s.labels, scene.target);
        PlanOptions opt;
        opt.sampler.seed = 5;
        opt.top_k = 10;
        const PlanResult base = plan_grasps(s.cloud, mask, gm, opt);
        for (const auto &x : transforms) {
            PlanOptions moved = opt;
            moved.sampler.up = x.apply_direction(opt.sampler.up);
            moved.sampler.forward = x.apply_direction(opt.sampler.forward);
            const PlanResult r = plan_grasps(transform_cloud(s.cloud, x), mask, gm, moved);
            c.expect(r.grasps.size() == base.grasps.size(), std::string(name) + " grasp count changed");
            for (std::size_t k = 0; k < std::min(r.grasps.size(), base.grasps.size()); ++k) {
                const Mat4 want = x.matrix() * grasp_pose(base.grasps[k], gm).matrix();
                worst = std::max(worst, (grasp_pose(r.grasps[k], gm).matrix() - want).cwiseAbs().maxCoeff());
                ++grasps;
            }
        }
    }
    c.expect(worst <= 1e-6, "pose error " + sci(worst));
    c.note(std::to_string(grasps) + " poses, max elementwise error " + sci(worst));
    return c.done();
}

// --- 10 --------------------------------------------------------------------
Outcome reproducibility() {
    Check c;
    const auto dir = cli::scratch("repro");
    const std::string args = std::string("eval --scenes \"") + SPLATGRASP_DATA + "/scenes/fixtures.json\" --config \"" +
                             SPLATGRASP_DATA + "/configs/default.json\"";
    const std::vector<std::string> runs{"--threads 1", "--threads 1", "--threads 2", "--threads 4"};
    std::vector<std::string> results;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto out = dir / ("run" + std::to_string(i));
        const int code = cli::run(runs[i] + " " + args + " --out \"" + out.string() + "\"", dir / ("log" + std::to_string(i)));
        c.expect(code == 0, "eval exit code " + std::to_string(code));
        results.push_back(cli::slurp(out / "results.json"));
    }
    for (std::size_t i = 1; i < results.size(); ++i) c.expect(results[i] == results[0], "results differ for '" + runs[i] + "'");
    std::string where;
    const bool golden = cli::close(cli::Json::parse(results[0]), cli::load(std::filesystem::path(SPLATGRASP_GOLDEN) / "eval_fixtures_results.json"),
                                   1e-6, where);
    c.expect(golden, "golden mismatch at " + where);
    c.note("4 runs (threads 1,1,2,4) byte-identical; golden match within 1e-6");
    return c.done();
}

} // namespace

int main() {
    struct Criterion {
        int id;
        const char *name;
        double limit; // seconds, 0 = none
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "triplane query oracle", 1.0, triplane_oracle},
        {2, "grasp pose suite", 1.0, pose_suite},
        {3, "metric oracle equivalence", 30.0, metric_oracles},
        {4, "composite loss with default weights", 0.0, composite_loss_check},
        {5, "renderer parity", 60.0, renderer_parity},
        {6, "decoder gradient check", 30.0, gradient_check},
        {7, "antipodal correctness", 60.0, antipodal},
        {8, "end-to-end evaluation and noise sweep", 300.0, end_to_end},
        {9, "rigid-transform equivariance", 0.0, equivariance},
        {10, "eval reproducibility", 0.0, reproducibility},
    };
    int failed = 0;
    for (const auto &cr : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = cr.run();
        } catch (const std::exception &e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (cr.limit > 0.0 && secs >= cr.limit) {
            o.pass = false;
            o.detail += "; over time limit";
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << cr.id << " (" << cr.name << "): " << o.detail << " ["
                  << fix(secs, 2) << " s" << (cr.limit > 0.0 ? ", limit " + fix(cr.limit, 0) + " s" : std::string()) << "]"
                  << std::endl;
        if (!o.pass) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
