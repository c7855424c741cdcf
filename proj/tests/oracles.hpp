#pragma once

// Slow reference implementations used to cross-check the library. They share
// no code with src/ beyond plain data types.

#include "splatgrasp/gaussians.hpp"
#include "splatgrasp/geometry.hpp"
#include "splatgrasp/grasping.hpp"
#include "splatgrasp/renderer.hpp"
#include "splatgrasp/triplane.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

namespace oracle {

using namespace splatgrasp;

// Bilinear lookup as a tent-weighted sum over every grid node.
inline std::vector<double> triplane_query(const Triplane &tri, const Point3 &x) {
    const int cols[3] = {0, 0, 1};
    const int rows[3] = {1, 2, 2};
    const PlaneId planes[3] = {PlaneId::XY, PlaneId::XZ, PlaneId::YZ};
    std::vector<double> out;
    for (int p = 0; p < 3; ++p) {
        double g[2];
        const int axis[2] = {cols[p], rows[p]};
        const std::size_t n[2] = {tri.width(), tri.height()};
        for (int k = 0; k < 2; ++k) {
            const int a = axis[k];
            double u = (x[a] - tri.extent().min[a]) / (tri.extent().max[a] - tri.extent().min[a]) * 2.0 - 1.0;
            if (u < -1.0) u = -1.0;
            if (u > 1.0) u = 1.0;
            double gg = (u + 1.0) / 2.0 * static_cast<double>(n[k]) - 0.5;
            if (gg < 0.0) gg = 0.0;
            if (gg > static_cast<double>(n[k] - 1)) gg = static_cast<double>(n[k] - 1);
            g[k] = gg;
        }
        for (std::size_t c = 0; c < tri.channels(); ++c) {
            double acc = 0.0;
            for (std::size_t r = 0; r < tri.height(); ++r)
                for (std::size_t q = 0; q < tri.width(); ++q) {
                    const double wx = std::max(0.0, 1.0 - std::abs(g[0] - static_cast<double>(q)));
                    const double wy = std::max(0.0, 1.0 - std::abs(g[1] - static_cast<double>(r)));
                    if (wx > 0.0 && wy > 0.0) acc += wx * wy * tri.at(planes[p], c, r, q);
                }
            out.push_back(acc);
        }
    }
    return out;
}

inline double chamfer(const std::vector<Point3> &a, const std::vector<Point3> &b) {
    auto oneWay = [](const std::vector<Point3> &x, const std::vector<Point3> &y) {
        double sum = 0.0;
        for (const auto &p : x) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto &q : y) {
                const double d = (p - q).x() * (p - q).x() + (p - q).y() * (p - q).y() + (p - q).z() * (p - q).z();
                if (d < best) best = d;
            }
            sum += best;
        }
        return sum / static_cast<double>(x.size());
    };
    return oneWay(a, b) + oneWay(b, a);
}

// Exhaustive minimum over all permutations (use for n <= 8).
inline double emd_permutations(const std::vector<Point3> &a, const std::vector<Point3> &b) {
    std::vector<std::size_t> perm(a.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[perm[i]]).norm();
        best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(a.size());
}

// Direct 2D window sum of the Gaussian-weighted SSIM at every valid position.
inline double ssim_sliding(const Image &a, const Image &b, int win = 11, double sigma = 1.5) {
    std::vector<std::vector<double>> w(static_cast<std::size_t>(win), std::vector<double>(static_cast<std::size_t>(win)));
    double norm = 0.0;
    const double c = (win - 1) / 2.0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            w[i][j] = std::exp(-((i - c) * (i - c) + (j - c) * (j - c)) / (2.0 * sigma * sigma));
            norm += w[i][j];
        }
    for (auto &row : w)
        for (auto &v : row) v /= norm;
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
        double sum = 0.0;
        int count = 0;
        for (int y = 0; y + win <= a.height(); ++y)
            for (int x = 0; x + win <= a.width(); ++x) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        const double va = a.at(x + j, y + i)[ch], vb = b.at(x + j, y + i)[ch];
                        ma += w[i][j] * va;
                        mb += w[i][j] * vb;
                    }
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        const double va = a.at(x + j, y + i)[ch] - ma, vb = b.at(x + j, y + i)[ch] - mb;
                        saa += w[i][j] * va * va;
                        sbb += w[i][j] * vb * vb;
                        sab += w[i][j] * va * vb;
                    }
                sum += ((2 * ma * mb + c1) * (2 * sab + c2)) / ((ma * ma + mb * mb + c1) * (saa + sbb + c2));
                ++count;
            }
        total += sum / count;
    }
    return total / 3.0;
}

// Forward pass with explicit loops.
inline std::vector<double> mlp_forward(const DecoderWeights &wts, const std::vector<double> &input) {
    std::vector<double> h = input;
    for (const auto &layer : wts.layers()) {
        std::vector<double> next(layer.outputs());
        for (std::size_t o = 0; o < layer.outputs(); ++o) {
            double s = layer.bias(static_cast<Eigen::Index>(o));
            for (std::size_t i = 0; i < layer.inputs(); ++i)
                s += layer.weight(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(i)) * h[i];
            switch (layer.activation) {
            case Activation::ReLU: s = s > 0.0 ? s : 0.0; break;
            case Activation::Tanh: s = std::tanh(s); break;
            case Activation::Linear: break;
            }
            next[o] = s;
        }
        h = next;
    }
    return h;
}

// Real SH basis from the closed-form table, with the sign pattern used by
// splatting renderers (negative odd-m terms for l = 1, 2).
inline std::vector<double> sh_table(int degree, const Vec3 &d) {
    const double pi = 3.14159265358979323846;
    const double x = d.x(), y = d.y(), z = d.z();
    std::vector<double> v;
    v.push_back(0.5 * std::sqrt(1.0 / pi));
    if (degree >= 1) {
        const double k = std::sqrt(3.0 / (4.0 * pi));
        v.push_back(-k * y);
        v.push_back(k * z);
        v.push_back(-k * x);
    }
    if (degree >= 2) {
        v.push_back(0.5 * std::sqrt(15.0 / pi) * x * y);
        v.push_back(-0.5 * std::sqrt(15.0 / pi) * y * z);
        v.push_back(0.25 * std::sqrt(5.0 / pi) * (2 * z * z - x * x - y * y));
        v.push_back(-0.5 * std::sqrt(15.0 / pi) * x * z);
        v.push_back(0.25 * std::sqrt(15.0 / pi) * (x * x - y * y));
    }
    return v;
}

struct NaiveSplat {
    double u, v, depth, opacity;
    double ia, ib, ic; // inverse covariance entries (a b; b c)
    Rgb color;
};

// Projects every splat independently (degree-0 color only) and composites
// every pixel over the full depth-sorted list.
inline Image naive_render(const GaussianSet &set, const CameraModel &cam, const Rgb &bg) {
    const double c0 = 0.28209479177387814;
    const Mat3 R = cam.extrinsic.rotation_matrix();
    const Vec3 t = cam.extrinsic.translation();
    std::vector<std::pair<std::pair<double, std::size_t>, NaiveSplat>> list;
    for (std::size_t i = 0; i < set.splats.size(); ++i) {
        const auto &s = set.splats[i];
        const Vec3 p = R * s.position + t;
        if (p.z() <= 0.01) continue;
        const Mat3 rot = s.rotation.matrix();
        Mat3 S = Mat3::Zero();
        for (int k = 0; k < 3; ++k) S(k, k) = s.scale[k] * s.scale[k];
        const Mat3 cov3 = rot * S * rot.transpose();
        Eigen::Matrix<double, 2, 3> J;
        J << cam.fx / p.z(), 0, -cam.fx * p.x() / (p.z() * p.z()), 0, cam.fy / p.z(), -cam.fy * p.y() / (p.z() * p.z());
        const Eigen::Matrix<double, 2, 3> T = J * R;
        const Eigen::Matrix2d cov = T * cov3 * T.transpose();
        const double a = cov(0, 0) + 0.3, b = 0.5 * (cov(0, 1) + cov(1, 0)), c = cov(1, 1) + 0.3;
        const double det = a * c - b * b;
        if (!(det > 0.0)) continue;
        NaiveSplat ns;
        ns.u = cam.fx * p.x() / p.z() + cam.cx;
        ns.v = cam.fy * p.y() / p.z() + cam.cy;
        ns.depth = p.z();
        ns.opacity = s.opacity;
        ns.ia = c / det;
        ns.ib = -b / det;
        ns.ic = a / det;
        for (int ch = 0; ch < 3; ++ch) ns.color[ch] = std::clamp(c0 * s.sh[static_cast<std::size_t>(ch)] + 0.5, 0.0, 1.0);
        list.push_back({{ns.depth, i}, ns});
    }
    std::sort(list.begin(), list.end(), [](const auto &x, const auto &y) { return x.first < y.first; });
    Image img(cam.width, cam.height, bg, true);
    for (int py = 0; py < cam.height; ++py)
        for (int px = 0; px < cam.width; ++px) {
            double T = 1.0;
            Rgb acc = Rgb::Zero();
            for (const auto &[key, s] : list) {
                const double dx = px - s.u, dy = py - s.v;
                const double m2 = s.ia * dx * dx + 2 * s.ib * dx * dy + s.ic * dy * dy;
                if (m2 > 9.0) continue;
                const double alpha = s.opacity * std::exp(-0.5 * m2);
                acc += T * alpha * s.color;
                T *= 1.0 - alpha;
                if (T < 1e-4) break;
            }
            Rgb out = acc + T * bg;
            for (int ch = 0; ch < 3; ++ch) out[ch] = std::clamp(out[ch], 0.0, 1.0);
            img.at(px, py) = out;
            img.set_alpha(px, py, 1.0 - T);
        }
    return img;
}

inline double angle(const Vec3 &a, const Vec3 &b) {
    const double c = a.dot(b) / (a.norm() * b.norm());
    return std::acos(std::clamp(c, -1.0, 1.0));
}

// Partner chosen for contact i by brute force over every cloud point, using
// the documented rule (ray distance, then distance along the ray, then index).
inline std::optional<std::size_t> antipodal_partner(const PointCloud &cloud, std::size_t i, double mu,
                                                    double reach, double rayTol) {
    const Vec3 inward = -cloud.normals()[i];
    const double cone = std::atan(mu);
    std::optional<std::size_t> best;
    double bestRay = 0, bestT = 0;
    for (std::size_t j = 0; j < cloud.size(); ++j) {
        if (j == i) continue;
        const Vec3 d = cloud[j] - cloud[i];
        const double t = d.dot(inward);
        if (t <= 0 || d.norm() > reach) continue;
        const double ray = (d - t * inward).norm();
        if (ray > rayTol) continue;
        if (!(std::max(angle(inward, d), angle(-cloud.normals()[j], -d)) < cone)) continue;
        const double qr = std::round(ray / 1e-12), qt = std::round(t / 1e-12);
        if (!best || qr < bestRay || (qr == bestRay && qt < bestT)) {
            best = j;
            bestRay = qr;
            bestT = qt;
        }
    }
    return best;
}

// Point-in-oriented-box test written against the pose matrix columns.
inline bool inside_gripper(const Grasp &g, const GripperModel &gm, const Point3 &p) {
    const Vec3 b = g.baseline.vec(), a = g.approach.vec(), y = a.cross(b);
    const Point3 mid = g.contact + 0.5 * (g.width - 2 * gm.contact_slack) * b;
    const Vec3 d = p - mid;
    const double lx = d.dot(b), ly = d.dot(y), lz = d.dot(a);
    const double ft = gm.finger_thickness, L = gm.finger_length;
    const double fx = g.width / 2 + ft / 2;
    for (double side : {-1.0, 1.0})
        if (std::abs(lx - side * fx) < ft / 2 && std::abs(ly) < ft / 2 && std::abs(lz) < L / 2) return true;
    return std::abs(lx) < gm.palm_width / 2 && std::abs(ly) < ft / 2 && std::abs(lz + L / 2 + ft / 2) < ft / 2;
}

inline bool collision_free(const Grasp &g, const GripperModel &gm, const std::vector<Point3> &pts) {
    const Point3 c1 = g.contact, c2 = g.contact + (g.width - 2 * gm.contact_slack) * g.baseline.vec();
    for (const auto &p : pts) {
        if ((p - c1).norm() <= 0.002 || (p - c2).norm() <= 0.002) continue;
        if (inside_gripper(g, gm, p)) return false;
    }
    return true;
}

inline std::vector<Point3> random_points(std::size_t n, std::mt19937_64 &gen, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<Point3> pts(n);
    for (auto &p : pts) p = Point3(u(gen), u(gen), u(gen));
    return pts;
}

} // namespace oracle
