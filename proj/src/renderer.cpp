#include "splatgrasp/renderer.hpp"

#include "splatgrasp/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace splatgrasp {

Image::Image(int width, int height, const Rgb &fill, bool withAlpha) : mWidth(width), mHeight(height) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("image size must be positive");
    mPixels.assign(pixel_count(), fill);
    if (withAlpha) mAlpha.assign(pixel_count(), 0.0);
}

std::vector<double> Image::channel(int c) const {
    std::vector<double> out(pixel_count());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = mPixels[i][c];
    return out;
}

Eigen::Matrix<double, 2, 3> projection_jacobian(const CameraModel &cam, const Point3 &p) {
    const double z = p.z(), z2 = z * z;
    Eigen::Matrix<double, 2, 3> j;
    j << cam.fx / z, 0.0, -cam.fx * p.x() / z2, 0.0, cam.fy / z, -cam.fy * p.y() / z2;
    return j;
}

std::optional<ProjectedGaussian> project_gaussian(const GaussianSplat &splat, int shDegree, const CameraModel &cam,
                                                  const RenderSettings &settings) {
    const Point3 pc = cam.extrinsic.apply(splat.position);
    if (pc.z() <= settings.near_plane) return std::nullopt;

    const Mat3 w = cam.extrinsic.rotation_matrix();
    const Eigen::Matrix<double, 2, 3> j = projection_jacobian(cam, pc);
    const Eigen::Matrix<double, 2, 3> t = j * w;
    Eigen::Matrix2d cov = t * splat.covariance() * t.transpose();
    cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));
    cov(0, 0) += settings.cov_floor;
    cov(1, 1) += settings.cov_floor;

    ProjectedGaussian g;
    g.mean2d = Eigen::Vector2d(cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy);
    g.cov2d = cov;
    g.depth = pc.z();
    g.opacity = splat.opacity;

    const double mid = 0.5 * (cov(0, 0) + cov(1, 1));
    const double det = cov.determinant();
    const double lambdaMax = mid + std::sqrt(std::max(0.0, mid * mid - det));
    g.radius = settings.cutoff_sigma * std::sqrt(std::max(0.0, lambdaMax));
    if (g.mean2d.x() + g.radius < 0.0 || g.mean2d.x() - g.radius > cam.width - 1 || g.mean2d.y() + g.radius < 0.0 ||
        g.mean2d.y() - g.radius > cam.height - 1)
        return std::nullopt;

    g.conic = det > 0.0 ? Eigen::Matrix2d(cov.inverse()) : Eigen::Matrix2d::Zero();
    const Vec3 viewDir = splat.position - cam.center_world();
    const double len = viewDir.norm();
    g.color = evaluate_sh(splat.sh, shDegree, len > 0.0 ? Vec3(viewDir / len) : Vec3::UnitZ());
    return g;
}

namespace {

struct Projection {
    std::vector<ProjectedGaussian> gaussians; // sorted front to back
    RenderStats stats;
};

Projection projectAll(const GaussianSet &set, const CameraModel &cam, const RenderSettings &settings) {
    cam.validate();
    std::vector<std::optional<ProjectedGaussian>> slots(set.size());
    parallel_for(set.size(), [&](std::size_t i) {
        slots[i] = project_gaussian(set.splats[i], set.sh_degree, cam, settings);
        if (slots[i]) slots[i]->source = i;
    });
    Projection out;
    for (auto &s : slots) {
        if (!s) {
            ++out.stats.culled;
            continue;
        }
        if (!(s->cov2d.determinant() > 0.0) || !s->conic.allFinite()) {
            ++out.stats.singular;
            continue;
        }
        out.gaussians.push_back(*s);
    }
    out.stats.projected = out.gaussians.size();
    std::stable_sort(out.gaussians.begin(), out.gaussians.end(), [](const auto &a, const auto &b) {
        return a.depth < b.depth || (a.depth == b.depth && a.source < b.source);
    });
    return out;
}

// Composites one pixel over `order` (indices into gaussians, front to back).
template <typename Indices>
void shadePixel(int px, int py, const std::vector<ProjectedGaussian> &gaussians, const Indices &order,
                const Rgb &background, const RenderSettings &settings, Rgb &color, double &alpha) {
    const double cutoff = settings.cutoff_sigma * settings.cutoff_sigma;
    double transmittance = 1.0;
    Rgb accum = Rgb::Zero();
    for (std::size_t idx : order) {
        const ProjectedGaussian &g = gaussians[idx];
        const Eigen::Vector2d d(px - g.mean2d.x(), py - g.mean2d.y());
        const double m2 = d.dot(g.conic * d);
        if (m2 > cutoff) continue;
        const double a = g.opacity * std::exp(-0.5 * m2);
        accum += transmittance * a * g.color;
        [[maybe_unused]] const double before = transmittance;
        transmittance *= (1.0 - a);
        assert(transmittance <= before);
        if (transmittance < settings.min_transmittance) break;
    }
    color = accum + transmittance * background;
    for (int c = 0; c < 3; ++c) color[c] = std::clamp(color[c], 0.0, 1.0);
    alpha = std::clamp(1.0 - transmittance, 0.0, 1.0);
}

} // namespace

Image render(const GaussianSet &set, const CameraModel &cam, const Rgb &background, const RenderSettings &settings,
             RenderStats *stats) {
    const Projection proj = projectAll(set, cam, settings);
    if (stats) *stats = proj.stats;
    Image img(cam.width, cam.height, background, true);
    if (proj.gaussians.empty()) return img;

    const int ts = settings.tile_size;
    const int tilesX = (cam.width + ts - 1) / ts, tilesY = (cam.height + ts - 1) / ts;
    std::vector<std::vector<std::size_t>> bins(static_cast<std::size_t>(tilesX * tilesY));
    // Bins keep the global depth order because gaussians are visited sorted.
    for (std::size_t i = 0; i < proj.gaussians.size(); ++i) {
        const auto &g = proj.gaussians[i];
        const int x0 = std::max(0, static_cast<int>(std::floor((g.mean2d.x() - g.radius) / ts)));
        const int x1 = std::min(tilesX - 1, static_cast<int>(std::floor((g.mean2d.x() + g.radius) / ts)));
        const int y0 = std::max(0, static_cast<int>(std::floor((g.mean2d.y() - g.radius) / ts)));
        const int y1 = std::min(tilesY - 1, static_cast<int>(std::floor((g.mean2d.y() + g.radius) / ts)));
        for (int ty = y0; ty <= y1; ++ty)
            for (int tx = x0; tx <= x1; ++tx) bins[static_cast<std::size_t>(ty * tilesX + tx)].push_back(i);
    }

    parallel_for(bins.size(), [&](std::size_t tile) {
        const int tx = static_cast<int>(tile) % tilesX, ty = static_cast<int>(tile) / tilesX;
        for (int py = ty * ts; py < std::min(cam.height, (ty + 1) * ts); ++py)
            for (int px = tx * ts; px < std::min(cam.width, (tx + 1) * ts); ++px) {
                double a;
                shadePixel(px, py, proj.gaussians, bins[tile], background, settings, img.at(px, py), a);
                img.set_alpha(px, py, a);
            }
    });
    return img;
}

Image render_reference(const GaussianSet &set, const CameraModel &cam, const Rgb &background,
                       const RenderSettings &settings) {
    const Projection proj = projectAll(set, cam, settings);
    Image img(cam.width, cam.height, background, true);
    std::vector<std::size_t> all(proj.gaussians.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (int py = 0; py < cam.height; ++py)
        for (int px = 0; px < cam.width; ++px) {
            double a;
            shadePixel(px, py, proj.gaussians, all, background, settings, img.at(px, py), a);
            img.set_alpha(px, py, a);
        }
    return img;
}

} // namespace splatgrasp
