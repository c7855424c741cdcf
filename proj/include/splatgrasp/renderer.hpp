#pragma once

#include "splatgrasp/gaussians.hpp"
#include "splatgrasp/geometry.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace splatgrasp {

/// Row-major RGB image with values in [0, 1] and an optional alpha channel.
class Image {
public:
    Image() = default;
    Image(int width, int height, const Rgb &fill = Rgb::Zero(), bool withAlpha = false);

    int width() const { return mWidth; }
    int height() const { return mHeight; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(mWidth) * static_cast<std::size_t>(mHeight); }
    bool has_alpha() const { return !mAlpha.empty(); }

    const Rgb &at(int x, int y) const { return mPixels[index(x, y)]; }
    Rgb &at(int x, int y) { return mPixels[index(x, y)]; }
    double alpha(int x, int y) const { return mAlpha[index(x, y)]; }
    void set_alpha(int x, int y, double a) { mAlpha[index(x, y)] = a; }

    const std::vector<Rgb> &pixels() const { return mPixels; }
    const std::vector<double> &alphas() const { return mAlpha; }

    /// Values of one channel (0..2) as a row-major plane.
    std::vector<double> channel(int c) const;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(mWidth) + static_cast<std::size_t>(x);
    }

    int mWidth = 0, mHeight = 0;
    std::vector<Rgb> mPixels;
    std::vector<double> mAlpha;
};

/// Screen-space footprint of one splat. Pixel (i, j) has its center at
/// image coordinates (i, j).
struct ProjectedGaussian {
    Eigen::Vector2d mean2d = Eigen::Vector2d::Zero();
    Eigen::Matrix2d cov2d = Eigen::Matrix2d::Identity(); // pixels^2, includes the 0.3 floor
    Eigen::Matrix2d conic = Eigen::Matrix2d::Identity(); // inverse of cov2d
    double depth = 0.0;
    Rgb color = Rgb::Zero();
    double opacity = 0.0;
    double radius = 0.0; // 3 sigma along the major axis, pixels
    std::size_t source = 0;
};

struct RenderSettings {
    double near_plane = 0.01;
    double cov_floor = 0.3;          // px^2 added to the projected covariance diagonal
    double cutoff_sigma = 3.0;       // footprint truncation and culling radius
    double min_transmittance = 1e-4; // early termination
    int tile_size = 16;
};

/// Projects one splat. Returns nullopt when culled (behind the near plane or
/// footprint entirely off screen).
std::optional<ProjectedGaussian> project_gaussian(const GaussianSplat &splat, int shDegree, const CameraModel &cam,
                                                  const RenderSettings &settings = {});

/// Perspective Jacobian of (u, v) with respect to camera-space position.
Eigen::Matrix<double, 2, 3> projection_jacobian(const CameraModel &cam, const Point3 &cameraPoint);

struct RenderStats {
    std::size_t projected = 0;
    std::size_t culled = 0;
    std::size_t singular = 0; // skipped: covariance not invertible
};

/// Tile-based front-to-back compositing. Splats are ordered by (depth,
/// input index); each contributes alpha * exp(-1/2 d^T cov^-1 d) inside its
/// cutoff ellipse. Remaining transmittance multiplies the background; the
/// output alpha channel holds 1 - transmittance.
Image render(const GaussianSet &set, const CameraModel &cam, const Rgb &background,
             const RenderSettings &settings = {}, RenderStats *stats = nullptr);

/// Reference renderer: every pixel walks every projected splat, same
/// compositing rule, no tiling.
Image render_reference(const GaussianSet &set, const CameraModel &cam, const Rgb &background,
                       const RenderSettings &settings = {});

} // namespace splatgrasp
