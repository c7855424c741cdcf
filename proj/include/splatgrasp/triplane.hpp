#pragma once

#include "splatgrasp/geometry.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace splatgrasp {

/// Plane order used everywhere: XY, XZ, YZ. For each plane the first named
/// axis runs along the columns (width) and the second along the rows (height).
enum class PlaneId { XY = 0, XZ = 1, YZ = 2 };

/// Axis-aligned world box mapped onto the [-1, 1]^2 domain of every plane.
struct Extent {
    Point3 min = Point3::Constant(-1.0);
    Point3 max = Point3::Constant(1.0);
};

/// Concatenated per-plane features, length 3*C, ordered XY, XZ, YZ.
using TriplaneFeature = std::vector<double>;

/// Three C x H x W feature grids stored plane-major, channel-major, row-major.
///
/// Grid alignment uses cell centers: node i along an axis of n cells sits at
/// normalized coordinate (i + 0.5) / n * 2 - 1. Lookups are bilinear per plane;
/// coordinates outside [-1, 1] are clamped to the border, and the half-cell
/// margin between the outermost node and the border repeats the edge value.
class Triplane {
public:
    Triplane(std::size_t channels, std::size_t height, std::size_t width, Extent extent);
    Triplane(std::size_t channels, std::size_t height, std::size_t width, Extent extent,
             std::vector<double> values);

    std::size_t channels() const { return mChannels; }
    std::size_t height() const { return mHeight; }
    std::size_t width() const { return mWidth; }
    const Extent &extent() const { return mExtent; }
    std::size_t feature_size() const { return 3 * mChannels; }

    std::span<const double> values() const { return mValues; }

    double at(PlaneId plane, std::size_t c, std::size_t row, std::size_t col) const {
        return mValues[index(plane, c, row, col)];
    }
    void set(PlaneId plane, std::size_t c, std::size_t row, std::size_t col, double v);

    std::size_t index(PlaneId plane, std::size_t c, std::size_t row, std::size_t col) const {
        return ((static_cast<std::size_t>(plane) * mChannels + c) * mHeight + row) * mWidth + col;
    }

    /// Continuous (column, row) grid coordinates of x on a plane, before
    /// border clamping.
    Eigen::Vector2d grid_coordinates(PlaneId plane, const Point3 &x) const;

    /// Largest absolute difference between horizontally or vertically
    /// adjacent nodes over all planes and channels.
    double max_neighbor_difference() const;

private:
    std::size_t mChannels, mHeight, mWidth;
    Extent mExtent;
    std::vector<double> mValues;
};

TriplaneFeature query(const Triplane &tri, const Point3 &x);
std::vector<TriplaneFeature> query_batch(const Triplane &tri, std::span<const Point3> xs);

/// Bounding box of the cloud grown by `padding` (fraction of each side) on
/// every side; degenerate axes get a unit-size margin.
Extent padded_extent(const PointCloud &cloud, double padding = 0.1);

/// Builds plane features analytically from a cloud (stand-in for a learned
/// triplane decoder). Per plane: channel 0 is splatted point density
/// normalized to a peak of 1, channels 1-3 the mean normal, channel 4 the mean
/// coordinate along the axis orthogonal to the plane, channel 5 its spread,
/// and remaining channels sinusoidal encodings of channel 4.
Triplane synthesize_triplane(const PointCloud &cloud, std::size_t channels, std::size_t height,
                             std::size_t width, const Extent &extent);

/// JSON header + raw little-endian float32 payload (3*C*H*W values in
/// plane-major, channel-major, row-major order). `header` is the .json path;
/// the payload file name is stored in it and resolved relative to it.
void write_triplane(const std::filesystem::path &header, const std::filesystem::path &payload,
                    const Triplane &tri);
Triplane read_triplane(const std::filesystem::path &header);

} // namespace splatgrasp
