#include "splatgrasp/triplane.hpp"

#include "splatgrasp/errors.hpp"
#include "splatgrasp/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <stdexcept>

namespace splatgrasp {

namespace {

constexpr PlaneId kPlanes[3] = {PlaneId::XY, PlaneId::XZ, PlaneId::YZ};

// (column axis, row axis, orthogonal axis) per plane.
constexpr int kAxes[3][3] = {{0, 1, 2}, {0, 2, 1}, {1, 2, 0}};

struct Tap {
    std::size_t col0, row0, col1, row1;
    double fc, fr;
};

Tap bilinearTap(double gx, double gy, std::size_t width, std::size_t height) {
    auto axis = [](double g, std::size_t n, std::size_t &i0, std::size_t &i1, double &f) {
        if (n == 1) {
            i0 = i1 = 0;
            f = 0.0;
            return;
        }
        g = std::clamp(g, 0.0, static_cast<double>(n - 1));
        i0 = std::min(static_cast<std::size_t>(std::floor(g)), n - 2);
        i1 = i0 + 1;
        f = g - static_cast<double>(i0);
    };
    Tap t{};
    axis(gx, width, t.col0, t.col1, t.fc);
    axis(gy, height, t.row0, t.row1, t.fr);
    return t;
}

} // namespace

Triplane::Triplane(std::size_t channels, std::size_t height, std::size_t width, Extent extent)
    : Triplane(channels, height, width, extent, std::vector<double>(3 * channels * height * width, 0.0)) {}

Triplane::Triplane(std::size_t channels, std::size_t height, std::size_t width, Extent extent,
                   std::vector<double> values)
    : mChannels(channels), mHeight(height), mWidth(width), mExtent(extent), mValues(std::move(values)) {
    if (channels == 0 || height == 0 || width == 0) throw std::invalid_argument("triplane dimensions must be positive");
    if (mValues.size() != 3 * channels * height * width)
        throw std::invalid_argument("triplane payload size does not match 3*C*H*W");
    if (!((mExtent.max - mExtent.min).array() > 0.0).all()) throw std::invalid_argument("triplane extent must have positive volume");
    for (double v : mValues)
        if (!std::isfinite(v)) throw NumericalError("triplane contains a non-finite value");
}

void Triplane::set(PlaneId plane, std::size_t c, std::size_t row, std::size_t col, double v) {
    if (!std::isfinite(v)) throw NumericalError("triplane value must be finite");
    mValues[index(plane, c, row, col)] = v;
}

Eigen::Vector2d Triplane::grid_coordinates(PlaneId plane, const Point3 &x) const {
    const int *axes = kAxes[static_cast<int>(plane)];
    auto toGrid = [&](int axis, std::size_t n) {
        const double u = 2.0 * (x[axis] - mExtent.min[axis]) / (mExtent.max[axis] - mExtent.min[axis]) - 1.0;
        return (u + 1.0) * 0.5 * static_cast<double>(n) - 0.5;
    };
    return {toGrid(axes[0], mWidth), toGrid(axes[1], mHeight)};
}

double Triplane::max_neighbor_difference() const {
    double best = 0.0;
    for (PlaneId p : kPlanes)
        for (std::size_t c = 0; c < mChannels; ++c)
            for (std::size_t r = 0; r < mHeight; ++r)
                for (std::size_t k = 0; k < mWidth; ++k) {
                    const double v = at(p, c, r, k);
                    if (k + 1 < mWidth) best = std::max(best, std::abs(at(p, c, r, k + 1) - v));
                    if (r + 1 < mHeight) best = std::max(best, std::abs(at(p, c, r + 1, k) - v));
                }
    return best;
}

TriplaneFeature query(const Triplane &tri, const Point3 &x) {
    const std::size_t C = tri.channels();
    TriplaneFeature out(3 * C);
    const Extent &ext = tri.extent();
    for (int p = 0; p < 3; ++p) {
        const int *axes = kAxes[p];
        // Clamp to the [-1, 1] domain first, then to the node range.
        auto toGrid = [&](int axis, std::size_t n) {
            double u = 2.0 * (x[axis] - ext.min[axis]) / (ext.max[axis] - ext.min[axis]) - 1.0;
            u = std::clamp(u, -1.0, 1.0);
            return (u + 1.0) * 0.5 * static_cast<double>(n) - 0.5;
        };
        const Tap t = bilinearTap(toGrid(axes[0], tri.width()), toGrid(axes[1], tri.height()), tri.width(),
                                  tri.height());
        const double w00 = (1.0 - t.fc) * (1.0 - t.fr);
        const double w10 = t.fc * (1.0 - t.fr);
        const double w01 = (1.0 - t.fc) * t.fr;
        const double w11 = t.fc * t.fr;
        for (std::size_t c = 0; c < C; ++c) {
            out[p * C + c] = w00 * tri.at(kPlanes[p], c, t.row0, t.col0) + w10 * tri.at(kPlanes[p], c, t.row0, t.col1) +
                             w01 * tri.at(kPlanes[p], c, t.row1, t.col0) + w11 * tri.at(kPlanes[p], c, t.row1, t.col1);
        }
    }
    return out;
}

std::vector<TriplaneFeature> query_batch(const Triplane &tri, std::span<const Point3> xs) {
    std::vector<TriplaneFeature> out(xs.size());
    parallel_for(xs.size(), [&](std::size_t i) { out[i] = query(tri, xs[i]); });
    return out;
}

Extent padded_extent(const PointCloud &cloud, double padding) {
    auto [lo, hi] = cloud.bounds();
    Extent e;
    for (int a = 0; a < 3; ++a) {
        double side = hi[a] - lo[a];
        const double pad = side > 0.0 ? padding * side : 0.5;
        e.min[a] = lo[a] - pad;
        e.max[a] = hi[a] + pad;
    }
    return e;
}

Triplane synthesize_triplane(const PointCloud &cloud, std::size_t channels, std::size_t height,
                             std::size_t width, const Extent &extent) {
    if (channels < 6) throw std::invalid_argument("synthesize_triplane needs at least 6 channels");
    Triplane tri(channels, height, width, extent);
    const std::size_t cells = height * width;

    for (int p = 0; p < 3; ++p) {
        const int *axes = kAxes[p];
        std::vector<double> weight(cells, 0.0), depth(cells, 0.0), depth2(cells, 0.0);
        std::vector<Vec3> normal(cells, Vec3::Zero());
        const double depthLo = extent.min[axes[2]], depthHi = extent.max[axes[2]];

        for (std::size_t i = 0; i < cloud.size(); ++i) {
            const Point3 &x = cloud[i];
            const Eigen::Vector2d g = tri.grid_coordinates(kPlanes[p], x);
            const Tap t = bilinearTap(g.x(), g.y(), width, height);
            const double d = 2.0 * (x[axes[2]] - depthLo) / (depthHi - depthLo) - 1.0;
            const std::size_t idx[4] = {t.row0 * width + t.col0, t.row0 * width + t.col1,
                                        t.row1 * width + t.col0, t.row1 * width + t.col1};
            const double w[4] = {(1 - t.fc) * (1 - t.fr), t.fc * (1 - t.fr), (1 - t.fc) * t.fr, t.fc * t.fr};
            for (int k = 0; k < 4; ++k) {
                weight[idx[k]] += w[k];
                depth[idx[k]] += w[k] * d;
                depth2[idx[k]] += w[k] * d * d;
                if (cloud.has_normals()) normal[idx[k]] += w[k] * cloud.normals()[i];
            }
        }

        const double peak = std::max(1e-12, *std::max_element(weight.begin(), weight.end()));
        for (std::size_t cell = 0; cell < cells; ++cell) {
            const std::size_t row = cell / width, col = cell % width;
            const double w = weight[cell];
            const double meanDepth = w > 0.0 ? depth[cell] / w : 0.0;
            const double spread = w > 0.0 ? std::sqrt(std::max(0.0, depth2[cell] / w - meanDepth * meanDepth)) : 0.0;
            const Vec3 meanNormal = w > 0.0 ? Vec3(normal[cell] / w) : Vec3::Zero();
            tri.set(kPlanes[p], 0, row, col, w / peak);
            for (int a = 0; a < 3; ++a) tri.set(kPlanes[p], 1 + a, row, col, meanNormal[a]);
            tri.set(kPlanes[p], 4, row, col, meanDepth);
            tri.set(kPlanes[p], 5, row, col, spread);
            for (std::size_t c = 6; c < channels; ++c) {
                const double freq = static_cast<double>((c - 6) / 2 + 1) * std::numbers::pi;
                const double v = (c % 2 == 0) ? std::sin(freq * meanDepth) : std::cos(freq * meanDepth);
                tri.set(kPlanes[p], c, row, col, w > 0.0 ? v : 0.0);
            }
        }
    }
    return tri;
}

void write_triplane(const std::filesystem::path &header, const std::filesystem::path &payload, const Triplane &tri) {
    nlohmann::ordered_json j;
    j["format"] = "triplane";
    j["version"] = 1;
    j["C"] = tri.channels();
    j["H"] = tri.height();
    j["W"] = tri.width();
    j["extent"] = {{"min", {tri.extent().min.x(), tri.extent().min.y(), tri.extent().min.z()}},
                   {"max", {tri.extent().max.x(), tri.extent().max.y(), tri.extent().max.z()}}};
    j["plane_order"] = {"xy", "xz", "yz"};
    j["plane_axes"] = {{"xy", {"x", "y"}}, {"xz", {"x", "z"}}, {"yz", {"y", "z"}}};
    j["layout"] = "plane,channel,row,column";
    j["alignment"] = "cell_center";
    j["value_encoding"] = "float32_le";
    j["payload"] = payload.filename().string();
    {
        std::ofstream out(header);
        if (!out) throw std::runtime_error("cannot write '" + header.string() + "'");
        out << j.dump(2) << "\n";
    }
    std::ofstream bin(payload, std::ios::binary);
    if (!bin) throw std::runtime_error("cannot write '" + payload.string() + "'");
    for (double v : tri.values()) {
        const float f = static_cast<float>(v);
        bin.write(reinterpret_cast<const char *>(&f), sizeof f);
    }
}

Triplane read_triplane(const std::filesystem::path &header) {
    std::ifstream in(header);
    if (!in) throw ParseError("cannot open triplane header '" + header.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
        if (j.at("value_encoding").get<std::string>() != "float32_le")
            throw ParseError("triplane: unsupported value encoding");
        const auto order = j.at("plane_order").get<std::vector<std::string>>();
        if (order != std::vector<std::string>{"xy", "xz", "yz"}) throw ParseError("triplane: unsupported plane order");
        const auto C = j.at("C").get<std::size_t>();
        const auto H = j.at("H").get<std::size_t>();
        const auto W = j.at("W").get<std::size_t>();
        const auto mn = j.at("extent").at("min").get<std::vector<double>>();
        const auto mx = j.at("extent").at("max").get<std::vector<double>>();
        if (mn.size() != 3 || mx.size() != 3) throw ParseError("triplane: extent must have 3 components");
        const std::filesystem::path payload = header.parent_path() / j.at("payload").get<std::string>();

        std::ifstream bin(payload, std::ios::binary);
        if (!bin) throw ParseError("cannot open triplane payload '" + payload.string() + "'");
        std::string bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
        const std::size_t count = 3 * C * H * W;
        if (bytes.size() != count * sizeof(float))
            throw ParseError("triplane: payload has " + std::to_string(bytes.size()) + " bytes, expected " +
                             std::to_string(count * sizeof(float)));
        std::vector<double> values(count);
        for (std::size_t i = 0; i < count; ++i) {
            float f;
            std::memcpy(&f, bytes.data() + i * sizeof(float), sizeof f);
            values[i] = f;
        }
        Extent e{Point3(mn[0], mn[1], mn[2]), Point3(mx[0], mx[1], mx[2])};
        return Triplane(C, H, W, e, std::move(values));
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(std::string("triplane header: ") + e.what());
    } catch (const std::invalid_argument &e) {
        throw ParseError(std::string("triplane: ") + e.what());
    }
}

} // namespace splatgrasp
