#pragma once

#include "splatgrasp/geometry.hpp"
#include "splatgrasp/ply.hpp"
#include "splatgrasp/triplane.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace splatgrasp {

/// Number of SH coefficients per color channel for degree L.
constexpr std::size_t sh_basis_count(int degree) {
    return static_cast<std::size_t>((degree + 1) * (degree + 1));
}

/// Anisotropic 3D Gaussian. `sh` holds 3*(L+1)^2 coefficients laid out
/// basis-major: sh[k * 3 + channel].
struct GaussianSplat {
    Point3 position = Point3::Zero();
    double opacity = 1.0;
    Vec3 scale = Vec3::Ones(); // per-axis standard deviations
    Rotation rotation;
    std::vector<double> sh;

    /// Throws std::invalid_argument when an attribute is out of range.
    void validate(int shDegree) const;
    /// R diag(s^2) R^T.
    Mat3 covariance() const;
};

struct GaussianSet {
    std::vector<GaussianSplat> splats;
    int sh_degree = 1;

    std::size_t size() const { return splats.size(); }
    bool empty() const { return splats.empty(); }
    void validate() const;
};

/// Real SH basis values for degrees 0..2 in the usual splatting sign
/// convention, ordered by degree then m = -l..l.
std::vector<double> sh_basis(int degree, const Vec3 &dir);

/// Evaluates view-dependent color along `dir` (unit), adds 0.5 and clamps
/// each channel to [0, 1].
Rgb evaluate_sh(std::span<const double> sh, int degree, const Vec3 &dir);

enum class Activation { Linear, ReLU, Tanh };

struct DenseLayer {
    Activation activation = Activation::Linear;
    Eigen::MatrixXd weight; // out x in
    Eigen::VectorXd bias;   // out

    std::size_t inputs() const { return static_cast<std::size_t>(weight.cols()); }
    std::size_t outputs() const { return static_cast<std::size_t>(weight.rows()); }
};

/// Maps raw network outputs onto valid splat attributes.
struct AttributeMapping {
    double max_offset = 0.05; // |offset| per axis <= max_offset (tanh bound)
    double max_scale = 1.0;   // scales are clamped to [1e-6, max_scale]
    int sh_degree = 1;
};

/// Raw output layout: offset(3) | opacity logit(1) | log scale(3) |
/// quaternion wxyz(4) | sh(3*(L+1)^2).
constexpr std::size_t raw_output_size(int shDegree) { return 11 + 3 * sh_basis_count(shDegree); }

/// Small MLP taking concat(x, feature) to the raw attribute vector.
class DecoderWeights {
public:
    DecoderWeights() = default;
    DecoderWeights(std::vector<DenseLayer> layers, AttributeMapping mapping);

    /// Hidden ReLU layers of the given widths and a linear head. Weights are
    /// He-uniform from the seed; the head is scaled down and biased so the
    /// decoded splats start small, mostly opaque, unrotated and grey.
    static DecoderWeights make_default(std::size_t featureSize, AttributeMapping mapping,
                                       std::vector<std::size_t> hidden = {64, 64},
                                       std::uint64_t seed = 7);
    /// Every weight and bias drawn uniformly from [-scale, scale].
    static DecoderWeights make_random(std::vector<std::size_t> sizes, std::vector<Activation> activations,
                                      AttributeMapping mapping, std::uint64_t seed, double scale = 0.5);

    const std::vector<DenseLayer> &layers() const { return mLayers; }
    const AttributeMapping &mapping() const { return mMapping; }
    std::size_t input_size() const;
    std::size_t output_size() const;

    /// All parameters flattened layer by layer: weights row-major, then bias.
    std::vector<double> parameters() const;
    DecoderWeights with_parameters(std::span<const double> params) const;
    std::size_t parameter_count() const;

private:
    std::vector<DenseLayer> mLayers;
    AttributeMapping mMapping;
};

/// Forward pass on concat(x, f). Throws std::invalid_argument on dimension
/// mismatch and NumericalError naming the layer on a non-finite activation.
Eigen::VectorXd decode_raw(const DecoderWeights &weights, const Point3 &x, std::span<const double> f);

/// Activation mapping: position = x + max_offset * tanh(raw), opacity =
/// sigmoid, scale = clamp(exp(raw), 1e-6, max_scale), rotation = normalized
/// quaternion (identity below norm 1e-12), sh = raw.
GaussianSplat map_attributes(const Eigen::VectorXd &raw, const Point3 &x, const AttributeMapping &mapping);

GaussianSplat decode_gaussian(const DecoderWeights &weights, const Point3 &x, std::span<const double> f);

/// Jacobians of the raw outputs (before attribute mapping).
struct DecoderJacobian {
    Eigen::MatrixXd wrt_input;  // outputs x (3 + feature size)
    Eigen::MatrixXd wrt_params; // outputs x parameter_count(), parameters() order
};

DecoderJacobian decode_gradients(const DecoderWeights &weights, const Point3 &x, std::span<const double> f);

/// Queries the triplane at each point and decodes one splat per point.
GaussianSet decode_gaussians(const DecoderWeights &weights, const Triplane &tri, std::span<const Point3> points);

/// JSON manifest (layer sizes, activations, mapping) plus a raw float32
/// payload: per layer, weights row-major then bias.
void write_decoder_weights(const std::filesystem::path &manifest, const std::filesystem::path &payload,
                           const DecoderWeights &weights);
DecoderWeights read_decoder_weights(const std::filesystem::path &manifest);

/// Splatting PLY layout: x y z nx ny nz f_dc_0..2 f_rest_* opacity(logit)
/// scale_0..2(log) rot_0..3(wxyz), all float32.
PlyDocument gaussians_to_ply(const GaussianSet &set);
GaussianSet gaussians_from_ply(const PlyDocument &doc);
void write_gaussians(const std::filesystem::path &path, const GaussianSet &set);
GaussianSet read_gaussians(const std::filesystem::path &path);

} // namespace splatgrasp
