#include "splatgrasp/gaussians.hpp"

#include "splatgrasp/errors.hpp"
#include "splatgrasp/parallel.hpp"
#include "splatgrasp/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>

namespace splatgrasp {

namespace {

constexpr double kShC0 = 0.28209479177387814;
constexpr double kShC1 = 0.4886025119029199;
constexpr double kShC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                             -1.0925484305920792, 0.5462742152960396};

double activate(Activation a, double z) {
    switch (a) {
    case Activation::Linear: return z;
    case Activation::ReLU: return z > 0.0 ? z : 0.0;
    case Activation::Tanh: return std::tanh(z);
    }
    return z;
}

double activateDerivative(Activation a, double z) {
    switch (a) {
    case Activation::Linear: return 1.0;
    case Activation::ReLU: return z > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: {
        const double t = std::tanh(z);
        return 1.0 - t * t;
    }
    }
    return 1.0;
}

const char *activationName(Activation a) {
    switch (a) {
    case Activation::Linear: return "linear";
    case Activation::ReLU: return "relu";
    case Activation::Tanh: return "tanh";
    }
    return "linear";
}

Activation parseActivation(const std::string &s) {
    if (s == "linear") return Activation::Linear;
    if (s == "relu") return Activation::ReLU;
    if (s == "tanh") return Activation::Tanh;
    throw ParseError("unknown activation '" + s + "'");
}

Eigen::VectorXd packInput(const DecoderWeights &weights, const Point3 &x, std::span<const double> f) {
    if (weights.layers().empty()) throw std::invalid_argument("decoder has no layers");
    if (f.size() + 3 != weights.input_size())
        throw std::invalid_argument("feature length " + std::to_string(f.size()) + " does not match decoder input " +
                                    std::to_string(weights.input_size()) + " - 3");
    Eigen::VectorXd in(static_cast<Eigen::Index>(f.size() + 3));
    in.head<3>() = x;
    for (std::size_t i = 0; i < f.size(); ++i) in[static_cast<Eigen::Index>(i + 3)] = f[i];
    return in;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

} // namespace

void GaussianSplat::validate(int shDegree) const {
    if (!position.allFinite()) throw std::invalid_argument("splat position is not finite");
    if (!(opacity >= 0.0 && opacity <= 1.0)) throw std::invalid_argument("splat opacity outside [0, 1]");
    if (!(scale.array() > 0.0).all() || !scale.allFinite()) throw std::invalid_argument("splat scale must be positive");
    if (std::abs(rotation.quaternion().norm() - 1.0) > 1e-9) throw std::invalid_argument("splat rotation is not unit");
    if (sh.size() != 3 * sh_basis_count(shDegree)) throw std::invalid_argument("splat SH length does not match degree");
}

Mat3 GaussianSplat::covariance() const {
    const Mat3 r = rotation.matrix();
    return r * scale.array().square().matrix().asDiagonal() * r.transpose();
}

void GaussianSet::validate() const {
    for (const auto &s : splats) s.validate(sh_degree);
}

std::vector<double> sh_basis(int degree, const Vec3 &dir) {
    if (degree < 0 || degree > 2) throw std::invalid_argument("SH degree must be in [0, 2]");
    std::vector<double> y;
    y.reserve(sh_basis_count(degree));
    y.push_back(kShC0);
    if (degree >= 1) {
        const double x = dir.x(), yy = dir.y(), z = dir.z();
        y.push_back(-kShC1 * yy);
        y.push_back(kShC1 * z);
        y.push_back(-kShC1 * x);
        if (degree >= 2) {
            y.push_back(kShC2[0] * x * yy);
            y.push_back(kShC2[1] * yy * z);
            y.push_back(kShC2[2] * (2.0 * z * z - x * x - yy * yy));
            y.push_back(kShC2[3] * x * z);
            y.push_back(kShC2[4] * (x * x - yy * yy));
        }
    }
    return y;
}

Rgb evaluate_sh(std::span<const double> sh, int degree, const Vec3 &dir) {
    if (degree < 0 || degree > 2) throw std::invalid_argument("SH degree must be in [0, 2]");
    const std::size_t k = sh_basis_count(degree);
    if (sh.size() != 3 * k) throw std::invalid_argument("SH coefficient count does not match degree");
    const auto basis = sh_basis(degree, dir);
    Rgb c = Rgb::Zero();
    for (std::size_t i = 0; i < k; ++i)
        for (int ch = 0; ch < 3; ++ch) c[ch] += basis[i] * sh[i * 3 + ch];
    for (int ch = 0; ch < 3; ++ch) c[ch] = std::clamp(c[ch] + 0.5, 0.0, 1.0);
    return c;
}

DecoderWeights::DecoderWeights(std::vector<DenseLayer> layers, AttributeMapping mapping)
    : mLayers(std::move(layers)), mMapping(mapping) {
    if (mLayers.empty()) throw std::invalid_argument("decoder needs at least one layer");
    for (std::size_t i = 0; i < mLayers.size(); ++i) {
        const auto &l = mLayers[i];
        if (l.bias.size() != l.weight.rows())
            throw std::invalid_argument("layer " + std::to_string(i) + ": bias size does not match outputs");
        if (i > 0 && l.inputs() != mLayers[i - 1].outputs())
            throw std::invalid_argument("layer " + std::to_string(i) + ": input size does not match previous layer");
        if (!l.weight.allFinite() || !l.bias.allFinite())
            throw NumericalError("layer " + std::to_string(i) + ": non-finite weights");
    }
    if (input_size() < 3) throw std::invalid_argument("decoder input must include the 3 position coordinates");
    if (mMapping.sh_degree < 0 || mMapping.sh_degree > 2) throw std::invalid_argument("SH degree must be in [0, 2]");
    if (output_size() != raw_output_size(mMapping.sh_degree))
        throw std::invalid_argument("decoder output size " + std::to_string(output_size()) + " does not match " +
                                    std::to_string(raw_output_size(mMapping.sh_degree)) + " raw attributes");
    if (!(mMapping.max_offset >= 0.0) || !(mMapping.max_scale >= 1e-6))
        throw std::invalid_argument("invalid attribute mapping bounds");
}

DecoderWeights DecoderWeights::make_default(std::size_t featureSize, AttributeMapping mapping,
                                            std::vector<std::size_t> hidden, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<DenseLayer> layers;
    std::size_t in = featureSize + 3;
    std::vector<std::size_t> sizes = hidden;
    sizes.push_back(raw_output_size(mapping.sh_degree));
    for (std::size_t li = 0; li < sizes.size(); ++li) {
        const bool head = li + 1 == sizes.size();
        DenseLayer l;
        l.activation = head ? Activation::Linear : Activation::ReLU;
        l.weight.resize(static_cast<Eigen::Index>(sizes[li]), static_cast<Eigen::Index>(in));
        l.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sizes[li]));
        const double bound = std::sqrt(6.0 / static_cast<double>(in)) * (head ? 0.01 : 1.0);
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = rng.uniform(-bound, bound);
        if (head) {
            l.bias[3] = 2.0; // opacity ~0.88
            for (int a = 0; a < 3; ++a) l.bias[4 + a] = std::log(0.015);
            l.bias[7] = 1.0; // identity quaternion
        }
        layers.push_back(std::move(l));
        in = sizes[li];
    }
    return DecoderWeights(std::move(layers), mapping);
}

DecoderWeights DecoderWeights::make_random(std::vector<std::size_t> sizes, std::vector<Activation> activations,
                                           AttributeMapping mapping, std::uint64_t seed, double scale) {
    if (sizes.size() < 2 || activations.size() + 1 != sizes.size())
        throw std::invalid_argument("make_random needs n+1 sizes for n activations");
    Rng rng(seed);
    std::vector<DenseLayer> layers;
    for (std::size_t li = 0; li + 1 < sizes.size(); ++li) {
        DenseLayer l;
        l.activation = activations[li];
        l.weight.resize(static_cast<Eigen::Index>(sizes[li + 1]), static_cast<Eigen::Index>(sizes[li]));
        l.bias.resize(static_cast<Eigen::Index>(sizes[li + 1]));
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = rng.uniform(-scale, scale);
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = rng.uniform(-scale, scale);
        layers.push_back(std::move(l));
    }
    return DecoderWeights(std::move(layers), mapping);
}

std::size_t DecoderWeights::input_size() const { return mLayers.empty() ? 0 : mLayers.front().inputs(); }

std::size_t DecoderWeights::output_size() const { return mLayers.empty() ? 0 : mLayers.back().outputs(); }

std::size_t DecoderWeights::parameter_count() const {
    std::size_t n = 0;
    for (const auto &l : mLayers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

std::vector<double> DecoderWeights::parameters() const {
    std::vector<double> p;
    p.reserve(parameter_count());
    for (const auto &l : mLayers) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) p.push_back(l.weight(r, c));
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) p.push_back(l.bias[r]);
    }
    return p;
}

DecoderWeights DecoderWeights::with_parameters(std::span<const double> params) const {
    if (params.size() != parameter_count()) throw std::invalid_argument("parameter count mismatch");
    std::vector<DenseLayer> layers = mLayers;
    std::size_t k = 0;
    for (auto &l : layers) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = params[k++];
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = params[k++];
    }
    return DecoderWeights(std::move(layers), mMapping);
}

Eigen::VectorXd decode_raw(const DecoderWeights &weights, const Point3 &x, std::span<const double> f) {
    Eigen::VectorXd a = packInput(weights, x, f);
    if (!a.allFinite()) throw NumericalError("decoder input is not finite");
    const auto &layers = weights.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        Eigen::VectorXd z = layers[i].weight * a + layers[i].bias;
        for (Eigen::Index r = 0; r < z.size(); ++r) z[r] = activate(layers[i].activation, z[r]);
        if (!z.allFinite()) throw NumericalError("non-finite activation in decoder layer " + std::to_string(i));
        a = std::move(z);
    }
    return a;
}

GaussianSplat map_attributes(const Eigen::VectorXd &raw, const Point3 &x, const AttributeMapping &mapping) {
    if (static_cast<std::size_t>(raw.size()) != raw_output_size(mapping.sh_degree))
        throw std::invalid_argument("raw attribute vector has the wrong length");
    GaussianSplat s;
    for (int a = 0; a < 3; ++a) s.position[a] = x[a] + mapping.max_offset * std::tanh(raw[a]);
    s.opacity = sigmoid(raw[3]);
    for (int a = 0; a < 3; ++a) s.scale[a] = std::clamp(std::exp(raw[4 + a]), 1e-6, mapping.max_scale);
    s.rotation = Rotation::from_wxyz(raw[7], raw[8], raw[9], raw[10]);
    s.sh.assign(raw.data() + 11, raw.data() + raw.size());
    return s;
}

GaussianSplat decode_gaussian(const DecoderWeights &weights, const Point3 &x, std::span<const double> f) {
    return map_attributes(decode_raw(weights, x, f), x, weights.mapping());
}

DecoderJacobian decode_gradients(const DecoderWeights &weights, const Point3 &x, std::span<const double> f) {
    const auto &layers = weights.layers();
    const std::size_t L = layers.size();

    // Forward, keeping inputs and pre-activations of every layer.
    std::vector<Eigen::VectorXd> inputs(L), pre(L);
    Eigen::VectorXd a = packInput(weights, x, f);
    for (std::size_t i = 0; i < L; ++i) {
        inputs[i] = a;
        pre[i] = layers[i].weight * a + layers[i].bias;
        a = pre[i];
        for (Eigen::Index r = 0; r < a.size(); ++r) a[r] = activate(layers[i].activation, a[r]);
        if (!a.allFinite()) throw NumericalError("non-finite activation in decoder layer " + std::to_string(i));
    }

    const auto outputs = static_cast<Eigen::Index>(weights.output_size());
    DecoderJacobian jac;
    jac.wrt_input.resize(outputs, static_cast<Eigen::Index>(weights.input_size()));
    jac.wrt_params.setZero(outputs, static_cast<Eigen::Index>(weights.parameter_count()));

    std::vector<std::size_t> offsets(L);
    std::size_t off = 0;
    for (std::size_t i = 0; i < L; ++i) {
        offsets[i] = off;
        off += static_cast<std::size_t>(layers[i].weight.size() + layers[i].bias.size());
    }

    // One reverse sweep per output row.
    for (Eigen::Index k = 0; k < outputs; ++k) {
        Eigen::VectorXd delta = Eigen::VectorXd::Zero(outputs);
        delta[k] = activateDerivative(layers[L - 1].activation, pre[L - 1][k]);
        for (std::size_t i = L; i-- > 0;) {
            const auto &l = layers[i];
            const auto rows = l.weight.rows(), cols = l.weight.cols();
            auto row = jac.wrt_params.row(k);
            Eigen::Index p = static_cast<Eigen::Index>(offsets[i]);
            for (Eigen::Index r = 0; r < rows; ++r)
                for (Eigen::Index c = 0; c < cols; ++c) row[p++] = delta[r] * inputs[i][c];
            for (Eigen::Index r = 0; r < rows; ++r) row[p++] = delta[r];

            Eigen::VectorXd back = l.weight.transpose() * delta;
            if (i == 0) {
                jac.wrt_input.row(k) = back.transpose();
            } else {
                for (Eigen::Index r = 0; r < back.size(); ++r)
                    back[r] *= activateDerivative(layers[i - 1].activation, pre[i - 1][r]);
                delta = std::move(back);
            }
        }
    }
    return jac;
}

GaussianSet decode_gaussians(const DecoderWeights &weights, const Triplane &tri, std::span<const Point3> points) {
    GaussianSet set;
    set.sh_degree = weights.mapping().sh_degree;
    set.splats.resize(points.size());
    parallel_for(points.size(), [&](std::size_t i) {
        const TriplaneFeature feat = query(tri, points[i]);
        set.splats[i] = decode_gaussian(weights, points[i], feat);
    });
    return set;
}

void write_decoder_weights(const std::filesystem::path &manifest, const std::filesystem::path &payload,
                           const DecoderWeights &weights) {
    nlohmann::ordered_json j;
    j["format"] = "gaussian_decoder";
    j["version"] = 1;
    j["input_size"] = weights.input_size();
    nlohmann::ordered_json layers = nlohmann::ordered_json::array();
    for (const auto &l : weights.layers())
        layers.push_back({{"inputs", l.inputs()}, {"outputs", l.outputs()}, {"activation", activationName(l.activation)}});
    j["layers"] = layers;
    j["mapping"] = {{"max_offset", weights.mapping().max_offset},
                    {"max_scale", weights.mapping().max_scale},
                    {"sh_degree", weights.mapping().sh_degree}};
    j["value_encoding"] = "float32_le";
    j["payload_order"] = "per layer: weight row-major (outputs x inputs), then bias";
    j["payload"] = payload.filename().string();
    {
        std::ofstream out(manifest);
        if (!out) throw std::runtime_error("cannot write '" + manifest.string() + "'");
        out << j.dump(2) << "\n";
    }
    std::ofstream bin(payload, std::ios::binary);
    if (!bin) throw std::runtime_error("cannot write '" + payload.string() + "'");
    for (double v : weights.parameters()) {
        const float f = static_cast<float>(v);
        bin.write(reinterpret_cast<const char *>(&f), sizeof f);
    }
}

DecoderWeights read_decoder_weights(const std::filesystem::path &manifest) {
    std::ifstream in(manifest);
    if (!in) throw ParseError("cannot open decoder manifest '" + manifest.string() + "'");
    try {
        nlohmann::json j;
        in >> j;
        if (j.at("value_encoding").get<std::string>() != "float32_le")
            throw ParseError("decoder weights: unsupported value encoding");
        AttributeMapping mapping;
        mapping.max_offset = j.at("mapping").at("max_offset").get<double>();
        mapping.max_scale = j.at("mapping").at("max_scale").get<double>();
        mapping.sh_degree = j.at("mapping").at("sh_degree").get<int>();

        const std::filesystem::path payload = manifest.parent_path() / j.at("payload").get<std::string>();
        std::ifstream bin(payload, std::ios::binary);
        if (!bin) throw ParseError("cannot open decoder payload '" + payload.string() + "'");
        std::string bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

        std::vector<DenseLayer> layers;
        std::size_t k = 0;
        auto next = [&]() {
            if ((k + 1) * sizeof(float) > bytes.size()) throw ParseError("decoder payload is truncated");
            float f;
            std::memcpy(&f, bytes.data() + k * sizeof(float), sizeof f);
            ++k;
            return static_cast<double>(f);
        };
        for (const auto &lj : j.at("layers")) {
            DenseLayer l;
            l.activation = parseActivation(lj.at("activation").get<std::string>());
            const auto rows = lj.at("outputs").get<Eigen::Index>();
            const auto cols = lj.at("inputs").get<Eigen::Index>();
            l.weight.resize(rows, cols);
            l.bias.resize(rows);
            for (Eigen::Index r = 0; r < rows; ++r)
                for (Eigen::Index c = 0; c < cols; ++c) l.weight(r, c) = next();
            for (Eigen::Index r = 0; r < rows; ++r) l.bias[r] = next();
            layers.push_back(std::move(l));
        }
        if (k * sizeof(float) != bytes.size()) throw ParseError("decoder payload has trailing bytes");
        return DecoderWeights(std::move(layers), mapping);
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(std::string("decoder manifest: ") + e.what());
    } catch (const std::invalid_argument &e) {
        throw ParseError(std::string("decoder weights: ") + e.what());
    }
}

PlyDocument gaussians_to_ply(const GaussianSet &set) {
    const std::size_t n = set.size();
    const std::size_t k = sh_basis_count(set.sh_degree);
    PlyElement v;
    v.name = "vertex";
    v.count = n;
    auto add = [&](std::string name, auto get) {
        v.properties.push_back({std::move(name), PlyScalar::Float32});
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = get(set.splats[i]);
        v.columns.push_back(std::move(col));
    };
    for (int a = 0; a < 3; ++a) add(std::string(1, "xyz"[a]), [a](const GaussianSplat &s) { return s.position[a]; });
    for (int a = 0; a < 3; ++a) add(std::string("n") + "xyz"[a], [](const GaussianSplat &) { return 0.0; });
    for (int ch = 0; ch < 3; ++ch)
        add("f_dc_" + std::to_string(ch), [ch](const GaussianSplat &s) { return s.sh[static_cast<std::size_t>(ch)]; });
    // f_rest is channel-major: index = channel * (K - 1) + (basis - 1).
    for (int ch = 0; ch < 3; ++ch)
        for (std::size_t b = 1; b < k; ++b)
            add("f_rest_" + std::to_string(static_cast<std::size_t>(ch) * (k - 1) + (b - 1)),
                [ch, b](const GaussianSplat &s) { return s.sh[b * 3 + static_cast<std::size_t>(ch)]; });
    add("opacity", [](const GaussianSplat &s) {
        const double a = std::clamp(s.opacity, 1e-7, 1.0 - 1e-7);
        return std::log(a / (1.0 - a));
    });
    for (int a = 0; a < 3; ++a)
        add("scale_" + std::to_string(a), [a](const GaussianSplat &s) { return std::log(s.scale[a]); });
    for (int a = 0; a < 4; ++a)
        add("rot_" + std::to_string(a), [a](const GaussianSplat &s) { return s.rotation.wxyz()[static_cast<std::size_t>(a)]; });

    PlyDocument doc;
    doc.format = PlyFormat::BinaryLittleEndian;
    doc.elements.push_back(std::move(v));
    return doc;
}

GaussianSet gaussians_from_ply(const PlyDocument &doc) {
    const PlyElement *v = doc.find("vertex");
    if (!v) throw ParseError("gaussian ply: no vertex element");
    std::size_t rest = 0;
    while (v->find("f_rest_" + std::to_string(rest)) >= 0) ++rest;
    GaussianSet set;
    const std::size_t perChannel = rest / 3 + 1;
    if (rest % 3 != 0) throw ParseError("gaussian ply: f_rest count is not a multiple of 3");
    int degree = -1;
    for (int d = 0; d <= 2; ++d)
        if (sh_basis_count(d) == perChannel) degree = d;
    if (degree < 0) throw ParseError("gaussian ply: unsupported SH degree");
    set.sh_degree = degree;

    const auto &x = v->column("x"), &y = v->column("y"), &z = v->column("z");
    const auto &op = v->column("opacity");
    set.splats.resize(v->count);
    for (std::size_t i = 0; i < v->count; ++i) {
        GaussianSplat &s = set.splats[i];
        s.position = Point3(x[i], y[i], z[i]);
        s.opacity = 1.0 / (1.0 + std::exp(-op[i]));
        for (int a = 0; a < 3; ++a) s.scale[a] = std::exp(v->column("scale_" + std::to_string(a))[i]);
        s.rotation = Rotation::from_wxyz(v->column("rot_0")[i], v->column("rot_1")[i], v->column("rot_2")[i],
                                         v->column("rot_3")[i]);
        s.sh.assign(3 * perChannel, 0.0);
        for (int ch = 0; ch < 3; ++ch) s.sh[static_cast<std::size_t>(ch)] = v->column("f_dc_" + std::to_string(ch))[i];
        for (std::size_t ch = 0; ch < 3; ++ch)
            for (std::size_t b = 1; b < perChannel; ++b)
                s.sh[b * 3 + ch] = v->column("f_rest_" + std::to_string(ch * (perChannel - 1) + (b - 1)))[i];
    }
    try {
        set.validate();
    } catch (const std::invalid_argument &e) {
        throw ParseError(std::string("gaussian ply: ") + e.what());
    }
    return set;
}

void write_gaussians(const std::filesystem::path &path, const GaussianSet &set) {
    write_ply(path, gaussians_to_ply(set));
}

GaussianSet read_gaussians(const std::filesystem::path &path) { return gaussians_from_ply(read_ply(path)); }

} // namespace splatgrasp
