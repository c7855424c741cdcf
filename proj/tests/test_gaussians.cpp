#include "oracles.hpp"

#include "splatgrasp/errors.hpp"
#include "splatgrasp/gaussians.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace splatgrasp;

namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64 &gen, double s = 1.0) {
    std::uniform_real_distribution<double> u(-s, s);
    std::vector<double> v(n);
    for (auto &x : v) x = u(gen);
    return v;
}

} // namespace

TEST_CASE("SH basis matches the closed-form table") {
    std::mt19937_64 gen(1);
    std::normal_distribution<double> n(0, 1);
    for (int k = 0; k < 200; ++k) {
        const Vec3 d = Vec3(n(gen), n(gen), n(gen)).normalized();
        for (int deg = 0; deg <= 2; ++deg) {
            const auto got = sh_basis(deg, d);
            const auto want = oracle::sh_table(deg, d);
            REQUIRE(got.size() == sh_basis_count(deg));
            for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-10);
        }
    }
    CHECK_THROWS_AS(sh_basis(3, Vec3(0, 0, 1)), std::invalid_argument);
}

TEST_CASE("evaluate_sh adds the 0.5 offset and clamps") {
    std::vector<double> sh(3, 0.0);
    CHECK((evaluate_sh(sh, 0, Vec3(0, 0, 1)) - Rgb::Constant(0.5)).norm() == 0.0);
    sh = {10.0, -10.0, 0.0};
    const Rgb c = evaluate_sh(sh, 0, Vec3(0, 0, 1));
    CHECK(c[0] == 1.0);
    CHECK(c[1] == 0.0);
    CHECK_THROWS_AS(evaluate_sh(sh, 1, Vec3(0, 0, 1)), std::invalid_argument);
}

TEST_CASE("decoder forward pass matches the explicit-loop oracle") {
    AttributeMapping m;
    m.sh_degree = 2;
    const std::size_t in = 3 + 12;
    const auto w = DecoderWeights::make_random({in, 20, 16, raw_output_size(2)},
                                               {Activation::ReLU, Activation::Tanh, Activation::Linear}, m, 3);
    std::mt19937_64 gen(4);
    for (int k = 0; k < 50; ++k) {
        const auto input = random_vector(in, gen);
        const Point3 x(input[0], input[1], input[2]);
        const std::vector<double> f(input.begin() + 3, input.end());
        const Eigen::VectorXd got = decode_raw(w, x, f);
        const auto want = oracle::mlp_forward(w, input);
        for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(got[static_cast<Eigen::Index>(i)] - want[i]) <= 1e-12);
    }
    CHECK_THROWS_AS(decode_raw(w, Point3::Zero(), std::vector<double>(3)), std::invalid_argument);
}

TEST_CASE("attribute mapping keeps splats valid for extreme raw outputs") {
    AttributeMapping m;
    m.max_offset = 0.02;
    m.max_scale = 0.5;
    std::mt19937_64 gen(5);
    const Point3 x(0.1, 0.2, 0.3);
    for (int k = 0; k < 200; ++k) {
        const auto raw = random_vector(raw_output_size(1), gen, 50.0);
        const GaussianSplat s = map_attributes(Eigen::Map<const Eigen::VectorXd>(raw.data(), static_cast<Eigen::Index>(raw.size())), x, m);
        CHECK_NOTHROW(s.validate(1));
        CHECK(((s.position - x).cwiseAbs().array() <= 0.02 + 1e-12).all());
        CHECK((s.scale.array() <= 0.5).all());
        CHECK((s.scale.array() >= 1e-6).all());
    }
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(raw_output_size(1)));
    const GaussianSplat s = map_attributes(zero, x, m);
    CHECK(s.opacity == 0.5);
    CHECK((s.rotation.matrix() - Mat3::Identity()).norm() == 0.0);
    CHECK_THROWS_AS(map_attributes(Eigen::VectorXd::Zero(5), x, m), std::invalid_argument);
}

TEST_CASE("analytic Jacobians agree with central differences") {
    AttributeMapping m;
    m.sh_degree = 1;
    const std::size_t in = 3 + 6;
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        const auto w = DecoderWeights::make_random({in, 10, 8, raw_output_size(1)},
                                                   {Activation::Tanh, Activation::Tanh, Activation::Linear}, m, seed);
        std::mt19937_64 gen(seed);
        const auto params = w.parameters();
        for (int trial = 0; trial < 10; ++trial) {
            const auto input = random_vector(in, gen);
            const Point3 x(input[0], input[1], input[2]);
            const std::vector<double> f(input.begin() + 3, input.end());
            const DecoderJacobian jac = decode_gradients(w, x, f);
            const double h = 1e-6;
            double worst = 0.0;
            for (std::size_t j = 0; j < in; ++j) {
                auto plus = input, minus = input;
                plus[j] += h;
                minus[j] -= h;
                const Eigen::VectorXd fd =
                    (decode_raw(w, Point3(plus[0], plus[1], plus[2]), std::vector<double>(plus.begin() + 3, plus.end())) -
                     decode_raw(w, Point3(minus[0], minus[1], minus[2]), std::vector<double>(minus.begin() + 3, minus.end()))) /
                    (2 * h);
                const Eigen::VectorXd an = jac.wrt_input.col(static_cast<Eigen::Index>(j));
                worst = std::max(worst, (fd - an).norm() / std::max(1e-8, an.norm()));
            }
            for (std::size_t j = 0; j < params.size(); j += 7) {
                auto plus = params, minus = params;
                plus[j] += h;
                minus[j] -= h;
                const Eigen::VectorXd fd = (decode_raw(w.with_parameters(plus), x, f) - decode_raw(w.with_parameters(minus), x, f)) / (2 * h);
                const Eigen::VectorXd an = jac.wrt_params.col(static_cast<Eigen::Index>(j));
                if (an.norm() > 1e-8) worst = std::max(worst, (fd - an).norm() / an.norm());
            }
            CHECK(worst <= 1e-4);
        }
    }
}

TEST_CASE("default decoder produces small opaque grey splats") {
    AttributeMapping m;
    const auto w = DecoderWeights::make_default(96, m);
    CHECK(w.input_size() == 99);
    CHECK(w.output_size() == raw_output_size(1));
    const GaussianSplat s = decode_gaussian(w, Point3(0.1, 0, 0), std::vector<double>(96, 0.2));
    CHECK(s.opacity > 0.8);
    CHECK(s.scale.maxCoeff() < 0.03);
    CHECK_THROWS_AS(DecoderWeights({}, m), std::invalid_argument);
}

TEST_CASE("splat PLY and decoder weight files round trip") {
    GaussianSet set;
    set.sh_degree = 2;
    std::mt19937_64 gen(8);
    for (int i = 0; i < 20; ++i) {
        GaussianSplat s;
        const auto r = random_vector(20, gen);
        s.position = Point3(r[0], r[1], r[2]);
        s.opacity = 0.5 + 0.4 * r[3];
        s.scale = Vec3(0.1 + 0.05 * r[4], 0.1, 0.2);
        s.rotation = Rotation::from_wxyz(r[5], r[6], r[7], r[8]);
        s.sh = random_vector(27, gen);
        set.splats.push_back(s);
    }
    const GaussianSet back = gaussians_from_ply(parse_ply(serialize_ply(gaussians_to_ply(set))));
    REQUIRE(back.size() == 20);
    CHECK(back.sh_degree == 2);
    for (std::size_t i = 0; i < 20; ++i) {
        CHECK((back.splats[i].position - set.splats[i].position).norm() < 1e-6);
        CHECK(std::abs(back.splats[i].opacity - set.splats[i].opacity) < 1e-6);
        CHECK((back.splats[i].covariance() - set.splats[i].covariance()).norm() < 1e-6);
        for (std::size_t k = 0; k < 27; ++k) CHECK(std::abs(back.splats[i].sh[k] - set.splats[i].sh[k]) < 1e-6);
    }

    AttributeMapping m;
    const auto w = DecoderWeights::make_random({5, 4, raw_output_size(1)}, {Activation::Tanh, Activation::Linear}, m, 2);
    const auto dir = std::filesystem::temp_directory_path() / "splatgrasp_weights_test";
    std::filesystem::create_directories(dir);
    write_decoder_weights(dir / "w.json", dir / "w.bin", w);
    const DecoderWeights wb = read_decoder_weights(dir / "w.json");
    REQUIRE(wb.parameter_count() == w.parameter_count());
    const auto p0 = w.parameters(), p1 = wb.parameters();
    for (std::size_t i = 0; i < p0.size(); ++i) CHECK(p1[i] == static_cast<double>(static_cast<float>(p0[i])));
    CHECK(wb.layers()[0].activation == Activation::Tanh);
    std::filesystem::remove_all(dir);
}
