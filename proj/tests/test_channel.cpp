#include <catch2/catch_amalgamated.hpp>

#include "hybeam/channel.hpp"
#include "oracles.hpp"

using namespace hybeam;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
const std::string fixtures = std::string(HYBEAM_SOURCE_DIR) + "/data/fixtures/";
}

TEST_CASE("steering vector at broadside is constant") {
    const Eigen::VectorXcd a = steering_vector(4, 0.0);
    for (int i = 0; i < 4; ++i) {
        CHECK_THAT(a(i).real(), WithinAbs(0.5, 1e-15));
        CHECK_THAT(a(i).imag(), WithinAbs(0.0, 1e-15));
    }
}

TEST_CASE("steering vector at endfire alternates sign") {
    const Eigen::VectorXcd a = steering_vector(2, std::numbers::pi / 2.0);
    const double s = 1.0 / std::numbers::sqrt2;
    CHECK_THAT(a(0).real(), WithinAbs(s, 1e-12));
    CHECK_THAT(a(1).real(), WithinAbs(-s, 1e-12));
    CHECK_THAT(a(1).imag(), WithinAbs(0.0, 1e-12));
}

TEST_CASE("steering vectors are unit norm and correlate per the direct sum") {
    const double theta = std::numbers::pi / 4.0;
    const Eigen::VectorXcd a = steering_vector(64, theta);
    CHECK_THAT(a.norm(), WithinAbs(1.0, 1e-12));

    const double theta2 = theta + 0.3;
    const Eigen::VectorXcd b = steering_vector(64, theta2);
    // Direct evaluation of a(theta)^H a(theta2) term by term.
    std::complex<double> acc = 0.0;
    for (int n = 0; n < 64; ++n) {
        acc += std::polar(1.0 / 64.0,
                          -std::numbers::pi * n * (std::sin(theta2) - std::sin(theta)));
    }
    CHECK_THAT(std::abs(a.dot(b)), WithinAbs(std::abs(acc), 1e-12));
}

TEST_CASE("laplacian sampler hits the requested spread and mean") {
    RngStream rng(123);
    const double spread = std::numbers::pi / 18.0;
    const int n = 100000;
    double sum = 0.0, sum_sq = 0.0;
    const double b = spread / std::numbers::sqrt2;
    for (int i = 0; i < n; ++i) {
        const double x = sample_laplacian(rng, std::numbers::pi / 4.0, b);
        sum += x;
        sum_sq += x * x;
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    CHECK_THAT(var, WithinRel(spread * spread, 0.02));
    // 3 sigma of the sample mean
    CHECK_THAT(mean, WithinAbs(std::numbers::pi / 4.0, 3.0 * spread / std::sqrt(double(n))));
}

TEST_CASE("uniform mean aoa is shared by all paths") {
    RngStream rng(7);
    const PathAngles angles = sample_path_angles(rng, 6, std::nullopt, std::numbers::pi / 3.0,
                                                 std::numbers::pi / 18.0);
    REQUIRE(angles.n_paths() == 6);
    // All aoa draws cluster around one mean within a few spreads.
    const double mid = angles.aoa.mean();
    for (int l = 0; l < 6; ++l) CHECK(std::abs(angles.aoa(l) - mid) < 2.0);
}

TEST_CASE("angle fixtures load verbatim") {
    const Eigen::VectorXd aod = load_angle_fixture(fixtures + "example1_aod.txt");
    REQUIRE(aod.size() == 6);
    CHECK(aod(0) == 0.7468);
    CHECK(aod(5) == 1.1444);
    CHECK_THROWS_AS(load_angle_fixture(fixtures + "missing.txt"), FixtureMissing);
}

TEST_CASE("statistical csi stacks unit-norm steering columns") {
    PathAngles angles;
    angles.aoa = load_angle_fixture(fixtures + "example1_aoa.txt");
    angles.aod = load_angle_fixture(fixtures + "example1_aod.txt");
    const StatisticalCsi csi = build_statistical_csi(angles, 32, 64);
    REQUIRE(csi.a_rx.rows() == 32);
    REQUIRE(csi.a_tx.rows() == 64);
    REQUIRE(csi.n_paths() == 6);
    for (int l = 0; l < 6; ++l) {
        CHECK_THAT(csi.a_rx.col(l).norm(), WithinAbs(1.0, 1e-12));
        CHECK_THAT(csi.a_tx.col(l).norm(), WithinAbs(1.0, 1e-12));
        CHECK((csi.a_tx.col(l) - steering_vector(64, angles.aod(l))).norm() == 0.0);
    }
}

TEST_CASE("dft-aligned receive angles give an exactly orthonormal gram") {
    const int n_r = 8, l = 3;
    PathAngles angles;
    angles.aoa.resize(l);
    angles.aod.resize(l);
    for (int i = 0; i < l; ++i) {
        angles.aoa(i) = std::asin(2.0 * i / n_r);
        angles.aod(i) = 0.1 * i;
    }
    const StatisticalCsi csi = build_statistical_csi(angles, n_r, 16);
    const Eigen::MatrixXcd gram = csi.a_rx.adjoint() * csi.a_rx;
    CHECK((gram - Eigen::MatrixXcd::Identity(l, l)).norm() < 1e-12);
}

TEST_CASE("channel realization reconstructs from its parts") {
    RngStream rng(99);
    PathAngles angles;
    angles.aoa = load_angle_fixture(fixtures + "example1_aoa.txt");
    angles.aod = load_angle_fixture(fixtures + "example1_aod.txt");
    const StatisticalCsi csi = build_statistical_csi(angles, 32, 64);
    const ChannelRealization real = sample_channel(rng, csi);
    const Eigen::MatrixXcd rebuilt =
        real.scale * csi.a_rx * real.gains.asDiagonal() * csi.a_tx.adjoint();
    CHECK((real.h - rebuilt).norm() < 1e-12);
    CHECK_THAT(real.scale, WithinAbs(std::sqrt(32.0 * 64.0 / 6.0), 1e-12));
}

TEST_CASE("zero gains give the zero channel, one path gives rank one") {
    PathAngles angles;
    angles.aoa.resize(1);
    angles.aod.resize(1);
    angles.aoa(0) = 0.3;
    angles.aod(0) = 0.9;
    const StatisticalCsi csi = build_statistical_csi(angles, 4, 8);

    Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(1);
    CHECK(assemble_channel(csi, zero).norm() == 0.0);

    Eigen::VectorXcd one = Eigen::VectorXcd::Ones(1);
    const Eigen::MatrixXcd h = assemble_channel(csi, one);
    const Eigen::MatrixXcd expect =
        std::sqrt(32.0) * steering_vector(4, 0.3) * steering_vector(8, 0.9).adjoint();
    CHECK((h - expect).norm() < 1e-12);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(h);
    CHECK(svd.singularValues()(1) < 1e-12);
}

TEST_CASE("average squared channel norm matches the array sizes") {
    RngStream rng(2024);
    PathAngles angles;
    angles.aoa = load_angle_fixture(fixtures + "example4_aoa.txt");
    angles.aod = load_angle_fixture(fixtures + "example4_aod.txt");
    const int n_r = 8, n_t = 16;
    const StatisticalCsi csi = build_statistical_csi(angles, n_r, n_t);
    const int draws = 10000;
    double acc = 0.0, acc_sq = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double f = sample_channel(rng, csi).h.squaredNorm();
        acc += f;
        acc_sq += f * f;
    }
    const double mean = acc / draws;
    const double sd = std::sqrt((acc_sq / draws - mean * mean) / draws);
    CHECK_THAT(mean, WithinAbs(double(n_r * n_t), 3.0 * sd));
}

TEST_CASE("effective channel is plain multiplication with shape checks") {
    RngStream rng(5);
    Eigen::MatrixXcd h(3, 4), f(4, 2);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) h(i, j) = rng.complex_normal();
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 2; ++j) f(i, j) = rng.complex_normal();

    CHECK((effective_channel(h, f) - oracles::naive_matmul(h, f)).norm() < 1e-12);
    CHECK((effective_channel(h, Eigen::MatrixXcd::Identity(4, 4)) - h).norm() == 0.0);
    CHECK(effective_channel(h, Eigen::MatrixXcd::Zero(4, 2)).norm() == 0.0);
    CHECK_THROWS_AS(effective_channel(h, Eigen::MatrixXcd::Zero(5, 2)), DimensionMismatch);
}

TEST_CASE("receive gram approaches identity as the array grows") {
    const int sizes[3] = {8, 32, 128};
    double avg_dev[3] = {0.0, 0.0, 0.0};
    const int draws = 200;
    for (int s = 0; s < 3; ++s) {
        RngStream rng(777); // same angle draws for each size
        for (int d = 0; d < draws; ++d) {
            RngStream stream = rng.split(static_cast<std::uint64_t>(d));
            const PathAngles angles = sample_path_angles(stream, 6, std::nullopt,
                                                         std::numbers::pi / 4.0,
                                                         std::numbers::pi / 18.0);
            const StatisticalCsi csi = build_statistical_csi(angles, sizes[s], 8);
            const Eigen::MatrixXcd gram = csi.a_rx.adjoint() * csi.a_rx;
            avg_dev[s] += (gram - Eigen::MatrixXcd::Identity(6, 6)).norm() / draws;
        }
    }
    CHECK(avg_dev[1] < avg_dev[0]);
    CHECK(avg_dev[2] < avg_dev[1]);
}

TEST_CASE("sampling is reproducible for equal seeds") {
    RngStream a(42), b(42);
    const PathAngles pa = sample_path_angles(a, 4, 0.5, 0.7, 0.2);
    const PathAngles pb = sample_path_angles(b, 4, 0.5, 0.7, 0.2);
    CHECK((pa.aoa - pb.aoa).norm() == 0.0);
    CHECK((pa.aod - pb.aod).norm() == 0.0);
}

TEST_CASE("csi csv dump writes both matrices") {
    PathAngles angles;
    angles.aoa.resize(2);
    angles.aod.resize(2);
    angles.aoa << 0.1, 0.2;
    angles.aod << 0.3, 0.4;
    const StatisticalCsi csi = build_statistical_csi(angles, 3, 4);
    const std::string path =
        (std::filesystem::temp_directory_path() / "hybeam_csi_test.csv").string();
    write_csi_csv(csi, path);
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    CHECK(first.find("a_rx") != std::string::npos);
}
