#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>

#include "hybeam/errors.hpp"
#include "hybeam/rng.hpp"

namespace hybeam {

struct ArrayGeometry {
    int n_elements = 1;
    double spacing_over_wavelength = 0.5;
};

// Half-wavelength ULA response, entry n = exp(-j*pi*n*sin(theta))/sqrt(N).
inline Eigen::VectorXcd steering_vector(const ArrayGeometry& geom, double angle) {
    const int n = geom.n_elements;
    const double step = -2.0 * std::numbers::pi * geom.spacing_over_wavelength * std::sin(angle);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    Eigen::VectorXcd v(n);
    for (int i = 0; i < n; ++i) {
        v(i) = std::polar(scale, step * i);
    }
    return v;
}

inline Eigen::VectorXcd steering_vector(int n_elements, double angle) {
    return steering_vector(ArrayGeometry{n_elements}, angle);
}

struct PathAngles {
    Eigen::VectorXd aoa; // radians, length L
    Eigen::VectorXd aod; // radians, length L

    int n_paths() const { return static_cast<int>(aoa.size()); }
};

inline double sample_laplacian(RngStream& rng, double mean, double scale_b) {
    const double u = rng.uniform() - 0.5;
    const double t = std::max(1.0 - 2.0 * std::abs(u), 1e-300);
    const double s = (u >= 0.0) ? 1.0 : -1.0;
    return mean - scale_b * s * std::log(t);
}

// Laplacian path angles with standard deviation `spread` (scale b = spread/sqrt(2)).
// A disengaged mean_aoa draws one shared mean uniformly over [0, 2*pi).
inline PathAngles sample_path_angles(RngStream& rng, int n_paths,
                                     std::optional<double> mean_aoa,
                                     double mean_aod, double spread) {
    if (spread <= 0.0) throw DimensionMismatch("angle spread must be positive");
    const double b = spread / std::numbers::sqrt2;
    const double mr = mean_aoa ? *mean_aoa : rng.uniform() * 2.0 * std::numbers::pi;
    PathAngles angles;
    angles.aoa.resize(n_paths);
    angles.aod.resize(n_paths);
    for (int l = 0; l < n_paths; ++l) angles.aoa(l) = sample_laplacian(rng, mr, b);
    for (int l = 0; l < n_paths; ++l) angles.aod(l) = sample_laplacian(rng, mean_aod, b);
    return angles;
}

// Slow-varying channel knowledge: stacked unit-norm steering columns.
struct StatisticalCsi {
    Eigen::MatrixXcd a_rx; // N_r x L
    Eigen::MatrixXcd a_tx; // N_t x L

    int n_rx() const { return static_cast<int>(a_rx.rows()); }
    int n_tx() const { return static_cast<int>(a_tx.rows()); }
    int n_paths() const { return static_cast<int>(a_rx.cols()); }
};

inline StatisticalCsi build_statistical_csi(const PathAngles& angles, int n_rx, int n_tx) {
    const int l = angles.n_paths();
    StatisticalCsi csi;
    csi.a_rx.resize(n_rx, l);
    csi.a_tx.resize(n_tx, l);
    for (int i = 0; i < l; ++i) {
        csi.a_rx.col(i) = steering_vector(n_rx, angles.aoa(i));
        csi.a_tx.col(i) = steering_vector(n_tx, angles.aod(i));
    }
    return csi;
}

struct ChannelRealization {
    Eigen::VectorXcd gains; // diagonal of the per-path gain matrix
    Eigen::MatrixXcd h;     // N_r x N_t
    double scale = 1.0;     // sqrt(N_r*N_t/L)
};

inline Eigen::MatrixXcd assemble_channel(const StatisticalCsi& csi, const Eigen::VectorXcd& gains) {
    const double scale = std::sqrt(static_cast<double>(csi.n_rx()) * csi.n_tx() / csi.n_paths());
    return scale * csi.a_rx * gains.asDiagonal() * csi.a_tx.adjoint();
}

// One multi-path draw: i.i.d. unit-variance complex Gaussian path gains.
inline ChannelRealization sample_channel(RngStream& rng, const StatisticalCsi& csi) {
    ChannelRealization real;
    real.scale = std::sqrt(static_cast<double>(csi.n_rx()) * csi.n_tx() / csi.n_paths());
    real.gains.resize(csi.n_paths());
    for (int l = 0; l < csi.n_paths(); ++l) real.gains(l) = rng.complex_normal();
    real.h = real.scale * csi.a_rx * real.gains.asDiagonal() * csi.a_tx.adjoint();
    return real;
}

inline Eigen::MatrixXcd effective_channel(const Eigen::MatrixXcd& h, const Eigen::MatrixXcd& fbar) {
    if (h.cols() != fbar.rows()) {
        throw DimensionMismatch("channel/precoder dimension mismatch: " +
                                std::to_string(h.cols()) + " vs " + std::to_string(fbar.rows()));
    }
    return h * fbar;
}

// Plain-text angle fixture: one angle per line, radians.
inline Eigen::VectorXd load_angle_fixture(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FixtureMissing("cannot open angle fixture: " + path);
    std::vector<double> vals;
    double x;
    while (in >> x) vals.push_back(x);
    if (vals.empty()) throw FixtureMissing("angle fixture is empty: " + path);
    Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) v(static_cast<Eigen::Index>(i)) = vals[i];
    return v;
}

// Debug dump of the steering matrices, real/imag interleaved columns.
inline void write_csi_csv(const StatisticalCsi& csi, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write csi csv: " + path);
    auto dump = [&out](const Eigen::MatrixXcd& m, const char* tag) {
        out << "# " << tag << " " << m.rows() << "x" << m.cols() << "\n";
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                if (j) out << ",";
                char buf[64];
                std::snprintf(buf, sizeof buf, "%.17g,%.17g", m(i, j).real(), m(i, j).imag());
                out << buf;
            }
            out << "\n";
        }
    };
    dump(csi.a_rx, "a_rx");
    dump(csi.a_tx, "a_tx");
}

} // namespace hybeam
