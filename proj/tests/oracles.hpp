// Test-only reference implementations, kept independent of the library's
// computation paths on purpose.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

#include "hybeam/constellation.hpp"

namespace oracles {

using cxd = std::complex<double>;

// Naive triple-loop complex matrix product.
inline Eigen::MatrixXcd naive_matmul(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(a.rows(), b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < b.cols(); ++j)
            for (Eigen::Index k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
    return c;
}

// Gauss-Hermite nodes/weights for integrals against exp(-x^2), via the
// Golub-Welsch eigenproblem of the Jacobi matrix.
struct GaussHermite {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;

    explicit GaussHermite(int n) {
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
        for (int i = 1; i < n; ++i) {
            const double b = std::sqrt(i / 2.0);
            jac(i, i - 1) = b;
            jac(i - 1, i) = b;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
        nodes = es.eigenvalues();
        weights.resize(n);
        const double sqrt_pi = std::sqrt(std::numbers::pi);
        for (int i = 0; i < n; ++i) {
            const double v0 = es.eigenvectors()(0, i);
            weights(i) = sqrt_pi * v0 * v0;
        }
    }
};

// Deterministic quadrature of the mutual information of y = T x + n for a
// tiny system: integrates the noise expectation over all real dimensions of
// n with tensorized Gauss-Hermite rules. Cost grows as nodes^(2 N_r).
inline double quadrature_mi(const Eigen::MatrixXcd& t, const hybeam::SignalSet& signals,
                            double sigma2, int nodes_per_dim = 24) {
    const int n_r = static_cast<int>(t.rows());
    const int k_total = signals.size();
    const Eigen::MatrixXcd u = t * signals.vectors;
    const GaussHermite gh(nodes_per_dim);
    const int dims = 2 * n_r;
    // n_i = sigma * (a + j b) / sqrt(2) with a, b standard normal;
    // standard normal expectation -> substitute x = a / sqrt(2).
    const double comp_sd = std::sqrt(sigma2 / 2.0);

    std::vector<int> idx(static_cast<std::size_t>(dims), 0);
    double total = 0.0;
    const double w_norm = std::pow(std::numbers::inv_sqrtpi, dims);
    bool done = false;
    while (!done) {
        double w = w_norm;
        Eigen::VectorXcd noise(n_r);
        for (int d = 0; d < n_r; ++d) {
            const double re = gh.nodes(idx[static_cast<std::size_t>(2 * d)]) * std::numbers::sqrt2 * comp_sd;
            const double im = gh.nodes(idx[static_cast<std::size_t>(2 * d + 1)]) * std::numbers::sqrt2 * comp_sd;
            noise(d) = cxd(re, im);
            w *= gh.weights(idx[static_cast<std::size_t>(2 * d)]) *
                 gh.weights(idx[static_cast<std::size_t>(2 * d + 1)]);
        }
        double inner = 0.0;
        for (int m = 0; m < k_total; ++m) {
            double sum = 0.0;
            for (int k = 0; k < k_total; ++k) {
                const double d_mk =
                    ((u.col(m) - u.col(k) + noise).squaredNorm() - noise.squaredNorm()) / sigma2;
                sum += std::exp(-d_mk);
            }
            inner += std::log2(sum);
        }
        total += w * inner / k_total;

        int d = 0;
        for (; d < dims; ++d) {
            if (++idx[static_cast<std::size_t>(d)] < nodes_per_dim) break;
            idx[static_cast<std::size_t>(d)] = 0;
        }
        done = (d == dims);
    }
    return std::log2(static_cast<double>(k_total)) - total;
}

// Central finite difference of a scalar function of one real coordinate.
inline double central_diff(const std::function<double(double)>& f, double step) {
    return (f(step) - f(-step)) / (2.0 * step);
}

} // namespace oracles
