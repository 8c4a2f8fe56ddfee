#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <utility>
#include <vector>

#include "hybeam/capacity.hpp"
#include "hybeam/errors.hpp"

namespace hybeam {

// Scale onto the power sphere tr(B^H B) = P, direction preserved.
inline Eigen::MatrixXcd project_power_sphere(const Eigen::MatrixXcd& b, double power) {
    const double norm = b.norm();
    if (norm < 1e-15) throw ZeroMatrix("cannot project a zero matrix onto the power sphere");
    return (std::sqrt(power) / norm) * b;
}

// Tangent-space component of the Euclidean gradient at a point on the sphere.
inline Eigen::MatrixXcd tangent_gradient(const Eigen::MatrixXcd& grad, const Eigen::MatrixXcd& b,
                                         double power) {
    const double radial = (grad.adjoint() * b).trace().real() / power;
    return grad - radial * b;
}

struct AscentOptions {
    double rho0 = 2.0;
    double beta = 0.4; // sufficient-increase coefficient, in [0, 0.5]
    double eps = 1e-4; // stop when ||grad_phi||^2 + ||grad_b||^2 drops below
    int max_iter = 500;
    int max_doublings = 30;
    int max_halvings = 60;
};

struct LineSearchResult {
    double rho = 0.0;
    bool stalled = false; // halving cap hit; treat as effective convergence
};

// Modified backtracking: start from the previous stepsize, then grow by
// doubling while the sufficient-increase test holds, or shrink by halving
// until it does.
template <typename ObjectiveAt>
LineSearchResult line_search(ObjectiveAt&& objective_at, double current, double grad_sq_sum,
                             double rho_prev, const AscentOptions& opts) {
    auto f = [&](double rho) { return objective_at(rho) - current - rho * opts.beta * grad_sq_sum; };
    if (f(rho_prev) >= 0.0) {
        double rho = rho_prev;
        for (int i = 0; i < opts.max_doublings; ++i) {
            if (f(2.0 * rho) < 0.0) return {rho, false};
            rho *= 2.0;
        }
        return {rho, false};
    }
    double rho = rho_prev;
    for (int i = 0; i < opts.max_halvings; ++i) {
        rho *= 0.5;
        if (f(rho) >= 0.0) return {rho, false};
    }
    return {0.0, true};
}

enum class StopReason { GradientTolerance, MaxIter };

struct IterationRecord {
    int iteration = 0;
    double objective = 0.0;
    double grad_phi_sq = 0.0;
    double grad_bbar_sq = 0.0;
    double rho = 0.0;
};

struct AscentReport {
    int iterations = 0;
    std::vector<IterationRecord> trace;
    HybridPrecoder precoder;
    StopReason terminated_by = StopReason::MaxIter;

    std::vector<double> objective_trace() const {
        std::vector<double> t;
        t.reserve(trace.size());
        for (const auto& r : trace) t.push_back(r.objective);
        return t;
    }

    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw Error("cannot write ascent trace: " + path);
        out << "iteration,objective,grad_phi_sq,grad_bbar_sq,rho\n";
        char buf[160];
        for (const auto& r : trace) {
            std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", r.iteration, r.objective,
                          r.grad_phi_sq, r.grad_bbar_sq, r.rho);
            out << buf;
        }
    }
};

// Simultaneous gradient ascent over the analog phases and the digital
// precoder on the power sphere, driven by the bound approximation.
inline AscentReport ascend_lower_bound(const StatisticalCsi& csi, const Partition& partition,
                                       const Eigen::MatrixXd& phi0, const Eigen::MatrixXcd& bbar0,
                                       const SignalSet& signals, double sigma2, double power,
                                       const AscentOptions& opts = {}) {
    Eigen::MatrixXd phi = phi0;
    Eigen::MatrixXcd bbar = project_power_sphere(bbar0, power);
    auto objective = [&](const Eigen::MatrixXd& ph, const Eigen::MatrixXcd& bb) {
        return lower_bound_approx_product(csi, fbar_from_phases(partition, ph) * bb, signals, sigma2)
            .value;
    };

    AscentReport report;
    double rho_prev = opts.rho0;
    double current = objective(phi, bbar);
    report.terminated_by = StopReason::MaxIter;
    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        const HybridPrecoder at = make_hybrid_precoder(partition, phi, bbar, power);
        const PrecoderGradient g = gradient_lower_bound_approx(csi, at, signals, sigma2);
        const Eigen::MatrixXcd gb = tangent_gradient(g.bbar, bbar, power);
        const double g2 = g.phi.squaredNorm() + gb.squaredNorm();
        report.trace.push_back({iter, current, g.phi.squaredNorm(), gb.squaredNorm(), rho_prev});
        if (g2 < opts.eps) {
            report.terminated_by = StopReason::GradientTolerance;
            break;
        }
        const LineSearchResult ls = line_search(
            [&](double rho) {
                return objective(phi + rho * g.phi, project_power_sphere(bbar + rho * gb, power));
            },
            current, g2, rho_prev, opts);
        if (ls.stalled) {
            report.terminated_by = StopReason::GradientTolerance;
            break;
        }
        phi += ls.rho * g.phi;
        bbar = project_power_sphere(bbar + ls.rho * gb, power);
        rho_prev = ls.rho;
        current = objective(phi, bbar);
        report.trace.back().rho = ls.rho;
    }
    report.iterations = iter;
    report.trace.push_back({iter, current, 0.0, 0.0, rho_prev});
    report.precoder = make_hybrid_precoder(partition, phi, bbar, power);
    return report;
}

// Baseline that alternates full line-searched steps in the phases and the
// digital precoder. One iteration is one full alternation.
inline AscentReport block_coordinate_ascent(const StatisticalCsi& csi, const Partition& partition,
                                            const Eigen::MatrixXd& phi0, const Eigen::MatrixXcd& bbar0,
                                            const SignalSet& signals, double sigma2, double power,
                                            const AscentOptions& opts = {}) {
    Eigen::MatrixXd phi = phi0;
    Eigen::MatrixXcd bbar = project_power_sphere(bbar0, power);
    auto objective = [&](const Eigen::MatrixXd& ph, const Eigen::MatrixXcd& bb) {
        return lower_bound_approx_product(csi, fbar_from_phases(partition, ph) * bb, signals, sigma2)
            .value;
    };

    AscentReport report;
    double rho_phi = opts.rho0, rho_b = opts.rho0;
    double current = objective(phi, bbar);
    report.terminated_by = StopReason::MaxIter;
    const double half_eps = 0.5 * opts.eps;
    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        HybridPrecoder at = make_hybrid_precoder(partition, phi, bbar, power);
        PrecoderGradient g = gradient_lower_bound_approx(csi, at, signals, sigma2);
        Eigen::MatrixXcd gb = tangent_gradient(g.bbar, bbar, power);
        const double g2 = g.phi.squaredNorm() + gb.squaredNorm();
        report.trace.push_back({iter, current, g.phi.squaredNorm(), gb.squaredNorm(), rho_phi});
        if (g2 < opts.eps) {
            report.terminated_by = StopReason::GradientTolerance;
            break;
        }

        const double gphi2 = g.phi.squaredNorm();
        if (gphi2 >= half_eps) {
            const LineSearchResult ls = line_search(
                [&](double rho) { return objective(phi + rho * g.phi, bbar); }, current, gphi2,
                rho_phi, opts);
            if (!ls.stalled) {
                phi += ls.rho * g.phi;
                rho_phi = ls.rho;
                current = objective(phi, bbar);
            }
        }

        at = make_hybrid_precoder(partition, phi, bbar, power);
        g = gradient_lower_bound_approx(csi, at, signals, sigma2);
        gb = tangent_gradient(g.bbar, bbar, power);
        const double gb2 = gb.squaredNorm();
        if (gb2 >= half_eps) {
            const LineSearchResult ls = line_search(
                [&](double rho) {
                    return objective(phi, project_power_sphere(bbar + rho * gb, power));
                },
                current, gb2, rho_b, opts);
            if (!ls.stalled) {
                bbar = project_power_sphere(bbar + ls.rho * gb, power);
                rho_b = ls.rho;
                current = objective(phi, bbar);
            }
        }
    }
    report.iterations = iter;
    report.trace.push_back({iter, current, 0.0, 0.0, rho_phi});
    report.precoder = make_hybrid_precoder(partition, phi, bbar, power);
    return report;
}

// First n_cols right singular vectors of m, orthonormally completed when the
// rank falls short, scaled onto the power sphere.
inline Eigen::MatrixXcd right_singular_init(const Eigen::MatrixXcd& m, int n_cols, double power) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeThinV);
    const int dim = static_cast<int>(m.cols());
    const int have = std::min<int>(static_cast<int>(svd.matrixV().cols()), n_cols);
    Eigen::MatrixXcd v(dim, n_cols);
    v.leftCols(have) = svd.matrixV().leftCols(have);
    int next_basis = 0;
    for (int j = have; j < n_cols; ++j) {
        Eigen::VectorXcd cand;
        double norm = 0.0;
        while (norm < 1e-8 && next_basis < dim) {
            cand = Eigen::VectorXcd::Zero(dim);
            cand(next_basis++) = 1.0;
            for (int p = 0; p < j; ++p) cand -= v.col(p).dot(cand) * v.col(p);
            norm = cand.norm();
        }
        if (norm < 1e-8) throw DimensionMismatch("cannot complete a basis of that size");
        v.col(j) = cand / norm;
    }
    return project_power_sphere(v, power);
}

struct DigitalSolveOptions : AscentOptions {
    int n_noise = 200; // noise draws per gradient / objective evaluation
    DigitalSolveOptions() { max_iter = 60; }
};

struct DigitalSolveResult {
    Eigen::MatrixXcd bbar;
    double mi = 0.0; // objective at the final iterate (common-random-number estimate)
    int iterations = 0;
    std::vector<double> objective_trace;
};

// Instantaneous-CSI digital precoder: stochastic ascent of the Monte Carlo
// mutual information on the power sphere. Each iteration redraws its noise
// but keeps it fixed across the line-search probes.
inline DigitalSolveResult solve_digital_mi(const RngStream& rng, const Eigen::MatrixXcd& h_eff,
                                           const SignalSet& signals, double sigma2, double power,
                                           const DigitalSolveOptions& opts = {},
                                           std::optional<Eigen::MatrixXcd> bbar0 = std::nullopt) {
    detail::check_noise(sigma2);
    const Eigen::MatrixXcd gram = h_eff.adjoint() * h_eff;
    Eigen::MatrixXcd bbar =
        bbar0 ? project_power_sphere(*bbar0, power)
              : right_singular_init(h_eff, signals.n_streams, power);

    DigitalSolveResult result;
    double rho_prev = opts.rho0;
    const double grad_scale = 1.0 / (sigma2 * std::numbers::ln2);
    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        RngStream iter_stream = rng.split(static_cast<std::uint64_t>(iter));
        RngStream est_stream = iter_stream.split(0);
        const RngStream obj_stream = iter_stream.split(1);
        auto objective = [&](const Eigen::MatrixXcd& bb) {
            return mi_monte_carlo(obj_stream, h_eff * bb, signals, sigma2, opts.n_noise).value;
        };

        const Eigen::MatrixXcd mmse = mmse_matrix_mc(est_stream, h_eff * bbar, signals, sigma2,
                                                     opts.n_noise);
        const Eigen::MatrixXcd grad = grad_scale * gram * bbar * mmse;
        const Eigen::MatrixXcd gb = tangent_gradient(grad, bbar, power);
        const double g2 = gb.squaredNorm();
        const double current = objective(bbar);
        result.objective_trace.push_back(current);
        if (g2 < opts.eps) break;
        const LineSearchResult ls = line_search(
            [&](double rho) { return objective(project_power_sphere(bbar + rho * gb, power)); },
            current, g2, rho_prev, opts);
        if (ls.stalled) break;
        bbar = project_power_sphere(bbar + ls.rho * gb, power);
        rho_prev = ls.rho;
    }
    result.bbar = bbar;
    result.iterations = iter;
    result.mi = result.objective_trace.empty() ? 0.0 : result.objective_trace.back();
    return result;
}

// Full hybrid ascent of the instantaneous mutual information for one channel
// draw (phases and digital precoder together, Monte Carlo gradients).
inline AscentReport ascend_instantaneous_mi(const RngStream& rng, const Eigen::MatrixXcd& h,
                                            const Partition& partition, const Eigen::MatrixXd& phi0,
                                            const Eigen::MatrixXcd& bbar0, const SignalSet& signals,
                                            double sigma2, double power,
                                            const DigitalSolveOptions& opts = {}) {
    detail::check_noise(sigma2);
    Eigen::MatrixXd phi = phi0;
    Eigen::MatrixXcd bbar = project_power_sphere(bbar0, power);
    const Eigen::MatrixXcd gram = h.adjoint() * h;
    const double grad_scale = 1.0 / (sigma2 * std::numbers::ln2);

    AscentReport report;
    report.terminated_by = StopReason::MaxIter;
    double rho_prev = opts.rho0;
    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        RngStream iter_stream = rng.split(static_cast<std::uint64_t>(iter));
        RngStream est_stream = iter_stream.split(0);
        const RngStream obj_stream = iter_stream.split(1);
        auto objective = [&](const Eigen::MatrixXd& ph, const Eigen::MatrixXcd& bb) {
            const Eigen::MatrixXcd t = h * fbar_from_phases(partition, ph) * bb;
            return mi_monte_carlo(obj_stream, t, signals, sigma2, opts.n_noise).value;
        };

        const Eigen::MatrixXcd fbar = fbar_from_phases(partition, phi);
        const Eigen::MatrixXcd pbar = fbar * bbar;
        const Eigen::MatrixXcd mmse = mmse_matrix_mc(est_stream, h * pbar, signals, sigma2,
                                                     opts.n_noise);
        const Eigen::MatrixXcd gp = grad_scale * gram * pbar * mmse; // gradient in the composite map
        const Eigen::MatrixXd gphi =
            2.0 * (gp * bbar.adjoint()).cwiseProduct(fbar.conjugate()).imag();
        const Eigen::MatrixXcd gb = tangent_gradient(fbar.adjoint() * gp, bbar, power);
        const double g2 = gphi.squaredNorm() + gb.squaredNorm();
        const double current = objective(phi, bbar);
        report.trace.push_back({iter, current, gphi.squaredNorm(), gb.squaredNorm(), rho_prev});
        if (g2 < opts.eps) {
            report.terminated_by = StopReason::GradientTolerance;
            break;
        }
        const LineSearchResult ls = line_search(
            [&](double rho) {
                return objective(phi + rho * gphi, project_power_sphere(bbar + rho * gb, power));
            },
            current, g2, rho_prev, opts);
        if (ls.stalled) {
            report.terminated_by = StopReason::GradientTolerance;
            break;
        }
        phi += ls.rho * gphi;
        bbar = project_power_sphere(bbar + ls.rho * gb, power);
        rho_prev = ls.rho;
        report.trace.back().rho = ls.rho;
    }
    report.iterations = iter;
    report.precoder = make_hybrid_precoder(partition, phi, bbar, power);
    return report;
}

// Average of the per-channel digital-only optimum for a fixed analog
// precoder, the mixed-CSI evaluation protocol.
inline MiEstimate mixed_csi_average(const RngStream& rng, const StatisticalCsi& csi,
                                    const Eigen::MatrixXcd& fbar, const SignalSet& signals,
                                    double sigma2, double power, int n_channel,
                                    const DigitalSolveOptions& opts = {}, int n_eval_noise = 400) {
    detail::check_noise(sigma2);
    std::vector<double> values(static_cast<std::size_t>(n_channel));
    for (int c = 0; c < n_channel; ++c) {
        RngStream stream = rng.split(static_cast<std::uint64_t>(c));
        const ChannelRealization real = sample_channel(stream, csi);
        const Eigen::MatrixXcd h_eff = effective_channel(real.h, fbar);
        const DigitalSolveResult sol = solve_digital_mi(stream.split(1), h_eff, signals, sigma2,
                                                        power, opts);
        values[static_cast<std::size_t>(c)] =
            mi_monte_carlo(stream.split(2), h_eff * sol.bbar, signals, sigma2, n_eval_noise).value;
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n_channel;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var = (n_channel > 1) ? var / (n_channel - 1) : 0.0;
    MiEstimate est;
    est.value = std::max(0.0, mean);
    est.std_error = std::sqrt(var / std::max(1, n_channel));
    est.n_noise = n_eval_noise;
    est.n_channel = n_channel;
    return est;
}

// Equal-block analog precoder with an identity digital matrix; the
// channel-oblivious reference point.
inline HybridPrecoder no_precoding_precoder(int n_t, int n_rf, int n_s, double power) {
    if (n_s != n_rf) throw DimensionMismatch("the no-precoding reference needs n_s == n_rf");
    const Partition partition = fixed_partition(n_t, n_rf);
    const Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(n_t, n_rf);
    const Eigen::MatrixXcd bbar =
        std::sqrt(power / n_s) * Eigen::MatrixXcd::Identity(n_rf, n_s);
    return make_hybrid_precoder(partition, phi, bbar, power);
}

struct UnconstrainedResult {
    Eigen::MatrixXcd pbar; // N_t x N_s, tr(P^H P) = P
    int iterations = 0;
    std::vector<double> objective_trace;
};

// Benchmark without the analog structure: projected gradient ascent of the
// bound approximation over the full precoder under the power constraint only.
inline UnconstrainedResult ascend_unconstrained(const StatisticalCsi& csi,
                                                const Eigen::MatrixXcd& pbar0,
                                                const SignalSet& signals, double sigma2, double power,
                                                const AscentOptions& opts = {}) {
    Eigen::MatrixXcd pbar = project_power_sphere(pbar0, power);
    auto objective = [&](const Eigen::MatrixXcd& p) {
        return lower_bound_approx_product(csi, p, signals, sigma2).value;
    };
    UnconstrainedResult result;
    double rho_prev = opts.rho0;
    double current = objective(pbar);
    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        result.objective_trace.push_back(current);
        const Eigen::MatrixXcd grad =
            gradient_lower_bound_approx_product(csi, pbar, signals, sigma2);
        const Eigen::MatrixXcd gp = tangent_gradient(grad, pbar, power);
        const double g2 = gp.squaredNorm();
        if (g2 < opts.eps) break;
        const LineSearchResult ls = line_search(
            [&](double rho) { return objective(project_power_sphere(pbar + rho * gp, power)); },
            current, g2, rho_prev, opts);
        if (ls.stalled) break;
        pbar = project_power_sphere(pbar + ls.rho * gp, power);
        rho_prev = ls.rho;
        current = objective(pbar);
    }
    result.objective_trace.push_back(current);
    result.pbar = pbar;
    result.iterations = iter;
    return result;
}

} // namespace hybeam
