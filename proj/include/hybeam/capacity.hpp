#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/LU>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "hybeam/channel.hpp"
#include "hybeam/constellation.hpp"
#include "hybeam/errors.hpp"
#include "hybeam/rng.hpp"
#include "hybeam/subarray.hpp"

namespace hybeam {

// Effective hybrid precoder: disjoint phase-only analog columns plus a
// power-bounded digital matrix.
struct HybridPrecoder {
    Partition partition;
    Eigen::MatrixXd phi;    // N_t x N_rf, phases; only partition support is live
    Eigen::MatrixXcd fbar;  // N_t x N_rf, |S_j|^{-1/2} e^{j phi} on support
    Eigen::MatrixXcd bbar;  // N_rf x N_s
    double power = 1.0;

    Eigen::MatrixXcd product() const { return fbar * bbar; }

    // Raw (F, B) with F unit-modulus on the support; fbar = F (F^H F)^{-1/2}.
    std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd> raw_precoders() const {
        Eigen::VectorXd sizes(partition.n_groups());
        for (int j = 0; j < partition.n_groups(); ++j)
            sizes(j) = std::sqrt(static_cast<double>(partition.groups[static_cast<std::size_t>(j)].size()));
        Eigen::MatrixXcd f = fbar * sizes.asDiagonal();
        Eigen::MatrixXcd b = sizes.cwiseInverse().asDiagonal() * bbar;
        return {f, b};
    }
};

inline Eigen::MatrixXcd fbar_from_phases(const Partition& partition, const Eigen::MatrixXd& phi) {
    Eigen::MatrixXcd fbar = Eigen::MatrixXcd::Zero(partition.n_antennas, partition.n_groups());
    for (int j = 0; j < partition.n_groups(); ++j) {
        const auto& group = partition.groups[static_cast<std::size_t>(j)];
        const double mag = 1.0 / std::sqrt(static_cast<double>(group.size()));
        for (int i : group) fbar(i, j) = std::polar(mag, phi(i, j));
    }
    return fbar;
}

inline HybridPrecoder make_hybrid_precoder(const Partition& partition, const Eigen::MatrixXd& phi,
                                           const Eigen::MatrixXcd& bbar, double power) {
    if (!partition.valid()) throw DimensionMismatch("invalid partition");
    if (phi.rows() != partition.n_antennas || phi.cols() != partition.n_groups())
        throw DimensionMismatch("phase matrix shape mismatch");
    if (bbar.rows() != partition.n_groups()) throw DimensionMismatch("digital precoder shape mismatch");
    if (bbar.squaredNorm() > power * (1.0 + 1e-6) + 1e-9)
        throw DimensionMismatch("digital precoder exceeds the power budget");
    HybridPrecoder p;
    p.partition = partition;
    p.phi = phi;
    p.fbar = fbar_from_phases(partition, phi);
    p.bbar = bbar;
    p.power = power;
    return p;
}

inline HybridPrecoder precoder_from_fbar(const Partition& partition, const Eigen::MatrixXcd& fbar,
                                         const Eigen::MatrixXcd& bbar, double power) {
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(fbar.rows(), fbar.cols());
    for (int j = 0; j < partition.n_groups(); ++j)
        for (int i : partition.groups[static_cast<std::size_t>(j)]) phi(i, j) = std::arg(fbar(i, j));
    return make_hybrid_precoder(partition, phi, bbar, power);
}

struct MiEstimate {
    double value = 0.0;     // bits/s/Hz
    double std_error = 0.0;
    int n_noise = 0;
    int n_channel = 0;
};

enum class BoundKind { LowerBound, LowerBoundApprox };

struct BoundValue {
    double value = 0.0; // same scale as the mutual information, may be negative
    BoundKind kind = BoundKind::LowerBound;
};

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    long n_samples = 0;
};

// Constant gap N_r (1/ln2 - 1) between the mutual information and the bound
// at both noise extremes.
inline double mi_constant_shift(int n_r) {
    return n_r * (1.0 / std::numbers::ln2 - 1.0);
}

inline double log2_cardinality(const SignalSet& signals) {
    return std::log2(static_cast<double>(signals.size()));
}

namespace detail {

// log2 sum_k exp(a_k), max-anchored.
inline double log2_sum_exp(const double* a, int n) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) mx = std::max(mx, a[i]);
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::exp(a[i] - mx);
    return (mx + std::log(s)) / std::numbers::ln2;
}

inline void check_noise(double sigma2) {
    if (!(sigma2 > 0.0)) throw InvalidNoise("noise variance must be positive");
}

} // namespace detail

// Monte Carlo mutual information of y = T x + n over the finite signal set,
// with T the composite channel-precoder map. Noise expectation over n_noise
// i.i.d. draws; the standard error comes from the per-draw spread.
inline MiEstimate mi_monte_carlo(RngStream rng, const Eigen::MatrixXcd& t, const SignalSet& signals,
                                 double sigma2, int n_noise) {
    detail::check_noise(sigma2);
    if (n_noise < 1) throw DimensionMismatch("n_noise must be >= 1");
    const int k_total = signals.size();
    const double log2k = log2_cardinality(signals);
    const double sd = std::sqrt(sigma2);

    const Eigen::MatrixXcd u = t * signals.vectors; // N_r x K noiseless outputs
    Eigen::VectorXd col_sq(k_total);
    for (int k = 0; k < k_total; ++k) col_sq(k) = u.col(k).squaredNorm();

    Eigen::MatrixXcd noise(t.rows(), n_noise);
    for (int j = 0; j < n_noise; ++j)
        for (Eigen::Index i = 0; i < t.rows(); ++i) noise(i, j) = sd * rng.complex_normal();
    const Eigen::MatrixXd proj = (u.adjoint() * noise).real(); // K x n_noise, Re(u_k^H n_j)

    std::vector<double> per_draw(static_cast<std::size_t>(n_noise), 0.0);
    std::vector<double> exponents(static_cast<std::size_t>(k_total));
    Eigen::VectorXcd gram_row(k_total);
    for (int m = 0; m < k_total; ++m) {
        gram_row = u.adjoint() * u.col(m);
        for (int j = 0; j < n_noise; ++j) {
            const double pm = proj(m, j);
            for (int k = 0; k < k_total; ++k) {
                const double dist_sq = col_sq(m) + col_sq(k) - 2.0 * gram_row(k).real();
                const double d = (dist_sq + 2.0 * (pm - proj(k, j))) / sigma2;
                exponents[static_cast<std::size_t>(k)] = -d;
            }
            per_draw[static_cast<std::size_t>(j)] +=
                detail::log2_sum_exp(exponents.data(), k_total) / k_total;
        }
    }

    double mean = 0.0;
    for (double v : per_draw) mean += v;
    mean /= n_noise;
    double var = 0.0;
    for (double v : per_draw) var += (v - mean) * (v - mean);
    var = (n_noise > 1) ? var / (n_noise - 1) : 0.0;

    MiEstimate est;
    est.value = std::max(0.0, log2k - mean);
    est.std_error = std::sqrt(var / n_noise);
    est.n_noise = n_noise;
    est.n_channel = 1;
    return est;
}

inline MiEstimate instantaneous_mi(RngStream rng, const Eigen::MatrixXcd& h, const HybridPrecoder& p,
                                   const SignalSet& signals, double sigma2, int n_noise) {
    return mi_monte_carlo(std::move(rng), effective_channel(h, p.fbar) * p.bbar, signals, sigma2, n_noise);
}

// Average over fresh channel realizations; every realization gets its own
// derived stream, so the estimate is independent of evaluation order.
inline MiEstimate average_mi(const RngStream& rng, const StatisticalCsi& csi, const HybridPrecoder& p,
                             const SignalSet& signals, double sigma2, int n_channel, int n_noise) {
    detail::check_noise(sigma2);
    if (n_channel < 1) throw DimensionMismatch("n_channel must be >= 1");
    std::vector<double> values(static_cast<std::size_t>(n_channel));
    double inner_stderr = 0.0;
    const Eigen::MatrixXcd pb = p.product();
    for (int c = 0; c < n_channel; ++c) {
        RngStream stream = rng.split(static_cast<std::uint64_t>(c));
        const ChannelRealization real = sample_channel(stream, csi);
        const MiEstimate est = mi_monte_carlo(stream, real.h * pb, signals, sigma2, n_noise);
        values[static_cast<std::size_t>(c)] = est.value;
        inner_stderr = est.std_error;
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n_channel;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var = (n_channel > 1) ? var / (n_channel - 1) : 0.0;

    MiEstimate est;
    est.value = std::max(0.0, mean);
    est.std_error = (n_channel > 1) ? std::sqrt(var / n_channel) : inner_stderr;
    est.n_noise = n_noise;
    est.n_channel = n_channel;
    return est;
}

namespace detail {

// log det of a Hermitian positive-definite matrix; tiny diagonal loading plus
// LU when the Cholesky factorization rejects the matrix.
inline double logdet_hpd(const Eigen::MatrixXcd& m) {
    Eigen::LLT<Eigen::MatrixXcd> llt(m);
    if (llt.info() == Eigen::Success) {
        double sum = 0.0;
        const auto& l = llt.matrixLLT();
        for (Eigen::Index i = 0; i < m.rows(); ++i) sum += std::log(l(i, i).real());
        return 2.0 * sum;
    }
    Eigen::MatrixXcd shifted = m + 1e-10 * Eigen::MatrixXcd::Identity(m.rows(), m.cols());
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(shifted);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) sum += std::log(std::abs(lu.matrixLU()(i, i)));
    return sum;
}

// Per-pair bound terms share |beta| structure between (m,k) and (k,m), so the
// K x K table is filled for k >= m and mirrored.
template <typename TermFn>
double pair_term_average(const SignalSet& signals, const Eigen::MatrixXcd& t_a, TermFn&& term_of) {
    const int k_total = signals.size();
    Eigen::MatrixXd terms(k_total, k_total);
    Eigen::MatrixXcd beta_block;
    for (int m = 0; m < k_total; ++m) {
        Eigen::MatrixXcd deltas = signals.vectors.col(m).replicate(1, k_total - m) -
                                  signals.vectors.rightCols(k_total - m);
        beta_block = t_a * deltas; // L x (K - m)
        for (int k = m; k < k_total; ++k) {
            const double v = term_of(beta_block.col(k - m));
            terms(m, k) = v;
            terms(k, m) = v;
        }
    }
    double acc = 0.0;
    for (int m = 0; m < k_total; ++m) {
        double s = 0.0;
        for (int k = 0; k < k_total; ++k) s += terms(m, k);
        acc += std::log2(s);
    }
    return acc / k_total;
}

} // namespace detail

// Closed-form lower bound on the average mutual information. The rank-one
// pair matrix W = w w^H enters through det[I + Gram^T o W].
inline BoundValue lower_bound_product(const StatisticalCsi& csi, const Eigen::MatrixXcd& pbar,
                                      const SignalSet& signals, double sigma2) {
    detail::check_noise(sigma2);
    const int l = csi.n_paths();
    const double c = static_cast<double>(csi.n_rx()) * csi.n_tx() / (2.0 * sigma2 * l);
    const Eigen::MatrixXcd t_a = csi.a_tx.adjoint() * pbar; // L x N_s
    const Eigen::MatrixXcd gram_t = (csi.a_rx.adjoint() * csi.a_rx).transpose();
    const double sqrt_c = std::sqrt(c);
    const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(l, l);

    const double avg = detail::pair_term_average(signals, t_a, [&](const auto& beta) {
        const Eigen::VectorXcd w = sqrt_c * beta;
        const Eigen::MatrixXcd m = eye + gram_t.cwiseProduct(w * w.adjoint());
        return std::exp(-detail::logdet_hpd(m));
    });

    return {log2_cardinality(signals) - mi_constant_shift(csi.n_rx()) - avg, BoundKind::LowerBound};
}

// Low-complexity approximation: the Gram matrix is replaced by the identity,
// so each pair term is a product of L scalar factors. Factors are >= 1 and an
// overflowing product maps to a zero term, matching the log-domain limit.
inline BoundValue lower_bound_approx_product(const StatisticalCsi& csi, const Eigen::MatrixXcd& pbar,
                                             const SignalSet& signals, double sigma2) {
    detail::check_noise(sigma2);
    const int l = csi.n_paths();
    const double c = static_cast<double>(csi.n_rx()) * csi.n_tx() / (2.0 * sigma2 * l);
    const Eigen::MatrixXcd t_a = csi.a_tx.adjoint() * pbar;

    const double avg = detail::pair_term_average(signals, t_a, [&](const auto& beta) {
        double prod = 1.0;
        for (int i = 0; i < l; ++i) prod *= 1.0 + c * std::norm(beta(i));
        return std::isfinite(prod) ? 1.0 / prod : 0.0;
    });

    return {log2_cardinality(signals) - mi_constant_shift(csi.n_rx()) - avg,
            BoundKind::LowerBoundApprox};
}

inline BoundValue lower_bound(const StatisticalCsi& csi, const HybridPrecoder& p,
                              const SignalSet& signals, double sigma2) {
    return lower_bound_product(csi, p.product(), signals, sigma2);
}

inline BoundValue lower_bound_approx(const StatisticalCsi& csi, const HybridPrecoder& p,
                                     const SignalSet& signals, double sigma2) {
    return lower_bound_approx_product(csi, p.product(), signals, sigma2);
}

// Gradient of the bound approximation with respect to the composite precoder
// P = Fbar Bbar: softmax-weighted per-path outer products of the signal
// differences, pushed through the transmit steering matrix.
inline Eigen::MatrixXcd gradient_lower_bound_approx_product(const StatisticalCsi& csi,
                                                            const Eigen::MatrixXcd& pbar,
                                                            const SignalSet& signals, double sigma2) {
    detail::check_noise(sigma2);
    const int l = csi.n_paths();
    const int n_s = signals.n_streams;
    const int k_total = signals.size();
    const double c = static_cast<double>(csi.n_rx()) * csi.n_tx() / (2.0 * sigma2 * l);
    const double inv_c = 1.0 / c;
    const Eigen::MatrixXcd t_a = csi.a_tx.adjoint() * pbar;

    std::vector<Eigen::MatrixXcd> e_l(static_cast<std::size_t>(l),
                                      Eigen::MatrixXcd::Zero(n_s, n_s));
    Eigen::MatrixXcd deltas(n_s, k_total), beta(l, k_total), outer(n_s, n_s);
    Eigen::MatrixXd b2(l, k_total);
    Eigen::VectorXd t_row(k_total);
    for (int m = 0; m < k_total; ++m) {
        deltas = signals.vectors.col(m).replicate(1, k_total) - signals.vectors;
        beta.noalias() = t_a * deltas;
        b2 = beta.cwiseAbs2();
        for (int k = 0; k < k_total; ++k) {
            double prod = 1.0;
            for (int i = 0; i < l; ++i) prod *= 1.0 + c * b2(i, k);
            t_row(k) = std::isfinite(prod) ? 1.0 / prod : 0.0;
        }
        const double denom = t_row.sum(); // >= 1, anchored by the k = m term
        for (int k = 0; k < k_total; ++k) {
            if (k == m || t_row(k) == 0.0) continue;
            const double weight = t_row(k) / denom;
            outer.noalias() = deltas.col(k) * deltas.col(k).adjoint();
            for (int i = 0; i < l; ++i) {
                e_l[static_cast<std::size_t>(i)].noalias() += (weight / (inv_c + b2(i, k))) * outer;
            }
        }
    }
    const double scale = 1.0 / (std::numbers::ln2 * k_total);
    Eigen::MatrixXcd s(l, n_s);
    for (int i = 0; i < l; ++i) s.row(i) = scale * (t_a.row(i) * e_l[static_cast<std::size_t>(i)]);
    return csi.a_tx * s;
}

struct PrecoderGradient {
    Eigen::MatrixXd phi;     // real, zero off the partition support
    Eigen::MatrixXcd bbar;
};

inline PrecoderGradient gradient_lower_bound_approx(const StatisticalCsi& csi, const HybridPrecoder& p,
                                                    const SignalSet& signals, double sigma2) {
    const Eigen::MatrixXcd g = gradient_lower_bound_approx_product(csi, p.product(), signals, sigma2);
    PrecoderGradient out;
    out.bbar = p.fbar.adjoint() * g;
    out.phi = 2.0 * (g * p.bbar.adjoint()).cwiseProduct(p.fbar.conjugate()).imag();
    return out;
}

// Closed-form value of one pair term of the lower bound.
inline double pairwise_det_term(const StatisticalCsi& csi, const HybridPrecoder& p,
                                const SignalSet& signals, double sigma2, int m, int k) {
    detail::check_noise(sigma2);
    const int l = csi.n_paths();
    const double c = static_cast<double>(csi.n_rx()) * csi.n_tx() / (2.0 * sigma2 * l);
    const Eigen::VectorXcd w = std::sqrt(c) * (csi.a_tx.adjoint() * p.product() * signals.delta(m, k));
    const Eigen::MatrixXcd gram_t = (csi.a_rx.adjoint() * csi.a_rx).transpose();
    const Eigen::MatrixXcd mat =
        Eigen::MatrixXcd::Identity(l, l) + gram_t.cwiseProduct(w * w.adjoint());
    return std::exp(-detail::logdet_hpd(mat));
}

// Monte Carlo reference for the same pair term: 2^{N_r} E exp(-||e + n||^2 / s^2)
// over path gains and noise.
inline McEstimate pairwise_exponent_mc(RngStream rng, const StatisticalCsi& csi,
                                       const HybridPrecoder& p, const SignalSet& signals,
                                       double sigma2, int m, int k, long n_samples) {
    detail::check_noise(sigma2);
    const int l = csi.n_paths();
    const int n_r = csi.n_rx();
    const double scale = std::sqrt(static_cast<double>(n_r) * csi.n_tx() / l);
    const double sd = std::sqrt(sigma2);
    if (signals.delta(m, k).norm() == 0.0) {
        // e = 0 pairs integrate in closed form: 2^{N_r} * 2^{-N_r}.
        return {1.0, 0.0, n_samples};
    }
    const Eigen::VectorXcd q = csi.a_tx.adjoint() * p.product() * signals.delta(m, k);
    const double log_scale = n_r * std::numbers::ln2;

    double sum = 0.0, sum_sq = 0.0;
    Eigen::VectorXcd z(l), e(n_r);
    for (long s = 0; s < n_samples; ++s) {
        for (int i = 0; i < l; ++i) z(i) = rng.complex_normal() * q(i);
        e = scale * (csi.a_rx * z);
        double nsq = 0.0;
        for (int i = 0; i < n_r; ++i) {
            const cxd noise = sd * rng.complex_normal();
            nsq += std::norm(e(i) + noise);
        }
        const double val = std::exp(log_scale - nsq / sigma2);
        sum += val;
        sum_sq += val * val;
    }
    McEstimate est;
    est.n_samples = n_samples;
    est.value = sum / n_samples;
    const double var = (n_samples > 1) ? (sum_sq - sum * sum / n_samples) / (n_samples - 1) : 0.0;
    est.std_error = std::sqrt(std::max(0.0, var) / n_samples);
    return est;
}

// Monte Carlo estimate of the symbol-estimation error covariance
// E[(x - E[x|y])(x - E[x|y])^H] for y = T x + n.
inline Eigen::MatrixXcd mmse_matrix_mc(RngStream& rng, const Eigen::MatrixXcd& t,
                                       const SignalSet& signals, double sigma2, int n_samples) {
    detail::check_noise(sigma2);
    const int k_total = signals.size();
    const int n_s = signals.n_streams;
    const double sd = std::sqrt(sigma2);
    const Eigen::MatrixXcd u = t * signals.vectors;
    Eigen::VectorXd col_sq(k_total);
    for (int k = 0; k < k_total; ++k) col_sq(k) = u.col(k).squaredNorm();

    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(n_s, n_s);
    Eigen::VectorXcd y(t.rows());
    std::vector<double> logp(static_cast<std::size_t>(k_total));
    for (int s = 0; s < n_samples; ++s) {
        const int m = std::min<int>(k_total - 1, static_cast<int>(rng.uniform() * k_total));
        for (Eigen::Index i = 0; i < t.rows(); ++i) y(i) = u(i, m) + sd * rng.complex_normal();
        const Eigen::VectorXcd corr = u.adjoint() * y;
        double mx = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < k_total; ++k) {
            logp[static_cast<std::size_t>(k)] = (2.0 * corr(k).real() - col_sq(k)) / sigma2;
            mx = std::max(mx, logp[static_cast<std::size_t>(k)]);
        }
        double z = 0.0;
        for (int k = 0; k < k_total; ++k) {
            logp[static_cast<std::size_t>(k)] = std::exp(logp[static_cast<std::size_t>(k)] - mx);
            z += logp[static_cast<std::size_t>(k)];
        }
        Eigen::VectorXcd xhat = Eigen::VectorXcd::Zero(n_s);
        for (int k = 0; k < k_total; ++k)
            xhat += (logp[static_cast<std::size_t>(k)] / z) * signals.vectors.col(k);
        const Eigen::VectorXcd err = signals.vectors.col(m) - xhat;
        acc += err * err.adjoint();
    }
    return acc / static_cast<double>(n_samples);
}

} // namespace hybeam
