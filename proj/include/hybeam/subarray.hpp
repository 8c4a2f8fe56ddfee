#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "hybeam/channel.hpp"
#include "hybeam/errors.hpp"
#include "hybeam/rng.hpp"

namespace hybeam {

using BigInt = boost::multiprecision::cpp_int;

// Disjoint cover of antenna indices {0..n_antennas-1}, one group per RF chain.
struct Partition {
    std::vector<std::vector<int>> groups;
    int n_antennas = 0;

    int n_groups() const { return static_cast<int>(groups.size()); }

    bool valid() const {
        std::vector<int> seen(n_antennas, 0);
        for (const auto& g : groups) {
            if (g.empty()) return false;
            for (int i : g) {
                if (i < 0 || i >= n_antennas || seen[i]) return false;
                seen[i] = 1;
            }
        }
        for (int s : seen)
            if (!s) return false;
        return true;
    }

    // Text format: one line per RF chain, 1-based antenna indices, comma separated.
    void serialize(std::ostream& out) const {
        for (const auto& g : groups) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (i) out << ",";
                out << (g[i] + 1);
            }
            out << "\n";
        }
    }
};

// Number of partitions of n items into k nonempty groups (exact arithmetic).
inline BigInt stirling2(int n, int k) {
    if (k < 1 || k > n) return 0;
    auto binom = [](int a, int b) {
        BigInt r = 1;
        for (int i = 1; i <= b; ++i) {
            r *= (a - b + i);
            r /= i;
        }
        return r;
    };
    BigInt sum = 0;
    for (int j = 0; j <= k; ++j) {
        BigInt term = binom(k, j) * boost::multiprecision::pow(BigInt(j), static_cast<unsigned>(n));
        if ((k - j) % 2 == 0)
            sum += term;
        else
            sum -= term;
    }
    BigInt fact = 1;
    for (int i = 2; i <= k; ++i) fact *= i;
    return sum / fact;
}

namespace detail {

template <typename Fn>
void partition_rec(int n, int k, int pos, int used, std::vector<int>& assign, Fn& fn) {
    if (pos == n) {
        if (used == k) {
            Partition p;
            p.n_antennas = n;
            p.groups.assign(k, {});
            for (int i = 0; i < n; ++i) p.groups[assign[i]].push_back(i);
            fn(p);
        }
        return;
    }
    const int remaining = n - pos;
    const int limit = std::min(used + 1, k);
    for (int b = 0; b < limit; ++b) {
        const int new_used = std::max(used, b + 1);
        if (new_used + (remaining - 1) < k) continue;
        assign[pos] = b;
        partition_rec(n, k, pos + 1, new_used, assign, fn);
    }
}

} // namespace detail

// Enumerates every partition into exactly k nonempty groups, in restricted
// growth order. Intended for small n; guard with stirling2 first.
template <typename Fn>
void for_each_partition(int n, int k, Fn fn) {
    if (k < 1 || k > n) return;
    std::vector<int> assign(n, 0);
    detail::partition_rec(n, k, 0, 0, assign, fn);
}

// tr(Fbar^H At At^H Fbar); the caller supplies a column-orthonormal Fbar.
inline double effective_gain(const Eigen::MatrixXcd& fbar, const Eigen::MatrixXcd& a_tx) {
    if (fbar.rows() != a_tx.rows()) throw DimensionMismatch("effective_gain: row mismatch");
    return (a_tx.adjoint() * fbar).squaredNorm();
}

// F (F^H F)^{-1/2} for a general full-column-rank F.
inline Eigen::MatrixXcd whiten(const Eigen::MatrixXcd& f) {
    Eigen::MatrixXcd gram = f.adjoint() * f;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram);
    Eigen::VectorXd ev = es.eigenvalues();
    Eigen::VectorXd inv_sqrt(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) <= 0.0) throw DimensionMismatch("whiten: rank-deficient matrix");
        inv_sqrt(i) = 1.0 / std::sqrt(ev(i));
    }
    return f * es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().adjoint();
}

// Selection matrices have disjoint unit-modulus columns, so whitening is a
// per-column rescale by 1/sqrt(|S_j|).
inline Eigen::MatrixXcd selection_to_fbar(const Eigen::MatrixXcd& f) {
    Eigen::MatrixXcd fbar = f;
    for (Eigen::Index j = 0; j < f.cols(); ++j) {
        const double norm = f.col(j).norm();
        if (norm <= 0.0) throw DimensionMismatch("selection matrix has an empty column");
        fbar.col(j) /= norm;
    }
    return fbar;
}

inline Partition partition_from_selection(const Eigen::MatrixXcd& f) {
    Partition p;
    p.n_antennas = static_cast<int>(f.rows());
    p.groups.assign(static_cast<std::size_t>(f.cols()), {});
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
        for (Eigen::Index j = 0; j < f.cols(); ++j) {
            if (std::abs(f(i, j)) != 0.0) p.groups[static_cast<std::size_t>(j)].push_back(static_cast<int>(i));
        }
    }
    return p;
}

inline Eigen::MatrixXcd selection_from_partition(const Partition& p) {
    Eigen::MatrixXcd f = Eigen::MatrixXcd::Zero(p.n_antennas, p.n_groups());
    for (int j = 0; j < p.n_groups(); ++j)
        for (int i : p.groups[static_cast<std::size_t>(j)]) f(i, j) = 1.0;
    return f;
}

// Haar-ish random unitary from QR of a complex Gaussian matrix.
inline Eigen::MatrixXcd random_unitary(RngStream& rng, int n) {
    Eigen::MatrixXcd g(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) g(i, j) = rng.complex_normal();
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
    Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(n, n);
    Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < n; ++j) {
        const std::complex<double> d = r(j, j);
        q.col(j) *= (std::abs(d) > 0.0) ? d / std::abs(d) : 1.0;
    }
    return q;
}

// Left singular basis of a_tx for the n_rf largest singular values. When the
// path count is below n_rf the basis is completed with orthonormalized
// Gaussian columns, which span directions with zero gain.
inline Eigen::MatrixXcd spectral_basis(const Eigen::MatrixXcd& a_tx, int n_rf, RngStream& rng) {
    const int n_t = static_cast<int>(a_tx.rows());
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a_tx, Eigen::ComputeThinU);
    const int have = std::min<int>(static_cast<int>(svd.matrixU().cols()), n_rf);
    Eigen::MatrixXcd u(n_t, n_rf);
    u.leftCols(have) = svd.matrixU().leftCols(have);
    for (int j = have; j < n_rf; ++j) {
        Eigen::VectorXcd v(n_t);
        double norm = 0.0;
        do {
            for (int i = 0; i < n_t; ++i) v(i) = rng.complex_normal();
            for (int p = 0; p < j; ++p) v -= u.col(p).dot(v) * u.col(p);
            for (int p = 0; p < j; ++p) v -= u.col(p).dot(v) * u.col(p);
            norm = v.norm();
        } while (norm < 1e-8);
        u.col(j) = v / norm;
    }
    return u;
}

inline Eigen::MatrixXcd unconstrained_seed(const Eigen::MatrixXcd& a_tx, int n_rf, RngStream& rng) {
    return spectral_basis(a_tx, n_rf, rng) * random_unitary(rng, n_rf);
}

// Per-row projection onto selection matrices: keep the largest-magnitude
// entry (ties -> smallest column) and normalize it to unit modulus.
inline Eigen::MatrixXcd round_to_selection(const Eigen::MatrixXcd& uar) {
    Eigen::MatrixXcd f = Eigen::MatrixXcd::Zero(uar.rows(), uar.cols());
    for (Eigen::Index i = 0; i < uar.rows(); ++i) {
        Eigen::Index best = 0;
        double best_mag = -1.0;
        for (Eigen::Index j = 0; j < uar.cols(); ++j) {
            const double mag = std::abs(uar(i, j));
            if (mag > best_mag) {
                best_mag = mag;
                best = j;
            }
        }
        f(i, best) = (best_mag < 1e-12) ? 1.0 : uar(i, best) / best_mag;
    }
    return f;
}

// Same projection with the support pattern frozen to a given partition.
inline Eigen::MatrixXcd round_phases_on_support(const Eigen::MatrixXcd& uar, const Partition& support) {
    Eigen::MatrixXcd f = Eigen::MatrixXcd::Zero(uar.rows(), uar.cols());
    for (int j = 0; j < support.n_groups(); ++j) {
        for (int i : support.groups[static_cast<std::size_t>(j)]) {
            const double mag = std::abs(uar(i, j));
            f(i, j) = (mag < 1e-12) ? 1.0 : uar(i, j) / mag;
        }
    }
    return f;
}

// Unitary R minimizing ||F - U_A R||_F via the SVD of F^H U_A.
inline Eigen::MatrixXcd procrustes_rotation(const Eigen::MatrixXcd& f, const Eigen::MatrixXcd& u_a) {
    Eigen::MatrixXcd z = f.adjoint() * u_a;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(z, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixV() * svd.matrixU().adjoint();
}

struct AltMinRun {
    Eigen::MatrixXcd f;
    Eigen::MatrixXcd r;
    std::vector<double> residual_trace; // ||F - U_A R||_F^2 per iteration
};

// Alternates the row-wise rounding with the orthogonal-alignment update until
// the residual stops improving. With a support, only phases move.
inline AltMinRun alternating_minimization(const Eigen::MatrixXcd& u_a, Eigen::MatrixXcd r,
                                          double tol, int max_iter,
                                          const Partition* support = nullptr) {
    AltMinRun run;
    run.r = std::move(r);
    double prev = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < max_iter; ++iter) {
        const Eigen::MatrixXcd uar = u_a * run.r;
        run.f = support ? round_phases_on_support(uar, *support) : round_to_selection(uar);
        run.r = procrustes_rotation(run.f, u_a);
        const double res = (run.f - u_a * run.r).squaredNorm();
        run.residual_trace.push_back(res);
        if (std::isfinite(prev) && prev - res < tol * std::max(prev, 1.0)) break;
        prev = res;
    }
    return run;
}

// Moves rows from over-full columns into empty ones, largest magnitude at the
// empty column first; every group must end up nonempty.
inline Eigen::MatrixXcd repair_empty_columns(Eigen::MatrixXcd f, const Eigen::MatrixXcd& uar) {
    const Eigen::Index n_t = f.rows(), n_rf = f.cols();
    std::vector<int> count(static_cast<std::size_t>(n_rf), 0);
    std::vector<Eigen::Index> col_of(static_cast<std::size_t>(n_t), 0);
    for (Eigen::Index i = 0; i < n_t; ++i) {
        for (Eigen::Index j = 0; j < n_rf; ++j) {
            if (std::abs(f(i, j)) != 0.0) {
                col_of[static_cast<std::size_t>(i)] = j;
                ++count[static_cast<std::size_t>(j)];
            }
        }
    }
    for (Eigen::Index j = 0; j < n_rf; ++j) {
        while (count[static_cast<std::size_t>(j)] == 0) {
            Eigen::Index pick = -1;
            double best = -1.0;
            for (Eigen::Index i = 0; i < n_t; ++i) {
                if (count[static_cast<std::size_t>(col_of[static_cast<std::size_t>(i)])] < 2) continue;
                const double mag = std::abs(uar(i, j));
                if (mag > best) {
                    best = mag;
                    pick = i;
                }
            }
            if (pick < 0) throw DimensionMismatch("cannot repair empty column: too few antennas");
            const Eigen::Index from = col_of[static_cast<std::size_t>(pick)];
            f(pick, from) = 0.0;
            f(pick, j) = (best < 1e-12) ? 1.0 : uar(pick, j) / best;
            col_of[static_cast<std::size_t>(pick)] = j;
            --count[static_cast<std::size_t>(from)];
            ++count[static_cast<std::size_t>(j)];
        }
    }
    return f;
}

struct SubarrayDesign {
    Eigen::MatrixXcd fbar; // column-orthonormal initial analog precoder
    Partition partition;
    std::vector<double> residual_trace;              // winning restart
    std::vector<std::vector<double>> restart_traces; // all restarts
    double gain = 0.0;                               // ||A_t^H Fbar||_F^2
};

// Dynamic subarray design: alternating minimization from random rotations,
// keeping the restart with the largest effective gain.
inline SubarrayDesign design_dynamic_subarray(const Eigen::MatrixXcd& a_tx, int n_rf, RngStream& rng,
                                              int restarts = 8, double tol = 1e-8, int max_iter = 200) {
    if (restarts < 1) throw DimensionMismatch("restarts must be >= 1");
    const Eigen::MatrixXcd u_a = spectral_basis(a_tx, n_rf, rng);
    SubarrayDesign best;
    best.gain = -1.0;
    for (int s = 0; s < restarts; ++s) {
        RngStream stream = rng.split(static_cast<std::uint64_t>(s) + 1);
        AltMinRun run = alternating_minimization(u_a, random_unitary(stream, n_rf), tol, max_iter);
        const Eigen::MatrixXcd uar = u_a * run.r;
        const Eigen::MatrixXcd f = repair_empty_columns(run.f, uar);
        const Eigen::MatrixXcd fbar = selection_to_fbar(f);
        const double gain = effective_gain(fbar, a_tx);
        best.restart_traces.push_back(run.residual_trace);
        if (gain > best.gain) {
            best.gain = gain;
            best.fbar = fbar;
            best.partition = partition_from_selection(fbar);
            best.residual_trace = run.residual_trace;
        }
    }
    return best;
}

struct ExhaustiveSearchOptions {
    std::uint64_t max_partitions = 100000;
    int phase_restarts = 16;
    double tol = 1e-10;
    int max_iter = 500;
};

struct ExhaustiveSearchResult {
    Partition partition;
    double gain = 0.0;
    std::uint64_t visited = 0;
};

namespace detail {

// Maximize u^H M u over unit-modulus u for Hermitian PSD M: the phase update
// u <- phase(M u) never decreases the quadratic form.
inline double phase_ascent(const Eigen::MatrixXcd& m, Eigen::VectorXcd u, double tol, int max_iter) {
    double value = (u.adjoint() * m * u)(0).real();
    for (int iter = 0; iter < max_iter; ++iter) {
        Eigen::VectorXcd mu = m * u;
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            const double mag = std::abs(mu(i));
            if (mag > 1e-14) u(i) = mu(i) / mag;
        }
        const double next = (u.adjoint() * m * u)(0).real();
        if (next - value <= tol * std::max(std::abs(value), 1.0)) return next;
        value = next;
    }
    return value;
}

} // namespace detail

// Exhaustive reference for tiny instances: every partition is visited, and
// each group's phase problem (a unit-modulus quadratic form in A_t A_t^H,
// decoupled per column) is ascended from multiple random starts.
inline ExhaustiveSearchResult exhaustive_partition_search(const Eigen::MatrixXcd& a_tx, int n_rf,
                                                          RngStream& rng,
                                                          const ExhaustiveSearchOptions& opts = {}) {
    const int n_t = static_cast<int>(a_tx.rows());
    if (stirling2(n_t, n_rf) > BigInt(opts.max_partitions)) {
        throw TooLarge("partition space exceeds the exhaustive-search bound");
    }
    const Eigen::MatrixXcd outer = a_tx * a_tx.adjoint(); // N_t x N_t, Hermitian PSD
    ExhaustiveSearchResult result;
    result.gain = -1.0;
    std::uint64_t index = 0;
    for_each_partition(n_t, n_rf, [&](const Partition& p) {
        ++result.visited;
        RngStream part_stream = rng.split(0x5eed0000ULL + index++);
        double total = 0.0;
        for (int j = 0; j < p.n_groups(); ++j) {
            const auto& group = p.groups[static_cast<std::size_t>(j)];
            const int sz = static_cast<int>(group.size());
            Eigen::MatrixXcd m(sz, sz);
            for (int a = 0; a < sz; ++a)
                for (int b = 0; b < sz; ++b) m(a, b) = outer(group[a], group[b]);
            double best = -1.0;
            RngStream group_stream = part_stream.split(static_cast<std::uint64_t>(j));
            for (int s = 0; s < opts.phase_restarts; ++s) {
                Eigen::VectorXcd u(sz);
                if (s == 0) {
                    u.setOnes();
                } else {
                    for (int a = 0; a < sz; ++a)
                        u(a) = std::polar(1.0, group_stream.uniform() * 2.0 * std::numbers::pi);
                }
                best = std::max(best, detail::phase_ascent(m, u, opts.tol, opts.max_iter));
            }
            total += best / sz;
        }
        if (total > result.gain) {
            result.gain = total;
            result.partition = p;
        }
    });
    return result;
}

// Contiguous equal-size blocks; the fixed-subarray baseline.
inline Partition fixed_partition(int n_t, int n_rf) {
    if (n_rf < 1 || n_t % n_rf != 0) throw NotDivisible("antenna count not divisible by RF chain count");
    const int q = n_t / n_rf;
    Partition p;
    p.n_antennas = n_t;
    p.groups.resize(static_cast<std::size_t>(n_rf));
    for (int j = 0; j < n_rf; ++j)
        for (int i = 0; i < q; ++i) p.groups[static_cast<std::size_t>(j)].push_back(j * q + i);
    return p;
}

} // namespace hybeam
