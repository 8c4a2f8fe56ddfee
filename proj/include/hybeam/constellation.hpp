#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <string_view>
#include <vector>

#include "hybeam/errors.hpp"

namespace hybeam {

using cxd = std::complex<double>;

enum class Modulation { Bpsk, Qpsk, Qam16 };

inline int modulation_order(Modulation m) {
    switch (m) {
        case Modulation::Bpsk: return 2;
        case Modulation::Qpsk: return 4;
        case Modulation::Qam16: return 16;
    }
    return 0;
}

inline const char* to_string(Modulation m) {
    switch (m) {
        case Modulation::Bpsk: return "bpsk";
        case Modulation::Qpsk: return "qpsk";
        case Modulation::Qam16: return "qam16";
    }
    return "?";
}

inline Modulation parse_modulation(std::string_view s) {
    if (s == "bpsk") return Modulation::Bpsk;
    if (s == "qpsk") return Modulation::Qpsk;
    if (s == "qam16") return Modulation::Qam16;
    throw ConfigError("unknown modulation: " + std::string(s));
}

// Unit average-energy symbol tables. 16QAM is the Gray-mapped square
// constellation scaled by 1/sqrt(10); QPSK is (+-1 +-j)/sqrt(2); BPSK +-1.
inline std::vector<cxd> constellation_points(Modulation m) {
    switch (m) {
        case Modulation::Bpsk:
            return {cxd(1.0, 0.0), cxd(-1.0, 0.0)};
        case Modulation::Qpsk: {
            const double s = std::numbers::sqrt2 / 2.0;
            return {cxd(s, s), cxd(s, -s), cxd(-s, s), cxd(-s, -s)};
        }
        case Modulation::Qam16: {
            // Gray levels per axis: bit pair 00,01,11,10 -> -3,-1,+1,+3.
            const double lv[4] = {-3.0, -1.0, 1.0, 3.0};
            const int gray[4] = {0, 1, 3, 2};
            double level[4];
            for (int g = 0; g < 4; ++g) level[gray[g]] = lv[g];
            const double s = 1.0 / std::sqrt(10.0);
            std::vector<cxd> pts(16);
            for (int b = 0; b < 16; ++b) {
                pts[b] = cxd(level[(b >> 2) & 3] * s, level[b & 3] * s);
            }
            return pts;
        }
    }
    return {};
}

// All K = M^n_streams input vectors, enumerated in a fixed lexicographic
// order (stream 0 is the most significant digit). Column k of `vectors`
// is x_k.
struct SignalSet {
    Modulation modulation = Modulation::Bpsk;
    int n_streams = 1;
    Eigen::MatrixXcd vectors; // n_streams x K

    int size() const { return static_cast<int>(vectors.cols()); }

    Eigen::VectorXcd delta(int m, int k) const {
        return vectors.col(m) - vectors.col(k);
    }
};

inline constexpr long kSignalEnumerationCap = 1L << 24;

inline SignalSet build_signal_set(Modulation modulation, int n_streams) {
    if (n_streams < 1) throw DimensionMismatch("n_streams must be >= 1");
    const long order = modulation_order(modulation);
    long count = 1;
    for (int s = 0; s < n_streams; ++s) {
        if (count > kSignalEnumerationCap / order) {
            throw BudgetExceeded("signal set exceeds enumeration cap; stream pairs instead");
        }
        count *= order;
    }
    const std::vector<cxd> pts = constellation_points(modulation);
    SignalSet set;
    set.modulation = modulation;
    set.n_streams = n_streams;
    set.vectors.resize(n_streams, count);
    for (long k = 0; k < count; ++k) {
        long rem = k;
        for (int s = n_streams - 1; s >= 0; --s) {
            set.vectors(s, k) = pts[static_cast<std::size_t>(rem % order)];
            rem /= order;
        }
    }
    return set;
}

// Visits every ordered pair (m, k) once with delta = x_m - x_k; the table
// is never materialized.
template <typename Fn>
void for_each_difference(const SignalSet& set, Fn&& fn) {
    const int k_total = set.size();
    Eigen::VectorXcd delta(set.n_streams);
    for (int m = 0; m < k_total; ++m) {
        for (int k = 0; k < k_total; ++k) {
            delta = set.vectors.col(m) - set.vectors.col(k);
            fn(m, k, delta);
        }
    }
}

} // namespace hybeam
