#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>

namespace hybeam {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

// Counter-based generator (Philox-4x32-10). A stream is identified by a
// 128-bit key derived from (seed, stream path); successive blocks come from
// incrementing a counter, so copies of a stream replay the same sequence
// (used for common-random-number evaluations) and split() yields
// statistically independent child streams.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream = 0) {
        std::uint64_t a = detail::splitmix64(seed);
        std::uint64_t b = detail::splitmix64(a ^ detail::splitmix64(stream + 0x632be59bd9b4e019ULL));
        key0_ = static_cast<std::uint32_t>(a);
        key1_ = static_cast<std::uint32_t>(b);
        ident_ = a ^ (b << 1);
    }

    // Independent child stream; deterministic in (parent identity, child index).
    RngStream split(std::uint64_t child) const {
        RngStream out;
        std::uint64_t a = detail::splitmix64(ident_ ^ detail::splitmix64(child + 0x9e3779b97f4a7c15ULL));
        std::uint64_t b = detail::splitmix64(a + child);
        out.key0_ = static_cast<std::uint32_t>(a);
        out.key1_ = static_cast<std::uint32_t>(b >> 32);
        out.ident_ = a ^ (b << 1);
        return out;
    }

    std::uint64_t next_u64() {
        if (have_buffered_) {
            have_buffered_ = false;
            return buffered_;
        }
        std::uint32_t c0 = static_cast<std::uint32_t>(counter_);
        std::uint32_t c1 = static_cast<std::uint32_t>(counter_ >> 32);
        ++counter_;
        std::uint32_t x0 = c0, x1 = c1, x2 = 0x243f6a88u, x3 = 0x85a308d3u;
        std::uint32_t k0 = key0_, k1 = key1_;
        for (int round = 0; round < 10; ++round) {
            std::uint64_t p0 = 0xD2511F53ULL * x0;
            std::uint64_t p1 = 0xCD9E8D57ULL * x2;
            std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
            std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
            std::uint32_t y0 = hi1 ^ x1 ^ k0;
            std::uint32_t y1 = lo1;
            std::uint32_t y2 = hi0 ^ x3 ^ k1;
            std::uint32_t y3 = lo0;
            x0 = y0; x1 = y1; x2 = y2; x3 = y3;
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        buffered_ = (static_cast<std::uint64_t>(x2) << 32) | x3;
        have_buffered_ = true;
        return (static_cast<std::uint64_t>(x0) << 32) | x1;
    }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; the second variate of each pair is cached.
    double normal() {
        if (have_normal_) {
            have_normal_ = false;
            return cached_normal_;
        }
        double u1 = 1.0 - uniform(); // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        cached_normal_ = r * std::sin(a);
        have_normal_ = true;
        return r * std::cos(a);
    }

    // Circularly-symmetric complex normal, zero mean, unit variance.
    std::complex<double> complex_normal() {
        double re = normal();
        double im = normal();
        return {re * std::numbers::sqrt2 / 2.0, im * std::numbers::sqrt2 / 2.0};
    }

private:
    std::uint32_t key0_ = 0;
    std::uint32_t key1_ = 0;
    std::uint64_t ident_ = 0;
    std::uint64_t counter_ = 0;
    std::uint64_t buffered_ = 0;
    bool have_buffered_ = false;
    double cached_normal_ = 0.0;
    bool have_normal_ = false;
};

} // namespace hybeam
