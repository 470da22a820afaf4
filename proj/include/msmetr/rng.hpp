#pragma once

#include <cmath>
#include <cstdint>

namespace msmetr {

/// PCG-XSL-RR 128/64 generator with selectable streams.
///
/// Every chain and every reproducibility-sensitive component owns its own
/// stream, keyed by (seed, stream): identical keys give identical draw
/// sequences on every platform, which is what makes seeded runs bit-exact.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0x853c49e6748fea9bULL, std::uint64_t stream = 0)
        : state_(0), inc_((static_cast<u128>(splitmix(stream + 0x9e3779b97f4a7c15ULL)) << 64
                           | splitmix(stream + 0x7f4a7c15f39cc060ULL)) | 1u) {
        next();
        state_ += (static_cast<u128>(splitmix(seed)) << 64) | splitmix(seed + 0xda3e39cb94b95bdbULL);
        next();
    }

    /// Derive an independent stream from this generator's key space.
    Rng spawn(std::uint64_t substream) const {
        Rng r = *this;
        r.inc_ = (r.inc_ + (static_cast<u128>(splitmix(substream)) << 1)) | 1u;
        r.next();
        return r;
    }

    std::uint64_t next() {
        const u128 mul = (static_cast<u128>(2549297995355413924ULL) << 64) | 4865540595714422341ULL;
        state_ = state_ * mul + inc_;
        std::uint64_t xored = static_cast<std::uint64_t>(state_ >> 64) ^ static_cast<std::uint64_t>(state_);
        unsigned rot = static_cast<unsigned>(state_ >> 122);
        return (xored >> rot) | (xored << ((-rot) & 63u));
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1]; safe argument for log().
    double uniform_pos() { return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (two uniforms per call).
    double normal() {
        double u1 = uniform_pos();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Lemire-style rejection to remove modulo bias.
        std::uint64_t x = next();
        u128 m = static_cast<u128>(x) * n;
        std::uint64_t l = static_cast<std::uint64_t>(m);
        if (l < n) {
            std::uint64_t t = (-n) % n;
            while (l < t) {
                x = next();
                m = static_cast<u128>(x) * n;
                l = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

private:
    using u128 = unsigned __int128;

    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    u128 state_;
    u128 inc_;
};

}  // namespace msmetr
