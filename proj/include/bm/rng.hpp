#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace bm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

namespace detail {

// SplitMix64 finalizer; full-avalanche 64-bit mix.
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

// Non-commutative two-input hash used for key derivation along split paths.
inline std::uint64_t derive_key(std::uint64_t parent, std::uint64_t label) {
    return mix64(parent + 0x9E3779B97F4A7C15ULL * mix64(label + 0x632BE59BD9B4E019ULL));
}

} // namespace detail

/// Counter-based PRNG stream (Philox4x32-10) with hierarchical splitting.
///
/// Each stream owns a 64-bit key derived by hashing the root seed with the
/// sequence of split labels, plus a 128-bit block counter, so the period per
/// key is 2^128 blocks. Gaussian variates come from Box-Muller applied to
/// 53-bit uniforms (one spare cached per pair); this transform is part of the
/// stream contract and must not change within a build if reproducibility of
/// recorded outputs matters.
class RngStream {
public:
    explicit RngStream(std::uint64_t root_seed)
        : key_(detail::mix64(root_seed ^ 0x8E8B4B9BE5B1D3C7ULL)) {
        seed_path_.push_back(root_seed);
    }

    /// Child stream deterministic in (this stream's seed path, label).
    /// The parent is unaffected.
    RngStream split(std::uint64_t label) const {
        RngStream child(*this);
        child.key_ = detail::derive_key(key_, label);
        child.counter_[0] = child.counter_[1] = child.counter_[2] = child.counter_[3] = 0;
        child.buf_pos_ = 4;
        child.have_spare_ = false;
        child.spare_ = 0.0;
        child.seed_path_.push_back(label);
        return child;
    }

    std::uint64_t next_u64() {
        const std::uint32_t lo = next_u32();
        const std::uint32_t hi = next_u32();
        return (static_cast<std::uint64_t>(hi) << 32) | lo;
    }

    /// Uniform on (0, 1]; never returns 0 so log() is safe.
    double next_uniform() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; generates pairs and caches the spare.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    const std::vector<std::uint64_t>& seed_path() const noexcept { return seed_path_; }

private:
    std::uint32_t next_u32() {
        if (buf_pos_ >= 4) {
            philox_block();
            buf_pos_ = 0;
        }
        return buf_[buf_pos_++];
    }

    void philox_block() {
        std::uint32_t c0 = counter_[0], c1 = counter_[1], c2 = counter_[2], c3 = counter_[3];
        std::uint32_t k0 = static_cast<std::uint32_t>(key_);
        std::uint32_t k1 = static_cast<std::uint32_t>(key_ >> 32);
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = 0xD2511F53ULL * c0;
            const std::uint64_t p1 = 0xCD9E8D57ULL * c2;
            const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            c0 = hi1 ^ c1 ^ k0;
            c1 = lo1;
            c2 = hi0 ^ c3 ^ k1;
            c3 = lo0;
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        buf_[0] = c0;
        buf_[1] = c1;
        buf_[2] = c2;
        buf_[3] = c3;
        // 128-bit counter increment
        if (++counter_[0] == 0 && ++counter_[1] == 0 && ++counter_[2] == 0) ++counter_[3];
    }

    std::uint64_t key_ = 0;
    std::uint32_t counter_[4] = {0, 0, 0, 0};
    std::uint32_t buf_[4] = {0, 0, 0, 0};
    int buf_pos_ = 4;
    bool have_spare_ = false;
    double spare_ = 0.0;
    std::vector<std::uint64_t> seed_path_;
};

inline RngStream split_stream(const RngStream& parent, std::uint64_t label) {
    return parent.split(label);
}

/// One standard-normal vector of the given dimension; advances the stream.
inline Vec draw_gaussian(RngStream& stream, Eigen::Index dim) {
    if (dim < 1) throw std::invalid_argument("draw_gaussian: dim must be >= 1");
    Vec v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = stream.next_gaussian();
    return v;
}

inline void check_same_dim(const Vec& a, const Vec& b, const char* where) {
    if (a.size() != b.size()) {
        throw std::invalid_argument(std::string(where) + ": dimension mismatch");
    }
}

} // namespace bm
